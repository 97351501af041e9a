fn main() {
    let s = holomix::wick::family_suppression_slope(&[8, 16, 32, 64]).unwrap();
    println!("family suppression slope over {{8,16,32,64}}: {s:.4}");
}
