fn main() {
    println!("holomix cli placeholder");
}
