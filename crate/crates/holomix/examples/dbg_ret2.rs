use holomix::green::*;
use holomix::lattice::Grid;
use holomix::opalg::NonlocalOperator;
use num_complex::Complex64 as C;
use std::sync::Arc;

fn main() {
    let g = Arc::new(Grid::new(&[128, 2], &[1.0, 1.0]).unwrap());
    let m = Mass::real(1.0);
    let s = retarded_green(&m, g.clone(), 0.1).unwrap();
    let n = g.num_points();
    let wmax = g.shape()[0] as f64 / 2.0 * g.momentum_spacing()[0];
    let variants: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("gauss20", Box::new(move |w: f64| (-w * w / (2.0 * (0.20 * wmax).powi(2))).exp())),
        ("gauss25", Box::new(move |w: f64| (-w * w / (2.0 * (0.25 * wmax).powi(2))).exp())),
        ("gauss30", Box::new(move |w: f64| (-w * w / (2.0 * (0.30 * wmax).powi(2))).exp())),
        ("hann2", Box::new(move |w: f64| {
            let t = (w / wmax).abs();
            if t >= 1.0 { 0.0 } else { let h = 0.5 * (1.0 + (std::f64::consts::PI * t).cos()); h * h }
        })),
        ("gausshann", Box::new(move |w: f64| {
            let t = (w / wmax).abs();
            let hann = if t >= 1.0 { 0.0 } else { 0.5 * (1.0 + (std::f64::consts::PI * t).cos()) };
            (-w * w / (2.0 * (0.3 * wmax).powi(2))).exp() * hann
        })),
    ];
    for (name, chi) in &variants {
        let mut scalar = NonlocalOperator::zeros(g.clone(), 1);
        for r in 0..n {
            let k = g.momentum(r);
            for c in 0..n {
                scalar.mat[(r, c)] = s.entry(r, 0, c, 0) * C::new(chi(k[0]), 0.0);
            }
        }
        let pk = scalar.position_kernel().unwrap();
        for (lo, hi) in [(2i64, 10i64), (4, 12)] {
            let mut fwd = 0.0f64;
            let mut bwd = 0.0f64;
            for x in 0..n {
                let sx = g.signed_index(x);
                for y in 0..n {
                    let sy = g.signed_index(y);
                    let dt = sx[0] - sy[0];
                    if dt >= lo && dt <= hi { fwd += pk[(x, y)].norm_sqr(); }
                    else if dt <= -lo && dt >= -hi { bwd += pk[(x, y)].norm_sqr(); }
                }
            }
            println!("{name} window [{lo},{hi}]: ratio {:.3e}", (bwd / fwd).sqrt());
        }
    }
}
