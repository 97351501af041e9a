use holomix::green::*;
use holomix::lattice::Grid;
use holomix::opalg::NonlocalOperator;
use num_complex::Complex64 as C;
use std::sync::Arc;

fn main() {
    let g = Arc::new(Grid::new(&[128, 2], &[1.0, 1.0]).unwrap());
    let m = Mass::real(1.0);
    let eps = 0.1;
    let s = retarded_green(&m, g.clone(), eps).unwrap();
    let n = g.num_points();
    let wmax = g.shape()[0] as f64 / 2.0 * g.momentum_spacing()[0];
    for chi_frac in [0.35f64, 0.5] {
        let mut scalar = NonlocalOperator::zeros(g.clone(), 1);
        for r in 0..n {
            let k = g.momentum(r);
            let chi = (-k[0]*k[0]/(2.0*(chi_frac*wmax).powi(2))).exp();
            for c in 0..n {
                scalar.mat[(r, c)] = s.entry(r, 0, c, 0) * C::new(chi, 0.0);
            }
        }
        let pk = scalar.position_kernel().unwrap();
        // slice at fixed x1 = y1 = 0: kernel(t, 0; 0, 0) vs t = dt
        println!("chi_frac {chi_frac}: kernel |value| vs dt (y=origin):");
        let y = g.flat_from_signed(&[0, 0]);
        for dt in [-10i64, -6, -4, -2, -1, 0, 1, 2, 4, 6, 10, 14] {
            let x = g.flat_from_signed(&[dt, 0]);
            println!("  dt={dt:4}: {:.4e}", pk[(x, y)].norm());
        }
    }
}
