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
    let chi = |w: f64| (-w * w / (2.0 * (0.25 * wmax).powi(2))).exp();
    // full 4x4 spin norm, not just (0,0)
    for spin in 0..1 {
        let _ = spin;
    }
    let mut scalar = NonlocalOperator::zeros(g.clone(), 1);
    for r in 0..n {
        let k = g.momentum(r);
        for c in 0..n {
            scalar.mat[(r, c)] = s.entry(r, 0, c, 0) * C::new(chi(k[0]), 0.0);
        }
    }
    let pk = scalar.position_kernel().unwrap();
    let y = g.flat_from_signed(&[0, 0]);
    println!("(0,0) spin, vs (dt, dx):");
    for dt in [-12i64, -8, -6, -4, 6, 8] {
        for dx in [0i64, -1] {
            let x = g.flat_from_signed(&[dt, dx]);
            println!("  dt={dt:4} dx={dx:2}: {:.4e}", pk[(x, y)].norm());
        }
    }
    // spin (0,2)-component (couples via gamma1 k1)
    let mut s02 = NonlocalOperator::zeros(g.clone(), 1);
    for r in 0..n {
        let k = g.momentum(r);
        for c in 0..n {
            s02.mat[(r, c)] = s.entry(r, 0, c, 3) * C::new(chi(k[0]), 0.0);
        }
    }
    let pk2 = s02.position_kernel().unwrap();
    println!("(0,3) spin:");
    for dt in [-8i64, -4, 4, 8] {
        let x = g.flat_from_signed(&[dt, 0]);
        println!("  dt={dt:4}: {:.4e}", pk2[(x, y)].norm());
    }
}
