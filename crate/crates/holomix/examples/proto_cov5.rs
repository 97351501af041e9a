use holomix::lattice::Grid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

fn periodized_exact(x: &[f64], l: f64) -> f64 {
    let mut acc = 0.0;
    for n0 in -1..=1 {
        let t = (x[0] + n0 as f64 * l).abs();
        for n1 in -2..=2i64 {
            for n2 in -2..=2i64 {
                for n3 in -2..=2i64 {
                    let r = ((x[1] + n1 as f64 * l).powi(2)
                        + (x[2] + n2 as f64 * l).powi(2)
                        + (x[3] + n3 as f64 * l).powi(2))
                    .sqrt();
                    if r > t && r > 0.0 {
                        acc += 1.0 / (16.0 * std::f64::consts::PI.powi(2) * r);
                    }
                }
            }
        }
    }
    acc
}

fn main() {
    let n = 48usize;
    let g = Arc::new(Grid::uniform(4, n, 1.0).unwrap());
    let dp = g.momentum_spacing()[0];
    let l = n as f64;
    let target: Vec<f64> = (0..g.num_points())
        .into_par_iter()
        .map(|i| periodized_exact(&g.position(i), l))
        .collect();
    let tmean = target.iter().sum::<f64>() / target.len() as f64;

    // cell-averaged hhat: integrate dq0 of the shell delta exactly over the
    // q0 cell, and average 1/(4 r^2)-type weight over the spatial cell by
    // Gauss-Legendre subsampling.
    let gl: [(f64, f64); 4] = [
        (-0.8611363115940526, 0.3478548451374538),
        (-0.3399810435848563, 0.6521451548625461),
        (0.3399810435848563, 0.6521451548625461),
        (0.8611363115940526, 0.3478548451374538),
    ];
    let hat: Vec<Complex64> = (0..g.num_points())
        .into_par_iter()
        .map(|i| {
            let p = g.momentum(i);
            let q0 = p[0];
            if q0 == 0.0 {
                return Complex64::default();
            }
            let q0lo = q0 - 0.5 * dp;
            let q0hi = q0 + 0.5 * dp;
            // average over the spatial cell
            let mut acc = 0.0;
            for (u1, w1) in gl {
                for (u2, w2) in gl {
                    for (u3, w3) in gl {
                        let k1 = p[1] + 0.5 * dp * u1;
                        let k2 = p[2] + 0.5 * dp * u2;
                        let k3 = p[3] + 0.5 * dp * u3;
                        let r = (k1 * k1 + k2 * k2 + k3 * k3).sqrt();
                        if r == 0.0 {
                            continue;
                        }
                        // q0 integral of [d(q0-r)+d(q0+r)]/(4 r |q0|) over the cell:
                        // nonzero iff |q0| range contains r
                        let a = q0lo.abs().min(q0hi.abs());
                        let b = q0lo.abs().max(q0hi.abs());
                        let (a, b) = if q0lo <= 0.0 && q0hi >= 0.0 { (0.0, b) } else { (a, b) };
                        if r >= a && r < b {
                            acc += w1 * w2 * w3 / 8.0 / (4.0 * r * r);
                        }
                    }
                }
            }
            Complex64::new(acc / dp, 0.0)
        })
        .collect();
    let h: Vec<f64> = g.inverse_ft(&hat).unwrap().iter().map(|v| v.re).collect();
    let hmean = h.iter().sum::<f64>() / h.len() as f64;
    println!("hmean {hmean:.4e} tmean {tmean:.4e}");
    for r in [1i64, 2, 3, 5, 8, 12, 16, 20] {
        let flat = g.flat_from_signed(&[0, r, 0, 0]);
        let t = target[flat] - tmean;
        println!("  r={:2} got={:+.4e} targ={:+.4e}", r, h[flat] - hmean, t);
    }
    for excl in [3.0f64, 4.0] {
        let mut num = 0.0;
        let mut den = 0.0;
        for flat in 0..g.num_points() {
            let x = g.position(flat);
            let r = (x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
            if r < 3.0 {
                continue;
            }
            if (r - x[0].abs()).abs() <= excl {
                continue;
            }
            let t = target[flat] - tmean;
            let got = h[flat] - hmean;
            num += (got - t) * (got - t);
            den += t * t;
        }
        println!("cell-avg excl={excl}: relL2 = {:.4}", (num / den).sqrt());
    }
}
