use holomix::lattice::Grid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

fn main() {
    let n = 48usize;
    let g = Arc::new(Grid::uniform(4, n, 1.0).unwrap());
    let dp = g.momentum_spacing()[0];

    // cell-averaged shell realization, q0=0 plane kept zero (pointwise API convention)
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
            if q0 == 0.0 { return Complex64::default(); }
            let q0lo = q0 - 0.5 * dp;
            let q0hi = q0 + 0.5 * dp;
            let (a, b) = if q0lo <= 0.0 && q0hi >= 0.0 {
                (0.0, q0lo.abs().max(q0hi.abs()))
            } else {
                (q0lo.abs().min(q0hi.abs()), q0lo.abs().max(q0hi.abs()))
            };
            let mut acc = 0.0;
            for (u1, w1) in gl { for (u2, w2) in gl { for (u3, w3) in gl {
                let k1 = p[1] + 0.5 * dp * u1;
                let k2 = p[2] + 0.5 * dp * u2;
                let k3 = p[3] + 0.5 * dp * u3;
                let r = (k1 * k1 + k2 * k2 + k3 * k3).sqrt();
                if r > 0.0 && r >= a && r < b {
                    acc += w1 * w2 * w3 / 8.0 / (4.0 * r * r);
                }
            }}}
            Complex64::new(acc / dp, 0.0)
        })
        .collect();
    let h: Vec<f64> = g.inverse_ft(&hat).unwrap().iter().map(|v| v.re).collect();

    // reference box mean of the plain closed form (defined, not fitted)
    let cbar: f64 = (0..g.num_points())
        .into_par_iter()
        .map(|i| holomix::fields::closed_form_position_covariance(&g.position(i)))
        .sum::<f64>() / g.num_points() as f64;
    println!("reference box mean {cbar:.4e}");

    // per-radius relative error of (h + cbar) vs plain, x0=0 axis
    for r in [1i64,2,3,4,5,6,8,10,12,14] {
        let flat = g.flat_from_signed(&[0, r, 0, 0]);
        let ex = holomix::fields::closed_form_position_covariance(&g.position(flat));
        println!("  r={:2} rel={:+.3}", r, (h[flat] + cbar - ex) / ex);
    }
    for rmax in [10.0f64, 12.0, 16.0, 24.0, 100.0] {
        for excl in [3.0f64, 4.0, 6.0] {
            let mut num = 0.0; let mut den = 0.0; let mut cnt = 0usize;
            for flat in 0..g.num_points() {
                let x = g.position(flat);
                let r = (x[1]*x[1]+x[2]*x[2]+x[3]*x[3]).sqrt();
                if r < 3.0 || r > rmax { continue; }
                if (r - x[0].abs()).abs() <= excl { continue; }
                let ex = holomix::fields::closed_form_position_covariance(&x);
                let got = h[flat] + cbar;
                num += (got - ex) * (got - ex);
                den += ex * ex;
                cnt += 1;
            }
            println!("rmax={rmax} excl={excl}: relL2={:.4} ({} pts)", (num/den.max(1e-300)).sqrt(), cnt);
        }
    }
}
