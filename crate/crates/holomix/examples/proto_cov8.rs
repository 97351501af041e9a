use holomix::lattice::Grid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

fn gl_nodes(k: usize) -> Vec<(f64, f64)> {
    match k {
        4 => vec![
            (-0.8611363115940526, 0.3478548451374538),
            (-0.3399810435848563, 0.6521451548625461),
            (0.3399810435848563, 0.6521451548625461),
            (0.8611363115940526, 0.3478548451374538),
        ],
        8 => vec![
            (-0.9602898564975363, 0.10122853629037626),
            (-0.7966664774136267, 0.22238103445337448),
            (-0.525532409916329, 0.31370664587788727),
            (-0.18343464249564978, 0.3626837833783620),
            (0.18343464249564978, 0.3626837833783620),
            (0.525532409916329, 0.31370664587788727),
            (0.7966664774136267, 0.22238103445337448),
            (0.9602898564975363, 0.10122853629037626),
        ],
        _ => panic!(),
    }
}

fn main() {
    let n = 48usize;
    let g = Arc::new(Grid::uniform(4, n, 1.0).unwrap());
    let dp = g.momentum_spacing()[0];
    let hat: Vec<Complex64> = (0..g.num_points())
        .into_par_iter()
        .map(|i| {
            let p = g.momentum(i);
            let q0 = p[0];
            if q0 == 0.0 { return Complex64::default(); }
            let s = g.signed_index(i);
            // finer sampling for the IR cells
            let k = if s[1].abs() <= 2 && s[2].abs() <= 2 && s[3].abs() <= 2 { 8 } else { 4 };
            let nodes = gl_nodes(k);
            let q0lo = q0 - 0.5 * dp;
            let q0hi = q0 + 0.5 * dp;
            let (a, b) = if q0lo <= 0.0 && q0hi >= 0.0 {
                (0.0, q0lo.abs().max(q0hi.abs()))
            } else {
                (q0lo.abs().min(q0hi.abs()), q0lo.abs().max(q0hi.abs()))
            };
            let mut acc = 0.0;
            for (u1, w1) in &nodes { for (u2, w2) in &nodes { for (u3, w3) in &nodes {
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

    let cbar_plain: f64 = (0..g.num_points())
        .into_par_iter()
        .map(|i| holomix::fields::closed_form_position_covariance(&g.position(i)))
        .sum::<f64>() / g.num_points() as f64;
    // torus-consistent DC: time-periodized closed form averaged over the box
    let lt = 48.0;
    let cbar_torus: f64 = (0..g.num_points())
        .into_par_iter()
        .map(|i| {
            let x = g.position(i);
            let r = (x[1]*x[1]+x[2]*x[2]+x[3]*x[3]).sqrt();
            if r == 0.0 { return 0.0; }
            let frac = (2.0 * r.min(lt / 2.0)) / lt;
            frac / (16.0 * std::f64::consts::PI.powi(2) * r)
        })
        .sum::<f64>() / g.num_points() as f64;
    println!("cbar_plain {cbar_plain:.4e} cbar_torus {cbar_torus:.4e}");

    for (name, c) in [("plainDC", cbar_plain), ("torusDC", cbar_torus)] {
        for r in [3i64,4,5,6,8,10,12] {
            let flat = g.flat_from_signed(&[0, r, 0, 0]);
            let ex = holomix::fields::closed_form_position_covariance(&g.position(flat));
            print!(" r{}={:+.3}", r, (h[flat] + c - ex) / ex);
        }
        println!("  [{name}]");
        for rmax in [10.0f64, 12.0] {
            for excl in [3.0f64] {
                let mut num = 0.0; let mut den = 0.0;
                for flat in 0..g.num_points() {
                    let x = g.position(flat);
                    let r = (x[1]*x[1]+x[2]*x[2]+x[3]*x[3]).sqrt();
                    if r < 3.0 || r > rmax { continue; }
                    if (r - x[0].abs()).abs() <= excl { continue; }
                    let ex = holomix::fields::closed_form_position_covariance(&x);
                    let got = h[flat] + c;
                    num += (got - ex) * (got - ex);
                    den += ex * ex;
                }
                println!("  {name} rmax={rmax} excl={excl}: relL2={:.4}", (num/den).sqrt());
            }
        }
    }
}
