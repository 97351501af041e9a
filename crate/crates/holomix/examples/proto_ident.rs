// Prototype: regularized product identity  s_m s_m' = PP/(m-m')(s_m - s_m')
// + pi^2 eps(m^2) delta(m-m') p_m  under matched regulators.
use holomix::green::*;
use holomix::lattice::Grid;
use holomix::linalg::CMat;
use holomix::opalg::kslash;
use num_complex::Complex64 as C;
use std::sync::Arc;

fn main() {
    let g = Arc::new(Grid::new(&[16, 2], &[1.0, 1.0]).unwrap());
    let m = Mass::real(0.8);
    let m_max = 8.0;
    // off-diagonal residual epsilon-sweep at fixed separation
    println!("eps sweep at |m - m'| = 0.5:");
    for (eps, w, seg) in [(0.2, 0.4, 2000usize), (0.1, 0.2, 4000), (0.05, 0.1, 8000), (0.025, 0.05, 16000)] {
        let mp = Mass::real(1.3);
        let sm = symmetric_green_raw(&m, g.clone(), eps, w, m_max, seg).unwrap();
        let smp = symmetric_green_raw(&mp, g.clone(), eps, w, m_max, seg).unwrap();
        let lhs = sm.compose(&smp).unwrap();
        let pp = pp_regulated(m.0 - mp.0, eps);
        let rhs = sm.sub(&smp).unwrap().scale(pp);
        let resid = lhs.sub(&rhs).unwrap().frobenius() / lhs.frobenius();
        println!("  eps={eps}: rel resid {resid:.4e}");
    }
    // diagonal coefficient: integrate over m' around m
    println!("diagonal pi^2 coefficient:");
    for (eps, w, seg) in [(0.05f64, 0.1f64, 8000usize)] {
        let sm = symmetric_green_raw(&m, g.clone(), eps, w, m_max, seg).unwrap();
        let window = 0.6;
        let nstep = 96;
        let dmp = 2.0 * window / nstep as f64;
        let dim = g.num_points() * 4;
        let mut acc = CMat::zeros(dim, dim);
        for i in 0..nstep {
            let mpv = m.0.re - window + (i as f64 + 0.5) * dmp;
            let mp = Mass::real(mpv);
            let smp = symmetric_green_raw(&mp, g.clone(), eps, w, m_max, seg).unwrap();
            let lhs = sm.compose(&smp).unwrap();
            let pp = pp_regulated(m.0 - mp.0, eps);
            let rhs = sm.sub(&smp).unwrap().scale(pp);
            let diff = lhs.sub(&rhs).unwrap();
            acc = acc.add(&diff.mat.scale(C::new(dmp / g.volume(), 0.0)));
        }
        // project per-site onto the projector structure (kslash + m) delta_w
        let mut num = C::default();
        let mut den = 0.0f64;
        for site in 0..g.num_points() {
            let k = g.momentum(site);
            let k2 = g.minkowski(&k, &k);
            let pshape = kslash(&k[..2]).add(&CMat::scaled_identity(4, m.0));
            let gw = (-(k2 - m.m2()) * (k2 - m.m2()) / (2.0 * w * w)).exp()
                / (w * (2.0 * std::f64::consts::PI).sqrt());
            let mut blk = CMat::zeros(4, 4);
            for a in 0..4 {
                for b in 0..4 {
                    blk[(a, b)] = acc[(site * 4 + a, site * 4 + b)];
                }
            }
            // overlap with p_m-shape
            let pm = pshape.scale(C::new(gw, 0.0));
            let ip: C = (0..16).map(|i| pm.data[i].conj() * blk.data[i]).sum();
            let nn: f64 = pm.data.iter().map(|v| v.norm_sqr()).sum();
            num += ip;
            den += nn;
        }
        let coef = num / C::new(den, 0.0);
        println!("  eps={eps} w={w}: coefficient {:.4}+{:.4}i  (pi^2 = {:.4})",
            coef.re, coef.im, std::f64::consts::PI.powi(2));
    }
}
