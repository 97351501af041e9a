//! Holographic phases and dephasing: band-limited phase families, the
//! dephasing operator and its polar-unitary repair, phased field operators,
//! stationary-phase machinery, incoherent-sum counting, rank-structured
//! commutator families, and the phase-matching combinatorics of odd chains.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fields::{mix_seed, ScalarKernel};
use crate::lattice::{Grid, Scales, MAX_DIM};
use crate::linalg::{polar_unitary, smallest_singular_value, CMat};
use crate::opalg::NonlocalOperator;
use crate::stats::{loglog_fit, mean_stderr};

type C = Complex64;

/// A family of real band-limited phase functions over the position grid.
#[derive(Debug, Clone)]
pub struct PhaseFamily {
    pub grid: Arc<Grid>,
    pub amplitude: f64,
    pub bandwidth: f64,
    pub seed: u64,
    /// position values, one field per family member
    pub lambdas: Vec<Vec<f64>>,
    /// momentum coefficients for half-point synthesis
    pub hats: Vec<Vec<C>>,
}

impl PhaseFamily {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Band-limited synthesis at an arbitrary point (half-lattice midpoints
    /// included).
    pub fn synth(&self, a: usize, x: &[f64]) -> f64 {
        let g = &self.grid;
        let mut acc = C::default();
        for flat in 0..g.num_points() {
            let v = self.hats[a][flat];
            if v.norm() == 0.0 {
                continue;
            }
            let q = g.momentum(flat);
            acc += v * C::from_polar(1.0, -g.minkowski(&q, x));
        }
        (acc / C::new(g.volume(), 0.0)).re
    }

    /// Diagonal phase operator `diag(e^{i s Lambda_a})` as a dense matrix in
    /// momentum space.
    pub fn phase_operator(&self, a: usize, sign: f64) -> Result<NonlocalOperator> {
        let g = self.grid.clone();
        let pos: Vec<C> = self.lambdas[a]
            .iter()
            .map(|&v| C::from_polar(1.0, sign * v))
            .collect();
        let hat = g.forward_ft(&pos)?;
        let n = g.num_points();
        let nd = g.ndim();
        let mut op = NonlocalOperator::zeros(g.clone(), 1);
        for row in 0..n {
            let skl = g.signed_index(row);
            for col in 0..n {
                let skr = g.signed_index(col);
                let mut q = [0i64; MAX_DIM];
                for ax in 0..nd {
                    q[ax] = skl[ax] - skr[ax];
                }
                op.mat[(row, col)] = hat[g.flat_from_signed(&q[..nd])];
            }
        }
        Ok(op)
    }
}

/// Random band-limited real phases with the requested root-mean-square
/// amplitude; modes are supported in `|p| <= 2 pi / l_lambda`.
pub fn make_phase_family(
    n: usize,
    scales: &Scales,
    amplitude: f64,
    seed: u64,
    grid: Arc<Grid>,
) -> Result<PhaseFamily> {
    let max_dx = grid.spacing().iter().cloned().fold(0.0, f64::max);
    if scales.l_lambda < 4.0 * max_dx {
        return Err(Error::InvalidParameter(format!(
            "dephasing length {} below four lattice spacings",
            scales.l_lambda
        )));
    }
    let cutoff = 2.0 * std::f64::consts::PI / scales.l_lambda;
    let g = &grid;
    let mut lambdas = Vec::with_capacity(n);
    let mut hats = Vec::with_capacity(n);
    for a in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, a as u64));
        let mut hat = vec![C::default(); g.num_points()];
        // draw on the half lattice, mirror by conjugation, skip the zero mode
        for flat in 0..g.num_points() {
            let s = g.signed_index(flat);
            let p = g.momentum(flat);
            let norm: f64 = (0..g.ndim()).map(|i| p[i] * p[i]).sum::<f64>().sqrt();
            if norm == 0.0 || norm > cutoff {
                continue;
            }
            // first nonzero signed component positive picks the representative
            let mut canonical = false;
            for ax in 0..g.ndim() {
                if s[ax] != 0 {
                    canonical = s[ax] > 0;
                    break;
                }
            }
            if !canonical {
                continue;
            }
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            // concentrate the spectrum on the scale 1/l_lambda so the
            // gradient bound amplitude/l_lambda^p holds pointwise
            let w = (-0.5 * (norm * scales.l_lambda) * (norm * scales.l_lambda)).exp();
            hat[flat] = C::new(re * w, im * w);
            let neg: Vec<i64> = s[..g.ndim()].iter().map(|v| -v).collect();
            hat[g.flat_from_signed(&neg)] = hat[flat].conj();
        }
        if hat.iter().all(|v| v.norm() == 0.0) && amplitude != 0.0 {
            return Err(Error::InvalidParameter(
                "no resolvable modes below the bandwidth".into(),
            ));
        }
        let pos = g.inverse_ft(&hat)?;
        let mut vals: Vec<f64> = pos.iter().map(|v| v.re).collect();
        let rms = (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt();
        let scale = if rms > 0.0 { amplitude / rms } else { 0.0 };
        vals.iter_mut().for_each(|v| *v *= scale);
        let hat_scaled: Vec<C> = hat.iter().map(|v| v * scale).collect();
        lambdas.push(vals);
        hats.push(hat_scaled);
    }
    Ok(PhaseFamily {
        grid,
        amplitude,
        bandwidth: 1.0 / scales.l_lambda,
        seed,
        lambdas,
        hats,
    })
}

/// Stationary-point bookkeeping of a dephasing configuration.
#[derive(Debug, Clone, Copy)]
pub struct DephasingStatistics {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
}

impl DephasingStatistics {
    pub fn new(alpha: f64, beta: f64, k: usize) -> Result<DephasingStatistics> {
        if !(alpha > 0.0 && beta > 0.0) || k == 0 {
            return Err(Error::InvalidParameter(
                "alpha, beta must be positive and K nonzero".into(),
            ));
        }
        Ok(DephasingStatistics { alpha, beta, k })
    }

    /// The sparse-stationary-point condition; configurations violating it
    /// are outside the regime the estimates assume.
    pub fn warning(&self) -> Option<String> {
        let prod = self.alpha * self.beta * self.k as f64;
        if prod > 0.1 {
            Some(format!(
                "alpha*beta*K = {prod:.3} exceeds the sparse stationary-point threshold 0.1"
            ))
        } else {
            None
        }
    }
}

/// `U = sum_a diag(e^{i Lambda_a}) conv(L_a)` as a dense momentum-space
/// matrix.
pub fn dephasing_u(phases: &PhaseFamily, kernels: &[ScalarKernel]) -> Result<NonlocalOperator> {
    if kernels.len() != phases.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} kernels for {} phases",
            kernels.len(),
            phases.n()
        )));
    }
    let g = phases.grid.clone();
    let n = g.num_points();
    let nd = g.ndim();
    let mut op = NonlocalOperator::zeros(g.clone(), 1);
    for (a, l) in kernels.iter().enumerate() {
        if l.grid != g {
            return Err(Error::GridMismatch("kernel grid".into()));
        }
        let pos: Vec<C> = phases.lambdas[a]
            .iter()
            .map(|&v| C::from_polar(1.0, v))
            .collect();
        let hat = g.forward_ft(&pos)?;
        for row in 0..n {
            let skl = g.signed_index(row);
            for col in 0..n {
                let skr = g.signed_index(col);
                let mut q = [0i64; MAX_DIM];
                for ax in 0..nd {
                    q[ax] = skl[ax] - skr[ax];
                }
                op.mat[(row, col)] += hat[g.flat_from_signed(&q[..nd])] * C::new(l.hat[col], 0.0);
            }
        }
    }
    Ok(op)
}

#[derive(Debug, Clone, Copy)]
pub struct PolarReport {
    pub condition: f64,
    pub smallest_singular_value: f64,
    pub unitarity_defect: f64,
}

/// Unitary polar factor `V = U (U* U)^{-1/2}` of a dephasing operator, with
/// conditioning diagnostics.
pub fn polar_v(u: &NonlocalOperator) -> Result<(NonlocalOperator, PolarReport)> {
    let vol = u.grid.volume();
    // work with the measure-free matrix so the polar factor is unitary in
    // operator composition
    let m = u.mat.scale(C::new(1.0 / vol, 0.0));
    let smin = smallest_singular_value(&m).map_err(|_| {
        Error::Singular("dephasing operator is numerically singular".into())
    })?;
    if smin < 1e-12 {
        return Err(Error::Singular(format!(
            "dephasing operator nearly singular; smallest singular value {smin:.3e}"
        )));
    }
    let two = m.two_norm_est();
    let unit = polar_unitary(&m)?;
    let defect = unit
        .adjoint()
        .matmul(&unit)
        .sub(&CMat::identity(unit.rows))
        .two_norm_est();
    let v = NonlocalOperator {
        grid: u.grid.clone(),
        spin_dim: u.spin_dim,
        mat: unit.scale(C::new(vol, 0.0)),
    };
    Ok((
        v,
        PolarReport {
            condition: two / smin,
            smallest_singular_value: smin,
            unitarity_defect: defect,
        },
    ))
}

/// Commutator-form potential `-1/2 [D, V] V* + 1/2 V [D, V*]` for a Dirac
/// generator `D`; reduces to `V D V* - D` when `V` is unitary.
pub fn b_lambda_from_v(
    v: &NonlocalOperator,
    dirac: &NonlocalOperator,
) -> Result<NonlocalOperator> {
    let vadj = v.krein_adjoint();
    let term1 = dirac
        .commutator(v)?
        .compose(&vadj)?
        .scale(C::new(-0.5, 0.0));
    let term2 = v
        .compose(&dirac.commutator(&vadj)?)?
        .scale(C::new(0.5, 0.0));
    term1.add(&term2)
}

/// Phased field operator `e^{i Lambda_a} (A^j_{c,q} |> L^c_{ab}) e^{-i
/// Lambda_b}` with the plane-wave component `A(x) = amp e^{-iqx}`.
pub fn holographic_field_op(
    a: usize,
    b: usize,
    amp: C,
    q: &[i64],
    phases: &PhaseFamily,
    kernel: &ScalarKernel,
) -> Result<NonlocalOperator> {
    if a >= phases.n() || b >= phases.n() {
        return Err(Error::InvalidParameter("family index out of range".into()));
    }
    let g = phases.grid.clone();
    let wave: Vec<C> = (0..g.num_points())
        .map(|i| {
            let qm = g.momentum_from_signed(&g.wrap_signed(q));
            let x = g.position(i);
            amp * C::from_polar(1.0, -g.minkowski(&qm[..g.ndim()], &x))
        })
        .collect();
    let middle = crate::opalg::triangle(&wave, kernel)?;
    let left = phases.phase_operator(a, 1.0)?;
    let right = phases.phase_operator(b, -1.0)?;
    left.compose(&middle)?.compose(&right)
}

/// One detected stationary point of an oscillatory integral.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub phase: f64,
    pub envelope: C,
    pub hessian_det: f64,
    pub signature: i32,
    pub contribution: C,
}

#[derive(Debug, Clone)]
pub struct SaddleReport {
    pub quadrature: C,
    pub estimate: C,
    pub critical_points: Vec<CriticalPoint>,
    pub excluded_degenerate: usize,
    pub relative_deviation: f64,
}

/// Direct quadrature of `int g(x) e^{i Phi(x)} dx` on `[a, b]` plus the
/// stationary-phase estimate from the detected critical points.
pub fn saddle_integral_1d(
    phase: &dyn Fn(f64) -> f64,
    envelope: &dyn Fn(f64) -> C,
    a: f64,
    b: f64,
    n: usize,
) -> Result<SaddleReport> {
    if !(b > a) || n < 16 {
        return Err(Error::InvalidParameter("bad integration window".into()));
    }
    let h = (b - a) / n as f64;
    let mut quad = C::default();
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * h;
        quad += envelope(x) * C::from_polar(1.0, phase(x));
    }
    quad *= C::new(h, 0.0);
    // critical points: sign changes of the finite-difference gradient,
    // refined by one Newton step
    let fd = 0.5 * h;
    let grad = |x: f64| (phase(x + fd) - phase(x - fd)) / (2.0 * fd);
    let hess = |x: f64| (phase(x + fd) - 2.0 * phase(x) + phase(x - fd)) / (fd * fd);
    let mut cps = Vec::new();
    let mut excluded = 0usize;
    let mut prev = grad(a + 0.5 * h);
    for i in 1..n {
        let x = a + (i as f64 + 0.5) * h;
        let gnow = grad(x);
        if prev == 0.0 || prev.signum() != gnow.signum() {
            let x0 = x - 0.5 * h;
            let h0 = hess(x0);
            let refined = if h0.abs() > 1e-12 { x0 - grad(x0) / h0 } else { x0 };
            let hdet = hess(refined);
            if hdet.abs() <= 1e-6 {
                excluded += 1;
            } else {
                let sig = if hdet > 0.0 { 1 } else { -1 };
                let contribution = envelope(refined)
                    * C::from_polar(1.0, phase(refined))
                    * C::from_polar(
                        (2.0 * std::f64::consts::PI / hdet.abs()).sqrt(),
                        sig as f64 * std::f64::consts::FRAC_PI_4,
                    );
                cps.push(CriticalPoint {
                    location: vec![refined],
                    phase: phase(refined),
                    envelope: envelope(refined),
                    hessian_det: hdet,
                    signature: sig,
                    contribution,
                });
            }
        }
        prev = gnow;
    }
    let estimate: C = cps.iter().map(|c| c.contribution).sum();
    let denom = quad.norm().max(1e-300);
    Ok(SaddleReport {
        quadrature: quad,
        estimate,
        critical_points: cps,
        excluded_degenerate: excluded,
        relative_deviation: (estimate - quad).norm() / denom,
    })
}

/// Two-dimensional version on `[a, b]^2`.
pub fn saddle_integral_2d(
    phase: &dyn Fn(f64, f64) -> f64,
    envelope: &dyn Fn(f64, f64) -> C,
    a: f64,
    b: f64,
    n: usize,
) -> Result<SaddleReport> {
    if !(b > a) || n < 16 {
        return Err(Error::InvalidParameter("bad integration window".into()));
    }
    let h = (b - a) / n as f64;
    let mut quad = C::default();
    for i in 0..n {
        for j in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            let y = a + (j as f64 + 0.5) * h;
            quad += envelope(x, y) * C::from_polar(1.0, phase(x, y));
        }
    }
    quad *= C::new(h * h, 0.0);
    let fd = 0.5 * h;
    let gx = |x: f64, y: f64| (phase(x + fd, y) - phase(x - fd, y)) / (2.0 * fd);
    let gy = |x: f64, y: f64| (phase(x, y + fd) - phase(x, y - fd)) / (2.0 * fd);
    let hxx = |x: f64, y: f64| (phase(x + fd, y) - 2.0 * phase(x, y) + phase(x - fd, y)) / (fd * fd);
    let hyy = |x: f64, y: f64| (phase(x, y + fd) - 2.0 * phase(x, y) + phase(x, y - fd)) / (fd * fd);
    let hxy = |x: f64, y: f64| {
        (phase(x + fd, y + fd) - phase(x + fd, y - fd) - phase(x - fd, y + fd)
            + phase(x - fd, y - fd))
            / (4.0 * fd * fd)
    };
    let mut cps = Vec::new();
    let mut excluded = 0usize;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let x = a + (i as f64 + 0.5) * h;
            let y = a + (j as f64 + 0.5) * h;
            // cell where both gradient components change sign
            let sx = gx(x, y);
            let sy = gy(x, y);
            if !(sx.signum() != gx(x + h, y).signum() && sy.signum() != gy(x, y + h).signum()) {
                continue;
            }
            // one Newton step on the gradient
            let (a11, a12, a22) = (hxx(x, y), hxy(x, y), hyy(x, y));
            let det = a11 * a22 - a12 * a12;
            let (rx, ry) = if det.abs() > 1e-12 {
                (
                    x - (a22 * sx - a12 * sy) / det,
                    y - (-a12 * sx + a11 * sy) / det,
                )
            } else {
                (x, y)
            };
            let (b11, b12, b22) = (hxx(rx, ry), hxy(rx, ry), hyy(rx, ry));
            let hdet = b11 * b22 - b12 * b12;
            if hdet.abs() <= 1e-6 {
                excluded += 1;
                continue;
            }
            // signature of the Hessian
            let trace = b11 + b22;
            let sig = if hdet > 0.0 {
                if trace > 0.0 {
                    2
                } else {
                    -2
                }
            } else {
                0
            };
            let contribution = envelope(rx, ry)
                * C::from_polar(1.0, phase(rx, ry))
                * C::from_polar(
                    2.0 * std::f64::consts::PI / hdet.abs().sqrt(),
                    sig as f64 * std::f64::consts::FRAC_PI_4,
                );
            cps.push(CriticalPoint {
                location: vec![rx, ry],
                phase: phase(rx, ry),
                envelope: envelope(rx, ry),
                hessian_det: hdet,
                signature: sig,
                contribution,
            });
        }
    }
    let estimate: C = cps.iter().map(|c| c.contribution).sum();
    let denom = quad.norm().max(1e-300);
    Ok(SaddleReport {
        quadrature: quad,
        estimate,
        critical_points: cps,
        excluded_degenerate: excluded,
        relative_deviation: (estimate - quad).norm() / denom,
    })
}

/// Measured suppression of a dephased product relative to the in-phase one,
/// swept over the scale ratio; returns `(ratios, suppressions)` ready for a
/// log-log fit whose slope is the integration dimension.
pub fn suppression_sweep(
    dim: usize,
    ratios: &[f64],
    l_min: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidParameter("dimension must be 1 or 2".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (ri, &ratio) in ratios.iter().enumerate() {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "scale ratio {ratio} outside (0, 1); no separation of scales"
            )));
        }
        let l_lam = ratio * l_min;
        // average over random stationary-point centers
        let mut vals = Vec::new();
        for rep in 0..6u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, (ri as u64) << 8 | rep));
            let c0: f64 = StandardNormal.sample(&mut rng);
            let c1: f64 = StandardNormal.sample(&mut rng);
            let center = [0.3 * l_min * c0, 0.3 * l_min * c1];
            let half = 4.0 * l_min;
            let n = 600;
            let (num, den) = if dim == 1 {
                let phase = |x: f64| (x - center[0]) * (x - center[0]) / (2.0 * l_lam * l_lam);
                let env = |x: f64| C::new((-x * x / (2.0 * l_min * l_min)).exp(), 0.0);
                let rep = saddle_integral_1d(&phase, &env, -half, half, n)?;
                let flat = saddle_integral_1d(&|_| 0.0, &env, -half, half, n)?;
                (rep.quadrature.norm(), flat.quadrature.norm())
            } else {
                let phase = |x: f64, y: f64| {
                    ((x - center[0]) * (x - center[0]) + (y - center[1]) * (y - center[1]))
                        / (2.0 * l_lam * l_lam)
                };
                let env = |x: f64, y: f64| {
                    C::new((-(x * x + y * y) / (2.0 * l_min * l_min)).exp(), 0.0)
                };
                let rep = saddle_integral_2d(&phase, &env, -half, half, 300)?;
                let flat = saddle_integral_2d(&|_, _| 0.0, &env, -half, half, 300)?;
                (rep.quadrature.norm(), flat.quadrature.norm())
            };
            vals.push(num / den);
        }
        let (mean, _) = mean_stderr(&vals);
        xs.push(ratio);
        ys.push(mean);
    }
    Ok((xs, ys))
}

/// Fitted suppression exponent over the given scale-ratio sweep.
pub fn suppression_exponent(dim: usize, ratios: &[f64], l_min: f64, seed: u64) -> Result<f64> {
    let (xs, ys) = suppression_sweep(dim, ratios, l_min, seed)?;
    Ok(loglog_fit(&xs, &ys)?.slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountingMode {
    /// no intermediate phase factor; stationary points at `K` and `beta K^2`
    BEqD,
    /// intermediate phase factor present; `K` and `beta K^3`
    BNeqD,
}

#[derive(Debug, Clone)]
pub struct CountingRow {
    pub k: usize,
    pub coherent_count: usize,
    pub dephased_count: usize,
    pub coherent_mean: f64,
    pub dephased_mean: f64,
    pub dephased_stderr: f64,
}

/// Synthesize stationary-point sums: aligned phases add linearly in the
/// count, random phases grow with its square root.
pub fn counting_experiment(
    stats: &DephasingStatistics,
    mode: CountingMode,
    ks: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<CountingRow>> {
    let mut rows = Vec::new();
    for (ki, &k) in ks.iter().enumerate() {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be positive".into()));
        }
        let dephased_count = match mode {
            CountingMode::BEqD => ((stats.beta * (k as f64) * (k as f64)).round() as usize).max(1),
            CountingMode::BNeqD => {
                ((stats.beta * (k as f64).powi(3)).round() as usize).max(1)
            }
        };
        // coherent: common phase, mildly jittered positive amplitudes
        let mut coh_vals = Vec::with_capacity(reps);
        let mut dep_vals = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(seed, ((ki as u64) << 32) | rep as u64));
            let mut coh = C::default();
            for _ in 0..k {
                let a: f64 = StandardNormal.sample(&mut rng);
                coh += C::new(1.0 + 0.2 * a.tanh(), 0.0);
            }
            coh_vals.push(coh.norm());
            let mut dep = C::default();
            for _ in 0..dephased_count {
                let theta: f64 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                let a: f64 = StandardNormal.sample(&mut rng);
                dep += C::from_polar(1.0 + 0.2 * a.tanh(), theta);
            }
            dep_vals.push(dep.norm());
        }
        let (cm, _) = mean_stderr(&coh_vals);
        let (dm, dse) = mean_stderr(&dep_vals);
        rows.push(CountingRow {
            k,
            coherent_count: k,
            dephased_count,
            coherent_mean: cm,
            dephased_mean: dm,
            dephased_stderr: dse,
        });
    }
    Ok(rows)
}

/// Rank-structured operator pair acting between two orthonormal blocks,
/// `op = scale * up * down^*`; stored in low-rank form.
#[derive(Debug, Clone)]
pub struct LadderOp {
    pub scale: f64,
    pub up: CMat,
    pub down: CMat,
}

impl LadderOp {
    /// dense materialization (for small dimensions)
    pub fn dense(&self) -> CMat {
        self.up
            .matmul(&self.down.adjoint())
            .scale(C::new(self.scale, 0.0))
    }

    pub fn adjoint(&self) -> LadderOp {
        LadderOp {
            scale: self.scale,
            up: self.down.clone(),
            down: self.up.clone(),
        }
    }
}

/// Spectral norm of the commutator `[A, B]` of two low-rank operators,
/// evaluated through the small Gram matrices.
pub fn ladder_commutator_norm(a: &LadderOp, b: &LadderOp) -> f64 {
    // [A,B] = s_a s_b (Ua (Da* Ub) Db* - Ub (Db* Ua) Da*) = X Y*
    let r = a.up.cols;
    let da_ub = a.down.adjoint().matmul(&b.up);
    let db_ua = b.down.adjoint().matmul(&a.up);
    let x1 = a.up.matmul(&da_ub);
    let x2 = b.up.matmul(&db_ua).scale(C::new(-1.0, 0.0));
    let dim = a.up.rows;
    let mut x = CMat::zeros(dim, 2 * r);
    let mut y = CMat::zeros(dim, 2 * r);
    for i in 0..dim {
        for j in 0..r {
            x[(i, j)] = x1[(i, j)];
            x[(i, r + j)] = x2[(i, j)];
            y[(i, j)] = b.down[(i, j)];
            y[(i, r + j)] = a.down[(i, j)];
        }
    }
    // ||X Y*||_2^2 = lambda_max((X*X)(Y*Y))
    let g = x.adjoint().matmul(&x).matmul(&y.adjoint().matmul(&y));
    let lam = power_abs_max(&g);
    (a.scale * b.scale).abs() * lam.sqrt()
}

fn power_abs_max(g: &CMat) -> f64 {
    let n = g.rows;
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<C> = (0..n).map(|i| C::new(1.0 + (i as f64 * 0.7).cos(), 0.0)).collect();
    let mut lam = 0.0f64;
    for _ in 0..200 {
        let w = g.matvec(&v);
        let norm: f64 = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next: Vec<C> = w.iter().map(|x| x / norm).collect();
        if (norm - lam).abs() < 1e-12 * norm {
            lam = norm;
            break;
        }
        lam = norm;
        v = next;
    }
    lam
}

/// Family of rank-structured operators indexed by `(tensor j, d, q)` whose
/// self-adjoint-pair commutators realize a target propagator value on their
/// designated blocks, while cross commutators shrink with the family size.
pub struct MOperatorFamily {
    pub dim: usize,
    pub n: usize,
    pub rank: usize,
    pub q_count: usize,
    /// `ops[q_index][d]`, with the tensor direction of `d` given by `d % 4`
    pub ops: Vec<Vec<LadderOp>>,
    /// target propagator value per q
    pub targets: Vec<f64>,
}

impl MOperatorFamily {
    pub fn tensor_of(&self, d: usize) -> usize {
        d % 4
    }

    /// `M^j_d(-q)` is the adjoint of `M^j_d(q)` by construction.
    pub fn op_at_minus_q(&self, qi: usize, d: usize) -> LadderOp {
        self.ops[qi][d].adjoint()
    }

    /// Residual of `[M_d(q), M_d(-q)] - g^{jj} t(q)` restricted to the
    /// designated block of `d`.  The commutator is `+|t|` on the upper block
    /// and `-|t|` on the lower one, so the designated block of a direction is
    /// chosen to carry the sign `g^{jj} sign(t)`.
    pub fn diagonal_defect(&self, qi: usize, d: usize) -> f64 {
        let m = &self.ops[qi][d];
        let madj = m.adjoint();
        let g_sign = if self.tensor_of(d) == 0 { 1.0 } else { -1.0 };
        let want_plus = g_sign * self.targets[qi] >= 0.0;
        let block = if want_plus { &m.up } else { &m.down };
        let u0: Vec<C> = (0..self.dim).map(|i| block[(i, 0)]).collect();
        let dense_apply = |op: &LadderOp, v: &[C]| -> Vec<C> {
            let tmp = op.down.adjoint().matvec(v);
            let out = op.up.matvec(&tmp);
            out.iter().map(|x| x * op.scale).collect()
        };
        let mm = dense_apply(m, &dense_apply(&madj, &u0));
        let mm2 = dense_apply(&madj, &dense_apply(m, &u0));
        let target = g_sign * self.targets[qi];
        let mut defect = 0.0f64;
        for i in 0..self.dim {
            let want = u0[i] * target;
            defect += (mm[i] - mm2[i] - want).norm_sqr();
        }
        defect.sqrt()
    }
}

/// Build the family from disjoint random orthonormal blocks; each `d` owns a
/// rank-`r` upper and lower block for every `q`, and the commutator equals
/// the signed target on the upper block by scaling.
pub fn build_m_family(
    n: usize,
    rank: usize,
    targets: &[f64],
    dim: usize,
    seed: u64,
) -> Result<MOperatorFamily> {
    let q_count = targets.len();
    let d_count = 4 * n;
    if 2 * rank * q_count * d_count > dim {
        return Err(Error::SizeLimit(format!(
            "need 2 r |q| 4N = {} <= dim = {dim}",
            2 * rank * q_count * d_count
        )));
    }
    let mut ops = Vec::with_capacity(q_count);
    for qi in 0..q_count {
        let mut per_q = Vec::with_capacity(d_count);
        for d in 0..d_count {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(seed, ((qi as u64) << 32) | d as u64));
            // 2r random vectors, orthonormalized jointly
            let mut cols: Vec<Vec<C>> = (0..2 * rank)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            C::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
                        })
                        .collect()
                })
                .collect();
            for i in 0..cols.len() {
                for j in 0..i {
                    let proj: C = cols[j]
                        .iter()
                        .zip(&cols[i])
                        .map(|(u, v)| u.conj() * v)
                        .sum();
                    for t in 0..dim {
                        let sub = proj * cols[j][t];
                        cols[i][t] -= sub;
                    }
                }
                let norm: f64 = cols[i].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                for t in 0..dim {
                    cols[i][t] /= norm;
                }
            }
            let mut up = CMat::zeros(dim, rank);
            let mut down = CMat::zeros(dim, rank);
            for j in 0..rank {
                for i in 0..dim {
                    up[(i, j)] = cols[j][i];
                    down[(i, j)] = cols[rank + j][i];
                }
            }
            per_q.push(LadderOp {
                scale: targets[qi].abs().sqrt(),
                up,
                down,
            });
        }
        ops.push(per_q);
    }
    Ok(MOperatorFamily {
        dim,
        n,
        rank,
        q_count,
        ops,
        targets: targets.to_vec(),
    })
}

/// Cross-to-diagonal commutator norm ratio of the family, averaged over a
/// sample of cross pairs.
pub fn m_family_cross_ratio(fam: &MOperatorFamily, pairs: usize, seed: u64) -> f64 {
    let d_count = 4 * fam.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::new();
    for _ in 0..pairs {
        let qi = rng.random_range(0..fam.q_count);
        let d = rng.random_range(0..d_count);
        let mut e = rng.random_range(0..d_count);
        if e == d {
            e = (e + 1) % d_count;
        }
        let a = &fam.ops[qi][d];
        let b = &fam.ops[qi][e];
        let cross = ladder_commutator_norm(a, &b.adjoint());
        let diag = a.scale * a.scale; // |t|, the exact diagonal commutator norm
        ratios.push(cross / diag.max(1e-300));
    }
    mean_stderr(&ratios).0
}

/// Phase-matching conditions for an odd chain: returns whether an assignment
/// of `(a_l, b_l)` survives and, per interior step, which branch matched.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivorReport {
    pub survives: bool,
    /// for l = p, p-2, ..., 3: true if the aligned branch matched, false if
    /// the swapped branch matched
    pub branches: Vec<Option<bool>>,
}

pub fn phase_matching_survivors(assignment: &[(usize, usize)], p: usize) -> Result<SurvivorReport> {
    if p % 2 == 0 || assignment.len() != p + 1 {
        return Err(Error::InvalidParameter(format!(
            "need an odd chain with p+1 index pairs, got p={p}, len={}",
            assignment.len()
        )));
    }
    let (a, b): (Vec<usize>, Vec<usize>) = assignment.iter().cloned().unzip();
    let mut survives = a[p] == b[p];
    let mut branches = Vec::new();
    let mut l = p;
    while l >= 3 {
        let aligned = a[l - 2] == b[l - 2] && a[l - 1] == b[l - 1];
        let swapped = a[l - 2] == b[l - 1] && a[l - 1] == b[l - 2];
        let branch = if aligned {
            Some(true)
        } else if swapped {
            Some(false)
        } else {
            None
        };
        if branch.is_none() {
            survives = false;
        }
        branches.push(branch);
        l -= 2;
    }
    if a[0] != b[0] {
        survives = false;
    }
    Ok(SurvivorReport { survives, branches })
}

use rand::RngExt;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::example_l_hat;
    use crate::linalg::expm;

    fn grid_1p1(nt: usize, nx: usize) -> Arc<Grid> {
        Arc::new(Grid::new(&[nt, nx], &[1.0, 1.0]).unwrap())
    }

    fn test_scales(grid: &Grid) -> Scales {
        let _ = grid;
        Scales::new(0.1, 2.0, 8.0, 100.0, 0.5).unwrap()
    }

    #[test]
    fn phase_family_band_limit_and_gradients() {
        let g = grid_1p1(32, 2);
        let scales = test_scales(&g);
        let amp = 1.5;
        let fam = make_phase_family(3, &scales, amp, 7, g.clone()).unwrap();
        assert_eq!(fam.n(), 3);
        // reality and RMS
        for a in 0..3 {
            let rms = (fam.lambdas[a].iter().map(|v| v * v).sum::<f64>()
                / fam.lambdas[a].len() as f64)
                .sqrt();
            assert!((rms - amp).abs() < 1e-10);
            // band limit
            let cutoff = 2.0 * std::f64::consts::PI / scales.l_lambda;
            for flat in 0..g.num_points() {
                let p = g.momentum(flat);
                let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if norm > cutoff {
                    assert!(fam.hats[a][flat].norm() < 1e-12);
                }
            }
            // finite-difference gradient bound: |D Lambda| <~ 3 amp / l_lambda
            let mut max_grad: f64 = 0.0;
            for flat in 0..g.num_points() {
                let s = g.signed_index(flat);
                let up = g.flat_from_signed(&[s[0] + 1, s[1]]);
                let dn = g.flat_from_signed(&[s[0] - 1, s[1]]);
                let d = (fam.lambdas[a][up] - fam.lambdas[a][dn]) / 2.0;
                max_grad = max_grad.max(d.abs());
            }
            assert!(
                max_grad <= 3.0 * amp / scales.l_lambda,
                "gradient {max_grad} vs bound {}",
                3.0 * amp / scales.l_lambda
            );
        }
        // zero amplitude gives identically zero phases
        let fz = make_phase_family(2, &scales, 0.0, 1, g.clone()).unwrap();
        assert!(fz.lambdas[0].iter().all(|&v| v == 0.0));
        // measured gradient RMS tracks amplitude / l_lambda within a factor 2
        let mut grads = Vec::new();
        for flat in 0..g.num_points() {
            let s = g.signed_index(flat);
            let up = g.flat_from_signed(&[s[0] + 1, s[1]]);
            let dn = g.flat_from_signed(&[s[0] - 1, s[1]]);
            grads.push((fam.lambdas[0][up] - fam.lambdas[0][dn]) / 2.0);
        }
        let grms = (grads.iter().map(|v| v * v).sum::<f64>() / grads.len() as f64).sqrt();
        let expect = amp / scales.l_lambda;
        assert!(grms / expect < 2.0 && grms / expect > 0.5, "{grms} vs {expect}");
        // unresolvable bandwidth
        let bad = Scales::new(0.1, 0.5, 2.0, 100.0, 2.0).unwrap();
        assert!(make_phase_family(1, &bad, 1.0, 0, g).is_err());
    }

    #[test]
    fn dephasing_operator_limits() {
        let g = grid_1p1(12, 2);
        let scales = test_scales(&g);
        // constant-phase projector partition: exactly unitary
        let half = ScalarKernel::from_fn(g.clone(), 0, |p| if p[0] >= 0.0 { 1.0 } else { 0.0 });
        let other = ScalarKernel::from_fn(g.clone(), 1, |p| if p[0] < 0.0 { 1.0 } else { 0.0 });
        let mut fam = make_phase_family(2, &scales, 0.0, 3, g.clone()).unwrap();
        fam.lambdas[0].iter_mut().for_each(|v| *v = 0.9);
        fam.lambdas[1].iter_mut().for_each(|v| *v = -0.4);
        let u = dephasing_u(&fam, &[half.clone(), other.clone()]).unwrap();
        let id = NonlocalOperator::identity(g.clone(), 1);
        let defect = u
            .krein_adjoint()
            .compose(&u)
            .unwrap()
            .sub(&id)
            .unwrap()
            .frobenius();
        assert!(defect < 1e-9 * id.frobenius(), "defect {defect}");
        // zero phases with a kernel partition of unity: U is the identity
        let fam0 = make_phase_family(2, &scales, 0.0, 4, g.clone()).unwrap();
        let u0 = dephasing_u(&fam0, &[half, other]).unwrap();
        assert!(u0.sub(&id).unwrap().frobenius() < 1e-9 * id.frobenius());
        // generic kernels with oscillating phases: not unitary
        let l1 = example_l_hat(2.0, g.clone()).unwrap();
        let l2 = ScalarKernel::from_fn(g.clone(), 1, |p| 0.5 + 0.3 * (p[0] * 0.7).cos());
        let famr = make_phase_family(2, &scales, 1.0, 5, g.clone()).unwrap();
        let ur = dephasing_u(&famr, &[l1, l2]).unwrap();
        let defect_r = ur
            .krein_adjoint()
            .compose(&ur)
            .unwrap()
            .sub(&id)
            .unwrap()
            .frobenius()
            / id.frobenius();
        assert!(defect_r > 1e-3, "expected a measurable defect, got {defect_r}");
        // polar repair makes it unitary
        let (v, report) = polar_v(&ur).unwrap();
        let pd = v
            .krein_adjoint()
            .compose(&v)
            .unwrap()
            .sub(&id)
            .unwrap()
            .mat
            .two_norm_est()
            / g.volume();
        assert!(pd < 1e-10, "polar defect {pd}");
        assert!(report.condition >= 1.0);
        // unitary input is a fixed point
        let (v2, _) = polar_v(&v).unwrap();
        assert!(v2.sub(&v).unwrap().frobenius() < 1e-8 * v.frobenius());
    }

    #[test]
    fn commutator_potential_forms() {
        let g = grid_1p1(12, 2);
        let scales = test_scales(&g);
        // D = i d_t as spectral multiplication by the frequency
        let dirac = NonlocalOperator::from_diagonal(g.clone(), 1, |site| {
            let mut b = CMat::zeros(1, 1);
            b[(0, 0)] = C::new(g.momentum(site)[0], 0.0);
            b
        });
        // V = 1: zero potential
        let id = NonlocalOperator::identity(g.clone(), 1);
        let b0 = b_lambda_from_v(&id, &dirac).unwrap();
        assert!(b0.frobenius() < 1e-10 * dirac.frobenius());
        // single small global phase: B approaches the commutator potential
        // -i [D, M_Lambda] quadratically in the amplitude
        let amp = 1e-4;
        let fam = make_phase_family(1, &scales, amp, 9, g.clone()).unwrap();
        let mlam = {
            let mut op = NonlocalOperator::zeros(g.clone(), 1);
            let hat = g
                .forward_ft(&fam.lambdas[0].iter().map(|&v| C::new(v, 0.0)).collect::<Vec<_>>())
                .unwrap();
            for row in 0..g.num_points() {
                let skl = g.signed_index(row);
                for col in 0..g.num_points() {
                    let skr = g.signed_index(col);
                    let q = [skl[0] - skr[0], skl[1] - skr[1]];
                    op.mat[(row, col)] = hat[g.flat_from_signed(&q)];
                }
            }
            op
        };
        let v = NonlocalOperator {
            grid: g.clone(),
            spin_dim: 1,
            mat: expm(&mlam.mat.scale(C::new(0.0, 1.0 / g.volume()))).unwrap()
                .scale(C::new(g.volume(), 0.0)),
        };
        let b = b_lambda_from_v(&v, &dirac).unwrap();
        let first_order = dirac
            .commutator(&mlam)
            .unwrap()
            .scale(C::new(0.0, -1.0));
        let dev = b.sub(&first_order).unwrap().frobenius();
        assert!(dev < 1e-8 * dirac.frobenius().max(1.0), "dev {dev}");
        // Krein symmetry of the potential
        let famr = make_phase_family(2, &scales, 0.8, 11, g.clone()).unwrap();
        let l1 = ScalarKernel::from_fn(g.clone(), 0, |p| 0.6 + 0.4 * (0.5 * p[0]).cos());
        let l2 = ScalarKernel::from_fn(g.clone(), 1, |p| 0.4 - 0.4 * (0.5 * p[0]).cos());
        let u = dephasing_u(&famr, &[l1, l2]).unwrap();
        let (vv, _) = polar_v(&u).unwrap();
        let bb = b_lambda_from_v(&vv, &dirac).unwrap();
        let sym = bb.krein_adjoint().sub(&bb).unwrap().frobenius() / bb.frobenius();
        assert!(sym < 1e-10, "symmetry defect {sym}");
    }

    #[test]
    fn holographic_field_op_reductions() {
        let g = grid_1p1(16, 2);
        let scales = test_scales(&g);
        let kernel = ScalarKernel::from_fn(g.clone(), 0, |p| (-0.3 * p[0] * p[0]).exp());
        let q = [1i64, 0];
        // zero phases reduce to the plain triangle form
        let fam0 = make_phase_family(2, &scales, 0.0, 1, g.clone()).unwrap();
        let op0 = holographic_field_op(0, 1, C::new(0.7, 0.2), &q, &fam0, &kernel).unwrap();
        let wave: Vec<C> = (0..g.num_points())
            .map(|i| {
                let qm = g.momentum_from_signed(&[q[0], q[1], 0, 0]);
                C::new(0.7, 0.2) * C::from_polar(1.0, -g.minkowski(&qm, &g.position(i)))
            })
            .collect();
        let tri = crate::opalg::triangle(&wave, &kernel).unwrap();
        assert!(op0.sub(&tri).unwrap().frobenius() < 1e-9 * tri.frobenius());
        // a = b: unitary conjugation preserves singular values (checked via
        // the Frobenius norm)
        let fam = make_phase_family(2, &scales, 1.0, 2, g.clone()).unwrap();
        let opc = holographic_field_op(0, 0, C::new(1.0, 0.0), &q, &fam, &kernel).unwrap();
        assert!(
            (opc.frobenius() - tri.frobenius() / C::new(0.7, 0.2).norm()).abs()
                < 1e-8 * tri.frobenius()
        );
        // index out of range
        assert!(holographic_field_op(5, 0, C::new(1.0, 0.0), &q, &fam, &kernel).is_err());
    }

    #[test]
    fn fresnel_saddle() {
        // quadratic phase, Gaussian envelope: exact value sqrt(2 pi / lam) e^{i pi/4} g(0)
        let lam = 60.0;
        let phase = move |x: f64| 0.5 * lam * x * x;
        let env = |x: f64| C::new((-x * x / 2.0).exp(), 0.0);
        let rep = saddle_integral_1d(&phase, &env, -6.0, 6.0, 4000).unwrap();
        let exact = C::from_polar(
            (2.0 * std::f64::consts::PI / lam).sqrt(),
            std::f64::consts::FRAC_PI_4,
        );
        assert_eq!(rep.critical_points.len(), 1);
        assert!((rep.estimate - exact).norm() < 0.05 * exact.norm());
        assert!((rep.quadrature - exact).norm() < 0.05 * exact.norm());
        // no critical point in the support: strongly suppressed
        let lin = |x: f64| 40.0 * x;
        let rep2 = saddle_integral_1d(&lin, &env, -6.0, 6.0, 4000).unwrap();
        assert!(rep2.critical_points.is_empty());
        assert!(rep2.quadrature.norm() < 1e-3 * rep.quadrature.norm());
        // random band-limited phase: quadrature and saddle estimate agree
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coefs: Vec<(f64, f64)> = (1..4)
            .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let rough = move |x: f64| {
            let mut acc = 0.0;
            for (k, (c, s)) in coefs.iter().enumerate() {
                let w = 2.0 * (k as f64 + 1.0);
                acc += 30.0 * (c * (w * x).cos() + s * (w * x).sin());
            }
            acc
        };
        let rep3 = saddle_integral_1d(&rough, &env, -4.0, 4.0, 12000).unwrap();
        assert!(!rep3.critical_points.is_empty());
        assert!(
            rep3.relative_deviation < 0.35,
            "saddle estimate deviates {}",
            rep3.relative_deviation
        );
    }

    #[test]
    fn fresnel_saddle_2d() {
        let lam = 40.0;
        let phase = move |x: f64, y: f64| 0.5 * lam * (x * x + y * y);
        let env = |x: f64, y: f64| C::new((-(x * x + y * y) / 2.0).exp(), 0.0);
        let rep = saddle_integral_2d(&phase, &env, -5.0, 5.0, 600).unwrap();
        let exact = C::from_polar(
            2.0 * std::f64::consts::PI / lam,
            std::f64::consts::FRAC_PI_2,
        );
        assert_eq!(rep.critical_points.len(), 1);
        assert!((rep.estimate - exact).norm() < 0.07 * exact.norm());
        assert!((rep.quadrature - exact).norm() < 0.07 * exact.norm());
    }

    #[test]
    fn suppression_slopes() {
        let ratios = [0.5, 0.25, 0.125];
        let s1 = suppression_exponent(1, &ratios, 1.0, 11).unwrap();
        assert!((s1 - 1.0).abs() < 0.2, "1d slope {s1}");
        let s2 = suppression_exponent(2, &ratios, 1.0, 13).unwrap();
        assert!((s2 - 2.0).abs() < 0.2, "2d slope {s2}");
        // no separation of scales is rejected
        assert!(suppression_exponent(1, &[1.0, 0.5], 1.0, 1).is_err());
    }

    #[test]
    fn counting_laws() {
        let stats = DephasingStatistics::new(1e-3, 1e-4, 100).unwrap();
        assert!(stats.warning().is_none());
        let loud = DephasingStatistics::new(0.5, 0.5, 100).unwrap();
        assert!(loud.warning().is_some());
        let ks = [100usize, 400, 1600, 6400];
        let rows = counting_experiment(&stats, CountingMode::BEqD, &ks, 48, 3).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| r.coherent_count as f64).collect();
        let yc: Vec<f64> = rows.iter().map(|r| r.coherent_mean).collect();
        let slope_c = loglog_fit(&xs, &yc).unwrap().slope;
        assert!((slope_c - 1.0).abs() < 0.1, "coherent slope {slope_c}");
        let xd: Vec<f64> = rows.iter().map(|r| r.dephased_count as f64).collect();
        let yd: Vec<f64> = rows.iter().map(|r| r.dephased_mean).collect();
        let slope_d = loglog_fit(&xd, &yd).unwrap().slope;
        assert!((slope_d - 0.5).abs() < 0.05, "dephased slope {slope_d}");
        // K = 1: single term
        let single = counting_experiment(&stats, CountingMode::BNeqD, &[1], 16, 5).unwrap();
        assert_eq!(single[0].coherent_count, 1);
        assert_eq!(single[0].dephased_count, 1);
    }

    #[test]
    fn m_family_structure() {
        let n = 4;
        let dim = 128;
        let targets = [0.8, -0.5];
        let fam = build_m_family(n, 2, &targets, dim, 17).unwrap();
        // diagonal commutator acts as the signed target on its block
        for qi in 0..2 {
            for d in 0..4 * n {
                let defect = fam.diagonal_defect(qi, d);
                assert!(defect < 1e-6, "defect {defect} at q {qi} d {d}");
            }
        }
        // adding a multiple of the identity leaves commutators unchanged
        let a = fam.ops[0][0].dense();
        let b = fam.ops[0][3].dense().adjoint();
        let comm = |x: &CMat, y: &CMat| x.matmul(y).sub(&y.matmul(x));
        let c0 = comm(&a, &b);
        let shift = CMat::scaled_identity(dim, C::new(0.37, 0.0));
        let c1 = comm(&a.add(&shift), &b.add(&shift));
        assert!(c0.sub(&c1).frobenius() < 1e-10 * (1.0 + c0.frobenius()));
        // low-rank commutator norm agrees with the dense computation
        let lr = ladder_commutator_norm(&fam.ops[0][0], &fam.ops[0][3].adjoint());
        let dn = c0.two_norm_est();
        assert!((lr - dn).abs() < 1e-6 * dn.max(1.0), "{lr} vs {dn}");
        // insufficient dimension
        assert!(build_m_family(8, 2, &targets, 64, 1).is_err());
    }

    #[test]
    fn m_family_cross_suppression_slope() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &n in &[8usize, 16, 32] {
            let dim = 4 * n * n;
            let fam = build_m_family(n, 1, &[1.0], dim, 23).unwrap();
            xs.push(n as f64);
            ys.push(m_family_cross_ratio(&fam, 24, 5));
        }
        let slope = loglog_fit(&xs, &ys).unwrap().slope;
        assert!((slope + 1.0).abs() < 0.2, "cross ratio slope {slope}");
    }

    #[test]
    fn phase_matching_combinatorics() {
        // all aligned: survives via the aligned branch everywhere
        let all = vec![(1, 1); 4];
        let rep = phase_matching_survivors(&all, 3).unwrap();
        assert!(rep.survives);
        assert_eq!(rep.branches, vec![Some(true)]);
        // p = 3 with a1 = b2, a2 = b1, a3 = b3, a0 = b0: swapped branch
        let swapped = vec![(1, 1), (2, 3), (3, 2), (1, 1)];
        let rep2 = phase_matching_survivors(&swapped, 3).unwrap();
        assert!(rep2.survives);
        assert_eq!(rep2.branches, vec![Some(false)]);
        // broken end condition
        let bad = vec![(1, 2), (2, 3), (3, 2), (1, 1)];
        assert!(!phase_matching_survivors(&bad, 3).unwrap().survives);
        // even p rejected
        assert!(phase_matching_survivors(&all, 2).is_err());
    }
}
