//! Dirac Green's operators and the regularized spectral calculus: retarded
//! and symmetric kinds, mass-delta-normalized spectral projectors, the
//! regularized product identities, the double-commutator series for the
//! unitary mixing operator, and holographic Green's/Dirac operators.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::ScalarKernel;
use crate::holo::PhaseFamily;
use crate::lattice::Grid;
use crate::linalg::{condition_estimate, expm, inverse, CMat};
use crate::opalg::{gamma_matrices, kslash, NonlocalOperator};

type C = Complex64;

/// Mass parameter: real or purely imaginary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mass(pub C);

impl Mass {
    pub fn real(m: f64) -> Mass {
        Mass(C::new(m, 0.0))
    }

    pub fn imaginary(mu: f64) -> Mass {
        Mass(C::new(0.0, mu))
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.re != 0.0 && self.0.im != 0.0 {
            return Err(Error::InvalidParameter(
                "mass must lie on the real or imaginary axis".into(),
            ));
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.0.im == 0.0
    }

    /// `m^2` as a real number (negative for imaginary mass).
    pub fn m2(&self) -> f64 {
        if self.is_real() {
            self.0.re * self.0.re
        } else {
            -self.0.im * self.0.im
        }
    }

    /// `|m| / m`: 1 for positive real, -1 for negative real, -+i on the
    /// imaginary axis.
    pub fn phase_factor(&self) -> C {
        let n = self.0.norm();
        if n == 0.0 {
            C::new(1.0, 0.0)
        } else {
            C::new(n, 0.0) / self.0
        }
    }

    pub fn conj(&self) -> Mass {
        Mass(self.0.conj())
    }

    /// sign of `m^2`
    pub fn eps_m2(&self) -> f64 {
        crate::lattice::sign_epsilon(self.m2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenKind {
    Retarded,
    Symmetric,
}

fn gaussian(v: f64, w: f64) -> f64 {
    let z = v / w;
    (-0.5 * z * z).exp() / (w * (2.0 * std::f64::consts::PI).sqrt())
}

/// Retarded Dirac Green's operator `(kslash + m) / (k^2 - m^2 + i eps k0)`,
/// diagonal in momentum with 4x4 spin blocks.  Defined for real mass only.
pub fn retarded_green(mass: &Mass, grid: Arc<Grid>, eps_reg: f64) -> Result<NonlocalOperator> {
    mass.validate()?;
    if !mass.is_real() {
        return Err(Error::UnsupportedKind(
            "retarded kind exists for real mass only; use the symmetric kind".into(),
        ));
    }
    if !(eps_reg > 0.0) {
        return Err(Error::InvalidParameter("eps_reg must be positive".into()));
    }
    let m = mass.0.re;
    let g = grid.clone();
    Ok(NonlocalOperator::from_diagonal(grid, 4, move |site| {
        let k = g.momentum(site);
        let k2 = g.minkowski(&k, &k);
        let denom = C::new(k2 - m * m, eps_reg * k[0]);
        let num = kslash(&k[..g.ndim()]).add(&CMat::scaled_identity(4, C::new(m, 0.0)));
        num.scale(C::new(1.0, 0.0) / denom)
    }))
}

/// Spectral projector `(|m|/m)(kslash + m) delta_w(k^2 - m^2)`, diagonal.
pub fn spectral_projector(
    mass: &Mass,
    width: f64,
    grid: Arc<Grid>,
) -> Result<NonlocalOperator> {
    mass.validate()?;
    if !(width > 0.0) {
        return Err(Error::InvalidParameter("width must be positive".into()));
    }
    let g = grid.clone();
    let m = *mass;
    Ok(NonlocalOperator::from_diagonal(grid, 4, move |site| {
        let k = g.momentum(site);
        let k2 = g.minkowski(&k, &k);
        let num = kslash(&k[..g.ndim()]).add(&CMat::scaled_identity(4, m.0));
        num.scale(m.phase_factor() * gaussian(k2 - m.m2(), width))
    }))
}

/// Regularized principal value `1/2 [1/(z + (1-i)e) + 1/(z - (1-i)e)]`.
pub fn pp_regulated(z: C, eps: f64) -> C {
    let shift = C::new(1.0, -1.0) * eps;
    (C::new(1.0, 0.0) / (z + shift) + C::new(1.0, 0.0) / (z - shift)) * C::new(0.5, 0.0)
}

/// Quadrature over the mass axis `R u iR`: nodes and weights; `segments`
/// points per half axis, covering masses up to `m_max` on each branch.
pub fn mass_quadrature(m_max: f64, segments: usize) -> Vec<(Mass, f64)> {
    let mut nodes = Vec::with_capacity(4 * segments);
    let dm = m_max / segments as f64;
    for i in 0..segments {
        let m = (i as f64 + 0.5) * dm;
        nodes.push((Mass::real(m), dm));
        nodes.push((Mass::real(-m), dm));
        nodes.push((Mass::imaginary(m), dm));
        nodes.push((Mass::imaginary(-m), dm));
    }
    nodes
}

/// One-sided realization of the principal-value mass integral with the
/// `(1-i) eps` regulator; the building block of the symmetric kind and the
/// object the regularized product identities are stated for.
pub fn symmetric_green_raw(
    mass: &Mass,
    grid: Arc<Grid>,
    eps_reg: f64,
    proj_width: f64,
    m_max: f64,
    segments: usize,
) -> Result<NonlocalOperator> {
    mass.validate()?;
    if !(eps_reg > 0.0) {
        return Err(Error::InvalidParameter("eps_reg must be positive".into()));
    }
    let quad = mass_quadrature(m_max, segments);
    let g = grid.clone();
    let m = *mass;
    Ok(NonlocalOperator::from_diagonal(grid, 4, move |site| {
        let k = g.momentum(site);
        let k2 = g.minkowski(&k, &k);
        let ks = kslash(&k[..g.ndim()]);
        let mut acc = CMat::zeros(4, 4);
        for (mu, w) in &quad {
            let weight = pp_regulated(mu.0 - m.0, eps_reg)
                * mu.phase_factor()
                * gaussian(k2 - mu.m2(), proj_width)
                * w;
            if weight.norm() == 0.0 {
                continue;
            }
            acc = acc.add(
                &ks.add(&CMat::scaled_identity(4, mu.0))
                    .scale(weight),
            );
        }
        acc
    }))
}

/// Symmetric Dirac Green's operator: the one-sided realization averaged with
/// its conjugate-mass adjoint, which makes `s_m^* = s_{conj m}` exact on the
/// lattice instead of holding only up to the regulator.
pub fn symmetric_green(
    mass: &Mass,
    grid: Arc<Grid>,
    eps_reg: f64,
    proj_width: f64,
    m_max: f64,
    segments: usize,
) -> Result<NonlocalOperator> {
    let raw = symmetric_green_raw(mass, grid.clone(), eps_reg, proj_width, m_max, segments)?;
    let conj = symmetric_green_raw(&mass.conj(), grid, eps_reg, proj_width, m_max, segments)?;
    raw.add(&conj.krein_adjoint())?
        .scale(C::new(0.5, 0.0))
        .add(&NonlocalOperator::zeros(raw.grid.clone(), 4))
}

/// Residual of the completeness relation `int p_m dm = 1`, integrated in the
/// squared-mass parametrization over both branches; returns the maximum
/// relative deviation over the sampled momenta.
pub fn completeness_residual(grid: &Grid, width: f64, segments: usize) -> f64 {
    // k^2 range of the lattice
    let mut k2max = 0.0f64;
    for site in 0..grid.num_points() {
        let k = grid.momentum(site);
        k2max = k2max.max(grid.minkowski(&k, &k).abs());
    }
    let umax = k2max + 8.0 * width;
    let du = 2.0 * umax / segments as f64;
    let mut worst = 0.0f64;
    for site in 0..grid.num_points() {
        let k = grid.momentum(site);
        let k2 = grid.minkowski(&k, &k);
        // in the u = m^2 variable the spinor part drops and the integrand is
        // the nascent delta itself
        let mut acc = 0.0;
        let mut u = -umax + 0.5 * du;
        while u < umax {
            acc += gaussian(k2 - u, width) * du;
            u += du;
        }
        worst = worst.max((acc - 1.0).abs());
    }
    worst
}

/// Krein-symmetric midpoint-kernel operator built from phase fields:
/// `Gamma(x, y) = sum_a Lambda_a((x+y)/2) L_a(y-x)`, with trivial spin slots
/// realized over the given spin dimension.
pub fn gamma_operator(
    phases: &PhaseFamily,
    kernels: &[ScalarKernel],
    spin_dim: usize,
) -> Result<NonlocalOperator> {
    if kernels.len() != phases.n() {
        return Err(Error::ShapeMismatch("one kernel per phase".into()));
    }
    let g = phases.grid.clone();
    let mut scalar = NonlocalOperator::zeros(g.clone(), 1);
    for (a, l) in kernels.iter().enumerate() {
        let pos: Vec<C> = phases.lambdas[a].iter().map(|&v| C::new(v, 0.0)).collect();
        scalar = scalar.add(&crate::opalg::triangle(&pos, l)?)?;
    }
    if spin_dim == 1 {
        return Ok(scalar);
    }
    let n = g.num_points();
    let mut op = NonlocalOperator::zeros(g, spin_dim);
    for r in 0..n {
        for c in 0..n {
            let v = scalar.mat[(r, c)];
            for s in 0..spin_dim {
                op.mat[(r * spin_dim + s, c * spin_dim + s)] = v;
            }
        }
    }
    Ok(op)
}

/// Operator exponential `exp(pref * A)` in the composition algebra.
pub fn op_exp(a: &NonlocalOperator, pref: C) -> Result<NonlocalOperator> {
    let vol = a.grid.volume();
    let m = expm(&a.mat.scale(pref / vol))?;
    Ok(NonlocalOperator {
        grid: a.grid.clone(),
        spin_dim: a.spin_dim,
        mat: m.scale(C::new(vol, 0.0)),
    })
}

fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    // nodes and weights on [0, 1] by Newton iteration on Legendre polynomials
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// Double-commutator series kernel
/// `C = int_0^1 s e^{-is Gamma} [[D, Gamma], Gamma] e^{is Gamma} ds`
/// with `D` the first-order generator (`i dslash` as an operator), by
/// Gauss-Legendre quadrature and operator exponentials.
pub fn c_operator(
    gamma: &NonlocalOperator,
    dirac: &NonlocalOperator,
    quadrature_points: usize,
) -> Result<NonlocalOperator> {
    if quadrature_points < 4 {
        return Err(Error::InvalidParameter(
            "need at least four quadrature points".into(),
        ));
    }
    let dc = dirac.commutator(gamma)?.commutator(gamma)?;
    let mut acc = NonlocalOperator::zeros(gamma.grid.clone(), gamma.spin_dim);
    for (s, w) in gauss_legendre_01(quadrature_points) {
        let em = op_exp(gamma, C::new(0.0, -s))?;
        let ep = op_exp(gamma, C::new(0.0, s))?;
        let term = em.compose(&dc)?.compose(&ep)?;
        acc = acc.add(&term.scale(C::new(s * w, 0.0)))?;
    }
    Ok(acc)
}

/// The defect operator of the conjugated Green's family:
/// `E = int_0^1 (1-s) e^{is Gamma} [[D, Gamma], Gamma] e^{-is Gamma} ds`.
pub fn e_operator(
    gamma: &NonlocalOperator,
    dirac: &NonlocalOperator,
    quadrature_points: usize,
) -> Result<NonlocalOperator> {
    if quadrature_points < 4 {
        return Err(Error::InvalidParameter(
            "need at least four quadrature points".into(),
        ));
    }
    let dc = dirac.commutator(gamma)?.commutator(gamma)?;
    let mut acc = NonlocalOperator::zeros(gamma.grid.clone(), gamma.spin_dim);
    for (s, w) in gauss_legendre_01(quadrature_points) {
        let ep = op_exp(gamma, C::new(0.0, s))?;
        let em = op_exp(gamma, C::new(0.0, -s))?;
        let term = ep.compose(&dc)?.compose(&em)?;
        acc = acc.add(&term.scale(C::new((1.0 - s) * w, 0.0)))?;
    }
    Ok(acc)
}

/// Conjugated projector identity: verifies, as dense matrices,
/// `(D + B - mu) e^{iG} p_mu = E e^{iG} p_mu + e^{iG} (D - mu) p_mu`
/// with `B = [dslash, Gamma] = -i [D, Gamma]`, and returns the relative
/// residual together with the conjugated Green's operator and `E`.
pub struct GreenDefectReport {
    pub conjugated_green: NonlocalOperator,
    pub defect: NonlocalOperator,
    pub identity_residual: f64,
}

pub fn check_green_defect(
    gamma: &NonlocalOperator,
    dirac: &NonlocalOperator,
    mass: &Mass,
    proj_width: f64,
    s_m: &NonlocalOperator,
    quadrature_points: usize,
) -> Result<GreenDefectReport> {
    let grid = gamma.grid.clone();
    let eg = op_exp(gamma, C::new(0.0, 1.0))?;
    let egm = op_exp(gamma, C::new(0.0, -1.0))?;
    let s_check = eg.compose(s_m)?.compose(&egm)?;
    let e_op = e_operator(gamma, dirac, quadrature_points)?;
    // B = [dslash, Gamma] = -i [D, Gamma]
    let b = dirac.commutator(gamma)?.scale(C::new(0.0, -1.0));
    let p_mu = spectral_projector(mass, proj_width, grid.clone())?;
    let mu_id = NonlocalOperator::identity(grid.clone(), gamma.spin_dim).scale(mass.0);
    // lhs = (D + B - mu) e^{iG} p_mu ; note D = i dslash so the operator in
    // the bracket is D + (-i)[D, Gamma] ... with the dslash-commutator form
    let egp = eg.compose(&p_mu)?;
    let lhs = dirac.add(&b)?.sub(&mu_id)?.compose(&egp)?;
    let rhs1 = e_op.compose(&egp)?;
    let rhs2 = eg.compose(&dirac.sub(&mu_id)?.compose(&p_mu)?)?;
    let resid = lhs.sub(&rhs1)?.sub(&rhs2)?.frobenius();
    let scale = lhs.frobenius().max(1e-300);
    Ok(GreenDefectReport {
        conjugated_green: s_check,
        defect: e_op,
        identity_residual: resid / scale,
    })
}

/// Duhamel commutator identity `[D, e^{iG}] = i int_0^1 e^{i t G} [D, G]
/// e^{i (1-t) G} dt`, returned as the relative residual between the two
/// sides evaluated as matrices.
pub fn commutator_exponential_residual(
    gamma: &NonlocalOperator,
    dirac: &NonlocalOperator,
    quadrature_points: usize,
) -> Result<f64> {
    let eg = op_exp(gamma, C::new(0.0, 1.0))?;
    let lhs = dirac.commutator(&eg)?;
    let dg = dirac.commutator(gamma)?;
    let mut acc = NonlocalOperator::zeros(gamma.grid.clone(), gamma.spin_dim);
    for (t, w) in gauss_legendre_01(quadrature_points) {
        let e1 = op_exp(gamma, C::new(0.0, t))?;
        let e2 = op_exp(gamma, C::new(0.0, 1.0 - t))?;
        acc = acc.add(&e1.compose(&dg)?.compose(&e2)?.scale(C::new(w, 0.0)))?;
    }
    let rhs = acc.scale(C::new(0.0, 1.0));
    Ok(lhs.sub(&rhs)?.frobenius() / lhs.frobenius().max(1e-300))
}

/// Truncated unitary-mixing series
/// `V_m = e^{iG} sum_{n <= order} (-s_m C)^n p_m (1 + counterterms)` with the
/// counterterm series carried to the same total order in `C`.
pub fn v_m_series(
    gamma: &NonlocalOperator,
    dirac: &NonlocalOperator,
    mass: &Mass,
    proj_width: f64,
    s_m: &NonlocalOperator,
    order: usize,
    quadrature_points: usize,
) -> Result<NonlocalOperator> {
    let grid = gamma.grid.clone();
    let spin = gamma.spin_dim;
    let c_op = c_operator(gamma, dirac, quadrature_points)?;
    let p_m = spectral_projector(mass, proj_width, grid.clone())?;
    // main series sum_{n<=order} (-s C)^n p
    let mut series = p_m.clone();
    let mut term = p_m.clone();
    for _ in 1..=order {
        term = s_m.compose(&c_op)?.compose(&term)?.scale(C::new(-1.0, 0.0));
        series = series.add(&term)?;
    }
    // counterterms: B_m = pi^2 eps(m^2) sum (-Cs)^{n'} C p C (-sC)^n p,
    // truncated so the total C power stays <= order; the leading B_m term
    // is second order in C.
    if order >= 2 {
        let eps = mass.eps_m2();
        let mut b_core = c_op.compose(&p_m)?.compose(&c_op)?;
        // higher chains (-Cs)^{n'} ... (-sC)^n contribute beyond the
        // truncation order for order <= 3; include them only when needed
        if order >= 3 {
            let sc = s_m.compose(&c_op)?;
            let cs = c_op.compose(s_m)?;
            let extra = cs
                .compose(&b_core)?
                .add(&b_core.compose(&sc)?)?
                .scale(C::new(-1.0, 0.0));
            b_core = b_core.add(&extra)?;
        }
        let b_m = b_core
            .compose(&p_m)?
            .scale(C::new(std::f64::consts::PI * std::f64::consts::PI * eps, 0.0));
        // (1 + B)^{-1/2} = 1 - B/2 + ... ; at the truncation orders kept
        // here only the linear counterterm enters
        let counter = p_m.compose(&b_m)?.scale(C::new(-0.5, 0.0));
        series = series.add(&counter)?;
    }
    let eg = op_exp(gamma, C::new(0.0, 1.0))?;
    let v = eg.compose(&series)?;
    let _ = spin;
    Ok(v)
}

/// Holographic Green's operator `sum_a e^{i Lambda_a} s_m e^{-i Lambda_a}`.
pub fn holographic_green(
    phases: &PhaseFamily,
    s_m: &NonlocalOperator,
    spin_dim: usize,
) -> Result<NonlocalOperator> {
    let g = phases.grid.clone();
    let mut acc = NonlocalOperator::zeros(g.clone(), spin_dim);
    for a in 0..phases.n() {
        let left = phase_mult(phases, a, 1.0, spin_dim)?;
        let right = phase_mult(phases, a, -1.0, spin_dim)?;
        acc = acc.add(&left.compose(s_m)?.compose(&right)?)?;
    }
    Ok(acc)
}

/// Diagonal phase multiplication lifted to the requested spin dimension.
pub fn phase_mult(
    phases: &PhaseFamily,
    a: usize,
    sign: f64,
    spin_dim: usize,
) -> Result<NonlocalOperator> {
    let scalar = phases.phase_operator(a, sign)?;
    if spin_dim == 1 {
        return Ok(scalar);
    }
    let g = phases.grid.clone();
    let n = g.num_points();
    let mut op = NonlocalOperator::zeros(g, spin_dim);
    for r in 0..n {
        for c in 0..n {
            let v = scalar.mat[(r, c)];
            for s in 0..spin_dim {
                op.mat[(r * spin_dim + s, c * spin_dim + s)] = v;
            }
        }
    }
    Ok(op)
}

pub struct HolographicDirac {
    pub operator: NonlocalOperator,
    pub condition: f64,
}

/// `D_hol = (s_hol)^{-1} + m`; the inverse is reported with a condition
/// estimate and fails cleanly when the Green's operator is singular.
pub fn holographic_dirac(
    s_hol: &NonlocalOperator,
    mass: &Mass,
) -> Result<HolographicDirac> {
    let vol = s_hol.grid.volume();
    let m_norm = s_hol.mat.scale(C::new(1.0 / vol, 0.0));
    let cond = condition_estimate(&m_norm)
        .map_err(|_| Error::Singular("holographic Green's operator is singular".into()))?;
    let inv = inverse(&m_norm)?;
    let op = NonlocalOperator {
        grid: s_hol.grid.clone(),
        spin_dim: s_hol.spin_dim,
        mat: inv.scale(C::new(vol, 0.0)),
    };
    let with_mass = op.add(
        &NonlocalOperator::identity(s_hol.grid.clone(), s_hol.spin_dim).scale(mass.0),
    )?;
    Ok(HolographicDirac {
        operator: with_mass,
        condition: cond,
    })
}

/// Truncated holographic perturbation series `sum_n (-s_hol B)^n psi`.
pub fn holographic_perturbation_series(
    s_hol: &NonlocalOperator,
    b_dyn: &NonlocalOperator,
    psi: &[C],
    order: usize,
) -> Result<Vec<C>> {
    let mut acc = psi.to_vec();
    let mut term = psi.to_vec();
    for _ in 1..=order {
        let bt = b_dyn.apply(&term)?;
        let st = s_hol.apply(&bt)?;
        term = st.iter().map(|v| -v).collect();
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    Ok(acc)
}

/// Truncated retarded Dyson-type series with term-ratio diagnostics.
pub struct SeriesReport {
    pub result: Vec<C>,
    pub term_norms: Vec<f64>,
    pub growth_flagged: bool,
}

pub fn retarded_series(
    s_ret: &NonlocalOperator,
    b: &NonlocalOperator,
    psi: &[C],
    order: usize,
) -> Result<SeriesReport> {
    let mut acc = psi.to_vec();
    let mut term = psi.to_vec();
    let norm = |v: &[C]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut term_norms = vec![norm(psi)];
    for _ in 1..=order {
        let bt = b.apply(&term)?;
        let st = s_ret.apply(&bt)?;
        term = st.iter().map(|v| -v).collect();
        term_norms.push(norm(&term));
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    let growth_flagged = term_norms
        .windows(2)
        .any(|w| w[1] > w[0] && w[0] > 0.0);
    Ok(SeriesReport {
        result: acc,
        term_norms,
        growth_flagged,
    })
}

/// The lattice Dirac generator `i dslash` as a momentum-diagonal operator
/// with 4x4 spin blocks (`kslash` at each momentum).
pub fn dirac_generator(grid: Arc<Grid>) -> NonlocalOperator {
    let g = grid.clone();
    NonlocalOperator::from_diagonal(grid, 4, move |site| {
        let k = g.momentum(site);
        kslash(&k[..g.ndim()])
    })
}

/// gamma^0-weighted identity block helper used in tests.
pub fn gamma0_blocks(grid: Arc<Grid>) -> NonlocalOperator {
    let g0 = gamma_matrices()[0].clone();
    NonlocalOperator::from_diagonal(grid, 4, move |_| g0.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holo::make_phase_family;
    use crate::lattice::Scales;
    use crate::stats::loglog_fit;

    fn grid_1p1(nt: usize) -> Arc<Grid> {
        Arc::new(Grid::new(&[nt, 2], &[1.0, 1.0]).unwrap())
    }

    fn scales() -> Scales {
        Scales::new(0.1, 2.0, 6.0, 100.0, 0.5).unwrap()
    }

    #[test]
    fn retarded_green_structure() {
        let g = grid_1p1(128);
        let m = Mass::real(1.0);
        assert!(retarded_green(&Mass::imaginary(1.0), g.clone(), 0.1).is_err());
        // the wrap-around image decays like e^{-eps T / 2}, so the window
        // needs eps T comfortably large
        let eps = 0.2;
        let s = retarded_green(&m, g.clone(), eps).unwrap();
        // far off-shell: regulator negligible, value ~ (kslash + m)/(k^2 - m^2)
        let mut checked = 0;
        for site in 0..g.num_points() {
            let k = g.momentum(site);
            let k2 = g.minkowski(&k, &k);
            if (k2 - 10.0 * m.m2()).abs() < 1.0 {
                let expect = kslash(&k[..2])
                    .add(&CMat::scaled_identity(4, C::new(1.0, 0.0)))
                    .scale(C::new(1.0 / (k2 - 1.0), 0.0));
                let mut worst = 0.0f64;
                for a in 0..4 {
                    for b in 0..4 {
                        worst = worst.max(
                            (s.entry(site, a, site, b) / C::new(g.volume(), 0.0)
                                - expect[(a, b)])
                            .norm(),
                        );
                    }
                }
                // the remaining deviation is the i eps k0 regulator itself
                assert!(worst < 0.1, "off-shell deviation {worst}");
                checked += 1;
            }
        }
        assert!(checked > 0);
        // retarded support: position kernel concentrated on the forward arc.
        // The sharp momentum window would leak a slowly decaying tail into
        // negative times, so the kernel is probed through a smooth momentum
        // mollifier (a band-limited source), which the support property is
        // stated for.
        let n = g.num_points();
        let mut fwd = 0.0f64;
        let mut bwd = 0.0f64;
        let wmax = g.shape()[0] as f64 / 2.0 * g.momentum_spacing()[0];
        let kmax = g.shape()[1] as f64 / 2.0 * g.momentum_spacing()[1];
        let mut scalar = NonlocalOperator::zeros(g.clone(), 1);
        for r in 0..n {
            let k = g.momentum(r);
            let chi = (-k[0] * k[0] / (2.0 * (0.30 * wmax).powi(2))
                - k[1] * k[1] / (2.0 * (0.5 * kmax).powi(2)))
                .exp();
            for c in 0..n {
                scalar.mat[(r, c)] = s.entry(r, 0, c, 0) * C::new(chi, 0.0);
            }
        }
        let pk = scalar.position_kernel().unwrap();
        for x in 0..n {
            let sx = g.signed_index(x);
            for y in 0..n {
                let sy = g.signed_index(y);
                let dt = sx[0] - sy[0];
                // s(x, y) propagates from y to x: forward means x0 > y0;
                // the window starts past the mollifier shoulder
                if dt >= 4 && dt <= 12 {
                    fwd += pk[(x, y)].norm_sqr();
                } else if dt <= -4 && dt >= -12 {
                    bwd += pk[(x, y)].norm_sqr();
                }
            }
        }
        let ratio = (bwd / fwd).sqrt();
        assert!(ratio < 1e-3, "backward/forward ratio {ratio}");
    }

    #[test]
    fn projector_products_and_completeness() {
        let g = grid_1p1(16);
        let w = 0.6;
        let m1 = Mass::real(1.2);
        let p1 = spectral_projector(&m1, w, g.clone()).unwrap();
        // adjoint: p_m^* = p_{conj m}: real mass is a fixed point
        let adj = p1.krein_adjoint();
        assert!(adj.sub(&p1).unwrap().frobenius() < 1e-9 * p1.frobenius());
        // imaginary mass: p^* = p_{-i mu}
        let pi1 = spectral_projector(&Mass::imaginary(0.8), w, g.clone()).unwrap();
        let pi2 = spectral_projector(&Mass::imaginary(-0.8), w, g.clone()).unwrap();
        let d = pi1.krein_adjoint().sub(&pi2).unwrap().frobenius();
        assert!(d < 1e-9 * pi1.frobenius().max(1e-300), "{d}");
        // off-mass products are suppressed
        let far = spectral_projector(&Mass::real(1.2 + 6.0 * w), w, g.clone()).unwrap();
        let cross = p1.compose(&far).unwrap().frobenius();
        let diag = p1.compose(&p1).unwrap().frobenius();
        assert!(cross < 1e-4 * diag, "cross {cross} diag {diag}");
        // on-shell Dirac residual within the regulator width
        for site in 0..g.num_points() {
            let k = g.momentum(site);
            let k2 = g.minkowski(&k, &k);
            if (k2 - m1.m2()).abs() < 0.2 * w {
                let blk = CMat::from_fn(4, 4, |a, b| {
                    p1.entry(site, a, site, b) / C::new(g.volume(), 0.0)
                });
                let resid = kslash(&k[..2])
                    .sub(&CMat::scaled_identity(4, m1.0))
                    .matmul(&blk)
                    .frobenius();
                // (kslash - m) p_m ~ (k^2 - m^2) delta_w: small on shell
                assert!(resid < 3.0 * w * blk.frobenius(), "residual {resid}");
            }
        }
        // completeness in the squared-mass quadrature
        let resid = completeness_residual(&g, 2.0, 256);
        assert!(resid < 0.02, "completeness residual {resid}");
    }

    #[test]
    fn symmetric_green_matches_pv_mean() {
        let g = grid_1p1(16);
        let m = Mass::real(1.0);
        let eps = 3e-3;
        let w = 6e-3;
        let s = symmetric_green(&m, g.clone(), eps, w, 8.0, 32000).unwrap();
        // adjoint relation for real mass
        let adj_defect = s.krein_adjoint().sub(&s).unwrap().frobenius() / s.frobenius();
        assert!(adj_defect < 1e-9, "adjoint defect {adj_defect}");
        // imaginary mass is defined while the retarded kind is not
        let si = symmetric_green(&Mass::imaginary(1.0), g.clone(), 0.05, 0.3, 8.0, 800).unwrap();
        assert!(si.frobenius() > 0.0);
        let sadj = si.krein_adjoint();
        let si_conj =
            symmetric_green(&Mass::imaginary(-1.0), g.clone(), 0.05, 0.3, 8.0, 800).unwrap();
        assert!(sadj.sub(&si_conj).unwrap().frobenius() < 1e-8 * si.frobenius());
        // far off shell the value approaches the advanced/retarded mean
        let mut worst = 0.0f64;
        let mut checked = 0;
        for site in 0..g.num_points() {
            let k = g.momentum(site);
            let k2 = g.minkowski(&k, &k);
            if (k2 - m.m2()).abs() > 6.0 && k2.abs() < 30.0 {
                let expect = kslash(&k[..2])
                    .add(&CMat::scaled_identity(4, m.0))
                    .scale(C::new(1.0 / (k2 - m.m2()), 0.0));
                let got = CMat::from_fn(4, 4, |a, b| {
                    s.entry(site, a, site, b) / C::new(g.volume(), 0.0)
                });
                worst = worst.max(got.sub(&expect).frobenius() / expect.frobenius());
                checked += 1;
            }
        }
        assert!(checked > 4);
        assert!(worst < 1e-6, "pv-mean deviation {worst}");
    }

    #[test]
    fn duhamel_and_defect_identities() {
        let g = grid_1p1(8);
        let sc = scales();
        let fam = make_phase_family(2, &sc, 0.6, 3, g.clone()).unwrap();
        let l1 = ScalarKernel::from_fn(g.clone(), 0, |p| 0.5 * (-0.2 * p[0] * p[0]).exp());
        let l2 = ScalarKernel::from_fn(g.clone(), 1, |p| 0.4 * (-0.3 * p[0] * p[0]).exp());
        let gamma = gamma_operator(&fam, &[l1, l2], 4).unwrap();
        // Krein symmetry of Gamma
        let sym = gamma.krein_adjoint().sub(&gamma).unwrap().frobenius() / gamma.frobenius();
        assert!(sym < 1e-10, "gamma symmetry {sym}");
        let dirac = dirac_generator(g.clone());
        // Duhamel commutator identity
        let resid = commutator_exponential_residual(&gamma, &dirac, 24).unwrap();
        assert!(resid < 1e-8, "duhamel residual {resid}");
        // projector identity with the explicit on-shell remainder
        let m = Mass::real(0.8);
        let s_m = symmetric_green(&m, g.clone(), 0.08, 0.5, 7.0, 700).unwrap();
        let rep = check_green_defect(&gamma, &dirac, &m, 0.5, &s_m, 24).unwrap();
        assert!(rep.identity_residual < 1e-6, "identity residual {}", rep.identity_residual);
        // zero Gamma: E = 0 and the conjugated Green's operator is s itself
        let zero = NonlocalOperator::zeros(g.clone(), 4);
        let rep0 = check_green_defect(&zero, &dirac, &m, 0.5, &s_m, 8).unwrap();
        assert!(rep0.defect.frobenius() == 0.0);
        assert!(rep0.conjugated_green.sub(&s_m).unwrap().frobenius() < 1e-9 * s_m.frobenius());
        // E norm grows quadratically with the phase amplitude
        let mut amps = Vec::new();
        let mut norms = Vec::new();
        for (i, amp) in [0.1f64, 0.2, 0.4].iter().enumerate() {
            let _ = i;
            let f = make_phase_family(2, &sc, *amp, 11, g.clone()).unwrap();
            let l1 = ScalarKernel::from_fn(g.clone(), 0, |p| 0.5 * (-0.2 * p[0] * p[0]).exp());
            let l2 = ScalarKernel::from_fn(g.clone(), 1, |p| 0.4 * (-0.3 * p[0] * p[0]).exp());
            let gm = gamma_operator(&f, &[l1, l2], 4).unwrap();
            let e = e_operator(&gm, &dirac, 16).unwrap();
            amps.push(*amp);
            norms.push(e.frobenius());
        }
        let slope = loglog_fit(&amps, &norms).unwrap().slope;
        assert!((slope - 2.0).abs() < 0.2, "E amplitude slope {slope}");
    }

    #[test]
    fn c_operator_cases() {
        let g = grid_1p1(8);
        let dirac = dirac_generator(g.clone());
        let zero = NonlocalOperator::zeros(g.clone(), 4);
        assert_eq!(c_operator(&zero, &dirac, 8).unwrap().frobenius(), 0.0);
        // scalar multiple of the identity: commutators vanish
        let cid = NonlocalOperator::identity(g.clone(), 4).scale(C::new(0.37, 0.0));
        assert!(c_operator(&cid, &dirac, 8).unwrap().frobenius() < 1e-9);
        assert!(c_operator(&cid, &dirac, 3).is_err());
        // quadrature refinement changes little
        let sc = scales();
        let fam = make_phase_family(1, &sc, 0.7, 5, g.clone()).unwrap();
        let l = ScalarKernel::from_fn(g.clone(), 0, |p| (-0.25 * p[0] * p[0]).exp());
        let gm = gamma_operator(&fam, &[l], 4).unwrap();
        let c8 = c_operator(&gm, &dirac, 8).unwrap();
        let c16 = c_operator(&gm, &dirac, 16).unwrap();
        let diff = c8.sub(&c16).unwrap().frobenius() / c16.frobenius();
        assert!(diff < 1e-8, "quadrature refinement moved the result by {diff}");
    }

    #[test]
    fn holographic_green_and_dirac() {
        let g = grid_1p1(12);
        let sc = scales();
        let m = Mass::real(0.9);
        let s_m = symmetric_green(&m, g.clone(), 0.15, 0.5, 7.0, 500).unwrap();
        // N = 1: plain conjugation preserves the norm
        let fam1 = make_phase_family(1, &sc, 0.8, 7, g.clone()).unwrap();
        let sh1 = holographic_green(&fam1, &s_m, 4).unwrap();
        assert!((sh1.frobenius() - s_m.frobenius()).abs() < 1e-8 * s_m.frobenius());
        // all phases zero: N s_m
        let fam0 = make_phase_family(3, &sc, 0.0, 8, g.clone()).unwrap();
        let sh0 = holographic_green(&fam0, &s_m, 4).unwrap();
        let triple = s_m.scale(C::new(3.0, 0.0));
        assert!(sh0.sub(&triple).unwrap().frobenius() < 1e-9 * triple.frobenius());
        // Krein symmetry for real mass
        let fam = make_phase_family(2, &sc, 0.8, 9, g.clone()).unwrap();
        let sh = holographic_green(&fam, &s_m, 4).unwrap();
        let symd = sh.krein_adjoint().sub(&sh).unwrap().frobenius() / sh.frobenius();
        assert!(symd < 1e-10, "sym defect {symd}");
        // holographic Dirac: symmetry and the Green's identity
        let hd = holographic_dirac(&sh, &m).unwrap();
        assert!(hd.condition.is_finite());
        let dsym = hd.operator.krein_adjoint().sub(&hd.operator).unwrap().frobenius()
            / hd.operator.frobenius();
        assert!(dsym < 1e-8, "dirac symmetry {dsym}");
        let id = NonlocalOperator::identity(g.clone(), 4);
        let mid = id.scale(m.0);
        let check = hd.operator.sub(&mid).unwrap().compose(&sh).unwrap();
        assert!(check.sub(&id).unwrap().frobenius() < 1e-8 * id.frobenius());
    }

    #[test]
    fn perturbation_series_sanity() {
        let g = grid_1p1(12);
        let m = Mass::real(1.0);
        let eps = 8.0 / 12.0;
        let s_ret = retarded_green(&m, g.clone(), eps).unwrap();
        let dirac = dirac_generator(g.clone());
        // weak local potential
        let sc = scales();
        let fam = make_phase_family(1, &sc, 0.05, 13, g.clone()).unwrap();
        let b = phase_mult(&fam, 0, 1.0, 4)
            .unwrap()
            .sub(&NonlocalOperator::identity(g.clone(), 4))
            .unwrap()
            .scale(C::new(0.0, -1.0)); // small anti-phase potential, order amp
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let src: Vec<C> = (0..g.num_points() * 4)
            .map(|_| C::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let psi = s_ret.apply(&src).unwrap();
        // order 0 returns psi
        let r0 = retarded_series(&s_ret, &b, &psi, 0).unwrap();
        assert_eq!(r0.result, psi);
        // high order approximates the direct solve of the regularized Dirac
        // equation, phrased through the Green's operator: (1 + s B) x = psi
        let rep = retarded_series(&s_ret, &b, &psi, 24).unwrap();
        let full = {
            let vol = g.volume();
            let sb = s_ret.compose(&b).unwrap();
            let total = CMat::identity(g.num_points() * 4)
                .add(&sb.mat.scale(C::new(1.0 / vol, 0.0)));
            let lu = crate::linalg::lu_decompose(&total).unwrap();
            lu.solve_vec(&psi)
        };
        let _ = dirac;
        let err: f64 = rep
            .result
            .iter()
            .zip(&full)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = full.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / scale < 1e-4, "series vs direct solve {}", err / scale);
        assert!(!rep.growth_flagged, "series diverged for a weak potential");
        // zero potential: psi at all orders
        let z = NonlocalOperator::zeros(g.clone(), 4);
        let rz = holographic_perturbation_series(&s_ret, &z, &psi, 3).unwrap();
        let dz: f64 = rz.iter().zip(&psi).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert_eq!(dz, 0.0);
    }
}
