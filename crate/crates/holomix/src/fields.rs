//! Concrete momentum-space kernels, Gaussian covariance specifications and
//! exact-reality field sampling.
//!
//! Conventions: a multiplication-operator field `W` carries the wave-function
//! transform `What(q) = forward_ft(W)`, so covariances obey
//! `<What(q) What(q')> = volume * kron(q+q') * hhat(q)` on the lattice.
//! Difference kernels `L(xi)` carry the opposite sign, `Lhat(p) = sum_xi
//! L(xi) e^{-ip xi} dxi`; analytic kernels are stored in that convention.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{sign_epsilon, Grid, RegularizedDelta, Scales, MAX_DIM};
use crate::linalg::{cholesky_psd, hermitian_eig, CMat};

type C = Complex64;

/// Deterministic seed mixer (splitmix64) for per-site random streams.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Real-valued momentum-space kernel `Lhat(p)` with an optional analytic
/// form for evaluation at half-lattice midpoints.
#[derive(Clone)]
pub struct ScalarKernel {
    pub grid: Arc<Grid>,
    pub label: usize,
    pub hat: Vec<f64>,
    analytic: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for ScalarKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarKernel")
            .field("label", &self.label)
            .field("points", &self.hat.len())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl ScalarKernel {
    pub fn from_fn(
        grid: Arc<Grid>,
        label: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> ScalarKernel {
        let hat = (0..grid.num_points())
            .map(|i| f(&grid.momentum(i)[..grid.ndim()]))
            .collect();
        ScalarKernel {
            grid,
            label,
            hat,
            analytic: Some(Arc::new(f)),
        }
    }

    pub fn from_samples(grid: Arc<Grid>, label: usize, hat: Vec<f64>) -> Result<ScalarKernel> {
        if hat.len() != grid.num_points() {
            return Err(Error::GridMismatch("kernel sample count".into()));
        }
        Ok(ScalarKernel {
            grid,
            label,
            hat,
            analytic: None,
        })
    }

    /// Value at a (possibly half-integer) signed lattice index.  Analytic
    /// kernels are evaluated exactly; sampled kernels by linear interpolation
    /// over the `2^h` neighbouring lattice points.
    pub fn at_half_index(&self, s2: &[i64]) -> f64 {
        let nd = self.grid.ndim();
        if let Some(f) = &self.analytic {
            let mut p = [0.0f64; MAX_DIM];
            for a in 0..nd {
                p[a] = 0.5 * s2[a] as f64 * self.grid.momentum_spacing()[a];
            }
            return f(&p[..nd]);
        }
        let mut halves = [false; MAX_DIM];
        let mut base = [0i64; MAX_DIM];
        let mut n_half = 0usize;
        for a in 0..nd {
            base[a] = s2[a].div_euclid(2);
            if s2[a].rem_euclid(2) != 0 {
                halves[a] = true;
                n_half += 1;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n_half) {
            let mut idx = base;
            let mut bit = 0;
            for a in 0..nd {
                if halves[a] {
                    if corner >> bit & 1 == 1 {
                        idx[a] += 1;
                    }
                    bit += 1;
                }
            }
            acc += self.hat[self.grid.flat_from_signed(&idx[..nd])];
        }
        acc / (1usize << n_half) as f64
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.hat[flat]
    }
}

/// The soluble example kernel `Lhat(p) = C + p0 / C`.
pub fn example_l_hat(c: f64, grid: Arc<Grid>) -> Result<ScalarKernel> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    Ok(ScalarKernel::from_fn(grid, 0, move |p| c + p[0] / c))
}

/// Momentum-space covariance `hhat^{jk}_{ab}(q)`, stored densely per lattice
/// momentum as a Hermitian `(tensor_dim * families)^2` matrix in the
/// composite index `(j, a)`.
#[derive(Debug, Clone)]
pub struct GaussianFieldSpec {
    pub grid: Arc<Grid>,
    pub tensor_dim: usize,
    pub families: usize,
    pub diagonal_in_ab: bool,
    cov: Vec<CMat>,
}

impl GaussianFieldSpec {
    pub fn dim(&self) -> usize {
        self.tensor_dim * self.families
    }

    pub fn comp(&self, j: usize, a: usize) -> usize {
        j * self.families + a
    }

    pub fn cov_at(&self, flat: usize) -> &CMat {
        &self.cov[flat]
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        tensor_dim: usize,
        families: usize,
        diagonal_in_ab: bool,
        f: impl Fn(&[f64]) -> CMat + Send + Sync,
    ) -> Result<GaussianFieldSpec> {
        let dim = tensor_dim * families;
        let cov: Vec<CMat> = (0..grid.num_points())
            .into_par_iter()
            .map(|i| f(&grid.momentum(i)[..grid.ndim()]))
            .collect();
        for (i, m) in cov.iter().enumerate() {
            if m.rows != dim || m.cols != dim {
                return Err(Error::ShapeMismatch(format!(
                    "covariance at flat index {i} has shape {}x{}, expected {dim}x{dim}",
                    m.rows, m.cols
                )));
            }
        }
        Ok(GaussianFieldSpec {
            grid,
            tensor_dim,
            families,
            diagonal_in_ab,
            cov,
        })
    }

    /// Scalar (tensor_dim 1, one family) spec from a real function of q.
    pub fn scalar_from_fn(
        grid: Arc<Grid>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync,
    ) -> Result<GaussianFieldSpec> {
        GaussianFieldSpec::from_fn(grid, 1, 1, true, |p| {
            let mut m = CMat::zeros(1, 1);
            m[(0, 0)] = C::new(f(p), 0.0);
            m
        })
    }

    /// Check both symmetry relations and positive semi-definiteness at every
    /// lattice momentum.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let g = &self.grid;
        for flat in 0..g.num_points() {
            let s = g.signed_index(flat);
            let neg: Vec<i64> = s[..g.ndim()].iter().map(|v| -v).collect();
            let nflat = g.flat_from_signed(&neg);
            let m = &self.cov[flat];
            let mneg = &self.cov[nflat];
            let scale = m.frobenius().max(1.0);
            for r in 0..m.rows {
                for c in 0..m.cols {
                    // conj(hhat(q)) = hhat(-q)
                    if (m[(r, c)].conj() - mneg[(r, c)]).norm() > tol * scale {
                        return Err(Error::InvalidParameter(format!(
                            "covariance violates conj(h(q)) = h(-q) at q index {:?}",
                            &s[..g.ndim()]
                        )));
                    }
                    // conj(hhat^{jk}_{ab}(q)) = hhat^{kj}_{ba}(q): Hermitian matrix
                    if (m[(r, c)].conj() - m[(c, r)]).norm() > tol * scale {
                        return Err(Error::InvalidParameter(format!(
                            "covariance not Hermitian at q index {:?}",
                            &s[..g.ndim()]
                        )));
                    }
                }
            }
            let (vals, _) = hermitian_eig(m)?;
            if vals[0] < -tol * scale {
                return Err(Error::NotPositive {
                    q: s[..g.ndim()].to_vec(),
                    min_eig: vals[0],
                });
            }
        }
        Ok(())
    }

    /// Minimum covariance eigenvalue over all lattice momenta.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for m in &self.cov {
            let (vals, _) = hermitian_eig(m)?;
            min = min.min(vals[0]);
        }
        Ok(min)
    }
}

/// The soluble example covariance `hhat(q) = delta_sigma(q^2) / (2 |q0|)`,
/// set to zero on the `q0 = 0` plane.
pub fn example_h_hat(grid: Arc<Grid>, delta: RegularizedDelta) -> Result<GaussianFieldSpec> {
    if delta.width < grid.max_momentum_spacing() * grid.max_momentum_spacing() * 0.01 {
        return Err(Error::InvalidParameter(
            "delta width is not resolvable on this grid".into(),
        ));
    }
    let g = grid.clone();
    GaussianFieldSpec::scalar_from_fn(grid, move |p| {
        let q0 = p[0];
        if q0 == 0.0 {
            return 0.0;
        }
        let q2 = g.minkowski(p, p);
        delta.eval(q2) / (2.0 * q0.abs())
    })
}

/// Momentum-space causal fundamental solution `delta_sigma(q^2) eps(q0)`.
pub fn causal_fundamental_solution_hat(grid: &Grid, q: &[f64], delta: &RegularizedDelta) -> f64 {
    let q2 = grid.minkowski(q, q);
    delta.eval(q2) * sign_epsilon(q[0])
}

/// Inverse transform of a scalar covariance to position space.
pub fn position_covariance_h(grid: &Grid, spec: &GaussianFieldSpec) -> Result<Vec<f64>> {
    if spec.tensor_dim != 1 || spec.families != 1 {
        return Err(Error::ShapeMismatch(
            "position covariance needs a scalar spec".into(),
        ));
    }
    let hat: Vec<C> = (0..grid.num_points())
        .map(|i| spec.cov_at(i)[(0, 0)])
        .collect();
    let pos = grid.inverse_ft(&hat)?;
    Ok(pos.iter().map(|v| v.re).collect())
}

/// Closed-form position covariance of the soluble example in 3+1 dimensions:
/// `Theta(|x| - |x0|) / (16 pi^2 |x|)`.
pub fn closed_form_position_covariance(x: &[f64]) -> f64 {
    let r = (x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
    if r > x[0].abs() && r > 0.0 {
        1.0 / (16.0 * std::f64::consts::PI * std::f64::consts::PI * r)
    } else {
        0.0
    }
}

/// Kernel supported near the negative-frequency mass cone around a spatial
/// null direction: Hann^2 profile in the transverse deviation
/// `|k - |w| n| / (theta (omega_min + |w|))` and in the frequency window.
pub fn cone_kernel_l_hat(
    direction: &[f64],
    scales: &Scales,
    grid: Arc<Grid>,
) -> Result<ScalarKernel> {
    if grid.spatial_dim() < 2 {
        return Err(Error::InvalidParameter(
            "cone kernel needs at least two spatial dimensions".into(),
        ));
    }
    let sdim = grid.spatial_dim();
    if direction.len() != sdim {
        return Err(Error::InvalidParameter("direction dimension mismatch".into()));
    }
    let norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    let nhat: Vec<f64> = direction.iter().map(|d| d / norm).collect();
    let theta = scales.theta();
    let omega_min = scales.omega_min;
    // transverse width at the band center must cover a couple of momentum steps
    if theta * 3.0 * omega_min < 2.0 * grid.max_momentum_spacing() {
        return Err(Error::InvalidParameter(format!(
            "cone unresolvable: transverse width {} below two momentum steps {}",
            theta * 3.0 * omega_min,
            2.0 * grid.max_momentum_spacing()
        )));
    }
    let omega_max: f64 = grid.shape()[0] as f64 / 2.0 * grid.momentum_spacing()[0];
    let hann = |t: f64| -> f64 {
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        }
    };
    Ok(ScalarKernel::from_fn(grid, 0, move |p| {
        let w = p[0];
        if w >= -omega_min {
            return 0.0;
        }
        let aw = w.abs();
        // frequency onset below -omega_min; the transition widths are chosen
        // wide enough that the measured gradients stay inside the
        // 1/(theta (omega_min + |w|)) scaling envelope
        let onset = hann(1.0 - (aw - omega_min) / (omega_min / 2.0));
        // roll off before the grid edge
        let roll = hann((aw - 0.70 * omega_max) / (0.25 * omega_max));
        let mut t2 = 0.0;
        for i in 0..nhat.len() {
            let d = p[1 + i] - aw * nhat[i];
            t2 += d * d;
        }
        let dev = t2.sqrt() / (theta * (omega_min + aw));
        onset * roll * hann(dev)
    }))
}

/// A realization of the Gaussian field in momentum space: one complex field
/// per `(tensor index, family)` component, with `What(-q) = conj(What(q))`
/// exact by construction.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    pub grid: Arc<Grid>,
    pub tensor_dim: usize,
    pub families: usize,
    pub seed: u64,
    /// component-major: `hat[comp][flat]`
    pub hat: Vec<Vec<C>>,
}

impl FieldRealization {
    pub fn comp(&self, j: usize, a: usize) -> &[C] {
        &self.hat[j * self.families + a]
    }

    /// Value at a signed momentum index (wrapped into the lattice).
    pub fn value(&self, comp: usize, s: &[i64]) -> C {
        self.hat[comp][self.grid.flat_from_signed(s)]
    }

    /// Position-space field per component (complex; imaginary parts vanish
    /// up to rounding for a valid realization).
    pub fn to_position(&self) -> Result<Vec<Vec<C>>> {
        self.hat.iter().map(|h| self.grid.inverse_ft(h)).collect()
    }
}

/// Classification of a momentum site for the sampling sweep.
enum SiteClass {
    /// strictly positive representative of a `{q, -q}` pair
    Canonical(usize),
    /// equal to its own negative (all components 0 or Nyquist)
    SelfConjugate,
    /// filled by conjugation from the canonical partner
    Mirror,
}

fn classify(grid: &Grid, flat: usize) -> SiteClass {
    let s = grid.signed_index(flat);
    let mut self_conj = true;
    for a in 0..grid.ndim() {
        let n = grid.shape()[a] as i64;
        if !(s[a] == 0 || s[a] == -n / 2) {
            self_conj = false;
        }
    }
    if self_conj {
        return SiteClass::SelfConjugate;
    }
    for a in 0..grid.ndim() {
        let n = grid.shape()[a] as i64;
        // Nyquist components map to themselves under negation; skip them
        // when looking for the first deciding component.
        if s[a] == 0 || s[a] == -n / 2 {
            continue;
        }
        if s[a] > 0 {
            let neg: Vec<i64> = s[..grid.ndim()].iter().map(|v| -v).collect();
            return SiteClass::Canonical(grid.flat_from_signed(&neg));
        }
        return SiteClass::Mirror;
    }
    SiteClass::SelfConjugate
}

/// PSD factor `B` with `B B* = m`, via Cholesky or, for semidefinite input,
/// the eigendecomposition.
fn psd_factor(m: &CMat, q: &[i64]) -> Result<CMat> {
    let scale = m.frobenius().max(1e-300);
    match cholesky_psd(m, 1e-10 * scale) {
        Ok(l) => Ok(l),
        Err(_) => {
            let (vals, vecs) = hermitian_eig(m)?;
            if vals[0] < -1e-10 * scale {
                return Err(Error::NotPositive {
                    q: q.to_vec(),
                    min_eig: vals[0],
                });
            }
            let n = m.rows;
            let mut b = CMat::zeros(n, n);
            for j in 0..n {
                let s = vals[j].max(0.0).sqrt();
                for i in 0..n {
                    b[(i, j)] = vecs[(i, j)] * C::new(s, 0.0);
                }
            }
            Ok(b)
        }
    }
}

/// Draw a jointly Gaussian realization with the spec's covariance under the
/// lattice delta convention; deterministic for fixed seed, parallel over
/// momentum sites.
pub fn sample(spec: &GaussianFieldSpec, seed: u64) -> Result<FieldRealization> {
    let grid = &spec.grid;
    let n = grid.num_points();
    let dim = spec.dim();
    let vol = grid.volume();
    let drawn: Vec<Option<Vec<C>>> = (0..n)
        .into_par_iter()
        .map(|flat| -> Result<Option<Vec<C>>> {
            match classify(grid, flat) {
                SiteClass::Mirror => Ok(None),
                SiteClass::SelfConjugate => {
                    let m = spec.cov_at(flat).scale(C::new(vol, 0.0));
                    let s = grid.signed_index(flat);
                    let b = psd_factor(&m, &s[..grid.ndim()])?;
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, flat as u64));
                    let xi: Vec<C> = (0..dim)
                        .map(|_| C::new(StandardNormal.sample(&mut rng), 0.0))
                        .collect();
                    Ok(Some(b.matvec(&xi)))
                }
                SiteClass::Canonical(_) => {
                    let m = spec.cov_at(flat).scale(C::new(vol, 0.0));
                    let s = grid.signed_index(flat);
                    let b = psd_factor(&m, &s[..grid.ndim()])?;
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, flat as u64));
                    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
                    let xi: Vec<C> = (0..dim)
                        .map(|_| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            C::new(re * sqrt_half, im * sqrt_half)
                        })
                        .collect();
                    Ok(Some(b.matvec(&xi)))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hat = vec![vec![C::default(); n]; dim];
    for flat in 0..n {
        match classify(grid, flat) {
            SiteClass::Mirror => {}
            _ => {
                let v = drawn[flat].as_ref().expect("drawn at non-mirror site");
                for c in 0..dim {
                    hat[c][flat] = v[c];
                }
            }
        }
    }
    // mirrors by conjugation
    for flat in 0..n {
        if let SiteClass::Canonical(neg) = classify(grid, flat) {
            for comp in hat.iter_mut() {
                comp[neg] = comp[flat].conj();
            }
        }
    }
    Ok(FieldRealization {
        grid: grid.clone(),
        tensor_dim: spec.tensor_dim,
        families: spec.families,
        seed,
        hat,
    })
}

/// Add `shift x identity` to the covariance at every momentum.
pub fn psd_repair(spec: &GaussianFieldSpec, shift: f64) -> Result<GaussianFieldSpec> {
    if shift < 0.0 {
        return Err(Error::InvalidParameter("shift must be nonnegative".into()));
    }
    let mut out = spec.clone();
    for m in &mut out.cov {
        for i in 0..m.rows {
            m[(i, i)] += C::new(shift, 0.0);
        }
    }
    Ok(out)
}

const RECORD_MAGIC: u32 = 0x484d_4652; // "HMFR"

/// Flat binary record: header (grid dims, spacings, seed, component count)
/// followed by interleaved re/im 64-bit floats in axis-major order.
pub fn write_realization<W: Write>(r: &FieldRealization, mut w: W) -> Result<()> {
    w.write_all(&RECORD_MAGIC.to_le_bytes())?;
    w.write_all(&(r.grid.ndim() as u32).to_le_bytes())?;
    for a in 0..r.grid.ndim() {
        w.write_all(&(r.grid.shape()[a] as u64).to_le_bytes())?;
    }
    for a in 0..r.grid.ndim() {
        w.write_all(&r.grid.spacing()[a].to_le_bytes())?;
    }
    w.write_all(&r.seed.to_le_bytes())?;
    w.write_all(&(r.tensor_dim as u32).to_le_bytes())?;
    w.write_all(&(r.families as u32).to_le_bytes())?;
    for comp in &r.hat {
        for v in comp {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_realization<R: Read>(mut rd: R) -> Result<FieldRealization> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    rd.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != RECORD_MAGIC {
        return Err(Error::Config("bad field record magic".into()));
    }
    rd.read_exact(&mut b4)?;
    let ndim = u32::from_le_bytes(b4) as usize;
    if ndim == 0 || ndim > MAX_DIM {
        return Err(Error::Config("bad field record dimension".into()));
    }
    let mut shape = vec![0usize; ndim];
    for s in shape.iter_mut() {
        rd.read_exact(&mut b8)?;
        *s = u64::from_le_bytes(b8) as usize;
    }
    let mut spacing = vec![0f64; ndim];
    for s in spacing.iter_mut() {
        rd.read_exact(&mut b8)?;
        *s = f64::from_le_bytes(b8);
    }
    rd.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    rd.read_exact(&mut b4)?;
    let tensor_dim = u32::from_le_bytes(b4) as usize;
    rd.read_exact(&mut b4)?;
    let families = u32::from_le_bytes(b4) as usize;
    let grid = Arc::new(Grid::new(&shape, &spacing)?);
    let n = grid.num_points();
    let mut hat = Vec::with_capacity(tensor_dim * families);
    for _ in 0..tensor_dim * families {
        let mut comp = Vec::with_capacity(n);
        for _ in 0..n {
            rd.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            rd.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            comp.push(C::new(re, im));
        }
        hat.push(comp);
    }
    Ok(FieldRealization {
        grid,
        tensor_dim,
        families,
        seed,
        hat,
    })
}
