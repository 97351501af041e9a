//! Periodic Minkowski lattices and their Fourier conventions.
//!
//! Wave functions transform with the kernel `e^{+ipx}` (Minkowski product,
//! signature +,-,-,-), so the time axis and the spatial axes carry opposite
//! DFT directions.  Momenta are indexed in the symmetric window
//! `[-pi/dx, pi/dx)`, which keeps the `q <-> -q` symmetry constraints exactly
//! representable.  The continuum `(2pi)^d delta^d` is realized on the lattice
//! as `volume x Kronecker delta`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// Periodic spacetime/momentum lattice.  Axis 0 is time; the remaining axes
/// are spatial.  All axis sizes must be even so that momentum 0 and the
/// Nyquist mode are lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    momentum_spacing: Vec<f64>,
    strides: Vec<usize>,
    num_points: usize,
    volume: f64,
}

impl Grid {
    pub fn new(shape: &[usize], spacing: &[f64]) -> Result<Grid> {
        if shape.is_empty() || shape.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "grid must have 1..={} axes, got {}",
                MAX_DIM,
                shape.len()
            )));
        }
        if shape.len() != spacing.len() {
            return Err(Error::InvalidParameter(
                "shape and spacing must have the same length".into(),
            ));
        }
        for (&n, &dx) in shape.iter().zip(spacing) {
            if n == 0 || n % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "points per axis must be even and nonzero, got {n}"
                )));
            }
            if !(dx > 0.0) || !dx.is_finite() {
                return Err(Error::InvalidParameter(format!("bad spacing {dx}")));
            }
        }
        let momentum_spacing: Vec<f64> = shape
            .iter()
            .zip(spacing)
            .map(|(&n, &dx)| 2.0 * std::f64::consts::PI / (n as f64 * dx))
            .collect();
        let mut strides = vec![1usize; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let num_points = shape.iter().product();
        let volume = shape
            .iter()
            .zip(spacing)
            .map(|(&n, &dx)| n as f64 * dx)
            .product();
        Ok(Grid {
            shape: shape.to_vec(),
            spacing: spacing.to_vec(),
            momentum_spacing,
            strides,
            num_points,
            volume,
        })
    }

    /// Uniform grid: same size and spacing on every axis.
    pub fn uniform(ndim: usize, n: usize, dx: f64) -> Result<Grid> {
        Grid::new(&vec![n; ndim], &vec![dx; ndim])
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn spatial_dim(&self) -> usize {
        self.shape.len() - 1
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn momentum_spacing(&self) -> &[f64] {
        &self.momentum_spacing
    }

    /// Largest momentum step over the axes; the default resolution scale.
    pub fn max_momentum_spacing(&self) -> f64 {
        self.momentum_spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// Total position-space volume (product of extents).
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Volume of one position cell, `prod dx_a`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Minkowski product `a0 b0 - a.b` truncated to this grid's dimension.
    pub fn minkowski(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = a[0] * b[0];
        for i in 1..self.ndim() {
            s -= a[i] * b[i];
        }
        s
    }

    /// Signed per-axis index in `[-n/2, n/2)` for a flat storage index.
    pub fn signed_index(&self, flat: usize) -> [i64; MAX_DIM] {
        let mut out = [0i64; MAX_DIM];
        let mut rem = flat;
        for a in 0..self.ndim() {
            let k = rem / self.strides[a];
            rem %= self.strides[a];
            let n = self.shape[a];
            out[a] = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
        }
        out
    }

    /// Flat storage index from signed per-axis indices (wrapped mod n).
    pub fn flat_from_signed(&self, s: &[i64]) -> usize {
        let mut flat = 0usize;
        for a in 0..self.ndim() {
            let n = self.shape[a] as i64;
            let k = s[a].rem_euclid(n) as usize;
            flat += k * self.strides[a];
        }
        flat
    }

    /// Wrap a signed index vector into the symmetric window `[-n/2, n/2)`.
    pub fn wrap_signed(&self, s: &[i64]) -> [i64; MAX_DIM] {
        let mut out = [0i64; MAX_DIM];
        for a in 0..self.ndim() {
            let n = self.shape[a] as i64;
            let k = s[a].rem_euclid(n);
            out[a] = if k < n / 2 { k } else { k - n };
        }
        out
    }

    pub fn momentum_from_signed(&self, s: &[i64]) -> [f64; MAX_DIM] {
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.ndim() {
            p[a] = s[a] as f64 * self.momentum_spacing[a];
        }
        p
    }

    /// Momentum four-vector of a lattice point (symmetric window).
    pub fn momentum(&self, flat: usize) -> [f64; MAX_DIM] {
        self.momentum_from_signed(&self.signed_index(flat))
    }

    /// Position four-vector of a lattice point (centered window).
    pub fn position(&self, flat: usize) -> [f64; MAX_DIM] {
        let s = self.signed_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.ndim() {
            x[a] = s[a] as f64 * self.spacing[a];
        }
        x
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_points {
            return Err(Error::GridMismatch(format!(
                "field has {len} entries, grid has {} points",
                self.num_points
            )));
        }
        Ok(())
    }

    /// `fhat(p) = prod(dx) * sum_x f(x) e^{+ipx}` with Minkowski `px`.
    pub fn forward_ft(&self, field: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(field.len())?;
        let mut data = field.to_vec();
        for a in 0..self.ndim() {
            // time axis: e^{+i p0 x0}; spatial axes: e^{-i p.x}
            let fft_forward = a != 0;
            self.fft_axis(&mut data, a, fft_forward);
        }
        let scale = Complex64::new(self.cell_volume(), 0.0);
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(data)
    }

    /// `f(x) = (1/volume) * sum_p fhat(p) e^{-ipx}`; inverse of `forward_ft`.
    pub fn inverse_ft(&self, field: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(field.len())?;
        let mut data = field.to_vec();
        for a in 0..self.ndim() {
            let fft_forward = a == 0;
            self.fft_axis(&mut data, a, fft_forward);
        }
        let scale = Complex64::new(1.0 / self.volume, 0.0);
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(data)
    }

    fn fft_axis(&self, data: &mut [Complex64], axis: usize, forward: bool) {
        let len = self.shape[axis];
        let stride = self.strides[axis];
        let mut planner = FftPlanner::<f64>::new();
        let fft = if forward {
            planner.plan_fft_forward(len)
        } else {
            planner.plan_fft_inverse(len)
        };
        let block = len * stride;
        let nblocks = self.num_points / block;
        data.par_chunks_mut(block).with_max_len(1).for_each(|chunk| {
            let mut line = vec![Complex64::default(); len];
            for inner in 0..stride {
                for k in 0..len {
                    line[k] = chunk[inner + k * stride];
                }
                fft.process(&mut line);
                for k in 0..len {
                    chunk[inner + k * stride] = line[k];
                }
            }
        });
        debug_assert_eq!(nblocks * block, self.num_points);
    }
}

/// Scale hierarchy of a run: regularization length, nonlocality length,
/// dephasing length and macroscopic length, plus the frequency floor.
#[derive(Debug, Clone, PartialEq)]
pub struct Scales {
    pub eps: f64,
    pub l_min: f64,
    pub l_lambda: f64,
    pub l_macro: f64,
    pub omega_min: f64,
}

impl Scales {
    pub fn new(eps: f64, l_min: f64, l_lambda: f64, l_macro: f64, omega_min: f64) -> Result<Scales> {
        if !(eps > 0.0 && eps < l_min && l_min < l_macro) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < eps < l_min < l_macro, got eps={eps}, l_min={l_min}, l_macro={l_macro}"
            )));
        }
        if !(eps < l_lambda && l_lambda < l_macro) {
            return Err(Error::InvalidParameter(format!(
                "need eps < l_lambda < l_macro, got eps={eps}, l_lambda={l_lambda}, l_macro={l_macro}"
            )));
        }
        // The frequency floor sits between the inverse nonlocality scale and
        // the inverse cutoff; allow a little slack on the lower end since the
        // bound is only a scaling statement.
        if !(omega_min >= 0.999 / l_min && omega_min <= 1.0 / eps) {
            return Err(Error::InvalidParameter(format!(
                "omega_min={omega_min} outside [1/l_min, 1/eps] = [{}, {}]",
                1.0 / l_min,
                1.0 / eps
            )));
        }
        Ok(Scales {
            eps,
            l_min,
            l_lambda,
            l_macro,
            omega_min,
        })
    }

    /// Cone half-angle `1/sqrt(l_min * omega_min)`.
    pub fn theta(&self) -> f64 {
        1.0 / (self.l_min * self.omega_min).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaShape {
    Gaussian,
    Triangular,
}

/// Nascent delta function on the lattice; unit mass, even in its argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedDelta {
    pub width: f64,
    pub shape: DeltaShape,
}

impl RegularizedDelta {
    pub fn new(width: f64, shape: DeltaShape) -> Result<RegularizedDelta> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta width must be positive, got {width}"
            )));
        }
        Ok(RegularizedDelta { width, shape })
    }

    pub fn gaussian(width: f64) -> Result<RegularizedDelta> {
        RegularizedDelta::new(width, DeltaShape::Gaussian)
    }

    /// Default resolution: Gaussian with width twice the coarsest momentum step.
    pub fn default_for(grid: &Grid) -> RegularizedDelta {
        RegularizedDelta {
            width: 2.0 * grid.max_momentum_spacing(),
            shape: DeltaShape::Gaussian,
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let s = self.width;
        match self.shape {
            DeltaShape::Gaussian => {
                let z = v / s;
                (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            DeltaShape::Triangular => {
                let a = 1.0 - (v / s).abs();
                if a > 0.0 {
                    a / s
                } else {
                    0.0
                }
            }
        }
    }

    /// Peak value at the origin.
    pub fn peak(&self) -> f64 {
        self.eval(0.0)
    }
}

/// `delta_sigma(value)` with a Gaussian profile.
pub fn nascent_delta(value: f64, width: f64) -> Result<f64> {
    Ok(RegularizedDelta::gaussian(width)?.eval(value))
}

/// Sign function with `sign(0) = 0`.
pub fn sign_epsilon(value: f64) -> f64 {
    if value > 0.0 {
        1.0
    } else if value < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_field(grid: &Grid, seed: u64) -> Vec<Complex64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..grid.num_points())
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect()
    }

    #[test]
    fn grid_invariants() {
        let g = Grid::new(&[8, 6], &[0.5, 1.25]).unwrap();
        for a in 0..2 {
            let prod = g.momentum_spacing()[a] * g.spacing()[a] * g.shape()[a] as f64;
            assert!((prod - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        }
        assert!(Grid::new(&[7, 8], &[1.0, 1.0]).is_err());
        assert!(Grid::new(&[8], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn constant_field_is_zero_mode_with_volume_weight() {
        let g = Grid::uniform(2, 8, 0.7).unwrap();
        let field = vec![Complex64::new(1.0, 0.0); g.num_points()];
        let hat = g.forward_ft(&field).unwrap();
        let zero = g.flat_from_signed(&[0, 0]);
        assert!((hat[zero].re - g.volume()).abs() < 1e-10);
        for (i, v) in hat.iter().enumerate() {
            if i != zero {
                assert!(v.norm() < 1e-10, "unexpected weight at {i}");
            }
        }
    }

    #[test]
    fn plane_wave_is_single_peak() {
        let g = Grid::uniform(2, 8, 1.0).unwrap();
        // e^{-i q x} has its forward transform peaked at q with weight volume.
        let q_idx = [2i64, -3i64];
        let q = g.momentum_from_signed(&q_idx);
        let field: Vec<Complex64> = (0..g.num_points())
            .map(|i| {
                let x = g.position(i);
                Complex64::from_polar(1.0, -g.minkowski(&q, &x))
            })
            .collect();
        let hat = g.forward_ft(&field).unwrap();
        let peak = g.flat_from_signed(&q_idx);
        assert!((hat[peak].re - g.volume()).abs() < 1e-9);
        let off: f64 = hat
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != peak)
            .map(|(_, v)| v.norm())
            .sum();
        assert!(off < 1e-8);
    }

    #[test]
    fn roundtrip_inverse_of_forward() {
        let g = Grid::new(&[8, 4, 6], &[0.5, 1.0, 0.25]).unwrap();
        let f = random_field(&g, 3);
        let back = g.inverse_ft(&g.forward_ft(&f).unwrap()).unwrap();
        let num: f64 = f
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = f.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-12);
    }

    #[test]
    fn parseval_holds_for_random_fields() {
        let g = Grid::uniform(2, 10, 0.8).unwrap();
        for seed in 0..100 {
            let f = random_field(&g, 1000 + seed);
            let hat = g.forward_ft(&f).unwrap();
            // sum_x |f|^2 dx^d = (1/volume) sum_p |fhat|^2 dp-measure:
            // with our conventions, cell * sum|f|^2 = sum|fhat|^2 / volume.
            let lhs: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume();
            let rhs: f64 = hat.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.volume();
            assert!((lhs - rhs).abs() / lhs < 1e-10);
        }
    }

    #[test]
    fn convolution_theorem() {
        let g = Grid::uniform(2, 8, 0.5).unwrap();
        let f = random_field(&g, 11);
        let h = random_field(&g, 12);
        // (f * h)(x) = cell * sum_y f(y) h(x - y), periodic difference.
        let n = g.num_points();
        let mut conv = vec![Complex64::default(); n];
        for x in 0..n {
            let sx = g.signed_index(x);
            let mut acc = Complex64::default();
            for y in 0..n {
                let sy = g.signed_index(y);
                let d = [sx[0] - sy[0], sx[1] - sy[1], 0, 0];
                acc += f[y] * h[g.flat_from_signed(&d[..2])];
            }
            conv[x] = acc * g.cell_volume();
        }
        let lhs = g.forward_ft(&conv).unwrap();
        let fhat = g.forward_ft(&f).unwrap();
        let hhat = g.forward_ft(&h).unwrap();
        for i in 0..n {
            let rhs = fhat[i] * hhat[i];
            assert!((lhs[i] - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn reality_constraint() {
        let g = Grid::uniform(2, 8, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f: Vec<Complex64> = (0..g.num_points())
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
            .collect();
        let hat = g.forward_ft(&f).unwrap();
        for i in 0..g.num_points() {
            let s = g.signed_index(i);
            let neg = [-s[0], -s[1], 0, 0];
            let j = g.flat_from_signed(&neg[..2]);
            assert!((hat[j] - hat[i].conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn nascent_delta_normalization_and_symmetry() {
        let d = RegularizedDelta::gaussian(0.3).unwrap();
        assert!((d.peak() - 1.0 / (0.3 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-14);
        assert!(d.eval(5.0 * 0.3) < 1e-5 * d.peak());
        assert!((d.eval(0.17) - d.eval(-0.17)).abs() < 1e-15);
        // Riemann sum over a wide window.
        let h = 0.3 / 50.0;
        let total: f64 = (-4000..4000).map(|i| d.eval(i as f64 * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
        let t = RegularizedDelta::new(0.4, DeltaShape::Triangular).unwrap();
        let ht = 0.4 / 50.0;
        let total_t: f64 = (-4000..4000).map(|i| t.eval(i as f64 * ht) * ht).sum();
        assert!((total_t - 1.0).abs() < 1e-6);
        assert!(RegularizedDelta::gaussian(0.0).is_err());
    }

    #[test]
    fn sign_function() {
        assert_eq!(sign_epsilon(2.0), 1.0);
        assert_eq!(sign_epsilon(-3.0), -1.0);
        assert_eq!(sign_epsilon(0.0), 0.0);
    }

    #[test]
    fn scales_validation() {
        assert!(Scales::new(0.05, 0.5, 1.0, 10.0, 4.0).is_ok());
        assert!(Scales::new(0.5, 0.05, 1.0, 10.0, 4.0).is_err());
        assert!(Scales::new(0.05, 0.5, 20.0, 10.0, 4.0).is_err());
        assert!(Scales::new(0.05, 0.5, 1.0, 10.0, 100.0).is_err());
        let s = Scales::new(0.05, 0.5, 1.0, 10.0, 8.0).unwrap();
        assert!((s.theta() - 0.5) < 1e-12);
    }
}
