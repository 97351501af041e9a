//! Dense complex matrix kernels used by the operator algebra: products,
//! LU solves, Hermitian Jacobi eigendecomposition, Newton polar iteration
//! and a Pade scaling-and-squaring matrix exponential.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

type C = Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> CMat {
        CMat {
            rows,
            cols,
            data: vec![C::default(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn scaled_identity(n: usize, s: C) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C) -> CMat {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: C) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += self[(i, j)].norm();
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Matrix product, parallel over output rows.
    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![C::default(); n * m];
        out.par_chunks_mut(m).enumerate().for_each(|(i, orow)| {
            let arow = &self.data[i * k..(i + 1) * k];
            for (kk, &a) in arow.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[kk * m..(kk + 1) * m];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        });
        CMat {
            rows: n,
            cols: m,
            data: out,
        }
    }

    pub fn matvec(&self, v: &[C]) -> Vec<C> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<C>()
            })
            .collect()
    }

    /// Spectral norm estimate by power iteration on `A* A`.
    pub fn two_norm_est(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v: Vec<C> = (0..self.cols)
            .map(|i| C::new(1.0 + (i as f64 * 0.37).sin() * 0.1, 0.0))
            .collect();
        normalize(&mut v);
        let at = self.adjoint();
        let mut lam = 0.0;
        for _ in 0..60 {
            let w = self.matvec(&v);
            let mut u = at.matvec(&w);
            let n = normalize(&mut u);
            if (n.sqrt() - lam).abs() <= 1e-12 * n.sqrt().max(1e-300) {
                lam = n.sqrt();
                break;
            }
            lam = n.sqrt();
            v = u;
        }
        lam
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.cols + j]
    }
}

fn normalize(v: &mut [C]) -> f64 {
    let n: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    let n = n.sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// LU decomposition with partial pivoting (in place).
pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
    pub swaps: usize,
}

pub fn lu_decompose(a: &CMat) -> Result<Lu> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("LU needs a square matrix".into()));
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let mut pmax = k;
        let mut vmax = lu[(k, k)].norm();
        for i in k + 1..n {
            let v = lu[(i, k)].norm();
            if v > vmax {
                vmax = v;
                pmax = i;
            }
        }
        if vmax == 0.0 {
            return Err(Error::Singular(format!("zero pivot at column {k}")));
        }
        if pmax != k {
            for j in 0..n {
                lu.data.swap(k * n + j, pmax * n + j);
            }
            piv.swap(k, pmax);
            swaps += 1;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            if f.re != 0.0 || f.im != 0.0 {
                for j in k + 1..n {
                    let s = lu[(k, j)];
                    lu[(i, j)] -= f * s;
                }
            }
        }
    }
    Ok(Lu { lu, piv, swaps })
}

impl Lu {
    pub fn solve_vec(&self, b: &[C]) -> Vec<C> {
        let n = self.lu.rows;
        let mut x: Vec<C> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let n = self.lu.rows;
        let m = b.cols;
        let bt = b.transpose();
        let mut cols: Vec<Vec<C>> = Vec::with_capacity(m);
        bt.data
            .par_chunks(n)
            .map(|col| self.solve_vec(col))
            .collect_into_vec(&mut cols);
        let mut out = CMat::zeros(n, m);
        for (j, col) in cols.iter().enumerate() {
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    pub fn min_diag(&self) -> f64 {
        (0..self.lu.rows)
            .map(|i| self.lu[(i, i)].norm())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    let lu = lu_decompose(a)?;
    Ok(lu.solve_mat(&CMat::identity(a.rows)))
}

/// Rough 1-norm condition estimate `|A|_1 |A^-1|_1`.
pub fn condition_estimate(a: &CMat) -> Result<f64> {
    let inv = inverse(a)?;
    Ok(a.one_norm() * inv.one_norm())
}

/// Smallest singular value estimate via inverse power iteration on `A* A`.
pub fn smallest_singular_value(a: &CMat) -> Result<f64> {
    let lu = lu_decompose(a)?;
    let lut = lu_decompose(&a.adjoint())?;
    let n = a.rows;
    let mut v: Vec<C> = (0..n)
        .map(|i| C::new(1.0 + 0.2 * ((i * 7 % 13) as f64), 0.0))
        .collect();
    normalize(&mut v);
    let mut growth = 0.0f64;
    for _ in 0..40 {
        // w = (A* A)^{-1} v = A^{-1} (A*)^{-1} v
        let w = lut.solve_vec(&v);
        let mut u = lu.solve_vec(&w);
        let g = normalize(&mut u);
        if g == 0.0 {
            break;
        }
        if (g - growth).abs() < 1e-10 * g {
            growth = g;
            break;
        }
        growth = g;
        v = u;
    }
    Ok(1.0 / growth.sqrt())
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
/// Returns eigenvalues (ascending) and the unitary matrix whose columns are
/// the eigenvectors.
pub fn hermitian_eig(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("eig needs a square matrix".into()));
    }
    let n = a.rows;
    let mut m = a.clone();
    // enforce exact Hermitianity of the working copy
    for i in 0..n {
        for j in 0..i {
            let mean = (m[(i, j)] + m[(j, i)].conj()) * C::new(0.5, 0.0);
            m[(i, j)] = mean;
            m[(j, i)] = mean.conj();
        }
        let d = m[(i, i)].re;
        m[(i, i)] = C::new(d, 0.0);
    }
    let mut v = CMat::identity(n);
    let scale = m.frobenius().max(1e-300);
    let tol = 1e-14 * scale;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = m[(p, q)];
                let beta = b.norm();
                if beta <= 1e-300 {
                    continue;
                }
                let phase = b / beta;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = 0.5 * (2.0 * beta).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // J columns: col_p' = c col_p - s phase* col_q
                //            col_q' = s col_p + c phase* col_q
                let sp = phase.conj() * s;
                let cp = phase.conj() * c;
                for r in 0..n {
                    let arp = m[(r, p)];
                    let arq = m[(r, q)];
                    m[(r, p)] = arp * c - arq * sp;
                    m[(r, q)] = arp * s + arq * cp;
                }
                let sc = phase * s;
                let cc = phase * c;
                for r in 0..n {
                    let apr = m[(p, r)];
                    let aqr = m[(q, r)];
                    m[(p, r)] = apr * c - aqr * sc;
                    m[(q, r)] = apr * s + aqr * cc;
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp * c - vrq * sp;
                    v[(r, q)] = vrp * s + vrq * cp;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[(i, i)].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let eigvals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vec_sorted = CMat::zeros(n, n);
    for (newcol, &(_, oldcol)) in pairs.iter().enumerate() {
        for r in 0..n {
            vec_sorted[(r, newcol)] = v[(r, oldcol)];
        }
    }
    Ok((eigvals, vec_sorted))
}

/// Cholesky factor `L` with `L L* = A` for Hermitian positive semi-definite
/// input; tolerates slightly negative diagonals down to `-tol`.
pub fn cholesky_psd(a: &CMat, tol: f64) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("cholesky needs a square matrix".into()));
    }
    let n = a.rows;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d < -tol {
            return Err(Error::NotPositive {
                q: vec![j as i64],
                min_eig: d,
            });
        }
        let d = d.max(0.0).sqrt();
        l[(j, j)] = C::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = if d > 0.0 { s / d } else { C::default() };
        }
    }
    Ok(l)
}

/// Unitary polar factor of an invertible matrix by the scaled Newton
/// iteration `X <- (g X + (g X)^{-*}) / 2`.
pub fn polar_unitary(a: &CMat) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("polar needs a square matrix".into()));
    }
    let n = a.rows;
    let mut x = a.clone();
    let mut limit_hit = true;
    for iter in 0..80 {
        let lu = match lu_decompose(&x) {
            Ok(lu) => lu,
            Err(_) => {
                let smin = smallest_singular_value(a).unwrap_or(0.0);
                return Err(Error::Singular(format!(
                    "polar iteration met a singular iterate; smallest singular value ~ {smin:.3e}"
                )));
            }
        };
        if lu.min_diag() < 1e-300 {
            return Err(Error::Singular(
                "polar iteration pivot underflow; input is numerically singular".into(),
            ));
        }
        let xinv = lu.solve_mat(&CMat::identity(n));
        let g = if iter < 6 {
            (xinv.frobenius() / x.frobenius()).sqrt()
        } else {
            1.0
        };
        let xinv_adj = xinv.adjoint();
        let mut next = CMat::zeros(n, n);
        for i in 0..n * n {
            next.data[i] =
                (x.data[i] * g + xinv_adj.data[i] / g) * C::new(0.5, 0.0);
        }
        let diff = next.sub(&x).frobenius();
        let nrm = next.frobenius();
        x = next;
        if diff <= 1e-14 * nrm {
            limit_hit = false;
            break;
        }
    }
    if limit_hit {
        return Err(Error::Conditioning(
            "polar Newton iteration did not converge in 80 steps".into(),
        ));
    }
    Ok(x)
}

/// Matrix exponential, Pade scaling-and-squaring (degree 13).
pub fn expm(a: &CMat) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("expm needs a square matrix".into()));
    }
    let n = a.rows;
    let theta13 = 5.371920351148152;
    let norm = a.one_norm();
    let mut squarings = 0usize;
    let mut ascaled = a.clone();
    if norm > theta13 {
        squarings = ((norm / theta13).log2().ceil()) as usize;
        let f = C::new((0.5f64).powi(squarings as i32), 0.0);
        ascaled = a.scale(f);
    }
    let b: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = CMat::identity(n);
    let a2 = ascaled.matmul(&ascaled);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let cb = |x: f64| C::new(x, 0.0);
    // u = A (a6 (b13 a6 + b11 a4 + b9 a2) + b7 a6 + b5 a4 + b3 a2 + b1 I)
    let inner_u = a6
        .scale(cb(b[13]))
        .add(&a4.scale(cb(b[11])))
        .add(&a2.scale(cb(b[9])));
    let u_poly = a6
        .matmul(&inner_u)
        .add(&a6.scale(cb(b[7])))
        .add(&a4.scale(cb(b[5])))
        .add(&a2.scale(cb(b[3])))
        .add(&id.scale(cb(b[1])));
    let u = ascaled.matmul(&u_poly);
    let inner_v = a6
        .scale(cb(b[12]))
        .add(&a4.scale(cb(b[10])))
        .add(&a2.scale(cb(b[8])));
    let v = a6
        .matmul(&inner_v)
        .add(&a6.scale(cb(b[6])))
        .add(&a4.scale(cb(b[4])))
        .add(&a2.scale(cb(b[2])))
        .add(&id.scale(cb(b[0])));
    let num = v.add(&u);
    let den = v.sub(&u);
    let lu = lu_decompose(&den)?;
    let mut r = lu.solve_mat(&num);
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_cmat(n: usize, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| {
            C::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })
    }

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let a = random_cmat(n, seed);
        a.add(&a.adjoint()).scale(C::new(0.5, 0.0))
    }

    #[test]
    fn lu_solves() {
        let a = random_cmat(24, 1);
        let lu = lu_decompose(&a).unwrap();
        let b: Vec<C> = (0..24).map(|i| C::new(i as f64, -(i as f64) / 3.0)).collect();
        let x = lu.solve_vec(&b);
        let r = a.matvec(&x);
        let err: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).norm()).sum();
        assert!(err < 1e-9);
        let inv = inverse(&a).unwrap();
        let eye = a.matmul(&inv);
        assert!(eye.sub(&CMat::identity(24)).frobenius() < 1e-9);
    }

    #[test]
    fn hermitian_eig_reconstructs() {
        let a = random_hermitian(20, 7);
        let (vals, vecs) = hermitian_eig(&a).unwrap();
        // V unitary
        let vhv = vecs.adjoint().matmul(&vecs);
        assert!(vhv.sub(&CMat::identity(20)).frobenius() < 1e-10);
        // A = V diag V*
        let mut d = CMat::zeros(20, 20);
        for i in 0..20 {
            d[(i, i)] = C::new(vals[i], 0.0);
        }
        let rec = vecs.matmul(&d).matmul(&vecs.adjoint());
        assert!(rec.sub(&a).frobenius() < 1e-9 * a.frobenius().max(1.0));
        let mut sorted = vals.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(vals, sorted);
    }

    #[test]
    fn polar_factor_is_unitary_and_matches_svd_properties() {
        let a = random_cmat(18, 3);
        let u = polar_unitary(&a).unwrap();
        let defect = u.adjoint().matmul(&u).sub(&CMat::identity(18)).frobenius();
        assert!(defect < 1e-12, "defect {defect}");
        // H = U* A must be Hermitian positive definite
        let h = u.adjoint().matmul(&a);
        assert!(h.sub(&h.adjoint()).frobenius() < 1e-10);
        let (vals, _) = hermitian_eig(&h).unwrap();
        assert!(vals[0] > 0.0);
        // unitary input is a fixed point
        let v = polar_unitary(&u).unwrap();
        assert!(v.sub(&u).frobenius() < 1e-12);
    }

    #[test]
    fn expm_agrees_with_series_and_diagonal() {
        let mut d = CMat::zeros(8, 8);
        for i in 0..8 {
            d[(i, i)] = C::new(0.0, 0.3 * i as f64);
        }
        let e = expm(&d).unwrap();
        for i in 0..8 {
            let expect = C::new(0.0, 0.3 * i as f64).exp();
            assert!((e[(i, i)] - expect).norm() < 1e-13);
        }
        // Hermitian generator: exp(iH) unitary
        let h = random_hermitian(16, 5);
        let ih = h.scale(C::new(0.0, 1.0));
        let u = expm(&ih).unwrap();
        let defect = u.adjoint().matmul(&u).sub(&CMat::identity(16)).frobenius();
        assert!(defect < 1e-12, "defect {defect}");
        // against a direct Taylor sum for a small-norm matrix
        let s = random_cmat(10, 9).scale(C::new(0.05, 0.0));
        let mut taylor = CMat::identity(10);
        let mut term = CMat::identity(10);
        for k in 1..30 {
            term = term.matmul(&s).scale(C::new(1.0 / k as f64, 0.0));
            taylor = taylor.add(&term);
        }
        let e2 = expm(&s).unwrap();
        assert!(e2.sub(&taylor).frobenius() < 1e-12);
    }

    #[test]
    fn cholesky_of_psd() {
        let a = random_cmat(12, 11);
        let g = a.matmul(&a.adjoint());
        let l = cholesky_psd(&g, 1e-12).unwrap();
        let rec = l.matmul(&l.adjoint());
        assert!(rec.sub(&g).frobenius() < 1e-9 * g.frobenius());
        // indefinite input is rejected
        let mut bad = CMat::identity(3);
        bad[(2, 2)] = C::new(-1.0, 0.0);
        assert!(cholesky_psd(&bad, 1e-12).is_err());
    }

    #[test]
    fn norms_and_smallest_singular_value() {
        let a = random_cmat(16, 21);
        let two = a.two_norm_est();
        assert!(two <= a.frobenius() + 1e-9);
        let smin = smallest_singular_value(&a).unwrap();
        assert!(smin > 0.0 && smin < two);
        // well conditioned identity
        let s1 = smallest_singular_value(&CMat::identity(8)).unwrap();
        assert!((s1 - 1.0).abs() < 1e-8);
    }
}
