//! Dense nonlocal-operator algebra over the momentum lattice.
//!
//! An operator kernel `B(p, k)` acts on wave functions by
//! `(B psi)(p) = (1/volume) sum_k B(p,k) psi(k)`, so the continuum
//! `(2pi)^d delta^d` corresponds to `volume x Kronecker delta` and the
//! identity operator carries `volume` on its diagonal.  Spinor components,
//! when present, ride along the momentum index with no extra measure factor.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{FieldRealization, ScalarKernel};
use crate::lattice::{Grid, MAX_DIM};
use crate::linalg::CMat;

type C = Complex64;

/// Dirac matrices in the standard representation, gamma^0..gamma^3.
pub fn gamma_matrices() -> [CMat; 4] {
    let z = C::new(0.0, 0.0);
    let o = C::new(1.0, 0.0);
    let i = C::new(0.0, 1.0);
    let g0 = CMat {
        rows: 4,
        cols: 4,
        data: vec![
            o, z, z, z, //
            z, o, z, z, //
            z, z, -o, z, //
            z, z, z, -o,
        ],
    };
    let g1 = CMat {
        rows: 4,
        cols: 4,
        data: vec![
            z, z, z, o, //
            z, z, o, z, //
            z, -o, z, z, //
            -o, z, z, z,
        ],
    };
    let g2 = CMat {
        rows: 4,
        cols: 4,
        data: vec![
            z, z, z, -i, //
            z, z, i, z, //
            z, i, z, z, //
            -i, z, z, z,
        ],
    };
    let g3 = CMat {
        rows: 4,
        cols: 4,
        data: vec![
            z, z, o, z, //
            z, z, z, -o, //
            -o, z, z, z, //
            z, o, z, z,
        ],
    };
    [g0, g1, g2, g3]
}

/// `kslash = k_mu gamma^mu` for a momentum with upper components `k`.
pub fn kslash(k: &[f64]) -> CMat {
    let g = gamma_matrices();
    let mut m = g[0].scale(C::new(k[0], 0.0));
    for a in 1..k.len().min(4) {
        m = m.sub(&g[a].scale(C::new(k[a], 0.0)));
    }
    m
}

/// Dense operator over (momentum x spin) slots.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub grid: Arc<Grid>,
    pub spin_dim: usize,
    pub mat: CMat,
}

impl NonlocalOperator {
    pub fn dim(&self) -> usize {
        self.grid.num_points() * self.spin_dim
    }

    pub fn zeros(grid: Arc<Grid>, spin_dim: usize) -> NonlocalOperator {
        let dim = grid.num_points() * spin_dim;
        NonlocalOperator {
            grid,
            spin_dim,
            mat: CMat::zeros(dim, dim),
        }
    }

    /// Identity operator; carries `volume` on the diagonal.
    pub fn identity(grid: Arc<Grid>, spin_dim: usize) -> NonlocalOperator {
        let dim = grid.num_points() * spin_dim;
        let v = grid.volume();
        NonlocalOperator {
            grid,
            spin_dim,
            mat: CMat::scaled_identity(dim, C::new(v, 0.0)),
        }
    }

    /// Momentum-diagonal operator from per-momentum spin blocks.
    pub fn from_diagonal(
        grid: Arc<Grid>,
        spin_dim: usize,
        mut block: impl FnMut(usize) -> CMat,
    ) -> NonlocalOperator {
        let n = grid.num_points();
        let v = grid.volume();
        let mut op = NonlocalOperator::zeros(grid, spin_dim);
        for site in 0..n {
            let b = block(site);
            for s1 in 0..spin_dim {
                for s2 in 0..spin_dim {
                    op.mat[(site * spin_dim + s1, site * spin_dim + s2)] =
                        b[(s1, s2)] * C::new(v, 0.0);
                }
            }
        }
        op
    }

    pub fn entry(&self, out_site: usize, out_spin: usize, in_site: usize, in_spin: usize) -> C {
        self.mat[(
            out_site * self.spin_dim + out_spin,
            in_site * self.spin_dim + in_spin,
        )]
    }

    pub fn same_shape(&self, other: &NonlocalOperator) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("operators on different grids".into()));
        }
        if self.spin_dim != other.spin_dim {
            return Err(Error::ShapeMismatch(format!(
                "spin dims {} vs {}",
                self.spin_dim, other.spin_dim
            )));
        }
        Ok(())
    }

    /// Apply to a wave function laid out site-major (`site * spin + s`).
    pub fn apply(&self, psi: &[C]) -> Result<Vec<C>> {
        if psi.len() != self.dim() {
            return Err(Error::ShapeMismatch("wave function length".into()));
        }
        let mut out = self.mat.matvec(psi);
        let f = 1.0 / self.grid.volume();
        out.iter_mut().for_each(|v| *v *= f);
        Ok(out)
    }

    pub fn add(&self, other: &NonlocalOperator) -> Result<NonlocalOperator> {
        self.same_shape(other)?;
        Ok(NonlocalOperator {
            grid: self.grid.clone(),
            spin_dim: self.spin_dim,
            mat: self.mat.add(&other.mat),
        })
    }

    pub fn sub(&self, other: &NonlocalOperator) -> Result<NonlocalOperator> {
        self.same_shape(other)?;
        Ok(NonlocalOperator {
            grid: self.grid.clone(),
            spin_dim: self.spin_dim,
            mat: self.mat.sub(&other.mat),
        })
    }

    pub fn scale(&self, s: C) -> NonlocalOperator {
        NonlocalOperator {
            grid: self.grid.clone(),
            spin_dim: self.spin_dim,
            mat: self.mat.scale(s),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.mat.frobenius()
    }

    /// Operator product with the lattice measure factor per internal sum.
    pub fn compose(&self, other: &NonlocalOperator) -> Result<NonlocalOperator> {
        self.same_shape(other)?;
        let mat = self
            .mat
            .matmul(&other.mat)
            .scale(C::new(1.0 / self.grid.volume(), 0.0));
        Ok(NonlocalOperator {
            grid: self.grid.clone(),
            spin_dim: self.spin_dim,
            mat,
        })
    }

    pub fn commutator(&self, other: &NonlocalOperator) -> Result<NonlocalOperator> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        ab.sub(&ba)
    }

    /// Adjoint with respect to the wave-function inner product: conjugate
    /// transpose for scalars, `gamma^0 (.)^dagger gamma^0` blockwise for
    /// spinors.
    pub fn krein_adjoint(&self) -> NonlocalOperator {
        let adj = self.mat.adjoint();
        if self.spin_dim == 1 {
            return NonlocalOperator {
                grid: self.grid.clone(),
                spin_dim: 1,
                mat: adj,
            };
        }
        let n = self.grid.num_points();
        let s = self.spin_dim;
        // gamma^0 = diag(1,1,-1,-1): conjugation flips the sign of the
        // off-diagonal 2x2 blocks.
        let sign = |a: usize| if a < 2 { 1.0 } else { -1.0 };
        let mut out = CMat::zeros(n * s, n * s);
        for i in 0..n * s {
            let si = i % s;
            for j in 0..n * s {
                let sj = j % s;
                out[(i, j)] = adj[(i, j)] * C::new(sign(si) * sign(sj), 0.0);
            }
        }
        NonlocalOperator {
            grid: self.grid.clone(),
            spin_dim: s,
            mat: out,
        }
    }

    /// Kernel transformed to position space, `B(x, y)`, for scalar operators.
    pub fn position_kernel(&self) -> Result<CMat> {
        if self.spin_dim != 1 {
            return Err(Error::ShapeMismatch(
                "position kernel implemented for scalar operators".into(),
            ));
        }
        let n = self.grid.num_points();
        // columns: p -> x with e^{-ipx}/V
        let mut cols = CMat::zeros(n, n);
        for k in 0..n {
            let col: Vec<C> = (0..n).map(|p| self.mat[(p, k)]).collect();
            let tx = self.grid.inverse_ft(&col)?;
            for x in 0..n {
                cols[(x, k)] = tx[x];
            }
        }
        // rows: k -> y with e^{+iky}/V
        let mut out = CMat::zeros(n, n);
        for x in 0..n {
            let row: Vec<C> = (0..n).map(|k| cols[(x, k)].conj()).collect();
            let ty = self.grid.inverse_ft(&row)?;
            for y in 0..n {
                out[(x, y)] = ty[y].conj();
            }
        }
        Ok(out)
    }
}

/// `B(kL, kR) = What(kL - kR) Lhat((kL + kR)/2)`: the separable
/// midpoint-difference form, scalar slot.
pub fn from_separable(w: &FieldRealization, l: &ScalarKernel) -> Result<NonlocalOperator> {
    if w.grid != l.grid {
        return Err(Error::GridMismatch("field and kernel grids differ".into()));
    }
    separable_from_hat(&w.grid.clone(), &w.hat[0], l)
}

/// Same contract with an explicit position-space multiplier `a(x)`.
pub fn triangle(a: &[C], l: &ScalarKernel) -> Result<NonlocalOperator> {
    let grid = l.grid.clone();
    let ahat = grid.forward_ft(a)?;
    separable_from_hat(&grid, &ahat, l)
}

/// Windowed variant of the separable form: only transfers inside the
/// symmetric momentum window are occupied (no cyclic wrap-around).  For
/// multipliers and kernels band-limited to a fraction of the window this
/// operator's position kernel factorizes exactly into `a((x+y)/2) L(y-x)`,
/// which is what the continuum-limit oracles compare against.
pub fn triangle_windowed(a: &[C], l: &ScalarKernel) -> Result<NonlocalOperator> {
    let grid = l.grid.clone();
    let ahat = grid.forward_ft(a)?;
    let n = grid.num_points();
    let nd = grid.ndim();
    let mut op = NonlocalOperator::zeros(grid.clone(), 1);
    for row in 0..n {
        let skl = grid.signed_index(row);
        for col in 0..n {
            let skr = grid.signed_index(col);
            let mut q = [0i64; MAX_DIM];
            let mut mid2 = [0i64; MAX_DIM];
            let mut in_window = true;
            for ax in 0..nd {
                q[ax] = skl[ax] - skr[ax];
                mid2[ax] = skl[ax] + skr[ax];
                let half = grid.shape()[ax] as i64 / 2;
                if q[ax] < -half || q[ax] >= half {
                    in_window = false;
                }
            }
            if !in_window {
                continue;
            }
            let wq = ahat[grid.flat_from_signed(&q[..nd])];
            let lm = l.at_half_index(&mid2[..nd]);
            op.mat[(row, col)] = wq * C::new(lm, 0.0);
        }
    }
    Ok(op)
}

fn separable_from_hat(
    grid: &Arc<Grid>,
    what: &[C],
    l: &ScalarKernel,
) -> Result<NonlocalOperator> {
    let n = grid.num_points();
    let nd = grid.ndim();
    let mut op = NonlocalOperator::zeros(grid.clone(), 1);
    for row in 0..n {
        let skl = grid.signed_index(row);
        for col in 0..n {
            let skr = grid.signed_index(col);
            let mut q = [0i64; MAX_DIM];
            let mut mid2 = [0i64; MAX_DIM];
            for a in 0..nd {
                q[a] = skl[a] - skr[a];
                mid2[a] = skl[a] + skr[a];
            }
            let wq = what[grid.flat_from_signed(&q[..nd])];
            let lm = l.at_half_index(&mid2[..nd]);
            op.mat[(row, col)] = wq * C::new(lm, 0.0);
        }
    }
    Ok(op)
}

/// Fixed-momentum-transfer part of a nonlocal operator.
#[derive(Debug, Clone)]
pub struct FieldOperator {
    pub base: NonlocalOperator,
    pub transfer: Vec<i64>,
}

/// Zero every entry whose momentum transfer differs from `q` (signed lattice
/// index, wrapped); summing slices over all transfers restores the operator.
pub fn slice(op: &NonlocalOperator, q: &[i64]) -> Result<FieldOperator> {
    let grid = &op.grid;
    let nd = grid.ndim();
    if q.len() != nd {
        return Err(Error::InvalidParameter("transfer dimension mismatch".into()));
    }
    let qw = grid.wrap_signed(q);
    let n = grid.num_points();
    let s = op.spin_dim;
    let mut out = NonlocalOperator::zeros(grid.clone(), s);
    for row_site in 0..n {
        let skl = grid.signed_index(row_site);
        let mut target = [0i64; MAX_DIM];
        for a in 0..nd {
            target[a] = skl[a] - qw[a];
        }
        let col_site = grid.flat_from_signed(&target[..nd]);
        for s1 in 0..s {
            for s2 in 0..s {
                out.mat[(row_site * s + s1, col_site * s + s2)] =
                    op.mat[(row_site * s + s1, col_site * s + s2)];
            }
        }
    }
    Ok(FieldOperator {
        base: out,
        transfer: qw[..nd].to_vec(),
    })
}

/// Multiplication by the plane wave `e^{-iqx}`: shifts momenta by `q`.
pub fn plane_wave(grid: Arc<Grid>, q: &[i64], spin_dim: usize) -> NonlocalOperator {
    let n = grid.num_points();
    let nd = grid.ndim();
    let v = grid.volume();
    let mut op = NonlocalOperator::zeros(grid.clone(), spin_dim);
    for col_site in 0..n {
        let sk = grid.signed_index(col_site);
        let mut target = [0i64; MAX_DIM];
        for a in 0..nd {
            target[a] = sk[a] + q[a];
        }
        let row_site = grid.flat_from_signed(&target[..nd]);
        for s1 in 0..spin_dim {
            op.mat[(row_site * spin_dim + s1, col_site * spin_dim + s1)] = C::new(v, 0.0);
        }
    }
    op
}

/// Midpoint-direction momentum derivative: multiplies the position kernel by
/// the periodic displacement profile `2 cos(dp zeta) sin(dp xi / 2) / dp`
/// along the chosen axis, which reduces to `(y - x)^axis` as the spacing
/// shrinks.  Realized as cyclic central differences on both momentum slots,
/// which makes the product rule exact on the periodic lattice.
pub fn dfrak(op: &NonlocalOperator, axis: usize) -> Result<NonlocalOperator> {
    let grid = &op.grid;
    let nd = grid.ndim();
    if axis >= nd {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let n = grid.num_points();
    let s = op.spin_dim;
    let dp = grid.momentum_spacing()[axis];
    // time axis: (y-x)^0 = +i (d_p + d_k); spatial axes get the opposite sign
    let pref = if axis == 0 {
        C::new(0.0, 1.0)
    } else {
        C::new(0.0, -1.0)
    };
    let shift = |site: usize, by: i64| -> usize {
        let sk = grid.signed_index(site);
        let mut t = [0i64; MAX_DIM];
        t[..nd].copy_from_slice(&sk[..nd]);
        t[axis] += by;
        grid.flat_from_signed(&t[..nd])
    };
    let mut out = NonlocalOperator::zeros(grid.clone(), s);
    for row in 0..n {
        let rp = shift(row, 1);
        let rm = shift(row, -1);
        for col in 0..n {
            let cp = shift(col, 1);
            let cm = shift(col, -1);
            for s1 in 0..s {
                for s2 in 0..s {
                    let dpterm = op.mat[(rp * s + s1, col * s + s2)]
                        - op.mat[(rm * s + s1, col * s + s2)];
                    let dkterm = op.mat[(row * s + s1, cp * s + s2)]
                        - op.mat[(row * s + s1, cm * s + s2)];
                    out.mat[(row * s + s1, col * s + s2)] =
                        pref * (dpterm + dkterm) / C::new(2.0 * dp, 0.0);
                }
            }
        }
    }
    Ok(out)
}

/// The scalar-example field operator at a spacetime point:
/// `phi(x) = C W(x) + (1/2C) {i D_t, W(x)}` with `i D_t` realized as
/// spectral multiplication by the frequency.
pub fn field_op_scalar_position(
    x: &[f64],
    w: &FieldRealization,
    c: f64,
) -> Result<NonlocalOperator> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    let grid = w.grid.clone();
    let n = grid.num_points();
    let nd = grid.ndim();
    // multiplication operator by W, translated to x
    let mut mw = NonlocalOperator::zeros(grid.clone(), 1);
    for row in 0..n {
        let skl = grid.signed_index(row);
        for col in 0..n {
            let skr = grid.signed_index(col);
            let mut q = [0i64; MAX_DIM];
            for a in 0..nd {
                q[a] = skl[a] - skr[a];
            }
            let qm = grid.momentum_from_signed(&q);
            let phase = C::from_polar(1.0, -grid.minkowski(&qm[..nd], x));
            mw.mat[(row, col)] = w.hat[0][grid.flat_from_signed(&q[..nd])] * phase;
        }
    }
    // i D_t = diag(omega)
    let idt = NonlocalOperator::from_diagonal(grid.clone(), 1, |site| {
        let mut b = CMat::zeros(1, 1);
        b[(0, 0)] = C::new(grid.momentum(site)[0], 0.0);
        b
    });
    let anti = idt.compose(&mw)?.add(&mw.compose(&idt)?)?;
    mw.scale(C::new(c, 0.0))
        .add(&anti.scale(C::new(1.0 / (2.0 * c), 0.0)))
}
