//! Points and geodesics on the Grassmann manifold `G(m, r)`.
//!
//! A point is an `r`-dimensional subspace of `ℝ^m`, represented by any
//! `m × r` matrix with orthonormal columns. Two representations of the
//! same subspace differ by a right rotation, so comparisons in tests go
//! through the projector `U Uᵀ`.
//!
//! The solver only ever moves along *rank-one* geodesics: the first column
//! of a suitably rotated basis swings towards a unit vector `h ⊥ span(U)`,
//!
//! ```text
//! U(t) = [u₁ cos t + h sin t, u₂, …, u_r]
//! ```
//!
//! and the span is periodic in `t` with period `π`. The general geodesic
//! for an arbitrary tangent direction is kept for cross-checking.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SetError};
use crate::linalg::thin_svd;

/// Maximum `‖UᵀU − I‖_F` accepted for a basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Maximum `‖Uᵀh‖` accepted for a geodesic direction. Looser than
/// [`ORTHONORMAL_TOL`] because `h` comes out of an SVD of a residual product.
pub const DIRECTION_TOL: f64 = 1e-8;

/// Rank threshold for [`orthonormalize`]: `σ_min ≤ RANK_RTOL · σ_max` is
/// treated as rank deficient.
pub const RANK_RTOL: f64 = 1e-12;

/// An `m × r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis(DMatrix<f64>);

impl Basis {
    /// Wraps a matrix that is already orthonormal to [`ORTHONORMAL_TOL`].
    pub fn from_orthonormal(matrix: DMatrix<f64>) -> Result<Self> {
        let (m, r) = matrix.shape();
        if r == 0 || r > m {
            return Err(SetError::InvalidRank { rank: r, max: m });
        }
        let err = orthonormality_error(&matrix);
        if err > ORTHONORMAL_TOL {
            return Err(SetError::NotOrthonormal(err));
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }

    /// `U Uᵀ`, the representation-independent form of the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }

    /// `‖UᵀU − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Right rotation `U V`; spans the same subspace when `V` is orthogonal.
    pub fn rotate(&self, v: &DMatrix<f64>) -> Result<Self> {
        Self::from_orthonormal(&self.0 * v)
    }
}

fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let r = a.ncols();
    (a.transpose() * a - DMatrix::identity(r, r)).norm()
}

/// Orthonormal basis of `span(a)` for a full-column-rank `a`.
///
/// Uses Householder QR with the signs fixed so that `R` has a positive
/// diagonal, which makes the output a deterministic function of `a`.
pub fn orthonormalize(a: &DMatrix<f64>) -> Result<Basis> {
    let (m, r) = a.shape();
    if r == 0 || r > m {
        return Err(SetError::InvalidRank { rank: r, max: m });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SetError::NonFinite);
    }
    let s = thin_svd(a).s;
    if s[0] == 0.0 || s[r - 1] <= RANK_RTOL * s[0] {
        return Err(SetError::RankDeficient);
    }
    Ok(Basis(qr_positive(a)))
}

/// QR orthonormalization without the rank check, for matrices already
/// known to be orthonormal up to rounding.
fn reorthonormalize(a: DMatrix<f64>) -> Basis {
    Basis(qr_positive(&a))
}

fn qr_positive(a: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..q.ncols() {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Draws a basis from the isotropic (Haar) distribution by orthonormalizing
/// an i.i.d. standard-Gaussian `m × r` matrix.
pub fn random_basis<R: Rng + ?Sized>(m: usize, r: usize, rng: &mut R) -> Result<Basis> {
    if r == 0 || r > m {
        return Err(SetError::InvalidRank { rank: r, max: m });
    }
    loop {
        let g = DMatrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        // A Gaussian draw is rank deficient with probability zero.
        if let Ok(basis) = orthonormalize(&g) {
            return Ok(basis);
        }
    }
}

/// Deterministic `r × r` orthogonal matrix whose first column is the unit
/// vector `v`: the Householder reflector that swaps `e₁` and `v`.
pub fn completion_with_first_column(v: &DVector<f64>) -> DMatrix<f64> {
    let r = v.len();
    let tail_sq: f64 = v.iter().skip(1).map(|x| x * x).sum();
    if tail_sq == 0.0 && v[0] > 0.0 {
        return DMatrix::identity(r, r);
    }
    // w = e₁ − v, with 1 − v₁ rewritten as ‖v₂..‖² / (1 + v₁) when v₁ > 0
    // to avoid cancellation.
    let mut w = -v.clone();
    w[0] = if v[0] > 0.0 { tail_sq / (1.0 + v[0]) } else { 1.0 - v[0] };
    let w_sq = w.norm_squared();
    DMatrix::identity(r, r) - (&w * w.transpose()) * (2.0 / w_sq)
}

/// Rank-one geodesic `U(t) = [u₁ cos t + h sin t, u₂, …, u_r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Geodesic {
    rotated: DMatrix<f64>,
    direction: DVector<f64>,
}

impl Rank1Geodesic {
    /// Starts at `span(U)` and moves the column `U v` towards `h`.
    ///
    /// The basis is rotated by the Householder completion of `v`, so that
    /// `u₁ = U v` and the span is unchanged. `h` is re-projected onto the
    /// orthogonal complement of `U` and renormalized.
    pub fn new(basis: &Basis, h: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        let u = basis.matrix();
        if h.len() != u.nrows() || v.len() != u.ncols() {
            return Err(SetError::DimensionMismatch {
                expected: (u.nrows(), u.ncols()),
                found: (h.len(), v.len()),
            });
        }
        let h_norm = h.norm();
        let v_norm = v.norm();
        if (h_norm - 1.0).abs() > DIRECTION_TOL || (v_norm - 1.0).abs() > DIRECTION_TOL {
            return Err(SetError::InvalidDirection(format!(
                "expected unit vectors, got ‖h‖ = {h_norm}, ‖v‖ = {v_norm}"
            )));
        }
        let overlap = u.transpose() * h;
        if overlap.norm() > DIRECTION_TOL {
            return Err(SetError::InvalidDirection(format!(
                "h is not orthogonal to span(U): ‖Uᵀh‖ = {:e}",
                overlap.norm()
            )));
        }
        let mut h = h - u * overlap;
        h /= h.norm();

        let rotation = completion_with_first_column(&(v / v_norm));
        Ok(Self {
            rotated: u * rotation,
            direction: h,
        })
    }

    /// `[u₁, …, u_r]`.
    pub fn rotated_basis(&self) -> &DMatrix<f64> {
        &self.rotated
    }

    /// The unit vector `h`.
    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn nrows(&self) -> usize {
        self.rotated.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rotated.ncols()
    }

    /// `u₁ cos t + h sin t`.
    pub fn moving_column(&self, t: f64) -> DVector<f64> {
        let (s, c) = t.sin_cos();
        self.rotated.column(0) * c + &self.direction * s
    }

    /// The raw curve point, without re-orthonormalization.
    pub fn point(&self, t: f64) -> DMatrix<f64> {
        let mut out = self.rotated.clone();
        out.set_column(0, &self.moving_column(t));
        out
    }

    /// `U(t)`, re-orthonormalized to keep rounding from accumulating.
    pub fn eval(&self, t: f64) -> Basis {
        reorthonormalize(self.point(t))
    }

    /// Parallel transport of the initial direction:
    /// `H(t) = [−u₁ sin t + h cos t, 0, …, 0]`.
    pub fn transported_direction(&self, t: f64) -> DMatrix<f64> {
        let (s, c) = t.sin_cos();
        let mut out = DMatrix::zeros(self.nrows(), self.rank());
        out.set_column(0, &(self.rotated.column(0) * (-s) + &self.direction * c));
        out
    }
}

/// Geodesic through `span(U)` with arbitrary tangent `H = U_H S V_Hᵀ`:
/// `U(t) = [U V_H, U_H] [cos St; sin St] V_Hᵀ`.
#[derive(Debug, Clone)]
pub struct GeneralGeodesic {
    base: DMatrix<f64>,
    u_h: DMatrix<f64>,
    s: DVector<f64>,
    v_h: DMatrix<f64>,
}

impl GeneralGeodesic {
    pub fn new(base: &Basis, tangent: &DMatrix<f64>) -> Result<Self> {
        if tangent.shape() != base.matrix().shape() {
            return Err(SetError::DimensionMismatch {
                expected: base.matrix().shape(),
                found: tangent.shape(),
            });
        }
        let svd = thin_svd(tangent);
        Ok(Self {
            base: base.matrix().clone(),
            u_h: svd.u,
            s: svd.s,
            v_h: svd.v_t.transpose(),
        })
    }

    /// Singular values of the tangent, descending.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn eval(&self, t: f64) -> Basis {
        let cos = DMatrix::from_diagonal(&self.s.map(|s| (s * t).cos()));
        let sin = DMatrix::from_diagonal(&self.s.map(|s| (s * t).sin()));
        let point = (&self.base * &self.v_h * cos + &self.u_h * sin) * self.v_h.transpose();
        reorthonormalize(point)
    }
}
