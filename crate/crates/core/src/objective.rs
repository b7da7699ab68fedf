//! The consistency objective
//!
//! ```text
//! f(U) = min_W ‖X_Ω − P_Ω(U W)‖²_F = Σ_j f_j(U)
//! ```
//!
//! where `W` is `r × n` and each column term `f_j` is an independent
//! least-squares problem over the observed rows of column `j`. Every
//! per-column solve uses the minimum-norm solution, so the fit is well
//! defined even when the row-restricted basis loses rank.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SetError};
use crate::grassmann::{Basis, Rank1Geodesic};
use crate::linalg::{gram_schmidt, pinv_solve, thin_svd};
use crate::matrix::ObservedMatrix;

/// `‖∇f‖_F ≤ STATIONARY_RTOL · ‖X_Ω‖²_F` counts as a vanishing gradient.
pub const STATIONARY_RTOL: f64 = 1e-13;

/// Least-squares fit of the observations on a column space.
#[derive(Debug, Clone)]
pub struct Fit {
    /// `r × n` coefficients `W_U`.
    pub w: DMatrix<f64>,
    /// `X_r = X_Ω − P_Ω(U W_U)`, zero off the mask.
    pub residual: DMatrix<f64>,
    /// `f(U) = ‖X_r‖²_F`.
    pub f_value: f64,
    /// Per-column terms `f_j`.
    pub atomic: Vec<f64>,
}

impl Fit {
    /// The completed estimate `X′ = U W_U`.
    pub fn estimate(&self, u: &Basis) -> DMatrix<f64> {
        u.matrix() * &self.w
    }
}

struct ColumnSolve {
    w: DVector<f64>,
    /// Residual on the observed rows, in `rows` order.
    residual: DVector<f64>,
}

fn solve_column(u: &DMatrix<f64>, x: &ObservedMatrix, j: usize) -> ColumnSolve {
    let rows = x.mask().observed_rows(j);
    let r = u.ncols();
    if rows.is_empty() {
        return ColumnSolve {
            w: DVector::zeros(r),
            residual: DVector::zeros(0),
        };
    }
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| x.values()[(i, j)]));
    let cols: Vec<DVector<f64>> = (0..r)
        .map(|k| DVector::from_iterator(rows.len(), rows.iter().map(|&i| u[(i, k)])))
        .collect();
    let gs = gram_schmidt(&cols);

    // Projection coefficients of b on the accepted directions, two passes.
    let mut residual = b.clone();
    let mut coeffs = DVector::zeros(gs.q.len());
    for _ in 0..2 {
        for (i, qi) in gs.q.iter().enumerate() {
            let c = qi.dot(&residual);
            coeffs[i] += c;
            residual.axpy(-c, qi, 1.0);
        }
    }

    let w = if gs.full_rank {
        let mut w = coeffs;
        // Back substitution with the triangular factor.
        for k in (0..r).rev() {
            let mut acc = w[k];
            for l in k + 1..r {
                acc -= gs.r[(k, l)] * w[l];
            }
            w[k] = acc / gs.r[(k, k)];
        }
        w
    } else {
        let a = DMatrix::from_fn(rows.len(), r, |i, k| cols[k][i]);
        pinv_solve(&a, &b)
    };
    ColumnSolve { w, residual }
}

fn check_rows(u: &Basis, x: &ObservedMatrix) -> Result<()> {
    if u.nrows() != x.nrows() {
        return Err(SetError::DimensionMismatch {
            expected: (x.nrows(), u.rank()),
            found: u.matrix().shape(),
        });
    }
    Ok(())
}

/// Solves every column's least-squares problem for the column space `U`.
pub fn fit(u: &Basis, x: &ObservedMatrix) -> Result<Fit> {
    check_rows(u, x)?;
    let (m, n) = x.shape();
    let mut w = DMatrix::zeros(u.rank(), n);
    let mut residual = DMatrix::zeros(m, n);
    let mut atomic = Vec::with_capacity(n);
    for j in 0..n {
        let solve = solve_column(u.matrix(), x, j);
        w.set_column(j, &solve.w);
        for (k, &i) in x.mask().observed_rows(j).iter().enumerate() {
            residual[(i, j)] = solve.residual[k];
        }
        atomic.push(solve.residual.norm_squared());
    }
    let f_value = atomic.iter().sum();
    Ok(Fit {
        w,
        residual,
        f_value,
        atomic,
    })
}

/// `f(U)`.
pub fn objective(u: &Basis, x: &ObservedMatrix) -> Result<f64> {
    Ok(fit(u, x)?.f_value)
}

/// The `j`-th column term `f_j(U)`, computed on its own.
pub fn atomic_value(u: &Basis, x: &ObservedMatrix, j: usize) -> Result<f64> {
    check_rows(u, x)?;
    if j >= x.ncols() {
        return Err(SetError::IndexOutOfRange {
            index: j,
            len: x.ncols(),
        });
    }
    Ok(solve_column(u.matrix(), x, j).residual.norm_squared())
}

/// `∇_U f = −2 X_r W_Uᵀ`.
///
/// Since `Uᵀ X_r = 0` at the least-squares optimum, this already lies in
/// the tangent space of the Grassmann manifold at `U`.
pub fn gradient(fit: &Fit) -> DMatrix<f64> {
    &fit.residual * fit.w.transpose() * -2.0
}

/// Top singular triple of the gradient. The descent direction is
/// `H = −h vᵀ`, which satisfies `⟨H, ∇f⟩ = −σ₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDirection {
    pub h: DVector<f64>,
    pub v: DVector<f64>,
    pub top_singular_value: f64,
}

impl SearchDirection {
    /// `H = −h vᵀ`.
    pub fn descent_matrix(&self) -> DMatrix<f64> {
        -(&self.h * self.v.transpose())
    }

    /// Rank-one geodesic from `U` along `H`: the column `U v` turns
    /// towards `−h`.
    pub fn geodesic(&self, u: &Basis) -> Result<Rank1Geodesic> {
        Rank1Geodesic::new(u, &(-&self.h), &self.v)
    }
}

/// Leading singular vectors of `grad`, with the sign fixed so the
/// largest-magnitude entry of `h` is positive.
pub fn search_direction(grad: &DMatrix<f64>) -> Result<SearchDirection> {
    let norm = grad.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(SetError::ZeroGradient);
    }
    let svd = thin_svd(grad);
    let sigma = svd.s[0];
    if sigma <= 1e-12 * norm {
        return Err(SetError::ZeroGradient);
    }
    let mut h = svd.u.column(0).into_owned();
    let mut v = svd.v_t.row(0).transpose();
    let pivot = h.iamax();
    if h[pivot] < 0.0 {
        h.neg_mut();
        v.neg_mut();
    }
    Ok(SearchDirection {
        h,
        v,
        top_singular_value: sigma,
    })
}

/// Everything a line search or a transfer needs at the current point.
#[derive(Debug, Clone)]
pub struct Descent {
    pub fit: Fit,
    pub gradient: DMatrix<f64>,
    pub direction: SearchDirection,
    pub geodesic: Rank1Geodesic,
}

/// Fit, gradient, rank-one direction and the geodesic it spans.
///
/// The gradient is re-projected onto the tangent space (`G − U Uᵀ G`)
/// before the SVD so that `h ⊥ span(U)` holds to rounding even when the
/// gradient is small. Returns [`SetError::ZeroGradient`] at stationary
/// points, judged relative to `‖X_Ω‖²_F`.
pub fn descent(u: &Basis, x: &ObservedMatrix) -> Result<Descent> {
    let fit = fit(u, x)?;
    let grad = gradient(&fit);
    let um = u.matrix();
    let tangent = &grad - um * (um.transpose() * &grad);
    if tangent.norm() <= STATIONARY_RTOL * x.norm_sq() {
        return Err(SetError::ZeroGradient);
    }
    let direction = search_direction(&tangent)?;
    let geodesic = direction.geodesic(u)?;
    Ok(Descent {
        fit,
        gradient: grad,
        direction,
        geodesic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::random_basis;
    use crate::linalg::frobenius_inner;
    use crate::matrix::Mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn barrier_example() -> ObservedMatrix {
        let x = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 3.0, 0.0, 1.0, 3.0, 2.0, 0.0]);
        ObservedMatrix::new(x, Mask::from_fn(3, 3, |i, j| i != j)).unwrap()
    }

    fn column_basis(entries: &[f64]) -> Basis {
        let v = DVector::from_column_slice(entries).normalize();
        Basis::from_orthonormal(DMatrix::from_columns(&[v])).unwrap()
    }

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_instance(m: usize, n: usize, r: usize, rate: f64, rng: &mut ChaCha8Rng) -> ObservedMatrix {
        let x = gaussian(m, r, rng) * gaussian(r, n, rng);
        let mask = Mask::from_fn(m, n, |_, _| rng.random::<f64>() < rate);
        ObservedMatrix::new(x, mask).unwrap()
    }

    #[test]
    fn barrier_example_values() {
        let x = barrier_example();
        let exact = fit(&column_basis(&[1.0, 1.0, 1.0]), &x).unwrap();
        assert!(exact.f_value <= 1e-20, "{}", exact.f_value);

        let blocked = fit(&column_basis(&[0.5f64.sqrt(), 0.5, -0.5]), &x).unwrap();
        assert!((blocked.atomic[0] - 18.0).abs() < 1e-10);

        let start = fit(&column_basis(&[-10.0, 1.0, 1.0]), &x).unwrap();
        assert!(start.f_value <= 10.0);
    }

    #[test]
    fn atomic_value_examples() {
        let x = barrier_example();
        for eps in [0.3, -0.1, 0.7] {
            let u = column_basis(&[(1.0f64 - 2.0 * eps * eps).sqrt(), eps, eps]);
            assert!(atomic_value(&u, &x, 0).unwrap() < 1e-20);
        }
        let hidden = ObservedMatrix::new(DMatrix::from_element(3, 2, 1.0), Mask::from_fn(3, 2, |_, j| j == 0)).unwrap();
        assert_eq!(atomic_value(&column_basis(&[1.0, 2.0, 3.0]), &hidden, 1).unwrap(), 0.0);
        assert!(matches!(
            atomic_value(&column_basis(&[1.0, 2.0, 3.0]), &x, 3),
            Err(SetError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn atomic_value_matches_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_instance(9, 7, 2, 0.5, &mut rng);
        let u = random_basis(9, 2, &mut rng).unwrap();
        let full = fit(&u, &x).unwrap();
        for j in 0..7 {
            let a = atomic_value(&u, &x, j).unwrap();
            assert!((a - full.atomic[j]).abs() <= 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn exact_representation_has_zero_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_basis(8, 3, &mut rng).unwrap();
        let x = u.matrix() * gaussian(3, 6, &mut rng);
        let obs = ObservedMatrix::new(x.clone(), Mask::full(8, 6)).unwrap();
        let f = fit(&u, &obs).unwrap();
        assert!(f.f_value <= 1e-20 * crate::matrix::frobenius_sq(&x));
        assert!(gradient(&f).norm() < 1e-12);
    }

    #[test]
    fn fit_invariants_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let x = random_instance(10, 8, 3, 0.4, &mut rng);
            let u = random_basis(10, 3, &mut rng).unwrap();
            let f = fit(&u, &x).unwrap();
            let sum: f64 = f.atomic.iter().sum();
            assert!((f.f_value - sum).abs() <= 1e-10 * (1.0 + f.f_value));
            assert!((u.matrix().transpose() * &f.residual).norm() < 1e-8);
            for (i, j) in (0..10).flat_map(|i| (0..8).map(move |j| (i, j))) {
                if !x.mask().is_observed(i, j) {
                    assert_eq!(f.residual[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn columns_with_few_observations_use_min_norm() {
        // One observed row per column with r = 2: the restricted basis is
        // 1 × 2 and W is the minimum-norm solution.
        let x = ObservedMatrix::from_entries(3, 2, &[(0, 0, 2.0), (2, 1, -1.0)]).unwrap();
        let u = Basis::from_orthonormal(DMatrix::identity(3, 2)).unwrap();
        let f = fit(&u, &x).unwrap();
        assert!((f.f_value - 1.0).abs() < 1e-14);
        assert!((f.w[(0, 0)] - 2.0).abs() < 1e-14 && f.w[(1, 0)].abs() < 1e-14);
        // Row 2 is outside span(U) restricted to that row: nothing to fit.
        assert!((f.atomic[1] - 1.0).abs() < 1e-14);
        assert_eq!(f.w.column(1).norm(), 0.0);
    }

    #[test]
    fn rotation_invariance_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            let x = random_instance(12, 9, 3, 0.5, &mut rng);
            let u = random_basis(12, 3, &mut rng).unwrap();
            let v = random_basis(3, 3, &mut rng).unwrap();
            let uv = u.rotate(v.matrix()).unwrap();
            let f0 = fit(&u, &x).unwrap();
            let f1 = fit(&uv, &x).unwrap();
            assert!((f0.f_value - f1.f_value).abs() <= 1e-9 * (1.0 + f0.f_value));
            let g0 = gradient(&f0) * v.matrix();
            let g1 = gradient(&f1);
            assert!((&g0 - &g1).norm() <= 1e-9 * (1.0 + g1.norm()));
        }
    }

    #[test]
    fn search_direction_examples() {
        let grad = DMatrix::from_column_slice(3, 1, &[3.0, 3.0, 0.0]) * -2.0;
        let d = search_direction(&grad).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((&d.h - DVector::from_vec(vec![s, s, 0.0])).norm() < 1e-14);
        assert!((d.v[0] + 1.0).abs() < 1e-14);
        assert!(frobenius_inner(&d.descent_matrix(), &grad) < 0.0);

        assert!(matches!(
            search_direction(&DMatrix::zeros(3, 2)),
            Err(SetError::ZeroGradient)
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let g = gaussian(8, 3, &mut rng);
            let d = search_direction(&g).unwrap();
            let inner = frobenius_inner(&d.descent_matrix(), &g);
            assert!((inner + d.top_singular_value).abs() < 1e-10 * d.top_singular_value);
        }
    }

    #[test]
    fn descent_at_solution_is_stationary() {
        let x = barrier_example();
        assert!(matches!(
            descent(&column_basis(&[1.0, 1.0, 1.0]), &x),
            Err(SetError::ZeroGradient)
        ));
    }

    #[test]
    fn descent_direction_decreases_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let x = random_instance(10, 10, 2, 0.5, &mut rng);
            let u = random_basis(10, 2, &mut rng).unwrap();
            let d = descent(&u, &x).unwrap();
            let f0 = d.fit.f_value;
            let decreased = [1e-6, 1e-5, 1e-4]
                .iter()
                .any(|&t| objective(&d.geodesic.eval(t), &x).unwrap() < f0);
            assert!(decreased);
        }
    }
}
