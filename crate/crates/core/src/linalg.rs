//! Small dense kernels shared by the fit, the geodesics and the extremal
//! analysis. Everything here works on `nalgebra` dynamic matrices; the SVD
//! itself is computed by `faer`, whose bidiagonal solver stays accurate on
//! clustered singular values where the `nalgebra` one does not.

use nalgebra::{DMatrix, DVector};

/// Relative tolerance under which a Gram-Schmidt remainder counts as
/// linearly dependent on the vectors already accepted.
pub const DEPENDENCE_RTOL: f64 = 1e-12;

/// Thin singular value decomposition `a = u · diag(s) · v_t` with the
/// singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    let mat = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let (u, s, v_t) = match mat.thin_svd() {
        Ok(svd) => {
            let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
            (
                DMatrix::from_fn(rows, k, |i, j| fu[(i, j)]),
                DVector::from_fn(k, |i, _| fs[i]),
                DMatrix::from_fn(k, cols, |i, j| fv[(j, i)]),
            )
        }
        Err(_) => {
            let svd = a.clone().svd(true, true);
            let u = svd.u.expect("left singular vectors requested");
            let v_t = svd.v_t.expect("right singular vectors requested");
            (u, svd.singular_values, v_t)
        }
    };

    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps the decomposition deterministic on ties.
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    ThinSvd {
        u: DMatrix::from_fn(rows, k, |r, c| u[(r, order[c])]),
        s: DVector::from_fn(k, |i, _| s[order[i]]),
        v_t: DMatrix::from_fn(k, cols, |r, c| v_t[(order[r], c)]),
    }
}

/// Cut-off below which singular values are treated as zero by the
/// pseudoinverse, matching the usual `max(m, n) · eps · σ_max` rule.
pub fn pinv_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Minimum-norm least-squares solution `a⁺ b`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DVector::zeros(cols);
    }
    let svd = thin_svd(a);
    let cutoff = pinv_cutoff(rows, cols, svd.s[0]);
    let mut coeffs = DVector::zeros(cols);
    for k in 0..svd.s.len() {
        let sigma = svd.s[k];
        if sigma <= cutoff || sigma == 0.0 {
            break;
        }
        let proj = svd.u.column(k).dot(b) / sigma;
        coeffs += svd.v_t.row(k).transpose() * proj;
    }
    coeffs
}

/// Removes from `x` its components along the orthonormal vectors `q`.
/// Two classical passes ("twice is enough") keep the result orthogonal to
/// working precision.
pub fn remove_components(x: &mut DVector<f64>, q: &[DVector<f64>]) {
    for _ in 0..2 {
        for qi in q {
            let c = qi.dot(x);
            x.axpy(-c, qi, 1.0);
        }
    }
}

/// Result of a rank-revealing Gram-Schmidt pass over a list of columns.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    /// Orthonormal basis of the span of the accepted columns.
    pub q: Vec<DVector<f64>>,
    /// Upper-triangular factor; only meaningful when `full_rank` holds.
    pub r: DMatrix<f64>,
    pub full_rank: bool,
}

/// Orthonormalizes `cols` in order, dropping any column whose remainder is
/// below [`DEPENDENCE_RTOL`] times the largest input norm.
pub fn gram_schmidt(cols: &[DVector<f64>]) -> GramSchmidt {
    let k = cols.len();
    let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut r = DMatrix::zeros(k, k);
    let mut full_rank = scale > 0.0;
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                r[(i, j)] += c;
                v.axpy(-c, qi, 1.0);
            }
        }
        let norm = v.norm();
        if scale > 0.0 && norm > DEPENDENCE_RTOL * scale {
            r[(q.len(), j)] = norm;
            q.push(v / norm);
        } else {
            full_rank = false;
        }
    }
    GramSchmidt { q, r, full_rank }
}

/// Orthogonal projection of `x` onto `span(a)`, i.e. `a a⁺ x`.
pub fn project_onto_span(x: &DVector<f64>, a: &DMatrix<f64>) -> DVector<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DVector::zeros(x.len());
    }
    a * pinv_solve(a, x)
}

/// Trace inner product `⟨a, b⟩ = trace(aᵀ b)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Column-wise copy of a matrix into owned vectors.
pub fn columns(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    a.column_iter().map(|c| c.into_owned()).collect()
}
