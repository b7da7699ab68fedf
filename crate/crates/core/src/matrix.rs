//! Masked-matrix data model and the sampling projections `P_Ω`, `P_Ωj`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SetError};

/// Dense real matrix used for full estimates and intermediates.
pub type DenseMatrix = DMatrix<f64>;

/// Observation pattern Ω as an `m × n` boolean grid.
///
/// Row indices of the observed entries in each column are cached, since
/// every per-column solve walks them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    /// Column-major, `true` = observed.
    bits: Vec<bool>,
    col_rows: Vec<Vec<usize>>,
}

impl Mask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
            col_rows: vec![Vec::new(); cols],
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| true)
    }

    pub fn from_fn(rows: usize, cols: usize, mut observed: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Self::empty(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                if observed(i, j) {
                    mask.bits[j * rows + i] = true;
                    mask.col_rows[j].push(i);
                }
            }
        }
        mask
    }

    /// Builds a mask from 0-based `(row, col)` pairs. Duplicates are errors.
    pub fn from_indices(rows: usize, cols: usize, indices: &[(usize, usize)]) -> Result<Self> {
        let mut bits = vec![false; rows * cols];
        for &(i, j) in indices {
            if i >= rows {
                return Err(SetError::IndexOutOfRange { index: i, len: rows });
            }
            if j >= cols {
                return Err(SetError::IndexOutOfRange { index: j, len: cols });
            }
            let slot = &mut bits[j * rows + i];
            if *slot {
                return Err(SetError::DuplicateEntry { row: i, col: j });
            }
            *slot = true;
        }
        Ok(Self::from_fn(rows, cols, |i, j| bits[j * rows + i]))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.rows + i]
    }

    /// Observed row indices of column `j`, ascending.
    pub fn observed_rows(&self, j: usize) -> &[usize] {
        &self.col_rows[j]
    }

    pub fn count(&self) -> usize {
        self.col_rows.iter().map(Vec::len).sum()
    }

    /// Observed `(row, col)` pairs in column-major order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.col_rows
            .iter()
            .enumerate()
            .flat_map(|(j, rows)| rows.iter().map(move |&i| (i, j)))
    }
}

/// The observed data `(X_Ω, Ω)`: dense values with zeros off the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    values: DenseMatrix,
    mask: Mask,
}

impl ObservedMatrix {
    /// Pairs a full matrix with a mask; entries off the mask are discarded.
    pub fn new(values: DenseMatrix, mask: Mask) -> Result<Self> {
        let values = project_omega(&values, &mask)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SetError::NonFinite);
        }
        if values.nrows() == 0 || values.ncols() == 0 || mask.count() == 0 {
            return Err(SetError::EmptyObservation);
        }
        Ok(Self { values, mask })
    }

    /// Builds from 0-based `(row, col, value)` triplets.
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let indices: Vec<_> = entries.iter().map(|&(i, j, _)| (i, j)).collect();
        let mask = Mask::from_indices(rows, cols, &indices)?;
        let mut values = DMatrix::zeros(rows, cols);
        for &(i, j, v) in entries {
            values[(i, j)] = v;
        }
        Self::new(values, mask)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    /// `X_Ω` with explicit zeros at unobserved positions.
    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.mask.count()
    }

    /// `|Ω| / (m n)`.
    pub fn sampling_rate(&self) -> f64 {
        self.observed_count() as f64 / (self.nrows() * self.ncols()) as f64
    }

    /// `‖X_Ω‖²_F`.
    pub fn norm_sq(&self) -> f64 {
        frobenius_sq(&self.values)
    }

    /// Column `x_Ωj` as an `m`-vector.
    pub fn column(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }
}

/// `P_Ω`: keeps observed entries, zeroes the rest.
pub fn project_omega(x: &DenseMatrix, mask: &Mask) -> Result<DenseMatrix> {
    if x.shape() != mask.shape() {
        return Err(SetError::DimensionMismatch {
            expected: mask.shape(),
            found: x.shape(),
        });
    }
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if mask.is_observed(i, j) {
            x[(i, j)]
        } else {
            0.0
        }
    }))
}

/// `P_Ωj`: restricts an `m`-vector to the observed rows of column `j`.
pub fn project_column(v: &DVector<f64>, mask: &Mask, j: usize) -> Result<DVector<f64>> {
    if j >= mask.ncols() {
        return Err(SetError::IndexOutOfRange {
            index: j,
            len: mask.ncols(),
        });
    }
    if v.len() != mask.nrows() {
        return Err(SetError::DimensionMismatch {
            expected: (mask.nrows(), 1),
            found: (v.len(), 1),
        });
    }
    let mut out = DVector::zeros(v.len());
    for &i in mask.observed_rows(j) {
        out[i] = v[i];
    }
    Ok(out)
}

pub fn frobenius_sq(x: &DenseMatrix) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 3×3 rank-one example with its diagonal hidden.
    fn barrier_mask() -> Mask {
        Mask::from_fn(3, 3, |i, j| i != j)
    }

    #[test]
    fn project_omega_examples() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 1.0, 3.0, 1.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!(project_omega(&x, &Mask::full(3, 3)).unwrap(), x);
        assert_eq!(project_omega(&x, &Mask::empty(3, 3)).unwrap(), DMatrix::zeros(3, 3));
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 3.0, 0.0, 1.0, 3.0, 2.0, 0.0]);
        assert_eq!(project_omega(&x, &barrier_mask()).unwrap(), expected);
    }

    #[test]
    fn project_omega_rejects_shape_mismatch() {
        let x = DMatrix::zeros(2, 3);
        assert!(matches!(
            project_omega(&x, &Mask::full(3, 3)),
            Err(SetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn project_column_examples() {
        let v = DVector::from_element(3, 1.0);
        let mask = barrier_mask();
        assert_eq!(
            project_column(&v, &mask, 0).unwrap(),
            DVector::from_vec(vec![0.0, 1.0, 1.0])
        );
        assert_eq!(project_column(&v, &Mask::full(3, 1), 0).unwrap(), v);
        assert_eq!(project_column(&v, &Mask::empty(3, 1), 0).unwrap(), DVector::zeros(3));
        assert!(matches!(
            project_column(&v, &mask, 3),
            Err(SetError::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_sq(&DMatrix::zeros(2, 2)), 0.0);
        assert_eq!(frobenius_sq(&DMatrix::identity(2, 2)), 2.0);
        assert_eq!(frobenius_sq(&DMatrix::from_row_slice(1, 2, &[3.0, 3.0])), 18.0);
    }

    #[test]
    fn observed_matrix_invariants() {
        let x = DMatrix::from_element(3, 3, 7.0);
        let obs = ObservedMatrix::new(x, barrier_mask()).unwrap();
        assert_eq!(obs.observed_count(), 6);
        for i in 0..3 {
            assert_eq!(obs.values()[(i, i)], 0.0);
        }
        assert!((obs.sampling_rate() - 6.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn observed_matrix_rejects_empty_and_duplicates() {
        assert!(matches!(
            ObservedMatrix::new(DMatrix::zeros(2, 2), Mask::empty(2, 2)),
            Err(SetError::EmptyObservation)
        ));
        assert!(matches!(
            ObservedMatrix::from_entries(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]),
            Err(SetError::DuplicateEntry { row: 0, col: 0 })
        ));
        assert!(matches!(
            ObservedMatrix::from_entries(2, 2, &[(0, 0, f64::NAN)]),
            Err(SetError::NonFinite)
        ));
    }

    #[test]
    fn mask_indices_roundtrip() {
        let mask = barrier_mask();
        let idx: Vec<_> = mask.indices().collect();
        assert_eq!(idx.len(), 6);
        assert_eq!(Mask::from_indices(3, 3, &idx).unwrap(), mask);
    }
}
