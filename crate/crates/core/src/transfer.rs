//! Barrier detection and subspace transfer.
//!
//! Along the descent geodesic every non-constant column term has one
//! minimizer `t_min,j` and one maximizer `t_max,j` per period. The maximizer
//! of column `k` *forms a barrier* when
//!
//! 1. some column `j` that decreases at `t = 0` has
//!    `0 < t_max,k < t_min,j < t_max,j < π`, i.e. the bump of `k` sits in
//!    front of a minimum that `j` is heading for, and
//! 2. the objective is still descending at `t_max,k`: the gradient there
//!    has negative inner product with the transported direction `H(t)`.
//!
//! Column `j` *admits* a barrier if some barrier-forming `k` has
//! `t_max,k < t_min,j < t_max,j`. The transfer jumps to the last barrier
//! before the nearest admitting column's minimizer.

use std::f64::consts::PI;

use crate::error::{Result, SetError};
use crate::extremals::{column_extremals, reduce_all, ColumnExtremals, ReducedColumn};
use crate::grassmann::{Basis, Rank1Geodesic};
use crate::linalg::frobenius_inner;
use crate::matrix::ObservedMatrix;
use crate::objective::{descent, fit, gradient};

/// Step of the one-sided difference that decides whether a column term
/// decreases at `t = 0`.
pub const CONSISTENCY_STEP: f64 = 1e-7;

/// Differences smaller than this are treated as "not decreasing".
pub const CONSISTENCY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransferConfig {
    /// Added to `t_max,k*` to get the landing point. Zero lands exactly on
    /// the barrier.
    pub offset: f64,
}

/// `⟨∇f(U(t)), H(t)⟩`; negative means `f` still decreases along the
/// geodesic at `t`.
pub fn consistency_sign(g: &Rank1Geodesic, x: &ObservedMatrix, t: f64) -> Result<f64> {
    let basis = g.eval(t);
    let grad = gradient(&fit(&basis, x)?);
    Ok(frobenius_inner(&grad, &g.transported_direction(t)))
}

/// Whether a reduced column term decreases when leaving `t = 0`.
pub fn decreases_at_start(rc: &ReducedColumn) -> bool {
    let diff = rc.value(CONSISTENCY_STEP) - rc.value(0.0);
    diff < 0.0 && diff.abs() >= CONSISTENCY_FLOOR
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub extremals: Vec<ColumnExtremals>,
    /// Column terms decreasing at `t = 0`.
    pub consistent: Vec<bool>,
    /// `⟨∇f, H⟩` at `t_max,k`, for every `k` passing condition 1.
    pub consistency_signs: Vec<Option<f64>>,
    /// Columns whose maximizer forms a barrier, ascending.
    pub barrier_formers: Vec<usize>,
    /// Columns admitting a barrier, ascending.
    pub admitting: Vec<usize>,
    pub j_star: Option<usize>,
    pub k_star: Option<usize>,
    /// `t_max,k*`, or `0` when no column admits a barrier.
    pub t_tran: f64,
}

/// Condition 1 for column `k`.
pub fn blocks_some_consistent_column(k: usize, extremals: &[ColumnExtremals], consistent: &[bool]) -> bool {
    let ek = &extremals[k];
    if ek.constant || ek.t_max <= 0.0 {
        return false;
    }
    extremals
        .iter()
        .zip(consistent)
        .any(|(ej, &c)| c && !ej.constant && ek.t_max < ej.t_min && ej.t_min < ej.t_max && ej.t_max < PI)
}

/// Builds the report from the per-column analysis. `sign_at` is queried
/// only for columns that pass condition 1.
pub fn assemble_report(
    extremals: Vec<ColumnExtremals>,
    consistent: Vec<bool>,
    mut sign_at: impl FnMut(f64) -> Result<f64>,
) -> Result<BarrierReport> {
    let n = extremals.len();
    let mut consistency_signs = vec![None; n];
    let mut barrier_formers = Vec::new();
    for k in 0..n {
        if blocks_some_consistent_column(k, &extremals, &consistent) {
            let s = sign_at(extremals[k].t_max)?;
            consistency_signs[k] = Some(s);
            if s < 0.0 {
                barrier_formers.push(k);
            }
        }
    }
    let admitting: Vec<usize> = (0..n)
        .filter(|&j| {
            let ej = &extremals[j];
            !ej.constant
                && barrier_formers
                    .iter()
                    .any(|&k| extremals[k].t_max < ej.t_min && ej.t_min < ej.t_max)
        })
        .collect();

    let mut report = BarrierReport {
        extremals,
        consistent,
        consistency_signs,
        barrier_formers,
        admitting,
        j_star: None,
        k_star: None,
        t_tran: 0.0,
    };
    if !report.admitting.is_empty() {
        let sel = select_transfer(&report)?;
        report.j_star = Some(sel.j_star);
        report.k_star = Some(sel.k_star);
        report.t_tran = sel.t_tran;
    }
    Ok(report)
}

/// Barrier analysis of the geodesic `g`.
pub fn detect_barriers(g: &Rank1Geodesic, x: &ObservedMatrix) -> Result<BarrierReport> {
    let columns = reduce_all(g, x);
    let extremals = columns.iter().map(column_extremals).collect();
    let consistent = columns.iter().map(decreases_at_start).collect();
    assemble_report(extremals, consistent, |t| consistency_sign(g, x, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub j_star: usize,
    pub k_star: usize,
    pub t_tran: f64,
}

/// `j*` = admitting column with the smallest `t_min`; `k*` = barrier
/// former with the largest `t_max` still below `t_min,j*`. Ties go to the
/// smallest index.
pub fn select_transfer(report: &BarrierReport) -> Result<Selection> {
    let ext = &report.extremals;
    let mut j_star: Option<usize> = None;
    for &j in &report.admitting {
        if j_star.is_none_or(|b| ext[j].t_min < ext[b].t_min) {
            j_star = Some(j);
        }
    }
    let j_star = j_star.ok_or(SetError::EmptyAdmittingSet)?;
    let limit = ext[j_star].t_min;
    let mut k_star: Option<usize> = None;
    for &k in &report.barrier_formers {
        if ext[k].t_max < limit && k_star.is_none_or(|b| ext[k].t_max > ext[b].t_max) {
            k_star = Some(k);
        }
    }
    let k_star = k_star.ok_or(SetError::EmptyAdmittingSet)?;
    Ok(Selection {
        j_star,
        k_star,
        t_tran: ext[k_star].t_max,
    })
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    /// `t_max,k*`, or `0` when nothing was transferred.
    pub t_tran: f64,
    pub basis: Basis,
    /// `None` at stationary points, where no direction exists.
    pub report: Option<BarrierReport>,
}

impl TransferOutcome {
    pub fn transferred(&self) -> bool {
        self.t_tran > 0.0
    }
}

/// One transfer step: move `u` across the nearest barrier on its descent
/// geodesic, or leave it unchanged when there is none.
pub fn transfer(u: &Basis, x: &ObservedMatrix, cfg: &TransferConfig) -> Result<TransferOutcome> {
    let d = match descent(u, x) {
        Ok(d) => d,
        Err(SetError::ZeroGradient) => {
            return Ok(TransferOutcome {
                t_tran: 0.0,
                basis: u.clone(),
                report: None,
            })
        }
        Err(e) => return Err(e),
    };
    let report = detect_barriers(&d.geodesic, x)?;
    let basis = if report.admitting.is_empty() {
        u.clone()
    } else {
        d.geodesic.eval(report.t_tran + cfg.offset)
    };
    Ok(TransferOutcome {
        t_tran: report.t_tran,
        basis,
        report: Some(report),
    })
}
