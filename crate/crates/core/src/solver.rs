//! The outer loop: transfer, evolve, test, repeat.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SetError};
use crate::evolution::{evolve, LineSearchConfig};
use crate::grassmann::{random_basis, Basis};
use crate::matrix::{frobenius_sq, project_omega, DenseMatrix, ObservedMatrix};
use crate::objective::{fit, Fit};
use crate::transfer::{transfer, TransferConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    /// Stop once `f ≤ epsilon_e · ‖X_Ω‖²`.
    pub epsilon_e: f64,
    pub line_search: LineSearchConfig,
    pub max_outer_iters: usize,
    /// Give up after this many consecutive iterations without meaningful
    /// progress and without a transfer.
    pub stall_window: usize,
    /// Relative decrease of `f` below which an iteration counts as stalled.
    pub stall_rel_decrease: f64,
    pub transfer_enabled: bool,
    /// Seeds the random initial subspace.
    pub seed: u64,
    pub transfer_offset: f64,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            epsilon_e: 1e-6,
            line_search: LineSearchConfig::default(),
            max_outer_iters: 1000,
            stall_window: 50,
            stall_rel_decrease: 1e-12,
            transfer_enabled: true,
            seed: 0,
            transfer_offset: 0.0,
        }
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let max = m.min(n);
        if self.rank == 0 || self.rank > max {
            return Err(SetError::InvalidRank { rank: self.rank, max });
        }
        if !(self.epsilon_e > 0.0 && self.epsilon_e.is_finite()) {
            return Err(SetError::InvalidConfig(format!(
                "epsilon_e must be positive, got {}",
                self.epsilon_e
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(SetError::InvalidConfig("max_outer_iters must be at least 1".into()));
        }
        if self.stall_window == 0 {
            return Err(SetError::InvalidConfig("stall_window must be at least 1".into()));
        }
        if !self.transfer_offset.is_finite() {
            return Err(SetError::InvalidConfig("transfer_offset must be finite".into()));
        }
        self.line_search.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    Stalled,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    pub transfers_performed: usize,
    /// `f` at the random start.
    pub initial_f: f64,
    /// Post-evolution `f`, one entry per iteration.
    pub f_trajectory: Vec<f64>,
    /// `f` of the returned estimate (the best seen).
    pub final_f: f64,
    /// `‖X_Ω‖²`.
    pub observed_norm_sq: f64,
    /// Iterations whose recorded `f` exceeded the previous one by more
    /// than `1e-10` relative. Only a transfer can cause this.
    pub trajectory_increases: usize,
    pub elapsed: Duration,
}

impl SolverReport {
    pub fn relative_residual(&self) -> f64 {
        if self.observed_norm_sq == 0.0 {
            0.0
        } else {
            self.final_f / self.observed_norm_sq
        }
    }
}

const INCREASE_RTOL: f64 = 1e-10;

/// `‖X_Ω − P_Ω(X̂)‖² / ‖X_Ω‖²`.
pub fn residual_relative(x_hat: &DenseMatrix, x: &ObservedMatrix) -> Result<f64> {
    let norm = x.norm_sq();
    if norm == 0.0 {
        return Err(SetError::ZeroObservedNorm);
    }
    let projected = project_omega(x_hat, x.mask())?;
    Ok(frobenius_sq(&(x.values() - projected)) / norm)
}

struct Best {
    basis: Basis,
    fit: Fit,
}

/// Completes `x` to a rank-`cfg.rank` matrix agreeing with its observed
/// entries, starting from a random subspace drawn from `cfg.seed`.
pub fn set_complete(x: &ObservedMatrix, cfg: &SolverConfig) -> Result<(DenseMatrix, SolverReport)> {
    let start = Instant::now();
    let (m, n) = x.shape();
    cfg.validate(m, n)?;
    let norm_sq = x.norm_sq();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = random_basis(m, cfg.rank, &mut rng)?;
    let initial = fit(&u, x)?;
    let tol = cfg.epsilon_e * norm_sq;
    let mut report = SolverReport {
        status: SolverStatus::MaxIters,
        iterations: 0,
        transfers_performed: 0,
        initial_f: initial.f_value,
        f_trajectory: Vec::new(),
        final_f: initial.f_value,
        observed_norm_sq: norm_sq,
        trajectory_increases: 0,
        elapsed: Duration::ZERO,
    };
    let mut best = Best {
        basis: u.clone(),
        fit: initial,
    };

    let finish = |best: Best, mut report: SolverReport, status| {
        report.status = status;
        report.final_f = best.fit.f_value;
        report.elapsed = start.elapsed();
        (best.fit.estimate(&best.basis), report)
    };

    if norm_sq == 0.0 || best.fit.f_value <= tol {
        return Ok(finish(best, report, SolverStatus::Converged));
    }

    let transfer_cfg = TransferConfig {
        offset: cfg.transfer_offset,
    };
    let mut prev_f = best.fit.f_value;
    let mut quiet = 0usize;
    for iter in 1..=cfg.max_outer_iters {
        report.iterations = iter;
        let mut transferred = false;
        if cfg.transfer_enabled {
            let out = transfer(&u, x, &transfer_cfg)?;
            if out.transferred() {
                u = out.basis;
                transferred = true;
                report.transfers_performed += 1;
            }
        }
        let (basis, f_fit, stationary) = match evolve(&u, x, &cfg.line_search) {
            Ok(ev) => (ev.basis, ev.fit, false),
            Err(SetError::ZeroGradient) => {
                let f_fit = fit(&u, x)?;
                (u.clone(), f_fit, true)
            }
            Err(e) => return Err(e),
        };
        let f = f_fit.f_value;
        u = basis;
        report.f_trajectory.push(f);
        if f > prev_f * (1.0 + INCREASE_RTOL) {
            report.trajectory_increases += 1;
        }
        if f < best.fit.f_value {
            best = Best {
                basis: u.clone(),
                fit: f_fit,
            };
        }
        if f <= tol {
            return Ok(finish(best, report, SolverStatus::Converged));
        }
        // Stationary and transfer found nothing: the next iteration would
        // repeat this one exactly.
        if stationary && !transferred {
            return Ok(finish(best, report, SolverStatus::Stalled));
        }

        let rel_decrease = (prev_f - f) / prev_f;
        if transferred || rel_decrease >= cfg.stall_rel_decrease {
            quiet = 0;
        } else {
            quiet += 1;
        }
        prev_f = f;
        if quiet >= cfg.stall_window {
            return Ok(finish(best, report, SolverStatus::Stalled));
        }
    }
    Ok(finish(best, report, SolverStatus::MaxIters))
}
