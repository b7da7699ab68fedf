//! Random instances, sampling-rate sweeps and the transfer ablation.
//!
//! An instance is `X = U_X S_X V_Xᵀ` with `U_X`, `V_X` uniformly random
//! orthonormal bases and `S_X` an `r × r` standard Gaussian matrix. The
//! mask is a uniformly random subset of `k` entries. Every trial derives
//! its seeds from the master seed, the rate index and the trial index, so
//! a sweep is reproducible regardless of how trials are scheduled.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Result, SetError};
use crate::grassmann::random_basis;
use crate::matrix::{DenseMatrix, Mask, ObservedMatrix};
use crate::solver::{residual_relative, set_complete, SolverConfig, SolverStatus};

pub const CSV_HEADER: &str = "rate,trials,successes,mean_iters,mean_transfers,mean_runtime_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    /// Number of observed entries.
    pub k: usize,
    pub seed: u64,
}

impl InstanceSpec {
    /// Spec with `k = round(rate · m · n)`, at least one entry.
    pub fn with_rate(m: usize, n: usize, r: usize, rate: f64, seed: u64) -> Self {
        let k = ((rate * (m * n) as f64).round() as usize).clamp(1, (m * n).max(1));
        Self { m, n, r, k, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { m, n, r, k, .. } = *self;
        if m == 0 || n == 0 {
            return Err(SetError::InvalidConfig(format!("empty shape {m}x{n}")));
        }
        if r == 0 || r > m.min(n) {
            return Err(SetError::InvalidRank { rank: r, max: m.min(n) });
        }
        if r * (m + n - r) > m * n {
            return Err(SetError::InvalidConfig(format!(
                "rank {r} has more degrees of freedom than {m}x{n}"
            )));
        }
        if k == 0 || k > m * n {
            return Err(SetError::InvalidConfig(format!("k = {k} outside 1..={}", m * n)));
        }
        Ok(())
    }

    pub fn sampling_rate(&self) -> f64 {
        self.k as f64 / (self.m * self.n) as f64
    }
}

/// Draws the full matrix and the mask for `spec`.
pub fn gen_instance(spec: &InstanceSpec) -> Result<(DenseMatrix, Mask)> {
    spec.validate()?;
    let InstanceSpec { m, n, r, k, seed } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_basis(m, r, &mut rng)?;
    let v = random_basis(n, r, &mut rng)?;
    let s = DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = u.matrix() * s * v.matrix().transpose();
    let picks: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, m * n, k)
        .into_iter()
        .map(|idx| (idx % m, idx / m))
        .collect();
    let mask = Mask::from_indices(m, n, &picks)?;
    Ok((x, mask))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Instance = 1,
    Solver = 2,
}

/// Seed for one (rate, trial, purpose) cell of a sweep.
pub fn derive_seed(master: u64, rate_index: usize, trial: usize, purpose: SeedPurpose) -> u64 {
    [rate_index as u64, trial as u64, purpose as u64]
        .iter()
        .fold(splitmix64(master), |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub rate_index: usize,
    pub trial: usize,
    pub status: SolverStatus,
    /// Converged and the residual re-check agrees.
    pub success: bool,
    pub iterations: usize,
    pub transfers: usize,
    pub relative_residual: f64,
    /// `‖X̂ − X‖ / ‖X‖` against the generating matrix; diagnostic only.
    pub recovery_error: f64,
    pub f_trajectory: Vec<f64>,
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate: f64,
    pub trials: usize,
    pub successes: usize,
    pub mean_iterations: f64,
    pub mean_transfers: f64,
    pub mean_runtime: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Every trial, ordered by rate then trial index.
    pub trials: Vec<TrialOutcome>,
    /// Trials reported Converged whose residual re-check failed.
    pub contract_violations: usize,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.4},{:.4},{:.3}",
                row.rate,
                row.trials,
                row.successes,
                row.mean_iterations,
                row.mean_transfers,
                row.mean_runtime.as_secs_f64() * 1e3
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Success/failure per trial, in sweep order.
    pub fn pattern(&self) -> Vec<bool> {
        self.trials.iter().map(|t| t.success).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub rates: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; `0` means available parallelism.
    pub jobs: usize,
    /// Solver settings; `rank` and `seed` are overridden per trial.
    pub solver: SolverConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(SetError::InvalidConfig("no sampling rates".into()));
        }
        for (i, &rate) in self.rates.iter().enumerate() {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(SetError::InvalidConfig(format!("sampling rate {rate} outside (0, 1]")));
            }
            if self.rates[..i].contains(&rate) {
                return Err(SetError::InvalidConfig(format!("duplicate sampling rate {rate}")));
            }
        }
        if self.trials == 0 {
            return Err(SetError::InvalidConfig("trials must be at least 1".into()));
        }
        InstanceSpec::with_rate(self.m, self.n, self.r, 1.0, 0).validate()?;
        self.solver_config(0).validate(self.m, self.n)
    }

    fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            rank: self.r,
            seed,
            ..self.solver
        }
    }
}

fn run_trial(cfg: &SweepConfig, rate_index: usize, trial: usize) -> Result<TrialOutcome> {
    let rate = cfg.rates[rate_index];
    let spec = InstanceSpec::with_rate(
        cfg.m,
        cfg.n,
        cfg.r,
        rate,
        derive_seed(cfg.master_seed, rate_index, trial, SeedPurpose::Instance),
    );
    let (truth, mask) = gen_instance(&spec)?;
    let x = ObservedMatrix::new(truth.clone(), mask)?;
    let solver = cfg.solver_config(derive_seed(cfg.master_seed, rate_index, trial, SeedPurpose::Solver));
    let (x_hat, report) = set_complete(&x, &solver)?;
    let relative_residual = residual_relative(&x_hat, &x).unwrap_or(0.0);
    let converged = report.status == SolverStatus::Converged;
    Ok(TrialOutcome {
        rate_index,
        trial,
        status: report.status,
        success: converged && relative_residual <= solver.epsilon_e,
        iterations: report.iterations,
        transfers: report.transfers_performed,
        relative_residual,
        recovery_error: (&x_hat - &truth).norm() / truth.norm(),
        f_trajectory: report.f_trajectory,
        runtime: report.elapsed,
    })
}

fn aggregate(cfg: &SweepConfig, trials: Vec<TrialOutcome>) -> SweepResult {
    let rows = cfg
        .rates
        .iter()
        .enumerate()
        .map(|(idx, &rate)| {
            let cell: Vec<&TrialOutcome> = trials.iter().filter(|t| t.rate_index == idx).collect();
            let count = cell.len() as f64;
            SweepRow {
                rate,
                trials: cell.len(),
                successes: cell.iter().filter(|t| t.success).count(),
                mean_iterations: cell.iter().map(|t| t.iterations as f64).sum::<f64>() / count,
                mean_transfers: cell.iter().map(|t| t.transfers as f64).sum::<f64>() / count,
                mean_runtime: cell.iter().map(|t| t.runtime).sum::<Duration>() / cell.len() as u32,
            }
        })
        .collect();
    let contract_violations = trials
        .iter()
        .filter(|t| t.status == SolverStatus::Converged && !t.success)
        .count();
    SweepResult {
        rows,
        trials,
        contract_violations,
    }
}

/// Runs `trials` solves per sampling rate on a pool of `cfg.jobs` threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = (0..cfg.rates.len())
        .flat_map(|r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| SetError::InvalidConfig(format!("thread pool: {e}")))?;
    let trials = pool.install(|| {
        cells
            .par_iter()
            .map(|&(r, t)| run_trial(cfg, r, t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(aggregate(cfg, trials))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub with_transfer: SweepResult,
    pub without_transfer: SweepResult,
}

impl AblationResult {
    pub fn successes(&self) -> (usize, usize) {
        let count = |s: &SweepResult| s.rows.iter().map(|r| r.successes).sum();
        (count(&self.with_transfer), count(&self.without_transfer))
    }
}

/// The same sweep with transfer on and off; instances and initial
/// subspaces are shared between the two arms.
pub fn run_ablation(cfg: &SweepConfig) -> Result<AblationResult> {
    let arm = |enabled| {
        let mut c = cfg.clone();
        c.solver.transfer_enabled = enabled;
        run_sweep(&c)
    };
    Ok(AblationResult {
        with_transfer: arm(true)?,
        without_transfer: arm(false)?,
    })
}
