//! Numerical self-checks against independent oracles.
//!
//! Each check builds its own random cases, compares the library against a
//! brute-force or textbook computation and reports the worst discrepancy.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bench::{gen_instance, InstanceSpec};
use crate::error::Result;
use crate::extremals::{column_extremals, reduce_column, ReducedColumn};
use crate::grassmann::{random_basis, Basis, Rank1Geodesic};
use crate::linalg::{frobenius_inner, pinv_solve};
use crate::matrix::{Mask, ObservedMatrix};
use crate::objective::{atomic_value, fit, gradient, objective};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error, or the offending value.
    pub worst: f64,
    pub detail: String,
    pub elapsed: Duration,
}

fn outcome(name: &'static str, start: Instant, passed: bool, worst: f64, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        worst,
        detail,
        elapsed: start.elapsed(),
    }
}

/// The 3 × 3 rank-one example whose diagonal is unobserved.
pub fn barrier_example() -> ObservedMatrix {
    let x = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 3.0, 0.0, 1.0, 3.0, 2.0, 0.0]);
    ObservedMatrix::new(x, Mask::from_fn(3, 3, |i, j| i != j)).expect("valid example")
}

/// Its observation file.
pub const BARRIER_EXAMPLE_FILE: &str = "3 3\n2 1 3\n3 1 3\n1 2 2\n3 2 2\n1 3 1\n2 3 1\n";

fn unit_column(entries: &[f64]) -> Basis {
    let v = DVector::from_column_slice(entries).normalize();
    Basis::from_orthonormal(DMatrix::from_columns(&[v])).expect("unit column")
}

fn gaussian(a: usize, b: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(a, b, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random rank-`r` matrix with a Bernoulli(`rate`) mask, redrawn until
/// something is observed.
fn random_problem(m: usize, n: usize, r: usize, rate: f64, rng: &mut ChaCha8Rng) -> ObservedMatrix {
    loop {
        let x = gaussian(m, r, rng) * gaussian(r, n, rng);
        let mask = Mask::from_fn(m, n, |_, _| rng.random::<f64>() < rate);
        if let Ok(obs) = ObservedMatrix::new(x, mask) {
            return obs;
        }
    }
}

/// Random unit `h ⊥ U` and unit `v`.
fn random_direction(u: &Basis, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let g = gaussian(u.nrows(), 1, rng).column(0).into_owned();
    let h = &g - u.matrix() * (u.matrix().transpose() * &g);
    let v = gaussian(u.rank(), 1, rng).column(0).into_owned();
    (h.normalize(), v.normalize())
}

/// Least-squares residual `‖b − A A⁺ b‖²` via the pseudoinverse.
fn pinv_residual_sq(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    (b - a * pinv_solve(a, b)).norm_squared()
}

/// Rows of `a` outside the observed set of column `j` zeroed.
fn restrict_rows(a: &DMatrix<f64>, mask: &Mask, j: usize) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, c| {
        if mask.is_observed(i, j) {
            a[(i, c)]
        } else {
            0.0
        }
    })
}

/// Known objective values on the 3 × 3 example.
pub fn check_barrier_values() -> CheckOutcome {
    let start = Instant::now();
    let x = barrier_example();
    let run = || -> Result<(f64, f64, f64)> {
        let solved = objective(&unit_column(&[1.0, 1.0, 1.0]), &x)?;
        let first = atomic_value(&unit_column(&[0.5f64.sqrt(), 0.5, -0.5]), &x, 0)?;
        let trapped = objective(&unit_column(&[-10.0, 1.0, 1.0]), &x)?;
        Ok((solved, first, trapped))
    };
    match run() {
        Ok((solved, first, trapped)) => {
            let passed = solved <= 1e-20 && (first - 18.0).abs() <= 1e-10 && trapped <= 10.0;
            let worst = solved.max((first - 18.0).abs());
            outcome(
                "barrier example values",
                start,
                passed,
                worst,
                format!("f(solution) = {solved:e}, f_1 = {first}, f(trapped start) = {trapped}"),
            )
        }
        Err(e) => outcome("barrier example values", start, false, f64::NAN, e.to_string()),
    }
}

/// Central differences of `f` along random rank-one geodesics against
/// `⟨∇f, H(0)⟩`.
pub fn check_gradient(instances: usize, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    let run = |rng: &mut ChaCha8Rng, worst: &mut f64| -> Result<()> {
        for _ in 0..instances {
            let spec = InstanceSpec::with_rate(20, 15, 3, 0.3, rng.random());
            let (truth, mask) = gen_instance(&spec)?;
            let x = ObservedMatrix::new(truth, mask)?;
            let u = random_basis(20, 3, rng)?;
            let (h, v) = random_direction(&u, rng);
            let g = Rank1Geodesic::new(&u, &h, &v)?;
            let base = Basis::from_orthonormal(g.rotated_basis().clone())?;
            let analytic = frobenius_inner(&gradient(&fit(&base, &x)?), &g.transported_direction(0.0));
            let fd = (objective(&g.eval(step), &x)? - objective(&g.eval(-step), &x)?) / (2.0 * step);
            let rel = (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
            *worst = worst.max(rel);
        }
        Ok(())
    };
    match run(&mut rng, &mut worst) {
        Ok(()) => outcome(
            "gradient vs central differences",
            start,
            worst <= 1e-5,
            worst,
            format!("{instances} instances, worst relative error {worst:e}"),
        ),
        Err(e) => outcome("gradient vs central differences", start, false, f64::NAN, e.to_string()),
    }
}

/// `f` against the sum of per-column pseudoinverse residuals.
pub fn check_decoupling(cases: usize, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let run = |rng: &mut ChaCha8Rng, worst: &mut f64| -> Result<()> {
        for _ in 0..cases {
            let m = rng.random_range(2..16);
            let n = rng.random_range(1..16);
            let r = rng.random_range(1..=m.min(n).min(4));
            let rate = rng.random_range(0.1..1.0);
            let x = random_problem(m, n, r, rate, rng);
            let u = random_basis(m, rng.random_range(1..=m.min(4)), rng)?;
            let f = objective(&u, &x)?;
            let sum: f64 = (0..n)
                .map(|j| pinv_residual_sq(&restrict_rows(u.matrix(), x.mask(), j), &x.column(j)))
                .sum();
            *worst = worst.max((f - sum).abs() / (1.0 + f));
        }
        Ok(())
    };
    match run(&mut rng, &mut worst) {
        Ok(()) => outcome(
            "decoupling into column terms",
            start,
            worst <= 1e-10,
            worst,
            format!("{cases} cases, worst |f − Σf_j|/(1+f) = {worst:e}"),
        ),
        Err(e) => outcome("decoupling into column terms", start, false, f64::NAN, e.to_string()),
    }
}

/// A random reduced column with `q` observed rows.
fn random_reduced(q: usize, rng: &mut ChaCha8Rng) -> ReducedColumn {
    let mut col = || gaussian(q, 1, rng).column(0).into_owned();
    ReducedColumn {
        x_r: col(),
        u_r: col(),
        h_r: col(),
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Closed-form extremals against a dense grid, plus periodicity.
pub fn check_extremals(cases: usize, grid: usize, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = PI / grid as f64;
    let mut worst_offset: f64 = 0.0;
    let mut worst_period: f64 = 0.0;
    let mut tested = 0;
    while tested < cases {
        let rc = random_reduced(rng.random_range(2..8), &mut rng);
        let e = column_extremals(&rc);
        if e.constant {
            continue;
        }
        tested += 1;
        let values: Vec<f64> = (0..grid).map(|i| rc.value(i as f64 * dt)).collect();
        let arg = |better: fn(f64, f64) -> bool| {
            let mut best = 0;
            for i in 1..grid {
                if better(values[i], values[best]) {
                    best = i;
                }
            }
            best as f64 * dt
        };
        let grid_min = arg(|a, b| a < b);
        let grid_max = arg(|a, b| a > b);
        worst_offset = worst_offset
            .max(circular_distance(e.t_min, grid_min) / dt)
            .max(circular_distance(e.t_max, grid_max) / dt);
        for k in 0..10 {
            let t = k as f64 * 0.37 - 1.0;
            let (a, b) = (rc.value(t), rc.value(t + PI));
            worst_period = worst_period.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    outcome(
        "extremals vs grid oracle",
        start,
        worst_offset <= 1.0 && worst_period <= 1e-10,
        worst_offset,
        format!("{cases} cases, worst offset {worst_offset:.3} grid steps, periodicity error {worst_period:e}"),
    )
}

/// Joint projection of a column on `U(t)_Ω` against the reduced
/// one-dimensional form.
pub fn check_reduction(shapes: usize, t_values: usize, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let run = |rng: &mut ChaCha8Rng, worst: &mut f64| -> Result<()> {
        for _ in 0..shapes {
            let m = rng.random_range(3..20);
            let n = rng.random_range(1..6);
            let r = rng.random_range(1..=m.min(5) - 1);
            let x = random_problem(m, n, r, rng.random_range(0.3..1.0), rng);
            let u = random_basis(m, r, rng)?;
            let (h, v) = random_direction(&u, rng);
            let g = Rank1Geodesic::new(&u, &h, &v)?;
            for j in 0..n {
                let xj = x.column(j);
                let rc = reduce_column(&xj, &g, &x, j)?;
                for k in 0..t_values {
                    let t = PI * k as f64 / t_values as f64 + 0.05;
                    let joint = pinv_residual_sq(&restrict_rows(&g.point(t), x.mask(), j), &xj).sqrt();
                    let reduced = rc.value(t).sqrt();
                    let scale = xj.norm().max(f64::MIN_POSITIVE);
                    *worst = worst.max((joint - reduced).abs() / scale);
                }
            }
        }
        Ok(())
    };
    match run(&mut rng, &mut worst) {
        Ok(()) => outcome(
            "joint projection vs reduced form",
            start,
            worst <= 1e-10,
            worst,
            format!("{shapes} shapes × {t_values} angles, worst relative gap {worst:e}"),
        ),
        Err(e) => outcome(
            "joint projection vs reduced form",
            start,
            false,
            f64::NAN,
            e.to_string(),
        ),
    }
}

/// Every check at its standard size.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_barrier_values(),
        check_gradient(50, seed),
        check_decoupling(100, seed.wrapping_add(1)),
        check_extremals(100, 10_000, seed.wrapping_add(2)),
        check_reduction(100, 20, seed.wrapping_add(3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        assert!(check_barrier_values().passed);
        for c in [
            check_gradient(5, 1),
            check_decoupling(10, 2),
            check_extremals(10, 2000, 3),
            check_reduction(10, 5, 4),
        ] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn circular_distance_wraps() {
        assert!((circular_distance(0.01, PI - 0.01) - 0.02).abs() < 1e-12);
        assert!((circular_distance(1.0, 1.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn example_file_matches_matrix() {
        let parsed = crate::io::parse_observed(BARRIER_EXAMPLE_FILE).unwrap();
        assert_eq!(parsed, barrier_example());
    }
}
