//! Subspace evolution: a line search along the rank-one descent geodesic.
//!
//! Step A grows a probe geometrically from `ε π` until the objective rises
//! (or the probe passes `π`, one full period of the span). Step B refines
//! the minimizer inside `[t_b / c₂², t_b]` with a fixed number of
//! golden-section updates and keeps the best of the four tracked points.

use crate::error::{Result, SetError};
use crate::extremals::{reduce_all, ReducedColumn};
use crate::grassmann::{Basis, Rank1Geodesic};
use crate::matrix::ObservedMatrix;
use crate::objective::{descent, fit, Fit};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// First probe is at `epsilon · π`.
    pub epsilon: f64,
    /// Golden ratio `(√5 − 1)/2`.
    pub c1: f64,
    /// Growth factor `c1 / (1 − c1)`.
    pub c2: f64,
    /// Number of golden-section updates.
    pub iterations: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        let c1 = (5f64.sqrt() - 1.0) / 2.0;
        Self {
            epsilon: 1e-9,
            c1,
            c2: c1 / (1.0 - c1),
            iterations: 10,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.epsilon < 1.0
            && self.c1 > 0.0
            && self.c1 < 1.0
            && self.c2 > 1.0
            && self.iterations >= 1;
        if ok {
            Ok(())
        } else {
            Err(SetError::InvalidConfig(format!("line search: {self:?}")))
        }
    }
}

/// The objective restricted to a rank-one geodesic, evaluated through the
/// reduced column forms so each probe costs `O(m n)` rather than a refit.
#[derive(Debug, Clone)]
pub struct GeodesicLine {
    columns: Vec<ReducedColumn>,
}

impl GeodesicLine {
    pub fn new(g: &Rank1Geodesic, x: &ObservedMatrix) -> Self {
        Self {
            columns: reduce_all(g, x),
        }
    }

    pub fn columns(&self) -> &[ReducedColumn] {
        &self.columns
    }

    /// `f(U(t))`.
    pub fn value(&self, t: f64) -> f64 {
        self.columns.iter().map(|c| c.value(t)).sum()
    }
}

/// Memoizes probes of a scalar function and counts distinct evaluations.
struct Probe<F> {
    f: F,
    seen: Vec<(f64, f64)>,
}

impl<F: FnMut(f64) -> f64> Probe<F> {
    fn new(f: F) -> Self {
        Self { f, seen: Vec::new() }
    }

    fn at(&mut self, t: f64) -> f64 {
        if let Some(&(_, v)) = self.seen.iter().find(|(s, _)| *s == t) {
            return v;
        }
        let v = (self.f)(t);
        self.seen.push((t, v));
        v
    }
}

fn bracket_probe<F: FnMut(f64) -> f64>(probe: &mut Probe<F>, cfg: &LineSearchConfig) -> f64 {
    let mut t_prev = cfg.epsilon * PI;
    loop {
        let t_next = cfg.c2 * t_prev;
        if t_next > PI {
            return PI;
        }
        if probe.at(t_next) > probe.at(t_prev) {
            return t_next;
        }
        t_prev = t_next;
    }
}

fn golden_probe<F: FnMut(f64) -> f64>(probe: &mut Probe<F>, t_bracket: f64, cfg: &LineSearchConfig) -> f64 {
    let (c1, c2) = (cfg.c1, cfg.c2);
    let mut t1 = t_bracket / (c2 * c2);
    let mut t2 = t_bracket / c2;
    let mut t4 = t_bracket;
    let mut t3 = t1 + c1 * (t4 - t1);
    for _ in 0..cfg.iterations {
        let (f1, f2, f3) = (probe.at(t1), probe.at(t2), probe.at(t3));
        if f1 > f2 && f2 > f3 {
            t1 = t2;
            t2 = t3;
            t3 = t1 + c1 * (t4 - t1);
        } else {
            t4 = t3;
            t3 = t2;
            t2 = t1 + (1.0 - c1) * (t4 - t1);
        }
    }
    // Points stay ordered t1 < t2 < t3 < t4, so a strict `<` breaks ties
    // towards the smallest t.
    let mut best = (t1, probe.at(t1));
    for t in [t2, t3, t4] {
        let f = probe.at(t);
        if f < best.1 {
            best = (t, f);
        }
    }
    best.0
}

/// Step A on an arbitrary scalar function of `t`.
pub fn bracket_with(f: impl FnMut(f64) -> f64, cfg: &LineSearchConfig) -> f64 {
    bracket_probe(&mut Probe::new(f), cfg)
}

/// Step B on an arbitrary scalar function of `t`.
pub fn golden_section_with(f: impl FnMut(f64) -> f64, t_bracket: f64, cfg: &LineSearchConfig) -> f64 {
    golden_probe(&mut Probe::new(f), t_bracket, cfg)
}

/// Step A along a geodesic: an upper end `t_b ∈ (0, π]` for the search.
pub fn bracket(g: &Rank1Geodesic, x: &ObservedMatrix, cfg: &LineSearchConfig) -> f64 {
    let line = GeodesicLine::new(g, x);
    bracket_with(|t| line.value(t), cfg)
}

/// Step B along a geodesic.
pub fn golden_section(g: &Rank1Geodesic, x: &ObservedMatrix, t_bracket: f64, cfg: &LineSearchConfig) -> f64 {
    let line = GeodesicLine::new(g, x);
    golden_section_with(|t| line.value(t), t_bracket, cfg)
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Accepted step; `0` when no probed point improved on the start.
    pub t_star: f64,
    pub basis: Basis,
    /// Fit at `basis`.
    pub fit: Fit,
    pub f_before: f64,
    pub f_after: f64,
    /// Distinct objective evaluations along the geodesic.
    pub evaluations: usize,
}

/// One evolution step from `u`.
///
/// The step is rejected (`t_star = 0`, basis unchanged) if the refit at
/// the chosen point is worse than the start, so `f_after ≤ f_before`.
pub fn evolve(u: &Basis, x: &ObservedMatrix, cfg: &LineSearchConfig) -> Result<EvolutionResult> {
    let d = descent(u, x)?;
    let line = GeodesicLine::new(&d.geodesic, x);
    let mut probe = Probe::new(|t| line.value(t));
    let t_bracket = bracket_probe(&mut probe, cfg);
    let t_star = golden_probe(&mut probe, t_bracket, cfg);
    let evaluations = probe.seen.len();

    let f_before = d.fit.f_value;
    let basis = d.geodesic.eval(t_star);
    let new_fit = fit(&basis, x)?;
    if new_fit.f_value > f_before {
        return Ok(EvolutionResult {
            t_star: 0.0,
            basis: u.clone(),
            fit: d.fit,
            f_before,
            f_after: f_before,
            evaluations,
        });
    }
    Ok(EvolutionResult {
        t_star,
        basis,
        f_after: new_fit.f_value,
        fit: new_fit,
        f_before,
        evaluations,
    })
}
