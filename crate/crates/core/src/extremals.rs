//! Per-column analysis along a rank-one geodesic.
//!
//! Along `U(t) = [u₁ cos t + h sin t, u₂, …, u_r]` the `j`-th column term is
//!
//! ```text
//! f_j(t) = ‖x_Ωj − P(x_Ωj, [u₁(t)_Ω, u₂_Ω, …, u_r_Ω])‖²
//! ```
//!
//! Projecting `x_Ωj`, `u₁_Ω` and `h_Ω` off the fixed trailing columns
//! reduces this to a single moving direction:
//!
//! ```text
//! f_j(t) = ‖x_r − P(x_r, u_r cos t + h_r sin t)‖²
//! ```
//!
//! which is either constant or `π`-periodic with exactly one minimizer and
//! one maximizer per period. The minimizer is where the moving direction
//! lines up with the in-plane part of `x_r`; the maximizer is where it is
//! orthogonal to `x_r`.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Result, SetError};
use crate::grassmann::Rank1Geodesic;
use crate::linalg::{gram_schmidt, remove_components, thin_svd};
use crate::matrix::{project_column, ObservedMatrix};

/// Relative tolerance of both constancy tests.
pub const CONSTANT_RTOL: f64 = 1e-10;

/// Angle of the direction `(x₂, x₁)` folded into `[0, π)`:
///
/// * `π/2` if `x₂ = 0`,
/// * `arctan(x₁/x₂)` if the ratio is non-negative,
/// * `π − arctan(−x₁/x₂)` otherwise.
pub fn atan_pi(x1: f64, x2: f64) -> f64 {
    if x2 == 0.0 {
        return FRAC_PI_2;
    }
    let ratio = x1 / x2;
    if ratio >= 0.0 {
        // `+ 0.0` folds a negative zero into `+0`.
        ratio.atan() + 0.0
    } else {
        PI - (-ratio).atan()
    }
}

/// A column reduced against the trailing basis columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedColumn {
    /// `x_Ω` minus its projection on `span(u₂_Ω, …, u_r_Ω)`.
    pub x_r: DVector<f64>,
    /// Same for `u₁_Ω`.
    pub u_r: DVector<f64>,
    /// Same for `h_Ω`.
    pub h_r: DVector<f64>,
}

impl ReducedColumn {
    /// `u_r cos t + h_r sin t`.
    pub fn moving(&self, t: f64) -> DVector<f64> {
        let (s, c) = t.sin_cos();
        &self.u_r * c + &self.h_r * s
    }

    /// `f(t) = ‖x_r − P(x_r, u_r cos t + h_r sin t)‖²`.
    pub fn value(&self, t: f64) -> f64 {
        let u = self.moving(t);
        let q = u.norm_squared();
        if q == 0.0 {
            return self.x_r.norm_squared();
        }
        let p = self.x_r.dot(&u);
        let mut res = self.x_r.clone();
        res.axpy(-p / q, &u, 1.0);
        res.norm_squared()
    }
}

/// Reduces column `j` of the observations along the geodesic `g`.
pub fn reduce_column(x_omega: &DVector<f64>, g: &Rank1Geodesic, x: &ObservedMatrix, j: usize) -> Result<ReducedColumn> {
    let mask = x.mask();
    if x_omega.len() != g.nrows() {
        return Err(SetError::DimensionMismatch {
            expected: (g.nrows(), 1),
            found: (x_omega.len(), 1),
        });
    }
    let basis = g.rotated_basis();
    let mut x_r = project_column(x_omega, mask, j)?;
    let mut u_r = project_column(&basis.column(0).into_owned(), mask, j)?;
    let mut h_r = project_column(g.direction(), mask, j)?;

    if basis.ncols() > 1 {
        let trailing: Vec<DVector<f64>> = (1..basis.ncols())
            .map(|k| project_column(&basis.column(k).into_owned(), mask, j))
            .collect::<Result<_>>()?;
        let q = gram_schmidt(&trailing).q;
        remove_components(&mut x_r, &q);
        remove_components(&mut u_r, &q);
        remove_components(&mut h_r, &q);
    }
    Ok(ReducedColumn { x_r, u_r, h_r })
}

/// Reduces every column of `x` along `g`.
pub fn reduce_all(g: &Rank1Geodesic, x: &ObservedMatrix) -> Vec<ReducedColumn> {
    (0..x.ncols())
        .map(|j| reduce_column(&x.column(j), g, x, j).expect("shapes checked by construction"))
        .collect()
}

/// Minimizer and maximizer of one column term over a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnExtremals {
    pub constant: bool,
    pub t_min: f64,
    pub t_max: f64,
    pub f_min: f64,
    pub f_max: f64,
}

/// Closed-form extremals of a reduced column term.
///
/// The term is constant when `u_r` and `h_r` are linearly dependent or
/// when `x_r` is orthogonal to both; both extremals are then reported at
/// `t = 0`. Otherwise `t_min` is the alignment angle `atan_pi(c₂, c₁)` with
/// `c = [u_r, h_r]⁺ x_r` and `t_max` is the orthogonality angle
/// `atan_pi(x_rᵀu_r, −x_rᵀh_r)`.
pub fn column_extremals(rc: &ReducedColumn) -> ColumnExtremals {
    let constant = |rc: &ReducedColumn| {
        let f = rc.value(0.0);
        ColumnExtremals {
            constant: true,
            t_min: 0.0,
            t_max: 0.0,
            f_min: f,
            f_max: f,
        }
    };

    let x_norm = rc.x_r.norm();
    if x_norm == 0.0 {
        return constant(rc);
    }
    let pair = DMatrix::from_columns(&[rc.u_r.clone(), rc.h_r.clone()]);
    let svd = thin_svd(&pair);
    if svd.s[1] <= CONSTANT_RTOL * svd.s[0].max(1.0) {
        return constant(rc);
    }
    let xu = rc.x_r.dot(&rc.u_r);
    let xh = rc.x_r.dot(&rc.h_r);
    let scale = CONSTANT_RTOL * x_norm * rc.u_r.norm().max(rc.h_r.norm());
    if xu.abs() <= scale && xh.abs() <= scale {
        return constant(rc);
    }

    // c = [u_r, h_r]⁺ x_r; the pair has full rank here.
    let ut_x = svd.u.transpose() * &rc.x_r;
    let c = svd.v_t.transpose() * DVector::from_fn(2, |k, _| ut_x[k] / svd.s[k]);

    let t_min = atan_pi(c[1], c[0]);
    let t_max = atan_pi(xu, -xh);
    ColumnExtremals {
        constant: false,
        t_min,
        t_max,
        f_min: rc.value(t_min),
        f_max: rc.value(t_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{random_basis, Basis};
    use crate::matrix::Mask;
    use crate::objective::atomic_value;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::FRAC_PI_4;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn reduced(x: &[f64], u: &[f64], h: &[f64]) -> ReducedColumn {
        ReducedColumn {
            x_r: vec(x),
            u_r: vec(u),
            h_r: vec(h),
        }
    }

    fn grid_extremes(rc: &ReducedColumn, points: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let mut worst = (f64::NEG_INFINITY, 0.0);
        for k in 0..points {
            let t = PI * k as f64 / points as f64;
            let f = rc.value(t);
            if f < best.0 {
                best = (f, t);
            }
            if f > worst.0 {
                worst = (f, t);
            }
        }
        (best.1, worst.1)
    }

    #[test]
    fn atan_pi_branches() {
        assert_eq!(atan_pi(1.0, 0.0), FRAC_PI_2);
        assert_eq!(atan_pi(0.0, 1.0), 0.0);
        assert!((atan_pi(-1.0, 1.0) - 3.0 * FRAC_PI_4).abs() < 1e-15);
        assert_eq!(atan_pi(0.0, 0.0), FRAC_PI_2);
        assert!(atan_pi(-0.0, 1.0).is_sign_positive());
        let t = atan_pi(2.0, 1.0);
        assert!((t - 2f64.atan()).abs() < 1e-15);
    }

    #[test]
    fn in_plane_vector() {
        let e = column_extremals(&reduced(&[1.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]));
        assert!(!e.constant);
        assert!((e.t_min - FRAC_PI_4).abs() < 1e-15 && e.f_min.abs() < 1e-15);
        assert!((e.t_max - 3.0 * FRAC_PI_4).abs() < 1e-15 && (e.f_max - 2.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_plane_vector_matches_grid_oracle() {
        // Frozen from a 10⁵-point grid over [0, π): argmin 0 (f = 1),
        // argmax π/2 (f = 5).
        let rc = reduced(&[2.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        let e = column_extremals(&rc);
        assert!(e.t_min.abs() < 1e-15 && (e.f_min - 1.0).abs() < 1e-14);
        assert!((e.t_max - FRAC_PI_2).abs() < 1e-15 && (e.f_max - 5.0).abs() < 1e-14);
        let (argmin, argmax) = grid_extremes(&rc, 100_000);
        assert!(argmin.abs() < 1e-4 && (argmax - FRAC_PI_2).abs() < 1e-4);
    }

    #[test]
    fn constant_cases() {
        let dependent = column_extremals(&reduced(&[1.0, 2.0], &[1.0, 1.0], &[2.0, 2.0]));
        assert!(dependent.constant);
        assert_eq!((dependent.t_min, dependent.t_max), (0.0, 0.0));
        assert_eq!(dependent.f_min, dependent.f_max);

        let orthogonal = column_extremals(&reduced(&[0.0, 0.0, 3.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]));
        assert!(orthogonal.constant);
        assert!((orthogonal.f_max - 9.0).abs() < 1e-14);

        let zero = column_extremals(&reduced(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]));
        assert!(zero.constant && zero.f_min == 0.0);
    }

    #[test]
    fn scale_invariant_constancy() {
        let rc = reduced(&[1.0, 2.0, 0.5], &[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]);
        let small = ReducedColumn {
            x_r: &rc.x_r * 1e-6,
            u_r: &rc.u_r * 1e-3,
            h_r: &rc.h_r * 1e-3,
        };
        let (a, b) = (column_extremals(&rc), column_extremals(&small));
        assert!(!a.constant && !b.constant);
        assert!((a.t_min - b.t_min).abs() < 1e-12 && (a.t_max - b.t_max).abs() < 1e-12);
    }

    fn random_geodesic(m: usize, r: usize, rng: &mut ChaCha8Rng) -> Rank1Geodesic {
        let u = random_basis(m, r, rng).unwrap();
        let g = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = (&g - u.matrix() * (u.matrix().transpose() * &g)).normalize();
        let v = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        Rank1Geodesic::new(&u, &h, &v).unwrap()
    }

    #[test]
    fn rank_one_reduction_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random_geodesic(5, 1, &mut rng);
        let x = ObservedMatrix::new(DMatrix::from_element(5, 1, 2.0), Mask::full(5, 1)).unwrap();
        let rc = reduce_column(&x.column(0), &g, &x, 0).unwrap();
        assert_eq!(rc.x_r, x.column(0));
        assert_eq!(rc.u_r, g.rotated_basis().column(0).into_owned());
        assert_eq!(&rc.h_r, g.direction());
    }

    #[test]
    fn trailing_columns_spanning_observed_rows_kill_x() {
        // r = 3 with two observed rows: u₂, u₃ restricted span the
        // observed coordinate plane, so nothing of x survives.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = random_geodesic(6, 3, &mut rng);
        let x = ObservedMatrix::from_entries(6, 1, &[(1, 0, 3.0), (4, 0, -2.0)]).unwrap();
        let rc = reduce_column(&x.column(0), &g, &x, 0).unwrap();
        assert!(rc.x_r.norm() < 1e-12);
        assert!(column_extremals(&rc).constant);
    }

    #[test]
    fn reduction_matches_joint_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = random_geodesic(8, 3, &mut rng);
        let observed: Vec<(usize, usize, f64)> = [0usize, 1, 3, 4, 6, 7]
            .iter()
            .map(|&i| (i, 0, rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let x = ObservedMatrix::from_entries(8, 1, &observed).unwrap();
        let rc = reduce_column(&x.column(0), &g, &x, 0).unwrap();
        for k in 0..20 {
            let t = 0.157 * k as f64;
            let joint = atomic_value(&Basis::from_orthonormal(g.point(t)).unwrap(), &x, 0).unwrap();
            let reduced = rc.value(t);
            assert!(
                (joint - reduced).abs() <= 1e-10 * joint.max(1.0),
                "t={t}: {joint} vs {reduced}"
            );
        }
        let q = gram_schmidt(&[
            project_column(&g.rotated_basis().column(1).into_owned(), x.mask(), 0).unwrap(),
            project_column(&g.rotated_basis().column(2).into_owned(), x.mask(), 0).unwrap(),
        ])
        .q;
        for v in [&rc.x_r, &rc.u_r, &rc.h_r] {
            for qi in &q {
                assert!(qi.dot(v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_matches_grid_and_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut checked = 0;
        while checked < 100 {
            let m = rng.random_range(2..7);
            let gen = |rng: &mut ChaCha8Rng| DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let rc = ReducedColumn {
                x_r: gen(&mut rng),
                u_r: gen(&mut rng),
                h_r: gen(&mut rng),
            };
            let e = column_extremals(&rc);
            if e.constant {
                continue;
            }
            checked += 1;
            assert!(e.t_min != e.t_max);
            let points = 10_000;
            let step = PI / points as f64;
            let (argmin, argmax) = grid_extremes(&rc, points);
            let circ = |a: f64, b: f64| {
                let d = (a - b).rem_euclid(PI);
                d.min(PI - d)
            };
            assert!(circ(argmin, e.t_min) <= step, "{argmin} vs {}", e.t_min);
            assert!(circ(argmax, e.t_max) <= step, "{argmax} vs {}", e.t_max);
            for k in 0..points {
                let f = rc.value(k as f64 * step);
                assert!(f >= e.f_min - 1e-10 * (1.0 + f) && f <= e.f_max + 1e-10 * (1.0 + f));
            }
            assert!(e.f_max <= rc.x_r.norm_squared() * (1.0 + 1e-12));
            for _ in 0..5 {
                let t: f64 = rng.random_range(-5.0..5.0);
                assert!((rc.value(t) - rc.value(t + PI)).abs() <= 1e-10 * (1.0 + rc.value(t)));
            }
        }
    }
}
