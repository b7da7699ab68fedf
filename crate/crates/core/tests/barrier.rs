//! The 3 × 3 example started at (1/√102)[−10, 1, 1]: evolution alone is
//! held back by the maximizer of the first column term, a transfer step
//! crosses it.

use nalgebra::{DMatrix, DVector};

use set_core::checks::barrier_example;
use set_core::evolution::{evolve, LineSearchConfig};
use set_core::objective::{descent, objective};
use set_core::transfer::{detect_barriers, transfer, TransferConfig};
use set_core::Basis;

fn start() -> Basis {
    let v = DVector::from_vec(vec![-10.0, 1.0, 1.0]).normalize();
    Basis::from_orthonormal(DMatrix::from_columns(&[v])).unwrap()
}

#[test]
fn evolution_alone_is_trapped() {
    let x = barrier_example();
    let cfg = LineSearchConfig::default();
    let mut u = start();
    let mut f = objective(&u, &x).unwrap();
    for _ in 0..200 {
        let e = evolve(&u, &x, &cfg).unwrap();
        assert!(e.f_after <= f);
        f = e.f_after;
        u = e.basis;
    }
    assert!(f > 5.0, "f = {f}");
}

#[test]
fn start_admits_a_barrier() {
    let x = barrier_example();
    let d = descent(&start(), &x).unwrap();
    let report = detect_barriers(&d.geodesic, &x).unwrap();
    assert_eq!(report.barrier_formers, vec![0]);
    assert!(!report.admitting.is_empty());
    let k = report.k_star.unwrap();
    let j = report.j_star.unwrap();
    assert!(report.t_tran > 0.0 && report.t_tran == report.extremals[k].t_max);
    assert!(report.t_tran < report.extremals[j].t_min);
}

#[test]
fn transfer_then_evolution_converges() {
    let x = barrier_example();
    let cfg = LineSearchConfig::default();
    let f0 = objective(&start(), &x).unwrap();
    let mut u = start();
    let mut transfers = 0;
    let mut trajectory = Vec::new();
    for _ in 0..40 {
        let t = transfer(&u, &x, &TransferConfig::default()).unwrap();
        if t.transferred() {
            transfers += 1;
        }
        let e = evolve(&t.basis, &x, &cfg).unwrap();
        trajectory.push(e.f_after);
        u = e.basis;
    }
    assert_eq!(transfers, 1);
    assert!(trajectory.last().unwrap() <= &1e-12);
    // Crossing the barrier costs objective value even after the evolution
    // step that follows it.
    assert!(trajectory[0] > f0);
    for w in trajectory[1..].windows(2) {
        assert!(w[1] <= w[0]);
    }
}
