use std::f64::consts::PI;

use serre_galerkin::picard::{PairNorm, PicardStatus};
use serre_galerkin::{
    consistency_residual, iterate_error, picard_iterate, run_picard, Error, ExactSolution, QiMask,
    SerreSolver, SolverConfig, SplineSpace, Still, Trajectory, TravelingWaves,
};

fn solver(n: usize, t_star: f64) -> SerreSolver {
    let sp = SplineSpace::new(3, n).unwrap();
    SerreSolver::new(&sp, SolverConfig::new(0.9, 0.1 / n as f64, t_star)).unwrap()
}

fn smooth_init(s: &SerreSolver, amp_u: f64) -> (Vec<f64>, Vec<f64>) {
    let mask = QiMask::derive(3).unwrap();
    let st = s
        .initial_state(
            &mask,
            |x| 1.0 + 0.1 * (2.0 * PI * x).sin(),
            |x| amp_u * (2.0 * PI * x).sin(),
        )
        .unwrap();
    (st.eta.into_coeffs(), st.u.into_coeffs())
}

#[test]
fn steady_trajectory_is_a_fixed_point() {
    let s = solver(16, 0.1);
    let grid = s.config().grid().unwrap();
    let eta = vec![1.4; 16];
    let u = vec![0.0; 16];
    let prev = Trajectory::constant(s.space(), grid, &eta, &u).unwrap();
    let next = picard_iterate(&s, &prev, &eta, &u).unwrap();
    assert!(next.is_complete());
    for k in 0..next.len() {
        for (a, b) in next.eta(k).iter().zip(prev.eta(k)) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(next.u(k).iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn every_iterate_starts_from_the_same_data() {
    let s = solver(16, 0.1);
    let (eta, u) = smooth_init(&s, 0.1);
    let grid = s.config().grid().unwrap();
    let mut prev = Trajectory::constant(s.space(), grid, &eta, &u).unwrap();
    for _ in 0..3 {
        let next = picard_iterate(&s, &prev, &eta, &u).unwrap();
        assert_eq!(next.eta(0), eta.as_slice());
        assert_eq!(next.u(0), u.as_slice());
        prev = next;
    }
}

#[test]
fn first_iterate_keeps_positive_depth() {
    let s = solver(32, 0.1);
    let (eta, u) = smooth_init(&s, 0.1);
    let grid = s.config().grid().unwrap();
    let prev = Trajectory::constant(s.space(), grid, &eta, &u).unwrap();
    let first = picard_iterate(&s, &prev, &eta, &u).unwrap();
    for k in 0..first.len() {
        assert!(s.min_depth(first.eta(k)).unwrap().0 > 0.0);
    }
}

#[test]
fn map_is_affine_in_initial_data() {
    let s = solver(16, 0.1);
    let (eta, u) = smooth_init(&s, 0.1);
    let grid = s.config().grid().unwrap();
    let prev = Trajectory::constant(s.space(), grid, &eta, &u).unwrap();
    let prev = picard_iterate(&s, &prev, &eta, &u).unwrap();

    let mask = QiMask::derive(3).unwrap();
    let other_eta = mask.interpolate(s.space(), |x| 1.0 + 0.05 * (4.0 * PI * x).cos()).unwrap();
    let other_u = mask.interpolate(s.space(), |x| -0.2 * (2.0 * PI * x).cos()).unwrap();
    let avg = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect() };

    let ya = picard_iterate(&s, &prev, &eta, &u).unwrap();
    let yb = picard_iterate(&s, &prev, other_eta.coeffs(), other_u.coeffs()).unwrap();
    let ym = picard_iterate(&s, &prev, &avg(&eta, other_eta.coeffs()), &avg(&u, other_u.coeffs())).unwrap();
    for k in 0..ym.len() {
        let e = avg(ya.eta(k), yb.eta(k));
        let v = avg(ya.u(k), yb.u(k));
        for (a, b) in ym.eta(k).iter().zip(&e).chain(ym.u(k).iter().zip(&v)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn incomplete_or_foreign_previous_iterate_is_rejected() {
    let s = solver(16, 0.1);
    let (eta, u) = smooth_init(&s, 0.1);
    let grid = s.config().grid().unwrap();
    let partial = Trajectory::new(s.space(), grid);
    assert!(picard_iterate(&s, &partial, &eta, &u).is_err());
    let other = SplineSpace::new(3, 20).unwrap();
    let foreign = Trajectory::constant(&other, grid, &[1.0; 20], &[0.0; 20]).unwrap();
    assert!(picard_iterate(&s, &foreign, &eta, &u).is_err());
    assert!(matches!(run_picard(&s, &eta, &u, 1), Err(Error::InvalidArgument(_))));
}

#[test]
fn steady_data_converges_immediately() {
    let s = solver(16, 0.1);
    let run = run_picard(&s, &[1.2; 16], &[0.0; 16], 5).unwrap();
    let rows = &run.report.rows;
    assert_eq!(rows.len(), 1);
    assert!(rows[0].sup_delta < 1e-15);
    assert_eq!(rows[0].alpha, None);
    assert_eq!(rows[0].status, PicardStatus::Converged);
    assert!(run.report.converged);
}

#[test]
fn smooth_scenario_contracts() {
    let s = solver(32, 0.1);
    let (eta, u) = smooth_init(&s, 0.05);
    let run = run_picard(&s, &eta, &u, 6).unwrap();
    let rep = &run.report;
    assert!(rep.violation.is_none());
    assert!(!rep.no_contraction);
    for n in 2..=5 {
        let a = rep.alpha(n).expect("alpha defined");
        assert!(a < 1.0, "alpha_{n} = {a}");
    }
    let d: Vec<f64> = rep.rows.iter().map(|r| r.sup_delta).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(rep.min_depth() >= 0.9 / 8.0);

    // shrinking t* does not increase the contraction factors
    let short = run_picard(&solver(32, 0.05), &eta, &u, 6).unwrap();
    for n in 2..=5 {
        if let (Some(a), Some(b)) = (short.report.alpha(n), rep.alpha(n)) {
            assert!(a <= b, "n={n}: {a} > {b}");
        }
    }
}

#[test]
fn long_horizon_is_reported_not_fatal() {
    let s = solver(16, 2.0);
    let (eta, u) = smooth_init(&s, 0.1);
    let run = run_picard(&s, &eta, &u, 6).unwrap();
    assert!(!run.report.rows.is_empty() || run.report.violation.is_some());
    for r in &run.report.rows {
        if r.status == PicardStatus::NoContraction {
            assert!(r.alpha.unwrap() >= 1.0);
        }
    }
}

#[test]
fn iterate_error_of_own_states_is_small() {
    let s = solver(32, 0.1);
    let (eta, u) = smooth_init(&s, 0.1);
    let run = run_picard(&s, &eta, &u, 4).unwrap();
    let tr = run.trajectory.clone();

    /// Reads the trajectory's splines back as an "exact" solution.
    struct Replay(Trajectory);
    impl ExactSolution for Replay {
        fn eta(&self, x: f64, t: f64, kx: usize, kt: usize) -> f64 {
            let k = (t / self.0.grid().dt).round() as usize;
            let c = if kt == 0 { self.0.eta(k) } else { self.0.eta_t(k) };
            self.0.space().from_coeffs(c.to_vec()).unwrap().eval(x, kx).unwrap()
        }
        fn u(&self, x: f64, t: f64, kx: usize, kt: usize) -> f64 {
            let k = (t / self.0.grid().dt).round() as usize;
            let c = if kt == 0 { self.0.u(k) } else { self.0.u_t(k) };
            self.0.space().from_coeffs(c.to_vec()).unwrap().eval(x, kx).unwrap()
        }
    }
    let norm = PairNorm::new(s.galerkin()).unwrap();
    let e = iterate_error(&tr, &Replay(tr.clone()), &QiMask::derive(3).unwrap(), &norm).unwrap();
    // Q_h of a spline differs from the spline by the quasiinterpolation error only
    assert!(e.theta.is_finite() && e.xi.is_finite());
    assert!(e.theta < 1e-3 && e.xi < 1e-2, "{e:?}");
}

#[test]
fn residual_of_still_water_vanishes() {
    let sp = SplineSpace::new(3, 16).unwrap();
    let mask = QiMask::derive(3).unwrap();
    let (psi, delta) = consistency_residual(&sp, &mask, &Still { depth: 1.3 }, 0.2).unwrap();
    assert!(psi <= 1e-12 && delta <= 1e-12);
}

#[test]
fn residual_slopes() {
    let tw = TravelingWaves::new(0.1, 0.1).unwrap();
    let mask = QiMask::derive(3).unwrap();
    let meshes = [16, 32, 64, 128];
    let (mut psi, mut delta) = (Vec::new(), Vec::new());
    for &n in &meshes {
        let sp = SplineSpace::new(3, n).unwrap();
        let (p, d) = consistency_residual(&sp, &mask, &tw, 0.1).unwrap();
        psi.push(p);
        delta.push(d);
    }
    let hs: Vec<f64> = meshes.iter().map(|&n| 1.0 / n as f64).collect();
    let sp = serre_galerkin::fit_rate(&hs, &psi).unwrap().slope;
    let sd = serre_galerkin::fit_rate(&hs, &delta).unwrap().slope;
    assert!(sp >= 4.5, "psi slope {sp}");
    assert!(sd >= 2.5, "delta slope {sd}");
}
