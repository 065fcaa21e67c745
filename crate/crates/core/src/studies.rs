//! Mesh-refinement studies shared by the acceptance suite and the command-line driver.
//!
//! Mesh levels are independent and run in parallel; results come back in the
//! order of the input mesh list.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{SmoothFn, TrigPoly};
use crate::galerkin::Galerkin;
use crate::manufactured::{ExactSolution, ManufacturedProblem, TravelingWaves};
use crate::picard::{iterate_error, run_picard, PairNorm, PicardRun, ResidualProbe};
use crate::quadrature::MAX_POINTS;
use crate::quasiinterp::{QiMask, QiProbe};
use crate::rates::{ConvergenceReport, Level};
use crate::serre::{SerreSolver, SolverConfig};
use crate::spline::SplineSpace;

/// Seed of the manufactured-problem self-check that gates every study.
pub const SELF_CHECK_SEED: u64 = 20_240_601;

fn check_meshes(meshes: &[usize]) -> Result<()> {
    if meshes.is_empty() {
        return Err(Error::InvalidArgument("mesh list is empty".into()));
    }
    if meshes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "mesh list must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Manufactured traveling-wave problem, self-checked before use.
pub fn manufactured(a: f64, b: f64) -> Result<Arc<ManufacturedProblem<TravelingWaves>>> {
    let p = ManufacturedProblem::new(TravelingWaves::new(a, b)?);
    p.self_check(SELF_CHECK_SEED)?;
    Ok(Arc::new(p))
}

/// Test function for accuracy probes: `sin 2πx + 0.3 cos 4πx`.
pub fn probe_function() -> TrigPoly {
    TrigPoly::sin(1, 1.0).plus(TrigPoly::cos(2, 0.3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiRow {
    pub r: usize,
    pub cells: usize,
    pub nu: usize,
    pub kappa: usize,
    pub max_b: f64,
    pub max_beta: f64,
    pub qh_l2_err: f64,
}

/// Superconvergence and accuracy probes of the quasiinterpolant on each mesh.
///
/// `b` uses `w = sin 2πx + 0.3 cos 4πx`; `β` uses the coefficient `f = 2 + cos 2πx`
/// with the same `w`; the `L²` error is that of `Q_h w`.
pub fn qi_probe_study(r: usize, meshes: &[usize], nu: usize, kappa: usize) -> Result<Vec<QiRow>> {
    check_meshes(meshes)?;
    let mask = QiMask::derive(r)?;
    let w = probe_function();
    let f = TrigPoly::cos(1, 1.0).plus_constant(2.0);
    meshes
        .par_iter()
        .map(|&n| {
            let sp = SplineSpace::new(r, n)?;
            let probe = QiProbe::new(&sp, mask.clone())?;
            Ok(QiRow {
                r,
                cells: n,
                nu,
                kappa,
                max_b: probe.superconvergence(&w, nu, kappa)?,
                max_beta: probe.product(&f, &w, nu, kappa)?,
                qh_l2_err: probe.error_norms(&w)?.0,
            })
        })
        .collect()
}

/// `sup` of a function over a fine sample, used to scale random probes.
pub fn sampled_sup(f: &dyn SmoothFn, samples: usize) -> f64 {
    (0..samples)
        .map(|i| f.value(i as f64 / samples as f64).abs())
        .fold(0.0, f64::max)
}

/// Shared numerical settings of the time-dependent studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub r: usize,
    pub t_end: f64,
    /// `dt = dt_scale · h`.
    pub dt_scale: f64,
    pub c0: f64,
}

impl RunSettings {
    fn solver(&self, n: usize, forcing: Option<Arc<ManufacturedProblem<TravelingWaves>>>) -> Result<SerreSolver> {
        let sp = SplineSpace::new(self.r, n)?;
        let mut cfg = SolverConfig::new(self.c0, self.dt_scale / n as f64, self.t_end);
        if let Some(f) = forcing {
            cfg = cfg.with_forcing(f);
        }
        SerreSolver::new(&sp, cfg)
    }
}

/// Errors of a direct solve at the final time against the manufactured truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectLevel {
    pub cells: usize,
    pub eta_l2: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub min_depth: f64,
    pub mass_drift: f64,
    /// Positivity violation that aborted this level.
    pub violation: Option<String>,
}

/// `(‖η_h - η‖, ‖u_h - u‖, ‖u_h - u‖₁)` at time `t` with a high-order rule.
pub fn solution_errors(
    g: &Galerkin,
    eta: &[f64],
    u: &[f64],
    exact: &dyn ExactSolution,
    t: f64,
) -> Result<(f64, f64, f64)> {
    let xs = g.quad_points();
    let err = |c: &[f64], k: usize, f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let v = g.values(c, k)?;
        let d: Vec<f64> = v.iter().zip(xs).map(|(v, &x)| v - f(x)).collect();
        Ok(g.l2_of_values(&d))
    };
    let e = err(eta, 0, &|x| exact.eta(x, t, 0, 0))?;
    let u0 = err(u, 0, &|x| exact.u(x, t, 0, 0))?;
    let u1 = err(u, 1, &|x| exact.u(x, t, 1, 0))?;
    Ok((e, u0, (u0 * u0 + u1 * u1).sqrt()))
}

/// Forced direct solves of the manufactured problem on each mesh.
pub fn converge_direct(a: f64, b: f64, s: RunSettings, meshes: &[usize]) -> Result<(Vec<DirectLevel>, ConvergenceReport)> {
    check_meshes(meshes)?;
    let prob = manufactured(a, b)?;
    let mask = QiMask::derive(s.r)?;
    let levels: Vec<DirectLevel> = meshes
        .par_iter()
        .map(|&n| -> Result<DirectLevel> {
            let solver = s.solver(n, Some(prob.clone()))?;
            let tw = prob.solution;
            let sim = solver.simulate(&mask, |x| tw.eta(x, 0.0, 0, 0), |x| tw.u(x, 0.0, 0, 0))?;
            let mut lv = DirectLevel {
                cells: n,
                eta_l2: f64::NAN,
                u_l2: f64::NAN,
                u_h1: f64::NAN,
                min_depth: sim.min_depth(),
                mass_drift: sim.mass_drift(),
                violation: sim.violation.as_ref().map(|e| e.to_string()),
            };
            if sim.completed() {
                let k = sim.trajectory.len() - 1;
                let g = Galerkin::new(solver.space(), (2 * s.r + 4).min(MAX_POINTS))?;
                let (e, u0, u1) =
                    solution_errors(&g, sim.trajectory.eta(k), sim.trajectory.u(k), &tw, sim.trajectory.time(k))?;
                lv.eta_l2 = e;
                lv.u_l2 = u0;
                lv.u_h1 = u1;
            }
            Ok(lv)
        })
        .collect::<Result<_>>()?;
    let r = s.r as f64;
    let report = ConvergenceReport::new(
        &["eta_l2", "u_l2", "u_h1"],
        levels
            .iter()
            .map(|l| Level {
                cells: l.cells,
                h: 1.0 / l.cells as f64,
                errors: vec![l.eta_l2, l.u_l2, l.u_h1],
            })
            .collect(),
        &[r - 0.4, r - 0.4, r - 1.4],
    );
    Ok((levels, report))
}

/// Iterate errors of a converged Picard run against the manufactured truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardLevel {
    pub cells: usize,
    pub theta: f64,
    pub xi: f64,
    pub theta_t: f64,
    pub xi_t: f64,
    pub iterations: usize,
    pub last_delta: f64,
    pub min_depth: f64,
    pub violation: Option<String>,
}

/// Forced Picard runs of the manufactured problem on `[0, t_end]`.
pub fn converge_picard(
    a: f64,
    b: f64,
    s: RunSettings,
    iters: usize,
    meshes: &[usize],
) -> Result<(Vec<PicardLevel>, ConvergenceReport)> {
    check_meshes(meshes)?;
    let prob = manufactured(a, b)?;
    let mask = QiMask::derive(s.r)?;
    let levels: Vec<PicardLevel> = meshes
        .par_iter()
        .map(|&n| -> Result<PicardLevel> {
            let solver = s.solver(n, Some(prob.clone()))?;
            let tw = prob.solution;
            let init = solver.initial_state(&mask, |x| tw.eta(x, 0.0, 0, 0), |x| tw.u(x, 0.0, 0, 0))?;
            let run = run_picard(&solver, init.eta.coeffs(), init.u.coeffs(), iters)?;
            let mut lv = PicardLevel {
                cells: n,
                theta: f64::NAN,
                xi: f64::NAN,
                theta_t: f64::NAN,
                xi_t: f64::NAN,
                iterations: run.report.rows.len(),
                last_delta: run.report.last_delta().unwrap_or(f64::NAN),
                min_depth: run.report.min_depth(),
                violation: run.report.violation.as_ref().map(|e| e.to_string()),
            };
            if lv.violation.is_none() {
                let norm = PairNorm::new(solver.galerkin())?;
                let e = iterate_error(&run.trajectory, &tw, &mask, &norm)?;
                lv.theta = e.theta;
                lv.xi = e.xi;
                lv.theta_t = e.theta_t;
                lv.xi_t = e.xi_t;
            }
            Ok(lv)
        })
        .collect::<Result<_>>()?;
    let r = s.r as f64;
    let report = ConvergenceReport::new(
        &["theta_plus_xi", "theta_t_plus_xi_t"],
        levels
            .iter()
            .map(|l| Level {
                cells: l.cells,
                h: 1.0 / l.cells as f64,
                errors: vec![l.theta + l.xi, l.theta_t + l.xi_t],
            })
            .collect(),
        &[2.0 * r - 3.5, 2.0 * r - 4.5],
    );
    Ok((levels, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub cells: usize,
    pub t: f64,
    pub psi: f64,
    pub delta: f64,
}

/// Consistency residuals at each sample time; the report fits `max_t` per level.
pub fn residual_study(
    exact: &dyn ExactSolution,
    r: usize,
    meshes: &[usize],
    times: &[f64],
) -> Result<(Vec<ResidualRow>, ConvergenceReport)> {
    check_meshes(meshes)?;
    if times.is_empty() {
        return Err(Error::InvalidArgument("no sample times".into()));
    }
    let mask = QiMask::derive(r)?;
    let per_level: Vec<Vec<ResidualRow>> = meshes
        .par_iter()
        .map(|&n| -> Result<Vec<ResidualRow>> {
            let sp = SplineSpace::new(r, n)?;
            let probe = ResidualProbe::new(&sp, mask.clone())?;
            times
                .iter()
                .map(|&t| {
                    let (psi, delta) = probe.residual(exact, t)?;
                    Ok(ResidualRow { cells: n, t, psi, delta })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let levels = per_level
        .iter()
        .zip(meshes)
        .map(|(rows, &n)| Level {
            cells: n,
            h: 1.0 / n as f64,
            errors: vec![
                rows.iter().map(|r| r.psi).fold(0.0, f64::max),
                rows.iter().map(|r| r.delta).fold(0.0, f64::max),
            ],
        })
        .collect();
    let rf = r as f64;
    let report = ConvergenceReport::new(&["psi_l2", "delta_l2"], levels, &[2.0 * rf - 1.5, 2.0 * rf - 3.5]);
    Ok((per_level.into_iter().flatten().collect(), report))
}

/// Picard run and direct solve from the same initial data, with their discrepancy at the final time.
#[derive(Debug, Clone)]
pub struct PicardComparison {
    pub run: PicardRun,
    /// `(‖η_picard - η_direct‖² + ‖u_picard - u_direct‖₁²)^{1/2}` at the final time, if both completed.
    pub discrepancy: Option<f64>,
    pub direct_min_depth: f64,
}

/// Unforced Picard iteration from `(Q_h η₀, Q_h u₀)` compared with the direct solve.
pub fn picard_vs_direct(
    s: RunSettings,
    cells: usize,
    iters: usize,
    eta0: &(dyn Fn(f64) -> f64 + Sync),
    u0: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<PicardComparison> {
    let solver = s.solver(cells, None)?;
    let mask = QiMask::derive(s.r)?;
    let init = solver.initial_state(&mask, eta0, u0)?;
    let (run, sim) = rayon::join(
        || run_picard(&solver, init.eta.coeffs(), init.u.coeffs(), iters),
        || solver.simulate_from(&init),
    );
    let (run, sim) = (run?, sim?);
    let discrepancy = if run.report.violation.is_none() && sim.completed() {
        let norm = PairNorm::new(solver.galerkin())?;
        let kp = run.trajectory.len() - 1;
        let kd = sim.trajectory.len() - 1;
        let (de, du) = norm.diff(
            run.trajectory.eta(kp),
            sim.trajectory.eta(kd),
            run.trajectory.u(kp),
            sim.trajectory.u(kd),
        );
        Some((de * de + du * du).sqrt())
    } else {
        None
    };
    Ok(PicardComparison {
        run,
        discrepancy,
        direct_min_depth: sim.min_depth(),
    })
}
