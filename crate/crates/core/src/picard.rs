//! Picard iteration for the semidiscrete system.
//!
//! Iterate `n + 1` solves the linear nonautonomous system obtained by freezing the
//! coefficients at iterate `n`:
//!
//! ```text
//! M η̇ = -load(E u_x + U η_x) + load(f)
//! A(E) u̇ = -load(E η_x + E U u_x) - ⅓ load'(E³(U u_xx - U_x u_x)) + load(g)
//! ```
//!
//! with `(E, U)` the previous iterate, evaluated at RK stage times by cubic
//! interpolation of its node records. Every iterate starts from the same initial
//! coefficients.

use crate::banded::{BandedCyclicMatrix, CyclicLu};
use crate::error::{Error, Result};
use crate::galerkin::{Galerkin, DISPERSION};
use crate::manufactured::ExactSolution;
use crate::quadrature::MAX_POINTS;
use crate::quasiinterp::QiMask;
use crate::serre::{rk4, SerreSolver};
use crate::spline::SplineSpace;
use crate::trajectory::Trajectory;

/// Deltas below this count as converged.
pub const CONVERGED_DELTA: f64 = 1e-12;

/// Contraction factors are only formed when the previous delta exceeds this.
pub const ALPHA_MIN_DELTA: f64 = 10.0 * CONVERGED_DELTA;

/// Coefficients frozen at one stage time.
struct Frozen {
    t: f64,
    e: Vec<f64>,
    e3: Vec<f64>,
    u: Vec<f64>,
    ux: Vec<f64>,
    a: CyclicLu,
    forcing: Option<(Vec<f64>, Vec<f64>)>,
}

fn freeze(solver: &SerreSolver, prev: &Trajectory, pos: f64) -> Result<Frozen> {
    let g = solver.galerkin();
    let t = prev.grid().t0 + pos * prev.grid().dt;
    let (ec, uc) = prev.interpolate(pos)?;
    let e = g.values(&ec, 0)?;
    solver.check_depth(t, &ec, &e)?;
    let a = solver.assemble_a_values(&e)?.factor()?;
    Ok(Frozen {
        t,
        e3: e.iter().map(|v| v * v * v).collect(),
        u: g.values(&uc, 0)?,
        ux: g.values(&uc, 1)?,
        e,
        a,
        forcing: solver.forcing_values(t),
    })
}

fn linear_rhs(g: &Galerkin, fz: &Frozen, eta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ex = g.values(eta, 1)?;
    let vx = g.values(u, 1)?;
    let vxx = g.values(u, 2)?;
    let n = ex.len();
    let mut mass_src: Vec<f64> = (0..n).map(|p| -(fz.e[p] * vx[p] + fz.u[p] * ex[p])).collect();
    let mut mom_src: Vec<f64> = (0..n).map(|p| -fz.e[p] * (ex[p] + fz.u[p] * vx[p])).collect();
    if let Some((f, gg)) = &fz.forcing {
        mass_src.iter_mut().zip(f).for_each(|(a, b)| *a += b);
        mom_src.iter_mut().zip(gg).for_each(|(a, b)| *a += b);
    }
    let disp: Vec<f64> = (0..n)
        .map(|p| fz.e3[p] * (fz.u[p] * vxx[p] - fz.ux[p] * vx[p]))
        .collect();
    let eta_dot = g.mass_solve(&g.load_values(&mass_src, 0)?)?;
    let mut rhs_u = g.load_values(&mom_src, 0)?;
    let grad = g.load_values(&disp, 1)?;
    rhs_u.iter_mut().zip(&grad).for_each(|(a, b)| *a -= DISPERSION * b);
    Ok((eta_dot, fz.a.solve(&rhs_u)?))
}

/// Integrates the linear system frozen at `prev` from the initial coefficients.
pub fn picard_iterate(
    solver: &SerreSolver,
    prev: &Trajectory,
    init_eta: &[f64],
    init_u: &[f64],
) -> Result<Trajectory> {
    if !prev.is_complete() {
        return Err(Error::InvalidArgument(
            "previous iterate must cover the whole time grid".into(),
        ));
    }
    if prev.space() != solver.space() {
        return Err(Error::InvalidArgument(
            "previous iterate lives in a different spline space".into(),
        ));
    }
    let g = solver.galerkin();
    let grid = prev.grid();
    let mut out = Trajectory::new(solver.space(), grid);
    let mut eta = init_eta.to_vec();
    let mut u = init_u.to_vec();
    let mut at_node = freeze(solver, prev, 0.0)?;
    for k in 0..=grid.steps {
        let (de, du) = linear_rhs(g, &at_node, &eta, &u)?;
        out.push(eta.clone(), u.clone(), de, du)?;
        if k == grid.steps {
            break;
        }
        let mid = freeze(solver, prev, k as f64 + 0.5)?;
        let next = freeze(solver, prev, (k + 1) as f64)?;
        let t = at_node.t;
        let (e, v) = rk4(t, &eta, &u, grid.dt, |ts, e, v| {
            let fz = if ts == t {
                &at_node
            } else if ts == t + 0.5 * grid.dt {
                &mid
            } else {
                &next
            };
            linear_rhs(g, fz, e, v)
        })?;
        eta = e;
        u = v;
        at_node = next;
    }
    Ok(out)
}

/// Outcome label of one Picard row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardStatus {
    /// No contraction factor (first iterate, or previous delta too small).
    Undefined,
    Contracting,
    NoContraction,
    Converged,
}

impl std::fmt::Display for PicardStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PicardStatus::Undefined => "undefined",
            PicardStatus::Contracting => "contracting",
            PicardStatus::NoContraction => "no-contraction",
            PicardStatus::Converged => "converged",
        })
    }
}

/// Difference between iterate `n` and iterate `n - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardRow {
    pub n: usize,
    /// `sup_t (‖δη‖² + ‖δu‖₁²)^{1/2}`.
    pub sup_delta: f64,
    pub sup_delta_eta: f64,
    pub sup_delta_u: f64,
    /// `sup_delta(n) / sup_delta(n - 1)` when defined.
    pub alpha: Option<f64>,
    /// Minimum depth of iterate `n` over the grid.
    pub min_depth: f64,
    pub status: PicardStatus,
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub rows: Vec<PicardRow>,
    /// Contraction factor at least one for two consecutive iterates.
    pub no_contraction: bool,
    /// Iteration stopped because a delta fell below [`CONVERGED_DELTA`].
    pub converged: bool,
    /// Positivity violation that stopped the iteration, if any.
    pub violation: Option<Error>,
}

impl PicardReport {
    pub fn min_depth(&self) -> f64 {
        self.rows.iter().map(|r| r.min_depth).fold(f64::INFINITY, f64::min)
    }

    pub fn last_delta(&self) -> Option<f64> {
        self.rows.last().map(|r| r.sup_delta)
    }

    pub fn alpha(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).and_then(|r| r.alpha)
    }
}

#[derive(Debug, Clone)]
pub struct PicardRun {
    pub report: PicardReport,
    /// Last computed iterate.
    pub trajectory: Trajectory,
}

/// Norms used for iterate differences: `L²` for the depth and full `H¹` for the velocity.
#[derive(Debug, Clone)]
pub struct PairNorm {
    mass: BandedCyclicMatrix,
    stiffness: BandedCyclicMatrix,
}

impl PairNorm {
    pub fn new(g: &Galerkin) -> Result<Self> {
        let ones = vec![1.0; g.quad_points().len()];
        Ok(Self {
            mass: g.mass().clone(),
            stiffness: g.bilinear_values(&ones, 1, 1, 1.0)?,
        })
    }

    pub fn l2(&self, c: &[f64]) -> f64 {
        self.mass.form(c, c).max(0.0).sqrt()
    }

    pub fn h1(&self, c: &[f64]) -> f64 {
        (self.mass.form(c, c) + self.stiffness.form(c, c)).max(0.0).sqrt()
    }

    /// `(‖a_η - b_η‖, ‖a_u - b_u‖₁)`.
    pub fn diff(&self, a_eta: &[f64], b_eta: &[f64], a_u: &[f64], b_u: &[f64]) -> (f64, f64) {
        let de: Vec<f64> = a_eta.iter().zip(b_eta).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = a_u.iter().zip(b_u).map(|(a, b)| a - b).collect();
        (self.l2(&de), self.h1(&du))
    }
}

/// Runs `n_iters` Picard iterations starting from the time-constant extension of the initial data.
pub fn run_picard(
    solver: &SerreSolver,
    init_eta: &[f64],
    init_u: &[f64],
    n_iters: usize,
) -> Result<PicardRun> {
    if n_iters < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 Picard iterations, got {n_iters}"
        )));
    }
    let grid = solver.config().grid()?;
    let norm = PairNorm::new(solver.galerkin())?;
    let mut prev = Trajectory::constant(solver.space(), grid, init_eta, init_u)?;
    let mut rows: Vec<PicardRow> = Vec::new();
    let mut report = PicardReport {
        rows: Vec::new(),
        no_contraction: false,
        converged: false,
        violation: None,
    };
    for n in 1..=n_iters {
        let next = match picard_iterate(solver, &prev, init_eta, init_u) {
            Ok(tr) => tr,
            Err(err @ Error::PositivityViolation { .. }) => {
                report.violation = Some(err);
                break;
            }
            Err(err) => return Err(err),
        };
        let mut row = PicardRow {
            n,
            sup_delta: 0.0,
            sup_delta_eta: 0.0,
            sup_delta_u: 0.0,
            alpha: None,
            min_depth: f64::INFINITY,
            status: PicardStatus::Undefined,
        };
        for k in 0..next.len() {
            let (de, du) = norm.diff(next.eta(k), prev.eta(k), next.u(k), prev.u(k));
            row.sup_delta = row.sup_delta.max((de * de + du * du).sqrt());
            row.sup_delta_eta = row.sup_delta_eta.max(de);
            row.sup_delta_u = row.sup_delta_u.max(du);
            row.min_depth = row.min_depth.min(solver.min_depth(next.eta(k))?.0);
        }
        if let Some(last) = rows.last() {
            if last.sup_delta > ALPHA_MIN_DELTA {
                let a = row.sup_delta / last.sup_delta;
                row.alpha = Some(a);
                row.status = if a < 1.0 {
                    PicardStatus::Contracting
                } else {
                    PicardStatus::NoContraction
                };
                if a >= 1.0 && last.status == PicardStatus::NoContraction {
                    report.no_contraction = true;
                }
            }
        }
        let done = row.sup_delta < CONVERGED_DELTA;
        if done {
            row.status = PicardStatus::Converged;
        }
        rows.push(row);
        prev = next;
        if done {
            report.converged = true;
            break;
        }
    }
    report.rows = rows;
    Ok(PicardRun {
        report,
        trajectory: prev,
    })
}

/// Errors of a trajectory against the quasiinterpolant of a reference solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateError {
    /// `sup_t ‖Q_h η - η_h‖`.
    pub theta: f64,
    /// `sup_t ‖Q_h u - u_h‖₁`.
    pub xi: f64,
    /// `sup_t ‖Q_h η_t - η_ht‖`.
    pub theta_t: f64,
    /// `sup_t ‖Q_h u_t - u_ht‖₁`.
    pub xi_t: f64,
}

/// `θ = Q_h η - η_h`, `ξ = Q_h u - u_h` and their time derivatives, sup over the recorded nodes.
pub fn iterate_error(
    traj: &Trajectory,
    reference: &dyn ExactSolution,
    mask: &QiMask,
    norm: &PairNorm,
) -> Result<IterateError> {
    let sp = traj.space();
    let mut out = IterateError {
        theta: 0.0,
        xi: 0.0,
        theta_t: 0.0,
        xi_t: 0.0,
    };
    for k in 0..traj.len() {
        let t = traj.time(k);
        let q = |f: &dyn Fn(f64) -> f64| mask.interpolate(sp, f).map(|s| s.into_coeffs());
        let he = q(&|x| reference.eta(x, t, 0, 0))?;
        let hu = q(&|x| reference.u(x, t, 0, 0))?;
        let het = q(&|x| reference.eta(x, t, 0, 1))?;
        let hut = q(&|x| reference.u(x, t, 0, 1))?;
        let (th, xi) = norm.diff(&he, traj.eta(k), &hu, traj.u(k));
        let (tht, xit) = norm.diff(&het, traj.eta_t(k), &hut, traj.u_t(k));
        out.theta = out.theta.max(th);
        out.xi = out.xi.max(xi);
        out.theta_t = out.theta_t.max(tht);
        out.xi_t = out.xi_t.max(xit);
    }
    Ok(out)
}

/// Defects of the quasiinterpolated exact solution in the semidiscrete equations.
#[derive(Debug, Clone)]
pub struct ResidualProbe {
    galerkin: Galerkin,
    mask: QiMask,
}

impl ResidualProbe {
    pub fn new(space: &SplineSpace, mask: QiMask) -> Result<Self> {
        let q = (2 * space.order() + 4).min(MAX_POINTS);
        Ok(Self {
            galerkin: Galerkin::new(space, q)?,
            mask,
        })
    }

    /// `(‖ψ‖, ‖δ‖)` at time `t` with `H = Q_h η`, `U = Q_h u`:
    ///
    /// `ψ = H_t + P_h(H U_x + U H_x) - P_h(η_t + (η u)_x)`,
    /// `δ = P_h(H U_t) + F_h(H³ U_tx) + P_h(H H_x + H U U_x) + F_h(H³(U U_xx - U_x²))`
    /// minus the same expression evaluated on the exact fields.
    pub fn residual(&self, exact: &dyn ExactSolution, t: f64) -> Result<(f64, f64)> {
        let g = &self.galerkin;
        let sp = g.space();
        let xs = g.quad_points();
        let qh = |f: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
            Ok(self.mask.interpolate(sp, f)?.into_coeffs())
        };
        let h = qh(&|x| exact.eta(x, t, 0, 0))?;
        let ht = qh(&|x| exact.eta(x, t, 0, 1))?;
        let u = qh(&|x| exact.u(x, t, 0, 0))?;
        let ut = qh(&|x| exact.u(x, t, 0, 1))?;
        let (hv, hx) = (g.values(&h, 0)?, g.values(&h, 1)?);
        let (uv, ux, uxx) = (g.values(&u, 0)?, g.values(&u, 1)?, g.values(&u, 2)?);
        let (utv, utx) = (g.values(&ut, 0)?, g.values(&ut, 1)?);

        let n = xs.len();
        let mut psi_src = vec![0.0; n];
        let mut delta_src = vec![0.0; n];
        let mut delta_grad = vec![0.0; n];
        for p in 0..n {
            let x = xs[p];
            let e = |kx, kt| exact.eta(x, t, kx, kt);
            let v = |kx, kt| exact.u(x, t, kx, kt);
            psi_src[p] = hv[p] * ux[p] + uv[p] * hx[p] - (e(0, 1) + e(0, 0) * v(1, 0) + v(0, 0) * e(1, 0));
            delta_src[p] = hv[p] * (utv[p] + hx[p] + uv[p] * ux[p])
                - e(0, 0) * (v(0, 1) + e(1, 0) + v(0, 0) * v(1, 0));
            let h3 = hv[p].powi(3);
            let e3 = e(0, 0).powi(3);
            delta_grad[p] = h3 * (utx[p] + uv[p] * uxx[p] - ux[p] * ux[p])
                - e3 * (v(1, 1) + v(0, 0) * v(2, 0) - v(1, 0) * v(1, 0));
        }
        let mut psi = g.mass_solve(&g.load_values(&psi_src, 0)?)?;
        psi.iter_mut().zip(&ht).for_each(|(a, b)| *a += b);
        let mut dl = g.load_values(&delta_src, 0)?;
        let grad = g.load_values(&delta_grad, 1)?;
        dl.iter_mut().zip(&grad).for_each(|(a, b)| *a += DISPERSION * b);
        let delta = g.mass_solve(&dl)?;
        Ok((g.l2_of_coeffs(&psi), g.l2_of_coeffs(&delta)))
    }
}

/// `(‖ψ‖, ‖δ‖)` at time `t`; see [`ResidualProbe::residual`].
pub fn consistency_residual(
    space: &SplineSpace,
    mask: &QiMask,
    exact: &dyn ExactSolution,
    t: f64,
) -> Result<(f64, f64)> {
    ResidualProbe::new(space, mask.clone())?.residual(exact, t)
}
