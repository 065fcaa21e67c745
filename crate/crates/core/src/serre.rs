//! Galerkin semidiscretization of the Serre equations with classical RK4 in time.
//!
//! Unknowns are the B-spline coefficients of the depth `η_h` and velocity `u_h`:
//!
//! ```text
//! M η̇       = -load((η u)_x) + load(f)
//! A(η) u̇    = -load(η η_x + η u u_x) - ⅓ load'(η³(u u_xx - u_x²)) + load(g)
//! A(η)      = [∫ η B_j B_i] + ⅓ [∫ η³ B_j' B_i']
//! ```
//!
//! where `load'` pairs with `B_i'`. The depth is checked against a floor at every
//! quadrature point and knot before each right-hand-side evaluation.

use std::sync::Arc;

use crate::banded::BandedCyclicMatrix;
use crate::error::{Error, Result};
use crate::galerkin::{default_quad_points, Galerkin, DISPERSION};
use crate::manufactured::Forcing;
use crate::quasiinterp::QiMask;
use crate::spline::{SplineFn, SplineSpace};
use crate::trajectory::{TimeGrid, Trajectory};

#[derive(Clone)]
pub struct SolverConfig {
    /// Reference lower bound of the depth.
    pub c0: f64,
    /// Monitored minimum depth, `c0 / 8` unless overridden.
    pub depth_floor: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Gauss points per cell.
    pub q: Option<usize>,
    pub forcing: Option<Arc<dyn Forcing>>,
}

impl std::fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverConfig")
            .field("c0", &self.c0)
            .field("depth_floor", &self.depth_floor)
            .field("dt", &self.dt)
            .field("t_end", &self.t_end)
            .field("q", &self.q)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

impl SolverConfig {
    pub fn new(c0: f64, dt: f64, t_end: f64) -> Self {
        Self {
            c0,
            depth_floor: c0 / 8.0,
            dt,
            t_end,
            q: None,
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, forcing: Arc<dyn Forcing>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn with_depth_floor(mut self, floor: f64) -> Self {
        self.depth_floor = floor;
        self
    }

    pub fn with_quad_points(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.depth_floor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "depth floor must be positive, got {}",
                self.depth_floor
            )));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::InvalidArgument(format!("c0 must be positive, got {}", self.c0)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::covering(0.0, self.t_end, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub eta: SplineFn,
    pub u: SplineFn,
}

impl State {
    pub fn new(t: f64, eta: SplineFn, u: SplineFn) -> Result<Self> {
        if eta.space() != u.space() {
            return Err(Error::InvalidArgument(
                "depth and velocity must live in the same spline space".into(),
            ));
        }
        Ok(Self { t, eta, u })
    }
}

/// `‖η‖² + (η u, u) + ⅓(η³ u_x, u_x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiag {
    pub t: f64,
    pub value: f64,
}

/// Diagnostics recorded at every time node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub min_depth: f64,
    /// Location of the minimum depth.
    pub min_x: f64,
    pub energy: f64,
    /// `∫ η_h`.
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// Nodes up to the final time, or up to the last valid node if the run stopped.
    pub trajectory: Trajectory,
    pub records: Vec<StepRecord>,
    /// Positivity violation that ended the run early, if any.
    pub violation: Option<Error>,
}

impl Simulation {
    pub fn completed(&self) -> bool {
        self.violation.is_none() && self.trajectory.is_complete()
    }

    pub fn min_depth(&self) -> f64 {
        self.records.iter().map(|r| r.min_depth).fold(f64::INFINITY, f64::min)
    }

    /// Largest `|∫η_h(t) - ∫η_h(0)|` over the records.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.records.first().map_or(0.0, |r| r.mass);
        self.records.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max)
    }
}

/// Values of a spline at the quadrature points and knots of a space.
#[derive(Debug, Clone)]
pub(crate) struct DepthMonitor {
    knot_table: Vec<f64>,
}

impl DepthMonitor {
    pub(crate) fn new(space: &SplineSpace) -> Self {
        let knot_table = (0..space.order()).map(|m| space.piece(0, m, 0.0)).collect();
        Self { knot_table }
    }

    /// Minimum and its location over quadrature values and knot values.
    pub(crate) fn min(&self, gal: &Galerkin, coeffs: &[f64], quad_vals: &[f64]) -> (f64, f64) {
        let sp = gal.space();
        let mut best = (f64::INFINITY, 0.0);
        for (v, &x) in quad_vals.iter().zip(gal.quad_points()) {
            if *v < best.0 {
                best = (*v, x);
            }
        }
        for c in 0..sp.cells() {
            let v: f64 = (0..sp.order())
                .map(|m| coeffs[sp.active_index(c, m)] * self.knot_table[m])
                .sum();
            if v < best.0 {
                best = (v, c as f64 * sp.h());
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SerreSolver {
    galerkin: Galerkin,
    cfg: SolverConfig,
    monitor: DepthMonitor,
}

impl SerreSolver {
    pub fn new(space: &SplineSpace, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if space.order() < 3 {
            return Err(Error::InvalidArgument(format!(
                "the Serre solver needs u_xx, so spline order must be at least 3 (got {})",
                space.order()
            )));
        }
        let q = cfg.q.unwrap_or_else(|| default_quad_points(space.order()));
        Ok(Self {
            galerkin: Galerkin::new(space, q)?,
            cfg,
            monitor: DepthMonitor::new(space),
        })
    }

    pub fn galerkin(&self) -> &Galerkin {
        &self.galerkin
    }

    pub fn space(&self) -> &SplineSpace {
        self.galerkin.space()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// `(Q_h η₀, Q_h u₀)` at `t = 0`.
    pub fn initial_state(
        &self,
        mask: &QiMask,
        eta0: impl Fn(f64) -> f64,
        u0: impl Fn(f64) -> f64,
    ) -> Result<State> {
        State::new(
            0.0,
            mask.interpolate(self.space(), eta0)?,
            mask.interpolate(self.space(), u0)?,
        )
    }

    /// Minimum depth over quadrature points and knots, with its location.
    pub fn min_depth(&self, eta: &[f64]) -> Result<(f64, f64)> {
        let vals = self.galerkin.values(eta, 0)?;
        Ok(self.monitor.min(&self.galerkin, eta, &vals))
    }

    /// `A(η)` from values of `η` at the quadrature points.
    pub fn assemble_a_values(&self, eta_vals: &[f64]) -> Result<BandedCyclicMatrix> {
        let cube: Vec<f64> = eta_vals.iter().map(|e| e * e * e).collect();
        let m = self.galerkin.weighted_mass_values(eta_vals)?;
        let k = self.galerkin.weighted_grad_form_values(&cube)?;
        Ok(m.combine(1.0, &k, 1.0))
    }

    /// `A(η) = [∫ η B_j B_i] + ⅓[∫ η³ B_j' B_i']`; rejects non-positive depth.
    pub fn assemble_a(&self, eta: &SplineFn) -> Result<BandedCyclicMatrix> {
        let vals = self.galerkin.values(eta.coeffs(), 0)?;
        let (min, x) = self.monitor.min(&self.galerkin, eta.coeffs(), &vals);
        if !(min > 0.0) {
            return Err(Error::PositivityViolation {
                t: f64::NAN,
                x,
                value: min,
                floor: 0.0,
            });
        }
        self.assemble_a_values(&vals)
    }

    pub(crate) fn check_depth(&self, t: f64, coeffs: &[f64], vals: &[f64]) -> Result<()> {
        let (min, x) = self.monitor.min(&self.galerkin, coeffs, vals);
        if !(min >= self.cfg.depth_floor) {
            return Err(Error::PositivityViolation {
                t,
                x,
                value: min,
                floor: self.cfg.depth_floor,
            });
        }
        Ok(())
    }

    pub(crate) fn forcing_values(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        self.cfg.forcing.as_ref().map(|fg| {
            let xs = self.galerkin.quad_points();
            (
                xs.iter().map(|&x| fg.f(x, t)).collect(),
                xs.iter().map(|&x| fg.g(x, t)).collect(),
            )
        })
    }

    /// Time derivatives of the coefficients of `(η_h, u_h)` at time `t`.
    pub fn rhs_coeffs(&self, t: f64, eta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = &self.galerkin;
        let e = g.values(eta, 0)?;
        self.check_depth(t, eta, &e)?;
        let ex = g.values(eta, 1)?;
        let v = g.values(u, 0)?;
        let vx = g.values(u, 1)?;
        let vxx = g.values(u, 2)?;
        let forcing = self.forcing_values(t);

        let mut mass_src: Vec<f64> = (0..e.len()).map(|p| -(ex[p] * v[p] + e[p] * vx[p])).collect();
        let mut mom_src: Vec<f64> =
            (0..e.len()).map(|p| -e[p] * (ex[p] + v[p] * vx[p])).collect();
        if let Some((f, gg)) = &forcing {
            mass_src.iter_mut().zip(f).for_each(|(a, b)| *a += b);
            mom_src.iter_mut().zip(gg).for_each(|(a, b)| *a += b);
        }
        let disp: Vec<f64> = (0..e.len())
            .map(|p| e[p].powi(3) * (v[p] * vxx[p] - vx[p] * vx[p]))
            .collect();

        let eta_dot = g.mass_solve(&g.load_values(&mass_src, 0)?)?;
        let mut rhs_u = g.load_values(&mom_src, 0)?;
        let grad = g.load_values(&disp, 1)?;
        rhs_u.iter_mut().zip(&grad).for_each(|(a, b)| *a -= DISPERSION * b);
        let u_dot = self.assemble_a_values(&e)?.solve(&rhs_u)?;
        Ok((eta_dot, u_dot))
    }

    pub fn rhs(&self, state: &State) -> Result<(Vec<f64>, Vec<f64>)> {
        self.rhs_coeffs(state.t, state.eta.coeffs(), state.u.coeffs())
    }

    /// One classical RK4 step on coefficient vectors.
    pub fn rk4_coeffs(&self, t: f64, eta: &[f64], u: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        rk4(t, eta, u, dt, |t, e, v| self.rhs_coeffs(t, e, v))
    }

    pub fn rk4_step(&self, state: &State, dt: f64) -> Result<State> {
        let (e, v) = self.rk4_coeffs(state.t, state.eta.coeffs(), state.u.coeffs(), dt)?;
        let sp = self.space();
        State::new(state.t + dt, sp.from_coeffs(e)?, sp.from_coeffs(v)?)
    }

    pub fn energy(&self, state: &State) -> Result<EnergyDiag> {
        Ok(EnergyDiag {
            t: state.t,
            value: self.energy_coeffs(state.eta.coeffs(), state.u.coeffs())?,
        })
    }

    pub(crate) fn energy_coeffs(&self, eta: &[f64], u: &[f64]) -> Result<f64> {
        let g = &self.galerkin;
        let e = g.values(eta, 0)?;
        let v = g.values(u, 0)?;
        let vx = g.values(u, 1)?;
        let dens: Vec<f64> = (0..e.len())
            .map(|p| e[p] * e[p] + e[p] * v[p] * v[p] + DISPERSION * e[p].powi(3) * vx[p] * vx[p])
            .collect();
        Ok(g.integrate_values(&dens))
    }

    /// `∫ η_h`.
    pub fn mass(&self, eta: &[f64]) -> Result<f64> {
        Ok(self.galerkin.integrate_values(&self.galerkin.values(eta, 0)?))
    }

    fn record(&self, t: f64, eta: &[f64], u: &[f64]) -> Result<StepRecord> {
        let (min_depth, min_x) = self.min_depth(eta)?;
        Ok(StepRecord {
            t,
            min_depth,
            min_x,
            energy: self.energy_coeffs(eta, u)?,
            mass: self.mass(eta)?,
        })
    }

    /// Integrates from `(Q_h η₀, Q_h u₀)` to the configured final time.
    pub fn simulate(
        &self,
        mask: &QiMask,
        eta0: impl Fn(f64) -> f64,
        u0: impl Fn(f64) -> f64,
    ) -> Result<Simulation> {
        let init = self.initial_state(mask, eta0, u0)?;
        self.simulate_from(&init)
    }

    /// Integrates from `init`; stops at the first positivity violation and reports it in-band.
    pub fn simulate_from(&self, init: &State) -> Result<Simulation> {
        let grid = self.cfg.grid()?;
        let grid = TimeGrid { t0: init.t, ..grid };
        let mut trajectory = Trajectory::new(self.space(), grid);
        let mut records = Vec::with_capacity(grid.nodes());
        let mut eta = init.eta.coeffs().to_vec();
        let mut u = init.u.coeffs().to_vec();
        for k in 0..=grid.steps {
            let t = grid.time(k);
            records.push(self.record(t, &eta, &u)?);
            let (de, du) = match self.rhs_coeffs(t, &eta, &u) {
                Ok(d) => d,
                Err(err @ Error::PositivityViolation { .. }) => {
                    return Ok(Simulation {
                        trajectory,
                        records,
                        violation: Some(err),
                    })
                }
                Err(err) => return Err(err),
            };
            trajectory.push(eta.clone(), u.clone(), de, du)?;
            if k == grid.steps {
                break;
            }
            match self.rk4_coeffs(t, &eta, &u, grid.dt) {
                Ok((e, v)) => {
                    eta = e;
                    u = v;
                }
                Err(err @ Error::PositivityViolation { .. }) => {
                    return Ok(Simulation {
                        trajectory,
                        records,
                        violation: Some(err),
                    })
                }
                Err(err) => return Err(err),
            }
        }
        Ok(Simulation {
            trajectory,
            records,
            violation: None,
        })
    }
}

/// Classical four-stage Runge–Kutta for the pair `(η, u)`.
pub(crate) fn rk4<F>(t: f64, eta: &[f64], u: &[f64], dt: f64, mut f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
{
    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(x, y)| x + a * y).collect() };
    let (k1e, k1u) = f(t, eta, u)?;
    let (k2e, k2u) = f(t + 0.5 * dt, &axpy(eta, 0.5 * dt, &k1e), &axpy(u, 0.5 * dt, &k1u))?;
    let (k3e, k3u) = f(t + 0.5 * dt, &axpy(eta, 0.5 * dt, &k2e), &axpy(u, 0.5 * dt, &k2u))?;
    let (k4e, k4u) = f(t + dt, &axpy(eta, dt, &k3e), &axpy(u, dt, &k3u))?;
    let combine = |y: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    Ok((
        combine(eta, &k1e, &k2e, &k3e, &k4e),
        combine(u, &k1u, &k2u, &k3u, &k4u),
    ))
}
