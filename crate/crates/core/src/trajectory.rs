//! Time histories of spline coefficients on a uniform time grid.

use crate::error::{Error, Result};
use crate::spline::{SplineFn, SplineSpace};

/// Smallest number of time steps in a grid, so cubic interpolation always has
/// four distinct nodes to work with.
pub const MIN_STEPS: usize = 4;

/// Uniform grid `t_0 + k dt`, `k = 0..=steps`, covering `[t0, t0 + span]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Grid over `[t0, t0 + span]` whose step is the largest `span / k` not exceeding `dt`.
    pub fn covering(t0: f64, span: f64, dt: f64) -> Result<Self> {
        if !(span > 0.0) || !(dt > 0.0) || !span.is_finite() || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time span and step must be positive, got span={span}, dt={dt}"
            )));
        }
        let steps = ((span / dt - 1e-9).ceil() as usize).max(MIN_STEPS);
        Ok(Self {
            t0,
            dt: span / steps as f64,
            steps,
        })
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Per-node coefficient records of `(η_h, u_h)` and their time derivatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    space: SplineSpace,
    grid: TimeGrid,
    eta: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    eta_t: Vec<Vec<f64>>,
    u_t: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Empty record on `grid`; nodes are appended in order with [`Trajectory::push`].
    pub fn new(space: &SplineSpace, grid: TimeGrid) -> Self {
        let cap = grid.nodes();
        Self {
            space: space.clone(),
            grid,
            eta: Vec::with_capacity(cap),
            u: Vec::with_capacity(cap),
            eta_t: Vec::with_capacity(cap),
            u_t: Vec::with_capacity(cap),
        }
    }

    /// `(η, u)` held fixed over the whole grid, with zero time derivatives.
    pub fn constant(space: &SplineSpace, grid: TimeGrid, eta: &[f64], u: &[f64]) -> Result<Self> {
        let mut tr = Self::new(space, grid);
        let zero = vec![0.0; space.dim()];
        for _ in 0..grid.nodes() {
            tr.push(eta.to_vec(), u.to_vec(), zero.clone(), zero.clone())?;
        }
        Ok(tr)
    }

    pub fn push(&mut self, eta: Vec<f64>, u: Vec<f64>, eta_t: Vec<f64>, u_t: Vec<f64>) -> Result<()> {
        let d = self.space.dim();
        for v in [&eta, &u, &eta_t, &u_t] {
            if v.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        if self.eta.len() == self.grid.nodes() {
            return Err(Error::InvalidArgument("trajectory is already full".into()));
        }
        self.eta.push(eta);
        self.u.push(u);
        self.eta_t.push(eta_t);
        self.u_t.push(u_t);
        Ok(())
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.grid.nodes()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    pub fn eta(&self, k: usize) -> &[f64] {
        &self.eta[k]
    }

    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k]
    }

    pub fn eta_t(&self, k: usize) -> &[f64] {
        &self.eta_t[k]
    }

    pub fn u_t(&self, k: usize) -> &[f64] {
        &self.u_t[k]
    }

    pub fn eta_fn(&self, k: usize) -> SplineFn {
        self.space.from_coeffs(self.eta[k].clone()).expect("length checked on push")
    }

    pub fn u_fn(&self, k: usize) -> SplineFn {
        self.space.from_coeffs(self.u[k].clone()).expect("length checked on push")
    }

    /// Coefficients of `(η, u)` at fractional node position `pos` (time `t0 + pos dt`)
    /// by cubic Lagrange interpolation through the four nearest recorded nodes.
    pub fn interpolate(&self, pos: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let last = self.len().checked_sub(1).ok_or_else(|| {
            Error::InvalidArgument("cannot interpolate an empty trajectory".into())
        })?;
        if !(pos >= -1e-12 && pos <= last as f64 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "position {pos} outside the recorded nodes 0..={last}"
            )));
        }
        if last < 3 {
            return Err(Error::InvalidArgument(
                "cubic interpolation needs at least four nodes".into(),
            ));
        }
        let start = (pos.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
        let s = pos - start as f64;
        let w = lagrange4(s);
        let d = self.space.dim();
        let mut eta = vec![0.0; d];
        let mut u = vec![0.0; d];
        for (j, wj) in w.iter().enumerate() {
            if *wj == 0.0 {
                continue;
            }
            for i in 0..d {
                eta[i] += wj * self.eta[start + j][i];
                u[i] += wj * self.u[start + j][i];
            }
        }
        Ok((eta, u))
    }
}

/// Cubic Lagrange weights for nodes `0, 1, 2, 3` at `s`; exact unit vectors at the nodes.
fn lagrange4(s: f64) -> [f64; 4] {
    let (a, b, c, d) = (s, s - 1.0, s - 2.0, s - 3.0);
    [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ]
}
