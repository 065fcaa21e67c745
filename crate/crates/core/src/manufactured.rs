//! Closed-form solutions of the forced Serre system used to measure errors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functions::sin_deriv;

/// Space-time fields `(η, u)` with closed-form partial derivatives.
pub trait ExactSolution: Send + Sync {
    /// `∂_x^{kx} ∂_t^{kt} η` at `(x, t)`.
    fn eta(&self, x: f64, t: f64, kx: usize, kt: usize) -> f64;
    /// `∂_x^{kx} ∂_t^{kt} u` at `(x, t)`.
    fn u(&self, x: f64, t: f64, kx: usize, kt: usize) -> f64;
}

/// Source terms added to the mass and momentum equations.
pub trait Forcing: Send + Sync {
    fn f(&self, x: f64, t: f64) -> f64;
    fn g(&self, x: f64, t: f64) -> f64;
}

/// `η = 1 + a sin 2π(x - t)`, `u = b sin 2π(x + t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelingWaves {
    pub a: f64,
    pub b: f64,
}

impl TravelingWaves {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&a) || !(b >= 0.0) || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= a < 0.5 and b >= 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn min_depth(&self) -> f64 {
        1.0 - self.a
    }
}

impl ExactSolution for TravelingWaves {
    fn eta(&self, x: f64, t: f64, kx: usize, kt: usize) -> f64 {
        let k = kx + kt;
        let w = 2.0 * PI;
        let sign = if kt % 2 == 0 { 1.0 } else { -1.0 };
        let v = self.a * sign * w.powi(k as i32) * sin_deriv(w * (x - t), k);
        if k == 0 {
            1.0 + v
        } else {
            v
        }
    }

    fn u(&self, x: f64, t: f64, kx: usize, kt: usize) -> f64 {
        let k = kx + kt;
        let w = 2.0 * PI;
        self.b * w.powi(k as i32) * sin_deriv(w * (x + t), k)
    }
}

/// A constant-depth fluid at rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Still {
    pub depth: f64,
}

impl ExactSolution for Still {
    fn eta(&self, _x: f64, _t: f64, kx: usize, kt: usize) -> f64 {
        if kx + kt == 0 {
            self.depth
        } else {
            0.0
        }
    }

    fn u(&self, _x: f64, _t: f64, _kx: usize, _kt: usize) -> f64 {
        0.0
    }
}

/// An exact solution together with the forcing that makes it solve the forced system
///
/// `η_t + (ηu)_x = f`,
/// `η u_t + η η_x + η u u_x - ⅓[η³(u_tx + u u_xx - u_x²)]_x = g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedProblem<S> {
    pub solution: S,
}

impl<S: ExactSolution> ManufacturedProblem<S> {
    pub fn new(solution: S) -> Self {
        Self { solution }
    }

    pub fn eta0(&self, x: f64) -> f64 {
        self.solution.eta(x, 0.0, 0, 0)
    }

    pub fn u0(&self, x: f64) -> f64 {
        self.solution.u(x, 0.0, 0, 0)
    }

    /// Pointwise continuum residuals `(mass, momentum)` with the momentum
    /// equation in conservative form, differentiated factor by factor.
    pub fn residual(&self, x: f64, t: f64) -> (f64, f64) {
        let s = &self.solution;
        let e = |kx, kt| s.eta(x, t, kx, kt);
        let v = |kx, kt| s.u(x, t, kx, kt);
        let flux_x = e(1, 0) * v(0, 0) + e(0, 0) * v(1, 0);
        let mass = e(0, 1) + flux_x - self.f(x, t);

        let cube = e(0, 0).powi(3);
        let cube_x = 3.0 * e(0, 0).powi(2) * e(1, 0);
        let inner = v(1, 1) + v(0, 0) * v(2, 0) - v(1, 0).powi(2);
        let inner_x = v(2, 1) + v(1, 0) * v(2, 0) + v(0, 0) * v(3, 0) - 2.0 * v(1, 0) * v(2, 0);
        let disp_x = cube_x * inner + cube * inner_x;
        let momentum = e(0, 0) * (v(0, 1) + e(1, 0) + v(0, 0) * v(1, 0)) - disp_x / 3.0 - self.g(x, t);
        (mass, momentum)
    }

    /// Verifies the forcing and the closed-form derivatives it uses.
    ///
    /// The continuum residual must vanish to `1e-9` at 1000 random points, and every
    /// derivative entering the forcing must agree with a central difference of the
    /// next-lower derivative (step `1e-5`, relative tolerance `1e-6`).
    pub fn self_check(&self, seed: u64) -> Result<SelfCheck> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = &self.solution;
        let step = 1e-5;
        let mut max_residual = 0.0f64;
        let mut max_fd = 0.0f64;
        // (kx, kt) pairs of derivatives entering f and g
        const USED: [(usize, usize); 7] = [(1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1), (0, 0)];
        for _ in 0..1000 {
            let x = rng.gen_range(0.0..1.0);
            let t = rng.gen_range(0.0..1.0);
            let (rm, ru) = self.residual(x, t);
            max_residual = max_residual.max(rm.abs()).max(ru.abs());
            for &(kx, kt) in USED.iter().filter(|p| **p != (0, 0)) {
                type Field<'a> = Box<dyn Fn(f64, f64, usize, usize) -> f64 + 'a>;
                let fields: [Field; 2] = [
                    Box::new(|x, t, a, b| s.eta(x, t, a, b)),
                    Box::new(|x, t, a, b| s.u(x, t, a, b)),
                ];
                for field in &fields {
                    let exact = field(x, t, kx, kt);
                    let fd = if kt > 0 {
                        (field(x, t + step, kx, kt - 1) - field(x, t - step, kx, kt - 1)) / (2.0 * step)
                    } else {
                        (field(x + step, t, kx - 1, kt) - field(x - step, t, kx - 1, kt)) / (2.0 * step)
                    };
                    let scale = (2.0 * PI).powi((kx + kt) as i32);
                    max_fd = max_fd.max((fd - exact).abs() / scale);
                }
            }
        }
        let check = SelfCheck {
            max_residual,
            max_fd_relative: max_fd,
        };
        if check.passed() {
            Ok(check)
        } else {
            Err(Error::InvalidArgument(format!(
                "manufactured problem failed its self-check: residual {max_residual:.3e}, \
                 derivative mismatch {max_fd:.3e}"
            )))
        }
    }
}

impl<S: ExactSolution> Forcing for ManufacturedProblem<S> {
    fn f(&self, x: f64, t: f64) -> f64 {
        let s = &self.solution;
        s.eta(x, t, 0, 1) + s.eta(x, t, 1, 0) * s.u(x, t, 0, 0) + s.eta(x, t, 0, 0) * s.u(x, t, 1, 0)
    }

    fn g(&self, x: f64, t: f64) -> f64 {
        let s = &self.solution;
        let (e, ex) = (s.eta(x, t, 0, 0), s.eta(x, t, 1, 0));
        let (u, ux, uxx, uxxx) = (s.u(x, t, 0, 0), s.u(x, t, 1, 0), s.u(x, t, 2, 0), s.u(x, t, 3, 0));
        let (ut, utx, utxx) = (s.u(x, t, 0, 1), s.u(x, t, 1, 1), s.u(x, t, 2, 1));
        let e2 = e * e;
        let e3 = e2 * e;
        e * ut - (e2 * ex * utx + e3 * utxx / 3.0) + e * ex + e * u * ux
            - (e2 * ex * (u * uxx - ux * ux) + e3 * (u * uxxx - ux * uxx) / 3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCheck {
    pub max_residual: f64,
    /// Largest finite-difference mismatch relative to the derivative's natural scale `(2π)^k`.
    pub max_fd_relative: f64,
}

impl SelfCheck {
    pub fn passed(&self) -> bool {
        self.max_residual <= 1e-9 && self.max_fd_relative <= 1e-6
    }
}

/// Unforced system.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn f(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn g(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
}
