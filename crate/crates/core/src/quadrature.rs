//! Gauss–Legendre rules on the reference cell `[0, 1]`.

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 30;

/// A `q`-point Gauss–Legendre rule on `[0, 1]`, exact for polynomials of degree `2q - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 || q > MAX_POINTS {
            return Err(Error::InvalidArgument(format!(
                "quadrature points per cell must be in 1..={MAX_POINTS}, got {q}"
            )));
        }
        let mut points = vec![0.0; q];
        let mut weights = vec![0.0; q];
        // Roots are symmetric; solve for the upper half with Newton on P_q.
        for i in 0..(q + 1) / 2 {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(q, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(q, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] -> [0, 1]
            points[i] = 0.5 * (1.0 - z);
            points[q - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[q - 1 - i] = 0.5 * w;
        }
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]` split into `cells` equal cells.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize) -> f64 {
        let h = (b - a) / cells as f64;
        let mut sum = 0.0;
        for c in 0..cells {
            let x0 = a + c as f64 * h;
            let cell: f64 = self
                .points
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| w * f(x0 + p * h))
                .sum();
            sum += cell * h;
        }
        sum
    }
}

/// Value and derivative of the Legendre polynomial of degree `n` at `z`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_rule() {
        let g = GaussRule::new(1).unwrap();
        assert_eq!(g.points(), &[0.5]);
        assert!((g.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one() {
        for q in 1..=MAX_POINTS {
            let g = GaussRule::new(q).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "q={q}: {s}");
            assert!(g.points().iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn exact_to_degree_2q_minus_1() {
        for q in 1..=12 {
            let g = GaussRule::new(q).unwrap();
            for deg in 0..2 * q {
                let got = g.integrate(|x| x.powi(deg as i32), 0.0, 1.0, 1);
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((got - exact).abs() < 1e-13, "q={q} deg={deg}");
            }
        }
        let g = GaussRule::new(3).unwrap();
        assert!((g.integrate(|x| x.powi(5), 0.0, 1.0, 1) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn composite_sin_squared() {
        let g = GaussRule::new(5).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let v = g.integrate(|x| (two_pi * x).sin().powi(2), 0.0, 1.0, 32);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GaussRule::new(0).is_err());
        assert!(GaussRule::new(31).is_err());
    }
}
