//! Smooth 1-periodic functions with closed-form derivatives.

use std::f64::consts::PI;

/// A smooth 1-periodic function whose derivatives of every order can be evaluated.
pub trait SmoothFn: Sync {
    /// `d^k f / dx^k` at `x`.
    fn deriv(&self, x: f64, k: usize) -> f64;

    fn value(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }
}

/// `d^k/dθ^k sin θ`.
#[inline]
pub fn sin_deriv(theta: f64, k: usize) -> f64 {
    match k % 4 {
        0 => theta.sin(),
        1 => theta.cos(),
        2 => -theta.sin(),
        _ => -theta.cos(),
    }
}

/// `d^k/dθ^k cos θ`.
#[inline]
pub fn cos_deriv(theta: f64, k: usize) -> f64 {
    sin_deriv(theta, k + 1)
}

/// `c + Σ_k (a_k cos 2πkx + b_k sin 2πkx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub constant: f64,
    /// `(frequency, cos coefficient, sin coefficient)`
    pub terms: Vec<(u32, f64, f64)>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn sin(freq: u32, amp: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(freq, 0.0, amp)],
        }
    }

    pub fn cos(freq: u32, amp: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(freq, amp, 0.0)],
        }
    }

    pub fn plus(mut self, other: TrigPoly) -> Self {
        self.constant += other.constant;
        self.terms.extend(other.terms);
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

impl SmoothFn for TrigPoly {
    fn deriv(&self, x: f64, k: usize) -> f64 {
        let mut v = if k == 0 { self.constant } else { 0.0 };
        for &(freq, a, b) in &self.terms {
            let w = 2.0 * PI * freq as f64;
            let th = w * x;
            let s = w.powi(k as i32);
            v += s * (a * cos_deriv(th, k) + b * sin_deriv(th, k));
        }
        v
    }
}

/// `d^k/dx^k (f g)` by the Leibniz rule.
pub fn product_deriv(f: &dyn SmoothFn, g: &dyn SmoothFn, x: f64, k: usize) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for i in 0..=k {
        sum += binom * f.deriv(x, i) * g.deriv(x, k - i);
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    sum
}
