//! Periodic uniform B-spline spaces on `[0, 1]`.
//!
//! The space of order `r` on `N` cells holds the 1-periodic `C^{r-2}` piecewise
//! polynomials of degree `r - 1` with knots at `x_i = i h`, `h = 1/N`. The basis
//! consists of `N` translates of one cardinal B-spline. Basis function `j` is
//! centered at `x_j + s h` with `s = 0` for even `r` and `s = 1/2` for odd `r`,
//! so its support is `[x_{j - r/2}, x_{j - r/2 + r}]` (integer division).

use std::ops::{Add, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

/// Samples per cell used for the sup-norm estimates.
pub const SUP_SAMPLES_PER_CELL: usize = 20;

#[derive(Debug)]
struct Inner {
    order: usize,
    cells: usize,
    h: f64,
    /// `pieces[k][m]`: monomial coefficients (in the local cell variable `t`) of the
    /// `k`-th `t`-derivative of polynomial piece `m` of the cardinal B-spline.
    pieces: Vec<Vec<Vec<f64>>>,
}

/// The spline space `S_h`. Cheap to clone.
#[derive(Debug, Clone)]
pub struct SplineSpace {
    inner: Arc<Inner>,
}

impl PartialEq for SplineSpace {
    fn eq(&self, other: &Self) -> bool {
        self.order() == other.order() && self.cells() == other.cells()
    }
}

impl SplineSpace {
    /// Builds the space of order `r` on `n` cells. Requires `r >= 2` and `n > 4(r - 1)`.
    pub fn new(r: usize, n: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidSpace(format!("order must be at least 2, got {r}")));
        }
        if n <= 4 * (r - 1) {
            return Err(Error::InvalidSpace(format!(
                "need N > 4(r-1) = {}, got N = {n}",
                4 * (r - 1)
            )));
        }
        let base = cardinal_pieces(r);
        let mut pieces = Vec::with_capacity(r);
        pieces.push(base);
        for k in 1..r {
            let prev: &Vec<Vec<f64>> = &pieces[k - 1];
            let next = prev.iter().map(|p| poly_derivative(p)).collect();
            pieces.push(next);
        }
        Ok(Self {
            inner: Arc::new(Inner {
                order: r,
                cells: n,
                h: 1.0 / n as f64,
                pieces,
            }),
        })
    }

    /// Spline order `r` (polynomial degree `r - 1`).
    pub fn order(&self) -> usize {
        self.inner.order
    }

    /// Number of cells `N`, which is also the dimension of the space.
    pub fn cells(&self) -> usize {
        self.inner.cells
    }

    pub fn dim(&self) -> usize {
        self.inner.cells
    }

    pub fn h(&self) -> f64 {
        self.inner.h
    }

    /// Half-bandwidth of Gram matrices of the basis.
    pub fn bandwidth(&self) -> usize {
        self.inner.order - 1
    }

    /// Offset of the center of basis function `j` from `x_j`, in units of `h`.
    pub fn center_shift(&self) -> f64 {
        if self.inner.order % 2 == 0 {
            0.0
        } else {
            0.5
        }
    }

    /// Mesh node `x_j = j h`.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.inner.h
    }

    /// Index of the basis function whose piece `m` lives on cell `cell`.
    #[inline]
    pub fn active_index(&self, cell: usize, m: usize) -> usize {
        let n = self.inner.cells;
        let lo = self.inner.order / 2;
        (cell + lo + n - m) % n
    }

    /// Value of the `k`-th `t`-derivative of piece `m` at local coordinate `t`.
    /// Callers scale by `h^{-k}` to obtain `x`-derivatives.
    #[inline]
    pub fn piece(&self, k: usize, m: usize, t: f64) -> f64 {
        horner(&self.inner.pieces[k][m], t)
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k >= self.inner.order {
            return Err(Error::DerivativeOrder {
                order: k,
                spline_order: self.inner.order,
            });
        }
        Ok(())
    }

    /// Tabulates `table[m][p] = h^{-k} d^k/dt^k piece_m(ts[p])`.
    pub fn tabulate(&self, ts: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
        self.check_order(k)?;
        let scale = self.inner.h.powi(-(k as i32));
        Ok((0..self.inner.order)
            .map(|m| ts.iter().map(|&t| scale * self.piece(k, m, t)).collect())
            .collect())
    }

    /// Splits a point into (cell, local coordinate) after periodic wrapping.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.inner.cells;
        let mut y = x - x.floor();
        if y >= 1.0 {
            y = 0.0;
        }
        let s = y * n as f64;
        let cell = (s.floor() as usize).min(n - 1);
        (cell, s - cell as f64)
    }

    /// Value of basis function `j` (or its `k`-th derivative) at `x`.
    pub fn basis(&self, j: usize, x: f64, k: usize) -> Result<f64> {
        self.check_order(k)?;
        let (cell, t) = self.locate(x);
        let scale = self.inner.h.powi(-(k as i32));
        for m in 0..self.inner.order {
            if self.active_index(cell, m) == j {
                return Ok(scale * self.piece(k, m, t));
            }
        }
        Ok(0.0)
    }

    pub fn zero(&self) -> SplineFn {
        SplineFn {
            space: self.clone(),
            coeffs: vec![0.0; self.dim()],
        }
    }

    /// The constant spline `value` (partition of unity).
    pub fn constant(&self, value: f64) -> SplineFn {
        SplineFn {
            space: self.clone(),
            coeffs: vec![value; self.dim()],
        }
    }

    pub fn from_coeffs(&self, coeffs: Vec<f64>) -> Result<SplineFn> {
        if coeffs.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        Ok(SplineFn {
            space: self.clone(),
            coeffs,
        })
    }
}

/// Polynomial pieces of the cardinal B-spline of order `r` on knots `0, 1, ..., r`.
/// `pieces[m]` is the restriction to `[m, m + 1]` written in `t = y - m`.
fn cardinal_pieces(r: usize) -> Vec<Vec<f64>> {
    let mut pieces: Vec<Vec<f64>> = vec![vec![1.0]];
    for k in 2..=r {
        let kf = (k - 1) as f64;
        let mut next = Vec::with_capacity(k);
        for m in 0..k {
            let mut p = vec![0.0; k];
            // (m + t)/(k-1) * N_{k-1} piece m
            if m < k - 1 {
                for (d, &c) in pieces[m].iter().enumerate() {
                    p[d] += c * m as f64 / kf;
                    p[d + 1] += c / kf;
                }
            }
            // (k - m - t)/(k-1) * N_{k-1} piece m-1
            if m >= 1 {
                for (d, &c) in pieces[m - 1].iter().enumerate() {
                    p[d] += c * (k - m) as f64 / kf;
                    p[d + 1] -= c / kf;
                }
            }
            next.push(p);
        }
        pieces = next;
    }
    pieces
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(d, &c)| c * d as f64)
        .collect()
}

#[inline]
fn horner(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Norms of a spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    pub w1inf: f64,
}

/// An element of `S_h`, stored by its periodic B-spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFn {
    space: SplineSpace,
    coeffs: Vec<f64>,
}

impl SplineFn {
    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `d^k f/dx^k` at `x`, wrapped periodically.
    pub fn eval(&self, x: f64, k: usize) -> Result<f64> {
        self.space.check_order(k)?;
        let (cell, t) = self.space.locate(x);
        Ok(self.eval_local(cell, t, k))
    }

    /// Evaluation on a given cell at local coordinate `t`; `t` may sit on either
    /// end of the cell, which gives one-sided values at knots.
    pub fn eval_local(&self, cell: usize, t: f64, k: usize) -> f64 {
        let sp = &self.space;
        let mut v = 0.0;
        for m in 0..sp.order() {
            v += self.coeffs[sp.active_index(cell, m)] * sp.piece(k, m, t);
        }
        v * sp.h().powi(-(k as i32))
    }

    pub fn scaled(&self, a: f64) -> SplineFn {
        SplineFn {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    /// `∫ f^{(kf)} g^{(kg)}` by Gauss quadrature with `r` points per cell (exact).
    pub fn inner(&self, other: &SplineFn, kf: usize, kg: usize) -> Result<f64> {
        self.space.check_order(kf)?;
        self.space.check_order(kg)?;
        let rule = GaussRule::new(self.space.order())?;
        let h = self.space.h();
        let mut sum = 0.0;
        for cell in 0..self.space.cells() {
            for (&t, &w) in rule.points().iter().zip(rule.weights()) {
                sum += w * self.eval_local(cell, t, kf) * other.eval_local(cell, t, kg);
            }
        }
        Ok(sum * h)
    }

    /// `‖f^{(k)}‖` in `L²`, computed exactly per cell.
    pub fn seminorm(&self, k: usize) -> Result<f64> {
        Ok(self.inner(self, k, k)?.max(0.0).sqrt())
    }

    pub fn l2(&self) -> f64 {
        self.seminorm(0).unwrap_or(0.0)
    }

    /// Full `H¹` norm `(‖f‖² + ‖f'‖²)^{1/2}`; zero-derivative splines (r = 1) do not exist here.
    pub fn h1(&self) -> f64 {
        let a = self.seminorm(0).unwrap_or(0.0);
        let b = self.seminorm(1).unwrap_or(0.0);
        (a * a + b * b).sqrt()
    }

    /// Sup of `|f^{(k)}|` over knots plus `SUP_SAMPLES_PER_CELL` points per cell.
    pub fn sup(&self, k: usize) -> Result<f64> {
        self.space.check_order(k)?;
        let mut m = 0.0f64;
        for cell in 0..self.space.cells() {
            for s in 0..=SUP_SAMPLES_PER_CELL {
                let t = s as f64 / SUP_SAMPLES_PER_CELL as f64;
                m = m.max(self.eval_local(cell, t, k).abs());
            }
        }
        Ok(m)
    }

    /// Minimum over knots and sampled points, with its location.
    pub fn sampled_min(&self) -> (f64, f64) {
        let h = self.space.h();
        let mut best = (f64::INFINITY, 0.0);
        for cell in 0..self.space.cells() {
            for s in 0..=SUP_SAMPLES_PER_CELL {
                let t = s as f64 / SUP_SAMPLES_PER_CELL as f64;
                let v = self.eval_local(cell, t, 0);
                if v < best.0 {
                    best = (v, (cell as f64 + t) * h);
                }
            }
        }
        best
    }

    pub fn norms(&self) -> Norms {
        let w1 = self.sup(1).unwrap_or(0.0);
        let linf = self.sup(0).unwrap_or(0.0);
        Norms {
            l2: self.l2(),
            h1: self.h1(),
            linf,
            w1inf: linf.max(w1),
        }
    }
}

impl Add for &SplineFn {
    type Output = SplineFn;

    fn add(self, rhs: &SplineFn) -> SplineFn {
        assert_eq!(self.space, rhs.space, "splines from different spaces");
        SplineFn {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SplineFn {
    type Output = SplineFn;

    fn sub(self, rhs: &SplineFn) -> SplineFn {
        assert_eq!(self.space, rhs.space, "splines from different spaces");
        SplineFn {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cox–de Boor on an explicit periodic knot sequence, kept apart from the piece tables.
    fn cox_de_boor(knots: &[f64], i: usize, k: usize, x: f64) -> f64 {
        if k == 1 {
            return if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + k - 1] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(knots, i, k - 1, x);
        }
        let d2 = knots[i + k] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + k] - x) / d2 * cox_de_boor(knots, i + 1, k - 1, x);
        }
        v
    }

    fn brute_basis(r: usize, n: usize, j: usize, x: f64) -> f64 {
        // support starts at knot j - r/2; sum over periodic images
        let h = 1.0 / n as f64;
        let start = j as f64 - (r / 2) as f64;
        let knots: Vec<f64> = (0..=r).map(|i| (start + i as f64) * h).collect();
        (-2..=2)
            .map(|shift| cox_de_boor(&knots, 0, r, x + shift as f64))
            .sum()
    }

    #[test]
    fn build_space_checks() {
        let s = SplineSpace::new(3, 16).unwrap();
        assert_eq!(s.h(), 0.0625);
        assert_eq!(s.dim(), 16);
        assert!(SplineSpace::new(4, 13).is_ok());
        assert!(SplineSpace::new(4, 12).is_err());
        assert!(SplineSpace::new(1, 40).is_err());
        let lin = SplineSpace::new(2, 9).unwrap();
        assert_eq!(lin.dim(), 9);
        for n in [17, 33, 100, 1000] {
            let s = SplineSpace::new(3, n).unwrap();
            assert!((s.h() * n as f64 - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn constant_spline_values() {
        let s = SplineSpace::new(4, 20).unwrap();
        let one = s.constant(1.0);
        assert!((one.eval(0.37, 0).unwrap() - 1.0).abs() < 1e-14);
        assert!(one.eval(0.37, 1).unwrap().abs() < 1e-11);
        assert!(matches!(
            one.eval(0.37, 4),
            Err(Error::DerivativeOrder { order: 4, .. })
        ));
    }

    #[test]
    fn single_basis_matches_cox_de_boor() {
        for (r, n) in [(2, 9), (3, 16), (4, 16), (5, 20)] {
            let s = SplineSpace::new(r, n).unwrap();
            for j in [0, 3, n - 1] {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                let f = s.from_coeffs(c).unwrap();
                for i in 0..4 * n {
                    let x = i as f64 / (4 * n) as f64 + 1e-3 / n as f64;
                    let got = f.eval(x, 0).unwrap();
                    let want = brute_basis(r, n, j, x);
                    assert!((got - want).abs() < 1e-13, "r={r} j={j} x={x}");
                }
                // at knots (right-continuous Cox–de Boor agrees because r >= 2 is continuous)
                for i in 0..n {
                    let x = i as f64 / n as f64;
                    assert!((f.eval(x, 0).unwrap() - brute_basis(r, n, j, x)).abs() < 1e-13);
                }
            }
        }
        // quadratic B-spline takes 1/2 at its interior knots
        let s = SplineSpace::new(3, 16).unwrap();
        let mut c = vec![0.0; 16];
        c[5] = 1.0;
        let f = s.from_coeffs(c).unwrap();
        assert!((f.eval(s.node(5), 0).unwrap() - 0.5).abs() < 1e-14);
        assert!((f.eval(s.node(6), 0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in 2..=6 {
            let n = 4 * r + 3;
            let s = SplineSpace::new(r, n).unwrap();
            for _ in 0..1000 {
                let x: f64 = rng.gen();
                let sum: f64 = (0..n).map(|j| s.basis(j, x, 0).unwrap()).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothness_across_knots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in 3..=6 {
            let n = 4 * r + 1;
            let s = SplineSpace::new(r, n).unwrap();
            let f = s.from_coeffs((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            for cell in 0..n {
                let next = (cell + 1) % n;
                for k in 0..=r - 2 {
                    let left = f.eval_local(cell, 1.0, k);
                    let right = f.eval_local(next, 0.0, k);
                    let scale = left.abs().max(right.abs()).max(1.0);
                    assert!((left - right).abs() <= 1e-9 * scale, "r={r} k={k}");
                }
            }
        }
    }

    #[test]
    fn norms_of_simple_splines() {
        let s = SplineSpace::new(3, 16).unwrap();
        let n = s.constant(1.0).norms();
        assert!((n.l2 - 1.0).abs() < 1e-14);
        assert!((n.h1 - 1.0).abs() < 1e-12);
        assert!((n.linf - 1.0).abs() < 1e-14);
        let z = s.zero().norms();
        assert_eq!((z.l2, z.h1, z.linf, z.w1inf), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn inverse_property_ratio_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = Vec::new();
        for n in [16, 32, 64, 128] {
            let s = SplineSpace::new(3, n).unwrap();
            let mut m = 0.0f64;
            for _ in 0..10 {
                let f = s
                    .from_coeffs((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap();
                m = m.max(f.h1() * s.h() / f.l2());
            }
            worst.push(m);
        }
        let hi = worst.iter().cloned().fold(0.0, f64::max);
        let lo = worst.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 2.0, "{worst:?}");
    }

    proptest! {
        #[test]
        fn periodic_evaluation(seed in 0u64..1000, x in 0.0f64..1.0, r in 2usize..6) {
            let n = 4 * r + 5;
            let s = SplineSpace::new(r, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = s.from_coeffs((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            for k in 0..r {
                let a = f.eval(x, k).unwrap();
                let b = f.eval(x + 1.0, k).unwrap();
                let c = f.eval(x - 3.0, k).unwrap();
                let scale = s.h().powi(-(k as i32)) * 1e-12;
                prop_assert!((a - b).abs() <= scale.max(1e-12));
                prop_assert!((a - c).abs() <= scale.max(1e-12));
            }
        }
    }
}
