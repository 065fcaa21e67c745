//! Quasiinterpolation onto the spline space from nodal samples.
//!
//! `Q_h v = Σ_j v(x_j) Φ̃_j`, where each `Φ̃_j = Σ_k c_k B_{j+k}` is a short
//! combination of B-splines given by a mask `c`. The mask is chosen by matching
//! its trigonometric symbol `Σ_k c_k cos((k + s)ξ)` to the reciprocal of the
//! B-spline symbol, `((ξ/2) / sin(ξ/2))^r`, through a prescribed even power of `ξ`.
//! Matching through `ξ^{2(r-1)}` gives the superconvergent mask used by the
//! solver; matching only what polynomial reproduction of degree `r - 1` needs
//! gives the shortest reproducing mask.
//!
//! For odd `r` the B-splines are centered halfway between nodes (`s = 1/2`), so a
//! mask centered on the node pairs offsets `k` and `-1 - k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::SmoothFn;
use crate::galerkin::Galerkin;
use crate::quadrature::MAX_POINTS;
use crate::spline::{SplineFn, SplineSpace};

pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct QiMask {
    order: usize,
    offsets: Vec<i64>,
    coeffs: Vec<f64>,
    shift: f64,
}

impl QiMask {
    /// Mask whose symbol matches through `ξ^{2(r-1)}`; this is the quasiinterpolant
    /// with the superconvergent inner-product properties.
    pub fn derive(r: usize) -> Result<Self> {
        Self::with_conditions(r, r)
    }

    /// Shortest centered mask that reproduces grid samples of polynomials of degree `r - 1`.
    pub fn reproducing(r: usize) -> Result<Self> {
        Self::with_conditions(r, (r - 1) / 2 + 1)
    }

    /// Mask satisfying the first `conditions` even moment conditions.
    pub fn with_conditions(r: usize, conditions: usize) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "quasiinterpolant order must be in 2..={MAX_ORDER}, got {r}"
            )));
        }
        if conditions == 0 {
            return Err(Error::InvalidArgument("need at least one moment condition".into()));
        }
        let shift = if r % 2 == 0 { 0.0 } else { 0.5 };
        let n = conditions;
        let target = reciprocal_symbol_series(r, n);
        // unknown a_p belongs to center d_p = p + shift
        let centers: Vec<f64> = (0..n).map(|p| p as f64 + shift).collect();
        let mult = |p: usize| if p == 0 && shift == 0.0 { 1.0 } else { 2.0 };
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        let mut fact = 1.0;
        for m in 0..n {
            if m > 0 {
                fact *= ((2 * m - 1) * (2 * m)) as f64;
            }
            for p in 0..n {
                a[(m, p)] = mult(p) * centers[p].powi(2 * m as i32);
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            b[m] = sign * fact * target[m];
        }
        let lu = a.clone().lu();
        let mut sol = lu.solve(&b).ok_or(Error::Singular {
            pivot: 0.0,
            index: 0,
        })?;
        // one step of iterative refinement; the moment matrix is Vandermonde-like
        let res = &b - &a * &sol;
        if let Some(corr) = lu.solve(&res) {
            sol += corr;
        }
        let mut offsets = Vec::new();
        let mut coeffs = Vec::new();
        if shift == 0.0 {
            for k in -(n as i64 - 1)..=(n as i64 - 1) {
                offsets.push(k);
                coeffs.push(sol[k.unsigned_abs() as usize]);
            }
        } else {
            for k in -(n as i64)..=(n as i64 - 1) {
                // center k + 1/2 pairs with -1 - k
                let p = if k >= 0 { k } else { -1 - k } as usize;
                offsets.push(k);
                coeffs.push(sol[p]);
            }
        }
        Ok(Self {
            order: r,
            offsets,
            coeffs,
            shift,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Offset of basis centers from nodes, in units of `h`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `c` at offset `k` (zero outside the stencil).
    pub fn coeff(&self, k: i64) -> f64 {
        self.offsets
            .iter()
            .position(|&o| o == k)
            .map_or(0.0, |i| self.coeffs[i])
    }

    /// Symmetry about the node: `c_k = c_{-k - 2s}`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let twice = (2.0 * self.shift) as i64;
        self.offsets
            .iter()
            .zip(&self.coeffs)
            .all(|(&k, &c)| (c - self.coeff(-k - twice)).abs() <= tol)
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Symbol `Σ_k c_k cos((k + s) ξ)`.
    pub fn symbol(&self, xi: f64) -> f64 {
        self.offsets
            .iter()
            .zip(&self.coeffs)
            .map(|(&k, &c)| c * ((k as f64 + self.shift) * xi).cos())
            .sum()
    }

    /// Coefficients of `Q_h v` from samples `v(x_j)`, `j = 0..N-1` (cyclic convolution).
    pub fn apply_coeffs(&self, samples: &[f64]) -> Vec<f64> {
        let n = samples.len() as i64;
        (0..n)
            .map(|i| {
                self.offsets
                    .iter()
                    .zip(&self.coeffs)
                    .map(|(&k, &c)| c * samples[(i - k).rem_euclid(n) as usize])
                    .sum()
            })
            .collect()
    }

    /// `Σ_k c_k y_{i+k}`: pairing of a load vector `y_j = (f, B_j)` with `Φ̃_i`.
    pub fn pair_coeffs(&self, y: &[f64], i: usize) -> f64 {
        let n = y.len() as i64;
        self.offsets
            .iter()
            .zip(&self.coeffs)
            .map(|(&k, &c)| c * y[(i as i64 + k).rem_euclid(n) as usize])
            .sum()
    }

    /// `Q_h` applied to nodal samples.
    pub fn apply(&self, space: &SplineSpace, samples: &[f64]) -> Result<SplineFn> {
        if samples.len() != space.dim() {
            return Err(Error::LengthMismatch {
                expected: space.dim(),
                got: samples.len(),
            });
        }
        self.check_space(space)?;
        space.from_coeffs(self.apply_coeffs(samples))
    }

    /// `Q_h f` for a function given pointwise.
    pub fn interpolate(&self, space: &SplineSpace, f: impl Fn(f64) -> f64) -> Result<SplineFn> {
        let samples: Vec<f64> = (0..space.dim()).map(|j| f(space.node(j))).collect();
        self.apply(space, &samples)
    }

    /// The dual basis function `Φ̃_i` as a spline.
    pub fn dual(&self, space: &SplineSpace, i: usize) -> Result<SplineFn> {
        self.check_space(space)?;
        let n = space.dim() as i64;
        let mut c = vec![0.0; space.dim()];
        for (&k, &v) in self.offsets.iter().zip(&self.coeffs) {
            c[(i as i64 + k).rem_euclid(n) as usize] += v;
        }
        space.from_coeffs(c)
    }

    fn check_space(&self, space: &SplineSpace) -> Result<()> {
        if space.order() != self.order {
            return Err(Error::InvalidArgument(format!(
                "mask of order {} used on a space of order {}",
                self.order,
                space.order()
            )));
        }
        if self.len() > space.dim() {
            return Err(Error::InvalidArgument(format!(
                "mask with {} taps longer than the space dimension {}",
                self.len(),
                space.dim()
            )));
        }
        Ok(())
    }
}

/// First `n` even Taylor coefficients (in `ξ`) of `((ξ/2) / sin(ξ/2))^r`.
fn reciprocal_symbol_series(r: usize, n: usize) -> Vec<f64> {
    // sin(x)/x = Σ (-1)^m x^{2m} / (2m+1)!, as a series in x².
    let mut sinc = vec![0.0; n];
    let mut fact = 1.0;
    for (m, s) in sinc.iter_mut().enumerate() {
        if m > 0 {
            fact *= ((2 * m) * (2 * m + 1)) as f64;
        }
        *s = if m % 2 == 0 { 1.0 } else { -1.0 } / fact;
    }
    let mut pow = vec![0.0; n];
    pow[0] = 1.0;
    for _ in 0..r {
        pow = series_mul(&pow, &sinc);
    }
    let inv = series_inv(&pow);
    // substitute x = ξ/2: coefficient of ξ^{2m} picks up 4^{-m}
    inv.iter()
        .enumerate()
        .map(|(m, c)| c / 4f64.powi(m as i32))
        .collect()
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn series_inv(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    out[0] = 1.0 / a[0];
    for k in 1..n {
        let s: f64 = (1..=k).map(|i| a[i] * out[k - i]).sum();
        out[k] = -s / a[0];
    }
    out
}

/// Numerical probes of the superconvergence properties of `Q_h`.
///
/// Inner products against `Φ̃_i` reduce to load vectors against B-splines, which
/// are computed with a high-order rule so that spline-spline products are exact
/// and smooth-times-spline products are resolved far below the probed orders.
#[derive(Debug, Clone)]
pub struct QiProbe {
    mask: QiMask,
    galerkin: Galerkin,
}

impl QiProbe {
    pub fn new(space: &SplineSpace, mask: QiMask) -> Result<Self> {
        mask.check_space(space)?;
        let q = (2 * space.order() + 8).min(MAX_POINTS);
        Ok(Self {
            mask,
            galerkin: Galerkin::new(space, q)?,
        })
    }

    pub fn space(&self) -> &SplineSpace {
        self.galerkin.space()
    }

    pub fn mask(&self) -> &QiMask {
        &self.mask
    }

    fn check_orders(&self, nu: usize, kappa: usize) -> Result<()> {
        let r = self.space().order();
        if nu + kappa > r - 1 {
            return Err(Error::DerivativeOrder {
                order: nu + kappa,
                spline_order: r,
            });
        }
        Ok(())
    }

    pub fn interpolate(&self, f: &dyn SmoothFn) -> Result<SplineFn> {
        self.mask.interpolate(self.space(), |x| f.value(x))
    }

    /// `max_i |((Q_h w)^{(ν)}, Φ̃_i^{(κ)}) - (-1)^κ h w^{(ν+κ)}(x_i)|`.
    pub fn superconvergence(&self, w: &dyn SmoothFn, nu: usize, kappa: usize) -> Result<f64> {
        self.check_orders(nu, kappa)?;
        let sp = self.space();
        let qw = self.interpolate(w)?;
        let vals = self.galerkin.values(qw.coeffs(), nu)?;
        let y = self.galerkin.load_values(&vals, kappa)?;
        let sign = if kappa % 2 == 0 { 1.0 } else { -1.0 };
        let h = sp.h();
        Ok((0..sp.dim())
            .map(|i| {
                let lhs = self.mask.pair_coeffs(&y, i);
                (lhs - sign * h * w.deriv(sp.node(i), nu + kappa)).abs()
            })
            .fold(0.0, f64::max))
    }

    /// `max_i |(f (Q_h g)^{(ν)}, Φ̃_i^{(κ)}) - (-1)^κ (Q_h[(f g^{(ν)})^{(κ)}], Φ̃_i)|`.
    pub fn product(
        &self,
        f: &dyn SmoothFn,
        g: &dyn SmoothFn,
        nu: usize,
        kappa: usize,
    ) -> Result<f64> {
        self.check_orders(nu, kappa)?;
        let sp = self.space();
        let gal = &self.galerkin;
        let qg = self.interpolate(g)?;
        let dqg = gal.values(qg.coeffs(), nu)?;
        let vals: Vec<f64> = gal
            .quad_points()
            .iter()
            .zip(&dqg)
            .map(|(&x, d)| f.value(x) * d)
            .collect();
        let y1 = gal.load_values(&vals, kappa)?;

        // (f g^{(ν)})^{(κ)} by the Leibniz rule
        let target = |x: f64| {
            let mut binom = 1.0;
            let mut s = 0.0;
            for a in 0..=kappa {
                s += binom * f.deriv(x, a) * g.deriv(x, nu + kappa - a);
                binom = binom * (kappa - a) as f64 / (a + 1) as f64;
            }
            s
        };
        let qt = self.mask.interpolate(sp, target)?;
        let y2 = gal.load_values(&gal.values(qt.coeffs(), 0)?, 0)?;
        let sign = if kappa % 2 == 0 { 1.0 } else { -1.0 };
        Ok((0..sp.dim())
            .map(|i| (self.mask.pair_coeffs(&y1, i) - sign * self.mask.pair_coeffs(&y2, i)).abs())
            .fold(0.0, f64::max))
    }

    /// `(‖Q_h v - v‖, ‖(Q_h v - v)'‖)` with the probe's quadrature.
    pub fn error_norms(&self, v: &dyn SmoothFn) -> Result<(f64, f64)> {
        let gal = &self.galerkin;
        let qv = self.interpolate(v)?;
        let v0 = gal.values(qv.coeffs(), 0)?;
        let v1 = gal.values(qv.coeffs(), 1)?;
        let e0: Vec<f64> = gal
            .quad_points()
            .iter()
            .zip(&v0)
            .map(|(&x, q)| q - v.value(x))
            .collect();
        let e1: Vec<f64> = gal
            .quad_points()
            .iter()
            .zip(&v1)
            .map(|(&x, q)| q - v.deriv(x, 1))
            .collect();
        Ok((gal.l2_of_values(&e0), gal.l2_of_values(&e1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TrigPoly;
    use crate::rates::fit_rate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MESHES: [usize; 4] = [16, 32, 64, 128];

    fn slope(values: &[f64]) -> f64 {
        let hs: Vec<f64> = MESHES.iter().map(|&n| 1.0 / n as f64).collect();
        fit_rate(&hs, values).unwrap().slope
    }

    #[test]
    fn linear_mask_is_nodal() {
        let m = QiMask::reproducing(2).unwrap();
        assert_eq!(m.offsets(), &[0]);
        assert!((m.coeffs()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_reproducing_mask_has_three_taps() {
        let m = QiMask::reproducing(4).unwrap();
        assert_eq!(m.offsets(), &[-1, 0, 1]);
        // hand solve: c0 + 2c1 = 1, c1 = -1/6 (symbol of the cubic B-spline is 1 - ξ²/6 + ...)
        assert!((m.coeff(1) + 1.0 / 6.0).abs() < 1e-14);
        assert!((m.coeff(0) - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn derived_masks_hand_checked() {
        // r = 2: symbol target 1 + ξ²/12 → c1 = -1/12, c0 = 7/6
        let m = QiMask::derive(2).unwrap();
        assert_eq!(m.offsets(), &[-1, 0, 1]);
        assert!((m.coeff(1) + 1.0 / 12.0).abs() < 1e-14);
        assert!((m.coeff(0) - 7.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn masks_sum_to_one_and_are_symmetric() {
        for r in 2..=MAX_ORDER {
            for m in [QiMask::derive(r).unwrap(), QiMask::reproducing(r).unwrap()] {
                assert!((m.sum() - 1.0).abs() < 1e-13, "r={r}: {}", m.sum());
                assert!(m.is_symmetric(0.0));
                assert!((m.symbol(0.0) - 1.0).abs() < 1e-13);
            }
            assert_eq!(QiMask::derive(r).unwrap().len(), 2 * r - 1 + r % 2);
        }
        assert!(QiMask::derive(1).is_err());
        assert!(QiMask::derive(9).is_err());
    }

    #[test]
    fn constants_reproduced() {
        let s = SplineSpace::new(3, 20).unwrap();
        let m = QiMask::derive(3).unwrap();
        let one = m.apply(&s, &[1.0; 20]).unwrap();
        assert!(one.coeffs().iter().all(|c| (c - 1.0).abs() < 1e-13));
        assert!(matches!(
            m.apply(&s, &[1.0; 19]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn polynomial_reproduction_away_from_seam() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for r in 2..=6 {
            let s = SplineSpace::new(r, 128).unwrap();
            for m in [QiMask::derive(r).unwrap(), QiMask::reproducing(r).unwrap()] {
                for deg in 0..r {
                    let p = |x: f64| (x - 0.4).powi(deg as i32) + 0.5;
                    let q = m.interpolate(&s, p).unwrap();
                    for _ in 0..200 {
                        let x = rng.gen_range(0.1..0.9);
                        let err = (q.eval(x, 0).unwrap() - p(x)).abs();
                        assert!(err < 1e-10, "r={r} deg={deg} x={x}: {err}");
                    }
                    // literal exactness at the nodes
                    for j in 13..115 {
                        let x = s.node(j);
                        assert!((q.eval(x, 0).unwrap() - p(x)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn accuracy_orders() {
        let v = TrigPoly::sin(1, 1.0);
        let mut l2 = Vec::new();
        let mut h1 = Vec::new();
        for &n in &MESHES {
            let s = SplineSpace::new(3, n).unwrap();
            let p = QiProbe::new(&s, QiMask::derive(3).unwrap()).unwrap();
            let (e0, e1) = p.error_norms(&v).unwrap();
            l2.push(e0);
            h1.push((e0 * e0 + e1 * e1).sqrt());
        }
        assert!((slope(&l2) - 3.0).abs() <= 0.25, "{}", slope(&l2));
        assert!((slope(&h1) - 2.0).abs() <= 0.25, "{}", slope(&h1));
    }

    #[test]
    fn linear_quasiinterpolant_order_two() {
        let v = TrigPoly::sin(1, 1.0);
        let errs: Vec<f64> = MESHES
            .iter()
            .map(|&n| {
                let s = SplineSpace::new(2, n).unwrap();
                let p = QiProbe::new(&s, QiMask::derive(2).unwrap()).unwrap();
                p.error_norms(&v).unwrap().0
            })
            .collect();
        assert!((slope(&errs) - 2.0).abs() <= 0.25);
    }

    #[test]
    fn superconvergence_of_constants_is_exact() {
        let s = SplineSpace::new(3, 16).unwrap();
        let p = QiProbe::new(&s, QiMask::derive(3).unwrap()).unwrap();
        let one = TrigPoly::constant(1.0);
        assert!(p.superconvergence(&one, 0, 0).unwrap() < 1e-12);
        assert!(p.product(&one, &one, 0, 0).unwrap() < 1e-12);
        assert!(matches!(
            p.superconvergence(&one, 2, 1),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn superconvergence_slopes() {
        let w = TrigPoly::sin(1, 1.0);
        for (nu, kappa) in [(0, 0), (0, 1)] {
            let b: Vec<f64> = MESHES
                .iter()
                .map(|&n| {
                    let s = SplineSpace::new(3, n).unwrap();
                    let p = QiProbe::new(&s, QiMask::derive(3).unwrap()).unwrap();
                    p.superconvergence(&w, nu, kappa).unwrap()
                })
                .collect();
            let sl = slope(&b);
            assert!((sl - 7.0).abs() <= 0.5, "({nu},{kappa}): {sl} {b:?}");
        }
    }

    #[test]
    fn product_slopes() {
        let f = TrigPoly::cos(1, 1.0).plus_constant(2.0);
        let g = TrigPoly::sin(1, 1.0);
        let run = |r: usize, f: &TrigPoly, g: &TrigPoly, nu, kappa| -> Vec<f64> {
            MESHES
                .iter()
                .map(|&n| {
                    let s = SplineSpace::new(r, n).unwrap();
                    let p = QiProbe::new(&s, QiMask::derive(r).unwrap()).unwrap();
                    p.product(f, g, nu, kappa).unwrap()
                })
                .collect()
        };
        let b = run(3, &f, &g, 0, 0);
        assert!((slope(&b) - 7.0).abs() <= 0.5, "{b:?}");
        let b = run(4, &g, &g, 1, 1);
        assert!((slope(&b) - 9.0).abs() <= 0.6, "{b:?}");
    }

    #[test]
    fn sup_norm_stability_and_depth_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ratios = vec![0.0f64; 5];
        for _ in 0..20 {
            let mut v = TrigPoly::constant(0.0);
            for k in 1..=3 {
                v = v.plus(TrigPoly {
                    constant: 0.0,
                    terms: vec![(k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))],
                });
            }
            let vmax = (0..4000)
                .map(|i| v.value(i as f64 / 4000.0).abs())
                .fold(0.0, f64::max);
            for (l, n) in [16, 32, 64, 128, 256].into_iter().enumerate() {
                let s = SplineSpace::new(3, n).unwrap();
                let q = QiMask::derive(3).unwrap().interpolate(&s, |x| v.value(x)).unwrap();
                ratios[l] = ratios[l].max(q.sup(0).unwrap() / vmax);
            }
        }
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 2.0, "{ratios:?}");

        let v = TrigPoly::sin(1, 0.8).plus(TrigPoly::cos(3, 0.2)).plus_constant(2.0);
        // min v >= 1
        for n in [32, 64, 128] {
            let s = SplineSpace::new(3, n).unwrap();
            let q = QiMask::derive(3).unwrap().interpolate(&s, |x| v.value(x)).unwrap();
            assert!(q.sampled_min().0 >= 0.5);
        }
    }

    #[test]
    fn dual_basis_bound_ratio() {
        // ‖ψ‖ ≤ C h^{-1} max_i |(ψ, Φ̃_i)|: the empirical C stays bounded across meshes
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut consts = Vec::new();
        for n in [16, 32, 64, 128] {
            let s = SplineSpace::new(3, n).unwrap();
            let g = Galerkin::with_default_rule(&s).unwrap();
            let m = QiMask::derive(3).unwrap();
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let psi = s
                    .from_coeffs((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap();
                let y = g.mass().matvec(psi.coeffs());
                let pair = (0..n).map(|i| m.pair_coeffs(&y, i).abs()).fold(0.0, f64::max);
                worst = worst.max(psi.l2() * s.h() / pair);
            }
            consts.push(worst);
        }
        let hi = consts.iter().cloned().fold(0.0, f64::max);
        let lo = consts.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 2.0, "{consts:?}");
    }
}
