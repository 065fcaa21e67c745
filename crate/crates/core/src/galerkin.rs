//! Galerkin assembly on a spline space: loads, weighted Gram matrices, and the
//! operators `P_h` (L² projection) and `F_h` with `(F_h v, φ) = (1/3)(v, φ')`.
//!
//! All assembly runs over a fixed composite Gauss rule. Coefficient functions
//! enter either as closures or as precomputed values at the quadrature points
//! (`quad_points()`, cell-major order), which is what the time steppers use.

use crate::banded::{BandedCyclicMatrix, CyclicLu};
use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::spline::{SplineFn, SplineSpace};

/// Factor in front of the dispersive forms.
pub const DISPERSION: f64 = 1.0 / 3.0;

/// Default number of Gauss points per cell for order `r`.
pub fn default_quad_points(r: usize) -> usize {
    r + 2
}

#[derive(Debug, Clone)]
pub struct Galerkin {
    space: SplineSpace,
    rule: GaussRule,
    /// Physical quadrature points, cell-major.
    points: Vec<f64>,
    /// Weights scaled by `h`.
    weights: Vec<f64>,
    /// `tables[k][m][p]`: `k`-th x-derivative of piece `m` at reference point `p`.
    tables: Vec<Vec<Vec<f64>>>,
    mass: BandedCyclicMatrix,
    mass_lu: CyclicLu,
}

impl Galerkin {
    pub fn new(space: &SplineSpace, q: usize) -> Result<Self> {
        let rule = GaussRule::new(q)?;
        let h = space.h();
        let n = space.cells();
        let mut points = Vec::with_capacity(n * q);
        let mut weights = Vec::with_capacity(n * q);
        for c in 0..n {
            for (&t, &w) in rule.points().iter().zip(rule.weights()) {
                points.push((c as f64 + t) * h);
                weights.push(w * h);
            }
        }
        let tables = (0..space.order())
            .map(|k| space.tabulate(rule.points(), k))
            .collect::<Result<Vec<_>>>()?;
        let mut g = Self {
            space: space.clone(),
            rule,
            points,
            weights,
            tables,
            mass: BandedCyclicMatrix::identity(1),
            mass_lu: BandedCyclicMatrix::identity(1).factor()?,
        };
        let ones = vec![1.0; g.points.len()];
        g.mass = g.bilinear_values(&ones, 0, 0, 1.0)?;
        g.mass_lu = g.mass.factor()?;
        Ok(g)
    }

    pub fn with_default_rule(space: &SplineSpace) -> Result<Self> {
        Self::new(space, default_quad_points(space.order()))
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    pub fn quad_points(&self) -> &[f64] {
        &self.points
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> &BandedCyclicMatrix {
        &self.mass
    }

    pub fn mass_factor(&self) -> &CyclicLu {
        &self.mass_lu
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k >= self.space.order() {
            return Err(Error::DerivativeOrder {
                order: k,
                spline_order: self.space.order(),
            });
        }
        Ok(())
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got,
            });
        }
        Ok(())
    }

    /// Evaluates `f` at every quadrature point.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points.iter().map(|&x| f(x)).collect()
    }

    /// `k`-th derivative of the spline with coefficients `coeffs` at every quadrature point.
    pub fn values(&self, coeffs: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_order(k)?;
        if coeffs.len() != self.space.dim() {
            return Err(Error::LengthMismatch {
                expected: self.space.dim(),
                got: coeffs.len(),
            });
        }
        let q = self.rule.len();
        let r = self.space.order();
        let table = &self.tables[k];
        let mut out = vec![0.0; self.points.len()];
        for c in 0..self.space.cells() {
            for m in 0..r {
                let a = coeffs[self.space.active_index(c, m)];
                let row = &table[m];
                for p in 0..q {
                    out[c * q + p] += a * row[p];
                }
            }
        }
        Ok(out)
    }

    /// Load vector `ℓ_i = ∫ v B_i^{(k)}` from values of `v` at the quadrature points.
    pub fn load_values(&self, vals: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_order(k)?;
        self.check_len(vals.len())?;
        let q = self.rule.len();
        let r = self.space.order();
        let table = &self.tables[k];
        let mut out = vec![0.0; self.space.dim()];
        for c in 0..self.space.cells() {
            for m in 0..r {
                let row = &table[m];
                let mut s = 0.0;
                for p in 0..q {
                    let idx = c * q + p;
                    s += self.weights[idx] * vals[idx] * row[p];
                }
                out[self.space.active_index(c, m)] += s;
            }
        }
        Ok(out)
    }

    pub fn load(&self, f: impl Fn(f64) -> f64, k: usize) -> Result<Vec<f64>> {
        self.load_values(&self.sample(f), k)
    }

    /// Matrix with entries `scale ∫ w B_j^{(kj)} B_i^{(ki)}` (row `i`, column `j`).
    /// With `ki == kj` the local matrices are mirrored so the result is exactly symmetric.
    pub fn bilinear_values(
        &self,
        w: &[f64],
        ki: usize,
        kj: usize,
        scale: f64,
    ) -> Result<BandedCyclicMatrix> {
        self.check_order(ki)?;
        self.check_order(kj)?;
        self.check_len(w.len())?;
        let q = self.rule.len();
        let r = self.space.order();
        let mut a = BandedCyclicMatrix::zeros(self.space.dim(), self.space.bandwidth())?;
        let ti = &self.tables[ki];
        let tj = &self.tables[kj];
        let mut local = vec![0.0; r * r];
        for c in 0..self.space.cells() {
            let wc = &w[c * q..(c + 1) * q];
            let qw = &self.weights[c * q..(c + 1) * q];
            for mi in 0..r {
                let start = if ki == kj { mi } else { 0 };
                for mj in start..r {
                    let mut s = 0.0;
                    for p in 0..q {
                        s += qw[p] * wc[p] * ti[mi][p] * tj[mj][p];
                    }
                    local[mi * r + mj] = scale * s;
                    if ki == kj {
                        local[mj * r + mi] = scale * s;
                    }
                }
            }
            for mi in 0..r {
                let i = self.space.active_index(c, mi);
                for mj in 0..r {
                    let j = self.space.active_index(c, mj);
                    a.add(i, j, local[mi * r + mj]);
                }
            }
        }
        Ok(a)
    }

    /// `∫ w B_j B_i`; with `w ≡ 1` this is the mass matrix.
    pub fn weighted_mass(&self, w: impl Fn(f64) -> f64) -> Result<BandedCyclicMatrix> {
        self.bilinear_values(&self.sample(w), 0, 0, 1.0)
    }

    /// `(1/3) ∫ w B_j' B_i'`.
    pub fn weighted_grad_form(&self, w: impl Fn(f64) -> f64) -> Result<BandedCyclicMatrix> {
        self.bilinear_values(&self.sample(w), 1, 1, DISPERSION)
    }

    pub fn weighted_mass_values(&self, w: &[f64]) -> Result<BandedCyclicMatrix> {
        self.bilinear_values(w, 0, 0, 1.0)
    }

    pub fn weighted_grad_form_values(&self, w: &[f64]) -> Result<BandedCyclicMatrix> {
        self.bilinear_values(w, 1, 1, DISPERSION)
    }

    /// Coefficients `c` solving `M c = ℓ`.
    pub fn mass_solve(&self, load: &[f64]) -> Result<Vec<f64>> {
        self.mass_lu.solve(load)
    }

    /// `P_h f` from values of `f` at the quadrature points.
    pub fn project_values(&self, vals: &[f64]) -> Result<SplineFn> {
        let c = self.mass_solve(&self.load_values(vals, 0)?)?;
        self.space.from_coeffs(c)
    }

    /// L² projection onto the spline space.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Result<SplineFn> {
        self.project_values(&self.sample(f))
    }

    /// Load of `F_h`: `ℓ_i = (1/3) ∫ v B_i'`.
    pub fn grad_load_values(&self, vals: &[f64]) -> Result<Vec<f64>> {
        let mut l = self.load_values(vals, 1)?;
        l.iter_mut().for_each(|x| *x *= DISPERSION);
        Ok(l)
    }

    /// `F_h v` from values of `v` at the quadrature points.
    pub fn f_h_values(&self, vals: &[f64]) -> Result<SplineFn> {
        let c = self.mass_solve(&self.grad_load_values(vals)?)?;
        self.space.from_coeffs(c)
    }

    /// `F_h v`, the representer of `φ ↦ (1/3)(v, φ')`.
    pub fn f_h(&self, v: impl Fn(f64) -> f64) -> Result<SplineFn> {
        self.f_h_values(&self.sample(v))
    }

    /// `‖v‖` for values at the quadrature points.
    pub fn l2_of_values(&self, vals: &[f64]) -> f64 {
        vals.iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `L²` norm of a spline through the mass matrix.
    pub fn l2_of_coeffs(&self, coeffs: &[f64]) -> f64 {
        self.mass.form(coeffs, coeffs).max(0.0).sqrt()
    }

    /// `∫ v` for values at the quadrature points.
    pub fn integrate_values(&self, vals: &[f64]) -> f64 {
        vals.iter().zip(&self.weights).map(|(v, w)| w * v).sum()
    }
}
