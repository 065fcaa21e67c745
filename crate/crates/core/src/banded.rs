//! Banded matrices with periodic wrap-around and their direct solver.
//!
//! A cyclic banded matrix is split as `A = B + U Vᵀ`, where `B` keeps the entries
//! whose column lies inside the ordinary band and `U Vᵀ` carries the wrapped
//! corner entries (one rank per row that wraps). `B` is factored by banded LU with
//! partial pivoting and the corners are folded back in with the Woodbury identity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedCyclicMatrix {
    n: usize,
    bw: usize,
    /// Row-major, `2 bw + 1` entries per row, offset `d = j - i (mod n)` stored at `d + bw`.
    data: Vec<f64>,
}

impl BandedCyclicMatrix {
    pub fn zeros(n: usize, bw: usize) -> Result<Self> {
        if n < 2 * bw + 1 {
            return Err(Error::InvalidArgument(format!(
                "dimension {n} too small for half-bandwidth {bw}"
            )));
        }
        Ok(Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0).expect("n >= 1");
        for i in 0..n {
            m.data[i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Signed cyclic offset of `j` from `i` in `(-n/2, n/2]`.
    #[inline]
    fn offset(&self, i: usize, j: usize) -> isize {
        let n = self.n as isize;
        let mut d = (j as isize - i as isize).rem_euclid(n);
        if d > n / 2 {
            d -= n;
        }
        d
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let d = self.offset(i, j);
        if d.unsigned_abs() > self.bw {
            None
        } else {
            Some(i * (2 * self.bw + 1) + (d + self.bw as isize) as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)`; panics if `(i, j)` is outside the cyclic band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside cyclic band {}", self.bw));
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside cyclic band {}", self.bw));
        self.data[s] = v;
    }

    /// Entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = 2 * self.bw + 1;
        let n = self.n;
        let bw = self.bw;
        self.data[i * w..(i + 1) * w]
            .iter()
            .enumerate()
            .map(move |(s, &v)| ((i + n + s - bw) % n, v))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Linear combination `a·self + b·other` of matrices with the same pattern size.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = Self::zeros(self.n, bw).expect("valid dimension");
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out.add(i, j, a * v);
            }
            for (j, v) in other.row(i) {
                out.add(i, j, b * v);
            }
        }
        out
    }

    /// Exact entrywise symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Cholesky succeeds on the dense form; used as a positive-definiteness test.
    pub fn is_positive_definite(&self) -> bool {
        self.to_dense().cholesky().is_some()
    }

    pub fn factor(&self) -> Result<CyclicLu> {
        CyclicLu::new(self)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(b)
    }
}

/// Convenience wrapper: factor and solve once.
pub fn solve_banded_cyclic(a: &BandedCyclicMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.solve(b)
}

/// Banded LU with partial pivoting (no wrap-around).
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    bw: usize,
    /// Row storage of width `3 bw + 1` covering columns `i - bw ..= i + 2 bw`.
    u: Vec<f64>,
    /// Multipliers `l[k * bw + (i - k - 1)]`.
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(bw: usize) -> usize {
        3 * bw + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * Self::width(self.bw) + (j + self.bw - i)
    }

    fn new(a: &BandedCyclicMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = Self::width(bw);
        let mut lu = Self {
            n,
            bw,
            u: vec![0.0; n * w],
            l: vec![0.0; n * bw.max(1)],
            piv: vec![0; n],
        };
        let scale = a.inf_norm().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            for j in lo..=hi {
                let idx = lu.at(i, j);
                lu.u[idx] = a.get(i, j);
            }
        }
        for k in 0..n {
            let last = (k + bw).min(n - 1);
            let mut p = k;
            let mut best = lu.u[lu.at(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.u[lu.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Singular { pivot: best, index: k });
            }
            lu.piv[k] = p;
            let right = (k + 2 * bw).min(n - 1);
            if p != k {
                for j in k..=right {
                    let (a_idx, b_idx) = (lu.at(k, j), lu.at(p, j));
                    lu.u.swap(a_idx, b_idx);
                }
            }
            let pivot = lu.u[lu.at(k, k)];
            for i in k + 1..=last {
                let idx = lu.at(i, k);
                let m = lu.u[idx] / pivot;
                lu.u[idx] = 0.0;
                lu.l[k * bw + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=right {
                        let kj = lu.u[lu.at(k, j)];
                        let ij = lu.at(i, j);
                        lu.u[ij] -= m * kj;
                    }
                }
            }
        }
        Ok(lu)
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + bw).min(n - 1) {
                b[i] -= self.l[k * bw + (i - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + 2 * bw).min(n - 1) {
                s -= self.u[self.at(i, j)] * b[j];
            }
            b[i] = s / self.u[self.at(i, i)];
        }
    }
}

/// Factorization of a cyclic banded matrix; immutable and shareable once built.
#[derive(Debug, Clone)]
pub struct CyclicLu {
    n: usize,
    band: BandLu,
    /// Rows that carry wrapped entries, with those entries as `(column, value)`.
    corners: Vec<(usize, Vec<(usize, f64)>)>,
    /// `Z = B⁻¹ U`, one column per corner row.
    z: Vec<Vec<f64>>,
    capacitance: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl CyclicLu {
    pub fn new(a: &BandedCyclicMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let band = BandLu::new(a)?;
        let mut corners = Vec::new();
        for i in 0..n {
            let wrapped: Vec<(usize, f64)> = a
                .row(i)
                .filter(|&(j, v)| v != 0.0 && (i as isize - j as isize).unsigned_abs() > bw)
                .collect();
            if !wrapped.is_empty() {
                corners.push((i, wrapped));
            }
        }
        let m = corners.len();
        let mut z = Vec::with_capacity(m);
        for (row, _) in &corners {
            let mut e = vec![0.0; n];
            e[*row] = 1.0;
            band.solve_in_place(&mut e);
            z.push(e);
        }
        let capacitance = if m > 0 {
            let mut c = DMatrix::<f64>::identity(m, m);
            for (a_idx, (_, entries)) in corners.iter().enumerate() {
                for (b_idx, zc) in z.iter().enumerate() {
                    c[(a_idx, b_idx)] += entries.iter().map(|&(j, v)| v * zc[j]).sum::<f64>();
                }
            }
            let lu = c.lu();
            let diag = lu.u().diagonal();
            let (idx, piv) = diag
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if piv <= 1e-13 {
                return Err(Error::Singular {
                    pivot: piv,
                    index: corners[idx].0,
                });
            }
            Some(lu)
        } else {
            None
        };
        Ok(Self {
            n,
            band,
            corners,
            z,
            capacitance,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut y = b.to_vec();
        self.band.solve_in_place(&mut y);
        if let Some(cap) = &self.capacitance {
            let w = DVector::from_iterator(
                self.corners.len(),
                self.corners
                    .iter()
                    .map(|(_, entries)| entries.iter().map(|&(j, v)| v * y[j]).sum::<f64>()),
            );
            let s = cap.solve(&w).ok_or(Error::Singular {
                pivot: 0.0,
                index: 0,
            })?;
            for (k, zc) in self.z.iter().enumerate() {
                let sk = s[k];
                for (yi, zi) in y.iter_mut().zip(zc) {
                    *yi -= sk * zi;
                }
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, bw: usize, rng: &mut ChaCha8Rng) -> BandedCyclicMatrix {
        let mut a = BandedCyclicMatrix::zeros(n, bw).unwrap();
        for i in 0..n {
            for d in 1..=bw {
                let j = (i + d) % n;
                let v: f64 = rng.gen_range(-1.0..1.0);
                a.add(i, j, v);
                a.add(j, i, v);
            }
        }
        for i in 0..n {
            let off: f64 = a.row(i).map(|(_, v)| v.abs()).sum();
            a.add(i, i, off + rng.gen_range(0.1..1.0));
        }
        a
    }

    fn residual_ok(a: &BandedCyclicMatrix, x: &[f64], b: &[f64]) -> bool {
        let ax = a.matvec(x);
        let r = ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        r <= 1e-10 * (a.inf_norm() * xn + bn)
    }

    #[test]
    fn identity_solve() {
        let a = BandedCyclicMatrix::identity(7);
        let b = vec![1.0, -2.0, 3.5, 0.0, 4.0, 5.0, -1.0];
        assert_eq!(a.solve(&b).unwrap(), b);
    }

    #[test]
    fn matches_dense_lu_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (n, bw) in [(24, 3), (9, 1), (11, 5), (50, 2)] {
            let a = random_spd(n, bw, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = a.solve(&b).unwrap();
            let dense = a.to_dense().lu().solve(&DVector::from_vec(b.clone())).unwrap();
            let scale = dense.amax();
            for i in 0..n {
                assert!((x[i] - dense[i]).abs() <= 1e-9 * scale);
            }
            assert!(residual_ok(&a, &x, &b));
        }
    }

    #[test]
    fn nonsymmetric_needs_pivoting() {
        // zero diagonal forces row exchanges inside the band
        let n = 12;
        let mut a = BandedCyclicMatrix::zeros(n, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..n {
            for d in [-2isize, -1, 1, 2] {
                let j = (i as isize + d).rem_euclid(n as isize) as usize;
                a.add(i, j, rng.gen_range(0.5..2.0));
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = a.solve(&b).unwrap();
        assert!(residual_ok(&a, &x, &b));
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let mut a = BandedCyclicMatrix::zeros(8, 1).unwrap();
        for i in 0..8 {
            a.add(i, i, 2.0);
            a.add(i, (i + 1) % 8, -1.0);
            a.add(i, (i + 7) % 8, -1.0);
        }
        // periodic Laplacian: constants in the kernel
        match a.factor() {
            Err(Error::Singular { pivot, .. }) => assert!(pivot < 1e-10),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn symmetry_and_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(10, 2, &mut rng);
        assert!(a.is_symmetric());
        assert!(a.is_positive_definite());
        assert!(BandedCyclicMatrix::zeros(4, 2).is_err());
        let mut b = a.clone();
        b.add(0, 1, 1e-3);
        assert!(!b.is_symmetric());
    }
}
