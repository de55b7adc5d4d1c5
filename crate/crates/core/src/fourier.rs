//! Finitely supported Fourier series on the d-torus and the diagonal
//! operators the solvers need.
//!
//! Coefficients live in a sparse map keyed by the integer mode vector.
//! Dense views over a fixed [`ModeSet`] are used wherever linear algebra
//! or collocation takes over.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mode = Vec<i32>;

pub fn l1(q: &[i32]) -> i32 {
    q.iter().map(|x| x.abs()).sum()
}

pub fn dot(omega: &[f64], q: &[i32]) -> f64 {
    omega.iter().zip(q).map(|(w, &k)| w * k as f64).sum()
}

/// Rotation vector together with the exponent of its Diophantine bound
/// `|omega.q| > a |q|^-nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub omega: Vec<f64>,
    pub nu: f64,
    #[serde(default = "one")]
    pub a: f64,
}

fn one() -> f64 {
    1.0
}

impl FrequencyVector {
    pub fn new(omega: Vec<f64>, nu: f64, a: f64) -> Self {
        Self { omega, nu, a }
    }

    /// Golden mean for d=1, (1, sqrt 2) for d=2.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => Self::new(vec![(1.0 + 5f64.sqrt()) / 2.0], 1.0, 1.0),
            // (1,0) sits on |omega.q| = 1 exactly, so the constant is relaxed.
            2 => Self::new(vec![1.0, 2f64.sqrt()], 1.0, 0.5),
            _ => Self::new(
                (0..dim).map(|k| ((k + 2) as f64).sqrt().fract() + k as f64).collect(),
                dim as f64,
                0.1,
            ),
        }
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn dot(&self, q: &[i32]) -> f64 {
        dot(&self.omega, q)
    }

    /// Brute-force check over `0 < |q|_1 <= qmax`.
    pub fn check(&self, qmax: i32) -> Result<()> {
        for q in ModeSet::l1_ball(self.dim(), qmax).modes {
            let n = l1(&q);
            if n == 0 {
                continue;
            }
            let v = self.dot(&q).abs();
            if v * (n as f64).powf(self.nu) <= self.a {
                return Err(Error::NonDiophantine { q, value: v });
            }
        }
        Ok(())
    }

    /// Smallest `|omega.q|` over the nonzero modes of `set`.
    pub fn min_divisor(&self, set: &ModeSet) -> f64 {
        set.modes
            .iter()
            .filter(|q| l1(q) > 0)
            .map(|q| self.dot(q).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ordered list of modes `|q|_1 <= kmax`, the index space of every dense
/// coefficient vector.
#[derive(Clone, Debug)]
pub struct ModeSet {
    pub dim: usize,
    pub kmax: i32,
    pub modes: Vec<Mode>,
    index: HashMap<Mode, usize>,
}

impl ModeSet {
    pub fn l1_ball(dim: usize, kmax: i32) -> Self {
        let mut modes = Vec::new();
        let mut q = vec![-kmax; dim];
        loop {
            if l1(&q) <= kmax {
                modes.push(q.clone());
            }
            let mut i = dim;
            loop {
                if i == 0 {
                    let index = modes.iter().cloned().enumerate().map(|(i, q)| (q, i)).collect();
                    return Self { dim, kmax, modes, index };
                }
                i -= 1;
                if q[i] < kmax {
                    q[i] += 1;
                    break;
                }
                q[i] = -kmax;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, q: &[i32]) -> Option<usize> {
        self.index.get(q).copied()
    }

    pub fn zero(&self) -> usize {
        self.index[&vec![0; self.dim]]
    }

    /// Index of `-q` for the mode at index `i`.
    pub fn neg(&self, i: usize) -> usize {
        let q: Mode = self.modes[i].iter().map(|x| -x).collect();
        self.index[&q]
    }

    pub fn to_dense(&self, f: &FourierPoly) -> Vec<C64> {
        self.modes.iter().map(|q| f.coeff(q)).collect()
    }

    pub fn from_dense(&self, v: &[C64]) -> FourierPoly {
        let mut f = FourierPoly::zero(self.dim);
        for (q, &c) in self.modes.iter().zip(v) {
            f.set(q, c);
        }
        f
    }

    /// Multiplication by the function with coefficients `a` as a matrix on
    /// this mode set: `M[p][q] = a(p - q)`.
    pub fn conv_matrix(&self, a: &FourierPoly) -> nalgebra::DMatrix<C64> {
        let n = self.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let d: Mode = self.modes[i].iter().zip(&self.modes[j]).map(|(x, y)| x - y).collect();
            a.coeff(&d)
        })
    }
}

/// Scalar trigonometric polynomial with finite support.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPoly {
    dim: usize,
    coeffs: BTreeMap<Mode, C64>,
}

impl FourierPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, coeffs: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self::monomial(&vec![0; dim], c)
    }

    pub fn monomial(q: &[i32], c: C64) -> Self {
        let mut f = Self::zero(q.len());
        f.set(q, c);
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff(&self, q: &[i32]) -> C64 {
        self.coeffs.get(q).copied().unwrap_or_default()
    }

    pub fn set(&mut self, q: &[i32], c: C64) {
        assert_eq!(q.len(), self.dim, "mode of wrong dimension");
        if c == C64::new(0.0, 0.0) {
            self.coeffs.remove(q);
        } else {
            self.coeffs.insert(q.to_vec(), c);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mode, &C64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|q|_1` in the support, 0 for the zero series.
    pub fn degree(&self) -> i32 {
        self.coeffs.keys().map(|q| l1(q)).max().unwrap_or(0)
    }

    /// Degree counting only coefficients above `tol`.
    pub fn degree_above(&self, tol: f64) -> i32 {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(q, _)| l1(q))
            .max()
            .unwrap_or(0)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (q, &c) in &other.coeffs {
            let v = out.coeff(q) + c;
            out.set(q, v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_modes(|_| s)
    }

    /// Convolution of the coefficient maps.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut acc: BTreeMap<Mode, C64> = BTreeMap::new();
        for (p, a) in &self.coeffs {
            for (q, b) in &other.coeffs {
                let r: Mode = p.iter().zip(q).map(|(x, y)| x + y).collect();
                *acc.entry(r).or_default() += a * b;
            }
        }
        let mut out = Self::zero(self.dim);
        for (q, c) in acc {
            out.set(&q, c);
        }
        Ok(out)
    }

    /// Multiplies each coefficient by a diagonal symbol.
    pub fn map_modes(&self, symbol: impl Fn(&[i32]) -> C64) -> Self {
        let mut out = Self::zero(self.dim);
        for (q, &c) in &self.coeffs {
            out.set(q, c * symbol(q));
        }
        out
    }

    pub fn truncate(&self, kmax: i32) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().filter(|(q, _)| l1(q) <= kmax).map(|(q, c)| (q.clone(), *c)).collect(),
        }
    }

    /// Drops coefficients with modulus below `tol`.
    pub fn chop(&self, tol: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().filter(|(_, c)| c.norm() >= tol).map(|(q, c)| (q.clone(), *c)).collect(),
        }
    }

    /// Point value at a possibly complex angle.
    pub fn eval(&self, theta: &[C64]) -> C64 {
        self.coeffs
            .iter()
            .map(|(q, c)| {
                let a: C64 = q.iter().zip(theta).map(|(&k, t)| t * k as f64).sum();
                c * (C64::i() * a).exp()
            })
            .sum()
    }

    pub fn eval_real(&self, theta: &[f64]) -> C64 {
        let t: Vec<C64> = theta.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.eval(&t)
    }

    /// True when `coeff(-q) = conj coeff(q)` within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|(q, c)| {
            let m: Mode = q.iter().map(|x| -x).collect();
            (self.coeff(&m) - c.conj()).norm() <= tol
        })
    }

    pub fn norm_sigma(&self, sigma: f64) -> f64 {
        self.coeffs.values().zip(self.coeffs.keys()).map(|(c, q)| c.norm() * (sigma * l1(q) as f64).exp()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (q, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            let _ = c;
            m = m.max((self.coeff(q) - other.coeff(q)).norm());
        }
        m
    }

    pub fn to_json(&self) -> Vec<CoeffEntry> {
        self.coeffs.iter().map(|(q, c)| CoeffEntry { q: q.clone(), re: c.re, im: c.im }).collect()
    }

    pub fn from_json(dim: usize, entries: &[CoeffEntry]) -> Result<Self> {
        let mut f = Self::zero(dim);
        for e in entries {
            if e.q.len() != dim {
                return Err(Error::DimMismatch(dim, e.q.len()));
            }
            f.set(&e.q, C64::new(e.re, e.im));
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub q: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

/// A `(Phi, Psi_1..Psi_d)` block of Fourier series.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierBlock {
    pub comps: Vec<FourierPoly>,
}

impl FourierBlock {
    pub fn zero(dim: usize) -> Self {
        Self { comps: vec![FourierPoly::zero(dim); dim + 1] }
    }

    pub fn arity(&self) -> usize {
        self.comps.len()
    }

    pub fn phi(&self) -> &FourierPoly {
        &self.comps[0]
    }

    pub fn psi(&self) -> &[FourierPoly] {
        &self.comps[1..]
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.arity() != other.arity() {
            return Err(Error::ArityMismatch(self.arity(), other.arity()));
        }
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(Self { comps })
    }

    pub fn degree(&self) -> i32 {
        self.comps.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, theta: &[C64]) -> Vec<C64> {
        self.comps.iter().map(|c| c.eval(theta)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

pub fn fp_add(a: &FourierPoly, b: &FourierPoly) -> Result<FourierPoly> {
    a.add(b)
}

pub fn fp_mul(a: &FourierPoly, b: &FourierPoly) -> Result<FourierPoly> {
    a.mul(b)
}

/// `omega . d/dtheta`.
pub fn op_d(omega: &FrequencyVector, f: &FourierPoly) -> FourierPoly {
    f.map_modes(|q| C64::new(0.0, omega.dot(q)))
}

/// `(D^2 - g^2)^-1`; the symbol never drops below `g^2` in modulus.
pub fn op_inv_d2_minus_g2(omega: &FrequencyVector, g: f64, f: &FourierPoly) -> FourierPoly {
    f.map_modes(|q| {
        let k = omega.dot(q);
        C64::new(1.0 / (-k * k - g * g), 0.0)
    })
}

/// `(D + gamma)^-2`.
pub fn op_inv_shifted_sq(omega: &FrequencyVector, gamma: C64, f: &FourierPoly) -> Result<FourierPoly> {
    for (q, _) in f.iter() {
        let s = C64::new(0.0, omega.dot(q)) + gamma;
        if s.norm() < 1e-12 {
            return Err(Error::SmallDivisor { mode: q.clone(), value: s.norm() });
        }
    }
    Ok(f.map_modes(|q| {
        let s = C64::new(0.0, omega.dot(q)) + gamma;
        1.0 / (s * s)
    }))
}

/// `F(theta) -> F(theta + beta)`.
pub fn op_translate(beta: &[C64], f: &FourierPoly) -> FourierPoly {
    f.map_modes(|q| {
        let a: C64 = q.iter().zip(beta).map(|(&k, b)| b * k as f64).sum();
        (C64::i() * a).exp()
    })
}

pub fn norm_sigma(f: &FourierPoly, sigma: f64) -> f64 {
    f.norm_sigma(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn modeset_counts() {
        assert_eq!(ModeSet::l1_ball(1, 12).len(), 25);
        assert_eq!(ModeSet::l1_ball(2, 12).len(), 2 * 144 + 2 * 12 + 1);
        let s = ModeSet::l1_ball(2, 3);
        for i in 0..s.len() {
            assert_eq!(s.neg(s.neg(i)), i);
        }
    }

    #[test]
    fn exponentials_multiply() {
        let q = [2, -1];
        let e = FourierPoly::monomial(&q, c(1.0, 0.0));
        let em = FourierPoly::monomial(&[-2, 1], c(1.0, 0.0));
        assert_eq!(e.mul(&em).unwrap(), FourierPoly::constant(2, c(1.0, 0.0)));
        assert_eq!(e.mul(&e).unwrap(), FourierPoly::monomial(&[4, -2], c(1.0, 0.0)));
    }

    #[test]
    fn add_zero_and_linearity() {
        let a = FourierPoly::monomial(&[3], c(0.5, 1.0));
        assert_eq!(a.add(&FourierPoly::zero(1)).unwrap(), a);
        let b = FourierPoly::monomial(&[3], c(0.25, -1.0));
        assert_eq!(a.add(&b).unwrap().coeff(&[3]), c(0.75, 0.0));
        assert!(a.add(&FourierPoly::zero(2)).is_err());
    }

    #[test]
    fn block_arity_mismatch() {
        let a = FourierBlock::zero(1);
        let b = FourierBlock::zero(2);
        assert!(matches!(a.add(&b), Err(Error::ArityMismatch(2, 3))));
    }

    #[test]
    fn diagonal_operators() {
        let w = FrequencyVector::default_for(1);
        let one = FourierPoly::constant(1, c(3.0, 0.0));
        assert!(op_d(&w, &one).is_empty());
        let e = FourierPoly::monomial(&[2], c(1.0, 0.0));
        assert_eq!(op_d(&w, &e).coeff(&[2]), c(0.0, 2.0 * w.omega[0]));
        let d2 = op_d(&w, &op_d(&w, &e));
        assert_eq!(d2.coeff(&[2]), c(-(2.0 * w.omega[0]).powi(2), 0.0));
        let g = 1.3;
        assert!((op_inv_d2_minus_g2(&w, g, &one).coeff(&[0]) - c(-3.0 / (g * g), 0.0)).norm() < 1e-15);
        let gam = c(1.0, 0.0);
        assert!((op_inv_shifted_sq(&w, gam, &one).unwrap().coeff(&[0]) - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn shifted_square_divisor_magnitude() {
        // |i g + g|^2 = 2 g^2 when omega.q = g
        let g = 1.7;
        let w = FrequencyVector::new(vec![g], 1.0, 1.0);
        let e = FourierPoly::monomial(&[1], c(1.0, 0.0));
        let r = op_inv_shifted_sq(&w, c(g, 0.0), &e).unwrap().coeff(&[1]);
        assert!((1.0 / r.norm() - 2.0 * g * g).abs() < 1e-12);
        let w0 = FrequencyVector::new(vec![1.0], 1.0, 1.0);
        assert!(op_inv_shifted_sq(&w0, c(0.0, -1.0), &e).is_err());
    }

    #[test]
    fn translation_roundtrip() {
        let f = FourierPoly::monomial(&[1, -2], c(0.3, 0.1)).add(&FourierPoly::monomial(&[0, 1], c(-1.0, 0.0))).unwrap();
        let b = [c(0.3, 0.0), c(-1.1, 0.0)];
        let mb = [c(-0.3, 0.0), c(1.1, 0.0)];
        assert!(op_translate(&mb, &op_translate(&b, &f)).max_abs_diff(&f) < 1e-15);
        assert_eq!(op_translate(&[c(0.0, 0.0); 2], &f), f);
        let th = [0.7, 0.2];
        let lhs = op_translate(&b, &f).eval_real(&th);
        let rhs = f.eval_real(&[0.7 + 0.3, 0.2 - 1.1]);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn norms() {
        assert_eq!(FourierPoly::zero(1).norm_sigma(0.3), 0.0);
        assert!((FourierPoly::monomial(&[4], c(3.0, 4.0)).norm_sigma(0.0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn diophantine_defaults() {
        FrequencyVector::default_for(1).check(50).unwrap();
        FrequencyVector::default_for(2).check(50).unwrap();
        assert!(FrequencyVector::new(vec![1.0, 2.0], 1.0, 0.5).check(10).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let f = FourierPoly::monomial(&[1, 2], c(0.1, -0.2));
        let back = FourierPoly::from_json(2, &f.to_json()).unwrap();
        assert_eq!(f, back);
    }
}
