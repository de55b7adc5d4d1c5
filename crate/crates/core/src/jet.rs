//! Truncated power series in the coupling, with complex coefficients, and
//! the trigonometric functions of such series needed by the perturbative
//! expansion.

use num_complex::Complex64 as C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `sum_k c_k eps^k`, `k <= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<C64>);

impl Jet {
    pub fn zero(order: usize) -> Self {
        Self(vec![C64::default(); order + 1])
    }

    pub fn constant(order: usize, c: C64) -> Self {
        let mut j = Self::zero(order);
        j.0[0] = c;
        j
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.0.get(k).copied().unwrap_or_default()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.iter().map(|a| a * s).collect())
    }

    pub fn add_assign_scaled(&mut self, o: &Self, s: C64) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += s * b;
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.0.len();
        let mut out = vec![C64::default(); n];
        for (i, a) in self.0.iter().enumerate() {
            if *a == C64::default() {
                continue;
            }
            for (j, b) in o.0[..n - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self(out)
    }

    /// Multiplication by `eps`.
    pub fn shift(&self) -> Self {
        let n = self.0.len();
        let mut out = vec![C64::default(); n];
        out[1..].copy_from_slice(&self.0[..n - 1]);
        Self(out)
    }

    /// `exp` through `E' = E J'`: `E_n = (1/n) sum_{k=1}^n k J_k E_{n-k}`.
    pub fn exp(&self) -> Self {
        let n = self.0.len();
        let mut e = vec![C64::default(); n];
        e[0] = self.0[0].exp();
        for m in 1..n {
            let mut s = C64::default();
            for k in 1..=m {
                s += k as f64 * self.0[k] * e[m - k];
            }
            e[m] = s / m as f64;
        }
        Self(e)
    }

    /// `(exp(s J) - 1)/s` for `J` without constant term, summed exactly:
    /// `sum_{n>=1} s^{n-1} J^n / n!`.
    pub fn expm1_over(&self, s: C64) -> Self {
        debug_assert!(self.0[0] == C64::default(), "expm1_over needs a jet without constant term");
        let mut out = self.clone();
        let mut pw = self.clone();
        let mut fac = 1.0;
        let mut sp = C64::new(1.0, 0.0);
        for n in 2..=self.order() {
            pw = pw.mul(self);
            fac *= n as f64;
            sp *= s;
            out.add_assign_scaled(&pw, sp / fac);
        }
        out
    }
}

/// An angle `c + J` stored as `e^{ic}` and the jet `J` without constant term,
/// so that rational expressions for `e^{ic}` can be used.
#[derive(Clone, Debug)]
pub struct Angle {
    pub e: C64,
    pub j: Jet,
}

impl Angle {
    pub fn new(e: C64, j: Jet) -> Self {
        debug_assert!(j.0[0] == C64::default());
        Self { e, j }
    }

    pub fn real_shift(order: usize, c: f64) -> Self {
        Self { e: C64::from_polar(1.0, c), j: Jet::zero(order) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { e: self.e * o.e, j: self.j.add(&o.j) }
    }

    /// `k` times the angle.
    pub fn times(&self, k: i32) -> Self {
        Self { e: self.e.powi(k), j: self.j.scale(C64::from(k as f64)) }
    }

    pub fn exp_i(&self) -> Jet {
        self.j.scale(I).exp().scale(self.e)
    }

    pub fn exp_mi(&self) -> Jet {
        self.j.scale(-I).exp().scale(self.e.inv())
    }

    pub fn cos(&self) -> Jet {
        self.exp_i().add(&self.exp_mi()).scale(C64::from(0.5))
    }

    pub fn sin(&self) -> Jet {
        self.exp_i().sub(&self.exp_mi()).scale(-0.5 * I)
    }

    /// `[cos(x + z2 beta) - cos x]/z2` without cancellation; `beta` has no
    /// constant term.
    pub fn cos_increment(&self, beta: &Jet, z2: C64) -> Jet {
        let qp = beta.expm1_over(I * z2);
        let qm = beta.expm1_over(-I * z2);
        self.exp_i().mul(&qp).sub(&self.exp_mi().mul(&qm)).scale(0.5 * I)
    }
}
