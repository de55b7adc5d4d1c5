//! The unperturbed separatrix `Phi0(z) = 4 atan z` and the Wronskian data
//! behind the inverse of the linearized operator.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn pole_guard(z: C64, what: &str) -> Result<()> {
    if (z * z + 1.0).norm() < 1e-12 {
        return Err(Error::Domain(format!("{what} at z = {z} is a pole (z = +-i)")));
    }
    Ok(())
}

/// `4 atan z`, principal branch.
pub fn phi0(z: C64) -> Result<C64> {
    pole_guard(z, "phi0")?;
    Ok(4.0 * z.atan())
}

/// `sin Phi0(z) = 4z(1 - z^2)/(1 + z^2)^2`, no branch involved.
pub fn sin_phi0(z: C64) -> C64 {
    let w = ONE + z * z;
    4.0 * z * (ONE - z * z) / (w * w)
}

/// `cos Phi0(z) = 1 - 8z^2/(1 + z^2)^2`.
pub fn cos_phi0(z: C64) -> C64 {
    let w = ONE + z * z;
    ONE - 8.0 * z * z / (w * w)
}

/// `z d/dz Phi0 = 4z/(1 + z^2)`.
pub fn euler_phi0(z: C64) -> C64 {
    4.0 * z / (ONE + z * z)
}

/// `(z d/dz)^2 Phi0 = 4z(1 - z^2)/(1 + z^2)^2`.
pub fn euler2_phi0(z: C64) -> C64 {
    sin_phi0(z)
}

/// `T(z, theta) = (1/z, -theta)`.
pub fn time_reversal(z: C64, theta: &[C64]) -> Result<(C64, Vec<C64>)> {
    if z.norm() == 0.0 {
        return Err(Error::Domain("time reversal undefined at z = 0".into()));
    }
    Ok((z.inv(), theta.iter().map(|t| -t).collect()))
}

pub fn p_fn(z: C64) -> C64 {
    z / (ONE + z * z)
}

pub fn q_fn(z: C64) -> C64 {
    z - z.inv()
}

/// The two Wronskian functions `W1 = 2P`, `W2 = (P ln z + Q/4)/gamma` and
/// their pull-backs `u_j(t) = W_j(e^{gamma t})`.
#[derive(Clone, Copy, Debug)]
pub struct Wronskian {
    pub gamma: C64,
}

impl Wronskian {
    pub fn new(gamma: C64) -> Self {
        Self { gamma }
    }

    pub fn w1(&self, z: C64) -> C64 {
        2.0 * p_fn(z)
    }

    pub fn w2(&self, z: C64) -> Result<C64> {
        if z.norm() == 0.0 {
            return Err(Error::Domain("W2 has a pole at z = 0".into()));
        }
        pole_guard(z, "W2")?;
        Ok((p_fn(z) * z.ln() + 0.25 * q_fn(z)) / self.gamma)
    }

    /// `1/cosh(gamma t)`.
    pub fn u1(&self, t: f64) -> C64 {
        (self.gamma * t).cosh().inv()
    }

    /// `t/(2 cosh gamma t) + sinh(gamma t)/(2 gamma)`.
    pub fn u2(&self, t: f64) -> C64 {
        let gt = self.gamma * t;
        0.5 * t / gt.cosh() + 0.5 * gt.sinh() / self.gamma
    }

    pub fn du1(&self, t: f64) -> C64 {
        let gt = self.gamma * t;
        -self.gamma * gt.sinh() / (gt.cosh() * gt.cosh())
    }

    pub fn du2(&self, t: f64) -> C64 {
        let gt = self.gamma * t;
        let c = gt.cosh();
        0.5 / c - 0.5 * t * self.gamma * gt.sinh() / (c * c) + 0.5 * c
    }
}

/// Rotator kernel, identically `-s`.
pub fn k_psi_kernel(s: f64, _z: C64) -> C64 {
    C64::from(-s)
}

/// `K_Phi(s; z) = W2(z) W1(z e^{gamma s}) - W1(z) W2(z e^{gamma s})`.
///
/// With `u = z e^{gamma s}` the logarithms combine to `ln z - ln u =
/// -gamma s`, so the kernel is a rational function of `z^2` and `e^{gamma s}`
/// and no branch of the logarithm is ever chosen. At `z = 0` it reduces to
/// `-sinh(gamma s)/gamma`.
pub fn k_phi_kernel(gamma: C64, s: f64, z: C64) -> Result<C64> {
    let e = (gamma * s).exp();
    let z2 = z * z;
    let a = ONE + z2;
    let b = ONE + z2 * e * e;
    if a.norm() < 1e-6 || b.norm() < 1e-6 {
        return Err(Error::Domain(format!("kernel within 1e-6 of a pole at s = {s}, z = {z}")));
    }
    let pp = z2 * e / (a * b);
    let qp = (z2 - 1.0) * e / b;
    let pq = (z2 * e * e - 1.0) / (a * e);
    Ok((-2.0 * gamma * s * pp + 0.5 * (qp - pq)) / gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::from(x)
    }

    #[test]
    fn phi0_values() {
        assert_eq!(phi0(c(0.0)).unwrap(), c(0.0));
        assert!((phi0(c(1.0)).unwrap() - PI).norm() < 1e-15);
        assert!((phi0(c(2.0)).unwrap() + phi0(c(0.5)).unwrap() - 2.0 * PI).norm() < 1e-14);
        assert!(phi0(C64::new(0.0, 1.0)).is_err());
        let z = C64::new(0.3, 0.2);
        assert!((phi0(-z).unwrap() + phi0(z).unwrap()).norm() < 1e-15);
        let p = phi0(z).unwrap();
        assert!((p.sin() - sin_phi0(z)).norm() < 1e-14);
        assert!((p.cos() - cos_phi0(z)).norm() < 1e-14);
    }

    #[test]
    fn reversal() {
        let (z, th) = time_reversal(c(1.0), &[c(0.0)]).unwrap();
        assert_eq!((z, th[0]), (c(1.0), c(0.0)));
        let (z, th) = time_reversal(c(2.0), &[c(0.7)]).unwrap();
        assert_eq!((z, th[0]), (c(0.5), c(-0.7)));
        let (z2, th2) = time_reversal(z, &th).unwrap();
        assert_eq!((z2, th2[0]), (c(2.0), c(0.7)));
        assert!(time_reversal(c(0.0), &[]).is_err());
    }

    #[test]
    fn wronskian_pair() {
        let w = Wronskian::new(c(1.3));
        assert!((w.u1(0.0) - 1.0).norm() < 1e-15 && w.u2(0.0).norm() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = 1.3f64;
        for _ in 0..20 {
            let t: f64 = rng.gen_range(-3.0..3.0);
            let det = w.u1(t) * w.du2(t) - w.du1(t) * w.u2(t);
            assert!((det - 1.0).norm() < 1e-13, "{det}");
            // u_j(t) = W_j(e^{gamma t})
            let z = c((g * t).exp());
            assert!((w.w1(z) - w.u1(t)).norm() < 1e-14);
            assert!((w.w2(z).unwrap() - w.u2(t)).norm() < 1e-13);
            let h = 1e-4;
            let cphi = 2.0 * (g * t).tanh().powi(2) - 1.0;
            assert!((cos_phi0(z).re - cphi).abs() < 1e-14);
            for u in [|w: &Wronskian, t| w.u1(t), |w: &Wronskian, t| w.u2(t)] {
                let d2 = (u(&w, t + h) - 2.0 * u(&w, t) + u(&w, t - h)) / (h * h);
                assert!((d2 - g * g * cphi * u(&w, t)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn kernel_identities() {
        let g = c(1.0);
        assert_eq!(k_psi_kernel(-1.0, c(0.3)), c(1.0));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = C64::new(rng.gen_range(-1.1..1.1), rng.gen_range(-0.1..0.1));
            assert!(k_phi_kernel(g, 0.0, z).unwrap().norm() < 1e-15);
        }
        // agrees with the Wronskian form away from the branch cut
        let w = Wronskian::new(g);
        for (s, z) in [(-0.7, 0.4), (-2.0, 1.1), (-0.1, 0.05)] {
            let z = c(z);
            let u = z * (g * s).exp();
            let direct = w.w2(z).unwrap() * w.w1(u) - w.w1(z) * w.w2(u).unwrap();
            assert!((k_phi_kernel(g, s, z).unwrap() - direct).norm() < 1e-13);
        }
        assert!((k_phi_kernel(g, -0.8, c(0.0)).unwrap() + (-0.8f64).sinh()).norm() < 1e-15);
    }

    #[test]
    fn kernel_bound_is_uniform() {
        // sup |K| e^{-gamma |s|} (1 - tau^2)^2 gamma over the strip, two resolutions
        let tau = 0.1;
        let sup = |n: usize| {
            let mut m: f64 = 0.0;
            for i in 0..=n {
                let s = -10.0 * i as f64 / n as f64;
                for j in 0..=n {
                    for k in 0..=4 {
                        let z = C64::new(-1.1 + 2.2 * j as f64 / n as f64, -tau + 2.0 * tau * k as f64 / 4.0);
                        let v = k_phi_kernel(c(1.0), s, z).unwrap().norm() * (-s.abs()).exp() * (1.0 - tau * tau).powi(2);
                        m = m.max(v);
                    }
                }
            }
            m
        };
        let (a, b) = (sup(40), sup(80));
        assert!(a.is_finite() && a < 10.0);
        assert!((a - b).abs() < 0.05 * b);
    }
}
