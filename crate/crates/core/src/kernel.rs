//! Grid functions on z-rays and the inverse of
//! `K = diag(L^2 - gamma^2 cos Phi0, L^2)`, `L = omega.d_theta + gamma z d_z`.
//!
//! Functions vanishing to second order at `z = 0` are stored as `Z/z^2`
//! (the `tilde` flag), which keeps the `1/z` and `ln z` pieces of the
//! kernel out of the arithmetic.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::chebyshev::RayGrid;
use crate::error::{Error, Result};
use crate::fourier::{FrequencyVector, ModeSet};
use crate::model::Numerics;
use crate::separatrix::{cos_phi0, k_phi_kernel};

#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams {
    pub gamma: C64,
    pub tau: f64,
    pub quad_order: usize,
    /// panel width in units of `1/Re gamma`
    pub panel_width: f64,
    /// truncation depth in units of `1/Re gamma`
    pub depth: f64,
}

impl KernelParams {
    pub fn new(gamma: C64, n: &Numerics) -> Result<Self> {
        let p = Self { gamma, tau: n.tau, quad_order: n.quad_order, panel_width: n.panel_width, depth: n.quad_depth };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau = {} outside (0,1)", self.tau)));
        }
        if !(self.gamma.re > 0.0) {
            return Err(Error::Config(format!("Re gamma must be positive, got {}", self.gamma)));
        }
        if self.quad_order < 2 {
            return Err(Error::Config("quadrature order below 2".into()));
        }
        Ok(())
    }

    pub fn s_min(&self) -> f64 {
        -self.depth / self.gamma.re
    }

    /// Composite Gauss-Legendre on `[s_min, 0]`; panels are narrowed so that
    /// no panel holds more than about four periods of `e^{i kappa s}`.
    pub fn quadrature(&self, kappa_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let gl = GaussLegendre::new(self.quad_order).map_err(|e| Error::Config(format!("quadrature rule: {e}")))?;
        let mut width = self.panel_width / self.gamma.re;
        if kappa_max > 0.0 {
            width = width.min(24.0 / kappa_max);
        }
        let len = -self.s_min();
        let panels = (len / width).ceil().max(1.0) as usize;
        let h = len / panels as f64;
        let mut s = Vec::with_capacity(panels * self.quad_order);
        let mut w = Vec::with_capacity(panels * self.quad_order);
        for p in 0..panels {
            let a = -len + p as f64 * h;
            for &(x, wx) in gl.as_node_weight_pairs() {
                s.push(a + 0.5 * h * (x + 1.0));
                w.push(0.5 * h * wx);
            }
        }
        Ok((s, w))
    }
}

/// Samples `F(z_i, q)` of a `(1+d)`-component function at the nodes of one
/// ray, one `N x M` matrix (node x mode) per component. With `tilde` set
/// the stored values are `F/z^2`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub ray: RayGrid,
    pub set: ModeSet,
    pub comps: Vec<DMatrix<C64>>,
    pub tilde: bool,
}

impl GridFunction {
    pub fn zeros(ray: &RayGrid, set: &ModeSet, ncomp: usize, tilde: bool) -> Self {
        Self { ray: ray.clone(), set: set.clone(), comps: vec![DMatrix::zeros(ray.len(), set.len()); ncomp], tilde }
    }

    /// Samples `f(z, theta)` at the nodes; `f` returns per-component modes on `set`.
    pub fn from_modes(ray: &RayGrid, set: &ModeSet, ncomp: usize, tilde: bool, f: impl Fn(C64) -> Vec<Vec<C64>>) -> Self {
        let mut out = Self::zeros(ray, set, ncomp, tilde);
        for i in 0..ray.len() {
            let v = f(ray.node(i));
            for c in 0..ncomp {
                for (k, x) in v[c].iter().enumerate() {
                    out.comps[c][(i, k)] = *x;
                }
            }
        }
        out
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    /// Fourier coefficients at `z` of the stored samples (no `z^2` factor).
    pub fn stored_modes_at(&self, z: C64) -> Vec<Vec<C64>> {
        let row = self.ray.bary_row(self.ray.coord(z));
        self.comps
            .iter()
            .map(|m| (0..m.ncols()).map(|k| row.iter().enumerate().map(|(i, r)| r * m[(i, k)]).sum()).collect())
            .collect()
    }

    /// Fourier coefficients of `F(z, .)`.
    pub fn modes_at(&self, z: C64) -> Vec<Vec<C64>> {
        let mut v = self.stored_modes_at(z);
        if self.tilde {
            let z2 = z * z;
            v.iter_mut().for_each(|c| c.iter_mut().for_each(|x| *x *= z2));
        }
        v
    }

    pub fn eval(&self, z: C64, theta: &[C64]) -> Vec<C64> {
        let phases: Vec<C64> = self
            .set
            .modes
            .iter()
            .map(|q| C64::new(0.0, 1.0) * q.iter().zip(theta).map(|(&k, t)| t * k as f64).sum::<C64>())
            .map(|a| a.exp())
            .collect();
        self.modes_at(z).iter().map(|c| c.iter().zip(&phases).map(|(a, b)| a * b).sum()).collect()
    }

    /// Largest stored sample magnitude.
    pub fn sup_stored(&self) -> f64 {
        self.comps.iter().flat_map(|m| m.iter()).map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.comps.iter().zip(&o.comps).map(|(a, b)| (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)).fold(0.0, f64::max)
    }

    /// `(|F(0)|, |F'(0)|)` summed over modes, from the interpolant.
    pub fn order_at_zero(&self) -> (f64, f64) {
        if self.tilde {
            return (0.0, 0.0);
        }
        let h = 1e-4 * self.ray.radius;
        let at = |z: C64| self.modes_at(z);
        let (v0, vp, vm) = (at(C64::default()), at(self.ray.dir * h), at(self.ray.dir * (2.0 * h)));
        let mut a: f64 = 0.0;
        let mut b: f64 = 0.0;
        for c in 0..v0.len() {
            for k in 0..v0[c].len() {
                a = a.max(v0[c][k].norm());
                b = b.max(((-3.0 * v0[c][k] + 4.0 * vp[c][k] - vm[c][k]) / (2.0 * h)).norm());
            }
        }
        (a, b)
    }
}

/// Per-mode linear maps `h/z^2 -> (K^{-1} h)/z^2` on one ray.
#[derive(Clone, Debug)]
pub struct InverseOps {
    pub method: &'static str,
    pub ray: RayGrid,
    pub set: ModeSet,
    pub gamma: C64,
    pub phi: Vec<DMatrix<C64>>,
    pub psi: Vec<DMatrix<C64>>,
}

impl InverseOps {
    pub fn apply(&self, h: &GridFunction) -> Result<GridFunction> {
        if !h.tilde {
            return Err(Error::Domain("K inverse expects a function stored as h/z^2".into()));
        }
        if h.set.len() != self.set.len() || h.ray.len() != self.ray.len() {
            return Err(Error::DimMismatch(h.set.len(), self.set.len()));
        }
        let mut out = GridFunction::zeros(&self.ray, &self.set, h.ncomp(), true);
        for (c, m) in h.comps.iter().enumerate() {
            let ops = if c == 0 { &self.phi } else { &self.psi };
            for k in 0..self.set.len() {
                let col = &ops[k] * m.column(k);
                out.comps[c].set_column(k, &col);
            }
        }
        Ok(out)
    }
}

/// A way of building `K^{-1}` on a ray.
pub trait KernelInverse: Send + Sync {
    fn name(&self) -> &'static str;
    fn prepare(&self, ray: &RayGrid, set: &ModeSet, omega: &FrequencyVector, params: &KernelParams) -> Result<InverseOps>;
}

/// The explicit integral `int_{-inf}^0 K(s;z) h(z e^{gamma s}, theta + omega s) ds`.
pub struct QuadratureInverse;

/// Spectral collocation of the per-mode ODE in `t = |z|`; no boundary
/// rows are needed because both indicial roots of the reduced operator
/// are singular at `z = 0`.
pub struct CollocationInverse;

impl KernelInverse for QuadratureInverse {
    fn name(&self) -> &'static str {
        "quadrature"
    }

    fn prepare(&self, ray: &RayGrid, set: &ModeSet, omega: &FrequencyVector, p: &KernelParams) -> Result<InverseOps> {
        p.validate()?;
        let kappa: Vec<f64> = set.modes.iter().map(|q| omega.dot(q)).collect();
        let kmax = kappa.iter().fold(0.0f64, |a, k| a.max(k.abs()));
        let (s, w) = p.quadrature(kmax)?;
        let (n, m, jn) = (ray.len(), set.len(), s.len());
        let g = p.gamma;
        let e2: Vec<C64> = s.iter().map(|&sj| (2.0 * g * sj).exp()).collect();
        let ph: Vec<C64> = (0..m * jn).map(|x| C64::new(0.0, kappa[x / jn] * s[x % jn]).exp()).collect();
        let real_l = g.im == 0.0;
        let mut phi = vec![DMatrix::<C64>::zeros(n, n); m];
        let mut psi = vec![DMatrix::<C64>::zeros(n, n); m];
        let cpsi: Vec<C64> = (0..jn).map(|j| w[j] * -s[j] * e2[j]).collect();
        for i in 0..n {
            let zi = ray.node(i);
            let mut cphi = Vec::with_capacity(jn);
            for j in 0..jn {
                cphi.push(w[j] * k_phi_kernel(g, s[j], zi)? * e2[j]);
            }
            let mut v_re = DMatrix::<f64>::zeros(2 * m, jn);
            let mut v_im = DMatrix::<f64>::zeros(2 * m, jn);
            for k in 0..m {
                for j in 0..jn {
                    let e = ph[k * jn + j];
                    let a = cphi[j] * e;
                    let b = cpsi[j] * e;
                    v_re[(k, j)] = a.re;
                    v_im[(k, j)] = a.im;
                    v_re[(m + k, j)] = b.re;
                    v_im[(m + k, j)] = b.im;
                }
            }
            let mut l_re = DMatrix::<f64>::zeros(jn, n);
            let mut l_im = DMatrix::<f64>::zeros(jn, n);
            let ti = ray.t[i];
            for j in 0..jn {
                let u = ti * (g * s[j]).exp();
                if real_l {
                    for (c, x) in ray.bary_row_real(u.re).into_iter().enumerate() {
                        l_re[(j, c)] = x;
                    }
                } else {
                    for (c, x) in ray.bary_row(u).into_iter().enumerate() {
                        l_re[(j, c)] = x.re;
                        l_im[(j, c)] = x.im;
                    }
                }
            }
            let (r_re, r_im) = if real_l {
                (&v_re * &l_re, &v_im * &l_re)
            } else {
                (&v_re * &l_re - &v_im * &l_im, &v_re * &l_im + &v_im * &l_re)
            };
            for k in 0..m {
                for c in 0..n {
                    phi[k][(i, c)] = C64::new(r_re[(k, c)], r_im[(k, c)]);
                    psi[k][(i, c)] = C64::new(r_re[(m + k, c)], r_im[(m + k, c)]);
                }
            }
        }
        Ok(InverseOps { method: self.name(), ray: ray.clone(), set: set.clone(), gamma: g, phi, psi })
    }
}

impl KernelInverse for CollocationInverse {
    fn name(&self) -> &'static str {
        "collocation"
    }

    fn prepare(&self, ray: &RayGrid, set: &ModeSet, omega: &FrequencyVector, p: &KernelParams) -> Result<InverseOps> {
        p.validate()?;
        let n = ray.len();
        let g = p.gamma;
        let e = ray.euler_matrix().map(C64::from);
        let id = DMatrix::<C64>::identity(n, n);
        let cosv: Vec<C64> = ray.nodes().into_iter().map(cos_phi0).collect();
        let mut phi = Vec::with_capacity(set.len());
        let mut psi = Vec::with_capacity(set.len());
        for q in &set.modes {
            let l = &id * (C64::new(0.0, omega.dot(q)) + 2.0 * g) + &e * g;
            let l2 = &l * &l;
            let mut kphi = l2.clone();
            for i in 0..n {
                kphi[(i, i)] -= g * g * cosv[i];
            }
            let inv = |m: DMatrix<C64>| m.try_inverse().ok_or_else(|| Error::Singular(format!("collocated K at mode {q:?}")));
            phi.push(inv(kphi)?);
            psi.push(inv(l2)?);
        }
        Ok(InverseOps { method: self.name(), ray: ray.clone(), set: set.clone(), gamma: g, phi, psi })
    }
}

pub fn inverse_registry() -> Vec<Box<dyn KernelInverse>> {
    vec![Box::new(QuadratureInverse), Box::new(CollocationInverse)]
}

pub fn inverse_by_name(name: &str) -> Result<Box<dyn KernelInverse>> {
    inverse_registry()
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::Config(format!("unknown kernel inverse '{name}'")))
}

/// One-shot `K^{-1} h` by quadrature.
pub fn k_inverse_apply(params: &KernelParams, omega: &FrequencyVector, h: &GridFunction) -> Result<GridFunction> {
    QuadratureInverse.prepare(&h.ray, &h.set, omega, params)?.apply(h)
}

/// Point on the characteristic through `(z, theta)` at time `t`.
pub fn characteristic(gamma: C64, omega: &[f64], z: C64, theta: &[C64], t: f64) -> (C64, Vec<C64>) {
    (z * (gamma * t).exp(), theta.iter().zip(omega).map(|(a, w)| a + w * t).collect())
}

/// `L F` at `(z, theta)` by the 5-point first difference along the characteristic.
pub fn char_d1(f: &dyn Fn(C64, &[C64]) -> Vec<C64>, gamma: C64, omega: &[f64], z: C64, theta: &[C64], h: f64) -> Vec<C64> {
    let at = |t: f64| {
        let (zz, th) = characteristic(gamma, omega, z, theta, t);
        f(zz, &th)
    };
    let (a, b, c, d) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
    (0..a.len()).map(|k| (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * h)).collect()
}

/// `L^2 F` at `(z, theta)` by the 5-point second difference.
pub fn char_d2(f: &dyn Fn(C64, &[C64]) -> Vec<C64>, gamma: C64, omega: &[f64], z: C64, theta: &[C64], h: f64) -> Vec<C64> {
    let at = |t: f64| {
        let (zz, th) = characteristic(gamma, omega, z, theta, t);
        f(zz, &th)
    };
    let (a, b, c, d, e) = (at(-2.0 * h), at(-h), at(0.0), at(h), at(2.0 * h));
    (0..a.len()).map(|k| (-a[k] + 16.0 * b[k] - 30.0 * c[k] + 16.0 * d[k] - e[k]) / (12.0 * h * h)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharResidual {
    pub residual: f64,
    /// largest change of `L^2 F` between steps `h` and `2h`
    pub richardson: f64,
}

/// `sup |L^2 F - rhs|` over `points`.
pub fn residual_characteristic(
    gamma: C64,
    omega: &[f64],
    f: &dyn Fn(C64, &[C64]) -> Vec<C64>,
    rhs: &dyn Fn(C64, &[C64]) -> Vec<C64>,
    points: &[(C64, Vec<C64>)],
    h: f64,
) -> CharResidual {
    let mut res: f64 = 0.0;
    let mut rich: f64 = 0.0;
    for (z, th) in points {
        let d = char_d2(f, gamma, omega, *z, th, h);
        let d2 = char_d2(f, gamma, omega, *z, th, 2.0 * h);
        let r = rhs(*z, th);
        for k in 0..d.len() {
            res = res.max((d[k] - r[k]).norm());
            rich = rich.max((d[k] - d2[k]).norm());
        }
    }
    CharResidual { residual: res, richardson: rich }
}

/// Taylor coefficients `0..=kmax` of a vector-valued analytic `f` from
/// `n` samples on the circle `|z| = r`; entry `[k][c]`.
pub fn cauchy_taylor(f: impl Fn(C64) -> Vec<C64>, r: f64, n: usize, kmax: usize) -> Vec<Vec<C64>> {
    let samples: Vec<Vec<C64>> = (0..n).map(|j| f(C64::from_polar(r, 2.0 * PI * j as f64 / n as f64))).collect();
    let nc = samples[0].len();
    (0..=kmax)
        .map(|k| {
            (0..nc)
                .map(|c| {
                    let s: C64 = (0..n).map(|j| samples[j][c] * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64)).sum();
                    s / (n as f64 * r.powi(k as i32))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separatrix::{phi0, sin_phi0};

    fn setup(d: usize, k: i32) -> (RayGrid, ModeSet, FrequencyVector, KernelParams) {
        let ray = RayGrid::new(C64::from(1.0), 3.0, 48);
        let set = ModeSet::l1_ball(d, k);
        let fv = FrequencyVector::default_for(d);
        let p = KernelParams::new(C64::from(1.0), &Numerics::default()).unwrap();
        (ray, set, fv, p)
    }

    /// A smooth A1 test function: `h/z^2 = sum_q c_q (1 + a_q z)/(4 + z^2)`.
    fn sample_h(ray: &RayGrid, set: &ModeSet) -> GridFunction {
        GridFunction::from_modes(ray, set, 2, true, |z| {
            let comp = |off: f64| {
                set.modes
                    .iter()
                    .enumerate()
                    .map(|(i, q)| {
                        let amp = (-(q[0].abs() as f64)).exp();
                        C64::new(amp, 0.3 * off * amp * q[0] as f64) * (1.0 + (0.2 + 0.1 * i as f64) * z) / (4.0 + z * z)
                    })
                    .collect()
            };
            vec![comp(1.0), comp(-1.0)]
        })
    }

    #[test]
    fn zero_and_quadratic_inputs() {
        let (ray, set, fv, p) = setup(1, 4);
        let ops = QuadratureInverse.prepare(&ray, &set, &fv, &p).unwrap();
        let z = GridFunction::zeros(&ray, &set, 2, true);
        assert_eq!(ops.apply(&z).unwrap().sup_stored(), 0.0);
        // h = z^2 in the rotator block at mode 0: K^{-1} h = z^2/(4 gamma^2)
        let mut h = GridFunction::zeros(&ray, &set, 2, true);
        let k0 = set.zero();
        for i in 0..ray.len() {
            h.comps[1][(i, k0)] = C64::from(1.0);
        }
        let out = ops.apply(&h).unwrap();
        for i in 0..ray.len() {
            assert!((out.comps[1][(i, k0)] - 0.25).norm() < 1e-13);
        }
        assert!(!h.tilde || out.order_at_zero() == (0.0, 0.0));
    }

    #[test]
    fn quadrature_matches_collocation() {
        for (d, k) in [(1, 6), (2, 3)] {
            let (ray, set, fv, p) = setup(d, k);
            let h = if d == 1 { sample_h(&ray, &set) } else { GridFunction::from_modes(&ray, &set, 3, true, |z| vec![vec![(1.0 + z).inv(); set.len()]; 3]) };
            let a = QuadratureInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
            let b = CollocationInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-11, "d={d}: {}", a.max_abs_diff(&b));
        }
    }

    #[test]
    fn round_trip_along_characteristics() {
        let (ray, set, fv, p) = setup(1, 4);
        let h = sample_h(&ray, &set);
        let zf = QuadratureInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
        let om = fv.omega.clone();
        let g = p.gamma;
        let kz = |z: C64, th: &[C64]| zf.eval(z, th);
        let mut worst: f64 = 0.0;
        for zr in [0.05, 0.3, 0.8, 1.1, 2.0] {
            for th in [0.0, 1.0, 2.5] {
                let (z, th) = (C64::from(zr), vec![C64::from(th)]);
                let l2 = char_d2(&kz, g, &om, z, &th, 5e-3);
                let v = zf.eval(z, &th);
                let hv = h.eval(z, &th);
                worst = worst.max((l2[0] - g * g * cos_phi0(z) * v[0] - hv[0]).norm());
                worst = worst.max((l2[1] - hv[1]).norm());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn quadrature_converges_under_panel_halving() {
        let (ray, set, fv, mut p) = setup(1, 4);
        let h = sample_h(&ray, &set);
        let a = QuadratureInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
        p.panel_width *= 0.5;
        let b = QuadratureInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn complex_gamma_and_rotated_ray() {
        let set = ModeSet::l1_ball(1, 3);
        let fv = FrequencyVector::default_for(1);
        let mut p = KernelParams::new(C64::new(1.0, 0.02), &Numerics::default()).unwrap();
        let ray = RayGrid::new(C64::from_polar(1.0, 0.1), 3.0, 48);
        let h = GridFunction::from_modes(&ray, &set, 2, true, |z| vec![vec![(2.0 + z).inv(); set.len()]; 2]);
        let a = QuadratureInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
        let b = CollocationInverse.prepare(&ray, &set, &fv, &p).unwrap().apply(&h).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10, "{}", a.max_abs_diff(&b));
        p.gamma = C64::new(-1.0, 0.0);
        assert!(QuadratureInverse.prepare(&ray, &set, &fv, &p).is_err());
        assert!(inverse_by_name("collocation").is_ok() && inverse_by_name("nope").is_err());
    }

    #[test]
    fn characteristic_residual_examples() {
        let g = C64::from(1.0);
        let om = [1.618033988749895];
        let pts: Vec<(C64, Vec<C64>)> = [0.1, 0.5, 1.0, 1.1].iter().map(|&z| (C64::from(z), vec![C64::from(0.4)])).collect();
        let x0 = |z: C64, _: &[C64]| vec![phi0(z).unwrap(), C64::default()];
        let rhs = |z: C64, _: &[C64]| vec![g * g * sin_phi0(z), C64::default()];
        let r = residual_characteristic(g, &om, &x0, &rhs, &pts, 5e-3);
        assert!(r.residual < 1e-7, "{r:?}");
        let cst = |_: C64, _: &[C64]| vec![C64::from(2.0)];
        let zero = |_: C64, _: &[C64]| vec![C64::default()];
        assert!(residual_characteristic(g, &om, &cst, &zero, &pts, 5e-3).residual < 1e-12);
        let eig = |z: C64, th: &[C64]| vec![z * (C64::new(0.0, 1.0) * th[0]).exp()];
        let lam = C64::new(0.0, om[0]) + g;
        let erhs = move |z: C64, th: &[C64]| vec![lam * lam * eig(z, th)[0]];
        assert!(residual_characteristic(g, &om, &eig, &erhs, &pts, 5e-3).residual < 1e-8);
    }

    #[test]
    fn reversal_anticommutes_with_l() {
        // L(F o T) = -(L F) o T
        let g = C64::from(1.0);
        let om = [1.618033988749895];
        let f = |z: C64, th: &[C64]| vec![(z * 0.3).sin() * (th[0] * C64::new(0.0, 2.0)).exp() + z * z * th[0].cos()];
        let ft = |z: C64, th: &[C64]| f(z.inv(), &[-th[0]]);
        for (z, th) in [(0.7, 0.2), (1.3, -1.0), (2.0, 2.0)] {
            let (z, th) = (C64::from(z), vec![C64::from(th)]);
            let a = char_d1(&ft, g, &om, z, &th, 1e-4);
            let b = char_d1(&f, g, &om, z.inv(), &[-th[0]], 1e-4);
            assert!((a[0] + b[0]).norm() < 1e-9);
        }
    }

    #[test]
    fn cauchy_coefficients() {
        let c = cauchy_taylor(|z| vec![z.exp(), (1.0 - z).inv()], 0.025, 64, 6);
        let mut fact = 1.0;
        for (k, ck) in c.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            // roundoff floor of coefficient k is about eps / r^k
            let tol = 1e-15 / 0.025f64.powi(k as i32);
            assert!((ck[0] - 1.0 / fact).norm() < tol);
            assert!((ck[1] - 1.0).norm() < tol);
        }
    }
}
