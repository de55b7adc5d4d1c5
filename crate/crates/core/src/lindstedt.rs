//! Order-by-order expansion of the torus, the Lyapunov exponent and the
//! unstable whisker in the coupling, with continuation of each order to
//! complex `z` in a wedge around the real axis.
//!
//! All nonlinear terms are handled as pointwise jets in `eps` on a grid in
//! `theta`. The remainder orders use the kernel at `gamma_0 = g`; the
//! corrections `gamma - g` act through `L_gamma^2 = L_g^2 + 2 dg E L_g + dg^2 E^2`
//! (`E = z d_z`) on the right-hand side.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::chebyshev::RayGrid;
use crate::collocation::Collocation;
use crate::error::{Error, Result};
use crate::fourier::{FourierPoly, FrequencyVector, ModeSet};
use crate::jet::{Angle, Jet};
use crate::kernel::{cauchy_taylor, GridFunction, KernelInverse, KernelParams};
use crate::model::{ModelConfig, Perturbation, Term};
use crate::separatrix::{cos_phi0, euler2_phi0, phi0, sin_phi0};

/// Bound on `|Im Phi0|` along continuation paths. The perturbation is a
/// trigonometric polynomial, so any finite strip works; this keeps the
/// arguments of `f` in a moderate range.
pub const ETA_EST: f64 = 1.0;

/// Orders `Z_l / z^2` on one ray; index 0 is identically zero.
#[derive(Clone, Debug)]
pub struct SeriesRay {
    pub ray: RayGrid,
    pub zt: Vec<GridFunction>,
}

#[derive(Clone, Debug)]
pub struct EpsSeries {
    pub cfg: ModelConfig,
    pub pert: Perturbation,
    pub max_order: usize,
    /// trigonometric degree of `f` in `psi`
    pub n_f: i32,
    pub set: ModeSet,
    pub fv: FrequencyVector,
    /// `gamma_l`, `gamma_0 = g`
    pub gamma: Vec<C64>,
    /// `[l][component]` dense on `set`
    pub x0: Vec<Vec<Vec<C64>>>,
    /// `[l][component]`, `X1^0 = (4, 0)`
    pub x1: Vec<Vec<Vec<C64>>>,
    /// zero mode of the `Psi` equation per order; vanishes identically
    pub ward: Vec<f64>,
    /// `[positive, negative]` real rays
    pub rays: Vec<SeriesRay>,
    col: Collocation,
    thetas: Vec<Vec<f64>>,
    // grid values per order: X0, X1 - (4,0), D X1
    x0v: Vec<Vec<Vec<C64>>>,
    x1v: Vec<Vec<Vec<C64>>>,
    dx1v: Vec<Vec<Vec<C64>>>,
}

/// Value of one order at a complex point, with the continuation certificate.
#[derive(Clone, Debug)]
pub struct WedgeValue {
    pub value: Vec<C64>,
    /// `max |Im Phi0|` along the path `z e^{g s}`, `s <= 0`
    pub certificate: f64,
    pub eta_est: f64,
}

fn term_angle(t: &Term, a: &Angle, psi: &[Angle], extra: f64) -> Angle {
    let mut ang = a.times(t.j);
    for (p, &k) in psi.iter().zip(&t.q) {
        if k != 0 {
            ang = ang.add(&p.times(k));
        }
    }
    ang.add(&Angle::real_shift(a.j.order(), t.shift() + extra))
}

fn term_factor(t: &Term, orders: &[usize]) -> f64 {
    let mut fac = t.c;
    for (a, &o) in orders.iter().enumerate() {
        let k = if a == 0 { t.j } else { t.q[a - 1] };
        fac *= (k as f64).powi(o as i32);
    }
    fac
}

/// Jet of the mixed partial of `f` at the angles `(a, psi)`.
pub fn pert_deriv_jet(p: &Perturbation, a: &Angle, psi: &[Angle], orders: &[usize]) -> Jet {
    let n: usize = orders.iter().sum();
    let mut acc = Jet::zero(a.j.order());
    for t in &p.terms {
        let fac = term_factor(t, orders);
        if fac != 0.0 {
            acc.add_assign_scaled(&term_angle(t, a, psi, n as f64 * FRAC_PI_2).cos(), C64::from(fac));
        }
    }
    acc
}

/// `[d f(a + z2 b_phi, psi + z2 b_psi) - d f(a, psi)] / z2` for the mixed partial `d`.
pub fn pert_deriv_increment(p: &Perturbation, a: &Angle, psi: &[Angle], b: &[Jet], z2: C64, orders: &[usize]) -> Jet {
    let n: usize = orders.iter().sum();
    let mut acc = Jet::zero(a.j.order());
    for t in &p.terms {
        let fac = term_factor(t, orders);
        if fac == 0.0 {
            continue;
        }
        let mut beta = b[0].scale(C64::from(t.j as f64));
        for (i, &k) in t.q.iter().enumerate() {
            beta.add_assign_scaled(&b[i + 1], C64::from(k as f64));
        }
        acc.add_assign_scaled(&term_angle(t, a, psi, n as f64 * FRAC_PI_2).cos_increment(&beta, z2), C64::from(fac));
    }
    acc
}

fn unit(d: usize, a: usize) -> Vec<usize> {
    let mut o = vec![0; d + 1];
    o[a] += 1;
    o
}

fn jet_from(order: usize, f: impl Fn(usize) -> C64) -> Jet {
    Jet((0..=order).map(f).collect())
}

impl EpsSeries {
    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn ncomp(&self) -> usize {
        self.dim() + 1
    }

    fn kappa(&self, k: usize) -> f64 {
        self.fv.dot(&self.set.modes[k])
    }

    pub fn x0_poly(&self, l: usize, c: usize) -> FourierPoly {
        self.set.from_dense(&self.x0[l][c])
    }

    pub fn x1_poly(&self, l: usize, c: usize) -> FourierPoly {
        self.set.from_dense(&self.x1[l][c])
    }

    /// `sum_{l <= upto} eps^l gamma_l`.
    pub fn gamma_sum(&self, eps: C64, upto: usize) -> C64 {
        self.gamma[..=upto.min(self.max_order)].iter().rev().fold(C64::default(), |acc, g| acc * eps + g)
    }

    fn angle_phi(&self, z: Option<C64>, jet: Jet) -> Angle {
        let e = z.map_or(C64::new(1.0, 0.0), |z| cos_phi0(z) + C64::new(0.0, 1.0) * sin_phi0(z));
        Angle::new(e, jet)
    }

    fn angles_psi(&self, j: usize, jets: Vec<Jet>) -> Vec<Angle> {
        jets.into_iter().zip(&self.thetas[j]).map(|(jt, &th)| Angle::new(C64::from_polar(1.0, th), jt)).collect()
    }

    fn analyze(&self, v: &[C64]) -> Vec<C64> {
        self.col.analyze(v, &self.set)
    }

    fn synth(&self, v: &[C64]) -> Vec<C64> {
        self.col.synth(&self.set, v)
    }

    fn torus_orders(&mut self) {
        let (l_max, nc, d) = (self.max_order, self.ncomp(), self.dim());
        let g2 = self.cfg.g * self.cfg.g;
        let npts = self.col.len();
        for l in 1..=l_max {
            let mut rhs = vec![vec![C64::default(); npts]; nc];
            for j in 0..npts {
                let jets: Vec<Jet> =
                    (0..nc).map(|c| jet_from(l_max, |k| if k < l { self.x0v[k][c][j] } else { C64::default() })).collect();
                let a = self.angle_phi(None, jets[0].clone());
                let psi = self.angles_psi(j, jets[1..].to_vec());
                rhs[0][j] = g2 * a.sin().coeff(l);
                for c in 0..nc {
                    rhs[c][j] += g2 * pert_deriv_jet(&self.pert, &a, &psi, &unit(d, c)).coeff(l - 1);
                }
            }
            let mut out = Vec::with_capacity(nc);
            let mut ward: f64 = 0.0;
            for (c, r) in rhs.iter().enumerate() {
                let mut m = self.analyze(r);
                for (k, x) in m.iter_mut().enumerate() {
                    let kap = self.kappa(k);
                    if c == 0 {
                        *x /= -kap * kap - g2;
                    } else if k == self.set.zero() {
                        ward = ward.max(x.norm());
                        *x = C64::default();
                    } else {
                        *x /= -kap * kap;
                    }
                }
                out.push(m);
            }
            self.ward.push(ward);
            self.x0v.push(out.iter().map(|m| self.synth(m)).collect());
            self.x0.push(out);
        }
    }

    fn linear_orders(&mut self) -> Result<()> {
        let (l_max, nc, d) = (self.max_order, self.ncomp(), self.dim());
        let g = self.cfg.g;
        let g2 = g * g;
        let npts = self.col.len();
        // M = D Omega(X0) as jets, [j][a][b]
        let mut mj = Vec::with_capacity(npts);
        for j in 0..npts {
            let jets: Vec<Jet> = (0..nc).map(|c| jet_from(l_max, |k| self.x0v[k][c][j])).collect();
            let a = self.angle_phi(None, jets[0].clone());
            let psi = self.angles_psi(j, jets[1..].to_vec());
            let mut m = vec![vec![Jet::zero(l_max); nc]; nc];
            for ia in 0..nc {
                for ib in ia..nc {
                    let mut o = unit(d, ia);
                    o[ib] += 1;
                    let mut v = pert_deriv_jet(&self.pert, &a, &psi, &o).shift().scale(C64::from(g2));
                    if ia == 0 && ib == 0 {
                        v = v.add(&a.cos().scale(C64::from(g2)));
                    }
                    m[ib][ia] = v.clone();
                    m[ia][ib] = v;
                }
            }
            mj.push(m);
        }
        for l in 1..=l_max {
            self.gamma.push(C64::default());
            let mut r = vec![vec![C64::default(); self.set.len()]; nc];
            for k in 1..=l {
                let prev = l - k;
                let xv: Vec<Vec<C64>> = (0..nc)
                    .map(|c| {
                        let mut v = self.x1v[prev][c].clone();
                        if prev == 0 && c == 0 {
                            v.iter_mut().for_each(|x| *x += 4.0);
                        }
                        v
                    })
                    .collect();
                let g2k: C64 = (0..=k).map(|i| self.gamma[i] * self.gamma[k - i]).sum();
                for ia in 0..nc {
                    let prod: Vec<C64> = (0..npts).map(|j| (0..nc).map(|ib| mj[j][ia][ib].coeff(k) * xv[ib][j]).sum()).collect();
                    let pm = self.analyze(&prod);
                    for q in 0..self.set.len() {
                        let sym = 2.0 * self.gamma[k] * C64::new(0.0, self.kappa(q)) + g2k;
                        r[ia][q] += pm[q] - sym * self.x1[prev][ia][q];
                    }
                }
            }
            let z0 = self.set.zero();
            let pivot = 8.0 * g;
            if pivot.abs() < 1e-300 {
                return Err(Error::Singular(format!("solvability row at order {l}: pivot {pivot:e}")));
            }
            self.gamma[l] = r[0][z0] / pivot;
            let mut out = r;
            for (c, m) in out.iter_mut().enumerate() {
                for (q, x) in m.iter_mut().enumerate() {
                    let s = C64::new(g, self.kappa(q));
                    if c == 0 {
                        *x = if q == z0 { C64::default() } else { *x / (s * s - g2) };
                    } else {
                        *x /= s * s;
                    }
                }
            }
            self.x1v.push(out.iter().map(|m| self.synth(m)).collect());
            self.dx1v.push(
                out.iter()
                    .map(|m| {
                        let dm: Vec<C64> = m.iter().enumerate().map(|(q, x)| x * C64::new(0.0, self.kappa(q))).collect();
                        self.synth(&dm)
                    })
                    .collect(),
            );
            self.x1.push(out);
        }
        Ok(())
    }

    /// Jets of `X~_{<=1}` components at `(z, theta_j)`.
    fn low_jets(&self, z: C64, j: usize) -> Vec<Jet> {
        (0..self.ncomp())
            .map(|c| jet_from(self.max_order, |k| if k == 0 { C64::default() } else { self.x0v[k][c][j] + z * self.x1v[k][c][j] }))
            .collect()
    }

    fn dgamma_jets(&self) -> (Jet, Jet) {
        let dg = jet_from(self.max_order, |k| if k == 0 { C64::default() } else { self.gamma[k] });
        let dg2 = dg.mul(&dg);
        (dg, dg2)
    }

    /// Modes `[l][c][q]` of the right-hand side with the remainder set to zero,
    /// order 0 removed.
    fn b_low(&self, z: C64) -> Vec<Vec<Vec<C64>>> {
        let (l_max, nc, d) = (self.max_order, self.ncomp(), self.dim());
        let g = self.cfg.g;
        let g2 = C64::from(g * g);
        let (dg, dg2) = self.dgamma_jets();
        let e2p = euler2_phi0(z);
        let base = dg.scale(C64::from(2.0 * g)).add(&dg2).scale(e2p);
        let npts = self.col.len();
        let mut vals = vec![vec![vec![C64::default(); npts]; nc]; l_max + 1];
        for j in 0..npts {
            let jets = self.low_jets(z, j);
            let a = self.angle_phi(Some(z), jets[0].clone());
            let psi = self.angles_psi(j, jets[1..].to_vec());
            for c in 0..nc {
                let mut b = pert_deriv_jet(&self.pert, &a, &psi, &unit(d, c)).shift().scale(g2);
                if c == 0 {
                    b = b.add(&a.sin().scale(g2)).sub(&base);
                }
                let x1 = jet_from(l_max, |k| if k == 0 { C64::default() } else { self.x1v[k][c][j] });
                let dx1 = jet_from(l_max, |k| if k == 0 { C64::default() } else { self.dx1v[k][c][j] });
                let corr = dg.mul(&dx1.add(&x1.scale(C64::from(g)))).scale(C64::from(2.0)).add(&dg2.mul(&x1)).scale(z);
                b = b.sub(&corr);
                for l in 1..=l_max {
                    vals[l][c][j] = b.coeff(l);
                }
            }
        }
        vals.iter().map(|per| per.iter().map(|v| self.analyze(v)).collect()).collect()
    }

    /// `delta_2 B_low / z^2` at the nodes of `ray`; `[i][l][c][q]`.
    fn b_low_tilde(&self, ray: &RayGrid) -> Vec<Vec<Vec<Vec<C64>>>> {
        let n = &self.cfg.numerics;
        let (l_max, nc, m) = (self.max_order, self.ncomp(), self.set.len());
        let kt = (n.cauchy_nodes / 2).min(40);
        let flat = cauchy_taylor(|z| self.b_low(z).concat().concat(), n.cauchy_radius, n.cauchy_nodes, kt);
        let idx = |l: usize, c: usize, q: usize| (l * nc + c) * m + q;
        (0..ray.len())
            .map(|i| {
                let z = ray.node(i);
                let direct = z.norm() >= 0.5 * n.cauchy_radius;
                let b = if direct { Some(self.b_low(z)) } else { None };
                (0..=l_max)
                    .map(|l| {
                        (0..nc)
                            .map(|c| {
                                (0..m)
                                    .map(|q| {
                                        let f = idx(l, c, q);
                                        match &b {
                                            Some(b) => (b[l][c][q] - flat[0][f] - z * flat[1][f]) / (z * z),
                                            None => (2..=kt).rev().fold(C64::default(), |acc, k| acc * z + flat[k][f]),
                                        }
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Remainder orders `1..=upto` on one ray.
    pub fn ray_orders(&self, ray: &RayGrid, upto: usize, kernel: &dyn KernelInverse) -> Result<SeriesRay> {
        let (l_max, nc, d, m) = (self.max_order, self.ncomp(), self.dim(), self.set.len());
        let upto = upto.min(l_max);
        let g = self.cfg.g;
        let g2 = C64::from(g * g);
        let params = KernelParams::new(C64::from(g), &self.cfg.numerics)?;
        let inv = kernel.prepare(ray, &self.set, &self.fv, &params)?;
        let (_, dg2) = self.dgamma_jets();
        let blow = self.b_low_tilde(ray);
        let e = ray.euler_matrix().map(C64::from);
        let id = DMatrix::<C64>::identity(ray.len(), ray.len());
        let two_e = &id * C64::from(2.0) + &e;
        let mut zt = vec![GridFunction::zeros(ray, &self.set, nc, true)];
        for l in 1..=upto {
            let mut h = GridFunction::zeros(ray, &self.set, nc, true);
            for i in 0..ray.len() {
                let z = ray.node(i);
                let z2 = z * z;
                let bv: Vec<Vec<Vec<C64>>> =
                    (1..l).map(|k| (0..nc).map(|c| self.synth(&zt[k].comps[c].row(i).iter().cloned().collect::<Vec<_>>())).collect()).collect();
                let npts = self.col.len();
                let mut vals = vec![vec![C64::default(); npts]; nc];
                if l > 1 {
                    let c0 = cos_phi0(z);
                    for j in 0..npts {
                        let jets = self.low_jets(z, j);
                        let a = self.angle_phi(Some(z), jets[0].clone());
                        let psi = self.angles_psi(j, jets[1..].to_vec());
                        let b: Vec<Jet> =
                            (0..nc).map(|c| jet_from(l_max, |k| if k >= 1 && k < l { bv[k - 1][c][j] } else { C64::default() })).collect();
                        for c in 0..nc {
                            let mut v = pert_deriv_increment(&self.pert, &a, &psi, &b, z2, &unit(d, c)).shift().scale(g2);
                            if c == 0 {
                                let s = a.add(&Angle::real_shift(l_max, -FRAC_PI_2)).cos_increment(&b[0], z2);
                                v = v.add(&s.scale(g2)).sub(&b[0].scale(g2 * c0));
                            }
                            vals[c][j] = v.coeff(l);
                        }
                    }
                }
                for c in 0..nc {
                    let bz = self.analyze(&vals[c]);
                    for q in 0..m {
                        h.comps[c][(i, q)] = blow[i][l][c][q] + bz[q];
                    }
                }
            }
            // gamma corrections acting on lower remainder orders
            for k in 1..l {
                let prev = &zt[l - k];
                for c in 0..nc {
                    for q in 0..m {
                        let v = prev.comps[c].column(q).into_owned();
                        let lg = &id * C64::new(2.0 * g, self.kappa(q)) + &e * C64::from(g);
                        let t1 = &two_e * (&lg * &v);
                        let t2 = &two_e * (&two_e * &v);
                        let upd = t1 * (2.0 * self.gamma[k]) + t2 * dg2.coeff(k);
                        let mut col = h.comps[c].column_mut(q);
                        col -= upd;
                    }
                }
            }
            zt.push(inv.apply(&h)?);
        }
        Ok(SeriesRay { ray: ray.clone(), zt })
    }

    fn ray_of(&self, z: C64) -> &SeriesRay {
        &self.rays[usize::from(z.re < 0.0)]
    }

    fn combine(&self, l: usize, z: C64, ztm: &[Vec<C64>]) -> Vec<Vec<C64>> {
        (0..self.ncomp())
            .map(|c| {
                (0..self.set.len())
                    .map(|q| {
                        let mut x1 = self.x1[l][c][q];
                        if l == 0 && c == 0 && q == self.set.zero() {
                            x1 -= 4.0;
                        }
                        self.x0[l][c][q] + z * x1 + z * z * ztm[c][q]
                    })
                    .collect()
            })
            .collect()
    }

    /// Modes of `X^{u,l}(z, .) - delta_{l0} (Phi0(z), 0)` on the real-ray grids.
    pub fn order_tilde_modes(&self, l: usize, z: C64) -> Result<Vec<Vec<C64>>> {
        if l > self.max_order {
            return Err(Error::Config(format!("order {l} above the expansion order {}", self.max_order)));
        }
        let r = self.ray_of(z);
        if z.norm() > r.ray.radius * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("|z| = {} outside the series grid", z.norm())));
        }
        Ok(self.combine(l, z, &r.zt[l].stored_modes_at(z)))
    }

    fn fourier_eval(&self, modes: &[Vec<C64>], theta: &[C64]) -> Vec<C64> {
        let ph: Vec<C64> = self
            .set
            .modes
            .iter()
            .map(|q| (C64::new(0.0, 1.0) * q.iter().zip(theta).map(|(&k, t)| t * k as f64).sum::<C64>()).exp())
            .collect();
        modes.iter().map(|c| c.iter().zip(&ph).map(|(a, b)| a * b).sum()).collect()
    }

    /// `X^{u,l}(z, theta)`.
    pub fn eval_order(&self, l: usize, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let mut v = self.fourier_eval(&self.order_tilde_modes(l, z)?, theta);
        if l == 0 {
            v[0] += phi0(z)?;
        }
        Ok(v)
    }

    /// `z^2 Zt_l(z, theta)`, the part of order `l` vanishing to second order at `z = 0`.
    pub fn remainder_order(&self, l: usize, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        if l > self.max_order {
            return Err(Error::Config(format!("order {l} above the expansion order {}", self.max_order)));
        }
        let r = self.ray_of(z);
        if z.norm() > r.ray.radius * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("|z| = {} outside the series grid", z.norm())));
        }
        Ok(r.zt[l].eval(z, theta))
    }

    /// `sum_{l <= upto} eps^l (X^{u,l} - delta_{l0} X^0)`.
    pub fn partial_sum_tilde(&self, eps: C64, z: C64, theta: &[C64], upto: usize) -> Result<Vec<C64>> {
        let mut acc = vec![C64::default(); self.ncomp()];
        for l in (1..=upto.min(self.max_order)).rev() {
            let v = self.fourier_eval(&self.order_tilde_modes(l, z)?, theta);
            for (a, x) in acc.iter_mut().zip(v) {
                *a = (*a + x) * eps;
            }
        }
        Ok(acc)
    }

    pub fn in_wedge(&self, z: C64) -> bool {
        let n = &self.cfg.numerics;
        let arg = z.arg().abs();
        z.norm() <= n.wedge_tau || arg <= n.wedge_theta || PI - arg <= n.wedge_theta
    }

    /// Order `l` at complex `z` in the wedge, by solving the order
    /// recursion on the ray through `z`.
    pub fn continue_to_wedge(&self, l: usize, z: C64, theta: &[C64], kernel: &dyn KernelInverse) -> Result<WedgeValue> {
        if l > self.max_order {
            return Err(Error::Config(format!("order {l} above the expansion order {}", self.max_order)));
        }
        if !self.in_wedge(z) {
            return Err(Error::Domain(format!("z = {z} outside the wedge")));
        }
        let r = z.norm();
        if r == 0.0 || l == 0 {
            let mut value = self.fourier_eval(&self.combine(l, z, &vec![vec![C64::default(); self.set.len()]; self.ncomp()]), theta);
            let mut cert = 0.0;
            if l == 0 {
                let p = phi0(z)?;
                value[0] += p;
                cert = p.im.abs();
            }
            return Ok(WedgeValue { value, certificate: cert, eta_est: ETA_EST });
        }
        let n = self.cfg.numerics.wedge_nodes.max(16 * r.ceil() as usize);
        let ray = RayGrid::new(z / r, r, n);
        let mut cert: f64 = phi0(z)?.im.abs();
        for x in ray.nodes() {
            cert = cert.max(phi0(x)?.im.abs());
        }
        if cert > ETA_EST {
            return Err(Error::Domain(format!("continuation certificate {cert:e} exceeds {ETA_EST:e}")));
        }
        let sr = self.ray_orders(&ray, l, kernel)?;
        let value = self.fourier_eval(&self.combine(l, z, &sr.zt[l].stored_modes_at(z)), theta);
        Ok(WedgeValue { value, certificate: cert, eta_est: ETA_EST })
    }

    /// `max |oint X^{u,l} dz|` over components on the circle `|z - center| = radius`,
    /// each point continued independently.
    pub fn morera_loop(&self, l: usize, center: C64, radius: f64, npts: usize, theta: &[C64], kernel: &dyn KernelInverse) -> Result<f64> {
        let mut acc = vec![C64::default(); self.ncomp()];
        for k in 0..npts {
            let u = C64::from_polar(radius, 2.0 * PI * k as f64 / npts as f64);
            let v = self.continue_to_wedge(l, center + u, theta, kernel)?;
            let dz = C64::new(0.0, 1.0) * u * (2.0 * PI / npts as f64);
            for (a, x) in acc.iter_mut().zip(&v.value) {
                *a += x * dz;
            }
        }
        Ok(acc.iter().map(|x| x.norm()).fold(0.0, f64::max))
    }

    /// Largest `|q|_1` with a coefficient above `1e-12` in `X^{u,l}`, per order;
    /// remainder modes are measured as `z^2 Zt_l` over the nodes with `|z| <= 1`.
    pub fn trig_degree_check(&self) -> Vec<i32> {
        (0..=self.max_order)
            .map(|l| {
                let mut deg = 0;
                for (q, mode) in self.set.modes.iter().enumerate() {
                    let w: i32 = mode.iter().map(|k| k.abs()).sum();
                    let mut big = false;
                    for c in 0..self.ncomp() {
                        let mut x1 = self.x1[l][c][q];
                        if l == 0 && c == 0 && q == self.set.zero() {
                            x1 -= 4.0;
                        }
                        big |= self.x0[l][c][q].norm() > 1e-12 || x1.norm() > 1e-12;
                        for r in &self.rays {
                            for i in 0..r.ray.len() {
                                let t = r.ray.t[i];
                                if t <= 1.0 {
                                    big |= (r.zt[l].comps[c][(i, q)] * t * t).norm() > 1e-12;
                                }
                            }
                        }
                    }
                    if big {
                        deg = deg.max(w);
                    }
                }
                deg
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let cx = |c: C64| serde_json::json!({"re": c.re, "im": c.im});
        let orders: Vec<serde_json::Value> = (0..=self.max_order)
            .map(|l| {
                let samples: Vec<serde_json::Value> = [-1.0, -0.5, 0.5, 1.0]
                    .iter()
                    .filter_map(|&z| {
                        let th = vec![C64::default(); self.dim()];
                        self.eval_order(l, C64::from(z), &th).ok().map(|v| serde_json::json!({"z": z, "theta": 0.0, "value": v.into_iter().map(cx).collect::<Vec<_>>()}))
                    })
                    .collect();
                serde_json::json!({
                    "order": l,
                    "gamma": cx(self.gamma[l]),
                    "x0": (0..self.ncomp()).map(|c| self.x0_poly(l, c).chop(1e-300).to_json()).collect::<Vec<_>>(),
                    "x1": (0..self.ncomp()).map(|c| self.x1_poly(l, c).chop(1e-300).to_json()).collect::<Vec<_>>(),
                    "samples": samples,
                })
            })
            .collect();
        serde_json::json!({
            "max_order": self.max_order,
            "degree_bound_per_order": self.n_f,
            "trig_degrees": self.trig_degree_check(),
            "ward_residuals": self.ward,
            "orders": orders,
        })
    }
}

/// Coefficients of orders `0..=max_order` and the remainder orders on the
/// default real rays.
pub fn expand_orders(cfg: &ModelConfig, max_order: usize, kernel: &dyn KernelInverse) -> Result<EpsSeries> {
    if max_order == 0 || max_order > 6 {
        return Err(Error::Config(format!("expansion order {max_order} outside 1..=6")));
    }
    cfg.validate()?;
    let pert = cfg.perturbation();
    let d = cfg.dim();
    let n_f = pert.degree().max(1);
    let kb = (max_order as i32) * n_f;
    let set = ModeSet::l1_ball(d, kb);
    let col = Collocation::new(d, 2 * kb as usize + 2, kb as usize);
    let thetas = (0..col.len()).map(|j| col.theta(j)).collect();
    let npts = col.len();
    let zeros = vec![vec![C64::default(); set.len()]; d + 1];
    let mut x1_0 = zeros.clone();
    x1_0[0][set.zero()] = C64::from(4.0);
    let mut s = EpsSeries {
        cfg: cfg.clone(),
        pert,
        max_order,
        n_f,
        fv: cfg.freq(),
        gamma: vec![C64::from(cfg.g)],
        x0: vec![zeros.clone()],
        x1: vec![x1_0],
        ward: vec![0.0],
        rays: Vec::new(),
        col,
        thetas,
        x0v: vec![vec![vec![C64::default(); npts]; d + 1]],
        x1v: vec![vec![vec![C64::default(); npts]; d + 1]],
        dx1v: vec![vec![vec![C64::default(); npts]; d + 1]],
        set,
    };
    s.torus_orders();
    s.linear_orders()?;
    let n = &cfg.numerics;
    s.rays = RayGrid::real_pair(n.z_radius, n.z_nodes)
        .iter()
        .map(|r| s.ray_orders(r, max_order, kernel))
        .collect::<Result<_>>()?;
    Ok(s)
}
