//! The invariant torus `X0 = (Phi0, Psi0)`: `D^2 X0 = Omega(X0)` on
//! `T^d`, with `<Psi0> = 0`.
//!
//! Phi is slaved to Psi through the contraction
//! `Phi = (D^2 - g^2)^-1 U(Phi, Psi)`; Psi is found by Newton on the
//! nonzero modes of `D^2 Psi - V(Psi)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::collocation::Collocation;
use crate::error::{Error, Result};
use crate::fourier::{op_inv_d2_minus_g2, CoeffEntry, FourierPoly, ModeSet};
use crate::model::{ModelConfig, Perturbation};

/// Collocation grid sized for products and convolution matrices of
/// degree-`kmax` series.
#[derive(Clone, Debug)]
pub struct TorusGrid {
    pub col: Collocation,
    pub set: ModeSet,
    pub wide: ModeSet,
}

impl TorusGrid {
    pub fn new(dim: usize, kmax: i32) -> Self {
        Self { col: Collocation::for_degree(dim, kmax), set: ModeSet::l1_ball(dim, kmax), wide: ModeSet::l1_ball(dim, 2 * kmax) }
    }

    pub fn kmax(&self) -> i32 {
        self.set.kmax
    }

    /// `(Phi(theta_j), theta_j + Psi(theta_j))` at every grid point.
    pub fn args(&self, phi: &FourierPoly, psi: &[FourierPoly]) -> Vec<(C64, Vec<C64>)> {
        let pv = self.col.synth_poly(phi);
        let sv: Vec<Vec<C64>> = psi.iter().map(|p| self.col.synth_poly(p)).collect();
        (0..self.col.len())
            .map(|j| {
                let th = self.col.theta(j);
                (pv[j], th.iter().enumerate().map(|(i, t)| sv[i][j] + t).collect())
            })
            .collect()
    }

    /// Coefficients up to `kb` of `theta -> h(args(theta))`.
    pub fn compose(&self, args: &[(C64, Vec<C64>)], kb: i32, h: impl Fn(C64, &[C64]) -> C64) -> FourierPoly {
        let vals: Vec<C64> = args.iter().map(|(p, s)| h(*p, s)).collect();
        self.col.analyze_poly(&vals, kb).chop(1e-300)
    }
}

#[derive(Clone, Debug)]
pub struct TorusSolution {
    pub phi0: FourierPoly,
    pub psi0: Vec<FourierPoly>,
    pub residual_phi: f64,
    pub residual_psi: f64,
    pub residual_zero_mode: f64,
    pub newton_iterations: usize,
    pub inner_iterations: usize,
    pub min_divisor: f64,
    pub is_real: bool,
}

impl TorusSolution {
    pub fn zero(dim: usize) -> Self {
        Self {
            phi0: FourierPoly::zero(dim),
            psi0: vec![FourierPoly::zero(dim); dim],
            residual_phi: 0.0,
            residual_psi: 0.0,
            residual_zero_mode: 0.0,
            newton_iterations: 0,
            inner_iterations: 0,
            min_divisor: f64::INFINITY,
            is_real: true,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let e = |p: &FourierPoly| -> Vec<CoeffEntry> { p.to_json() };
        serde_json::json!({
            "phi0": e(&self.phi0),
            "psi0": self.psi0.iter().map(e).collect::<Vec<_>>(),
            "residuals": {"phi": self.residual_phi, "psi": self.residual_psi, "zero_mode": self.residual_zero_mode},
            "iterations": {"newton": self.newton_iterations, "inner": self.inner_iterations},
            "min_divisor": self.min_divisor,
            "real": self.is_real,
        })
    }
}

/// Everything a solve needs that does not change between iterations.
pub struct TorusProblem<'a> {
    pub cfg: &'a ModelConfig,
    pub pert: Perturbation,
    pub grid: TorusGrid,
}

impl<'a> TorusProblem<'a> {
    pub fn new(cfg: &'a ModelConfig) -> Self {
        Self::with_perturbation(cfg, cfg.perturbation())
    }

    pub fn with_perturbation(cfg: &'a ModelConfig, pert: Perturbation) -> Self {
        let grid = TorusGrid::new(cfg.dim(), cfg.numerics.kmax);
        Self { cfg, pert, grid }
    }

    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn l1(f: &FourierPoly) -> f64 {
        f.iter().map(|(_, c)| c.norm()).sum()
    }

    /// `U = g^2 (sin Phi - Phi) + lambda f_phi(Phi, theta + Psi)`.
    pub fn u_eval(&self, phi: &FourierPoly, psi: &[FourierPoly]) -> FourierPoly {
        let g2 = self.cfg.g * self.cfg.g;
        let lam = self.cfg.lambda();
        let mut o = vec![0; self.dim() + 1];
        o[0] = 1;
        let args = self.grid.args(phi, psi);
        self.grid.compose(&args, self.grid.kmax(), |p, s| g2 * (p.sin() - p) + lam * self.pert.deriv(p, s, &o))
    }

    /// `V = lambda f_psi(Phi, theta + Psi)` at the given Phi.
    pub fn v_at(&self, phi: &FourierPoly, psi: &[FourierPoly]) -> Vec<FourierPoly> {
        let lam = self.cfg.lambda();
        let args = self.grid.args(phi, psi);
        (0..self.dim())
            .map(|i| {
                let mut o = vec![0; self.dim() + 1];
                o[i + 1] = 1;
                self.grid.compose(&args, self.grid.kmax(), |p, s| lam * self.pert.deriv(p, s, &o))
            })
            .collect()
    }

    /// Fixed point of `Phi -> (D^2 - g^2)^-1 U(Phi, Psi)` from `start`.
    pub fn solve_phi_from(&self, psi: &[FourierPoly], start: FourierPoly) -> Result<(FourierPoly, usize)> {
        let fv = self.cfg.freq();
        let tol = self.cfg.numerics.tol_torus;
        let mut phi = start;
        let mut last = f64::INFINITY;
        for it in 1..=200 {
            let next = op_inv_d2_minus_g2(&fv, self.cfg.g, &self.u_eval(&phi, psi));
            let change = Self::l1(&next.sub(&phi)?);
            phi = next;
            if change < tol {
                return Ok((phi, it));
            }
            if it > 3 && change > last {
                return Err(Error::NoConvergence { what: "phi fixed point (coupling too large)", iters: it, residual: change });
            }
            last = change;
        }
        Err(Error::NoConvergence { what: "phi fixed point", iters: 200, residual: last })
    }

    pub fn solve_phi0(&self, psi: &[FourierPoly]) -> Result<FourierPoly> {
        Ok(self.solve_phi_from(psi, FourierPoly::zero(self.dim()))?.0)
    }

    pub fn v_eval(&self, psi: &[FourierPoly]) -> Result<Vec<FourierPoly>> {
        Ok(self.v_at(&self.solve_phi0(psi)?, psi))
    }

    /// `|<V^i> - <Psi . d_i V>|` per component.
    pub fn ward_residual(&self, psi: &[FourierPoly]) -> Result<Vec<f64>> {
        let phi = self.solve_phi0(psi)?;
        let lam = self.cfg.lambda();
        let args = self.grid.args(&phi, psi);
        let d = self.dim();
        let v: Vec<FourierPoly> = (0..d)
            .map(|j| {
                let mut o = vec![0; d + 1];
                o[j + 1] = 1;
                self.grid.compose(&args, 2 * self.grid.kmax(), |p, s| lam * self.pert.deriv(p, s, &o))
            })
            .collect();
        Ok((0..d)
            .map(|i| {
                let lhs = v[i].coeff(&vec![0; d]);
                let mut rhs = C64::default();
                for j in 0..d {
                    for (q, c) in psi[j].iter() {
                        let mq: Vec<i32> = q.iter().map(|x| -x).collect();
                        rhs += c * C64::new(0.0, mq[i] as f64) * v[j].coeff(&mq);
                    }
                }
                (lhs - rhs).norm()
            })
            .collect())
    }

    fn first_order_psi(&self) -> Vec<FourierPoly> {
        let fv = self.cfg.freq();
        let zero = vec![FourierPoly::zero(self.dim()); self.dim()];
        self.v_at(&FourierPoly::zero(self.dim()), &zero)
            .into_iter()
            .map(|v| {
                let mut out = FourierPoly::zero(self.dim());
                for (q, c) in v.iter() {
                    let k = fv.dot(q);
                    if q.iter().any(|&x| x != 0) {
                        out.set(q, c / (-k * k));
                    }
                }
                out
            })
            .collect()
    }

    /// Newton matrix `D^2 - lambda M_qq - lambda M_qp A^-1 lambda M_pq` on
    /// all modes, `A = D^2 - g^2 cos Phi - lambda M_pp`.
    fn jacobian(&self, phi: &FourierPoly, psi: &[FourierPoly]) -> Result<DMatrix<C64>> {
        let d = self.dim();
        let set = &self.grid.set;
        let m = set.len();
        let fv = self.cfg.freq();
        let lam = self.cfg.lambda();
        let g2 = self.cfg.g * self.cfg.g;
        let args = self.grid.args(phi, psi);
        let kb = 2 * self.grid.kmax();
        let field = |o: &[usize]| self.grid.compose(&args, kb, |p, s| lam * self.pert.deriv(p, s, o));
        let ord = |a: usize, b: usize| {
            let mut o = vec![0; d + 1];
            o[a] += 1;
            o[b] += 1;
            o
        };
        let cosp = self.grid.compose(&args, kb, |p, _| g2 * p.cos());
        let mut a = -set.conv_matrix(&cosp) - set.conv_matrix(&field(&ord(0, 0)));
        for (k, q) in set.modes.iter().enumerate() {
            let w = fv.dot(q);
            a[(k, k)] -= w * w;
        }
        let lu = a.lu();
        let mut jac = DMatrix::<C64>::zeros(d * m, d * m);
        let mpq: Vec<DMatrix<C64>> = (0..d).map(|j| set.conv_matrix(&field(&ord(0, j + 1)))).collect();
        let sol: Vec<DMatrix<C64>> = mpq
            .iter()
            .map(|b| lu.solve(b).ok_or_else(|| Error::Singular("phi block of the torus Jacobian".into())))
            .collect::<Result<_>>()?;
        for i in 0..d {
            for j in 0..d {
                let blk = set.conv_matrix(&field(&ord(i + 1, j + 1))) + &mpq[i] * &sol[j];
                jac.view_mut((i * m, j * m), (m, m)).copy_from(&(-blk));
            }
            for (k, q) in set.modes.iter().enumerate() {
                let w = fv.dot(q);
                jac[(i * m + k, i * m + k)] -= w * w;
            }
        }
        Ok(jac)
    }

    pub fn solve(&self) -> Result<TorusSolution> {
        let d = self.dim();
        let set = &self.grid.set;
        let m = set.len();
        let fv = self.cfg.freq();
        let tol = self.cfg.numerics.tol_torus;
        let z0 = set.zero();
        if self.cfg.eps().norm() == 0.0 {
            return Ok(TorusSolution { min_divisor: fv.min_divisor(set), ..TorusSolution::zero(d) });
        }
        let mut psi = self.first_order_psi();
        let (mut phi, mut inner) = self.solve_phi_from(&psi, FourierPoly::zero(d))?;
        let mut res_norm;
        let mut iters = 0;
        let keep: Vec<usize> = (0..d * m).filter(|r| r % m != z0).collect();
        loop {
            let v = self.v_at(&phi, &psi);
            let mut f = DVector::<C64>::zeros(d * m);
            for i in 0..d {
                for (k, q) in set.modes.iter().enumerate() {
                    let w = fv.dot(q);
                    f[i * m + k] = -w * w * psi[i].coeff(q) - v[i].coeff(q);
                }
            }
            res_norm = keep.iter().map(|&r| f[r].norm()).sum();
            if res_norm < tol {
                break;
            }
            if iters >= self.cfg.numerics.max_newton {
                return Err(Error::NoConvergence { what: "torus Newton", iters, residual: res_norm });
            }
            iters += 1;
            let jac = self.jacobian(&phi, &psi)?;
            let jr = jac.select_rows(&keep).select_columns(&keep);
            let fr = DVector::from_iterator(keep.len(), keep.iter().map(|&r| f[r]));
            let dx = jr.lu().solve(&fr).ok_or_else(|| Error::Singular(format!("torus Newton (smallest divisor {:e})", fv.min_divisor(set))))?;
            for (n, &r) in keep.iter().enumerate() {
                let (i, k) = (r / m, r % m);
                let q = &set.modes[k];
                let c = psi[i].coeff(q) - dx[n];
                psi[i].set(q, c);
            }
            let (p, it) = self.solve_phi_from(&psi, phi)?;
            phi = p;
            inner += it;
        }
        let u = self.u_eval(&phi, &psi);
        let lhs = phi.map_modes(|q| {
            let w = fv.dot(q);
            C64::from(-w * w - self.cfg.g * self.cfg.g)
        });
        let residual_phi = Self::l1(&lhs.sub(&u)?);
        let v = self.v_at(&phi, &psi);
        let residual_zero_mode = v.iter().map(|p| p.coeff(&vec![0; d]).norm()).sum();
        let is_real = phi.is_real(1e-14) && psi.iter().all(|p| p.is_real(1e-14));
        Ok(TorusSolution {
            phi0: phi,
            psi0: psi,
            residual_phi,
            residual_psi: res_norm,
            residual_zero_mode,
            newton_iterations: iters,
            inner_iterations: inner,
            min_divisor: fv.min_divisor(set),
            is_real,
        })
    }
}

pub fn u_eval(cfg: &ModelConfig, phi: &FourierPoly, psi: &[FourierPoly]) -> FourierPoly {
    TorusProblem::new(cfg).u_eval(phi, psi)
}

pub fn solve_phi0(cfg: &ModelConfig, psi: &[FourierPoly]) -> Result<FourierPoly> {
    TorusProblem::new(cfg).solve_phi0(psi)
}

pub fn v_eval(cfg: &ModelConfig, psi: &[FourierPoly]) -> Result<Vec<FourierPoly>> {
    TorusProblem::new(cfg).v_eval(psi)
}

pub fn solve_torus(cfg: &ModelConfig) -> Result<TorusSolution> {
    TorusProblem::new(cfg).solve()
}

pub fn ward_residual(cfg: &ModelConfig, psi: &[FourierPoly]) -> Result<Vec<f64>> {
    TorusProblem::new(cfg).ward_residual(psi)
}
