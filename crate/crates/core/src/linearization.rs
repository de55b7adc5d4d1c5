//! Lyapunov exponent `gamma` and linearization `X1 = (Phi1, Psi1)` solving
//! `(D + gamma)^2 X1 = D Omega(X0) X1` with `<Phi1> = 4`.
//!
//! Eliminating `Psi1 = J Phi1` leaves `xi = G (pi0 xi + rho0)` for
//! `Phi1 = 4 + xi`, together with the zero-mode condition that fixes
//! `gamma`. Two methods are registered: a direct Newton solve and the
//! renormalization flow with fine tuning of `gamma`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{CoeffEntry, FourierPoly, FrequencyVector, ModeSet};
use crate::model::{ModelConfig, Perturbation};
use crate::torus::{TorusGrid, TorusSolution};

/// `(2 i gamma omega.q - (omega.q)^2)^-1`, zero at `q = 0`.
pub fn g_kernel(gamma: C64, kappa: f64, is_zero_mode: bool) -> C64 {
    if is_zero_mode {
        return C64::default();
    }
    (C64::new(0.0, 2.0 * kappa) * gamma - kappa * kappa).inv()
}

/// `chi_n(kappa) = exp(-(aleph^-n kappa)^6)`, `chi_0 = 1`.
pub fn chi_n(aleph: f64, n: usize, kappa: C64) -> C64 {
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let x = kappa * aleph.powi(-(n as i32));
    (-(x * x * x) * (x * x * x)).exp()
}

/// `min(1/8, (g/3)^2)`.
pub fn default_aleph(g: f64) -> f64 {
    (0.125f64).min((g / 3.0).powi(2))
}

/// Smallest `n` with `chi_n(omega.q) < 1e-16` on every nonzero mode of `set`.
pub fn default_levels(aleph: f64, fv: &FrequencyVector, set: &ModeSet) -> usize {
    let kmin = fv.min_divisor(set);
    let mut n = 1;
    while chi_n(aleph, n, kmin.into()).norm() >= 1e-16 {
        n += 1;
    }
    n
}

/// Multiplication operators of the fields along the torus, as dense
/// convolution matrices on `set`.
#[derive(Clone, Debug)]
pub struct LinOperators {
    pub set: ModeSet,
    pub fv: FrequencyVector,
    pub g: f64,
    /// `g^2 (cos Phi0 - 1) + lambda f_phiphi`
    pub mpp: DMatrix<C64>,
    /// `lambda f_phi psi_j`
    pub mpq: Vec<DMatrix<C64>>,
    /// `lambda f_psi_i phi`
    pub mqp: Vec<DMatrix<C64>>,
    /// `lambda f_psi_i psi_j`
    pub mqq: Vec<Vec<DMatrix<C64>>>,
}

impl LinOperators {
    pub fn new(cfg: &ModelConfig, pert: &Perturbation, torus: &TorusSolution, kmax: i32) -> Self {
        let d = cfg.dim();
        let grid = TorusGrid::new(d, kmax.max((torus.phi0.degree().max(0) + 1) / 2));
        let set = ModeSet::l1_ball(d, kmax);
        let args = grid.args(&torus.phi0, &torus.psi0);
        let lam = cfg.lambda();
        let g2 = cfg.g * cfg.g;
        let kb = 2 * kmax;
        let field = |a: usize, b: usize| {
            let mut o = vec![0; d + 1];
            o[a] += 1;
            o[b] += 1;
            set.conv_matrix(&grid.compose(&args, kb, |p, s| lam * pert.deriv(p, s, &o)))
        };
        let cosm = set.conv_matrix(&grid.compose(&args, kb, |p, _| g2 * (p.cos() - 1.0)));
        Self {
            mpp: cosm + field(0, 0),
            mpq: (0..d).map(|j| field(0, j + 1)).collect(),
            mqp: (0..d).map(|j| field(j + 1, 0)).collect(),
            mqq: (0..d).map(|i| (0..d).map(|j| field(i + 1, j + 1)).collect()).collect(),
            set,
            fv: cfg.freq(),
            g: cfg.g,
        }
    }

    pub fn dim(&self) -> usize {
        self.mpq.len()
    }

    fn m(&self) -> usize {
        self.set.len()
    }

    fn kappa(&self, k: usize) -> f64 {
        self.fv.dot(&self.set.modes[k])
    }

    /// `(D + gamma + i shift)^2 - lambda f_psipsi` on the stacked psi components.
    fn a_matrix(&self, gamma: C64, shift: f64) -> DMatrix<C64> {
        let (d, m) = (self.dim(), self.m());
        let mut a = DMatrix::zeros(d * m, d * m);
        for i in 0..d {
            for j in 0..d {
                a.view_mut((i * m, j * m), (m, m)).copy_from(&(-&self.mqq[i][j]));
            }
            for k in 0..m {
                let s = C64::new(0.0, self.kappa(k) + shift) + gamma;
                a[(i * m + k, i * m + k)] += s * s;
            }
        }
        a
    }

    fn stacked_qp(&self) -> DMatrix<C64> {
        let (d, m) = (self.dim(), self.m());
        let mut b = DMatrix::zeros(d * m, m);
        for i in 0..d {
            b.view_mut((i * m, 0), (m, m)).copy_from(&self.mqp[i]);
        }
        b
    }

    fn stacked_pq(&self) -> DMatrix<C64> {
        let (d, m) = (self.dim(), self.m());
        let mut b = DMatrix::zeros(m, d * m);
        for i in 0..d {
            b.view_mut((0, i * m), (m, m)).copy_from(&self.mpq[i]);
        }
        b
    }

    /// `J(shift) = [(D + gamma + i shift)^2 - lambda f_psipsi]^-1 lambda f_psiphi`,
    /// stacked over the psi components.
    pub fn j_shifted(&self, gamma: C64, shift: f64) -> Result<DMatrix<C64>> {
        self.a_matrix(gamma, shift)
            .lu()
            .solve(&self.stacked_qp())
            .ok_or_else(|| Error::Singular("resolvent in J".into()))
    }

    pub fn build_j(&self, gamma: C64) -> Result<DMatrix<C64>> {
        self.j_shifted(gamma, 0.0)
    }

    /// `H(shift) = g^2 (cos Phi0 - 1) + lambda f_phiphi + lambda f_phipsi J(shift)`.
    pub fn h_shifted(&self, gamma: C64, shift: f64) -> Result<DMatrix<C64>> {
        Ok(&self.mpp + self.stacked_pq() * self.j_shifted(gamma, shift)?)
    }

    pub fn build_h(&self, gamma: C64) -> Result<DMatrix<C64>> {
        self.h_shifted(gamma, 0.0)
    }

    /// `pi0 = H + g^2 - gamma^2` and its gamma-derivative.
    pub fn pi0_with_derivative(&self, gamma: C64) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
        let (d, m) = (self.dim(), self.m());
        let lu = self.a_matrix(gamma, 0.0).lu();
        let j = lu.solve(&self.stacked_qp()).ok_or_else(|| Error::Singular("resolvent in J".into()))?;
        let mut dj = j.clone();
        for i in 0..d {
            for k in 0..m {
                let s = 2.0 * (C64::new(0.0, self.kappa(k)) + gamma);
                dj.row_mut(i * m + k).scale_mut(-1.0);
                dj.row_mut(i * m + k).iter_mut().for_each(|x| *x *= s);
            }
        }
        let dj = lu.solve(&dj).ok_or_else(|| Error::Singular("resolvent in dJ".into()))?;
        let pq = self.stacked_pq();
        let mut pi = &self.mpp + &pq * &j;
        let mut dpi = &pq * dj;
        for k in 0..m {
            pi[(k, k)] += self.g * self.g - gamma * gamma;
            dpi[(k, k)] -= 2.0 * gamma;
        }
        Ok((pi, dpi))
    }

    pub fn pi0(&self, gamma: C64) -> Result<DMatrix<C64>> {
        Ok(self.pi0_with_derivative(gamma)?.0)
    }

    fn g_diag(&self, gamma: C64) -> Vec<C64> {
        let z0 = self.set.zero();
        (0..self.m()).map(|k| g_kernel(gamma, self.kappa(k), k == z0)).collect()
    }

    /// `l1` norm of `(D + gamma)^2 X1 - D Omega(X0) X1` on the retained modes.
    pub fn residual(&self, gamma: C64, phi1: &DVector<C64>, psi1: &[DVector<C64>]) -> f64 {
        let (d, m) = (self.dim(), self.m());
        let sq = |k: usize| {
            let s = C64::new(0.0, self.kappa(k)) + gamma;
            s * s
        };
        let mut rp = -(&self.mpp * phi1) - phi1 * C64::from(self.g * self.g);
        for j in 0..d {
            rp -= &self.mpq[j] * &psi1[j];
        }
        for k in 0..m {
            rp[k] += sq(k) * phi1[k];
        }
        let mut total: f64 = rp.iter().map(|x| x.norm()).sum();
        for i in 0..d {
            let mut r = -(&self.mqp[i] * phi1);
            for j in 0..d {
                r -= &self.mqq[i][j] * &psi1[j];
            }
            for k in 0..m {
                r[k] += sq(k) * psi1[i][k];
            }
            total += r.iter().map(|x| x.norm()).sum::<f64>();
        }
        total
    }

    fn finish(&self, gamma: C64, xi: &DVector<C64>, method: &str) -> Result<LinearizationSolution> {
        let (d, m) = (self.dim(), self.m());
        let mut phi1 = xi.clone();
        phi1[self.set.zero()] = C64::from(4.0);
        let jm = self.build_j(gamma)?;
        let psi_all = &jm * &phi1;
        let psi1: Vec<DVector<C64>> = (0..d).map(|i| psi_all.rows(i * m, m).into_owned()).collect();
        let residual = self.residual(gamma, &phi1, &psi1);
        Ok(LinearizationSolution {
            gamma,
            phi1: self.set.from_dense(phi1.as_slice()),
            psi1: psi1.iter().map(|v| self.set.from_dense(v.as_slice())).collect(),
            method: method.to_string(),
            residual,
            iterations: 0,
            delta_trace: Vec::new(),
            log_pi_norms: Vec::new(),
            levels: 0,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationSolution {
    pub gamma: C64,
    #[serde(skip)]
    pub phi1: FourierPoly,
    #[serde(skip)]
    pub psi1: Vec<FourierPoly>,
    pub method: String,
    pub residual: f64,
    pub iterations: usize,
    pub delta_trace: Vec<C64>,
    pub log_pi_norms: Vec<f64>,
    pub levels: usize,
}

impl LinearizationSolution {
    pub fn unperturbed(dim: usize, g: f64) -> Self {
        Self {
            gamma: C64::from(g),
            phi1: FourierPoly::constant(dim, C64::from(4.0)),
            psi1: vec![FourierPoly::zero(dim); dim],
            method: "exact".into(),
            residual: 0.0,
            iterations: 0,
            delta_trace: Vec::new(),
            log_pi_norms: Vec::new(),
            levels: 0,
        }
    }

    /// `|delta_n|` strictly decreasing along the trace. Once two consecutive
    /// values are both below `floor` the flow counts as converged; at that
    /// size they are roundoff and their order carries no information.
    pub fn delta_decreasing(&self, floor: f64) -> bool {
        self.delta_trace.windows(2).all(|w| w[1].norm() < w[0].norm() || w[0].norm().max(w[1].norm()) <= floor)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let e = |p: &FourierPoly| -> Vec<CoeffEntry> { p.to_json() };
        serde_json::json!({
            "gamma": {"re": self.gamma.re, "im": self.gamma.im},
            "phi1": e(&self.phi1),
            "psi1": self.psi1.iter().map(e).collect::<Vec<_>>(),
            "method": self.method,
            "residual": self.residual,
            "iterations": self.iterations,
            "delta_trace": self.delta_trace.iter().map(|c| serde_json::json!({"re": c.re, "im": c.im})).collect::<Vec<_>>(),
            "norms": {"log_pi_n": self.log_pi_norms},
            "levels": self.levels,
        })
    }
}

/// Newton on `(xi_q)_{q != 0}` and `gamma`.
pub fn solve_newton(ops: &LinOperators, tol: f64, max_iter: usize) -> Result<LinearizationSolution> {
    let m = ops.m();
    let z0 = ops.set.zero();
    let mut gamma = C64::from(ops.g);
    let mut xi = DVector::<C64>::zeros(m);
    for it in 0..=max_iter {
        let (pi, dpi) = ops.pi0_with_derivative(gamma)?;
        let gd = ops.g_diag(gamma);
        let mut phi1 = xi.clone();
        phi1[z0] = C64::from(4.0);
        let v = &pi * &phi1;
        let dv = &dpi * &phi1;
        let mut f = DVector::<C64>::zeros(m);
        for q in 0..m {
            f[q] = if q == z0 { v[q] } else { xi[q] - gd[q] * v[q] };
        }
        let fnorm: f64 = f.iter().map(|x| x.norm()).sum();
        if fnorm < tol {
            let mut s = ops.finish(gamma, &xi, "newton")?;
            s.iterations = it;
            return Ok(s);
        }
        if it == max_iter {
            return Err(Error::NoConvergence { what: "linearization Newton", iters: it, residual: fnorm });
        }
        let mut jac = DMatrix::<C64>::zeros(m, m);
        for q in 0..m {
            for p in 0..m {
                if p == z0 {
                    continue;
                }
                jac[(q, p)] = if q == z0 { pi[(q, p)] } else { -gd[q] * pi[(q, p)] + if p == q { 1.0 } else { 0.0 } };
            }
            jac[(q, z0)] = if q == z0 {
                dv[q]
            } else {
                let k = ops.kappa(q);
                let dg = -gd[q] * gd[q] * C64::new(0.0, 2.0 * k);
                -dg * v[q] - gd[q] * dv[q]
            };
        }
        let step = jac.lu().solve(&f).ok_or_else(|| {
            Error::Singular(format!("linearization Jacobian (smallest |omega.q| = {:e})", ops.fv.min_divisor(&ops.set)))
        })?;
        for p in 0..m {
            if p == z0 {
                gamma -= step[p];
            } else {
                xi[p] -= step[p];
            }
        }
    }
    unreachable!()
}

/// One level of the flow.
#[derive(Clone, Debug)]
pub struct RGState {
    pub level: usize,
    pub pi: DMatrix<C64>,
    pub rho: DVector<C64>,
    pub delta: C64,
    pub aleph: f64,
    pub alpha: f64,
    /// `x_n = Gamma_{<n} rho_n`
    pub x: DVector<C64>,
    /// `ln ||pi_n||_{n;-n}`
    pub log_norm: f64,
}

fn gamma_lt(ops: &LinOperators, gamma: C64, aleph: f64, n: usize) -> Vec<C64> {
    let gd = ops.g_diag(gamma);
    (0..ops.m()).map(|k| gd[k] * (1.0 - chi_n(aleph, n, ops.kappa(k).into()))).collect()
}

/// `ln sup_q sum_p |L(p,q)| w_n(p) w_{-n}(q)`, `w_n(q) = e^{aleph^-n |omega.q|}`.
pub fn log_weighted_norm(ops: &LinOperators, l: &DMatrix<C64>, aleph: f64, n: usize) -> f64 {
    let s = aleph.powi(-(n as i32));
    let m = ops.m();
    let mut best = f64::NEG_INFINITY;
    for q in 0..m {
        let terms: Vec<f64> = (0..m)
            .filter(|&p| l[(p, q)].norm() > 0.0)
            .map(|p| l[(p, q)].norm().ln() + s * (ops.kappa(p).abs() - ops.kappa(q).abs()))
            .collect();
        if terms.is_empty() {
            continue;
        }
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        best = best.max(mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln());
    }
    best
}

/// `pi_{n+1} = (1 - pi_n Gamma_n)^-1 pi_n`, `rho_{n+1} = (1 - pi_n Gamma_n)^-1 rho_n`.
pub fn rg_flow(ops: &LinOperators, gamma: C64, aleph: f64, levels: usize) -> Result<Vec<RGState>> {
    let m = ops.m();
    let z0 = ops.set.zero();
    let gd = ops.g_diag(gamma);
    let pi0 = ops.pi0(gamma)?;
    let rho0 = pi0.column(z0) * C64::from(4.0);
    let mut states = vec![RGState {
        level: 0,
        delta: pi0[(z0, z0)],
        log_norm: log_weighted_norm(ops, &pi0, aleph, 0),
        pi: pi0,
        rho: rho0,
        aleph,
        alpha: 1.0,
        x: DVector::zeros(m),
    }];
    for n in 0..levels {
        let cur = &states[n];
        let gam: Vec<C64> = (0..m)
            .map(|k| gd[k] * (chi_n(aleph, n, ops.kappa(k).into()) - chi_n(aleph, n + 1, ops.kappa(k).into())))
            .collect();
        let mut b = DMatrix::<C64>::identity(m, m);
        for p in 0..m {
            for q in 0..m {
                b[(p, q)] -= cur.pi[(p, q)] * gam[q];
            }
        }
        let lu = b.lu();
        let pi = lu.solve(&cur.pi).ok_or_else(|| Error::Singular(format!("1 - pi Gamma at level {n}: gamma out of basin")))?;
        let rho = lu.solve(&cur.rho).ok_or_else(|| Error::Singular(format!("1 - pi Gamma at level {n}")))?;
        let glt = gamma_lt(ops, gamma, aleph, n + 1);
        let x = DVector::from_iterator(m, (0..m).map(|k| glt[k] * rho[k]));
        let alpha = (1.0 - 4.0 / ((n + 3) as f64).powi(2)) * cur.alpha;
        states.push(RGState {
            level: n + 1,
            delta: pi[(z0, z0)],
            log_norm: log_weighted_norm(ops, &pi, aleph, n + 1),
            pi,
            rho,
            aleph,
            alpha,
            x,
        });
    }
    Ok(states)
}

/// Residual of `x_n = Gamma_{<n}(pi0 x_n + rho0)` per level.
pub fn approx_residuals(ops: &LinOperators, gamma: C64, states: &[RGState]) -> Vec<f64> {
    let (pi0, rho0) = (&states[0].pi, &states[0].rho);
    states
        .iter()
        .map(|s| {
            let glt = gamma_lt(ops, gamma, s.aleph, s.level);
            let v = pi0 * &s.x + rho0;
            (0..ops.m()).map(|k| (s.x[k] - glt[k] * v[k]).norm()).fold(0.0, f64::max)
        })
        .collect()
}

/// Solves `xi_n = G_n(pi_n xi_n + rho_n)` at every level and returns
/// `pi_n xi_n + rho_n`, which the flow keeps invariant.
pub fn invariance_chain(ops: &LinOperators, gamma: C64, states: &[RGState]) -> Result<Vec<DVector<C64>>> {
    let m = ops.m();
    let gd = ops.g_diag(gamma);
    states
        .iter()
        .map(|s| {
            let gn: Vec<C64> = (0..m).map(|k| gd[k] * chi_n(s.aleph, s.level, ops.kappa(k).into())).collect();
            let mut a = DMatrix::<C64>::identity(m, m);
            for p in 0..m {
                for q in 0..m {
                    a[(p, q)] -= gn[p] * s.pi[(p, q)];
                }
            }
            let rhs = DVector::from_iterator(m, (0..m).map(|k| gn[k] * s.rho[k]));
            let xi = a.lu().solve(&rhs).ok_or_else(|| Error::Singular(format!("level {} small-divisor problem", s.level)))?;
            Ok(&s.pi * xi + &s.rho)
        })
        .collect()
}

/// Secant on `gamma -> delta_N(gamma)` from `g(1 -+ 5|eps|)`.
pub fn tune_gamma_rg(ops: &LinOperators, eps: C64, aleph: f64, levels: usize, tol: f64) -> Result<LinearizationSolution> {
    let g = ops.g;
    let spread = (5.0 * eps.norm()).max(1e-3);
    let delta = |gm: C64| -> Result<C64> { Ok(rg_flow(ops, gm, aleph, levels)?[levels].delta) };
    let (mut a, mut b) = (C64::from(g * (1.0 - spread)), C64::from(g * (1.0 + spread)));
    let (mut da, mut db) = (delta(a)?, delta(b)?);
    let mut samples = vec![(a, da), (b, db)];
    let mut iters = 0;
    while db.norm() >= tol {
        iters += 1;
        if iters > 60 || db == da {
            return Err(Error::NoConvergence { what: "gamma secant (no bracket)", iters, residual: db.norm() });
        }
        let c = b - db * (b - a) / (db - da);
        a = b;
        da = db;
        b = c;
        db = delta(b)?;
        samples.push((b, db));
        if (b - a).norm() < 1e-15 * g {
            break;
        }
    }
    let states = rg_flow(ops, b, aleph, levels)?;
    let mut sol = ops.finish(b, &states[levels].x, "rg")?;
    sol.iterations = iters;
    sol.delta_trace = states.iter().map(|s| s.delta).collect();
    sol.log_pi_norms = states.iter().map(|s| s.log_norm).collect();
    sol.levels = levels;
    Ok(sol)
}

/// Strategy interface for the linearization solvers.
pub trait LinearizationMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, cfg: &ModelConfig, torus: &TorusSolution) -> Result<LinearizationSolution>;
}

pub struct NewtonMethod;
pub struct RgMethod;

impl LinearizationMethod for NewtonMethod {
    fn name(&self) -> &'static str {
        "newton"
    }

    fn solve(&self, cfg: &ModelConfig, torus: &TorusSolution) -> Result<LinearizationSolution> {
        let ops = LinOperators::new(cfg, &cfg.perturbation(), torus, cfg.numerics.kmax);
        solve_newton(&ops, 1e-14 * cfg.g * cfg.g, 40)
    }
}

impl LinearizationMethod for RgMethod {
    fn name(&self) -> &'static str {
        "rg"
    }

    fn solve(&self, cfg: &ModelConfig, torus: &TorusSolution) -> Result<LinearizationSolution> {
        let ops = LinOperators::new(cfg, &cfg.perturbation(), torus, cfg.k_rg());
        let aleph = default_aleph(cfg.g);
        let levels = cfg.numerics.n_levels.unwrap_or_else(|| default_levels(aleph, &ops.fv, &ops.set));
        tune_gamma_rg(&ops, cfg.eps(), aleph, levels, cfg.numerics.tol_delta)
    }
}

pub fn method_registry() -> Vec<Box<dyn LinearizationMethod>> {
    vec![Box::new(NewtonMethod), Box::new(RgMethod)]
}

pub fn method_by_name(name: &str) -> Result<Box<dyn LinearizationMethod>> {
    method_registry()
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::Config(format!("unknown linearization method '{name}' (newton|rg)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::solve_torus;

    fn setup(d: usize, eps: f64, k: i32) -> (ModelConfig, TorusSolution, LinOperators) {
        let mut cfg = ModelConfig::default_for(d, eps);
        cfg.numerics.kmax = k;
        cfg.numerics.k_rg = Some(k);
        let t = solve_torus(&cfg).unwrap();
        let ops = LinOperators::new(&cfg, &cfg.perturbation(), &t, k);
        (cfg, t, ops)
    }

    #[test]
    fn delta_monotonicity_with_floor() {
        let mut s = LinearizationSolution::unperturbed(1, 1.0);
        let c = |x: f64| C64::from(x);
        s.delta_trace = vec![c(1e-7), c(-1.3e-16), c(-1.3e-16)];
        assert!(s.delta_decreasing(1e-14));
        assert!(!s.delta_decreasing(0.0));
        s.delta_trace = vec![c(1e-7), c(2e-7), c(0.0)];
        assert!(!s.delta_decreasing(1e-14));
        s.delta_trace = vec![c(0.0); 3];
        assert!(s.delta_decreasing(0.0));
    }

    #[test]
    fn g_and_chi() {
        let g = C64::from(1.3);
        assert_eq!(g_kernel(g, 0.0, true), C64::default());
        let want = (C64::new(-1.0, 2.0) * g * g).inv();
        assert!((g_kernel(g, 1.3, false) - want).norm() < 1e-15);
        let k = 1e-3;
        assert!(g_kernel(g, k, false).norm() * k <= 1.0 / (2.0 * 1.3 - k) + 1e-12);
        assert_eq!(chi_n(0.3, 0, C64::from(7.0)), C64::from(1.0));
        assert!((chi_n(0.3, 1, C64::from(0.3)) - (-1.0f64).exp()).norm() < 1e-15);
        let mut last = 0.0;
        for n in 1..8 {
            let v = 1.0 - chi_n(0.3, n, C64::from(0.3)).re;
            assert!(v >= last);
            last = v;
        }
        assert!((last - 1.0).abs() < 1e-12);
        // telescoping partition of unity
        for i in 0..200 {
            let k = C64::from(-3.0 + 6.0 * i as f64 / 199.0);
            for n in 0..5 {
                let s: C64 = (0..n).map(|j| chi_n(0.2, j, k) - chi_n(0.2, j + 1, k)).sum();
                assert!((s - (1.0 - chi_n(0.2, n, k))).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn operators_at_zero_coupling() {
        let (_, _, ops) = setup(1, 0.0, 6);
        assert!(ops.build_j(C64::from(1.0)).unwrap().iter().all(|x| x.norm() == 0.0));
        assert!(ops.build_h(C64::from(1.0)).unwrap().iter().all(|x| x.norm() == 0.0));
        let s = solve_newton(&ops, 1e-14, 20).unwrap();
        assert_eq!(s.gamma, C64::from(1.0));
        assert!(s.psi1[0].iter().all(|(_, c)| c.norm() == 0.0));
        let st = rg_flow(&ops, C64::from(1.1), 1.0 / 9.0, 3).unwrap();
        for s in &st {
            assert!((s.delta - (1.0 - 1.21)).norm() < 1e-15);
            let diag_off: f64 = (0..ops.m()).flat_map(|p| (0..ops.m()).map(move |q| (p, q))).filter(|(p, q)| p != q).map(|(p, q)| s.pi[(p, q)].norm()).sum();
            assert_eq!(diag_off, 0.0);
        }
        let r = tune_gamma_rg(&ops, C64::default(), 1.0 / 9.0, 1, 1e-14).unwrap();
        assert!((r.gamma - 1.0).norm() < 1e-15);
    }

    #[test]
    fn j_first_order_and_neumann() {
        let (cfg, _, ops) = setup(1, 1e-5, 6);
        let g = C64::from(1.0);
        let j = ops.build_j(g).unwrap();
        let m = ops.m();
        let lead = {
            let mut a = ops.mqp[0].clone();
            for k in 0..m {
                let s = C64::new(0.0, ops.kappa(k)) + g;
                a.row_mut(k).iter_mut().for_each(|x| *x /= s * s);
            }
            a
        };
        let rel = (&j - &lead).norm() / lead.norm();
        assert!(rel < 1e-3, "{rel}");
        // three Neumann terms at eps = 1e-4: error O(eps^3) relative to J
        let _ = cfg;
        let (_, _, ops) = setup(1, 1e-4, 6);
        let j = ops.build_j(g).unwrap();
        let mut dinv = DMatrix::<C64>::zeros(m, m);
        for k in 0..m {
            let s = C64::new(0.0, ops.kappa(k)) + g;
            dinv[(k, k)] = 1.0 / (s * s);
        }
        let t1 = &dinv * &ops.mqp[0];
        let t2 = &dinv * &ops.mqq[0][0] * &t1;
        let t3 = &dinv * &ops.mqq[0][0] * &t2;
        let err = (&j - (&t1 + &t2 + &t3)).norm() / j.norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn h_structure() {
        let (_, _, ops) = setup(2, 1e-2, 5);
        let h = ops.build_h(C64::from(1.0)).unwrap();
        let set = &ops.set;
        for p in 0..set.len() {
            for q in 0..set.len() {
                let v = h[(set.neg(p), set.neg(q))] - h[(p, q)].conj();
                assert!(v.norm() < 1e-16);
            }
        }
        // exponential off-diagonal decay: max |H(p,q)| per |p - q|_1 falls off
        let mut by_dist = vec![0.0f64; 12];
        for p in 0..set.len() {
            for q in 0..set.len() {
                let dq: i32 = set.modes[p].iter().zip(&set.modes[q]).map(|(a, b)| (a - b).abs()).sum();
                let e = &mut by_dist[dq as usize];
                *e = e.max(h[(p, q)].norm());
            }
        }
        for w in by_dist[1..6].windows(2) {
            assert!(w[1] < w[0]);
        }
        // shifted family at zero shift is H itself
        assert!((ops.h_shifted(C64::from(1.0), 0.0).unwrap() - &h).norm() == 0.0);
    }

    #[test]
    fn newton_solution() {
        for d in [1, 2] {
            let (cfg, t, ops) = setup(d, 3e-3, 8);
            let s = solve_newton(&ops, 1e-14, 30).unwrap();
            assert!(s.residual < 1e-10, "{}", s.residual);
            assert!(s.gamma.im.abs() < 1e-14);
            assert!((s.gamma.re - 1.0).abs() < 0.5);
            assert!((s.phi1.coeff(&vec![0; d]) - 4.0).norm() < 1e-15);
            // gamma is pinned: moving it with X1 fixed raises the residual
            let phi1 = DVector::from_vec(ops.set.to_dense(&s.phi1));
            let psi1: Vec<DVector<C64>> = s.psi1.iter().map(|p| DVector::from_vec(ops.set.to_dense(p))).collect();
            assert!(ops.residual(s.gamma + 1e-4, &phi1, &psi1) > 1e-5);
            // translation covariance
            let beta: Vec<f64> = (0..d).map(|i| 0.3 + 0.2 * i as f64).collect();
            let pert = cfg.perturbation().translate(&beta);
            let t2 = crate::torus::TorusProblem::with_perturbation(&cfg, pert.clone()).solve().unwrap();
            let ops2 = LinOperators::new(&cfg, &pert, &t2, 8);
            let s2 = solve_newton(&ops2, 1e-14, 30).unwrap();
            assert!((s2.gamma - s.gamma).norm() < 1e-13);
            let b: Vec<C64> = beta.iter().map(|&x| x.into()).collect();
            assert!(crate::fourier::op_translate(&b, &s.phi1).max_abs_diff(&s2.phi1) < 1e-12);
            let _ = t;
        }
    }

    #[test]
    fn rg_agrees_with_newton() {
        for d in [1, 2] {
            let (cfg, _, ops) = setup(d, 1e-3, 8);
            let aleph = default_aleph(1.0);
            let levels = default_levels(aleph, &ops.fv, &ops.set);
            assert_eq!(levels, if d == 1 { 1 } else { 2 });
            let n = solve_newton(&ops, 1e-14, 30).unwrap();
            let r = tune_gamma_rg(&ops, cfg.eps(), aleph, levels, 1e-14).unwrap();
            assert!((n.gamma - r.gamma).norm() < 1e-12, "{} {}", n.gamma, r.gamma);
            assert!(n.phi1.max_abs_diff(&r.phi1) < 1e-10);
            assert!(r.residual < 1e-9);
            // flow diagnostics at the tuned gamma
            let st = rg_flow(&ops, r.gamma, aleph, levels).unwrap();
            for s in &st {
                let rho_ok = (0..ops.m()).all(|k| (s.rho[k] - 4.0 * s.pi[(k, ops.set.zero())]).norm() < 1e-12);
                assert!(rho_ok);
            }
            for w in approx_residuals(&ops, r.gamma, &st) {
                assert!(w < 1e-10);
            }
            let chain = invariance_chain(&ops, r.gamma, &st).unwrap();
            for v in &chain[1..] {
                assert!((v - &chain[0]).iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-10);
            }
        }
    }

    #[test]
    fn registry() {
        assert!(method_by_name("rg").is_ok() && method_by_name("newton").is_ok());
        assert!(matches!(method_by_name("x"), Err(Error::Config(_))));
    }
}
