//! The pendulum coupled to d rotators: perturbation, configuration,
//! vector field and energy.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{l1, FrequencyVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    #[default]
    Cos,
    Sin,
}

/// One harmonic `c cos(j phi + q.psi + phase)` (or `sin`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub j: i32,
    pub q: Vec<i32>,
    pub c: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub kind: TermKind,
}

impl Term {
    pub fn cos(j: i32, q: Vec<i32>, c: f64) -> Self {
        Self { j, q, c, phase: 0.0, kind: TermKind::Cos }
    }

    pub fn shift(&self) -> f64 {
        match self.kind {
            TermKind::Cos => self.phase,
            TermKind::Sin => self.phase - FRAC_PI_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub terms: Vec<Term>,
}

impl Perturbation {
    /// `cos phi cos psi_1 = (cos(phi + psi_1) + cos(phi - psi_1)) / 2`.
    pub fn arnold(dim: usize) -> Self {
        let mut e = vec![0; dim];
        e[0] = 1;
        let m: Vec<i32> = e.iter().map(|x| -x).collect();
        Self { terms: vec![Term::cos(1, e, 0.5), Term::cos(1, m, 0.5)] }
    }

    /// Trigonometric degree in psi.
    pub fn degree(&self) -> i32 {
        self.terms.iter().map(|t| l1(&t.q)).max().unwrap_or(0)
    }

    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|t| {
            let r = t.shift().rem_euclid(PI);
            r < 1e-14 || PI - r < 1e-14
        })
    }

    /// `f(phi, psi + beta)`.
    pub fn translate(&self, beta: &[f64]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.phase += t.q.iter().zip(beta).map(|(&k, b)| k as f64 * b).sum::<f64>();
                t
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, phi: C64, psi: &[C64]) -> C64 {
        self.deriv(phi, psi, &[])
    }

    /// Mixed partial derivative; `orders[0]` counts phi, `orders[1 + i]`
    /// counts psi_i. Missing entries are zero.
    pub fn deriv(&self, phi: C64, psi: &[C64], orders: &[usize]) -> C64 {
        let n: usize = orders.iter().sum();
        let mut acc = C64::default();
        for t in &self.terms {
            let mut fac = t.c;
            for (a, &o) in orders.iter().enumerate() {
                let k = if a == 0 { t.j } else { t.q[a - 1] };
                fac *= (k as f64).powi(o as i32);
            }
            if fac == 0.0 {
                continue;
            }
            let arg: C64 = phi * t.j as f64
                + t.q.iter().zip(psi).map(|(&k, p)| p * k as f64).sum::<C64>()
                + t.shift()
                + n as f64 * FRAC_PI_2;
            acc += fac * arg.cos();
        }
        acc
    }

    /// `(df/dphi, df/dpsi_1, ..)`.
    pub fn grad(&self, phi: C64, psi: &[C64]) -> Vec<C64> {
        let d = psi.len();
        (0..=d)
            .map(|a| {
                let mut o = vec![0; d + 1];
                o[a] = 1;
                self.deriv(phi, psi, &o)
            })
            .collect()
    }
}

pub fn f_eval(p: &Perturbation, phi: f64, psi: &[f64]) -> f64 {
    let ps: Vec<C64> = psi.iter().map(|&x| x.into()).collect();
    p.eval(phi.into(), &ps).re
}

pub fn grad_f(p: &Perturbation, phi: f64, psi: &[f64]) -> (f64, Vec<f64>) {
    let ps: Vec<C64> = psi.iter().map(|&x| x.into()).collect();
    let g = p.grad(phi.into(), &ps);
    (g[0].re, g[1..].iter().map(|x| x.re).collect())
}

/// Discretization and tolerance knobs. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Numerics {
    pub kmax: i32,
    pub q_check: i32,
    pub tol_torus: f64,
    pub max_newton: usize,
    pub k_rg: Option<i32>,
    pub n_levels: Option<usize>,
    pub tol_delta: f64,
    pub z_nodes: usize,
    pub z_radius: f64,
    pub tau: f64,
    pub cauchy_radius: f64,
    pub cauchy_nodes: usize,
    pub quad_order: usize,
    pub quad_depth: f64,
    pub panel_width: f64,
    pub tol_z: f64,
    pub max_z_iters: usize,
    pub wedge_tau: f64,
    pub wedge_theta: f64,
    pub wedge_nodes: usize,
    pub ball_r: f64,
    pub eps0: f64,
    pub tol_integrator: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            kmax: 12,
            q_check: 50,
            tol_torus: 1e-13,
            max_newton: 40,
            k_rg: None,
            n_levels: None,
            tol_delta: 1e-13,
            z_nodes: 48,
            z_radius: 3.0,
            tau: 0.1,
            cauchy_radius: 0.025,
            cauchy_nodes: 64,
            quad_order: 32,
            quad_depth: 39.0,
            panel_width: 1.0,
            tol_z: 1e-12,
            max_z_iters: 60,
            wedge_tau: 0.3,
            wedge_theta: 0.2,
            wedge_nodes: 64,
            ball_r: 0.1,
            eps0: 1e-2,
            tol_integrator: 1e-13,
            seed: 7,
            threads: 1,
        }
    }
}

/// The full model and numerics, as read from one TOML or JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub g: f64,
    pub omega: Vec<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub diophantine_a: Option<f64>,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub eps_im: f64,
    #[serde(default)]
    pub f_terms: Vec<Term>,
    #[serde(flatten)]
    pub numerics: Numerics,
}

impl ModelConfig {
    /// Defaults for dimension `dim` at coupling `eps`.
    pub fn default_for(dim: usize, eps: f64) -> Self {
        let fv = FrequencyVector::default_for(dim);
        let mut numerics = Numerics::default();
        numerics.k_rg = Some(if dim == 1 { 12 } else { 8 });
        Self {
            g: 1.0,
            omega: fv.omega,
            nu: Some(fv.nu),
            diophantine_a: Some(fv.a),
            eps,
            eps_im: 0.0,
            f_terms: Perturbation::arnold(dim).terms,
            numerics,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn eps(&self) -> C64 {
        C64::new(self.eps, self.eps_im)
    }

    pub fn lambda(&self) -> C64 {
        self.eps() * self.g * self.g
    }

    pub fn with_eps(&self, eps: C64) -> Self {
        let mut c = self.clone();
        c.eps = eps.re;
        c.eps_im = eps.im;
        c
    }

    pub fn freq(&self) -> FrequencyVector {
        let def = FrequencyVector::default_for(self.dim());
        FrequencyVector::new(self.omega.clone(), self.nu.unwrap_or(def.nu), self.diophantine_a.unwrap_or(def.a))
    }

    pub fn perturbation(&self) -> Perturbation {
        if self.f_terms.is_empty() {
            Perturbation::arnold(self.dim())
        } else {
            Perturbation { terms: self.f_terms.clone() }
        }
    }

    pub fn k_rg(&self) -> i32 {
        self.numerics.k_rg.unwrap_or(if self.dim() == 1 { 12 } else { 8 })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.omega.is_empty() {
            return bad("omega must have at least one component".into());
        }
        if !(self.g > 0.0) {
            return bad(format!("g must be positive, got {}", self.g));
        }
        for t in &self.f_terms {
            if t.q.len() != self.dim() {
                return bad(format!("f term {:?} has wrong dimension", t.q));
            }
        }
        let n = &self.numerics;
        if !(n.tau > 0.0 && n.tau < 1.0) {
            return bad(format!("tau must lie in (0,1), got {}", n.tau));
        }
        if n.kmax < 1 || n.z_nodes < 8 || n.cauchy_nodes < 8 {
            return bad("truncations too small".into());
        }
        if self.eps().norm() > n.eps0 {
            return bad(format!("|eps| = {} exceeds eps0 = {}", self.eps().norm(), n.eps0));
        }
        self.freq().check(n.q_check).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `Omega(X)(theta) = (g^2 sin Phi, 0) + lambda grad f(Phi, theta + Psi)`.
pub fn omega_eval(cfg: &ModelConfig, pert: &Perturbation, x: &[C64], theta: &[C64]) -> Vec<C64> {
    let psi: Vec<C64> = theta.iter().zip(&x[1..]).map(|(t, p)| t + p).collect();
    let lam = cfg.lambda();
    let mut out: Vec<C64> = pert.grad(x[0], &psi).into_iter().map(|v| lam * v).collect();
    out[0] += cfg.g * cfg.g * x[0].sin();
    out
}

/// Point of phase space; angles are lifts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phi: f64,
    pub psi: Vec<f64>,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
}

impl PhaseState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.phi];
        v.extend(&self.psi);
        v.push(self.i);
        v.extend(&self.a);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let d = (v.len() - 2) / 2;
        Self { phi: v[0], psi: v[1..=d].to_vec(), i: v[d + 1], a: v[d + 2..].to_vec() }
    }

    pub fn distance(&self, o: &Self) -> f64 {
        self.to_vec().iter().zip(o.to_vec()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `(phi', psi', I', A') = (I, A, g^2 sin phi + lambda f_phi, lambda f_psi)`.
pub fn eom_rhs(cfg: &ModelConfig, pert: &Perturbation, s: &PhaseState) -> PhaseState {
    let lam = cfg.lambda().re;
    let (fp, fs) = grad_f(pert, s.phi, &s.psi);
    PhaseState {
        phi: s.i,
        psi: s.a.clone(),
        i: cfg.g * cfg.g * s.phi.sin() + lam * fp,
        a: fs.iter().map(|v| lam * v).collect(),
    }
}

pub fn energy(cfg: &ModelConfig, pert: &Perturbation, s: &PhaseState) -> f64 {
    0.5 * s.i * s.i + cfg.g * cfg.g * s.phi.cos() + 0.5 * s.a.iter().map(|x| x * x).sum::<f64>()
        - cfg.lambda().re * f_eval(pert, s.phi, &s.psi)
}
