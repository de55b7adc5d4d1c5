//! Verification checks as a registry of trait objects.

use std::f64::consts::PI;

use anyhow::Result;
use num_complex::Complex64 as C64;
use serde_json::{json, Value};
use whisker_core::linearization::{LinearizationMethod, NewtonMethod, RgMethod};
use whisker_core::torus::ward_residual;

use crate::pipeline::Context;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub status: Status,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: &str, value: f64, tol: f64, status: Status, detail: String) -> Self {
        Self { name: name.to_string(), value, tol, status, detail }
    }

    pub fn to_json(&self) -> Value {
        json!({"name": self.name, "value": self.value, "tol": self.tol, "status": self.status.label(), "detail": self.detail})
    }
}

pub trait Check {
    fn name(&self) -> &'static str;
    fn tol(&self) -> f64;
    fn run(&self, ctx: &mut Context) -> Result<CheckOutcome>;
}

enum Measured {
    Value(f64, String),
    Skip(String),
}

/// A check whose value must stay below its tolerance.
struct Bounded {
    name: &'static str,
    tol: f64,
    eval: fn(&mut Context) -> Result<Measured>,
}

impl Check for Bounded {
    fn name(&self) -> &'static str {
        self.name
    }

    fn tol(&self) -> f64 {
        self.tol
    }

    fn run(&self, ctx: &mut Context) -> Result<CheckOutcome> {
        Ok(match (self.eval)(ctx)? {
            Measured::Value(v, detail) => {
                let st = if v.is_finite() && v < self.tol { Status::Pass } else { Status::Fail };
                CheckOutcome::new(self.name, v, self.tol, st, detail)
            }
            Measured::Skip(why) => CheckOutcome::new(self.name, f64::NAN, self.tol, Status::Skip, why),
        })
    }
}

fn torus_residual(ctx: &mut Context) -> Result<Measured> {
    let t = ctx.torus()?;
    Ok(Measured::Value(t.residual_phi.max(t.residual_psi), format!("{} Newton steps", t.newton_iterations)))
}

fn ward_identity(ctx: &mut Context) -> Result<Measured> {
    let psi = ctx.torus()?.psi0.clone();
    let r = ward_residual(&ctx.cfg, &psi)?;
    Ok(Measured::Value(r.iter().cloned().fold(0.0, f64::max), "at the converged torus".into()))
}

fn linearization_residual(ctx: &mut Context) -> Result<Measured> {
    let l = ctx.linearization()?;
    Ok(Measured::Value(l.residual, format!("gamma = {:.12}", l.gamma.re)))
}

fn newton_vs_rg(ctx: &mut Context) -> Result<Measured> {
    let torus = ctx.torus()?.clone();
    let a = NewtonMethod.solve(&ctx.cfg, &torus)?;
    let b = RgMethod.solve(&ctx.cfg, &torus)?;
    // deltas at the roundoff floor (all of them at eps = 0) count as converged
    let dec = b.delta_decreasing(1e-14 * ctx.cfg.g);
    let v = (a.gamma - b.gamma).norm() / ctx.cfg.g;
    // a non-monotone flow fails the check regardless of the gamma agreement
    let v = if dec { v } else { f64::INFINITY };
    Ok(Measured::Value(v, format!("{} RG levels, |delta_n| decreasing: {dec}", b.levels)))
}

fn normalization(ctx: &mut Context) -> Result<Measured> {
    let w = ctx.whisker()?;
    let d = w.dim();
    let x = w.eval_xu(C64::from(1.0), &vec![C64::default(); d])?;
    let mut dev = (x[0] - PI).norm();
    for v in &x[1..] {
        dev = dev.max(v.norm());
    }
    Ok(Measured::Value(dev, "X^u(1,0) = (pi,0)".into()))
}

fn pde_residual(ctx: &mut Context) -> Result<Measured> {
    let r = ctx.whisker()?.residual_pde()?;
    Ok(Measured::Value(r.residual, format!("stencil Richardson {:.1e}", r.richardson)))
}

fn symmetry(ctx: &mut Context) -> Result<Measured> {
    let seed = ctx.cfg.numerics.seed;
    let v = ctx.whisker()?.symmetry_check(100, seed)?;
    Ok(Measured::Value(v, "independent X^s, Y^s vs reversal of X^u, Y^u at 100 points".into()))
}

fn homoclinic(ctx: &mut Context) -> Result<Measured> {
    let v = ctx.whisker()?.homoclinic_check(41, true)?;
    Ok(Measured::Value(v, "|W^s - W^u| along the characteristic, |t| <= 1/gamma".into()))
}

fn shadowing(ctx: &mut Context) -> Result<Measured> {
    if ctx.cfg.eps_im != 0.0 {
        return Ok(Measured::Skip("complex coupling".into()));
    }
    let g = ctx.cfg.g;
    let w = ctx.whisker()?;
    let t0 = 0.05f64.ln() / w.gamma.re;
    let th0 = vec![0.0; w.dim()];
    let v = w.shadow_check((t0, t0 + 3.0 / g), 1.0, &th0, 31)?;
    Ok(Measured::Value(v, "integration from W^u(0.05, .) over 3/g".into()))
}

fn degree_bound(ctx: &mut Context) -> Result<Measured> {
    let s = ctx.series()?;
    let degs = s.trig_degree_check();
    let bad = degs.iter().enumerate().filter(|(l, d)| **d > *l as i32 * s.n_f).count();
    Ok(Measured::Value(bad as f64, format!("degrees per order {degs:?}, bound l*{}", s.n_f)))
}

pub fn check_registry() -> Vec<Box<dyn Check>> {
    let b = |name, tol, eval| -> Box<dyn Check> { Box::new(Bounded { name, tol, eval }) };
    vec![
        b("torus_residual", 1e-10, torus_residual),
        b("ward_identity", 1e-10, ward_identity),
        b("linearization_residual", 1e-10, linearization_residual),
        b("newton_vs_rg", 1e-6, newton_vs_rg),
        b("normalization", 1e-10, normalization),
        b("pde_residual", 1e-7, pde_residual),
        b("symmetry", 1e-9, symmetry),
        b("homoclinic", 1e-7, homoclinic),
        b("shadowing", 1e-5, shadowing),
        b("degree_bound", 0.5, degree_bound),
    ]
}
