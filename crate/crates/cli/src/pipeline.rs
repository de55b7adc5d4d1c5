//! Lazily computed stages sharing one configuration, and the verification report.

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde_json::{json, Value};
use whisker_core::kernel::{inverse_by_name, KernelInverse};
use whisker_core::lindstedt::{expand_orders, EpsSeries};
use whisker_core::linearization::{method_by_name, LinearizationSolution};
use whisker_core::model::ModelConfig;
use whisker_core::torus::{solve_torus, TorusSolution};
use whisker_core::whisker::WhiskerSolution;

use crate::checks::{check_registry, CheckOutcome, Status};

/// Reads a TOML/JSON configuration, or the defaults for `dim` when no path
/// is given, then applies the coupling override and validates.
pub fn load_config(path: Option<&Path>, dim: usize, eps: Option<f64>) -> Result<ModelConfig> {
    let mut cfg = match path {
        Some(p) => ModelConfig::from_path(p)?,
        None => ModelConfig::default_for(dim, 0.0),
    };
    if let Some(e) = eps {
        cfg.eps = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One configuration and the stages computed from it so far.
pub struct Context {
    pub cfg: ModelConfig,
    pub kernel: Box<dyn KernelInverse>,
    pub method: String,
    /// expansion order used by the series checks
    pub series_order: usize,
    torus: Option<TorusSolution>,
    lin: Option<LinearizationSolution>,
    whisker: Option<WhiskerSolution>,
    series: Option<EpsSeries>,
}

impl Context {
    pub fn new(cfg: ModelConfig, kernel: &str, method: &str) -> Result<Self> {
        method_by_name(method)?;
        Ok(Self {
            cfg,
            kernel: inverse_by_name(kernel)?,
            method: method.to_string(),
            series_order: 3,
            torus: None,
            lin: None,
            whisker: None,
            series: None,
        })
    }

    pub fn torus(&mut self) -> Result<&TorusSolution> {
        if self.torus.is_none() {
            self.torus = Some(solve_torus(&self.cfg)?);
        }
        Ok(self.torus.as_ref().expect("set above"))
    }

    pub fn linearization(&mut self) -> Result<&LinearizationSolution> {
        if self.lin.is_none() {
            let torus = self.torus()?.clone();
            self.lin = Some(method_by_name(&self.method)?.solve(&self.cfg, &torus)?);
        }
        Ok(self.lin.as_ref().expect("set above"))
    }

    /// Unstable whisker with the independently solved stable branch.
    pub fn whisker(&mut self) -> Result<&WhiskerSolution> {
        if self.whisker.is_none() {
            let torus = self.torus()?.clone();
            let lin = self.linearization()?.clone();
            let w = WhiskerSolution::assemble(&self.cfg, &torus, &lin, self.kernel.as_ref())?.with_independent_stable(self.kernel.as_ref())?;
            self.whisker = Some(w);
        }
        Ok(self.whisker.as_ref().expect("set above"))
    }

    pub fn series(&mut self) -> Result<&EpsSeries> {
        if self.series.is_none() {
            self.series = Some(expand_orders(&self.cfg, self.series_order, self.kernel.as_ref())?);
        }
        Ok(self.series.as_ref().expect("set above"))
    }
}

impl Context {
    /// Writes one JSON file per stage computed so far; stages that were
    /// never reached (or failed) are skipped. Returns the paths written.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let mut put = |name: &str, v: Value| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, crate::to_json_string(&v))?;
            out.push(p);
            Ok(())
        };
        if let Some(t) = &self.torus {
            put("torus.json", t.to_json())?;
        }
        if let Some(l) = &self.lin {
            put("linearization.json", l.to_json())?;
        }
        if let Some(w) = &self.whisker {
            put("whisker.json", w.to_json())?;
        }
        if let Some(s) = &self.series {
            put("expand.json", s.to_json())?;
        }
        Ok(out)
    }
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Outcome of `verify`.
pub struct RunReport {
    pub config: Value,
    pub stages: Value,
    pub checks: Vec<CheckOutcome>,
    /// wall-clock seconds per check; kept out of the JSON so that reports
    /// of identical runs are byte-identical
    pub timing: Vec<(String, f64)>,
    pub provenance: Value,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "config": self.config,
            "stages": self.stages,
            "checks": self.checks.iter().map(CheckOutcome::to_json).collect::<Vec<_>>(),
            "pass": self.passed(),
            "provenance": self.provenance,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let t = self.timing.iter().find(|(n, _)| *n == c.name).map_or(0.0, |x| x.1);
            s.push_str(&format!("{:<5} {:<22} value {:>10.3e}  tol {:>8.1e}  {:>7.2}s  {}\n", c.status.label(), c.name, c.value, c.tol, t, c.detail));
        }
        s.push_str(if self.passed() { "verify: PASS\n" } else { "verify: FAIL\n" });
        s
    }
}

/// Runs every registered check whose name is in `only` (all when empty).
/// A stage error inside a check counts as a failure of that check.
pub fn run_verify(ctx: &mut Context, only: &[String]) -> Result<RunReport> {
    let mut checks = Vec::new();
    let mut timing = Vec::new();
    for chk in check_registry() {
        if !only.is_empty() && !only.iter().any(|o| o == chk.name()) {
            continue;
        }
        let t0 = Instant::now();
        let out = match chk.run(ctx) {
            Ok(o) => o,
            Err(e) => {
                if crate::exit_code(&e) == 2 {
                    return Err(e);
                }
                CheckOutcome::new(chk.name(), f64::NAN, chk.tol(), Status::Fail, format!("stage error: {e}"))
            }
        };
        timing.push((chk.name().to_string(), t0.elapsed().as_secs_f64()));
        checks.push(out);
    }
    let mut stages = serde_json::Map::new();
    if let Some(t) = &ctx.torus {
        stages.insert("torus".into(), json!({"residual_phi": t.residual_phi, "residual_psi": t.residual_psi, "newton_iterations": t.newton_iterations}));
    }
    if let Some(l) = &ctx.lin {
        stages.insert("linearization".into(), json!({"gamma": {"re": l.gamma.re, "im": l.gamma.im}, "residual": l.residual, "method": l.method}));
    }
    if let Some(w) = &ctx.whisker {
        stages.insert("whisker".into(), json!({"z_sup": w.z_sup, "iterations": w.z_history.len(), "normalization_defect": w.unstable.defect}));
    }
    Ok(RunReport {
        config: serde_json::to_value(&ctx.cfg)?,
        stages: Value::Object(stages),
        checks,
        timing,
        provenance: json!({"git": git_hash(), "seed": ctx.cfg.numerics.seed, "kernel": ctx.kernel.name(), "method": ctx.method}),
    })
}
