use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde_json::json;
use whisker_core::lindstedt::expand_orders;
use whisker_lab::pipeline::run_verify;
use whisker_lab::{exit_code, load_config, parse_complex, parse_section, plot, to_json_string, Context};

#[derive(Parser)]
#[command(name = "whisker-lab", version, about = "Whiskered tori of the quasiperiodically forced pendulum")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML or JSON configuration; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// number of rotators when no configuration file is given
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// coupling override
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// K^{-1} strategy: quadrature | collocation
    #[arg(long, default_value = "quadrature")]
    kernel: String,
    /// linearization strategy: newton | rg
    #[arg(long, default_value = "newton")]
    method: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Invariant torus
    Torus(Common),
    /// Linearization and Lyapunov exponent
    Linearize(Common),
    /// Normalized unstable and stable whiskers
    Whisker(Common),
    /// Order-by-order expansion in the coupling
    Expand {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// One expansion order at a complex point of the wedge
    Wedge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        l: usize,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// angle, broadcast to all components, or a comma list
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        theta: String,
    },
    /// Verification report; exit code 0 iff every check passes
    Verify {
        #[command(flatten)]
        common: Common,
        /// restrict to the named checks
        #[arg(long)]
        only: Vec<String>,
        /// directory for per-stage JSON artifacts
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// (phi, I) samples of both whiskers on a constant-angle section
    Plotdata {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "psi=0")]
        section: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn context(c: &Common) -> Result<Context> {
    let cfg = load_config(c.config.as_deref(), c.dim, c.eps)?;
    Context::new(cfg, &c.kernel, &c.method)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Torus(c) => {
            let mut ctx = context(&c)?;
            let v = ctx.torus()?.to_json();
            emit(c.out.as_deref(), &to_json_string(&v))?;
        }
        Cmd::Linearize(c) => {
            let mut ctx = context(&c)?;
            let v = ctx.linearization()?.to_json();
            emit(c.out.as_deref(), &to_json_string(&v))?;
        }
        Cmd::Whisker(c) => {
            let mut ctx = context(&c)?;
            let v = ctx.whisker()?.to_json();
            emit(c.out.as_deref(), &to_json_string(&v))?;
        }
        Cmd::Expand { common, order } => {
            let ctx = context(&common)?;
            let s = expand_orders(&ctx.cfg, order, ctx.kernel.as_ref())?;
            emit(common.out.as_deref(), &to_json_string(&s.to_json()))?;
        }
        Cmd::Wedge { common, l, z, theta } => {
            let ctx = context(&common)?;
            let z = parse_complex(&z)?;
            let th: Vec<C64> = parse_section(&format!("psi={theta}"), ctx.cfg.dim())?.into_iter().map(C64::from).collect();
            let s = expand_orders(&ctx.cfg, l.max(1), ctx.kernel.as_ref())?;
            let w = s.continue_to_wedge(l, z, &th, ctx.kernel.as_ref())?;
            let c = |v: C64| json!({"re": v.re, "im": v.im});
            let v = json!({
                "order": l,
                "z": c(z),
                "theta": th.iter().map(|t| t.re).collect::<Vec<_>>(),
                "value": w.value.iter().map(|&v| c(v)).collect::<Vec<_>>(),
                "certificate": w.certificate,
                "eta_est": w.eta_est,
            });
            emit(common.out.as_deref(), &to_json_string(&v))?;
        }
        Cmd::Verify { common, only, artifacts } => {
            let mut ctx = context(&common)?;
            let rep = run_verify(&mut ctx, &only)?;
            if let Some(dir) = artifacts {
                ctx.write_artifacts(&dir)?;
            }
            eprint!("{}", rep.to_text());
            emit(common.out.as_deref(), &to_json_string(&rep.to_json()))?;
            return Ok(rep.exit_code());
        }
        Cmd::Plotdata { common, section, samples } => {
            let mut ctx = context(&common)?;
            let th = parse_section(&section, ctx.cfg.dim())?;
            let w = ctx.whisker()?;
            let csv = plot::section_csv(w, &th, samples)?;
            plot::validate_csv(&csv)?;
            eprintln!("max branch gap on the section: {:.3e}", plot::branch_gap(w, &th, 41)?);
            emit(common.out.as_deref(), &csv)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
