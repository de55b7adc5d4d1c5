//! The ten acceptance criteria at their stated tolerances, one PASS/FAIL
//! line each. Criteria listed in `KNOWN_UNATTAINABLE` are expected to fail;
//! every other criterion must pass. Runs without the libtest harness so the
//! lines are printed even when everything passes.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use whisker_core::fourier::FourierPoly;
use whisker_core::kernel::QuadratureInverse;
use whisker_core::lindstedt::expand_orders;
use whisker_core::linearization::{LinearizationMethod, NewtonMethod, RgMethod};
use whisker_core::model::{ModelConfig, Term, TermKind};
use whisker_core::torus::{solve_torus, ward_residual};
use whisker_core::whisker::WhiskerSolution;
use whisker_lab::Context;

const KNOWN_UNATTAINABLE: &[usize] = &[4];

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn ctx(d: usize, eps: f64) -> Context {
    Context::new(ModelConfig::default_for(d, eps), "quadrature", "newton").unwrap()
}

fn whisker(cfg: &ModelConfig) -> WhiskerSolution {
    WhiskerSolution::solve(cfg, &QuadratureInverse).unwrap()
}

fn zeros(d: usize) -> Vec<C64> {
    vec![C64::default(); d]
}

/// Real sample points `|z| <= 1` and a few angles.
fn samples(d: usize) -> Vec<(C64, Vec<C64>)> {
    let mut v = Vec::new();
    for &z in &[-1.0, -0.7, -0.4, -0.1, 0.05, 0.3, 0.6, 0.9, 1.0] {
        for &t in &[0.0, 1.1, 2.9, 4.6] {
            v.push((C64::from(z), (0..d).map(|k| C64::from(t + 0.7 * k as f64)).collect()));
        }
    }
    v
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn separatrix(z: C64, d: usize) -> Vec<C64> {
    let mut x = zeros(d + 1);
    x[0] = 4.0 * z.atan();
    x
}

/// `sup |X^u - X^0|` over the sample points.
fn distance_to_separatrix(w: &WhiskerSolution) -> f64 {
    let d = w.dim();
    samples(d).iter().map(|(z, th)| sup_diff(&w.eval_xu(*z, th).unwrap(), &separatrix(*z, d))).fold(0.0, f64::max)
}

fn c1() -> (bool, String) {
    let mut c = ctx(1, 0.0);
    let t = c.torus().unwrap();
    let x0 = t.phi0.iter().chain(t.psi0.iter().flat_map(|p| p.iter())).map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let l = c.linearization().unwrap();
    let gam = (l.gamma - 1.0).norm();
    let mut x1 = (l.phi1.coeff(&[0]) - 4.0).norm();
    for (q, v) in l.phi1.iter() {
        if q[0] != 0 {
            x1 = x1.max(v.norm());
        }
    }
    for p in &l.psi1 {
        x1 = x1.max(p.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max));
    }
    let w = c.whisker().unwrap();
    let z = w.z_sup;
    let xu = distance_to_separatrix(w);
    let worst = gam.max(x0).max(x1).max(z).max(xu);
    (worst < 1e-9, format!("|gamma-g| {gam:.1e}, X0 {x0:.1e}, X1 {x1:.1e}, Z {z:.1e}, X^u {xu:.1e}"))
}

fn c2() -> (bool, String) {
    let mut ok = true;
    let mut s = Vec::new();
    for d in [1, 2] {
        let mut c = ctx(d, 1e-3);
        c.cfg.numerics.kmax = 12;
        let r = c.whisker().unwrap().residual_pde().unwrap().residual;
        ok &= r < 1e-7;
        s.push(format!("d={d} {r:.2e}"));
    }
    (ok, s.join(", "))
}

fn c3() -> (bool, String) {
    let mut ok = true;
    let mut s = Vec::new();
    for eps in [1e-3, 3e-3] {
        let cfg = ModelConfig::default_for(1, eps);
        let t = solve_torus(&cfg).unwrap();
        let a = NewtonMethod.solve(&cfg, &t).unwrap();
        let b = RgMethod.solve(&cfg, &t).unwrap();
        let dev = (a.gamma - b.gamma).norm() / cfg.g;
        let dec = b.delta_trace.windows(2).all(|w| w[1].norm() < w[0].norm());
        ok &= dev < 1e-6 && dec && !b.delta_trace.is_empty();
        s.push(format!("eps={eps:e}: {dev:.2e}, {} levels, |delta_n| decreasing {dec}", b.levels));
    }
    (ok, s.join("; "))
}

/// `(|gamma - g| / (g |eps|), sup |X^u - X^0| / |eps|)`.
fn scaling_ratios(cfg: &ModelConfig) -> (f64, f64) {
    let w = whisker(cfg);
    ((w.gamma - cfg.g).norm() / (cfg.g * cfg.eps.abs()), distance_to_separatrix(&w) / cfg.eps.abs())
}

fn c4() -> (bool, String) {
    let (ga, xa) = scaling_ratios(&ModelConfig::default_for(1, 1e-3));
    let (gb, xb) = scaling_ratios(&ModelConfig::default_for(1, 1e-4));
    let stable = |a: f64, b: f64| (a / b - 1.0).abs() < 0.2;
    (
        stable(ga, gb) && stable(xa, xb),
        format!("gamma ratio {ga:.3e} -> {gb:.3e}, X^u ratio {xa:.3e} -> {xb:.3e}"),
    )
}

/// The exponent ratio for a perturbation whose first-order exponent shift
/// does not vanish. Reported alongside criterion 4, not scored.
fn c4_generic_f() -> String {
    let cfg = |eps| {
        let mut c = ModelConfig::default_for(1, eps);
        c.f_terms.push(Term::cos(1, vec![0], 0.5));
        c
    };
    let (ga, xa) = scaling_ratios(&cfg(1e-3));
    let (gb, xb) = scaling_ratios(&cfg(1e-4));
    format!("generic f (+ cos phi / 2): gamma ratio {ga:.3e} -> {gb:.3e}, X^u ratio {xa:.3e} -> {xb:.3e}")
}

fn suite(cfg: ModelConfig) -> (f64, f64) {
    let w = whisker(&cfg).with_independent_stable(&QuadratureInverse).unwrap();
    (w.symmetry_check(100, cfg.numerics.seed).unwrap(), w.homoclinic_check(41, true).unwrap())
}

fn c5() -> (bool, String) {
    let (sym, hom) = suite(ModelConfig::default_for(1, 1e-3));
    let mut odd = ModelConfig::default_for(1, 1e-3);
    odd.f_terms.push(Term { kind: TermKind::Sin, ..Term::cos(1, vec![1], 0.5) });
    let (osym, ohom) = suite(odd);
    let control_fails = !(osym < 1e-9 && ohom < 1e-7);
    (
        sym < 1e-9 && hom < 1e-7 && control_fails,
        format!("symmetry {sym:.2e}, homoclinic {hom:.2e}; odd control {osym:.2e} / {ohom:.2e}"),
    )
}

fn c6() -> (bool, String) {
    let cfg = ModelConfig::default_for(1, 1e-3);
    let w = whisker(&cfg);
    let t0 = 0.05f64.ln() / w.gamma.re;
    let dev = w.shadow_check((t0, t0 + 3.0 / cfg.g), 1.0, &[0.0], 31).unwrap();
    (dev < 1e-5, format!("max deviation {dev:.2e}"))
}

fn random_psi(rng: &mut ChaCha8Rng, d: usize) -> Vec<FourierPoly> {
    (0..d)
        .map(|_| {
            let mut p = FourierPoly::zero(d);
            for _ in 0..4 {
                let q: Vec<i32> = (0..d).map(|_| rng.gen_range(-3..=3)).collect();
                if q.iter().all(|&k| k == 0) {
                    continue;
                }
                let c = C64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                let mq: Vec<i32> = q.iter().map(|k| -k).collect();
                p.set(&q, p.coeff(&q) + c);
                p.set(&mq, p.coeff(&mq) + c.conj());
            }
            p
        })
        .collect()
}

fn c7() -> (bool, String) {
    let mut worst_torus: f64 = 0.0;
    let mut worst_trial: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in [1, 2] {
        let cfg = ModelConfig::default_for(d, 1e-3);
        let t = solve_torus(&cfg).unwrap();
        worst_torus = ward_residual(&cfg, &t.psi0).unwrap().into_iter().fold(worst_torus, f64::max);
        for _ in 0..20 {
            let psi = random_psi(&mut rng, d);
            worst_trial = ward_residual(&cfg, &psi).unwrap().into_iter().fold(worst_trial, f64::max);
        }
    }
    (worst_torus < 1e-10 && worst_trial < 1e-10, format!("torus {worst_torus:.1e}, 20 trial Psi per d {worst_trial:.1e}"))
}

fn c8() -> (bool, String) {
    let s = expand_orders(&ModelConfig::default_for(1, 0.0), 3, &QuadratureInverse).unwrap();
    let degs = s.trig_degree_check();
    let ok = s.n_f == 1 && degs.iter().enumerate().all(|(l, &g)| g <= l as i32);
    (ok, format!("degrees above 1e-12 per order {degs:?}, N = {}", s.n_f))
}

fn c9() -> (bool, String) {
    let mut cfg0 = ModelConfig::default_for(1, 0.0);
    cfg0.numerics.kmax = 10;
    let s = expand_orders(&cfg0, 2, &QuadratureInverse).unwrap();
    let err = |eps: f64| {
        let mut c = cfg0.clone();
        c.eps = eps;
        let w = whisker(&c);
        samples(1)
            .iter()
            .map(|(z, th)| {
                let a = w.unstable.parts.eval(*z, th).unwrap();
                let mut b = zeros(2);
                for l in 0..=2 {
                    let x = s.eval_order(l, *z, th).unwrap();
                    for (bi, xi) in b.iter_mut().zip(&x) {
                        *bi += eps.powi(l as i32) * xi;
                    }
                }
                sup_diff(&a, &b)
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1e-2), err(5e-3));
    let r = e1 / e2;
    (r > 4.0 && r < 16.0, format!("errors {e1:.2e}, {e2:.2e}, ratio {r:.2}"))
}

fn c10() -> (bool, String) {
    let s = expand_orders(&ModelConfig::default_for(1, 0.0), 2, &QuadratureInverse).unwrap();
    let th = [C64::from(0.3)];
    let center = C64::from_polar(5.0, 0.1);
    let loop_int = s.morera_loop(1, center, 0.2, 32, &th, &QuadratureInverse).unwrap();
    let mut overlap: f64 = 0.0;
    for &t in &[0.5, 0.7, 0.85, 1.0] {
        let a = s.continue_to_wedge(1, C64::from(t), &th, &QuadratureInverse).unwrap().value;
        let b = s.eval_order(1, C64::from(t), &th).unwrap();
        overlap = overlap.max(sup_diff(&a, &b));
    }
    (loop_int < 1e-8 && overlap < 1e-7, format!("contour {loop_int:.2e}, overlap {overlap:.2e}"))
}

fn main() {
    type Run = fn() -> (bool, String);
    let table: [(&str, Option<f64>, Run); 10] = [
        ("unperturbed exactness", Some(10.0), c1),
        ("PDE residual", Some(120.0), c2),
        ("Lyapunov exponent Newton vs RG", Some(60.0), c3),
        ("linear scaling in eps", None, c4),
        ("symmetry and homoclinic suite", None, c5),
        ("shadowing", Some(60.0), c6),
        ("Ward identity", None, c7),
        ("degree bound", None, c8),
        ("asymptotic order", None, c9),
        ("wedge continuation", Some(120.0), c10),
    ];
    let mut out = Vec::new();
    for (k, (title, limit, run)) in table.iter().enumerate() {
        let t0 = Instant::now();
        let (mut pass, mut detail) = run();
        let elapsed = t0.elapsed();
        if let Some(lim) = limit {
            if elapsed.as_secs_f64() > *lim {
                pass = false;
                detail.push_str(&format!(" (over the {lim} s limit)"));
            }
        }
        let o = Outcome { id: k + 1, title, pass, detail, elapsed };
        println!(
            "{} criterion {:>2} {:<32} {:>7.2}s  {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.elapsed.as_secs_f64(),
            o.detail
        );
        if o.id == 4 {
            println!("INFO criterion  4 {}", c4_generic_f());
        }
        out.push(o);
    }
    let mut unexpected = Vec::new();
    for o in &out {
        let known = KNOWN_UNATTAINABLE.contains(&o.id);
        if o.pass == known {
            unexpected.push(o.id);
        }
    }
    let w = whisker(&ModelConfig::default_for(1, 1e-3));
    let x = w.eval_xu(C64::from(1.0), &zeros(1)).unwrap();
    let norm_ok = (x[0] - PI).norm() < 1e-10 && x[1].norm() < 1e-10;
    println!("{} normalization X^u(1,0) = (pi,0) at eps = 1e-3", if norm_ok { "PASS" } else { "FAIL" });
    let failed = out.iter().filter(|o| !o.pass).map(|o| o.id).collect::<Vec<_>>();
    println!("acceptance: {} of 10 pass; failing {failed:?}; known unattainable {KNOWN_UNATTAINABLE:?}", 10 - failed.len());
    if !unexpected.is_empty() || !norm_ok {
        eprintln!("unexpected outcome for criteria {unexpected:?} (a known-unattainable criterion that passes must be taken off the list)");
        std::process::exit(1);
    }
}
