//! `(phi, I)` samples of both whiskers on a constant-angle section.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use whisker_core::whisker::WhiskerSolution;

pub const HEADER: &str = "branch,phi,I";

/// CSV with columns `branch,phi,I`.
pub fn section_csv(w: &WhiskerSolution, theta: &[f64], n: usize) -> Result<String> {
    let rows = w.section_samples(theta, n)?;
    if rows.is_empty() {
        bail!("empty section");
    }
    let mut s = String::from(HEADER);
    s.push('\n');
    for (branch, _, phi, i) in rows {
        s.push_str(&format!("{branch},{phi:.16e},{i:.16e}\n"));
    }
    Ok(s)
}

/// Checks the column layout and value types; returns the row count per
/// branch `(unstable, stable)`.
pub fn validate_csv(text: &str) -> Result<(usize, usize)> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        bail!("header must be '{HEADER}'");
    }
    let (mut u, mut st) = (0, 0);
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            bail!("row {k}: expected 3 fields");
        }
        match f[0] {
            "unstable" => u += 1,
            "stable" => st += 1,
            other => bail!("row {k}: unknown branch '{other}'"),
        }
        for x in &f[1..] {
            let v: f64 = x.parse().map_err(|_| anyhow::anyhow!("row {k}: '{x}' is not a number"))?;
            if !v.is_finite() {
                bail!("row {k}: non-finite value");
            }
        }
    }
    if u == 0 || st == 0 {
        bail!("both branches must be present");
    }
    Ok((u, st))
}

/// Angle difference reduced to `[-pi, pi]`.
fn angle_gap(a: f64, b: f64) -> f64 {
    let t = (a - b).rem_euclid(2.0 * PI);
    t.min(2.0 * PI - t)
}

/// `max |W^s(z, theta) - W^u(z, theta)|` in phase space over `n` points
/// with `0.5 <= |z| <= 2`, both signs. Angles are compared mod `2 pi`: for
/// `z < 0` the branches meet after one full turn of the pendulum.
pub fn branch_gap(w: &WhiskerSolution, theta: &[f64], n: usize) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for k in 0..n {
        let m = 0.5 * 4f64.powf(k as f64 / (n - 1).max(1) as f64);
        for z in [m, -m] {
            let a = w.w_u(z, theta)?;
            let b = w.w_s(z, theta)?;
            gap = gap.max(angle_gap(a.phi, b.phi)).max((a.i - b.i).abs());
            for k in 0..a.psi.len() {
                gap = gap.max(angle_gap(a.psi[k], b.psi[k])).max((a.a[k] - b.a[k]).abs());
            }
        }
    }
    Ok(gap)
}
