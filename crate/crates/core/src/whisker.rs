//! The whiskers: `X = X0 + z (X1 - (4,0)) + z^2 Zt` on the two real
//! half-rays, the fixed point `K Z = W(Z)`, the `(alpha, beta)`
//! normalization, and the checks built on the assembled parametrization.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chebyshev::RayGrid;
use crate::collocation::Collocation;
use crate::error::{Error, Result};
use crate::fourier::{FrequencyVector, ModeSet};
use crate::integrator::{integrate_orbit, Tolerance};
use crate::kernel::{cauchy_taylor, char_d1, residual_characteristic, CharResidual, GridFunction, InverseOps, KernelInverse, KernelParams};
use crate::linearization::{LinearizationMethod, LinearizationSolution, NewtonMethod};
use crate::model::{omega_eval, ModelConfig, PhaseState, Perturbation};
use crate::separatrix::{cos_phi0, phi0, sin_phi0};
use crate::torus::{solve_torus, TorusSolution};

fn nan_vec(n: usize) -> Vec<C64> {
    vec![C64::new(f64::NAN, f64::NAN); n]
}

fn fourier_sum(set: &ModeSet, coeffs: &[C64], theta: &[C64]) -> C64 {
    set.modes
        .iter()
        .zip(coeffs)
        .map(|(q, c)| c * (C64::new(0.0, 1.0) * q.iter().zip(theta).map(|(&k, t)| t * k as f64).sum::<C64>()).exp())
        .sum()
}

/// The unnormalized solution: Taylor data at `z = 0` plus `Zt` per ray.
#[derive(Clone, Debug)]
pub struct WhiskerParts {
    pub gamma: C64,
    pub set: ModeSet,
    /// torus `X0`, one dense coefficient vector per component
    pub x0: Vec<Vec<C64>>,
    /// `X1 - (4, 0)`
    pub x1m: Vec<Vec<C64>>,
    /// `[positive, negative]`
    pub zt: Vec<GridFunction>,
}

impl WhiskerParts {
    pub fn ncomp(&self) -> usize {
        self.x0.len()
    }

    pub fn radius(&self) -> f64 {
        self.zt[0].ray.radius
    }

    fn ray_of(&self, z: C64) -> usize {
        usize::from(z.re < 0.0)
    }

    /// Modes of `Zt(z, .)`, interpolated along the nearer ray.
    pub fn zt_modes(&self, z: C64) -> Vec<Vec<C64>> {
        self.zt[self.ray_of(z)].stored_modes_at(z)
    }

    /// Modes of `X - X^0` at `z`.
    pub fn tilde_modes(&self, z: C64) -> Result<Vec<Vec<C64>>> {
        if z.norm() > self.radius() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("|z| = {} outside the solved disc of radius {}", z.norm(), self.radius())));
        }
        let zt = self.zt_modes(z);
        let z2 = z * z;
        Ok((0..self.ncomp())
            .map(|c| (0..self.set.len()).map(|k| self.x0[c][k] + z * self.x1m[c][k] + z2 * zt[c][k]).collect())
            .collect())
    }

    /// `X(z, theta) - (Phi0(z), 0)` before normalization.
    pub fn eval_tilde(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        Ok(self.tilde_modes(z)?.iter().map(|c| fourier_sum(&self.set, c, theta)).collect())
    }

    /// `X(z, theta)` before normalization.
    pub fn eval(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let mut out = self.eval_tilde(z, theta)?;
        out[0] += phi0(z)?;
        Ok(out)
    }
}

/// `X_{alpha,beta}(z, theta) = X(alpha z, theta + beta) + (0, beta)`.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub parts: WhiskerParts,
    pub alpha: C64,
    pub beta: Vec<C64>,
    /// `|X_{alpha,beta}(z*, 0) - target|` after the Newton solve
    pub defect: f64,
}

impl Normalized {
    /// `X_{alpha,beta}(z, theta) - (Phi0(alpha z), 0)`.
    pub fn eval_tilde(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let th: Vec<C64> = theta.iter().zip(&self.beta).map(|(t, b)| t + b).collect();
        let mut x = self.parts.eval_tilde(self.alpha * z, &th)?;
        for (i, b) in self.beta.iter().enumerate() {
            x[i + 1] += b;
        }
        Ok(x)
    }

    pub fn eval(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let mut x = self.eval_tilde(z, theta)?;
        x[0] += phi0(self.alpha * z)?;
        Ok(x)
    }
}

/// Newton for `X(alpha z*, beta) + (0, beta) = target` from `(1, 0)`.
pub fn normalize(parts: &WhiskerParts, zstar: C64, target: &[C64]) -> Result<Normalized> {
    let d = parts.ncomp() - 1;
    let resid = |u: &[C64]| -> Result<Vec<C64>> {
        let mut x = parts.eval(u[0] * zstar, &u[1..])?;
        for i in 0..d {
            x[i + 1] += u[i + 1];
        }
        Ok(x.iter().zip(target).map(|(a, b)| a - b).collect())
    };
    let mut u = vec![C64::default(); d + 1];
    u[0] = C64::from(1.0);
    let h = 1e-6;
    for _ in 0..30 {
        let f = resid(&u)?;
        let fmax = f.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if fmax < 1e-14 {
            return Ok(Normalized { parts: parts.clone(), alpha: u[0], beta: u[1..].to_vec(), defect: fmax });
        }
        let mut jac = nalgebra::DMatrix::<C64>::zeros(d + 1, d + 1);
        for a in 0..=d {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[a] += h;
            um[a] -= h;
            let (fp, fm) = (resid(&up)?, resid(&um)?);
            for r in 0..=d {
                jac[(r, a)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let step = jac
            .lu()
            .solve(&nalgebra::DVector::from_vec(f))
            .ok_or_else(|| Error::Singular("normalization Jacobian".into()))?;
        for a in 0..=d {
            u[a] -= step[a];
        }
        if step.iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-15 {
            let fmax = resid(&u)?.iter().map(|x| x.norm()).fold(0.0, f64::max);
            return Ok(Normalized { parts: parts.clone(), alpha: u[0], beta: u[1..].to_vec(), defect: fmax });
        }
    }
    Err(Error::NoConvergence { what: "(alpha, beta) normalization", iters: 30, residual: resid(&u)?.iter().map(|x| x.norm()).sum() })
}

/// Nonlinear part `W(Z)` of the remainder equation on the grids.
pub struct WhiskerProblem<'a> {
    pub cfg: &'a ModelConfig,
    pub pert: Perturbation,
    pub gamma: C64,
    pub fv: FrequencyVector,
    pub set: ModeSet,
    col: Collocation,
    thetas: Vec<Vec<C64>>,
    pub x0: Vec<Vec<C64>>,
    pub x1m: Vec<Vec<C64>>,
    pub rays: Vec<RayGrid>,
}

impl<'a> WhiskerProblem<'a> {
    pub fn new(cfg: &'a ModelConfig, pert: Perturbation, torus: &TorusSolution, lin: &LinearizationSolution) -> Self {
        let d = cfg.dim();
        let k = cfg.numerics.kmax;
        let set = ModeSet::l1_ball(d, k);
        let col = Collocation::for_degree(d, k);
        let thetas = (0..col.len()).map(|j| col.theta(j).into_iter().map(C64::from).collect()).collect();
        let mut x0 = vec![set.to_dense(&torus.phi0)];
        x0.extend(torus.psi0.iter().map(|p| set.to_dense(p)));
        let mut x1m = vec![set.to_dense(&lin.phi1)];
        x1m[0][set.zero()] -= 4.0;
        x1m.extend(lin.psi1.iter().map(|p| set.to_dense(p)));
        let n = &cfg.numerics;
        Self {
            cfg,
            pert,
            gamma: lin.gamma,
            fv: cfg.freq(),
            rays: RayGrid::real_pair(n.z_radius, n.z_nodes).to_vec(),
            set,
            col,
            thetas,
            x0,
            x1m,
        }
    }

    pub fn ncomp(&self) -> usize {
        self.x0.len()
    }

    pub fn zero_remainder(&self) -> Vec<GridFunction> {
        self.rays.iter().map(|r| GridFunction::zeros(r, &self.set, self.ncomp(), true)).collect()
    }

    pub fn parts(&self, zt: Vec<GridFunction>) -> WhiskerParts {
        WhiskerParts { gamma: self.gamma, set: self.set.clone(), x0: self.x0.clone(), x1m: self.x1m.clone(), zt }
    }

    /// Modes of `B(z) = (g^2 sin(Phi0 + Phit) - gamma^2 sin Phi0 - gamma^2 cos Phi0 z^2 Zt_Phi
    /// + lambda f_phi, lambda f_psi)` for given modes of `Zt(z, .)`.
    pub fn b_modes(&self, z: C64, zt: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let (nc, m) = (self.ncomp(), self.set.len());
        let z2 = z * z;
        let Ok(p0) = phi0(z) else { return vec![nan_vec(m); nc] };
        let vals: Vec<Vec<C64>> = (0..nc)
            .map(|c| {
                let v: Vec<C64> = (0..m).map(|k| self.x0[c][k] + z * self.x1m[c][k] + z2 * zt[c][k]).collect();
                self.col.synth(&self.set, &v)
            })
            .collect();
        let zphi = self.col.synth(&self.set, &zt[0]);
        let (s0, c0) = (sin_phi0(z), cos_phi0(z));
        let g2 = self.cfg.g * self.cfg.g;
        let gam2 = self.gamma * self.gamma;
        let lam = self.cfg.lambda();
        let mut out = vec![vec![C64::default(); self.col.len()]; nc];
        let mut psi = vec![C64::default(); nc - 1];
        for (j, th) in self.thetas.iter().enumerate() {
            let pt = vals[0][j];
            let phi = p0 + pt;
            for i in 0..nc - 1 {
                psi[i] = th[i] + vals[i + 1][j];
            }
            let gr = self.pert.grad(phi, &psi);
            // sin(Phi0 + Phit) - sin Phi0 without cancellation
            let half = (0.5 * pt).sin();
            let dsin = c0 * pt.sin() - 2.0 * s0 * half * half;
            out[0][j] = g2 * dsin + (g2 - gam2) * s0 - gam2 * c0 * z2 * zphi[j] + lam * gr[0];
            for i in 0..nc - 1 {
                out[i + 1][j] = lam * gr[i + 1];
            }
        }
        out.iter().map(|v| self.col.analyze(v, &self.set)).collect()
    }

    /// Taylor coefficients `B_k`, `k <= kt`, from the Cauchy circle; entry `[k][c][mode]`.
    pub fn b_taylor(&self, zt: &[GridFunction], kt: usize) -> Vec<Vec<Vec<C64>>> {
        let (nc, m) = (self.ncomp(), self.set.len());
        let n = &self.cfg.numerics;
        let flat = cauchy_taylor(
            |z| {
                let r = usize::from(z.re < 0.0);
                self.b_modes(z, &zt[r].stored_modes_at(z)).concat()
            },
            n.cauchy_radius,
            n.cauchy_nodes,
            kt,
        );
        flat.into_iter().map(|v| (0..nc).map(|c| v[c * m..(c + 1) * m].to_vec()).collect()).collect()
    }

    /// `W(Z)/z^2` on both rays.
    pub fn w_eval(&self, zt: &[GridFunction]) -> Result<Vec<GridFunction>> {
        let n = &self.cfg.numerics;
        let kt = (n.cauchy_nodes / 2).min(40);
        let bt = self.b_taylor(zt, kt);
        let (nc, m) = (self.ncomp(), self.set.len());
        let mut out = self.zero_remainder();
        for (r, ray) in self.rays.iter().enumerate() {
            for i in 0..ray.len() {
                let z = ray.node(i);
                let h: Vec<Vec<C64>> = if z.norm() >= 0.5 * n.cauchy_radius {
                    let zm: Vec<Vec<C64>> = (0..nc).map(|c| zt[r].comps[c].row(i).iter().cloned().collect()).collect();
                    let b = self.b_modes(z, &zm);
                    let z2 = z * z;
                    (0..nc).map(|c| (0..m).map(|k| (b[c][k] - bt[0][c][k] - z * bt[1][c][k]) / z2).collect()).collect()
                } else {
                    (0..nc)
                        .map(|c| (0..m).map(|k| (2..=kt).rev().fold(C64::default(), |acc, j| acc * z + bt[j][c][k])).collect())
                        .collect()
                };
                for c in 0..nc {
                    for k in 0..m {
                        if !h[c][k].is_finite() {
                            return Err(Error::Domain(format!("W(Z) not finite at z = {z}")));
                        }
                        out[r].comps[c][(i, k)] = h[c][k];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Per-ray kernel inverses; one worker per ray when `threads > 1`.
    pub fn prepare(&self, kernel: &dyn KernelInverse) -> Result<Vec<InverseOps>> {
        let params = KernelParams::new(self.gamma, &self.cfg.numerics)?;
        let one = |r: &RayGrid| kernel.prepare(r, &self.set, &self.fv, &params);
        if self.cfg.numerics.threads <= 1 {
            return self.rays.iter().map(one).collect();
        }
        std::thread::scope(|sc| {
            let handles: Vec<_> = self.rays.iter().map(|r| sc.spawn(move || one(r))).collect();
            handles.into_iter().map(|h| h.join().expect("kernel worker panicked")).collect()
        })
    }

    /// Iterates `Z <- K^{-1} W(Z)` from zero. Returns the remainder and the
    /// sup-change per iteration.
    pub fn solve_z(&self, inv: &[InverseOps]) -> Result<(Vec<GridFunction>, Vec<f64>)> {
        let n = &self.cfg.numerics;
        let mut zt = self.zero_remainder();
        let mut hist = Vec::new();
        for _ in 0..n.max_z_iters {
            let w = self.w_eval(&zt)?;
            let next: Vec<GridFunction> = inv.iter().zip(&w).map(|(op, h)| op.apply(h)).collect::<Result<_>>()?;
            let change = next.iter().zip(&zt).map(|(a, b)| remainder_sup(a, Some(b), f64::INFINITY)).fold(0.0, f64::max);
            zt = next;
            hist.push(change);
            if change < n.tol_z {
                return Ok((zt, hist));
            }
        }
        Err(Error::NoConvergence { what: "remainder fixed point", iters: n.max_z_iters, residual: *hist.last().unwrap_or(&f64::NAN) })
    }
}

/// `sup_z sum_q |z^2 (A - B)_q(z)|` over nodes with `|z| <= zmax`, max over components.
pub fn remainder_sup(a: &GridFunction, b: Option<&GridFunction>, zmax: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..a.ray.len() {
        let z = a.ray.t[i];
        if z > zmax {
            continue;
        }
        for c in 0..a.ncomp() {
            let s: f64 = (0..a.set.len())
                .map(|k| {
                    let v = a.comps[c][(i, k)] - b.map_or(C64::default(), |b| b.comps[c][(i, k)]);
                    v.norm()
                })
                .sum();
            best = best.max(s * z * z);
        }
    }
    best
}

/// Assembled whiskers with diagnostics.
#[derive(Clone, Debug)]
pub struct WhiskerSolution {
    pub cfg: ModelConfig,
    pub pert: Perturbation,
    pub gamma: C64,
    pub unstable: Normalized,
    /// independent solve of the `-omega` problem, giving `X^s` without
    /// the reversal symmetry
    pub stable: Option<Normalized>,
    pub z_history: Vec<f64>,
    /// `sup |Z|` over `|z| <= 1 + tau`
    pub z_sup: f64,
    pub kernel: String,
}

fn solve_parts(cfg: &ModelConfig, kernel: &dyn KernelInverse) -> Result<(WhiskerParts, Vec<f64>, TorusSolution, LinearizationSolution)> {
    let torus = solve_torus(cfg)?;
    let lin = NewtonMethod.solve(cfg, &torus)?;
    let prob = WhiskerProblem::new(cfg, cfg.perturbation(), &torus, &lin);
    let inv = prob.prepare(kernel)?;
    let (zt, hist) = prob.solve_z(&inv)?;
    Ok((prob.parts(zt), hist, torus, lin))
}

impl WhiskerSolution {
    /// Remainder solve and normalization from given torus and linearization.
    pub fn assemble(cfg: &ModelConfig, torus: &TorusSolution, lin: &LinearizationSolution, kernel: &dyn KernelInverse) -> Result<Self> {
        let prob = WhiskerProblem::new(cfg, cfg.perturbation(), torus, lin);
        let inv = prob.prepare(kernel)?;
        let (zt, hist) = prob.solve_z(&inv)?;
        let z_sup = zt.iter().map(|g| remainder_sup(g, None, 1.0 + cfg.numerics.tau)).fold(0.0, f64::max);
        let parts = prob.parts(zt);
        let mut target = vec![C64::default(); cfg.dim() + 1];
        target[0] = C64::from(PI);
        let unstable = normalize(&parts, C64::from(1.0), &target)?;
        Ok(Self {
            cfg: cfg.clone(),
            pert: cfg.perturbation(),
            gamma: lin.gamma,
            unstable,
            stable: None,
            z_history: hist,
            z_sup,
            kernel: kernel.name().to_string(),
        })
    }

    /// Full pipeline: torus, Newton linearization, remainder, normalization.
    pub fn solve(cfg: &ModelConfig, kernel: &dyn KernelInverse) -> Result<Self> {
        let torus = solve_torus(cfg)?;
        let lin = NewtonMethod.solve(cfg, &torus)?;
        Self::assemble(cfg, &torus, &lin, kernel)
    }

    /// Adds the independently solved stable whisker: the unstable problem
    /// for `-omega`, read at `u = -1/z` and normalized by `Xi(-1, 0) = (-pi, 0)`.
    pub fn with_independent_stable(mut self, kernel: &dyn KernelInverse) -> Result<Self> {
        let mut cfg = self.cfg.clone();
        cfg.omega.iter_mut().for_each(|w| *w = -*w);
        let (parts, _, _, _) = solve_parts(&cfg, kernel)?;
        let mut target = vec![C64::default(); cfg.dim() + 1];
        target[0] = C64::from(-PI);
        self.stable = Some(normalize(&parts, C64::from(-1.0), &target)?);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    pub fn alpha(&self) -> C64 {
        self.unstable.alpha
    }

    pub fn beta(&self) -> &[C64] {
        &self.unstable.beta
    }

    pub fn omega(&self) -> Vec<f64> {
        self.cfg.omega.clone()
    }

    pub fn eval_xu(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        self.unstable.eval(z, theta)
    }

    /// `X^s = (2 pi, 0) - X^u o T`.
    pub fn eval_xs(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        if z.norm() == 0.0 {
            return Err(Error::Domain("X^s needs z != 0".into()));
        }
        let th: Vec<C64> = theta.iter().map(|t| -t).collect();
        let mut x = self.eval_xu(z.inv(), &th)?;
        x.iter_mut().for_each(|v| *v = -*v);
        x[0] += 2.0 * PI;
        Ok(x)
    }

    /// `X^s(z, theta) = (2 pi, 0) + Xi(-1/z, theta)` from the independent solve.
    pub fn eval_xs_independent(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let st = self.stable.as_ref().ok_or_else(|| Error::Config("independent stable whisker not solved".into()))?;
        if z.norm() == 0.0 {
            return Err(Error::Domain("X^s needs z != 0".into()));
        }
        let mut x = st.eval(-z.inv(), theta)?;
        x[0] += 2.0 * PI;
        Ok(x)
    }

    fn y_of(&self, f: &dyn Fn(C64, &[C64]) -> Result<Vec<C64>>, z: C64, theta: &[C64], h: f64) -> Result<Vec<C64>> {
        let n = self.dim() + 1;
        let mut err = None;
        let g = |zz: C64, th: &[C64]| match f(zz, th) {
            Ok(v) => v,
            Err(e) => {
                let _ = &e;
                nan_vec(n)
            }
        };
        let y = char_d1(&g, self.gamma, &self.omega(), z, theta, h);
        if y.iter().any(|v| !v.is_finite()) {
            err = Some(Error::Domain(format!("Y stencil leaves the domain at z = {z}")));
        }
        match err {
            Some(e) => Err(e),
            None => Ok(y),
        }
    }

    fn y_step(&self) -> f64 {
        1e-4 / self.gamma.re
    }

    /// `Y^u = L X^u` by the 5-point stencil along the characteristic.
    pub fn eval_yu(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        self.eval_yu_step(z, theta, self.y_step())
    }

    pub fn eval_yu_step(&self, z: C64, theta: &[C64], h: f64) -> Result<Vec<C64>> {
        self.y_of(&|a, b| self.eval_xu(a, b), z, theta, h)
    }

    pub fn eval_ys(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        self.y_of(&|a, b| self.eval_xs(a, b), z, theta, self.y_step())
    }

    pub fn eval_ys_independent(&self, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        self.y_of(&|a, b| self.eval_xs_independent(a, b), z, theta, self.y_step())
    }

    /// Phase-space point `((0, theta) + X, (0, omega) + Y)`, real parts.
    pub fn phase_point(&self, x: &[C64], y: &[C64], theta: &[f64]) -> PhaseState {
        let d = self.dim();
        PhaseState {
            phi: x[0].re,
            psi: (0..d).map(|i| theta[i] + x[i + 1].re).collect(),
            i: y[0].re,
            a: (0..d).map(|i| self.cfg.omega[i] + y[i + 1].re).collect(),
        }
    }

    pub fn w_u(&self, z: f64, theta: &[f64]) -> Result<PhaseState> {
        let th: Vec<C64> = theta.iter().map(|&t| t.into()).collect();
        Ok(self.phase_point(&self.eval_xu(z.into(), &th)?, &self.eval_yu(z.into(), &th)?, theta))
    }

    pub fn w_s(&self, z: f64, theta: &[f64]) -> Result<PhaseState> {
        let th: Vec<C64> = theta.iter().map(|&t| t.into()).collect();
        Ok(self.phase_point(&self.eval_xs(z.into(), &th)?, &self.eval_ys(z.into(), &th)?, theta))
    }

    /// Sample `(z, theta)` points for the residual: 48 values of `z` in
    /// `[-1-tau, 1+tau]` times `2K+1` angles (uniform for `d = 1`, seeded
    /// otherwise).
    pub fn residual_points(&self, zlo: f64, zhi: f64) -> Vec<(C64, Vec<C64>)> {
        let d = self.dim();
        let nt = (2 * self.cfg.numerics.kmax + 1) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.numerics.seed);
        let thetas: Vec<Vec<C64>> = (0..nt)
            .map(|j| {
                if d == 1 {
                    vec![C64::from(2.0 * PI * j as f64 / nt as f64)]
                } else {
                    (0..d).map(|_| C64::from(rng.gen_range(0.0..2.0 * PI))).collect()
                }
            })
            .collect();
        let mut pts = Vec::new();
        for i in 0..48 {
            let z = zlo + (zhi - zlo) * i as f64 / 47.0;
            for th in &thetas {
                pts.push((C64::from(z), th.clone()));
            }
        }
        pts
    }

    /// `sup |L^2 X - Omega(X)|` for `X = (base, 0) + tilde`, with the
    /// separatrix part handled in closed form (`L^2 base = gamma^2 sin base`)
    /// so that the stencil only differentiates the `O(eps)` part.
    fn residual_with(
        &self,
        tilde: &dyn Fn(C64, &[C64]) -> Result<Vec<C64>>,
        base: &dyn Fn(C64) -> C64,
        gamma: C64,
        omega: &[f64],
        points: &[(C64, Vec<C64>)],
    ) -> Result<CharResidual> {
        let n = self.dim() + 1;
        let g2 = gamma * gamma;
        let f = |z: C64, th: &[C64]| tilde(z, th).unwrap_or_else(|_| nan_vec(n));
        let rhs = |z: C64, th: &[C64]| match tilde(z, th) {
            Ok(mut v) => {
                let b = base(z);
                v[0] += b;
                let mut o = omega_eval(&self.cfg, &self.pert, &v, th);
                o[0] -= g2 * b.sin();
                o
            }
            Err(_) => nan_vec(n),
        };
        let r = residual_characteristic(gamma, omega, &f, &rhs, points, 5e-3 / gamma.re);
        if !r.residual.is_finite() {
            return Err(Error::Domain("residual sample left the domain".into()));
        }
        Ok(r)
    }

    /// PDE residual of `X^u` on the default sample.
    pub fn residual_pde(&self) -> Result<CharResidual> {
        let t = self.cfg.numerics.tau;
        let pts = self.residual_points(-1.0 - t, 1.0 + t);
        let a = self.alpha();
        self.residual_with(&|z, th| self.unstable.eval_tilde(z, th), &|z| phi0(a * z).unwrap_or(C64::new(f64::NAN, 0.0)), self.gamma, &self.omega(), &pts)
    }

    /// PDE residual of the symmetric `X^s` for `z` in `+-[1/(1+tau), 2.5]`.
    pub fn residual_pde_stable(&self) -> Result<CharResidual> {
        let pts = self.stable_points();
        let a = self.alpha();
        self.residual_with(
            &|z, th| {
                let mth: Vec<C64> = th.iter().map(|t| -t).collect();
                Ok(self.unstable.eval_tilde(z.inv(), &mth)?.into_iter().map(|v| -v).collect())
            },
            &|z| 2.0 * PI - phi0(a / z).unwrap_or(C64::new(f64::NAN, 0.0)),
            self.gamma,
            &self.omega(),
            &pts,
        )
    }

    /// PDE residual of the independently solved `X^s`.
    pub fn residual_pde_stable_independent(&self) -> Result<CharResidual> {
        let st = self.stable.as_ref().ok_or_else(|| Error::Config("independent stable whisker not solved".into()))?;
        let pts = self.stable_points();
        let a = st.alpha;
        self.residual_with(
            &|z, th| st.eval_tilde(-z.inv(), th),
            &|z| 2.0 * PI + phi0(-a / z).unwrap_or(C64::new(f64::NAN, 0.0)),
            st.parts.gamma,
            &self.omega(),
            &pts,
        )
    }

    fn stable_points(&self) -> Vec<(C64, Vec<C64>)> {
        let lo = 1.0 / (1.0 + self.cfg.numerics.tau);
        let mut pts = self.residual_points(lo, 2.5);
        let neg: Vec<_> = pts.iter().map(|(z, th)| (-z, th.clone())).collect();
        pts.extend(neg);
        pts
    }

    /// Integrates the equations of motion from `W^u(z0 e^{gamma t0}, theta0 + omega t0)`
    /// and returns the largest deviation from the parametrized trajectory
    /// over `n` equally spaced times.
    pub fn shadow_check(&self, t_span: (f64, f64), z0: f64, theta0: &[f64], n: usize) -> Result<f64> {
        if self.cfg.eps_im != 0.0 {
            return Err(Error::Domain("shadowing needs real eps".into()));
        }
        let g = self.gamma.re;
        let at = |t: f64| -> Result<PhaseState> {
            let th: Vec<f64> = theta0.iter().zip(&self.cfg.omega).map(|(a, w)| a + w * t).collect();
            self.w_u(z0 * (g * t).exp(), &th)
        };
        let (t0, t1) = t_span;
        let times: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1).max(1) as f64).collect();
        let s0 = at(t0)?;
        let orbit = integrate_orbit(&self.cfg, &s0, t0, &times, Tolerance::uniform(self.cfg.numerics.tol_integrator))?;
        let mut dev: f64 = 0.0;
        for (t, s) in times.iter().zip(&orbit) {
            dev = dev.max(s.distance(&at(*t)?));
        }
        Ok(dev)
    }

    /// `max |W^s - W^u|` along `(e^{gamma t}, omega t)`, `|t| <= 1/gamma`.
    pub fn homoclinic_check(&self, n: usize, independent: bool) -> Result<f64> {
        let g = self.gamma.re;
        let mut dev: f64 = 0.0;
        for k in 0..n {
            let t = (-1.0 + 2.0 * k as f64 / (n - 1) as f64) / g;
            let z = C64::from((self.gamma * t).exp());
            let th: Vec<C64> = self.cfg.omega.iter().map(|w| C64::from(w * t)).collect();
            let (xs, ys) = if independent {
                (self.eval_xs_independent(z, &th)?, self.eval_ys_independent(z, &th)?)
            } else {
                (self.eval_xs(z, &th)?, self.eval_ys(z, &th)?)
            };
            let (xu, yu) = (self.eval_xu(z, &th)?, self.eval_yu(z, &th)?);
            for i in 0..xs.len() {
                dev = dev.max((xs[i] - xu[i]).norm()).max((ys[i] - yu[i]).norm());
            }
        }
        Ok(dev)
    }

    /// `max` over `n` seeded samples of `|X^s - ((2pi,0) - X^u o T)|` and
    /// `|Y^s - Y^u o T|`, with `X^s` from the independent solve.
    pub fn symmetry_check(&self, n: usize, seed: u64) -> Result<f64> {
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dev: f64 = 0.0;
        for _ in 0..n {
            let mag: f64 = rng.gen_range(0.4..2.5);
            let z = C64::from(if rng.gen_bool(0.5) { mag } else { -mag });
            let th: Vec<C64> = (0..d).map(|_| C64::from(rng.gen_range(0.0..2.0 * PI))).collect();
            let (xs, ys) = (self.eval_xs_independent(z, &th)?, self.eval_ys_independent(z, &th)?);
            let (xf, yf) = (self.eval_xs(z, &th)?, self.eval_ys(z, &th)?);
            for i in 0..=d {
                dev = dev.max((xs[i] - xf[i]).norm()).max((ys[i] - yf[i]).norm());
            }
        }
        Ok(dev)
    }

    /// `(branch, z, phi, I)` on the section `theta = theta_sec`; the stable
    /// branch is sampled at `1/w` for the same parameters `w`.
    pub fn section_samples(&self, theta_sec: &[f64], n: usize) -> Result<Vec<(&'static str, f64, f64, f64)>> {
        let r = self.unstable.parts.radius() * 0.95;
        let mut out = Vec::new();
        for k in 0..n {
            let w = -r + 2.0 * r * (k as f64 + 0.5) / n as f64;
            let u = self.w_u(w, theta_sec)?;
            out.push(("unstable", w, u.phi, u.i));
        }
        for k in 0..n {
            let w = -r + 2.0 * r * (k as f64 + 0.5) / n as f64;
            let s = self.w_s(1.0 / w, theta_sec)?;
            out.push(("stable", 1.0 / w, s.phi, s.i));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let c = |v: C64| serde_json::json!({"re": v.re, "im": v.im});
        let d = self.dim();
        let zero = vec![C64::default(); d];
        let xu1 = self.eval_xu(C64::from(1.0), &zero).unwrap_or_else(|_| nan_vec(d + 1));
        let eps = self.cfg.eps().norm();
        serde_json::json!({
            "gamma": c(self.gamma),
            "alpha": c(self.alpha()),
            "beta": self.beta().iter().map(|&b| c(b)).collect::<Vec<_>>(),
            "normalization_defect": self.unstable.defect,
            "xu_at_1_0": xu1.iter().map(|&v| c(v)).collect::<Vec<_>>(),
            "z_sup": self.z_sup,
            "z_sup_over_eps": if eps > 0.0 { self.z_sup / eps } else { 0.0 },
            "z_history": self.z_history,
            "iterations": self.z_history.len(),
            "kernel": self.kernel,
            "ball_radius": self.cfg.numerics.ball_r,
            "eps0": self.cfg.numerics.eps0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{CollocationInverse, QuadratureInverse};

    fn cfg(d: usize, eps: f64) -> ModelConfig {
        let mut c = ModelConfig::default_for(d, eps);
        c.numerics.kmax = 8;
        c
    }

    #[test]
    fn unperturbed_whisker() {
        let c = cfg(1, 0.0);
        let s = WhiskerSolution::solve(&c, &CollocationInverse).unwrap();
        assert_eq!(s.alpha(), C64::from(1.0));
        assert_eq!(s.beta()[0], C64::default());
        assert_eq!(s.z_history.len(), 1);
        assert_eq!(s.z_sup, 0.0);
        for z in [-1.0, -0.3, 0.2, 1.0, 2.0] {
            let x = s.eval_xu(z.into(), &[C64::from(0.4)]).unwrap();
            assert!((x[0] - 4.0 * f64::atan(z)).norm() < 1e-15 && x[1].norm() == 0.0);
        }
        let y = s.eval_yu(C64::from(1.0), &[C64::default()]).unwrap();
        assert!((y[0] - 2.0).norm() < 1e-9);
        assert!(s.residual_pde().unwrap().residual < 1e-8);
    }

    #[test]
    fn b_taylor_data_is_remainder_free() {
        let c = cfg(1, 1e-3);
        let torus = solve_torus(&c).unwrap();
        let lin = NewtonMethod.solve(&c, &torus).unwrap();
        let p = WhiskerProblem::new(&c, c.perturbation(), &torus, &lin);
        let zero = p.zero_remainder();
        let mut other = p.zero_remainder();
        for g in other.iter_mut() {
            for m in g.comps.iter_mut() {
                m.iter_mut().for_each(|x| *x = C64::from(0.01));
            }
        }
        let (a, b) = (p.b_taylor(&zero, 3), p.b_taylor(&other, 3));
        for k in 0..2 {
            for cc in 0..2 {
                for q in 0..p.set.len() {
                    assert!((a[k][cc][q] - b[k][cc][q]).norm() < 1e-13);
                }
            }
        }
        // B - B0 - B1 z is at least O(z^2)
        let zm = vec![vec![C64::default(); p.set.len()]; 2];
        let rem = |z: f64| {
            let bz = p.b_modes(z.into(), &zm);
            (0..p.set.len()).map(|q| (bz[0][q] - a[0][0][q] - z * a[1][0][q]).norm()).sum::<f64>()
        };
        let ratio = rem(2e-2) / rem(1e-2);
        assert!(ratio > 3.9, "{ratio}");
    }

    #[test]
    fn remainder_solution() {
        let c = cfg(1, 1e-3);
        let s = WhiskerSolution::solve(&c, &QuadratureInverse).unwrap();
        for w in s.z_history.windows(2).skip(1) {
            assert!(w[1] < 0.5 * w[0], "{:?}", s.z_history);
        }
        assert!(s.z_sup > 0.0 && s.z_sup < 1.0e-2);
        let x = s.eval_xu(C64::from(1.0), &[C64::default()]).unwrap();
        assert!((x[0] - PI).norm() < 1e-9 && x[1].norm() < 1e-9);
        assert!(s.alpha().im.abs() < 1e-14 && s.beta()[0].im.abs() < 1e-14);
        let r = s.residual_pde().unwrap();
        assert!(r.residual < 1e-7, "{r:?}");
        let xs = s.eval_xs(C64::from(1.0), &[C64::default()]).unwrap();
        assert!((xs[0] - x[0]).norm() < 1e-12);
        let (yu, ys) = (s.eval_yu(1.0.into(), &[C64::default()]).unwrap(), s.eval_ys(1.0.into(), &[C64::default()]).unwrap());
        assert!((yu[0] - ys[0]).norm() < 1e-9 && (yu[1] - ys[1]).norm() < 1e-9);
        assert!(s.residual_pde_stable().unwrap().residual < 1e-7);
        assert!(s.homoclinic_check(21, false).unwrap() < 1e-7);
    }

    #[test]
    fn kernel_strategies_agree_on_whisker() {
        let c = cfg(1, 2e-3);
        let a = WhiskerSolution::solve(&c, &QuadratureInverse).unwrap();
        let b = WhiskerSolution::solve(&c, &CollocationInverse).unwrap();
        for z in [-0.9, 0.5, 1.7] {
            let th = [C64::from(0.3)];
            let (xa, xb) = (a.eval_xu(z.into(), &th).unwrap(), b.eval_xu(z.into(), &th).unwrap());
            assert!((xa[0] - xb[0]).norm() < 1e-10 && (xa[1] - xb[1]).norm() < 1e-10);
        }
    }
}
