//! Tree expansion of the remainder `delta_2 X~`.
//!
//! End nodes are black dots (`X~_{<=1}`) or numbered circles
//! (`K^{-1} delta_2 h^(k)`); an internal node with `k` entering lines is
//! `K^{-1} w^(k)` applied to its children, `w^(k) = D^k W~(0)/k!`.
//! Children are kept sorted, so each unordered tree appears once and
//! carries the number of distinct orderings as its multiplicity.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;

use crate::chebyshev::RayGrid;
use crate::collocation::Collocation;
use crate::error::{Error, Result};
use crate::fourier::{FrequencyVector, ModeSet};
use crate::kernel::{cauchy_taylor, GridFunction, InverseOps, KernelInverse, KernelParams};
use crate::linearization::LinearizationSolution;
use crate::model::{ModelConfig, Perturbation};
use crate::separatrix::{cos_phi0, phi0, sin_phi0};
use crate::torus::TorusSolution;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tree {
    Dot,
    Circle(usize),
    Node(Vec<Tree>),
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Dot => write!(f, "*"),
            Tree::Circle(k) => write!(f, "({k})"),
            Tree::Node(ch) => {
                write!(f, "w[")?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl Tree {
    pub fn degree(&self) -> usize {
        match self {
            Tree::Dot => 1,
            Tree::Circle(k) => *k,
            Tree::Node(ch) => usize::from(ch.len() == 1) + ch.iter().map(Tree::degree).sum::<usize>(),
        }
    }

    pub fn contains_circle(&self) -> bool {
        match self {
            Tree::Dot => false,
            Tree::Circle(_) => true,
            Tree::Node(ch) => ch.iter().any(Tree::contains_circle),
        }
    }

    /// End nodes are dots or circles numbered `>= 1`; internal nodes have
    /// at least one entering line.
    pub fn rule_r1(&self) -> bool {
        match self {
            Tree::Dot => true,
            Tree::Circle(k) => *k >= 1,
            Tree::Node(ch) => !ch.is_empty() && ch.iter().all(Tree::rule_r1),
        }
    }

    /// Every internal node has an entering subtree holding a circle.
    pub fn rule_r2(&self) -> bool {
        match self {
            Tree::Node(ch) => ch.iter().any(Tree::contains_circle) && ch.iter().all(Tree::rule_r2),
            _ => true,
        }
    }

    /// Admissible as a term of `delta_2 X~`: R1, R2 and not a bare dot.
    pub fn is_admissible(&self) -> bool {
        self.rule_r1() && self.rule_r2() && self.contains_circle()
    }

    pub fn canonical(&self) -> Tree {
        match self {
            Tree::Node(ch) => {
                let mut c: Vec<Tree> = ch.iter().map(Tree::canonical).collect();
                c.sort();
                Tree::Node(c)
            }
            t => t.clone(),
        }
    }

    /// Number of distinct orderings of the entering lines, over all nodes.
    pub fn multiplicity(&self) -> u64 {
        match self {
            Tree::Node(ch) => {
                let mut counts: HashMap<Tree, u64> = HashMap::new();
                for c in ch {
                    *counts.entry(c.canonical()).or_default() += 1;
                }
                let mut m = factorial(ch.len() as u64);
                for n in counts.values() {
                    m /= factorial(*n);
                }
                m * ch.iter().map(Tree::multiplicity).product::<u64>()
            }
            _ => 1,
        }
    }
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

/// Canonical admissible trees of degree exactly `n`, given those of lower degree.
fn trees_of_degree(n: usize, lower: &[Vec<Tree>]) -> Vec<Tree> {
    let mut out = BTreeSet::new();
    out.insert(Tree::Circle(n));
    if n >= 2 {
        for c in &lower[n - 1] {
            out.insert(Tree::Node(vec![c.clone()]));
        }
    }
    // k >= 2 children, each of degree >= 1
    let mut cand: Vec<Tree> = vec![Tree::Dot];
    for lv in lower.iter().take(n).skip(1) {
        cand.extend(lv.iter().cloned());
    }
    fn rec(cand: &[Tree], start: usize, left: usize, cur: &mut Vec<Tree>, out: &mut BTreeSet<Tree>) {
        if left == 0 {
            if cur.len() >= 2 && cur.iter().any(Tree::contains_circle) {
                out.insert(Tree::Node(cur.clone()).canonical());
            }
            return;
        }
        for i in start..cand.len() {
            let d = cand[i].degree();
            if d <= left {
                cur.push(cand[i].clone());
                rec(cand, i, left - d, cur, out);
                cur.pop();
            }
        }
    }
    let mut cur = Vec::new();
    rec(&cand, 0, n, &mut cur, &mut out);
    out.into_iter().collect()
}

/// All canonical admissible trees with `1 <= degree <= max_degree`.
pub fn enumerate_trees(max_degree: usize) -> Vec<Tree> {
    let mut by_deg: Vec<Vec<Tree>> = vec![Vec::new()];
    for n in 1..=max_degree {
        let t = trees_of_degree(n, &by_deg);
        by_deg.push(t);
    }
    by_deg.into_iter().flatten().collect()
}

/// Evaluates trees at a fixed coupling on the two real rays.
pub struct TreeEvaluator {
    pub cfg: ModelConfig,
    pub pert: Perturbation,
    pub gamma: C64,
    pub set: ModeSet,
    pub fv: FrequencyVector,
    pub rays: Vec<RayGrid>,
    col: Collocation,
    thetas: Vec<Vec<C64>>,
    x0: Vec<Vec<C64>>,
    x1m: Vec<Vec<C64>>,
    inv: Vec<InverseOps>,
    memo: Mutex<HashMap<Tree, Arc<Vec<GridFunction>>>>,
}

impl TreeEvaluator {
    pub fn new(cfg: &ModelConfig, torus: &TorusSolution, lin: &LinearizationSolution, kernel: &dyn KernelInverse) -> Result<Self> {
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
        let rays = RayGrid::real_pair(n.z_radius, n.z_nodes).to_vec();
        let fv = cfg.freq();
        let params = KernelParams::new(lin.gamma, n)?;
        let inv = rays.iter().map(|r| kernel.prepare(r, &set, &fv, &params)).collect::<Result<_>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            pert: cfg.perturbation(),
            gamma: lin.gamma,
            set,
            fv,
            rays,
            col,
            thetas,
            x0,
            x1m,
            inv,
            memo: Mutex::new(HashMap::new()),
        })
    }

    fn ncomp(&self) -> usize {
        self.x0.len()
    }

    fn black_modes(&self, z: C64) -> Vec<Vec<C64>> {
        (0..self.ncomp()).map(|c| (0..self.set.len()).map(|q| self.x0[c][q] + z * self.x1m[c][q]).collect()).collect()
    }

    /// Grid values `[c][j]` of `w^(k)(x_1, .., x_k)` at `z`; `args[i][c][j]`.
    fn w_values(&self, k: usize, z: C64, args: &[Vec<Vec<C64>>]) -> Result<Vec<Vec<C64>>> {
        let nc = self.ncomp();
        let d = nc - 1;
        let g2 = C64::from(self.cfg.g * self.cfg.g);
        let gam2 = self.gamma * self.gamma;
        let lam = self.cfg.lambda();
        let p0 = phi0(z)?;
        let (s0, c0) = (sin_phi0(z), cos_phi0(z));
        let sink = [s0, c0, -s0, -c0][k % 4];
        let kfac: f64 = (1..=k).map(|i| i as f64).product();
        let npts = self.col.len();
        let mut out = vec![vec![C64::default(); npts]; nc];
        let ntup = nc.pow(k as u32);
        for j in 0..npts {
            let th = &self.thetas[j];
            let mut prod_phi = C64::new(1.0, 0.0);
            for a in args {
                prod_phi *= a[0][j];
            }
            out[0][j] = g2 * sink * prod_phi / kfac;
            if k == 0 {
                out[0][j] -= gam2 * s0;
            } else if k == 1 {
                out[0][j] -= gam2 * c0 * args[0][0][j];
            }
            for tup in 0..ntup {
                let mut orders = vec![0usize; nc];
                let mut pr = C64::new(1.0, 0.0);
                let mut r = tup;
                for a in args {
                    let comp = r % nc;
                    r /= nc;
                    orders[comp] += 1;
                    pr *= a[comp][j];
                }
                if pr == C64::default() {
                    continue;
                }
                for b in 0..=d {
                    let mut o = orders.clone();
                    o[b] += 1;
                    out[b][j] += lam * self.pert.deriv(p0, th, &o) * pr / kfac;
                }
            }
        }
        Ok(out)
    }

    fn values_of(&self, modes: &[Vec<C64>]) -> Vec<Vec<C64>> {
        modes.iter().map(|m| self.col.synth(&self.set, m)).collect()
    }

    /// Modes of `h^(k)` at `z`.
    fn h_modes(&self, k: usize, z: C64) -> Result<Vec<Vec<C64>>> {
        let x = self.values_of(&self.black_modes(z));
        let mut v = if k == 1 {
            let mut v = self.w_values(0, z, &[])?;
            let w1 = self.w_values(1, z, std::slice::from_ref(&x))?;
            let gc = self.gamma * self.gamma * cos_phi0(z);
            for c in 0..v.len() {
                for j in 0..v[c].len() {
                    v[c][j] += w1[c][j] + if c == 0 { gc * x[0][j] } else { C64::default() };
                }
            }
            v
        } else {
            self.w_values(k, z, &vec![x; k])?
        };
        Ok(v.iter_mut().map(|c| self.col.analyze(c, &self.set)).collect())
    }

    /// `delta_2 h^(k) / z^2` on both rays.
    fn circle_source(&self, k: usize) -> Result<Vec<GridFunction>> {
        let n = &self.cfg.numerics;
        let (nc, m) = (self.ncomp(), self.set.len());
        let kt = (n.cauchy_nodes / 2).min(40);
        let nan = vec![C64::new(f64::NAN, f64::NAN); nc * m];
        let flat = cauchy_taylor(|z| self.h_modes(k, z).map(|v| v.concat()).unwrap_or_else(|_| nan.clone()), n.cauchy_radius, n.cauchy_nodes, kt);
        let mut out = Vec::new();
        for ray in &self.rays {
            let mut gf = GridFunction::zeros(ray, &self.set, nc, true);
            for i in 0..ray.len() {
                let z = ray.node(i);
                let direct = if z.norm() >= 0.5 * n.cauchy_radius { Some(self.h_modes(k, z)?) } else { None };
                for c in 0..nc {
                    for q in 0..m {
                        let f = c * m + q;
                        gf.comps[c][(i, q)] = match &direct {
                            Some(h) => (h[c][q] - flat[0][f] - z * flat[1][f]) / (z * z),
                            None => (2..=kt).rev().fold(C64::default(), |acc, kk| acc * z + flat[kk][f]),
                        };
                    }
                }
            }
            out.push(gf);
        }
        Ok(out)
    }

    fn black(&self) -> Vec<GridFunction> {
        self.rays.iter().map(|r| GridFunction::from_modes(r, &self.set, self.ncomp(), false, |z| self.black_modes(z))).collect()
    }

    /// The tree on both rays; dots are plain values, everything else is
    /// stored divided by `z^2`.
    pub fn eval(&self, t: &Tree) -> Result<Arc<Vec<GridFunction>>> {
        let t = t.canonical();
        if let Some(v) = self.memo.lock().expect("memo lock").get(&t) {
            return Ok(v.clone());
        }
        let val: Vec<GridFunction> = match &t {
            Tree::Dot => self.black(),
            Tree::Circle(k) => {
                let src = self.circle_source(*k)?;
                self.inv.iter().zip(&src).map(|(op, h)| op.apply(h)).collect::<Result<_>>()?
            }
            Tree::Node(ch) => {
                if !t.rule_r2() {
                    return Err(Error::Domain(format!("tree {t} violates the circle rule")));
                }
                let kids: Vec<Arc<Vec<GridFunction>>> = ch.iter().map(|c| self.eval(c)).collect::<Result<_>>()?;
                let ntilde = ch.iter().filter(|c| **c != Tree::Dot).count() as i32;
                let mut out = Vec::new();
                for (r, ray) in self.rays.iter().enumerate() {
                    let mut h = GridFunction::zeros(ray, &self.set, self.ncomp(), true);
                    for i in 0..ray.len() {
                        let z = ray.node(i);
                        let args: Vec<Vec<Vec<C64>>> = kids
                            .iter()
                            .map(|gf| {
                                let modes: Vec<Vec<C64>> = gf[r].comps.iter().map(|mm| mm.row(i).iter().cloned().collect()).collect();
                                self.values_of(&modes)
                            })
                            .collect();
                        let zf = (z * z).powi(ntilde - 1);
                        let w = self.w_values(ch.len(), z, &args)?;
                        for (c, vals) in w.iter().enumerate() {
                            let md = self.col.analyze(vals, &self.set);
                            for (q, x) in md.into_iter().enumerate() {
                                h.comps[c][(i, q)] = x * zf;
                            }
                        }
                    }
                    out.push(self.inv[r].apply(&h)?);
                }
                out
            }
        };
        let v = Arc::new(val);
        self.memo.lock().expect("memo lock").insert(t, v.clone());
        Ok(v)
    }

    /// Value of the tree at `(z, theta)`.
    pub fn eval_at(&self, t: &Tree, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let v = self.eval(t)?;
        if z.norm() > self.rays[0].radius * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("|z| = {} outside the tree grids", z.norm())));
        }
        Ok(v[usize::from(z.re < 0.0)].eval(z, theta))
    }

    /// `sum mult(T) T(z, theta)` over admissible trees of degree `<= max_degree`.
    pub fn sum_at(&self, max_degree: usize, z: C64, theta: &[C64]) -> Result<Vec<C64>> {
        let mut acc = vec![C64::default(); self.ncomp()];
        for t in enumerate_trees(max_degree) {
            let v = self.eval_at(&t, z, theta)?;
            let m = t.multiplicity() as f64;
            acc.iter_mut().zip(v).for_each(|(a, x)| *a += m * x);
        }
        Ok(acc)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }
}
