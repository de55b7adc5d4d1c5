//! Uniform tensor grids on the torus and the transforms between grid values
//! and Fourier coefficients.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::{FourierPoly, ModeSet};

/// `m^d` equispaced points with cached exponential tables up to `kb_max`.
#[derive(Clone, Debug)]
pub struct Collocation {
    pub dim: usize,
    pub m: usize,
    kb_max: usize,
    // e^{i k theta_j}, row j, column k + kb_max
    table: Vec<C64>,
}

impl Collocation {
    pub fn new(dim: usize, m: usize, kb_max: usize) -> Self {
        let w = 2 * kb_max + 1;
        let mut table = vec![C64::default(); m * w];
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            for k in 0..w {
                let kk = k as f64 - kb_max as f64;
                table[j * w + k] = C64::new(0.0, kk * th).exp();
            }
        }
        Self { dim, m, kb_max, table }
    }

    /// Grid sized for products and convolution matrices of degree `kmax`
    /// series: `m = 2(2 kmax + 1)`, tables up to `2 kmax`.
    pub fn for_degree(dim: usize, kmax: i32) -> Self {
        let k = kmax.max(1) as usize;
        Self::new(dim, 2 * (2 * k + 1), 2 * k)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn theta(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut r = idx;
        for a in (0..self.dim).rev() {
            out[a] = 2.0 * PI * (r % self.m) as f64 / self.m as f64;
            r /= self.m;
        }
        out
    }

    fn e(&self, j: usize, k: i32) -> C64 {
        self.table[j * (2 * self.kb_max + 1) + (k + self.kb_max as i32) as usize]
    }

    fn check(&self, kb: i32) -> Result<()> {
        if kb as usize > self.kb_max || self.m < 2 * kb as usize + 1 {
            return Err(Error::Aliasing { grid: self.m, degree: kb as usize });
        }
        Ok(())
    }

    /// Values on the grid of the dense series on `set`.
    pub fn synth(&self, set: &ModeSet, dense: &[C64]) -> Vec<C64> {
        let kb = set.kmax;
        self.check(kb).expect("collocation table too small");
        let w = (2 * kb + 1) as usize;
        let mut data = vec![C64::default(); w.pow(self.dim as u32)];
        for (q, &c) in set.modes.iter().zip(dense) {
            data[box_index(q, kb)] += c;
        }
        let mut shape = vec![w; self.dim];
        for axis in 0..self.dim {
            let m = self.m;
            data = transform_axis(&data, &shape, axis, m, |j, s| self.e(j, s as i32 - kb));
            shape[axis] = m;
        }
        data
    }

    /// Dense coefficients on `set` of the trigonometric interpolant of
    /// grid values.
    pub fn analyze(&self, values: &[C64], set: &ModeSet) -> Vec<C64> {
        let kb = set.kmax;
        self.check(kb).expect("collocation grid too coarse");
        let w = (2 * kb + 1) as usize;
        let inv = 1.0 / self.m as f64;
        let mut data = values.to_vec();
        let mut shape = vec![self.m; self.dim];
        for axis in 0..self.dim {
            data = transform_axis(&data, &shape, axis, w, |r, j| self.e(j, -(r as i32 - kb)) * inv);
            shape[axis] = w;
        }
        set.modes.iter().map(|q| data[box_index(q, kb)]).collect()
    }

    pub fn synth_poly(&self, f: &FourierPoly) -> Vec<C64> {
        let kb = f.degree().max(0);
        let set = ModeSet::l1_ball(self.dim, kb);
        self.synth(&set, &set.to_dense(f))
    }

    pub fn analyze_poly(&self, values: &[C64], kmax: i32) -> FourierPoly {
        let set = ModeSet::l1_ball(self.dim, kmax);
        set.from_dense(&self.analyze(values, &set))
    }
}

fn box_index(q: &[i32], kb: i32) -> usize {
    let w = (2 * kb + 1) as usize;
    q.iter().fold(0, |acc, &k| acc * w + (k + kb) as usize)
}

/// Applies `out[r] = sum_s mat(r, s) in[s]` along one axis of a row-major
/// tensor.
fn transform_axis(
    data: &[C64],
    shape: &[usize],
    axis: usize,
    out_len: usize,
    mat: impl Fn(usize, usize) -> C64,
) -> Vec<C64> {
    let n_in = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let m: Vec<C64> = (0..out_len * n_in).map(|x| mat(x / n_in, x % n_in)).collect();
    let mut out = vec![C64::default(); outer * out_len * inner];
    for o in 0..outer {
        for r in 0..out_len {
            let row = &m[r * n_in..(r + 1) * n_in];
            let dst = &mut out[(o * out_len + r) * inner..(o * out_len + r + 1) * inner];
            for (s, &c) in row.iter().enumerate() {
                if c == C64::default() {
                    continue;
                }
                let src = &data[(o * n_in + s) * inner..(o * n_in + s + 1) * inner];
                for (d, x) in dst.iter_mut().zip(src) {
                    *d += c * x;
                }
            }
        }
    }
    out
}

/// Pointwise composition `phi(F)` through the grid, truncated to `kmax`.
/// Coefficients below `1e-16` times the transform roundoff floor
/// (grid size times the largest value) are dropped.
pub fn nonlinear_compose(
    phi: impl Fn(C64) -> C64,
    f: &FourierPoly,
    grid_size: usize,
    kmax: i32,
) -> Result<FourierPoly> {
    let need = 2 * f.degree().max(kmax) as usize + 1;
    if grid_size < need {
        return Err(Error::Aliasing { grid: grid_size, degree: f.degree().max(kmax) as usize });
    }
    let col = Collocation::new(f.dim(), grid_size, f.degree().max(kmax) as usize);
    let vals: Vec<C64> = col.synth_poly(f).into_iter().map(phi).collect();
    let floor = vals.iter().map(|v| v.norm()).fold(1.0, f64::max) * grid_size as f64;
    Ok(col.analyze_poly(&vals, kmax).chop(1e-16 * floor))
}
