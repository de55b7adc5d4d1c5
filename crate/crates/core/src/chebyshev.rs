//! Chebyshev grids on rays `{dir * t : 0 <= t <= radius}` of the complex
//! z-plane, with barycentric interpolation and the Euler operator `z d/dz`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// First-kind Chebyshev nodes in `t`, increasing, mapped to `dir * t`.
#[derive(Clone, Debug)]
pub struct RayGrid {
    pub dir: C64,
    pub radius: f64,
    pub t: Vec<f64>,
    weights: Vec<f64>,
}

impl RayGrid {
    pub fn new(dir: C64, radius: f64, n: usize) -> Self {
        let dir = dir / dir.norm();
        let t = (0..n)
            .map(|k| 0.5 * radius * (1.0 - ((2 * k + 1) as f64 * PI / (2 * n) as f64).cos()))
            .collect();
        let weights = (0..n)
            .map(|k| {
                let s = ((2 * k + 1) as f64 * PI / (2 * n) as f64).sin();
                if k % 2 == 0 { s } else { -s }
            })
            .collect();
        Self { dir, radius, t, weights }
    }

    /// Positive and negative real half-rays.
    pub fn real_pair(radius: f64, n: usize) -> [Self; 2] {
        [Self::new(C64::new(1.0, 0.0), radius, n), Self::new(C64::new(-1.0, 0.0), radius, n)]
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn node(&self, i: usize) -> C64 {
        self.dir * self.t[i]
    }

    pub fn nodes(&self) -> Vec<C64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Ray coordinate of `z`; complex when `z` is off the ray.
    pub fn coord(&self, z: C64) -> C64 {
        z / self.dir
    }

    /// Barycentric interpolation weights at coordinate `s`.
    pub fn bary_row(&self, s: C64) -> Vec<C64> {
        let mut row = vec![C64::default(); self.len()];
        for (k, &tk) in self.t.iter().enumerate() {
            if s == C64::from(tk) {
                row[k] = C64::new(1.0, 0.0);
                return row;
            }
        }
        let mut sum = C64::default();
        for (k, (&tk, &w)) in self.t.iter().zip(&self.weights).enumerate() {
            let v = w / (s - tk);
            row[k] = v;
            sum += v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        row
    }

    /// Real barycentric row at real coordinate `s`.
    pub fn bary_row_real(&self, s: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        if let Some(k) = self.t.iter().position(|&tk| tk == s) {
            row[k] = 1.0;
            return row;
        }
        let mut sum = 0.0;
        for (k, (&tk, &w)) in self.t.iter().zip(&self.weights).enumerate() {
            row[k] = w / (s - tk);
            sum += row[k];
        }
        row.iter_mut().for_each(|v| *v /= sum);
        row
    }

    pub fn interp(&self, values: &[C64], z: C64) -> C64 {
        self.bary_row(self.coord(z)).iter().zip(values).map(|(a, b)| a * b).sum()
    }

    /// `d/dt` on nodal values.
    pub fn diff_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = self.weights[j] / self.weights[i] / (self.t[i] - self.t[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        d
    }

    /// `z d/dz = t d/dt` on nodal values.
    pub fn euler_matrix(&self) -> DMatrix<f64> {
        let mut d = self.diff_matrix();
        for i in 0..self.len() {
            d.row_mut(i).scale_mut(self.t[i]);
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_analytic_functions() {
        let g = RayGrid::new(C64::new(1.0, 0.0), 3.0, 48);
        let f = |z: C64| (C64::new(1.0, 0.0) + z * z).inv() * z.exp();
        let vals: Vec<C64> = g.nodes().into_iter().map(f).collect();
        for z in [0.0, 0.3, 1.0, 2.7, 3.0] {
            let z = C64::from(z);
            assert!((g.interp(&vals, z) - f(z)).norm() < 1e-13);
        }
        // slightly off the ray
        let z = C64::new(-0.02, 0.01);
        assert!((g.interp(&vals, z) - f(z)).norm() < 1e-12);
        let row = g.bary_row_real(1.3);
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotated_rays() {
        let dir = C64::from_polar(1.0, 0.1);
        let g = RayGrid::new(dir, 5.0, 64);
        let f = |z: C64| z.atan();
        let vals: Vec<C64> = g.nodes().into_iter().map(f).collect();
        let z = C64::from_polar(4.2, 0.1);
        assert!((g.interp(&vals, z) - f(z)).norm() < 1e-12);
        assert!((g.node(3) / dir).im.abs() < 1e-15);
    }

    #[test]
    fn euler_operator() {
        let g = RayGrid::new(C64::new(-1.0, 0.0), 3.0, 48);
        let e = g.euler_matrix();
        let f: Vec<f64> = g.t.iter().map(|t| (0.5 * t).sin()).collect();
        let ef = &e * nalgebra::DVector::from_vec(f);
        for (i, t) in g.t.iter().enumerate() {
            assert!((ef[i] - 0.5 * t * (0.5 * t).cos()).abs() < 1e-11);
        }
    }
}
