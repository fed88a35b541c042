use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{ball_volume, sphere_area};

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            let dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let (pn, pnm1) = if n == 1 { (z, 1.0) } else { (q1, q0) };
                let dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// Quadrature on the unit sphere S^{d−1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub dim: usize,
    /// Flat node coordinates, `dim` per node.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest total polynomial degree integrated exactly.
    pub exact_degree: usize,
}

impl SphereQuadrature {
    /// Default resolution: 32 nodes for d = 2, 12 × 24 = 288 nodes for d = 3.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(Self::trapezoid_2d(32)),
            3 => Ok(Self::product_gauss_3d(12)),
            _ => Err(Error::InvalidInput(format!("sphere quadrature available for d in {{2, 3}}, got {dim}"))),
        }
    }

    /// Equispaced angles with equal weights 2π/n.
    pub fn trapezoid_2d(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(2 * n);
        for k in 0..n {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            nodes.push(a.cos());
            nodes.push(a.sin());
        }
        SphereQuadrature { dim: 2, nodes, weights: vec![2.0 * std::f64::consts::PI / n as f64; n], exact_degree: n - 1 }
    }

    /// Gauss–Legendre in cos(polar) times trapezoid in azimuth (2·n_polar points).
    pub fn product_gauss_3d(n_polar: usize) -> Self {
        let (z, wz) = gauss_legendre(n_polar);
        let n_az = 2 * n_polar;
        let mut nodes = Vec::with_capacity(3 * n_polar * n_az);
        let mut weights = Vec::with_capacity(n_polar * n_az);
        for (zi, wi) in z.iter().zip(&wz) {
            let r = (1.0 - zi * zi).sqrt();
            for k in 0..n_az {
                let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_az as f64;
                nodes.extend_from_slice(&[r * a.cos(), r * a.sin(), *zi]);
                weights.push(wi * 2.0 * std::f64::consts::PI / n_az as f64);
            }
        }
        SphereQuadrature { dim: 3, nodes, weights, exact_degree: 2 * n_polar - 1 }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }
}

/// Uniform tensor lattice {lo + k h : k = 0..n−1}^d, last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl Lattice {
    pub fn symmetric(dim: usize, extent: f64, n: usize) -> Self {
        Lattice { dim, lo: -extent, h: 2.0 * extent / (n - 1) as f64, n }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn hi(&self) -> f64 {
        self.lo + (self.n - 1) as f64 * self.h
    }

    /// Coordinates of the flat index `idx`.
    pub fn point(&self, mut idx: usize, out: &mut [f64]) {
        for k in (0..self.dim).rev() {
            out[k] = self.lo + (idx % self.n) as f64 * self.h;
            idx /= self.n;
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.dim];
        for i in 0..self.len() {
            self.point(i, &mut out[i * self.dim..(i + 1) * self.dim]);
        }
        out
    }
}

/// Quadrature on the velocity ball B_R built on a symmetric lattice.
///
/// Interior nodes carry weight h^d. Nodes whose dual cell straddles the sphere
/// |v| = R carry the sub-sampled inside fraction, rescaled so that constants
/// integrate to |B_R| exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub lattice: Lattice,
    pub extent: f64,
    /// Flat coordinates of nodes with positive weight.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Lattice index of each quadrature node.
    pub lattice_index: Vec<usize>,
}

impl VelocityGrid {
    pub fn new(dim: usize, extent: f64, n: usize) -> Result<Self> {
        if n < 4 || !(extent > 0.0) {
            return Err(Error::InvalidInput("velocity grid needs n >= 4 and extent > 0".into()));
        }
        let lattice = Lattice::symmetric(dim, extent, n);
        let h = lattice.h;
        let sub = 8usize;
        let mut nodes = Vec::new();
        let mut raw = Vec::new();
        let mut partial = Vec::new();
        let mut lattice_index = Vec::new();
        let mut p = vec![0.0; dim];
        let mut q = vec![0.0; dim];
        let half_diag = 0.5 * h * (dim as f64).sqrt();
        for idx in 0..lattice.len() {
            lattice.point(idx, &mut p);
            let r = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r - half_diag > extent {
                continue;
            }
            let (frac, is_partial) = if r + half_diag <= extent {
                (1.0, false)
            } else {
                let total = sub.pow(dim as u32);
                let mut inside = 0usize;
                for s in 0..total {
                    let mut t = s;
                    for k in 0..dim {
                        let j = t % sub;
                        t /= sub;
                        q[k] = p[k] + h * ((j as f64 + 0.5) / sub as f64 - 0.5);
                    }
                    if q.iter().map(|c| c * c).sum::<f64>() <= extent * extent {
                        inside += 1;
                    }
                }
                (inside as f64 / total as f64, true)
            };
            if frac > 0.0 {
                nodes.extend_from_slice(&p);
                raw.push(frac * h.powi(dim as i32));
                partial.push(is_partial);
                lattice_index.push(idx);
            }
        }
        let target = ball_volume(dim) * extent.powi(dim as i32);
        let full: f64 = raw.iter().zip(&partial).filter(|(_, &b)| !b).map(|(w, _)| w).sum();
        let part: f64 = raw.iter().zip(&partial).filter(|(_, &b)| b).map(|(w, _)| w).sum();
        let scale = if part > 0.0 { (target - full) / part } else { 1.0 };
        let weights = raw.iter().zip(&partial).map(|(w, &b)| if b { w * scale } else { *w }).collect();
        Ok(VelocityGrid { lattice, extent, nodes, weights, lattice_index })
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[k * d..(k + 1) * d]
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|k| self.weights[k] * f(self.node(k))).sum()
    }
}

/// Radius beyond which a mass-`mass`, temperature-`temperature` Maxwellian in
/// R^d carries less than `tail` of its mass.
pub fn maxwellian_tail_radius(dim: usize, mass: f64, temperature: f64, tail: f64) -> f64 {
    let sigma = (temperature / mass).sqrt();
    // P(|Z| > r) for a standard Gaussian in R^d, by radial quadrature of the chi density
    let tail_at = |r: f64| -> f64 {
        let d = dim as f64;
        let norm = sphere_area(dim) / (2.0 * std::f64::consts::PI).powf(d / 2.0);
        let (mut acc, steps) = (0.0, 4000);
        let top = r + 40.0;
        let dr = (top - r) / steps as f64;
        for i in 0..steps {
            let s = r + (i as f64 + 0.5) * dr;
            acc += s.powf(d - 1.0) * (-0.5 * s * s).exp() * dr;
        }
        norm * acc
    };
    let mut r = 1.0;
    while tail_at(r) > tail {
        r += 0.05;
    }
    r * sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact up to degree 11
        let i10: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((i10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_weights_sum_to_area() {
        let q2 = SphereQuadrature::default_for(2).unwrap();
        assert_eq!(q2.len(), 32);
        assert!((q2.weights.iter().sum::<f64>() - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        let q3 = SphereQuadrature::default_for(3).unwrap();
        assert!((q3.weights.iter().sum::<f64>() - 4.0 * std::f64::consts::PI).abs() < 1e-10);
        assert!(SphereQuadrature::default_for(4).is_err());
    }

    #[test]
    fn sphere_declared_degree_is_exact() {
        // ∫_{S²} z⁴ = 4π/5, ∫_{S²} x² y² = 4π/15
        let q = SphereQuadrature::default_for(3).unwrap();
        let z4: f64 = (0..q.len()).map(|k| q.weights[k] * q.node(k)[2].powi(4)).sum();
        let x2y2: f64 = (0..q.len()).map(|k| q.weights[k] * (q.node(k)[0] * q.node(k)[1]).powi(2)).sum();
        assert!((z4 - 4.0 * std::f64::consts::PI / 5.0).abs() < 1e-12);
        assert!((x2y2 - 4.0 * std::f64::consts::PI / 15.0).abs() < 1e-12);
        // ∫_{S¹} cos⁴ = 3π/4
        let c = SphereQuadrature::default_for(2).unwrap();
        let c4: f64 = (0..c.len()).map(|k| c.weights[k] * c.node(k)[0].powi(4)).sum();
        assert!((c4 - 0.75 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn velocity_grid_integrates_constants() {
        for (d, n) in [(2, 17), (3, 9)] {
            let g = VelocityGrid::new(d, 3.0, n).unwrap();
            let vol = ball_volume(d) * 3f64.powi(d as i32);
            assert!((g.integrate(|_| 1.0) / vol - 1.0).abs() < 1e-6);
            assert!(g.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn velocity_grid_integrates_gaussian() {
        let g = VelocityGrid::new(2, 7.0, 41).unwrap();
        let m = g.integrate(|v| crate::sampling::maxwellian(v, 1.0, 1.0, &[0.0, 0.0]));
        assert!((m - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tail_radius_bounds_mass() {
        let r = maxwellian_tail_radius(2, 1.0, 1.0, 1e-8);
        // d = 2: tail is exp(−r²/2)
        assert!((-0.5 * r * r).exp() <= 1e-8);
        assert!((-0.5 * (r - 0.06) * (r - 0.06)).exp() > 1e-8);
    }
}
