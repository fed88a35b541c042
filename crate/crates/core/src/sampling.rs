//! One-particle samplers for product initial data.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::registry::Named;
use crate::rng::SimRng;

/// A samplable one-particle density on R^d × R^d with a known pointwise value.
pub trait ParticleSampler: Named + Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut SimRng, x: &mut [f64], v: &mut [f64]);
    fn density(&self, x: &[f64], v: &[f64]) -> f64;
}

/// Mass-weighted Maxwellian (M/(2πT))^{d/2} exp(−M|v−u|²/(2T)).
pub fn maxwellian(v: &[f64], mass: f64, temperature: f64, drift: &[f64]) -> f64 {
    let d = v.len() as f64;
    let r2: f64 = v.iter().zip(drift).map(|(a, b)| (a - b) * (a - b)).sum();
    (mass / (2.0 * std::f64::consts::PI * temperature)).powf(d / 2.0) * (-mass * r2 / (2.0 * temperature)).exp()
}

/// Uniform positions in the cube `center + [−half_width, half_width]^d`,
/// Maxwellian velocities. Zero temperature gives velocities equal to `drift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxMaxwellian {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub mass: f64,
    pub temperature: f64,
    pub drift: Vec<f64>,
}

impl BoxMaxwellian {
    pub fn new(dim: usize, half_width: f64, mass: f64, temperature: f64) -> Self {
        BoxMaxwellian { center: vec![0.0; dim], half_width, mass, temperature, drift: vec![0.0; dim] }
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = center;
        self
    }

    pub fn with_drift(mut self, drift: Vec<f64>) -> Self {
        self.drift = drift;
        self
    }

    pub fn velocity_density(&self, v: &[f64]) -> f64 {
        maxwellian(v, self.mass, self.temperature, &self.drift)
    }

    pub fn spatial_density(&self, x: &[f64]) -> f64 {
        let inside = x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= self.half_width);
        if inside {
            (2.0 * self.half_width).powi(-(x.len() as i32))
        } else {
            0.0
        }
    }

    pub fn thermal_speed(&self) -> f64 {
        (self.temperature / self.mass).sqrt()
    }
}

impl Named for BoxMaxwellian {
    fn name(&self) -> &str {
        "box-maxwellian"
    }
}

impl ParticleSampler for BoxMaxwellian {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn sample(&self, rng: &mut SimRng, x: &mut [f64], v: &mut [f64]) {
        for (xk, c) in x.iter_mut().zip(&self.center) {
            *xk = c + self.half_width * (2.0 * rng.gen::<f64>() - 1.0);
        }
        let s = self.thermal_speed();
        for (vk, u) in v.iter_mut().zip(&self.drift) {
            let z: f64 = StandardNormal.sample(rng);
            *vk = u + s * z;
        }
    }

    fn density(&self, x: &[f64], v: &[f64]) -> f64 {
        self.spatial_density(x) * self.velocity_density(v)
    }
}

/// Uniform point in the ball of radius `r` in R^d.
pub fn uniform_in_ball(rng: &mut SimRng, r: f64, out: &mut [f64]) {
    loop {
        for c in out.iter_mut() {
            *c = r * (2.0 * rng.gen::<f64>() - 1.0);
        }
        if out.iter().map(|c| c * c).sum::<f64>() <= r * r {
            return;
        }
    }
}

/// Uniform point on the unit sphere S^{d-1}.
pub fn uniform_on_sphere(rng: &mut SimRng, out: &mut [f64]) {
    loop {
        for c in out.iter_mut() {
            *c = StandardNormal.sample(rng);
        }
        let n = out.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-12 {
            out.iter_mut().for_each(|c| *c /= n);
            return;
        }
    }
}
