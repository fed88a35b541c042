use serde::{Deserialize, Serialize};

use super::quadrature::Lattice;
use crate::error::{Error, Result};

/// A real function of one velocity.
pub trait VelocityField: Send + Sync {
    fn eval(&self, v: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> VelocityField for F {
    fn eval(&self, v: &[f64]) -> f64 {
        self(v)
    }
}

/// Four-point Lagrange weights at lattice coordinate `u`, or `None` outside.
#[inline]
fn cubic_weights(u: f64, n: usize) -> Option<(usize, [f64; 4])> {
    let top = (n - 1) as f64;
    if !(u >= -1e-12 && u <= top + 1e-12) {
        return None;
    }
    let i0 = ((u.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
    let t = u - i0 as f64;
    let (a, b, c, d) = (t, t - 1.0, t - 2.0, t - 3.0);
    Some((i0, [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]))
}

/// Tensor cubic interpolation of lattice samples; zero outside the lattice box.
pub fn interpolate(lattice: &Lattice, values: &[f64], p: &[f64]) -> f64 {
    let n = lattice.n;
    match lattice.dim {
        2 => {
            let Some((i, wi)) = cubic_weights((p[0] - lattice.lo) / lattice.h, n) else { return 0.0 };
            let Some((j, wj)) = cubic_weights((p[1] - lattice.lo) / lattice.h, n) else { return 0.0 };
            let mut acc = 0.0;
            for a in 0..4 {
                let row = &values[(i + a) * n + j..(i + a) * n + j + 4];
                acc += wi[a] * (wj[0] * row[0] + wj[1] * row[1] + wj[2] * row[2] + wj[3] * row[3]);
            }
            acc
        }
        3 => {
            let Some((i, wi)) = cubic_weights((p[0] - lattice.lo) / lattice.h, n) else { return 0.0 };
            let Some((j, wj)) = cubic_weights((p[1] - lattice.lo) / lattice.h, n) else { return 0.0 };
            let Some((k, wk)) = cubic_weights((p[2] - lattice.lo) / lattice.h, n) else { return 0.0 };
            let mut acc = 0.0;
            for a in 0..4 {
                let mut inner = 0.0;
                for b in 0..4 {
                    let base = ((i + a) * n + j + b) * n + k;
                    let row = &values[base..base + 4];
                    inner += wj[b] * (wk[0] * row[0] + wk[1] * row[1] + wk[2] * row[2] + wk[3] * row[3]);
                }
                acc += wi[a] * inner;
            }
            acc
        }
        d => {
            let mut stencil = Vec::with_capacity(d);
            for &c in &p[..d] {
                match cubic_weights((c - lattice.lo) / lattice.h, n) {
                    Some(s) => stencil.push(s),
                    None => return 0.0,
                }
            }
            let mut acc = 0.0;
            for code in 0..4usize.pow(d as u32) {
                let (mut idx, mut w, mut c) = (0usize, 1.0, code);
                for (i0, ws) in &stencil {
                    idx = idx * n + i0 + c % 4;
                    w *= ws[c % 4];
                    c /= 4;
                }
                acc += w * values[idx];
            }
            acc
        }
    }
}

/// Samples of a velocity function on a lattice, evaluated by cubic interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if lattice.n < 4 {
            return Err(Error::InvalidInput("cubic interpolation needs at least 4 nodes per axis".into()));
        }
        if values.len() != lattice.len() {
            return Err(Error::InvalidInput(format!(
                "grid function has {} values, lattice has {}",
                values.len(),
                lattice.len()
            )));
        }
        Ok(GridFunction { lattice, values })
    }

    pub fn sample(lattice: Lattice, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut p = vec![0.0; lattice.dim];
        let values = (0..lattice.len())
            .map(|i| {
                lattice.point(i, &mut p);
                f(&p)
            })
            .collect();
        GridFunction { lattice, values }
    }
}

impl VelocityField for GridFunction {
    fn eval(&self, v: &[f64]) -> f64 {
        interpolate(&self.lattice, &self.values, v)
    }
}
