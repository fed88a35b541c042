use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::observable::{observable_ensemble, ObservableSpec, TestFunction};
use crate::collision::{GridDensityPair, VelocityField, VelocityGrid};
use crate::error::{Error, Result};
use crate::hierarchy::duhamel::mean_stderr;
use crate::mixture::{Configuration, SpeciesKind};
use crate::rng::stream;
use crate::scaling::RealizedScaling;
use crate::vecops::{dist2, norm2};

pub const DEFAULT_PROBES: usize = 64;

/// An MD ensemble at one realized scaling point.
#[derive(Debug, Clone)]
pub struct ChaosPoint {
    pub realized: RealizedScaling,
    pub ensemble: Vec<Configuration>,
}

/// Spatially uniform tensorized reference g ⊗ h on a window: constant
/// spatial densities times velocity densities, integrated on the balls of
/// `vgrids` (which may be finer than the grid the densities came from).
#[derive(Clone)]
pub struct TensorReference {
    pub density: [f64; 2],
    pub velocity: [Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>; 2],
    pub vgrids: [VelocityGrid; 2],
}

impl TensorReference {
    /// Reference from a spatially homogeneous PDE state, interpolated onto `vgrids`.
    pub fn from_grid(state: &GridDensityPair, vgrids: [VelocityGrid; 2], density: [f64; 2]) -> Result<Self> {
        if state.space.is_some() {
            return Err(Error::InvalidInput("tensor reference needs a spatially homogeneous state".into()));
        }
        if vgrids[0].dim() != state.velocity[0].dim || vgrids[1].dim() != state.velocity[1].dim {
            return Err(Error::InvalidInput("quadrature and state dimensions differ".into()));
        }
        let fa = state.field(0, 0);
        let fb = state.field(1, 0);
        Ok(TensorReference {
            density,
            velocity: [Arc::new(move |v: &[f64]| fa.eval(v)), Arc::new(move |v: &[f64]| fb.eval(v))],
            vgrids,
        })
    }

    /// ρ_σ ∫_{B_R} φ f_σ.
    pub fn moment(&self, species: SpeciesKind, phi: &TestFunction) -> f64 {
        let s = species.index();
        self.density[s] * self.vgrids[s].integrate(|v| phi.eval(v) * (self.velocity[s])(v))
    }

    pub fn observable(&self, spec: &ObservableSpec) -> f64 {
        (0..spec.len()).map(|i| self.moment(spec.species(i), &spec.factors[i])).product()
    }

    pub fn radius(&self) -> f64 {
        self.vgrids[0].extent.min(self.vgrids[1].extent)
    }
}

/// Latin-hypercube probe placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Probes lie in window^d per particle.
    pub window: (f64, f64),
    /// Half-width of the spatial averaging cube around each probe position.
    pub half_width: f64,
    pub count: usize,
    pub seed: u64,
}

/// `count` points of (R^d)^n in the window, Latin-hypercube stratified in
/// each of the n·d coordinates and σ-separated.
pub fn latin_hypercube_probes(n: usize, dim: usize, window: (f64, f64), sigma: f64, count: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    let (lo, hi) = window;
    if !(lo < hi) || count == 0 || n == 0 {
        return Err(Error::InvalidInput("probe window must be nonempty".into()));
    }
    let mut rng = stream(seed, 0);
    let axes: Vec<Vec<f64>> = (0..n * dim)
        .map(|_| {
            let mut strata: Vec<usize> = (0..count).collect();
            strata.shuffle(&mut rng);
            strata.iter().map(|&k| lo + (hi - lo) * (k as f64 + rng.gen::<f64>()) / count as f64).collect()
        })
        .collect();
    let mut probes: Vec<Vec<Vec<f64>>> = (0..count)
        .map(|p| (0..n).map(|i| (0..dim).map(|k| axes[i * dim + k][p]).collect()).collect())
        .collect();
    let bad = |xs: &Vec<Vec<f64>>| (0..n).any(|i| (i + 1..n).any(|j| dist2(&xs[i], &xs[j]) <= sigma * sigma));
    // swapping one particle's block between two probes keeps every axis stratified
    for _ in 0..100 * count * n.max(1) {
        let Some(p) = probes.iter().position(bad) else {
            return Ok(probes);
        };
        let i = rng.gen_range(0..n);
        let q = rng.gen_range(0..count);
        let tmp = probes[p][i].clone();
        probes[p][i] = probes[q][i].clone();
        probes[q][i] = tmp;
    }
    Err(Error::EmptyDomain(format!("no separated Latin hypercube with σ = {sigma} in the window")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosRow {
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub spec_id: String,
    pub t: f64,
    pub gap: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub t: f64,
    pub cov: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub rows: Vec<ChaosRow>,
    pub covariance: Vec<CovarianceRow>,
    /// Least-squares slope of log gap against log N₂, per spec.
    pub slopes: Vec<(String, f64)>,
}

impl ChaosReport {
    pub fn gaps(&self, spec_id: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.spec_id == spec_id).map(|r| r.gap).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_covariance_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.covariance {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// cov(φ₁(v₁^A), φ₂(v₁^B)) over an exchangeable ensemble, computed from the
/// per-sample species means; velocities outside B_R are dropped.
pub fn ab_covariance(ensemble: &[Configuration], phi: (&TestFunction, &TestFunction), radius: f64) -> Result<(f64, f64)> {
    if ensemble.len() < 2 {
        return Err(Error::InvalidInput("covariance needs at least two samples".into()));
    }
    let means: Vec<(f64, f64)> = ensemble
        .par_iter()
        .map(|z| {
            let avg = |s: SpeciesKind, f: &TestFunction| {
                let n = z.count(s);
                if n == 0 {
                    return Err(Error::Validation("covariance needs both species present".into()));
                }
                let sum: f64 = (0..n).map(|i| z.v(s, i)).filter(|v| norm2(v) <= radius * radius).map(|v| f.eval(v)).sum();
                Ok(sum / n as f64)
            };
            Ok((avg(SpeciesKind::A, phi.0)?, avg(SpeciesKind::B, phi.1)?))
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = means.iter().map(|m| m.0).collect();
    let b: Vec<f64> = means.iter().map(|m| m.1).collect();
    let (ma, _) = mean_stderr(&a);
    let (mb, _) = mean_stderr(&b);
    let prods: Vec<f64> = means.iter().map(|(x, y)| (x - ma) * (y - mb)).collect();
    let n = prods.len() as f64;
    let (m, se) = mean_stderr(&prods);
    Ok((m * n / (n - 1.0), se))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Sup over Latin-hypercube probes of |I_φ(f̂_N)(t) − I_φ(g ⊗ h)(t)| for each
/// spec and scaling point, plus the A–B covariance diagnostic.
pub fn chaos_metric(
    points: &[ChaosPoint],
    reference: &TensorReference,
    specs: &[ObservableSpec],
    t: f64,
    probes: &ProbeConfig,
    covariance: (&TestFunction, &TestFunction),
) -> Result<ChaosReport> {
    let first = points.first().ok_or_else(|| Error::InvalidInput("no scaling points".into()))?;
    let dim = first.realized.scaling.dim;
    for p in points {
        if p.realized.scaling != first.realized.scaling {
            return Err(Error::Validation(format!(
                "scaling point N2 = {} does not share the common scaling {:?}",
                p.realized.n2, first.realized.scaling
            )));
        }
        if p.ensemble.is_empty() {
            return Err(Error::Validation(format!("empty ensemble at N2 = {}", p.realized.n2)));
        }
    }
    let radius = reference.radius();
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for spec in specs {
        spec.validate(dim)?;
        let xs_set = latin_hypercube_probes(spec.len(), dim, probes.window, spec.sigma, probes.count, probes.seed)?;
        let target = reference.observable(spec);
        let mut logs = (Vec::new(), Vec::new());
        for p in points {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for xs in &xs_set {
                let est = observable_ensemble(&p.ensemble, spec, xs, probes.half_width, radius)?;
                let gap = (est.mean - target).abs();
                if gap > best.0 {
                    best = (gap, est.stderr);
                }
            }
            logs.0.push((p.realized.n2 as f64).ln());
            logs.1.push(best.0.ln());
            rows.push(ChaosRow {
                n1: p.realized.n1,
                n2: p.realized.n2,
                eps1: p.realized.eps1,
                eps2: p.realized.eps2,
                spec_id: spec.id.clone(),
                t,
                gap: best.0,
                stderr: best.1,
            });
        }
        if points.len() >= 2 {
            slopes.push((spec.id.clone(), slope(&logs.0, &logs.1)));
        }
    }
    let covariance = points
        .iter()
        .map(|p| {
            let (cov, stderr) = ab_covariance(&p.ensemble, covariance, radius)?;
            Ok(CovarianceRow { n1: p.realized.n1, n2: p.realized.n2, t, cov, stderr })
        })
        .collect::<Result<_>>()?;
    Ok(ChaosReport { rows, covariance, slopes })
}
