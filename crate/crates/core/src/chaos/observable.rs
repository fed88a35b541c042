use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::VelocityGrid;
use crate::error::{Error, Result};
use crate::mixture::{Configuration, SpeciesKind};
use crate::vecops::{dist2, norm2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// One-velocity test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// Sum of monomials of total degree ≤ 4.
    Polynomial { terms: Vec<Monomial> },
    /// exp(−|v − center|² / (2 width²)).
    Gaussian { center: Vec<f64>, width: f64 },
    /// Indicator of the box Π [lo_k, hi_k].
    IndicatorBox { lo: Vec<f64>, hi: Vec<f64> },
}

pub const MAX_POLY_DEGREE: u32 = 4;

impl TestFunction {
    pub fn one(dim: usize) -> Self {
        TestFunction::Polynomial { terms: vec![Monomial { coef: 1.0, powers: vec![0; dim] }] }
    }

    /// v ↦ v_k.
    pub fn component(k: usize, dim: usize) -> Self {
        let mut powers = vec![0; dim];
        powers[k] = 1;
        TestFunction::Polynomial { terms: vec![Monomial { coef: 1.0, powers }] }
    }

    /// v ↦ |v|².
    pub fn energy(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|k| {
                let mut powers = vec![0; dim];
                powers[k] = 2;
                Monomial { coef: 1.0, powers }
            })
            .collect();
        TestFunction::Polynomial { terms }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunction::Polynomial { terms } => {
                for t in terms {
                    if t.powers.len() != dim {
                        return Err(Error::InvalidInput(format!("monomial has {} powers, expected {dim}", t.powers.len())));
                    }
                    let deg: u32 = t.powers.iter().sum();
                    if deg > MAX_POLY_DEGREE {
                        return Err(Error::InvalidInput(format!("monomial degree {deg} exceeds {MAX_POLY_DEGREE}")));
                    }
                    if !t.coef.is_finite() {
                        return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
                    }
                }
            }
            TestFunction::Gaussian { center, width } => {
                if center.len() != dim || !(*width > 0.0) {
                    return Err(Error::InvalidInput("gaussian needs a d-dimensional center and positive width".into()));
                }
            }
            TestFunction::IndicatorBox { lo, hi } => {
                if lo.len() != dim || hi.len() != dim || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidInput("indicator box needs lo < hi in every coordinate".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            TestFunction::Polynomial { terms } => terms
                .iter()
                .map(|t| t.coef * t.powers.iter().zip(v).map(|(&p, &x)| x.powi(p as i32)).product::<f64>())
                .sum(),
            TestFunction::Gaussian { center, width } => (-0.5 * dist2(v, center) / (width * width)).exp(),
            TestFunction::IndicatorBox { lo, hi } => {
                let inside = v.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *a <= *x && *x <= *b);
                inside as u8 as f64
            }
        }
    }
}

/// A product test function φ(V_s) = Π φ_i(v_i) over the s₁ A-particles
/// followed by the s₂ B-particles, with the spatial separation σ of Δ^X_s(σ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub id: String,
    pub s: [usize; 2],
    pub factors: Vec<TestFunction>,
    pub sigma: f64,
}

impl ObservableSpec {
    pub fn new(id: impl Into<String>, s: [usize; 2], factors: Vec<TestFunction>, sigma: f64) -> Self {
        ObservableSpec { id: id.into(), s, factors, sigma }
    }

    pub fn len(&self) -> usize {
        self.s[0] + self.s[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn species(&self, i: usize) -> SpeciesKind {
        if i < self.s[0] {
            SpeciesKind::A
        } else {
            SpeciesKind::B
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.factors.len() != self.len() || self.is_empty() {
            return Err(Error::InvalidInput(format!(
                "spec {}: {} factors for s = ({}, {})",
                self.id,
                self.factors.len(),
                self.s[0],
                self.s[1]
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("spec {}: separation must be nonnegative", self.id)));
        }
        self.factors.iter().try_for_each(|f| f.validate(dim))
    }

    pub fn eval(&self, vs: &[&[f64]]) -> f64 {
        self.factors.iter().zip(vs).map(|(f, v)| f.eval(v)).product()
    }

    /// Domain error unless all pairwise distances exceed σ.
    pub fn check_separated(&self, xs: &[Vec<f64>]) -> Result<()> {
        if xs.len() != self.len() {
            return Err(Error::InvalidInput(format!("expected {} positions, got {}", self.len(), xs.len())));
        }
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                if dist2(&xs[i], &xs[j]) <= self.sigma * self.sigma {
                    return Err(Error::Domain(format!("positions {i} and {j} are not {}-separated", self.sigma)));
                }
            }
        }
        Ok(())
    }
}

/// ∫_{B_R^{|s|}} φ(V_s) Π f_{σ_i}(x_i, v_i) dV_s for tensorized one-particle
/// densities, by grid quadrature on the balls of `vgrids`.
pub fn observable_tensor(
    densities: [&(dyn Fn(&[f64], &[f64]) -> f64 + Sync); 2],
    vgrids: [&VelocityGrid; 2],
    spec: &ObservableSpec,
    xs: &[Vec<f64>],
) -> Result<f64> {
    spec.check_separated(xs)?;
    Ok((0..spec.len())
        .map(|i| {
            let s = spec.species(i).index();
            let x = &xs[i];
            vgrids[s].integrate(|v| spec.factors[i].eval(v) * densities[s](x, v))
        })
        .product())
}

/// Ensemble estimate of ∫φ f^{(s)}(X_s, ·) with the spatial delta replaced by
/// the cube of half-width `half_width` around each x_i, averaging over all
/// ordered tuples of distinct particles; velocities outside B_R are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleObservable {
    pub mean: f64,
    pub stderr: f64,
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

fn tuple_sum(lists: &[Vec<(usize, f64)>], pos: usize, used: &mut Vec<(usize, usize)>, species: &[usize], acc: f64) -> f64 {
    if pos == lists.len() {
        return acc;
    }
    let mut total = 0.0;
    for &(idx, val) in &lists[pos] {
        if used.contains(&(species[pos], idx)) {
            continue;
        }
        used.push((species[pos], idx));
        total += tuple_sum(lists, pos + 1, used, species, acc * val);
        used.pop();
    }
    total
}

/// Per-sample value of the windowed observable.
pub fn windowed_value(z: &Configuration, spec: &ObservableSpec, xs: &[Vec<f64>], half_width: f64, radius: f64) -> Result<f64> {
    let counts = z.counts();
    if counts[0] < spec.s[0] || counts[1] < spec.s[1] {
        return Err(Error::Validation(format!("configuration has {:?} particles, spec needs {:?}", counts, spec.s)));
    }
    let species: Vec<usize> = (0..spec.len()).map(|i| spec.species(i).index()).collect();
    let lists: Vec<Vec<(usize, f64)>> = (0..spec.len())
        .map(|i| {
            let s = spec.species(i);
            (0..z.count(s))
                .filter(|&p| {
                    z.x(s, p).iter().zip(&xs[i]).all(|(a, c)| (a - c).abs() <= half_width) && norm2(z.v(s, p)) <= radius * radius
                })
                .map(|p| (p, spec.factors[i].eval(z.v(s, p))))
                .collect()
        })
        .collect();
    let sum = tuple_sum(&lists, 0, &mut Vec::new(), &species, 1.0);
    let cell = (2.0 * half_width).powi(z.dim() as i32);
    let norm = falling(counts[0], spec.s[0]) * falling(counts[1], spec.s[1]) * cell.powi(spec.len() as i32);
    Ok(sum / norm)
}

pub fn observable_ensemble(
    ensemble: &[Configuration],
    spec: &ObservableSpec,
    xs: &[Vec<f64>],
    half_width: f64,
    radius: f64,
) -> Result<EnsembleObservable> {
    spec.check_separated(xs)?;
    if ensemble.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let vals: Vec<f64> = ensemble
        .par_iter()
        .map(|z| windowed_value(z, spec, xs, half_width, radius))
        .collect::<Result<_>>()?;
    let (mean, stderr) = crate::hierarchy::duhamel::mean_stderr(&vals);
    Ok(EnsembleObservable { mean, stderr })
}
