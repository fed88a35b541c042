use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::observable::ObservableSpec;
use crate::error::{Error, Result};
use crate::mixture::{Configuration, SpeciesKind};
use crate::rng::stream;

/// Per-particle histogram cells: `nx` bins per position axis on `x_range`,
/// `nv` bins per velocity axis on [−v_radius, v_radius].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub x_range: (f64, f64),
    pub nx: usize,
    pub v_radius: f64,
    pub nv: usize,
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_range.0 < self.x_range.1) || self.nx == 0 || !(self.v_radius > 0.0) || self.nv == 0 {
            return Err(Error::InvalidInput("histogram needs a nonempty range and at least one bin per axis".into()));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / self.nx as f64
    }

    pub fn hv(&self) -> f64 {
        2.0 * self.v_radius / self.nv as f64
    }

    /// Phase-space volume of one particle's cell.
    pub fn cell_volume(&self, dim: usize) -> f64 {
        (self.hx() * self.hv()).powi(dim as i32)
    }

    fn bin(lo: f64, h: f64, n: usize, x: f64) -> Option<u32> {
        let u = ((x - lo) / h).floor();
        (u >= 0.0 && u < n as f64).then_some(u as u32)
    }

    /// Appends the 2d bin indices of (x, v); false if out of range.
    fn push_key(&self, x: &[f64], v: &[f64], key: &mut Vec<u32>) -> bool {
        for &c in x {
            match Self::bin(self.x_range.0, self.hx(), self.nx, c) {
                Some(b) => key.push(b),
                None => return false,
            }
        }
        for &c in v {
            match Self::bin(-self.v_radius, self.hv(), self.nv, c) {
                Some(b) => key.push(b),
                None => return false,
            }
        }
        true
    }

    /// Center of the cell with the given 2d bin indices.
    pub fn center(&self, key: &[u32]) -> (Vec<f64>, Vec<f64>) {
        let d = key.len() / 2;
        let x = key[..d].iter().map(|&b| self.x_range.0 + (b as f64 + 0.5) * self.hx()).collect();
        let v = key[d..].iter().map(|&b| -self.v_radius + (b as f64 + 0.5) * self.hv()).collect();
        (x, v)
    }
}

/// How same-species labels are symmetrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetrization {
    /// The first s_α particles after this many independent random relabelings.
    Random(usize),
    /// Every ordered tuple of distinct particles.
    Exhaustive,
}

impl Default for Symmetrization {
    fn default() -> Self {
        Symmetrization::Random(8)
    }
}

/// Histogram estimate of the (s₁, s₂) mixed marginal. Keys concatenate the
/// per-particle bins of the s₁ A-particles followed by the s₂ B-particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub s: [usize; 2],
    pub dim: usize,
    pub grid: HistogramSpec,
    pub counts: BTreeMap<Vec<u32>, f64>,
    pub samples: usize,
    /// Weight of tuples with a coordinate outside the grid.
    pub out_of_range: f64,
}

type Tuple = Vec<(SpeciesKind, usize)>;

fn ordered_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

fn tuples_for(z: &Configuration, s: [usize; 2], sym: Symmetrization, seed: u64, index: u64) -> Vec<(Tuple, f64)> {
    match sym {
        Symmetrization::Random(k) => {
            let mut rng = stream(seed, index);
            let w = 1.0 / k as f64;
            (0..k)
                .map(|_| {
                    let mut t = Vec::with_capacity(s[0] + s[1]);
                    for sp in SpeciesKind::ALL {
                        let mut idx: Vec<usize> = (0..z.count(sp)).collect();
                        idx.shuffle(&mut rng);
                        t.extend(idx[..s[sp.index()]].iter().map(|&i| (sp, i)));
                    }
                    (t, w)
                })
                .collect()
        }
        Symmetrization::Exhaustive => {
            let ta = ordered_tuples(z.count(SpeciesKind::A), s[0]);
            let tb = ordered_tuples(z.count(SpeciesKind::B), s[1]);
            let w = 1.0 / (ta.len() * tb.len()) as f64;
            let mut out = Vec::with_capacity(ta.len() * tb.len());
            for a in &ta {
                for b in &tb {
                    let t = a.iter().map(|&i| (SpeciesKind::A, i)).chain(b.iter().map(|&i| (SpeciesKind::B, i))).collect();
                    out.push((t, w));
                }
            }
            out
        }
    }
}

/// Histograms the (s₁, s₂) marginal of an ensemble, symmetrized over
/// same-species relabelings.
pub fn estimate_marginal(
    ensemble: &[Configuration],
    s: [usize; 2],
    grid: HistogramSpec,
    sym: Symmetrization,
    seed: u64,
) -> Result<MarginalEstimate> {
    grid.validate()?;
    if let Symmetrization::Random(0) = sym {
        return Err(Error::InvalidInput("need at least one random relabeling".into()));
    }
    let dim = ensemble.first().map(|z| z.dim()).ok_or_else(|| Error::InvalidInput("empty ensemble".into()))?;
    for (i, z) in ensemble.iter().enumerate() {
        let c = z.counts();
        if c[0] < s[0] || c[1] < s[1] || z.dim() != dim {
            return Err(Error::Validation(format!("sample {i} has {c:?} particles, the marginal needs {s:?}")));
        }
    }
    let per_sample: Vec<(Vec<(Vec<u32>, f64)>, f64)> = ensemble
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut hits = Vec::new();
            let mut lost = 0.0;
            for (t, w) in tuples_for(z, s, sym, seed, i as u64) {
                let mut key = Vec::with_capacity(2 * dim * t.len());
                if t.iter().all(|&(sp, p)| grid.push_key(z.x(sp, p), z.v(sp, p), &mut key)) {
                    hits.push((key, w));
                } else {
                    lost += w;
                }
            }
            (hits, lost)
        })
        .collect();
    let mut counts = BTreeMap::new();
    let mut out_of_range = 0.0;
    for (hits, lost) in per_sample {
        for (k, w) in hits {
            *counts.entry(k).or_insert(0.0) += w;
        }
        out_of_range += lost;
    }
    Ok(MarginalEstimate { s, dim, grid, counts, samples: ensemble.len(), out_of_range })
}

impl MarginalEstimate {
    /// Estimated probability mass inside the grid (≤ 1).
    pub fn mass(&self) -> f64 {
        self.counts.values().sum::<f64>() / self.samples as f64
    }

    pub fn probability(&self, key: &[u32]) -> f64 {
        self.counts.get(key).copied().unwrap_or(0.0) / self.samples as f64
    }

    pub fn density(&self, key: &[u32]) -> f64 {
        self.probability(key) / self.grid.cell_volume(self.dim).powi((self.s[0] + self.s[1]) as i32)
    }

    /// Integrates out the last particle of `species`.
    pub fn integrate_last(&self, species: SpeciesKind) -> Result<MarginalEstimate> {
        if self.s[species.index()] == 0 {
            return Err(Error::InvalidInput(format!("no {} particle to integrate out", species.tag())));
        }
        let slot = match species {
            SpeciesKind::A => self.s[0] - 1,
            SpeciesKind::B => self.s[0] + self.s[1] - 1,
        };
        let w = 2 * self.dim;
        let mut counts = BTreeMap::new();
        for (k, &c) in &self.counts {
            let mut key = k[..slot * w].to_vec();
            key.extend_from_slice(&k[(slot + 1) * w..]);
            *counts.entry(key).or_insert(0.0) += c;
        }
        let mut s = self.s;
        s[species.index()] -= 1;
        Ok(MarginalEstimate { s, dim: self.dim, grid: self.grid, counts, samples: self.samples, out_of_range: self.out_of_range })
    }

    /// ∫φ(V_s) f̂^{(s)}(X_s, V_s) dV_s by histogram summation, with φ taken at
    /// velocity cell centers.
    pub fn observable(&self, spec: &ObservableSpec, xs: &[Vec<f64>]) -> Result<f64> {
        if spec.s != self.s {
            return Err(Error::InvalidInput(format!("spec is for s = {:?}, estimate for {:?}", spec.s, self.s)));
        }
        spec.check_separated(xs)?;
        let d = self.dim;
        let mut xbins = Vec::with_capacity(xs.len() * d);
        for x in xs {
            for &c in x {
                let b = HistogramSpec::bin(self.grid.x_range.0, self.grid.hx(), self.grid.nx, c)
                    .ok_or_else(|| Error::Domain(format!("position {c} outside the histogram range")))?;
                xbins.push(b);
            }
        }
        let w = 2 * d;
        let mut acc = 0.0;
        for (k, &c) in &self.counts {
            if (0..xs.len()).any(|i| k[i * w..i * w + d] != xbins[i * d..(i + 1) * d]) {
                continue;
            }
            let centers: Vec<Vec<f64>> = (0..xs.len()).map(|i| self.grid.center(&k[i * w..(i + 1) * w]).1).collect();
            let vs: Vec<&[f64]> = centers.iter().map(|v| v.as_slice()).collect();
            acc += c * spec.eval(&vs);
        }
        let xcell = self.grid.hx().powi(d as i32);
        Ok(acc / self.samples as f64 / xcell.powi(xs.len() as i32))
    }

    /// Σ_cells |p̂(cell) − p(cell)| over every cell of the grid, with `truth`
    /// giving the exact probability of a cell key.
    pub fn l1_distance(&self, truth: &dyn Fn(&[u32]) -> f64) -> f64 {
        let w = 2 * self.dim;
        let n = self.s[0] + self.s[1];
        let radix: Vec<u32> = (0..n * w).map(|i| if i % w < self.dim { self.grid.nx as u32 } else { self.grid.nv as u32 }).collect();
        let mut key = vec![0u32; n * w];
        let mut total = 0.0;
        loop {
            total += (self.probability(&key) - truth(&key)).abs();
            let mut i = 0;
            loop {
                if i == key.len() {
                    return total;
                }
                key[i] += 1;
                if key[i] < radix[i] {
                    break;
                }
                key[i] = 0;
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> HistogramSpec {
        HistogramSpec { x_range: (-1.0, 1.0), nx: 4, v_radius: 2.0, nv: 4 }
    }

    #[test]
    fn identical_configurations_fill_one_cell() {
        let mut z = Configuration::new(2);
        z.push(SpeciesKind::A, &[0.1, 0.1], &[0.3, -0.3]);
        z.push(SpeciesKind::B, &[-0.6, 0.2], &[1.0, 0.5]);
        let ens = vec![z; 50];
        let est = estimate_marginal(&ens, [1, 1], grid(), Symmetrization::default(), 1).unwrap();
        assert_eq!(est.counts.len(), 1);
        assert!((est.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_particles_is_an_error() {
        let mut z = Configuration::new(2);
        z.push(SpeciesKind::A, &[0.1, 0.1], &[0.3, -0.3]);
        assert!(matches!(estimate_marginal(&[z], [2, 0], grid(), Symmetrization::Exhaustive, 1), Err(Error::Validation(_))));
    }

    #[test]
    fn exhaustive_integration_is_exact() {
        let mut z = Configuration::new(1);
        for (x, v) in [(0.1, 0.5), (-0.7, 1.5), (0.4, -0.2)] {
            z.push(SpeciesKind::A, &[x], &[v]);
        }
        let g = HistogramSpec { x_range: (-1.0, 1.0), nx: 4, v_radius: 2.0, nv: 2 };
        let two = estimate_marginal(&[z.clone()], [2, 0], g, Symmetrization::Exhaustive, 0).unwrap();
        let one = estimate_marginal(&[z], [1, 0], g, Symmetrization::Exhaustive, 0).unwrap();
        let red = two.integrate_last(SpeciesKind::A).unwrap();
        for (k, c) in &one.counts {
            assert!((red.counts[k] - c).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_mass_reported() {
        let mut z = Configuration::new(1);
        z.push(SpeciesKind::A, &[0.1], &[0.5]);
        z.push(SpeciesKind::A, &[3.0], &[0.5]);
        let est = estimate_marginal(&[z], [1, 0], grid(), Symmetrization::Exhaustive, 0).unwrap();
        assert!((est.mass() - 0.5).abs() < 1e-15);
        assert!((est.out_of_range - 0.5).abs() < 1e-15);
    }
}
