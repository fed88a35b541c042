use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{advance, FlowOptions, PathologyKind};
use crate::error::{Error, Result};
use crate::mixture::{Configuration, MixtureParams, SpeciesKind};
use crate::rng::{stream, SimRng};
use crate::sampling::ParticleSampler;
use crate::vecops::ball_volume;

pub const DEFAULT_ACCEPTANCE_FLOOR: f64 = 1e-4;

/// Truncated phase space B^x_ρ × B^v_R used to restrict one-particle draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimBox {
    pub half_width: f64,
    pub velocity_bound: f64,
}

impl SimBox {
    pub fn new(half_width: f64, velocity_bound: f64) -> Result<Self> {
        if !(half_width > 0.0 && velocity_bound > 0.0) {
            return Err(Error::InvalidInput("SimBox extents must be positive".into()));
        }
        Ok(SimBox { half_width, velocity_bound })
    }

    fn contains(&self, x: &[f64], v: &[f64]) -> bool {
        x.iter().all(|c| c.abs() <= self.half_width) && v.iter().map(|c| c * c).sum::<f64>() <= self.velocity_bound.powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledConfiguration {
    pub config: Configuration,
    pub attempts: u64,
    /// 1/attempts: a single-draw estimate of the normalization 𝒵_N.
    pub acceptance_rate: f64,
}

/// Uniform hash grid used to test a new particle against those already placed.
struct OverlapGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    pts: Vec<(SpeciesKind, Vec<f64>)>,
}

impl OverlapGrid {
    fn new(cell: f64) -> Self {
        OverlapGrid { cell, cells: HashMap::new(), pts: Vec::new() }
    }

    fn clear(&mut self) {
        self.cells.clear();
        self.pts.clear();
    }

    fn key(&self, x: &[f64]) -> [i64; 3] {
        let mut k = [0i64; 3];
        for (i, c) in x.iter().take(3).enumerate() {
            k[i] = (c / self.cell).floor() as i64;
        }
        k
    }

    fn overlaps(&self, s: SpeciesKind, x: &[f64], params: &MixtureParams) -> bool {
        let k = self.key(x);
        let d = x.len().min(3);
        let span = |i: usize| if i < d { -1..=1 } else { 0..=0 };
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    if let Some(list) = self.cells.get(&[k[0] + a, k[1] + b, k[2] + c]) {
                        for &j in list {
                            let (sj, xj) = &self.pts[j];
                            let eps = params.interaction_distance(s, *sj);
                            if crate::vecops::dist2(x, xj) < eps * eps {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }

    fn insert(&mut self, s: SpeciesKind, x: &[f64]) {
        let k = self.key(x);
        self.pts.push((s, x.to_vec()));
        self.cells.entry(k).or_default().push(self.pts.len() - 1);
    }
}

fn draw_particle(
    sampler: &dyn ParticleSampler,
    bx: Option<&SimBox>,
    rng: &mut SimRng,
    x: &mut [f64],
    v: &mut [f64],
) {
    loop {
        sampler.sample(rng, x, v);
        if bx.map_or(true, |b| b.contains(x, v)) {
            return;
        }
    }
}

/// Draws i.i.d. particles from `g₀^{⊗N_A} ⊗ h₀^{⊗N_B}` and rejects whole
/// configurations until the joint point lies in the phase space 𝒟.
///
/// Fails with `InfeasibleDensity` once `10/floor` attempts are spent without
/// an acceptance.
pub fn sample_configuration(
    samplers: [&dyn ParticleSampler; 2],
    counts: [usize; 2],
    params: &MixtureParams,
    bx: Option<&SimBox>,
    seed: u64,
    floor: f64,
) -> Result<SampledConfiguration> {
    let d = params.dim;
    let mut rng = stream(seed, 0);
    let max_attempts = (10.0 / floor).ceil() as u64;
    let cell = (0.5 * (params.diameter[0] + params.diameter[1])).max(params.max_diameter());
    let mut grid = OverlapGrid::new(cell);
    let (mut x, mut v) = (vec![0.0; d], vec![0.0; d]);
    for attempt in 1..=max_attempts {
        grid.clear();
        let mut z = Configuration::new(d);
        let mut ok = true;
        'draw: for s in SpeciesKind::ALL {
            for _ in 0..counts[s.index()] {
                draw_particle(samplers[s.index()], bx, &mut rng, &mut x, &mut v);
                if grid.overlaps(s, &x, params) {
                    ok = false;
                    break 'draw;
                }
                grid.insert(s, &x);
                z.push(s, &x, &v);
            }
        }
        if ok {
            return Ok(SampledConfiguration { config: z, attempts: attempt, acceptance_rate: 1.0 / attempt as f64 });
        }
    }
    Err(Error::InfeasibleDensity { rate: 1.0 / max_attempts as f64, floor })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub trials: u64,
    pub accepted: u64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Brute-force Monte Carlo of 𝒵_N = ∫ 𝟙_𝒟 dF^{⊗N}: each trial is an independent
/// full i.i.d. draw checked for overlaps.
pub fn estimate_partition_function(
    samplers: [&dyn ParticleSampler; 2],
    counts: [usize; 2],
    params: &MixtureParams,
    trials: u64,
    seed: u64,
) -> PartitionEstimate {
    let d = params.dim;
    let accepted: u64 = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let (mut x, mut v) = (vec![0.0; d], vec![0.0; d]);
            let mut z = Configuration::new(d);
            for s in SpeciesKind::ALL {
                for _ in 0..counts[s.index()] {
                    samplers[s.index()].sample(&mut rng, &mut x, &mut v);
                    z.push(s, &x, &v);
                }
            }
            z.in_phase_space(params, 0.0) as u64
        })
        .sum();
    let p = accepted as f64 / trials as f64;
    PartitionEstimate { trials, accepted, estimate: p, stderr: (p * (1.0 - p) / trials as f64).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathologyStats {
    pub trials: usize,
    pub pathological: usize,
    pub multiple: usize,
    pub grazing: usize,
    pub overflow: usize,
    pub rate: f64,
}

/// Fraction of sampled initial data whose forward flow hits a pathology before `horizon`.
pub fn pathology_rate(
    samplers: [&dyn ParticleSampler; 2],
    counts: [usize; 2],
    params: &MixtureParams,
    seeds: std::ops::Range<u64>,
    horizon: f64,
    opts: &FlowOptions,
) -> Result<PathologyStats> {
    let kinds: Vec<Option<PathologyKind>> = seeds
        .into_par_iter()
        .map(|seed| {
            let z = sample_configuration(samplers, counts, params, None, seed, DEFAULT_ACCEPTANCE_FLOOR)?;
            Ok(advance(&z.config, horizon, params, opts)?.pathology.map(|p| p.kind))
        })
        .collect::<Result<_>>()?;
    let mut st = PathologyStats { trials: kinds.len(), ..Default::default() };
    for k in kinds.into_iter().flatten() {
        st.pathological += 1;
        match k {
            PathologyKind::MultipleCollision => st.multiple += 1,
            PathologyKind::Grazing => st.grazing += 1,
            PathologyKind::EventOverflow => st.overflow += 1,
        }
    }
    st.rate = if st.trials > 0 { st.pathological as f64 / st.trials as f64 } else { 0.0 };
    Ok(st)
}

/// E|v − w| for v, w drawn from the velocity parts of the samplers, indexed `[α][β]`.
pub fn mean_relative_speeds(samplers: [&dyn ParticleSampler; 2], draws: usize, seed: u64) -> [[f64; 2]; 2] {
    let d = samplers[0].dim();
    let mut rng = stream(seed, 0);
    let (mut x, mut v, mut w) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = 0.0;
            for _ in 0..draws {
                samplers[a].sample(&mut rng, &mut x, &mut v);
                samplers[b].sample(&mut rng, &mut x, &mut w);
                acc += crate::vecops::dist2(&v, &w).sqrt();
            }
            out[a][b] = acc / draws as f64;
        }
    }
    out
}

/// Kinetic-theory mean free time.
///
/// `coef[α][β]` is the effective inverse mean free path prefactor, i.e.
/// n_β ε_(α,β)^{d−1} for a particle system or A_β^α ρ_β in the scaled limit;
/// the collision frequency is ν_α = Σ_β coef[α][β] |B^{d−1}| E|v_α − v_β| and
/// the result is Σ w_α / Σ w_α ν_α.
pub fn mean_free_time(coef: [[f64; 2]; 2], weights: [f64; 2], rel_speed: [[f64; 2]; 2], dim: usize) -> f64 {
    let kappa = ball_volume(dim - 1);
    let mut num = 0.0;
    let mut den = 0.0;
    for a in 0..2 {
        let nu: f64 = (0..2).map(|b| coef[a][b] * kappa * rel_speed[a][b]).sum();
        num += weights[a];
        den += weights[a] * nu;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::BoxMaxwellian;

    #[test]
    fn single_particle_never_rejected() {
        let p = MixtureParams::new(2, [1.0, 1.0], [10.0, 10.0]).unwrap();
        let g = BoxMaxwellian::new(2, 1.0, 1.0, 1.0);
        for seed in 0..20 {
            let s = sample_configuration([&g, &g], [1, 0], &p, None, seed, 1e-4).unwrap();
            assert_eq!(s.attempts, 1);
        }
    }

    #[test]
    fn tiny_diameters_accept_immediately() {
        let p = MixtureParams::new(2, [1.0, 1.0], [1e-9, 1e-9]).unwrap();
        let g = BoxMaxwellian::new(2, 1.0, 1.0, 1.0);
        let s = sample_configuration([&g, &g], [20, 20], &p, None, 3, 1e-4).unwrap();
        assert_eq!(s.acceptance_rate, 1.0);
        assert!(s.config.in_phase_space(&p, 0.0));
    }

    #[test]
    fn infeasible_density_is_reported() {
        let p = MixtureParams::new(2, [1.0, 1.0], [1.5, 1.5]).unwrap();
        let g = BoxMaxwellian::new(2, 0.5, 1.0, 1.0);
        let r = sample_configuration([&g, &g], [3, 3], &p, None, 3, 1e-2);
        assert!(matches!(r, Err(Error::InfeasibleDensity { .. })));
    }

    #[test]
    fn box_restriction() {
        let p = MixtureParams::new(2, [1.0, 1.0], [0.01, 0.01]).unwrap();
        let g = BoxMaxwellian::new(2, 2.0, 1.0, 1.0);
        let bx = SimBox::new(1.0, 0.5).unwrap();
        let s = sample_configuration([&g, &g], [10, 10], &p, Some(&bx), 4, 1e-4).unwrap();
        for (sp, i) in s.config.ids() {
            assert!(bx.contains(s.config.x(sp, i), s.config.v(sp, i)));
        }
    }

    #[test]
    fn zero_velocities_have_no_pathology() {
        let p = MixtureParams::new(2, [1.0, 1.0], [0.1, 0.1]).unwrap();
        let g = BoxMaxwellian::new(2, 1.0, 1.0, 0.0);
        let st = pathology_rate([&g, &g], [5, 5], &p, 0..10, 1.0, &FlowOptions::default()).unwrap();
        assert_eq!(st.pathological, 0);
    }

    #[test]
    fn mean_free_time_scales_inversely_with_density() {
        let rel = [[1.0; 2]; 2];
        let t1 = mean_free_time([[1.0; 2]; 2], [1.0, 1.0], rel, 2);
        let t2 = mean_free_time([[2.0; 2]; 2], [1.0, 1.0], rel, 2);
        assert!((t1 / t2 - 2.0).abs() < 1e-14);
        // d = 2: ν = Σ_β coef·2·E|u| = 4 → τ = 1/4
        assert!((t1 - 0.25).abs() < 1e-14);
    }
}
