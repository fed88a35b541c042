use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    advance, estimate_partition_function, sample_configuration, FlowOptions, PartitionEstimate, SampledConfiguration, SimBox,
    DEFAULT_ACCEPTANCE_FLOOR,
};
use crate::error::{Error, Result};
use crate::mixture::{Configuration, MixtureParams};
use crate::rng::derive_seed;
use crate::sampling::ParticleSampler;
use crate::scaling::RealizedScaling;
use crate::vecops::dist2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GoodVerdict {
    Good,
    /// Separation ≤ θ first seen at this backward time.
    Bad { time: f64 },
    /// The backward flow hit a pathology at this time before a decision.
    Indeterminate { time: f64 },
}

impl GoodVerdict {
    pub fn is_good(&self) -> bool {
        matches!(self, GoodVerdict::Good)
    }
}

fn separated(z: &Configuration, theta: f64) -> bool {
    let all: Vec<&[f64]> = z.ids().map(|(s, i)| z.x(s, i)).collect();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            if dist2(all[i], all[j]) <= theta * theta {
                return false;
            }
        }
    }
    true
}

/// Whether the backward flow of `z` stays pairwise θ-separated at every
/// sampled time in [t0, horizon]. The default sampling step is θ/(4 max speed).
pub fn good_config_check(
    z: &Configuration,
    theta: f64,
    t0: f64,
    horizon: f64,
    params: &MixtureParams,
    step: Option<f64>,
) -> Result<GoodVerdict> {
    if !(theta >= 0.0) || !(t0 >= 0.0) || !(horizon >= t0) {
        return Err(Error::InvalidInput("need θ ≥ 0 and 0 ≤ t0 ≤ horizon".into()));
    }
    let opts = FlowOptions::default();
    if !z.in_phase_space(params, opts.contact_tol) {
        return Err(Error::Domain("configuration is not in the phase space".into()));
    }
    if theta == 0.0 {
        return Ok(GoodVerdict::Good);
    }
    let speed = z.max_speed();
    let dt = match step {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(Error::InvalidInput("sampling step must be positive".into())),
        None if speed > 0.0 => theta / (4.0 * speed),
        None => f64::INFINITY,
    };
    let flow = advance(z, -t0, params, &opts)?;
    if let Some(p) = flow.pathology {
        return Ok(GoodVerdict::Indeterminate { time: -p.time });
    }
    let mut cur = flow.final_state;
    let mut t = t0;
    loop {
        if !separated(&cur, theta) {
            return Ok(GoodVerdict::Bad { time: t });
        }
        if t >= horizon {
            return Ok(GoodVerdict::Good);
        }
        let h = dt.min(horizon - t);
        let next = advance(&cur, -h, params, &opts)?;
        if let Some(p) = next.pathology {
            return Ok(GoodVerdict::Indeterminate { time: t - p.time });
        }
        cur = next.final_state;
        t += h;
    }
}

/// One draw of the conditioned data g₀^{⊗N₁} ⊗ h₀^{⊗N₂} 𝟙_𝒟 / 𝒵_N at a realized scaling.
pub fn conditioned_initial_sampler(
    samplers: [&dyn ParticleSampler; 2],
    realized: &RealizedScaling,
    mass: [f64; 2],
    bx: Option<&SimBox>,
    seed: u64,
) -> Result<SampledConfiguration> {
    let params = realized.mixture_params(mass)?;
    sample_configuration(samplers, realized.counts(), &params, bx, seed, DEFAULT_ACCEPTANCE_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedEnsemble {
    pub configs: Vec<Configuration>,
    /// Accepted draws over total attempts: an estimate of 𝒵_N.
    pub acceptance: f64,
}

/// `m` independent conditioned draws; draw `i` uses seed `derive_seed(seed, "draw-i")`.
pub fn conditioned_ensemble(
    samplers: [&dyn ParticleSampler; 2],
    realized: &RealizedScaling,
    mass: [f64; 2],
    bx: Option<&SimBox>,
    m: usize,
    seed: u64,
) -> Result<ConditionedEnsemble> {
    let draws: Vec<SampledConfiguration> = (0..m)
        .into_par_iter()
        .map(|i| conditioned_initial_sampler(samplers, realized, mass, bx, derive_seed(seed, &format!("draw-{i}"))))
        .collect::<Result<_>>()?;
    let attempts: u64 = draws.iter().map(|d| d.attempts).sum();
    Ok(ConditionedEnsemble { acceptance: m as f64 / attempts.max(1) as f64, configs: draws.into_iter().map(|d| d.config).collect() })
}

/// Brute-force 𝒵_N at a realized scaling. Trials share their draws across
/// calls with the same seed, so estimates at different ε are coupled.
pub fn partition_at(
    samplers: [&dyn ParticleSampler; 2],
    realized: &RealizedScaling,
    mass: [f64; 2],
    trials: u64,
    seed: u64,
) -> Result<PartitionEstimate> {
    let params = realized.mixture_params(mass)?;
    Ok(estimate_partition_function(samplers, realized.counts(), &params, trials, seed))
}
