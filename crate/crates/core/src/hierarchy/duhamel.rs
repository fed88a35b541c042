use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::history::{sample_time_simplex_with, AdjunctionRecord};
use super::pseudo::{adjoin, segment_overlaps, AdjunctionRule, Flavor};
use crate::collision::PhaseFunction;
use crate::error::{Error, Result};
use crate::mixture::{Configuration, SpeciesKind};
use crate::registry::{Named, Registry};
use crate::rng::{stream, SimRng};
use crate::sampling::{uniform_in_ball, uniform_on_sphere};
use crate::vecops::norm2;

/// Default bound on the expansion order and on each s component.
pub const DEFAULT_N_MAX: usize = 8;

fn gamma_half_plus_one(d: usize) -> f64 {
    // Γ(d/2 + 1)
    if d % 2 == 0 {
        (1..=d / 2).map(|i| i as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut a = 0.5;
        while a < d as f64 / 2.0 + 0.5 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

/// |B_r| in R^d.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_plus_one(d) * r.powi(d as i32)
}

/// |S^{d−1}|.
pub fn sphere_area(d: usize) -> f64 {
    d as f64 * ball_volume(d, 1.0)
}

/// P(|Z| ≤ r) for a standard normal vector in R^d.
pub fn chi_cdf(d: usize, r: f64) -> f64 {
    let a = d as f64 / 2.0;
    let x = 0.5 * r * r;
    if x > 700.0 {
        return 1.0;
    }
    let mut term = x.powf(a) * (-x).exp() / gamma_half_plus_one(d);
    let mut sum = term;
    let mut n = 1.0;
    while term > 1e-17 * sum {
        term *= x / (a + n);
        sum += term;
        n += 1.0;
    }
    sum.min(1.0)
}

/// A proposal law for velocities in B_R, returning the density of each draw.
pub trait VelocityProposal: Named + Send + Sync {
    fn sample(&self, rng: &mut SimRng, radius: f64, out: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBall;

impl Named for UniformBall {
    fn name(&self) -> &str {
        "uniform-ball"
    }
}

impl VelocityProposal for UniformBall {
    fn sample(&self, rng: &mut SimRng, radius: f64, out: &mut [f64]) -> f64 {
        uniform_in_ball(rng, radius, out);
        1.0 / ball_volume(out.len(), radius)
    }
}

/// Centered Gaussian with deviation `sigma`, conditioned on B_R.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedGaussian {
    pub sigma: f64,
}

impl Named for TruncatedGaussian {
    fn name(&self) -> &str {
        "gaussian"
    }
}

impl VelocityProposal for TruncatedGaussian {
    fn sample(&self, rng: &mut SimRng, radius: f64, out: &mut [f64]) -> f64 {
        let d = out.len();
        loop {
            for c in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *c = self.sigma * z;
            }
            if norm2(out) <= radius * radius {
                break;
            }
        }
        let s2 = self.sigma * self.sigma;
        let dens = (-0.5 * norm2(out) / s2).exp() / (2.0 * std::f64::consts::PI * s2).powf(d as f64 / 2.0);
        dens / chi_cdf(d, radius / self.sigma)
    }
}

pub fn proposal_registry(sigma: f64) -> Registry<dyn VelocityProposal> {
    let mut r: Registry<dyn VelocityProposal> = Registry::new();
    r.register(Box::new(UniformBall));
    r.register(Box::new(TruncatedGaussian { sigma }));
    r
}

/// Tensorized marginals Π g(x_i, v_i) Π h(x_j, v_j) of a pair of one-particle densities.
#[derive(Clone)]
pub struct TensorMarginals {
    pub g: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    pub h: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl PhaseFunction for TensorMarginals {
    fn eval(&self, z: &Configuration) -> f64 {
        let mut p = 1.0;
        for i in 0..z.count(SpeciesKind::A) {
            p *= (self.g)(z.x(SpeciesKind::A, i), z.v(SpeciesKind::A, i));
        }
        for i in 0..z.count(SpeciesKind::B) {
            p *= (self.h)(z.x(SpeciesKind::B, i), z.v(SpeciesKind::B, i));
        }
        p
    }
}

/// Which histories of order `k` enter the estimate. `None` components are
/// summed over (species and targets by uniform sampling, signs exactly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryClass {
    pub k: usize,
    pub alpha: Option<Vec<SpeciesKind>>,
    pub beta: Option<Vec<SpeciesKind>>,
    pub j: Option<Vec<i8>>,
    pub m: Option<Vec<usize>>,
}

impl HistoryClass {
    /// Every history of order `k`.
    pub fn all(k: usize) -> Self {
        HistoryClass { k, alpha: None, beta: None, j: None, m: None }
    }

    pub fn typed(alpha: Vec<SpeciesKind>, beta: Vec<SpeciesKind>) -> Self {
        HistoryClass { k: alpha.len(), alpha: Some(alpha), beta: Some(beta), j: None, m: None }
    }

    fn validate(&self) -> Result<()> {
        let bad = |v: Option<usize>| v.is_some_and(|n| n != self.k);
        if bad(self.alpha.as_ref().map(Vec::len))
            || bad(self.beta.as_ref().map(Vec::len))
            || bad(self.j.as_ref().map(Vec::len))
            || bad(self.m.as_ref().map(Vec::len))
        {
            return Err(Error::Validation(format!("history class lists must have length k = {}", self.k)));
        }
        if self.j.as_ref().is_some_and(|j| j.iter().any(|&x| x != 1 && x != -1)) {
            return Err(Error::Validation("signs must be ±1".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct DuhamelConfig {
    /// Positions X_s; velocities are integrated over.
    pub x_s: Configuration,
    pub class: HistoryClass,
    pub radius: f64,
    pub delta: f64,
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub masses: [f64; 2],
    pub proposals: [Arc<dyn VelocityProposal>; 2],
    pub n_max: usize,
}

impl DuhamelConfig {
    pub fn new(x_s: Configuration, class: HistoryClass, radius: f64, t: f64, samples: usize, seed: u64, masses: [f64; 2]) -> Self {
        DuhamelConfig {
            x_s,
            class,
            radius,
            delta: 0.0,
            t,
            samples,
            seed,
            masses,
            proposals: [Arc::new(UniformBall), Arc::new(UniformBall)],
            n_max: DEFAULT_N_MAX,
        }
    }

    fn validate(&self) -> Result<()> {
        self.class.validate()?;
        let s = self.x_s.counts();
        if self.class.k > self.n_max || s[0] >= self.n_max || s[1] >= self.n_max {
            return Err(Error::Validation(format!("k = {} and s = {:?} must stay below n_max = {}", self.class.k, s, self.n_max)));
        }
        if self.x_s.dim() > 8 || self.x_s.dim() < 2 {
            return Err(Error::InvalidInput("dimension must be in 2..=8".into()));
        }
        if !(self.radius > 0.0) || !(self.t >= 0.0) || !(self.delta >= 0.0) || self.samples == 0 {
            return Err(Error::InvalidInput("need R > 0, t ≥ 0, δ ≥ 0 and at least one sample".into()));
        }
        if self.masses.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidInput("masses must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuhamelEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Sign branches evaluated, and those discarded for recollisions.
    pub leaves: u64,
    pub rejected: u64,
}

impl DuhamelEstimate {
    pub fn rejection_fraction(&self) -> f64 {
        if self.leaves == 0 {
            0.0
        } else {
            self.rejected as f64 / self.leaves as f64
        }
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        x.iter().sum()
    } else {
        let (a, b) = x.split_at(x.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

struct Draw {
    alpha: SpeciesKind,
    beta: SpeciesKind,
    m: usize,
    omega: Vec<f64>,
    v_new: Vec<f64>,
    j: Option<i8>,
}

struct Walk<'a> {
    f0: &'a dyn PhaseFunction,
    rule: &'a dyn AdjunctionRule,
    flavor: Flavor,
    s: [usize; 2],
    masses: [f64; 2],
    r2: f64,
    times: Vec<f64>,
    draws: Vec<Draw>,
}

fn within(z: &Configuration, r2: f64) -> bool {
    SpeciesKind::ALL.iter().all(|&sp| z.velocities(sp).chunks(z.dim()).all(|v| norm2(v) <= r2))
}

impl Walk<'_> {
    fn leaves_below(&self, l: usize) -> u64 {
        self.draws[l..].iter().map(|d| if d.j.is_some() { 1 } else { 2 }).product()
    }

    /// Contribution of the subtree rooted at Z(t_{l+1}^+), with counters
    /// (leaves, rejected).
    fn descend(&self, l: usize, z: &Configuration, added: [usize; 2]) -> Result<(f64, u64, u64)> {
        if l == self.draws.len() {
            return Ok((self.f0.eval(z), 1, 0));
        }
        let dr = &self.draws[l];
        let vt = z.v(dr.alpha, dr.m - 1);
        let un: f64 = dr.omega.iter().zip(dr.v_new.iter().zip(vt)).map(|(o, (a, b))| o * (a - b)).sum();
        // ω and −ω cover the sphere twice; use the one on the post-collisional half.
        let omega: Vec<f64> = if un < 0.0 { dr.omega.iter().map(|c| -c).collect() } else { dr.omega.clone() };
        let un = un.abs();
        let pref = self.rule.prefactor(self.s, added, dr.alpha, dr.beta)?;
        let mut next_added = added;
        next_added[dr.beta.index()] += 1;
        let dur = self.times[l + 1] - self.times[l + 2];
        let per_branch = self.leaves_below(l + 1);
        let (mut acc, mut leaves, mut rejected) = (0.0, 0u64, 0u64);
        let signs: &[i8] = match dr.j {
            Some(1) => &[1],
            Some(_) => &[-1],
            None => &[-1, 1],
        };
        for &j in signs {
            let rec = AdjunctionRecord {
                alpha: dr.alpha,
                beta: dr.beta,
                m: dr.m,
                j,
                omega: Vec::new(),
                v_new: dr.v_new.clone(),
                t: self.times[l + 1],
            };
            let mut zm = adjoin(z, &rec, &omega, self.masses, self.flavor.offset(dr.alpha, dr.beta));
            if !within(&zm, self.r2) {
                leaves += per_branch;
                continue;
            }
            if let Flavor::Bbgky { diameters } = self.flavor {
                if segment_overlaps(&zm, dur, diameters) {
                    leaves += per_branch;
                    rejected += per_branch;
                    continue;
                }
            }
            zm.free_flight(-dur);
            let (val, lv, rj) = self.descend(l + 1, &zm, next_added)?;
            acc += j as f64 * un * pref * val;
            leaves += lv;
            rejected += rj;
        }
        Ok((acc, leaves, rejected))
    }
}

/// Monte Carlo estimate of the truncated Duhamel iterate
/// ∫_{B_R^{|s|}} φ(V_s) ∫_{𝒯_{k,δ}(t)} Σ_{α,β,J,M} Π_i j_i A_i ∫ Π ⟨ω_i, v_i − v_{m_i}⟩_+ f0(Z(0^+))
/// at the fixed positions `cfg.x_s`, using the pseudo-trajectories of `rule`.
///
/// Weight bookkeeping per sample: 1/p for every velocity draw, the simplex
/// volume, 2 for each sampled adjoined species, the number of candidate
/// targets for each sampled target and |S^{d−1}|/2 for each normal (a uniform ω is folded onto the
/// half-sphere where the kernel is positive). Signs are summed exactly over
/// a shared draw, so gain and loss branches use the same (ω, v). In the
/// BBGKY flavor, branches whose free flight overlaps are dropped and counted.
pub fn duhamel_iterate(
    f0: &dyn PhaseFunction,
    phi: &dyn PhaseFunction,
    cfg: &DuhamelConfig,
    rule: &dyn AdjunctionRule,
) -> Result<DuhamelEstimate> {
    cfg.validate()?;
    let k = cfg.class.k;
    let s = cfg.x_s.counts();
    if let Some(ms) = &cfg.class.m {
        // targets must be live under the fixed or worst-case species choices
        let (Some(al), Some(be)) = (&cfg.class.alpha, &cfg.class.beta) else {
            return Err(Error::Validation("fixed targets need fixed species".into()));
        };
        let mut pop = s;
        for i in 0..k {
            if ms[i] == 0 || ms[i] > pop[al[i].index()] {
                return Err(Error::Validation(format!("target {} of record {} is not live", ms[i], i + 1)));
            }
            pop[be[i].index()] += 1;
        }
    }
    let d = cfg.x_s.dim();
    let flavor = rule.flavor();
    let half_sphere = 0.5 * sphere_area(d);
    let one = |idx: usize| -> Result<(f64, u64, u64)> {
        let mut rng = stream(cfg.seed, idx as u64);
        let mut z = cfg.x_s.clone();
        let mut w = 1.0;
        let mut v = vec![0.0; d];
        for sp in SpeciesKind::ALL {
            for i in 0..s[sp.index()] {
                w /= cfg.proposals[sp.index()].sample(&mut rng, cfg.radius, &mut v);
                z.v_mut(sp, i).copy_from_slice(&v);
            }
        }
        let (ts, vol) = sample_time_simplex_with(&mut rng, k, cfg.t, cfg.delta)?;
        w *= vol;
        let mut draws = Vec::with_capacity(k);
        let mut pop = s;
        for i in 0..k {
            // the target is drawn among all live particles unless its species is fixed
            let (alpha, m) = match (&cfg.class.alpha, &cfg.class.m) {
                (Some(a), Some(ms)) => (a[i], ms[i]),
                (Some(a), None) => {
                    let live = pop[a[i].index()];
                    if live == 0 {
                        (a[i], 0)
                    } else {
                        w *= live as f64;
                        (a[i], rng.gen_range(1..=live))
                    }
                }
                _ if pop[0] + pop[1] == 0 => (SpeciesKind::A, 0),
                _ => {
                    let total = pop[0] + pop[1];
                    w *= total as f64;
                    let pick = rng.gen_range(0..total);
                    if pick < pop[0] {
                        (SpeciesKind::A, pick + 1)
                    } else {
                        (SpeciesKind::B, pick - pop[0] + 1)
                    }
                }
            };
            let beta = match &cfg.class.beta {
                Some(b) => b[i],
                None => {
                    w *= 2.0;
                    SpeciesKind::from_index(rng.gen_range(0..2))
                }
            };
            let mut omega = vec![0.0; d];
            uniform_on_sphere(&mut rng, &mut omega);
            let mut v_new = vec![0.0; d];
            w /= cfg.proposals[beta.index()].sample(&mut rng, cfg.radius, &mut v_new);
            w *= half_sphere;
            let j = cfg.class.j.as_ref().map(|j| j[i]);
            pop[beta.index()] += 1;
            draws.push(Draw { alpha, beta, m, omega, v_new, j });
        }
        let mut times = vec![cfg.t];
        times.extend(ts);
        times.push(0.0);
        let walk = Walk { f0, rule, flavor: flavor.clone(), s, masses: cfg.masses, r2: cfg.radius * cfg.radius, times, draws };
        let all = walk.leaves_below(0);
        // no live target of the chosen species: the history does not exist
        if walk.draws.iter().any(|dr| dr.m == 0) {
            return Ok((0.0, all, 0));
        }
        let pv = phi.eval(&z);
        if pv == 0.0 {
            return Ok((0.0, all, 0));
        }
        let dur0 = walk.times[0] - walk.times[1];
        if let Flavor::Bbgky { diameters } = flavor {
            if segment_overlaps(&z, dur0, diameters) {
                return Ok((0.0, all, all));
            }
        }
        z.free_flight(-dur0);
        let (val, leaves, rejected) = walk.descend(0, &z, [0, 0])?;
        Ok((w * pv * val, leaves, rejected))
    };
    let out: Vec<(f64, u64, u64)> = (0..cfg.samples).into_par_iter().map(one).collect::<Result<_>>()?;
    let values: Vec<f64> = out.iter().map(|o| o.0).collect();
    let (estimate, stderr) = mean_stderr(&values);
    Ok(DuhamelEstimate {
        estimate,
        stderr,
        samples: cfg.samples,
        leaves: out.iter().map(|o| o.1).sum(),
        rejected: out.iter().map(|o| o.2).sum(),
    })
}

/// Estimates I_{s,k} summed over all histories, for k = 0..=n, each with an
/// independent seed.
pub fn series_terms(
    f0: &dyn PhaseFunction,
    phi: &dyn PhaseFunction,
    base: &DuhamelConfig,
    rule: &dyn AdjunctionRule,
    n: usize,
) -> Result<Vec<DuhamelEstimate>> {
    (0..=n)
        .map(|k| {
            let mut cfg = base.clone();
            cfg.class = HistoryClass::all(k);
            cfg.seed = crate::rng::derive_seed(base.seed, &format!("order-{k}"));
            duhamel_iterate(f0, phi, &cfg, rule)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::pseudo::BoltzmannRule;

    fn x_one() -> Configuration {
        let mut z = Configuration::new(2);
        z.push(SpeciesKind::A, &[0.1, -0.3], &[0.0, 0.0]);
        z
    }

    fn rule() -> BoltzmannRule {
        BoltzmannRule { constants: [[1.0, 0.5], [0.7, 1.2]] }
    }

    fn maxwell(x: &[f64], v: &[f64]) -> f64 {
        (-0.5 * norm2(v) - 0.25 * norm2(x)).exp() / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn ball_and_sphere_measures() {
        assert!((ball_volume(2, 2.0) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((ball_volume(3, 1.0) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((chi_cdf(2, 1.3) - (1.0 - (-0.845f64).exp())).abs() < 1e-14);
        // d = 3: erf(r/√2) − √(2/π) r e^{−r²/2} at r = 1 is 0.198748...
        assert!((chi_cdf(3, 1.0) - 0.198_748_043_098_799).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let f0 = |_: &Configuration| 0.0;
        let phi = |_: &Configuration| 1.0;
        let cfg = DuhamelConfig::new(x_one(), HistoryClass::all(2), 3.0, 0.5, 200, 1, [1.0, 2.0]);
        let e = duhamel_iterate(&f0, &phi, &cfg, &rule()).unwrap();
        assert_eq!((e.estimate, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn k0_matches_quadrature() {
        // ∫_{B_R} φ(v) f0(x − t v, v) dv by a polar rule
        let (t, r) = (0.7, 3.0);
        let x = [0.1, -0.3];
        let phi_v = |v: &[f64]| 1.0 + v[0] * v[0];
        let f0 = TensorMarginals { g: Arc::new(maxwell), h: Arc::new(maxwell) };
        let phi = move |z: &Configuration| phi_v(z.v(SpeciesKind::A, 0));
        let cfg = DuhamelConfig::new(x_one(), HistoryClass::all(0), r, t, 40_000, 3, [1.0, 2.0]);
        let e = duhamel_iterate(&f0, &phi, &cfg, &rule()).unwrap();
        let (nr, na) = (400, 256);
        let mut q = 0.0;
        for i in 0..nr {
            let rr = (i as f64 + 0.5) * r / nr as f64;
            for a in 0..na {
                let th = (a as f64 + 0.5) * 2.0 * std::f64::consts::PI / na as f64;
                let v = [rr * th.cos(), rr * th.sin()];
                let xs = [x[0] - t * v[0], x[1] - t * v[1]];
                q += phi_v(&v) * maxwell(&xs, &v) * rr;
            }
        }
        q *= (r / nr as f64) * (2.0 * std::f64::consts::PI / na as f64);
        assert!((e.estimate - q).abs() < 3.0 * e.stderr + 1e-6, "{} ± {} vs {q}", e.estimate, e.stderr);
    }

    #[test]
    fn linear_in_initial_data() {
        let a = TensorMarginals { g: Arc::new(maxwell), h: Arc::new(maxwell) };
        let b = |z: &Configuration| (-norm2(z.v(SpeciesKind::A, 0))).exp() * 0.3;
        let sum = |z: &Configuration| 2.0 * a.eval(z) - 3.0 * b(z);
        let phi = |z: &Configuration| 1.0 + z.v(SpeciesKind::A, 0)[1];
        let cfg = DuhamelConfig::new(x_one(), HistoryClass::all(2), 3.0, 0.4, 500, 11, [1.0, 2.0]);
        let ea = duhamel_iterate(&a, &phi, &cfg, &rule()).unwrap().estimate;
        let eb = duhamel_iterate(&b, &phi, &cfg, &rule()).unwrap().estimate;
        let es = duhamel_iterate(&sum, &phi, &cfg, &rule()).unwrap().estimate;
        assert!((es - (2.0 * ea - 3.0 * eb)).abs() <= 1e-12 * (1.0 + es.abs()));
    }

    #[test]
    fn fixed_class_validation() {
        let f0 = |_: &Configuration| 1.0;
        let mut class = HistoryClass::typed(vec![SpeciesKind::B], vec![SpeciesKind::A]);
        class.m = Some(vec![1]);
        let cfg = DuhamelConfig::new(x_one(), class, 3.0, 0.4, 10, 1, [1.0, 1.0]);
        assert!(duhamel_iterate(&f0, &f0, &cfg, &rule()).is_err());
        let cfg = DuhamelConfig::new(x_one(), HistoryClass { k: 2, alpha: Some(vec![SpeciesKind::A]), beta: None, j: None, m: None }, 3.0, 0.4, 10, 1, [1.0, 1.0]);
        assert!(duhamel_iterate(&f0, &f0, &cfg, &rule()).is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let f0 = TensorMarginals { g: Arc::new(maxwell), h: Arc::new(maxwell) };
        let phi = |_: &Configuration| 1.0;
        let cfg = DuhamelConfig::new(x_one(), HistoryClass::all(2), 3.0, 0.4, 300, 5, [1.0, 2.0]);
        let a = duhamel_iterate(&f0, &phi, &cfg, &rule()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| duhamel_iterate(&f0, &phi, &cfg, &rule()).unwrap());
        assert_eq!(a, b);
    }
}
