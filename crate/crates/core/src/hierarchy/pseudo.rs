use serde::{Deserialize, Serialize};

use super::history::{AdjunctionRecord, CollisionHistory};
use crate::error::{Error, Result};
use crate::mixture::{collide_in_place, Configuration, SpeciesKind};
use crate::registry::{Named, Registry};
use crate::scaling::{GradScaling, RealizedScaling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Flavor {
    Boltzmann,
    Bbgky { diameters: [f64; 2] },
}

impl Flavor {
    pub fn offset(&self, alpha: SpeciesKind, beta: SpeciesKind) -> f64 {
        match self {
            Flavor::Boltzmann => 0.0,
            Flavor::Bbgky { diameters } => 0.5 * (diameters[alpha.index()] + diameters[beta.index()]),
        }
    }

    pub fn max_eps(&self) -> f64 {
        match self {
            Flavor::Boltzmann => 0.0,
            Flavor::Bbgky { diameters } => diameters[0].max(diameters[1]),
        }
    }
}

/// How a hierarchy adjoins particles: the position offset along ω and the
/// collision-operator prefactor at a given population.
pub trait AdjunctionRule: Named + Send + Sync {
    fn flavor(&self) -> Flavor;

    /// Prefactor of the operator acting on population `s + added` that
    /// adjoins a `beta` particle to an `alpha` particle.
    fn prefactor(&self, s: [usize; 2], added: [usize; 2], alpha: SpeciesKind, beta: SpeciesKind) -> Result<f64>;
}

/// Zero offset, limiting constants A_β^α.
#[derive(Debug, Clone)]
pub struct BoltzmannRule {
    pub constants: [[f64; 2]; 2],
}

impl BoltzmannRule {
    pub fn new(scaling: &GradScaling) -> Self {
        BoltzmannRule { constants: scaling.kernel_table() }
    }
}

impl Named for BoltzmannRule {
    fn name(&self) -> &str {
        "boltzmann"
    }
}

impl AdjunctionRule for BoltzmannRule {
    fn flavor(&self) -> Flavor {
        Flavor::Boltzmann
    }

    fn prefactor(&self, _s: [usize; 2], _added: [usize; 2], alpha: SpeciesKind, beta: SpeciesKind) -> Result<f64> {
        Ok(self.constants[alpha.index()][beta.index()])
    }
}

/// Offset ε_(α,β), finite-N prefactors (N_β − s_β − β̃^β) ε_(α,β)^{d−1}.
#[derive(Debug, Clone)]
pub struct BbgkyRule {
    pub realized: RealizedScaling,
}

impl Named for BbgkyRule {
    fn name(&self) -> &str {
        "bbgky"
    }
}

impl AdjunctionRule for BbgkyRule {
    fn flavor(&self) -> Flavor {
        Flavor::Bbgky { diameters: self.realized.diameters() }
    }

    fn prefactor(&self, s: [usize; 2], added: [usize; 2], alpha: SpeciesKind, beta: SpeciesKind) -> Result<f64> {
        self.realized.bbgky_prefactor(s, added, alpha, beta)
    }
}

/// Both hierarchies at one realized scaling point, keyed by name.
pub fn adjunction_rules(realized: &RealizedScaling) -> Registry<dyn AdjunctionRule> {
    let mut r: Registry<dyn AdjunctionRule> = Registry::new();
    r.register(Box::new(BoltzmannRule::new(&realized.scaling)));
    r.register(Box::new(BbgkyRule { realized: realized.clone() }));
    r
}

/// Backward pseudo-trajectory. `stages[0]` is Z_s at time t; `stages[i]` is
/// Z(t_i^+) for i = 1..=k+1 with t_{k+1} = 0. `adjoined[i-1]` is Z(t_i^-).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTrajectory {
    pub flavor: Flavor,
    pub times: Vec<f64>,
    pub stages: Vec<Configuration>,
    pub adjoined: Vec<Configuration>,
}

impl PseudoTrajectory {
    pub fn k(&self) -> usize {
        self.adjoined.len()
    }

    pub fn final_stage(&self) -> &Configuration {
        self.stages.last().expect("at least two stages")
    }
}

/// Adjoins the particle of `rec` to `z` (at t_i^+) using normal `omega`;
/// returns Z(t_i^-).
pub(crate) fn adjoin(z: &Configuration, rec: &AdjunctionRecord, omega: &[f64], masses: [f64; 2], offset: f64) -> Configuration {
    let d = z.dim();
    let target = rec.m - 1;
    let mut x = [0.0; 8];
    let shift = rec.j as f64 * offset;
    for (c, xc) in x[..d].iter_mut().enumerate() {
        *xc = z.x(rec.alpha, target)[c] + shift * omega[c];
    }
    let mut out = z.clone();
    out.push(rec.beta, &x[..d], &rec.v_new);
    if rec.j > 0 {
        let slot = out.count(rec.beta) - 1;
        let mut va = [0.0; 8];
        let mut vb = [0.0; 8];
        va[..d].copy_from_slice(out.v(rec.alpha, target));
        vb[..d].copy_from_slice(&rec.v_new);
        collide_in_place(&mut va[..d], &mut vb[..d], omega, masses[rec.alpha.index()], masses[rec.beta.index()]);
        out.v_mut(rec.alpha, target).copy_from_slice(&va[..d]);
        out.v_mut(rec.beta, slot).copy_from_slice(&vb[..d]);
    }
    out
}

/// Builds the pseudo-trajectory of `history` from `z_s` under `flavor`.
pub fn build_pseudo(z_s: &Configuration, history: &CollisionHistory, masses: [f64; 2], flavor: Flavor) -> Result<PseudoTrajectory> {
    let d = z_s.dim();
    if d > 8 {
        return Err(Error::InvalidInput("pseudo-trajectories support d <= 8".into()));
    }
    if z_s.counts() != history.s {
        return Err(Error::Validation(format!("history is for s = {:?}, configuration has {:?}", history.s, z_s.counts())));
    }
    history.validate(d, 0.0)?;
    let k = history.k();
    let mut times = vec![history.t];
    times.extend(history.records.iter().map(|r| r.t));
    times.push(0.0);
    let mut stages = Vec::with_capacity(k + 2);
    let mut adjoined = Vec::with_capacity(k);
    stages.push(z_s.clone());
    let mut z = z_s.clone();
    z.free_flight(-(times[0] - times[1]));
    for (i, rec) in history.records.iter().enumerate() {
        stages.push(z.clone());
        let next = adjoin(&z, rec, &rec.omega, masses, flavor.offset(rec.alpha, rec.beta));
        adjoined.push(next.clone());
        z = next;
        z.free_flight(-(times[i + 1] - times[i + 2]));
    }
    stages.push(z);
    Ok(PseudoTrajectory { flavor, times, stages, adjoined })
}

/// The Boltzmann-hierarchy pseudo-trajectory: adjoined particles sit on their targets.
pub fn build_boltzmann_pseudo(z_s: &Configuration, history: &CollisionHistory, masses: [f64; 2]) -> Result<PseudoTrajectory> {
    build_pseudo(z_s, history, masses, Flavor::Boltzmann)
}

/// The BBGKY pseudo-trajectory: adjoined particles sit at x_target ∓ ε_(α,β) ω.
pub fn build_bbgky_pseudo(
    z_s: &Configuration,
    history: &CollisionHistory,
    masses: [f64; 2],
    diameters: [f64; 2],
) -> Result<PseudoTrajectory> {
    build_pseudo(z_s, history, masses, Flavor::Bbgky { diameters })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageDeviation {
    pub stage: usize,
    pub particles: usize,
    pub max_position: f64,
    pub total_position: f64,
    pub max_velocity: f64,
    pub particle_bound: f64,
    pub total_bound: f64,
}

impl StageDeviation {
    pub fn within_bounds(&self) -> bool {
        self.max_velocity <= 1e-12 && self.max_position <= self.particle_bound + 1e-10 && self.total_position <= self.total_bound
    }
}

/// Per-stage deviation between the two flavors of one history, with the
/// bounds √2 (i−1) max ε per particle and √8 n² max ε in total, where n
/// exceeds every s component and is at least k.
pub fn compare_pseudo(boltz: &PseudoTrajectory, bbgky: &PseudoTrajectory) -> Result<Vec<StageDeviation>> {
    if boltz.flavor != Flavor::Boltzmann || !matches!(bbgky.flavor, Flavor::Bbgky { .. }) {
        return Err(Error::Validation("compare_pseudo expects a Boltzmann and a BBGKY trajectory".into()));
    }
    if boltz.times != bbgky.times || boltz.stages.len() != bbgky.stages.len() {
        return Err(Error::Validation("trajectories come from different histories".into()));
    }
    let k = boltz.k();
    let s = boltz.stages[0].counts();
    let n = k.max(s[0] + 1).max(s[1] + 1) as f64;
    let eps = bbgky.flavor.max_eps();
    let mut out = Vec::with_capacity(boltz.stages.len());
    for (i, (a, b)) in boltz.stages.iter().zip(&bbgky.stages).enumerate() {
        if a.counts() != b.counts() {
            return Err(Error::Validation(format!("stage {i} populations differ")));
        }
        let (mut mp, mut tp, mut mv) = (0.0f64, 0.0, 0.0f64);
        for sp in SpeciesKind::ALL {
            for idx in 0..a.count(sp) {
                let dx2: f64 = a.x(sp, idx).iter().zip(b.x(sp, idx)).map(|(p, q)| (p - q) * (p - q)).sum();
                mp = mp.max(dx2.sqrt());
                tp += dx2;
                for (p, q) in a.v(sp, idx).iter().zip(b.v(sp, idx)) {
                    mv = mv.max((p - q).abs());
                }
            }
        }
        out.push(StageDeviation {
            stage: i,
            particles: a.total(),
            max_position: mp,
            total_position: tp.sqrt(),
            max_velocity: mv,
            particle_bound: 2f64.sqrt() * i.saturating_sub(1) as f64 * eps,
            total_bound: 8f64.sqrt() * n * n * eps,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecollisionStatus {
    Clean,
    /// Overlap during the free flight that follows adjunction `stage`
    /// (0 for the initial segment).
    Recollided { stage: usize },
}

/// Whether any pair comes closer than its interaction distance while the
/// configuration `z` flows backward for `duration`.
pub fn segment_overlaps(z: &Configuration, duration: f64, diameters: [f64; 2]) -> bool {
    let d = z.dim();
    let ids: Vec<(SpeciesKind, usize)> = z.ids().collect();
    for (n, &(sa, ia)) in ids.iter().enumerate() {
        for &(sb, ib) in &ids[n + 1..] {
            let eps = 0.5 * (diameters[sa.index()] + diameters[sb.index()]);
            let thr = eps * (1.0 - 1e-9);
            let (xa, xb, va, vb) = (z.x(sa, ia), z.x(sb, ib), z.v(sa, ia), z.v(sb, ib));
            // |dx − τ dv|² on τ ∈ [0, duration]
            let (mut xx, mut xv, mut vv) = (0.0, 0.0, 0.0);
            for c in 0..d {
                let dx = xa[c] - xb[c];
                let dv = va[c] - vb[c];
                xx += dx * dx;
                xv += dx * dv;
                vv += dv * dv;
            }
            let tau = if vv > 0.0 { (xv / vv).clamp(0.0, duration) } else { 0.0 };
            let dist2 = xx - 2.0 * tau * xv + tau * tau * vv;
            if dist2 < thr * thr {
                return true;
            }
        }
    }
    false
}

/// Replays every free-flight segment of a BBGKY pseudo-trajectory under
/// the ε exclusion.
pub fn recollision_filter(traj: &PseudoTrajectory, diameters: [f64; 2]) -> RecollisionStatus {
    if segment_overlaps(&traj.stages[0], traj.times[0] - traj.times[1], diameters) {
        return RecollisionStatus::Recollided { stage: 0 };
    }
    for (i, z) in traj.adjoined.iter().enumerate() {
        if segment_overlaps(z, traj.times[i + 1] - traj.times[i + 2], diameters) {
            return RecollisionStatus::Recollided { stage: i + 1 };
        }
    }
    RecollisionStatus::Clean
}
