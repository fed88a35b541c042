use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::SpeciesKind;
use crate::rng::{stream, SimRng};
use crate::sampling::{uniform_in_ball, uniform_on_sphere};
use crate::vecops::norm;

/// One adjunction: at time `t` a `beta` particle with velocity `v_new` is
/// attached to the `m`-th (1-based) live `alpha` particle along `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjunctionRecord {
    pub alpha: SpeciesKind,
    pub beta: SpeciesKind,
    pub m: usize,
    pub j: i8,
    pub omega: Vec<f64>,
    pub v_new: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionHistory {
    pub s: [usize; 2],
    pub t: f64,
    pub records: Vec<AdjunctionRecord>,
}

impl CollisionHistory {
    pub fn new(s: [usize; 2], t: f64) -> Self {
        CollisionHistory { s, t, records: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.records.len()
    }

    /// β̃_l: particles of each species adjoined by the first `l` records.
    pub fn added(&self, l: usize) -> [usize; 2] {
        let mut a = [0, 0];
        for r in &self.records[..l] {
            a[r.beta.index()] += 1;
        }
        a
    }

    /// Population s + β̃_l.
    pub fn population(&self, l: usize) -> [usize; 2] {
        let a = self.added(l);
        [self.s[0] + a[0], self.s[1] + a[1]]
    }

    pub fn sign(&self) -> f64 {
        self.records.iter().map(|r| r.j as f64).product()
    }

    /// Checks times (with gaps ≥ `delta`), targets, signs and unit normals.
    pub fn validate(&self, dim: usize, delta: f64) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::Validation(format!("history time {} is not a nonnegative number", self.t)));
        }
        let mut prev = self.t;
        for (i, r) in self.records.iter().enumerate() {
            let ordered = prev - r.t >= delta && (i == 0 || r.t < prev);
            if !(r.t >= 0.0) || !ordered {
                return Err(Error::Validation(format!("record {}: time {} breaks the ordering", i + 1, r.t)));
            }
            prev = r.t;
            if r.j != 1 && r.j != -1 {
                return Err(Error::Validation(format!("record {}: j = {} is not ±1", i + 1, r.j)));
            }
            let live = self.population(i)[r.alpha.index()];
            if r.m == 0 || r.m > live {
                return Err(Error::Validation(format!(
                    "record {}: target {} outside the {} live {} particles",
                    i + 1,
                    r.m,
                    live,
                    r.alpha.tag()
                )));
            }
            if r.omega.len() != dim || r.v_new.len() != dim {
                return Err(Error::Validation(format!("record {}: vectors are not {dim}-dimensional", i + 1)));
            }
            if (norm(&r.omega) - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("record {}: omega is not a unit vector", i + 1)));
            }
        }
        if !self.records.is_empty() && prev < delta {
            return Err(Error::Validation(format!("last time {prev} is below the separation {delta}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Volume of the separated simplex t > t_1 > … > t_k > 0 with all gaps
/// (including t − t_1 and t_k − 0) at least δ.
pub fn simplex_volume(k: usize, t: f64, delta: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let l = t - (k + 1) as f64 * delta;
    if l <= 0.0 {
        return 0.0;
    }
    let mut v = 1.0;
    for i in 1..=k {
        v *= l / i as f64;
    }
    v
}

/// Uniform draw from the separated simplex; returns the times (decreasing)
/// and the simplex volume.
pub fn sample_time_simplex_with(rng: &mut SimRng, k: usize, t: f64, delta: f64) -> Result<(Vec<f64>, f64)> {
    if k == 0 {
        return Ok((Vec::new(), 1.0));
    }
    if !(delta >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput("simplex needs finite t and δ ≥ 0".into()));
    }
    let l = t - (k + 1) as f64 * delta;
    if l <= 0.0 {
        return Err(Error::EmptyDomain(format!("no {k} separated times in [0, {t}] with gap {delta}")));
    }
    let mut u: Vec<f64> = (0..k).map(|_| l * rng.gen::<f64>()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    for (i, ui) in u.iter_mut().enumerate() {
        *ui += (k - i) as f64 * delta;
    }
    Ok((u, simplex_volume(k, t, delta)))
}

pub fn sample_time_simplex(k: usize, t: f64, delta: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    sample_time_simplex_with(&mut stream(seed, 0), k, t, delta)
}

/// Random history of order `k`: the target is uniform among live particles,
/// β and j are fair coin flips, ω is uniform on the sphere, v_new uniform in
/// B_R and the times uniform on the separated simplex.
#[allow(clippy::too_many_arguments)]
pub fn sample_history(rng: &mut SimRng, s: [usize; 2], k: usize, t: f64, delta: f64, dim: usize, radius: f64) -> Result<CollisionHistory> {
    if s[0] + s[1] == 0 {
        return Err(Error::InvalidInput("history needs at least one initial particle".into()));
    }
    let (times, _) = sample_time_simplex_with(rng, k, t, delta)?;
    let mut h = CollisionHistory::new(s, t);
    let mut live = s;
    for ti in times {
        let pick = rng.gen_range(0..live[0] + live[1]);
        let (alpha, m) = if pick < live[0] { (SpeciesKind::A, pick + 1) } else { (SpeciesKind::B, pick - live[0] + 1) };
        let beta = if rng.gen::<bool>() { SpeciesKind::A } else { SpeciesKind::B };
        let j = if rng.gen::<bool>() { 1 } else { -1 };
        let mut omega = vec![0.0; dim];
        uniform_on_sphere(rng, &mut omega);
        let mut v_new = vec![0.0; dim];
        uniform_in_ball(rng, radius, &mut v_new);
        h.records.push(AdjunctionRecord { alpha, beta, m, j, omega, v_new, t: ti });
        live[beta.index()] += 1;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alpha: SpeciesKind, beta: SpeciesKind, m: usize, t: f64) -> AdjunctionRecord {
        AdjunctionRecord { alpha, beta, m, j: 1, omega: vec![1.0, 0.0], v_new: vec![0.0, 0.0], t }
    }

    #[test]
    fn k0_is_trivial() {
        let (ts, w) = sample_time_simplex(0, 1.0, 0.1, 3).unwrap();
        assert!(ts.is_empty());
        assert_eq!(w, 1.0);
    }

    #[test]
    fn k1_uniform_on_interval() {
        let mut rng = stream(5, 0);
        let mut mean = 0.0;
        for _ in 0..20_000 {
            let (ts, w) = sample_time_simplex_with(&mut rng, 1, 2.0, 0.0).unwrap();
            assert_eq!(w, 2.0);
            assert!((0.0..=2.0).contains(&ts[0]));
            mean += ts[0] / 20_000.0;
        }
        assert!((mean - 1.0).abs() < 3.0 * (4.0f64 / 12.0 / 20_000.0).sqrt() * 1.5);
    }

    #[test]
    fn k2_volume_hit_or_miss() {
        // fraction of the square [0,t]^2 with t1 > t2 times t^2
        let t = 1.7;
        let n = 100_000;
        let mut rng = stream(9, 0);
        let hits = (0..n).filter(|_| rng.gen::<f64>() > rng.gen::<f64>()).count();
        let p = hits as f64 / n as f64;
        let est = p * t * t;
        let sd = (p * (1.0 - p) / n as f64).sqrt() * t * t;
        assert!((est - simplex_volume(2, t, 0.0)).abs() < 3.0 * sd);
    }

    #[test]
    fn separated_samples_respect_gaps() {
        let mut rng = stream(1, 1);
        for _ in 0..1000 {
            let (ts, _) = sample_time_simplex_with(&mut rng, 4, 1.0, 0.1).unwrap();
            assert!(1.0 - ts[0] >= 0.1 - 1e-12);
            for w in ts.windows(2) {
                assert!(w[0] - w[1] >= 0.1 - 1e-12);
            }
            assert!(ts[3] >= 0.1 - 1e-12);
        }
        assert!(matches!(sample_time_simplex(4, 0.5, 0.1, 0), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn validation_catches_bad_targets() {
        let mut h = CollisionHistory::new([1, 0], 1.0);
        h.records.push(rec(SpeciesKind::A, SpeciesKind::B, 1, 0.8));
        h.records.push(rec(SpeciesKind::B, SpeciesKind::B, 1, 0.5));
        assert!(h.validate(2, 0.0).is_ok());
        assert_eq!(h.population(2), [1, 2]);
        h.records.push(rec(SpeciesKind::B, SpeciesKind::A, 3, 0.2));
        assert!(h.validate(2, 0.0).is_err());
        h.records[2].m = 2;
        assert!(h.validate(2, 0.0).is_ok());
        h.records[2].t = 0.6;
        assert!(h.validate(2, 0.0).is_err());
    }

    #[test]
    fn sampled_histories_validate() {
        let mut rng = stream(2, 0);
        for k in 0..6 {
            let h = sample_history(&mut rng, [1, 2], k, 1.0, 0.05, 3, 2.0).unwrap();
            assert_eq!(h.k(), k);
            h.validate(3, 0.05).unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let mut h = CollisionHistory::new([2, 1], 0.5);
        h.records.push(rec(SpeciesKind::B, SpeciesKind::A, 1, 0.25));
        let back = CollisionHistory::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(h, back);
    }
}
