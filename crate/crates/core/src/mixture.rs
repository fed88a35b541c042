//! Species algebra, configurations, the binary collision law and the impact operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, norm};

/// Relative contact and grazing window used when none is supplied.
pub const DEFAULT_CONTACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeciesKind {
    A,
    B,
}

impl SpeciesKind {
    pub const ALL: [SpeciesKind; 2] = [SpeciesKind::A, SpeciesKind::B];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            SpeciesKind::A => 0,
            SpeciesKind::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            SpeciesKind::A
        } else {
            SpeciesKind::B
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SpeciesKind::A => "A",
            SpeciesKind::B => "B",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag.trim() {
            "A" | "a" | "0" => Ok(SpeciesKind::A),
            "B" | "b" | "1" => Ok(SpeciesKind::B),
            other => Err(Error::InvalidInput(format!("unknown species tag {other:?}"))),
        }
    }
}

/// A particle label: species plus 0-based index within that species.
pub type ParticleId = (SpeciesKind, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub dim: usize,
    pub mass: [f64; 2],
    pub diameter: [f64; 2],
}

impl MixtureParams {
    pub fn new(dim: usize, mass: [f64; 2], diameter: [f64; 2]) -> Result<Self> {
        let p = MixtureParams { dim, mass, diameter };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidInput(format!("dim must be >= 2, got {}", self.dim)));
        }
        for s in SpeciesKind::ALL {
            let (m, e) = (self.mass[s.index()], self.diameter[s.index()]);
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidInput(format!("mass of {} must be positive, got {m}", s.tag())));
            }
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidInput(format!("diameter of {} must be positive, got {e}", s.tag())));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn mass_of(&self, s: SpeciesKind) -> f64 {
        self.mass[s.index()]
    }

    #[inline]
    pub fn interaction_distance(&self, a: SpeciesKind, b: SpeciesKind) -> f64 {
        interaction_distance(self, a, b)
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameter[0].max(self.diameter[1])
    }
}

/// ε_(a,b) = (ε_a + ε_b) / 2.
#[inline]
pub fn interaction_distance(params: &MixtureParams, a: SpeciesKind, b: SpeciesKind) -> f64 {
    0.5 * (params.diameter[a.index()] + params.diameter[b.index()])
}

/// Phase-space point with species-segregated contiguous storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    pos: [Vec<f64>; 2],
    vel: [Vec<f64>; 2],
}

impl Configuration {
    pub fn new(dim: usize) -> Self {
        Configuration { dim, pos: [Vec::new(), Vec::new()], vel: [Vec::new(), Vec::new()] }
    }

    pub fn from_arrays(dim: usize, pos: [Vec<f64>; 2], vel: [Vec<f64>; 2]) -> Result<Self> {
        for s in 0..2 {
            if pos[s].len() % dim != 0 || pos[s].len() != vel[s].len() {
                return Err(Error::InvalidInput("position/velocity array lengths mismatch".into()));
            }
        }
        Ok(Configuration { dim, pos, vel })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn count(&self, s: SpeciesKind) -> usize {
        self.pos[s.index()].len() / self.dim
    }

    pub fn counts(&self) -> [usize; 2] {
        [self.count(SpeciesKind::A), self.count(SpeciesKind::B)]
    }

    pub fn total(&self) -> usize {
        self.count(SpeciesKind::A) + self.count(SpeciesKind::B)
    }

    pub fn push(&mut self, s: SpeciesKind, x: &[f64], v: &[f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(v.len(), self.dim);
        self.pos[s.index()].extend_from_slice(x);
        self.vel[s.index()].extend_from_slice(v);
    }

    #[inline]
    pub fn x(&self, s: SpeciesKind, i: usize) -> &[f64] {
        &self.pos[s.index()][i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn v(&self, s: SpeciesKind, i: usize) -> &[f64] {
        &self.vel[s.index()][i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn x_mut(&mut self, s: SpeciesKind, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.pos[s.index()][i * d..(i + 1) * d]
    }

    #[inline]
    pub fn v_mut(&mut self, s: SpeciesKind, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.vel[s.index()][i * d..(i + 1) * d]
    }

    /// Both velocity slices of two distinct particles, mutably.
    pub fn v_pair_mut(&mut self, a: ParticleId, b: ParticleId) -> (&mut [f64], &mut [f64]) {
        assert_ne!(a, b);
        let d = self.dim;
        if a.0 == b.0 {
            let buf = &mut self.vel[a.0.index()];
            let (lo, hi, swap) = if a.1 < b.1 { (a.1, b.1, false) } else { (b.1, a.1, true) };
            let (left, right) = buf.split_at_mut(hi * d);
            let p = &mut left[lo * d..(lo + 1) * d];
            let q = &mut right[..d];
            if swap {
                (q, p)
            } else {
                (p, q)
            }
        } else {
            let [va, vb] = &mut self.vel;
            let (pa, pb) = if a.0 == SpeciesKind::A { (va, vb) } else { (vb, va) };
            (&mut pa[a.1 * d..(a.1 + 1) * d], &mut pb[b.1 * d..(b.1 + 1) * d])
        }
    }

    pub fn positions(&self, s: SpeciesKind) -> &[f64] {
        &self.pos[s.index()]
    }

    pub fn velocities(&self, s: SpeciesKind) -> &[f64] {
        &self.vel[s.index()]
    }

    pub fn velocities_mut(&mut self, s: SpeciesKind) -> &mut [f64] {
        &mut self.vel[s.index()]
    }

    pub fn positions_mut(&mut self, s: SpeciesKind) -> &mut [f64] {
        &mut self.pos[s.index()]
    }

    /// Iterates particle ids in the canonical order: all A, then all B.
    pub fn ids(&self) -> impl Iterator<Item = ParticleId> + '_ {
        SpeciesKind::ALL.into_iter().flat_map(move |s| (0..self.count(s)).map(move |i| (s, i)))
    }

    /// Interacting pairs: i < j within a species, every (i, j) across species.
    pub fn pairs(&self) -> Vec<(ParticleId, ParticleId)> {
        let ids: Vec<ParticleId> = self.ids().collect();
        let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                out.push((a, b));
            }
        }
        out
    }

    /// Free flight: x ← x + t v for every particle.
    pub fn free_flight(&mut self, t: f64) {
        for s in 0..2 {
            for (x, v) in self.pos[s].iter_mut().zip(&self.vel[s]) {
                *x += t * v;
            }
        }
    }

    pub fn reverse_velocities(&mut self) {
        for s in 0..2 {
            for v in self.vel[s].iter_mut() {
                *v = -*v;
            }
        }
    }

    /// `|x_i − x_j| ≥ ε_(α,β)(1 − tol)` for every interacting pair.
    pub fn in_phase_space(&self, params: &MixtureParams, tol: f64) -> bool {
        self.pairs().iter().all(|&(a, b)| {
            let eps = params.interaction_distance(a.0, b.0);
            crate::vecops::dist2(self.x(a.0, a.1), self.x(b.0, b.1)) >= (eps * (1.0 - tol)).powi(2)
        })
    }

    /// Largest coordinate-wise difference between two configurations of equal shape.
    pub fn max_deviation(&self, other: &Configuration) -> f64 {
        assert_eq!(self.counts(), other.counts());
        let mut m: f64 = 0.0;
        for s in 0..2 {
            m = m.max(crate::vecops::max_abs_diff(&self.pos[s], &other.pos[s]));
            m = m.max(crate::vecops::max_abs_diff(&self.vel[s], &other.vel[s]));
        }
        m
    }

    pub fn max_speed(&self) -> f64 {
        self.ids().map(|(s, i)| norm(self.v(s, i))).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Interior,
    SimplePreCollisional,
    SimplePostCollisional,
    SimpleGrazing,
    MultipleCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryClass {
    pub kind: BoundaryKind,
    pub pair: Option<(ParticleId, ParticleId)>,
}

/// Mass-weighted elastic collision law with unit normal `n`.
pub fn collide(v_a: &[f64], v_b: &[f64], n: &[f64], m_a: f64, m_b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if v_a.len() != n.len() || v_b.len() != n.len() {
        return Err(Error::InvalidInput("dimension mismatch in collide".into()));
    }
    let nn = norm(n);
    if (nn - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("collision normal not unit: |n| = {nn}")));
    }
    let mut a = v_a.to_vec();
    let mut b = v_b.to_vec();
    collide_in_place(&mut a, &mut b, n, m_a, m_b);
    Ok((a, b))
}

/// Unchecked in-place form of [`collide`].
#[inline]
pub fn collide_in_place(v_a: &mut [f64], v_b: &mut [f64], n: &[f64], m_a: f64, m_b: f64) {
    let mut un = 0.0;
    for k in 0..n.len() {
        un += (v_a[k] - v_b[k]) * n[k];
    }
    let ca = 2.0 * m_b / (m_a + m_b) * un;
    let cb = 2.0 * m_a / (m_a + m_b) * un;
    for k in 0..n.len() {
        v_a[k] -= ca * n[k];
        v_b[k] += cb * n[k];
    }
}

pub fn classify_boundary(z: &Configuration, params: &MixtureParams, contact_tol: f64) -> Result<BoundaryClass> {
    let mut contacts = Vec::new();
    for (a, b) in z.pairs() {
        let eps = params.interaction_distance(a.0, b.0);
        let r = crate::vecops::dist2(z.x(a.0, a.1), z.x(b.0, b.1)).sqrt();
        if r < eps * (1.0 - contact_tol) {
            return Err(Error::InvalidState(format!(
                "overlap between {a:?} and {b:?}: distance {r} < {eps}"
            )));
        }
        if (r - eps).abs() <= contact_tol * eps {
            contacts.push((a, b));
        }
    }
    match contacts.len() {
        0 => Ok(BoundaryClass { kind: BoundaryKind::Interior, pair: None }),
        1 => {
            let (a, b) = contacts[0];
            let dx: Vec<f64> = z.x(a.0, a.1).iter().zip(z.x(b.0, b.1)).map(|(p, q)| p - q).collect();
            let dv: Vec<f64> = z.v(a.0, a.1).iter().zip(z.v(b.0, b.1)).map(|(p, q)| p - q).collect();
            let normal_speed = dot(&dx, &dv) / norm(&dx);
            let kind = if normal_speed.abs() <= contact_tol * norm(&dv) {
                BoundaryKind::SimpleGrazing
            } else if normal_speed < 0.0 {
                BoundaryKind::SimplePreCollisional
            } else {
                BoundaryKind::SimplePostCollisional
            };
            Ok(BoundaryClass { kind, pair: Some((a, b)) })
        }
        _ => Ok(BoundaryClass { kind: BoundaryKind::MultipleCollision, pair: Some(contacts[0]) }),
    }
}

/// The impact operator T: replaces the contact pair's velocities by post-collisional ones.
pub fn impact_operator(z: &Configuration, params: &MixtureParams) -> Result<Configuration> {
    impact_operator_with_tol(z, params, DEFAULT_CONTACT_TOL)
}

pub fn impact_operator_with_tol(z: &Configuration, params: &MixtureParams, contact_tol: f64) -> Result<Configuration> {
    let class = classify_boundary(z, params, contact_tol)?;
    match (class.kind, class.pair) {
        (BoundaryKind::SimplePreCollisional | BoundaryKind::SimplePostCollisional, Some((a, b))) => {
            let mut out = z.clone();
            apply_pair_collision(&mut out, params, a, b);
            Ok(out)
        }
        _ => Err(Error::Precondition(class)),
    }
}

/// Collides particles `a` and `b` in place along their center line.
pub fn apply_pair_collision(z: &mut Configuration, params: &MixtureParams, a: ParticleId, b: ParticleId) {
    let mut n: Vec<f64> = z.x(a.0, a.1).iter().zip(z.x(b.0, b.1)).map(|(p, q)| p - q).collect();
    let r = norm(&n);
    n.iter_mut().for_each(|c| *c /= r);
    let (ma, mb) = (params.mass_of(a.0), params.mass_of(b.0));
    let (va, vb) = z.v_pair_mut(a, b);
    collide_in_place(va, vb, &n, ma, mb);
}

/// E(Z) = Σ M_α |v|² (no ½ factor).
pub fn energy(z: &Configuration, params: &MixtureParams) -> f64 {
    SpeciesKind::ALL
        .iter()
        .map(|&s| params.mass_of(s) * z.velocities(s).iter().map(|v| v * v).sum::<f64>())
        .sum()
}

pub fn total_momentum(z: &Configuration, params: &MixtureParams) -> Vec<f64> {
    let d = z.dim();
    let mut p = vec![0.0; d];
    for (s, i) in z.ids() {
        let m = params.mass_of(s);
        for (pk, vk) in p.iter_mut().zip(z.v(s, i)) {
            *pk += m * vk;
        }
    }
    p
}
