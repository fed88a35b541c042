use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::contact::contact_root;
use crate::error::Result;
use crate::mixture::{classify_boundary, BoundaryKind, Configuration, MixtureParams, ParticleId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub contact_tol: f64,
    pub events_max: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { contact_tol: crate::mixture::DEFAULT_CONTACT_TOL, events_max: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathologyKind {
    MultipleCollision,
    Grazing,
    EventOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathologyRecord {
    pub kind: PathologyKind,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub t: f64,
    pub pair: [ParticleId; 2],
    pub pre: [Vec<f64>; 2],
    pub post: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    /// State at the requested time, or at the abort time when `pathology` is set.
    pub final_state: Configuration,
    pub events: Vec<CollisionRecord>,
    pub pathology: Option<PathologyRecord>,
}

impl FlowResult {
    pub fn is_clean(&self) -> bool {
        self.pathology.is_none()
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    p: u32,
    q: u32,
    cp: u32,
    cq: u32,
    grazing: bool,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time.total_cmp(&o.time).then(self.p.cmp(&o.p)).then(self.q.cmp(&o.q))
    }
}

/// Flat particle store with per-particle local clocks.
struct Engine<'a> {
    d: usize,
    params: &'a MixtureParams,
    tol: f64,
    ids: Vec<ParticleId>,
    x: Vec<f64>,
    v: Vec<f64>,
    tloc: Vec<f64>,
    count: Vec<u32>,
    heap: BinaryHeap<Reverse<Event>>,
}

impl<'a> Engine<'a> {
    fn new(z: &Configuration, params: &'a MixtureParams, tol: f64) -> Self {
        let ids: Vec<ParticleId> = z.ids().collect();
        let d = z.dim();
        let mut x = Vec::with_capacity(ids.len() * d);
        let mut v = Vec::with_capacity(ids.len() * d);
        for &(s, i) in &ids {
            x.extend_from_slice(z.x(s, i));
            v.extend_from_slice(z.v(s, i));
        }
        let n = ids.len();
        Engine { d, params, tol, ids, x, v, tloc: vec![0.0; n], count: vec![0; n], heap: BinaryHeap::new() }
    }

    fn sigma(&self, p: usize, q: usize) -> f64 {
        self.params.interaction_distance(self.ids[p].0, self.ids[q].0)
    }

    /// Relative position (at time `now`) and velocity of p with respect to q.
    fn relative(&self, p: usize, q: usize, now: f64, xr: &mut [f64], vr: &mut [f64]) {
        let d = self.d;
        for k in 0..d {
            let xp = self.x[p * d + k] + (now - self.tloc[p]) * self.v[p * d + k];
            let xq = self.x[q * d + k] + (now - self.tloc[q]) * self.v[q * d + k];
            xr[k] = xp - xq;
            vr[k] = self.v[p * d + k] - self.v[q * d + k];
        }
    }

    fn predict(&mut self, p: usize, q: usize, now: f64) {
        let d = self.d;
        let (mut a, mut b, mut xx) = (0.0, 0.0, 0.0);
        for k in 0..d {
            let xp = self.x[p * d + k] + (now - self.tloc[p]) * self.v[p * d + k];
            let xq = self.x[q * d + k] + (now - self.tloc[q]) * self.v[q * d + k];
            let (dx, dv) = (xp - xq, self.v[p * d + k] - self.v[q * d + k]);
            a += dv * dv;
            b += dx * dv;
            xx += dx * dx;
        }
        let sigma = self.sigma(p, q);
        if let Some((dt, grazing)) = contact_root(a, b, xx - sigma * sigma, sigma, self.tol) {
            let (p, q) = if p < q { (p, q) } else { (q, p) };
            self.heap.push(Reverse(Event {
                time: now + dt,
                p: p as u32,
                q: q as u32,
                cp: self.count[p],
                cq: self.count[q],
                grazing,
            }));
        }
    }

    fn valid(&self, e: &Event) -> bool {
        self.count[e.p as usize] == e.cp && self.count[e.q as usize] == e.cq
    }

    fn move_to(&mut self, p: usize, t: f64) {
        let d = self.d;
        let dt = t - self.tloc[p];
        for k in 0..d {
            self.x[p * d + k] += dt * self.v[p * d + k];
        }
        self.tloc[p] = t;
    }

    fn in_contact_at(&self, p: usize, q: usize, t: f64) -> bool {
        let d = self.d;
        let mut xr = vec![0.0; d];
        let mut vr = vec![0.0; d];
        self.relative(p, q, t, &mut xr, &mut vr);
        let r = xr.iter().map(|c| c * c).sum::<f64>().sqrt();
        let s = self.sigma(p, q);
        (r - s).abs() <= self.tol * s
    }

    fn collide(&mut self, p: usize, q: usize) {
        let d = self.d;
        let mut n = vec![0.0; d];
        for (k, nk) in n.iter_mut().enumerate() {
            *nk = self.x[p * d + k] - self.x[q * d + k];
        }
        let r = n.iter().map(|c| c * c).sum::<f64>().sqrt();
        n.iter_mut().for_each(|c| *c /= r);
        let (mp, mq) = (self.params.mass_of(self.ids[p].0), self.params.mass_of(self.ids[q].0));
        let (lo, hi) = (p.min(q), p.max(q));
        let (left, right) = self.v.split_at_mut(hi * d);
        let vlo = &mut left[lo * d..(lo + 1) * d];
        let vhi = &mut right[..d];
        if p < q {
            crate::mixture::collide_in_place(vlo, vhi, &n, mp, mq);
        } else {
            crate::mixture::collide_in_place(vhi, vlo, &n, mp, mq);
        }
    }

    fn velocity(&self, p: usize) -> Vec<f64> {
        self.v[p * self.d..(p + 1) * self.d].to_vec()
    }

    fn state_at(&mut self, t: f64) -> Configuration {
        for p in 0..self.ids.len() {
            self.move_to(p, t);
        }
        let mut z = Configuration::new(self.d);
        for (p, &(s, _)) in self.ids.iter().enumerate() {
            z.push(s, &self.x[p * self.d..(p + 1) * self.d], &self.v[p * self.d..(p + 1) * self.d]);
        }
        z
    }

    /// Drops stale heap entries and returns the earliest valid one, if any.
    fn peek_valid(&mut self) -> Option<Event> {
        while let Some(Reverse(e)) = self.heap.peek().copied() {
            if self.valid(&e) {
                return Some(e);
            }
            self.heap.pop();
        }
        None
    }
}

/// Ψ^t for the hard-sphere mixture; negative `t` flows backward.
///
/// Pathologies (multiple or grazing contacts inside the tolerance window,
/// event budget overflow) abort the flow and are reported in the result.
pub fn advance(z: &Configuration, t: f64, params: &MixtureParams, opts: &FlowOptions) -> Result<FlowResult> {
    if t < 0.0 {
        let mut rev = z.clone();
        rev.reverse_velocities();
        let mut out = advance_forward(&rev, -t, params, opts)?;
        out.final_state.reverse_velocities();
        for e in out.events.iter_mut() {
            e.t = -e.t;
            for w in e.pre.iter_mut().chain(e.post.iter_mut()) {
                w.iter_mut().for_each(|c| *c = -*c);
            }
        }
        if let Some(p) = out.pathology.as_mut() {
            p.time = -p.time;
        }
        return Ok(out);
    }
    advance_forward(z, t, params, opts)
}

fn advance_forward(z: &Configuration, t_end: f64, params: &MixtureParams, opts: &FlowOptions) -> Result<FlowResult> {
    let tol = opts.contact_tol;
    let class = classify_boundary(z, params, tol)?;
    let start = match class.kind {
        BoundaryKind::Interior | BoundaryKind::SimplePostCollisional => z.clone(),
        BoundaryKind::SimplePreCollisional => crate::mixture::impact_operator_with_tol(z, params, tol)?,
        BoundaryKind::SimpleGrazing => {
            return Ok(aborted(z.clone(), PathologyKind::Grazing, 0.0, Vec::new()));
        }
        BoundaryKind::MultipleCollision => {
            return Ok(aborted(z.clone(), PathologyKind::MultipleCollision, 0.0, Vec::new()));
        }
    };
    let mut eng = Engine::new(&start, params, tol);
    let n = eng.ids.len();
    for p in 0..n {
        for q in p + 1..n {
            eng.predict(p, q, 0.0);
        }
    }
    let mut events = Vec::new();
    while let Some(Reverse(e)) = eng.heap.pop() {
        if !eng.valid(&e) {
            continue;
        }
        if e.time > t_end {
            break;
        }
        let (p, q) = (e.p as usize, e.q as usize);
        if e.grazing {
            let state = eng.state_at(e.time);
            return Ok(aborted(state, PathologyKind::Grazing, e.time, events));
        }
        eng.move_to(p, e.time);
        eng.move_to(q, e.time);
        let multiple = (0..n).any(|r| r != p && r != q && (eng.in_contact_at(p, r, e.time) || eng.in_contact_at(q, r, e.time)))
            || eng.peek_valid().is_some_and(|nx| nx.time <= e.time + tol * eng.sigma(p, q) && {
                let (a, b) = (nx.p as usize, nx.q as usize);
                eng.in_contact_at(a, b, e.time)
            });
        if multiple {
            let state = eng.state_at(e.time);
            return Ok(aborted(state, PathologyKind::MultipleCollision, e.time, events));
        }
        if events.len() >= opts.events_max {
            let state = eng.state_at(e.time);
            return Ok(aborted(state, PathologyKind::EventOverflow, e.time, events));
        }
        let pre = [eng.velocity(p), eng.velocity(q)];
        eng.collide(p, q);
        eng.count[p] += 1;
        eng.count[q] += 1;
        events.push(CollisionRecord {
            t: e.time,
            pair: [eng.ids[p], eng.ids[q]],
            pre,
            post: [eng.velocity(p), eng.velocity(q)],
        });
        for r in 0..n {
            if r != p && r != q {
                eng.predict(p, r, e.time);
                eng.predict(q, r, e.time);
            }
        }
    }
    let final_state = eng.state_at(t_end);
    Ok(FlowResult { final_state, events, pathology: None })
}

fn aborted(state: Configuration, kind: PathologyKind, time: f64, events: Vec<CollisionRecord>) -> FlowResult {
    FlowResult { final_state: state, events, pathology: Some(PathologyRecord { kind, time }) }
}

/// JSON-lines event log: one object per collision.
pub fn write_event_log<W: std::io::Write>(events: &[CollisionRecord], mut w: W) -> Result<()> {
    for e in events {
        let line = serde_json::json!({
            "t": e.t,
            "pair": [[e.pair[0].0.tag(), e.pair[0].1], [e.pair[1].0.tag(), e.pair[1].1]],
            "pre": e.pre,
            "post": e.post,
        });
        writeln!(w, "{line}")?;
    }
    Ok(())
}
