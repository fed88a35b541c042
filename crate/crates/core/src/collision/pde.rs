use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{interpolate, GridFunction};
use super::kernel::q_kernel_many;
use super::quadrature::{Lattice, SphereQuadrature, VelocityGrid};
use crate::error::{Error, Result};
use crate::mixture::{MixtureParams, SpeciesKind};

/// Sampled one-particle densities of both species at time `t`.
///
/// `values[s][iv * nx + ix]` holds species `s` at velocity node `iv` and space
/// node `ix`; without a space lattice `nx = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensityPair {
    pub t: f64,
    pub space: Option<Lattice>,
    pub velocity: [Lattice; 2],
    pub values: [Vec<f64>; 2],
}

impl GridDensityPair {
    pub fn zeros(space: Option<Lattice>, velocity: [Lattice; 2]) -> Self {
        let nx = space.as_ref().map_or(1, Lattice::len);
        let values = [vec![0.0; nx * velocity[0].len()], vec![0.0; nx * velocity[1].len()]];
        GridDensityPair { t: 0.0, space, velocity, values }
    }

    /// Samples `f[s](x, v)` on the lattices; `x` is empty without a space lattice.
    pub fn sample(space: Option<Lattice>, velocity: [Lattice; 2], f: [&dyn Fn(&[f64], &[f64]) -> f64; 2]) -> Self {
        let mut out = Self::zeros(space, velocity);
        let nx = out.space_len();
        for s in 0..2 {
            let vl = &out.velocity[s];
            let mut v = vec![0.0; vl.dim];
            let mut x = vec![0.0; out.space.as_ref().map_or(0, |l| l.dim)];
            for iv in 0..vl.len() {
                vl.point(iv, &mut v);
                for ix in 0..nx {
                    if let Some(sl) = &out.space {
                        sl.point(ix, &mut x);
                    }
                    out.values[s][iv * nx + ix] = f[s](&x, &v);
                }
            }
        }
        out
    }

    pub fn space_len(&self) -> usize {
        self.space.as_ref().map_or(1, Lattice::len)
    }

    /// Velocity slice of species `s` at space node `ix`.
    pub fn velocity_slice(&self, s: usize, ix: usize) -> Vec<f64> {
        let nx = self.space_len();
        (0..self.velocity[s].len()).map(|iv| self.values[s][iv * nx + ix]).collect()
    }

    /// Species-`s` density at space node `ix` as an interpolating field.
    pub fn field(&self, s: usize, ix: usize) -> GridFunction {
        GridFunction { lattice: self.velocity[s].clone(), values: self.velocity_slice(s, ix) }
    }

    /// Interpolated value of species `s` at (x, v).
    pub fn eval(&self, s: usize, x: &[f64], v: &[f64]) -> f64 {
        match &self.space {
            None => interpolate(&self.velocity[s], &self.values[s], v),
            Some(sl) => {
                let vl = &self.velocity[s];
                let nx = sl.len();
                // interpolate in x at the 4^d velocity stencil nodes via a temporary lattice function
                let column: Vec<f64> =
                    (0..vl.len()).map(|iv| interpolate(sl, &self.values[s][iv * nx..(iv + 1) * nx], x)).collect();
                interpolate(vl, &column, v)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flat_map(|v| v.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    /// |G|_{γ,μ} = Σ_α max e^{μ + γ M_α |v|²} |g_α| over the lattice nodes.
    pub fn weighted_norm(&self, gamma: f64, mu: f64, mass: [f64; 2]) -> f64 {
        let nx = self.space_len();
        let mut total = 0.0;
        for s in 0..2 {
            let vl = &self.velocity[s];
            let mut v = vec![0.0; vl.dim];
            let mut best: f64 = 0.0;
            for iv in 0..vl.len() {
                vl.point(iv, &mut v);
                let w = (mu + gamma * mass[s] * v.iter().map(|c| c * c).sum::<f64>()).exp();
                for ix in 0..nx {
                    best = best.max(w * self.values[s][iv * nx + ix].abs());
                }
            }
            total += best;
        }
        total
    }

    fn max_weighted_diff(&self, other: &Self, gamma: f64, mass: [f64; 2]) -> f64 {
        let mut diff = self.clone();
        for s in 0..2 {
            for (a, b) in diff.values[s].iter_mut().zip(&other.values[s]) {
                *a -= b;
            }
        }
        diff.weighted_norm(gamma, 0.0, mass)
    }
}

/// Time-decaying weights γ(t) = γ₀ − λt, μ(t) = μ₀ − λt on [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverWeights {
    pub gamma0: f64,
    pub mu0: f64,
    pub lambda: f64,
    pub horizon: f64,
}

impl SolverWeights {
    pub fn new(gamma0: f64, mu0: f64, lambda: f64, horizon: f64) -> Result<Self> {
        let w = SolverWeights { gamma0, mu0, lambda, horizon };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.lambda > 0.0 && self.horizon > 0.0) || !self.mu0.is_finite() {
            return Err(Error::InvalidInput("solver weights need gamma0, lambda, horizon > 0".into()));
        }
        if self.gamma(self.horizon) <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gamma(T) = {} must stay positive; lower lambda or the horizon",
                self.gamma(self.horizon)
            )));
        }
        Ok(())
    }

    pub fn gamma(&self, t: f64) -> f64 {
        self.gamma0 - self.lambda * t
    }

    pub fn mu(&self, t: f64) -> f64 {
        self.mu0 - self.lambda * t
    }
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct PdeConfig {
    /// Kernel constants A_β^α indexed `[alpha][beta]`.
    pub constants: [[f64; 2]; 2],
    pub params: MixtureParams,
    pub weights: SolverWeights,
    pub t_end: f64,
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Drop the transport term.
    pub homogeneous: bool,
    /// Enforce |G₀|_{γ₀,μ₀+1} ≤ ½.
    pub check_smallness: bool,
    pub sphere: SphereQuadrature,
    pub vgrids: [VelocityGrid; 2],
}

impl PdeConfig {
    pub fn new(constants: [[f64; 2]; 2], params: MixtureParams, weights: SolverWeights, t_end: f64, steps: usize, vgrids: [VelocityGrid; 2]) -> Result<Self> {
        let sphere = SphereQuadrature::default_for(params.dim)?;
        Ok(PdeConfig {
            constants,
            params,
            weights,
            t_end,
            steps,
            tol: 1e-8,
            max_iter: 50,
            homogeneous: false,
            check_smallness: true,
            sphere,
            vgrids,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeSolution {
    pub trajectory: Vec<GridDensityPair>,
    /// G⁽¹⁾ − S^t G₀ at every time level.
    pub first_correction: Vec<GridDensityPair>,
    pub iterations: usize,
    /// Weighted sup distance between successive iterates.
    pub diffs: Vec<f64>,
    pub initial_norm: f64,
    pub solution_norm: f64,
    /// Most negative sampled value (0 when nonnegative).
    pub negative_min: f64,
}

impl PdeSolution {
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.diffs.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn final_state(&self) -> &GridDensityPair {
        self.trajectory.last().expect("trajectory has at least one level")
    }
}

struct Solver<'a> {
    cfg: &'a PdeConfig,
    space: Option<Lattice>,
    velocity: [Lattice; 2],
}

impl Solver<'_> {
    fn transported(&self, g: &GridDensityPair, tau: f64) -> GridDensityPair {
        let Some(sl) = (if self.cfg.homogeneous { None } else { self.space.as_ref() }) else {
            return g.clone();
        };
        if tau == 0.0 {
            return g.clone();
        }
        let nx = sl.len();
        let mut out = g.clone();
        for s in 0..2 {
            let vl = &self.velocity[s];
            let src = &g.values[s];
            out.values[s].par_chunks_mut(nx).enumerate().for_each(|(iv, dst)| {
                let mut v = vec![0.0; vl.dim];
                let mut x = vec![0.0; sl.dim];
                vl.point(iv, &mut v);
                let slice = &src[iv * nx..(iv + 1) * nx];
                for (ix, o) in dst.iter_mut().enumerate() {
                    sl.point(ix, &mut x);
                    for c in 0..sl.dim {
                        x[c] -= tau * v[c];
                    }
                    *o = interpolate(sl, slice, &x);
                }
            });
        }
        out
    }

    fn nonlinear(&self, g: &GridDensityPair) -> Result<GridDensityPair> {
        collision_rhs(self.cfg, g, g)
    }
}

/// 𝒩(L, R)_α = Σ_β A_β^α Q_β^α(L_α, R_β) at every space node, on the nodes of
/// each species' velocity grid (zero elsewhere).
pub fn collision_rhs(cfg: &PdeConfig, left: &GridDensityPair, right: &GridDensityPair) -> Result<GridDensityPair> {
    if left.velocity != right.velocity || left.space != right.space {
        return Err(Error::InvalidInput("collision_rhs arguments live on different grids".into()));
    }
    for s in 0..2 {
        if left.velocity[s] != cfg.vgrids[s].lattice {
            return Err(Error::InvalidInput(format!("species {s} data lattice differs from its velocity grid")));
        }
    }
    let nx = left.space_len();
    let mut out = GridDensityPair::zeros(left.space.clone(), left.velocity.clone());
    out.t = left.t;
    let cols: Vec<Result<[Vec<f64>; 2]>> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            let lf = [left.field(0, ix), left.field(1, ix)];
            let rf = [right.field(0, ix), right.field(1, ix)];
            let mut res = [vec![0.0; left.velocity[0].len()], vec![0.0; left.velocity[1].len()]];
            for a in SpeciesKind::ALL {
                let ai = a.index();
                let grid = &cfg.vgrids[ai];
                for b in SpeciesKind::ALL {
                    let bi = b.index();
                    let c = cfg.constants[ai][bi];
                    if c == 0.0 {
                        continue;
                    }
                    let q = q_kernel_many(&lf[ai], &rf[bi], a, b, &grid.nodes, &cfg.params, &cfg.sphere, &cfg.vgrids[bi])?;
                    for (k, s) in q.iter().enumerate() {
                        res[ai][grid.lattice_index[k]] += c * s.value();
                    }
                }
            }
            Ok(res)
        })
        .collect();
    for (ix, col) in cols.into_iter().enumerate() {
        let col = col?;
        for s in 0..2 {
            for (iv, val) in col[s].iter().enumerate() {
                out.values[s][iv * nx + ix] = *val;
            }
        }
    }
    Ok(out)
}

/// Taylor coefficients a_0..a_order of the spatially homogeneous solution,
/// G(t) = Σ a_k t^k, from (k+1) a_{k+1} = Σ_{j≤k} 𝒩(a_j, a_{k−j}).
pub fn homogeneous_taylor(initial: &GridDensityPair, cfg: &PdeConfig, order: usize) -> Result<Vec<GridDensityPair>> {
    if initial.space.is_some() {
        return Err(Error::InvalidInput("Taylor coefficients need spatially homogeneous data".into()));
    }
    let mut a = vec![initial.clone()];
    for k in 0..order {
        let mut next = GridDensityPair::zeros(None, initial.velocity.clone());
        for j in 0..=k {
            let term = collision_rhs(cfg, &a[j], &a[k - j])?;
            axpy(&mut next, 1.0 / (k + 1) as f64, &term);
        }
        a.push(next);
    }
    Ok(a)
}

fn axpy(acc: &mut GridDensityPair, a: f64, x: &GridDensityPair) {
    for s in 0..2 {
        for (o, v) in acc.values[s].iter_mut().zip(&x.values[s]) {
            *o += a * v;
        }
    }
}

/// Picard iteration of the mild form G(t) = S^t G₀ + ∫₀^t S^{t−τ} 𝒩G(τ) dτ
/// on `steps + 1` equispaced time levels with trapezoidal time quadrature.
pub fn solve_mixture_pde(initial: &GridDensityPair, cfg: &PdeConfig) -> Result<PdeSolution> {
    cfg.weights.validate()?;
    if !(cfg.t_end > 0.0) || cfg.t_end > cfg.weights.horizon || cfg.steps == 0 {
        return Err(Error::InvalidInput(format!(
            "need 0 < t_end <= horizon ({}) and steps >= 1, got t_end = {}",
            cfg.weights.horizon, cfg.t_end
        )));
    }
    for s in 0..2 {
        if initial.velocity[s] != cfg.vgrids[s].lattice {
            return Err(Error::InvalidInput(format!("species {s} data lattice differs from its velocity grid")));
        }
    }
    if !initial.is_finite() {
        return Err(Error::InvalidInput("initial data not finite".into()));
    }
    let w = &cfg.weights;
    let mass = cfg.params.mass;
    let initial_norm = initial.weighted_norm(w.gamma0, w.mu0, mass);
    if cfg.check_smallness {
        let small = initial.weighted_norm(w.gamma0, w.mu0 + 1.0, mass);
        if small > 0.5 {
            return Err(Error::InvalidInput(format!("|G0|_(gamma0, mu0+1) = {small} exceeds 1/2")));
        }
    }
    let solver = Solver { cfg, space: initial.space.clone(), velocity: initial.velocity.clone() };
    let m = cfg.steps;
    let dt = cfg.t_end / m as f64;
    let times: Vec<f64> = (0..=m).map(|i| i as f64 * dt).collect();
    let free: Vec<GridDensityPair> = times
        .iter()
        .map(|&t| {
            let mut g = solver.transported(initial, t);
            g.t = t;
            g
        })
        .collect();

    let duhamel = |nl: &[GridDensityPair]| -> Vec<GridDensityPair> {
        (0..=m)
            .map(|i| {
                let mut acc = GridDensityPair::zeros(initial.space.clone(), initial.velocity.clone());
                acc.t = times[i];
                for l in 0..=i {
                    if i == 0 {
                        break;
                    }
                    let c = if l == 0 || l == i { 0.5 * dt } else { dt };
                    axpy(&mut acc, c, &solver.transported(&nl[l], times[i] - times[l]));
                }
                acc
            })
            .collect()
    };

    let mut current = free.clone();
    let mut first_correction = Vec::new();
    let mut diffs = Vec::new();
    let mut rising = 0usize;
    let mut converged = false;
    for iter in 0..cfg.max_iter {
        let nl: Vec<GridDensityPair> = current.iter().map(|g| solver.nonlinear(g)).collect::<Result<_>>()?;
        let corr = duhamel(&nl);
        if iter == 0 {
            first_correction = corr.clone();
        }
        let mut next = free.clone();
        for (n, c) in next.iter_mut().zip(&corr) {
            axpy(n, 1.0, c);
        }
        let diff = next
            .iter()
            .zip(&current)
            .zip(&times)
            .map(|((a, b), &t)| a.max_weighted_diff(b, w.gamma(t), mass) * w.mu(t).exp())
            .fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(Error::HorizonTooLong("Picard iterates became non-finite; reduce t_end".into()));
        }
        if let Some(&prev) = diffs.last() {
            rising = if diff > prev { rising + 1 } else { 0 };
        }
        diffs.push(diff);
        current = next;
        if rising >= 3 {
            return Err(Error::HorizonTooLong(format!(
                "Picard iterates grew over 3 successive steps (last difference {diff:e}); reduce t_end"
            )));
        }
        if diff < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "Picard iteration did not reach {:e} in {} iterations",
            cfg.tol, cfg.max_iter
        )));
    }
    let solution_norm = current
        .iter()
        .zip(&times)
        .map(|(g, &t)| g.weighted_norm(w.gamma(t), w.mu(t), mass))
        .fold(0.0, f64::max);
    let negative_min = current.iter().map(GridDensityPair::min_value).fold(0.0, f64::min);
    Ok(PdeSolution { trajectory: current, first_correction, iterations: diffs.len(), diffs, initial_norm, solution_norm, negative_min })
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"HSMXGRD1";

fn put_lattice<W: Write>(w: &mut W, l: &Lattice) -> Result<()> {
    w.write_all(&(l.dim as u64).to_le_bytes())?;
    w.write_all(&(l.n as u64).to_le_bytes())?;
    w.write_all(&l.lo.to_le_bytes())?;
    w.write_all(&l.h.to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_lattice<R: Read>(r: &mut R) -> Result<Lattice> {
    let dim = get_u64(r)? as usize;
    let n = get_u64(r)? as usize;
    let lo = get_f64(r)?;
    let h = get_f64(r)?;
    if dim == 0 || dim > 8 || n == 0 || n > 1 << 16 {
        return Err(Error::Validation(format!("corrupt lattice header (dim {dim}, n {n})")));
    }
    Ok(Lattice { dim, lo, h, n })
}

/// Binary snapshot: magic, t, space flag and lattice, two velocity lattices
/// (dim, n, lo, h), then the little-endian doubles of both species.
pub fn write_snapshot_binary<W: Write>(g: &GridDensityPair, mut w: W) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&g.t.to_le_bytes())?;
    w.write_all(&(g.space.is_some() as u64).to_le_bytes())?;
    if let Some(sl) = &g.space {
        put_lattice(&mut w, sl)?;
    }
    for l in &g.velocity {
        put_lattice(&mut w, l)?;
    }
    for vals in &g.values {
        for x in vals {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot_binary<R: Read>(mut r: R) -> Result<GridDensityPair> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Validation("not a density snapshot".into()));
    }
    let t = get_f64(&mut r)?;
    let space = if get_u64(&mut r)? == 1 { Some(get_lattice(&mut r)?) } else { None };
    let velocity = [get_lattice(&mut r)?, get_lattice(&mut r)?];
    let mut g = GridDensityPair::zeros(space, velocity);
    g.t = t;
    for s in 0..2 {
        for x in g.values[s].iter_mut() {
            *x = get_f64(&mut r)?;
        }
    }
    Ok(g)
}

/// CSV rows `species,t,x0..,v0..,value`.
pub fn write_snapshot_csv<W: Write>(g: &GridDensityPair, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let xd = g.space.as_ref().map_or(0, |l| l.dim);
    let vd = g.velocity[0].dim;
    let mut header = vec!["species".to_string(), "t".to_string()];
    header.extend((0..xd).map(|k| format!("x{k}")));
    header.extend((0..vd).map(|k| format!("v{k}")));
    header.push("value".into());
    wr.write_record(&header)?;
    let nx = g.space_len();
    let mut x = vec![0.0; xd];
    let mut v = vec![0.0; vd];
    for s in 0..2 {
        for iv in 0..g.velocity[s].len() {
            g.velocity[s].point(iv, &mut v);
            for ix in 0..nx {
                if let Some(sl) = &g.space {
                    sl.point(ix, &mut x);
                }
                let mut rec = vec![SpeciesKind::from_index(s).tag().to_string(), format!("{:e}", g.t)];
                rec.extend(x.iter().map(|c| format!("{c:e}")));
                rec.extend(v.iter().map(|c| format!("{c:e}")));
                rec.push(format!("{:e}", g.values[s][iv * nx + ix]));
                wr.write_record(&rec)?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}
