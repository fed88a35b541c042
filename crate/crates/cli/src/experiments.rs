//! The experiments behind each subcommand, looked up by name.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use hsmix_core::chaos::{chaos_metric, conditioned_ensemble, ChaosPoint, ChaosReport, ProbeConfig, TensorReference};
use hsmix_core::collision::{
    solve_mixture_pde, write_snapshot_binary, write_snapshot_csv, GridDensityPair, Lattice, PdeConfig, PdeSolution, SolverWeights,
    VelocityGrid,
};
use hsmix_core::dynamics::{advance, pathology_rate, sample_configuration, write_event_log, FlowOptions, DEFAULT_ACCEPTANCE_FLOOR};
use hsmix_core::hierarchy::{
    adjunction_rules, build_bbgky_pseudo, build_boltzmann_pseudo, compare_pseudo, sample_history, series_terms, DuhamelConfig,
    HistoryClass, TensorMarginals, TruncatedGaussian, UniformBall, VelocityProposal,
};
use hsmix_core::registry::{Named, Registry};
use hsmix_core::rng::stream;
use hsmix_core::sampling::{uniform_in_ball, ParticleSampler};
use hsmix_core::vecops::norm2;
use hsmix_core::{io, Configuration, Error, SpeciesKind};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, RunConfig, Section};
use crate::output::{create, write_json, write_table};

pub trait Experiment: Named + Send + Sync {
    fn summary(&self) -> &str;

    /// Sections checked before the run.
    fn sections(&self) -> &'static [Section];

    /// Runs against a validated configuration, writing artifacts into `out`.
    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>>;
}

pub fn experiments() -> Registry<dyn Experiment> {
    let mut r: Registry<dyn Experiment> = Registry::new();
    r.register(Box::new(Simulate))
        .register(Box::new(Scaling))
        .register(Box::new(PdeSolve))
        .register(Box::new(PseudoCompare))
        .register(Box::new(Duhamel))
        .register(Box::new(ChaosTest))
        .register(Box::new(PathologyScan));
    r
}

macro_rules! named {
    ($t:ident, $name:literal) => {
        impl Named for $t {
            fn name(&self) -> &str {
                $name
            }
        }
    };
}

pub struct Simulate;
pub struct Scaling;
pub struct PdeSolve;
pub struct PseudoCompare;
pub struct Duhamel;
pub struct ChaosTest;
pub struct PathologyScan;

named!(Simulate, "simulate");
named!(Scaling, "scaling");
named!(PdeSolve, "pde-solve");
named!(PseudoCompare, "pseudo-compare");
named!(Duhamel, "duhamel");
named!(ChaosTest, "chaos-test");
named!(PathologyScan, "pathology-scan");

fn load_configuration(path: &Path) -> Result<Configuration> {
    let f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let z = if path.extension().is_some_and(|e| e == "bin") { io::read_binary(f)? } else { io::read_csv(f)? };
    Ok(z)
}

fn write_configuration(dir: &Path, stem: &str, z: &Configuration, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let (path, w) = create(dir, &format!("{stem}.csv"))?;
            io::write_csv(z, w)?;
            Ok(path)
        }
        Format::Binary => {
            let (path, mut w) = create(dir, &format!("{stem}.bin"))?;
            io::write_binary(z, &mut w)?;
            w.flush()?;
            Ok(path)
        }
        Format::Jsonl => {
            let (path, mut w) = create(dir, &format!("{stem}.jsonl"))?;
            serde_json::to_writer(&mut w, z)?;
            w.write_all(b"\n")?;
            w.flush()?;
            Ok(path)
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    t_end: f64,
    particles: [usize; 2],
    events: usize,
    pathology: Option<hsmix_core::dynamics::PathologyRecord>,
    acceptance_rate: Option<f64>,
}

impl Experiment for Simulate {
    fn summary(&self) -> &str {
        "event-driven flow of one configuration"
    }

    fn sections(&self) -> &'static [Section] {
        &[Section::Dynamics]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let realized = cfg.realized()?;
        let params = realized.mixture_params(cfg.species.mass)?;
        let t_end = cfg.derived()?.dynamics_t_end;
        let (z0, acceptance) = match &cfg.dynamics.initial {
            Some(p) => (load_configuration(p)?, None),
            None => {
                let [g, h] = cfg.species.samplers();
                let s = sample_configuration([&g, &h], realized.counts(), &params, None, cfg.seed, DEFAULT_ACCEPTANCE_FLOOR)?;
                (s.config, Some(s.acceptance_rate))
            }
        };
        if z0.dim() != params.dim {
            return Err(Error::InvalidInput(format!("initial configuration has d = {}, species.dim = {}", z0.dim(), params.dim)).into());
        }
        let opts = FlowOptions { contact_tol: cfg.dynamics.contact_tol, events_max: cfg.dynamics.events_max };
        let flow = advance(&z0, t_end, &params, &opts)?;
        let fmt = cfg.output.format;
        let mut files = vec![write_configuration(out, "initial", &z0, fmt)?, write_configuration(out, "final", &flow.final_state, fmt)?];
        let (path, mut w) = create(out, "events.jsonl")?;
        write_event_log(&flow.events, &mut w)?;
        w.flush()?;
        files.push(path);
        let summary =
            SimulateSummary { t_end, particles: z0.counts(), events: flow.events.len(), pathology: flow.pathology, acceptance_rate: acceptance };
        files.push(write_json(out, "summary.json", &summary)?);
        if let Some(p) = flow.pathology {
            return Err(Error::Pathology(format!("{:?} at t = {}", p.kind, p.time)).into());
        }
        Ok(files)
    }
}

#[derive(Serialize)]
struct ScalingReport {
    dim: usize,
    c1: f64,
    c2: f64,
    b: f64,
    #[serde(rename = "N1")]
    n1: usize,
    #[serde(rename = "N2")]
    n2: usize,
    eps1: f64,
    eps2: f64,
    limit_constants: hsmix_core::scaling::LimitConstants,
    kernel_constants: [[f64; 2]; 2],
    mean_free_time: f64,
}

impl Experiment for Scaling {
    fn summary(&self) -> &str {
        "realized Boltzmann–Grad parameters"
    }

    fn sections(&self) -> &'static [Section] {
        &[]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let gs = cfg.grad_scaling()?;
        let r = cfg.realized()?;
        let report = ScalingReport {
            dim: gs.dim,
            c1: gs.c1,
            c2: gs.c2,
            b: gs.b,
            n1: r.n1,
            n2: r.n2,
            eps1: r.eps1,
            eps2: r.eps2,
            limit_constants: gs.limit_constants(),
            kernel_constants: gs.kernel_table(),
            mean_free_time: cfg.mean_free_time()?,
        };
        Ok(vec![write_json(out, "scaling.json", &report)?])
    }
}

/// Initial data and solver settings for the Boltzmann system. Fields are
/// velocity densities per unit spatial density of the support cube; the
/// inhomogeneous profile is a unit-peak Gaussian bump.
pub fn pde_setup(cfg: &RunConfig) -> Result<(GridDensityPair, PdeConfig)> {
    let d = cfg.derived()?;
    let p = &cfg.pde;
    let dim = cfg.species.dim;
    let weights = SolverWeights::new(p.gamma0, p.mu0, p.lambda, d.pde_horizon)?;
    let params = hsmix_core::MixtureParams::new(dim, cfg.species.mass, d.realized.diameters())?;
    let vg = [VelocityGrid::new(dim, p.radius, p.nodes)?, VelocityGrid::new(dim, p.radius, p.nodes)?];
    let mut pc = PdeConfig::new(cfg.density_constants()?, params, weights, d.pde_t_end, p.steps, vg)?;
    pc.homogeneous = p.homogeneous;
    pc.check_smallness = p.check_smallness;
    pc.tol = p.tol;
    pc.max_iter = p.max_iter;
    let [g, h] = cfg.species.samplers();
    let lattices = [pc.vgrids[0].lattice.clone(), pc.vgrids[1].lattice.clone()];
    let init = if p.homogeneous {
        let g0 = move |_: &[f64], v: &[f64]| g.velocity_density(v);
        let h0 = move |_: &[f64], v: &[f64]| h.velocity_density(v);
        GridDensityPair::sample(None, lattices, [&g0, &h0])
    } else {
        let sg = p.space.as_ref().ok_or_else(|| Error::InvalidInput("pde.space is required when pde.homogeneous = false".into()))?;
        let w2 = sg.width * sg.width;
        let g0 = move |x: &[f64], v: &[f64]| (-0.5 * norm2(x) / w2).exp() * g.velocity_density(v);
        let h0 = move |x: &[f64], v: &[f64]| (-0.5 * norm2(x) / w2).exp() * h.velocity_density(v);
        GridDensityPair::sample(Some(Lattice::symmetric(dim, sg.half_width, sg.nodes)), lattices, [&g0, &h0])
    };
    Ok((init, pc))
}

#[derive(Serialize)]
struct IterationRow {
    iteration: usize,
    diff: f64,
}

#[derive(Serialize)]
struct PdeSummary {
    t_end: f64,
    iterations: usize,
    initial_norm: f64,
    solution_norm: f64,
    negative_min: f64,
}

fn write_snapshot(dir: &Path, stem: &str, g: &GridDensityPair, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let (path, w) = create(dir, &format!("{stem}.csv"))?;
            write_snapshot_csv(g, w)?;
            Ok(path)
        }
        Format::Binary => {
            let (path, mut w) = create(dir, &format!("{stem}.bin"))?;
            write_snapshot_binary(g, &mut w)?;
            w.flush()?;
            Ok(path)
        }
        Format::Jsonl => {
            let (path, mut w) = create(dir, &format!("{stem}.jsonl"))?;
            serde_json::to_writer(&mut w, g)?;
            w.write_all(b"\n")?;
            w.flush()?;
            Ok(path)
        }
    }
}

impl Experiment for PdeSolve {
    fn summary(&self) -> &str {
        "Picard solve of the Boltzmann system for mixtures"
    }

    fn sections(&self) -> &'static [Section] {
        &[Section::Pde]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let (init, pc) = pde_setup(cfg)?;
        let sol: PdeSolution = solve_mixture_pde(&init, &pc)?;
        let rows: Vec<IterationRow> = sol.diffs.iter().enumerate().map(|(i, &diff)| IterationRow { iteration: i + 1, diff }).collect();
        let summary = PdeSummary {
            t_end: pc.t_end,
            iterations: sol.iterations,
            initial_norm: sol.initial_norm,
            solution_norm: sol.solution_norm,
            negative_min: sol.negative_min,
        };
        Ok(vec![
            write_snapshot(out, "final", sol.final_state(), cfg.output.format)?,
            write_table(out, "iterations", &rows, cfg.output.format)?,
            write_json(out, "summary.json", &summary)?,
        ])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationRow {
    pub trial: usize,
    pub k: usize,
    pub stage: usize,
    pub particles: usize,
    pub max_position: f64,
    pub particle_bound: f64,
    pub total_position: f64,
    pub total_bound: f64,
    pub max_velocity: f64,
}

impl Experiment for PseudoCompare {
    fn summary(&self) -> &str {
        "coupled Boltzmann and BBGKY pseudo-trajectories"
    }

    fn sections(&self) -> &'static [Section] {
        &[Section::Pseudo]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let ps = &cfg.pseudo;
        let realized = cfg.realized()?;
        let dim = cfg.species.dim;
        let mass = cfg.species.mass;
        let per_trial: Vec<Vec<DeviationRow>> = (0..ps.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = stream(cfg.seed, trial as u64);
                let mut z = Configuration::new(dim);
                let (mut x, mut v) = (vec![0.0; dim], vec![0.0; dim]);
                for sp in SpeciesKind::ALL {
                    for _ in 0..ps.s[sp.index()] {
                        x.iter_mut().for_each(|c| *c = ps.window * (2.0 * rng.gen::<f64>() - 1.0));
                        uniform_in_ball(&mut rng, ps.radius, &mut v);
                        z.push(sp, &x, &v);
                    }
                }
                let hist = sample_history(&mut rng, ps.s, ps.k, ps.t, ps.delta, dim, ps.radius)?;
                let b = build_boltzmann_pseudo(&z, &hist, mass)?;
                let e = build_bbgky_pseudo(&z, &hist, mass, realized.diameters())?;
                Ok(compare_pseudo(&b, &e)?
                    .into_iter()
                    .map(|d| DeviationRow {
                        trial,
                        k: ps.k,
                        stage: d.stage,
                        particles: d.particles,
                        max_position: d.max_position,
                        particle_bound: d.particle_bound,
                        total_position: d.total_position,
                        total_bound: d.total_bound,
                        max_velocity: d.max_velocity,
                    })
                    .collect())
            })
            .collect::<std::result::Result<_, Error>>()?;
        let rows: Vec<DeviationRow> = per_trial.into_iter().flatten().collect();
        let violations = rows
            .iter()
            .filter(|r| r.max_velocity > 1e-12 || r.max_position > r.particle_bound + 1e-10 || r.total_position > r.total_bound)
            .count();
        let summary = serde_json::json!({
            "trials": ps.trials,
            "k": ps.k,
            "eps": realized.diameters(),
            "rows": rows.len(),
            "violations": violations,
        });
        Ok(vec![write_table(out, "deviations", &rows, cfg.output.format)?, write_json(out, "summary.json", &summary)?])
    }
}

#[derive(Serialize)]
struct TermRow {
    k: usize,
    estimate: f64,
    stderr: f64,
    samples: usize,
    leaves: u64,
    rejected: u64,
}

impl Experiment for Duhamel {
    fn summary(&self) -> &str {
        "Monte Carlo Duhamel iterates of the hierarchy"
    }

    fn sections(&self) -> &'static [Section] {
        &[Section::Duhamel]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let du = &cfg.duhamel;
        let realized = cfg.realized()?;
        let rules = adjunction_rules(&realized);
        let rule = rules.get(&du.rule)?;
        let dim = cfg.species.dim;
        let mut x_s = Configuration::new(dim);
        let zero = vec![0.0; dim];
        for x in &cfg.duhamel_x_a() {
            x_s.push(SpeciesKind::A, x, &zero);
        }
        for x in &du.x_b {
            x_s.push(SpeciesKind::B, x, &zero);
        }
        let [g, h] = cfg.species.samplers();
        let (gd, hd) = (g.clone(), h.clone());
        let f0 = TensorMarginals { g: Arc::new(move |x: &[f64], v: &[f64]| gd.density(x, v)), h: Arc::new(move |x: &[f64], v: &[f64]| hd.density(x, v)) };
        let obs = cfg.duhamel_observable();
        let phi = move |z: &Configuration| z.ids().map(|(s, i)| obs.eval(z.v(s, i))).product::<f64>();
        let mut base = DuhamelConfig::new(x_s, HistoryClass::all(0), du.radius, du.t, du.samples, cfg.seed, cfg.species.mass);
        base.delta = du.delta;
        let proposal = |m: f64| -> Arc<dyn VelocityProposal> {
            match du.proposal.as_str() {
                "gaussian" => Arc::new(TruncatedGaussian { sigma: (cfg.species.temperature / m).sqrt() }),
                _ => Arc::new(UniformBall),
            }
        };
        base.proposals = [proposal(cfg.species.mass[0]), proposal(cfg.species.mass[1])];
        let terms = series_terms(&f0, &phi, &base, rule, du.k)?;
        let rows: Vec<TermRow> = terms
            .iter()
            .enumerate()
            .map(|(k, e)| TermRow { k, estimate: e.estimate, stderr: e.stderr, samples: e.samples, leaves: e.leaves, rejected: e.rejected })
            .collect();
        let total: f64 = terms.iter().map(|e| e.estimate).sum();
        let se = terms.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt();
        let summary = serde_json::json!({ "rule": du.rule, "k_max": du.k, "partial_sum": total, "stderr": se });
        Ok(vec![write_table(out, "terms", &rows, cfg.output.format)?, write_json(out, "summary.json", &summary)?])
    }
}

/// Output of the propagation-of-chaos pipeline.
pub struct ChaosOutcome {
    pub report: ChaosReport,
    pub t: f64,
    pub mean_free_time: f64,
    pub pde_iterations: usize,
    /// Per scaling point: acceptance of the conditioned sampler and the number
    /// of samples dropped for a pathological flow.
    pub acceptance: Vec<f64>,
    pub dropped: Vec<usize>,
}

/// Conditioned ensembles at each `chaos.n2`, flowed to t = `chaos.mean_free_times`
/// mean free times, compared against the homogeneous PDE solution.
pub fn chaos_pipeline(cfg: &RunConfig) -> Result<ChaosOutcome> {
    let ch = &cfg.chaos;
    let gs = cfg.grad_scaling()?;
    let derived = cfg.derived()?;
    let t = derived.chaos_t;
    let mut pde_cfg = cfg.clone();
    pde_cfg.pde.homogeneous = true;
    pde_cfg.pde.t_end = Some(t);
    let (init, pc) = pde_setup(&pde_cfg)?;
    let sol = solve_mixture_pde(&init, &pc)?;
    let dim = cfg.species.dim;
    let rg = VelocityGrid::new(dim, cfg.pde.radius, ch.reference_nodes)?;
    let rho = 1.0 / cfg.species.area();
    let reference = TensorReference::from_grid(sol.final_state(), [rg.clone(), rg], [rho, rho])?;

    let [g, h] = cfg.species.samplers();
    let samplers: [&dyn ParticleSampler; 2] = [&g, &h];
    let mut points = Vec::new();
    let (mut acceptance, mut dropped) = (Vec::new(), Vec::new());
    for (i, &n2) in ch.n2.iter().enumerate() {
        let realized = gs.realize(n2)?;
        let params = realized.mixture_params(cfg.species.mass)?;
        let seed = hsmix_core::rng::derive_seed(cfg.seed, &format!("chaos-{i}"));
        let ens = conditioned_ensemble(samplers, &realized, cfg.species.mass, None, ch.ensemble, seed)?;
        let opts = FlowOptions { contact_tol: cfg.dynamics.contact_tol, events_max: cfg.dynamics.events_max };
        let flowed: Vec<Option<Configuration>> = ens
            .configs
            .par_iter()
            .map(|z| Ok(advance(z, t, &params, &opts)?).map(|f| f.is_clean().then_some(f.final_state)))
            .collect::<std::result::Result<_, Error>>()?;
        let kept: Vec<Configuration> = flowed.into_iter().flatten().collect();
        dropped.push(ch.ensemble - kept.len());
        acceptance.push(ens.acceptance);
        points.push(ChaosPoint { realized, ensemble: kept });
    }
    let probes = ProbeConfig { window: ch.window, half_width: ch.half_width, count: ch.probes, seed: ch.probe_seed };
    let (f, g) = cfg.chaos_covariance();
    let report = chaos_metric(&points, &reference, &cfg.chaos_specs(), t, &probes, (&f, &g))?;
    Ok(ChaosOutcome { report, t, mean_free_time: derived.mean_free_time, pde_iterations: sol.iterations, acceptance, dropped })
}

impl Experiment for ChaosTest {
    fn summary(&self) -> &str {
        "propagation-of-chaos gaps against the PDE solution"
    }

    fn sections(&self) -> &'static [Section] {
        &[Section::Dynamics, Section::Pde, Section::Chaos]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let o = chaos_pipeline(cfg)?;
        let fmt = cfg.output.format;
        let summary = serde_json::json!({
            "t": o.t,
            "mean_free_time": o.mean_free_time,
            "pde_iterations": o.pde_iterations,
            "acceptance": o.acceptance,
            "dropped": o.dropped,
            "slopes": o.report.slopes,
        });
        Ok(vec![
            write_table(out, "chaos", &o.report.rows, fmt)?,
            write_table(out, "covariance", &o.report.covariance, fmt)?,
            write_json(out, "summary.json", &summary)?,
        ])
    }
}

#[derive(Serialize)]
struct PathologyRow {
    window: f64,
    trials: usize,
    pathological: usize,
    multiple: usize,
    grazing: usize,
    overflow: usize,
    rate: f64,
}

impl Experiment for PathologyScan {
    fn summary(&self) -> &str {
        "pathology rate against the contact window"
    }

    fn sections(&self) -> &'static [Section] {
        &[Section::Dynamics, Section::Pathology]
    }

    fn run(&self, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
        let pc = &cfg.pathology;
        let realized = cfg.realized()?;
        let params = realized.mixture_params(cfg.species.mass)?;
        let horizon = pc.mean_free_times * cfg.mean_free_time()?;
        let [g, h] = cfg.species.samplers();
        let mut rows = Vec::new();
        for &window in &pc.windows {
            let opts = FlowOptions { contact_tol: window, events_max: cfg.dynamics.events_max };
            let st = pathology_rate([&g, &h], realized.counts(), &params, cfg.seed..cfg.seed + pc.seeds, horizon, &opts)?;
            rows.push(PathologyRow {
                window,
                trials: st.trials,
                pathological: st.pathological,
                multiple: st.multiple,
                grazing: st.grazing,
                overflow: st.overflow,
                rate: st.rate,
            });
        }
        Ok(vec![write_table(out, "pathology", &rows, cfg.output.format)?])
    }
}
