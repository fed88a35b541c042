//! Run configuration: one TOML file per run, every section optional.

use std::path::{Path, PathBuf};

use hsmix_core::chaos::{ObservableSpec, TestFunction};
use hsmix_core::dynamics::{mean_free_time, mean_relative_speeds};
use hsmix_core::mixture::DEFAULT_CONTACT_TOL;
use hsmix_core::sampling::BoxMaxwellian;
use hsmix_core::scaling::{GradScaling, RealizedScaling};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A configuration problem, located by its dotted field path.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.to_string(), message: message.into() }
}

/// Configuration sections a subcommand reads beyond species and scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Dynamics,
    Pde,
    Pseudo,
    Duhamel,
    Chaos,
    Pathology,
}

impl Section {
    pub const ALL: [Section; 6] = [Section::Dynamics, Section::Pde, Section::Pseudo, Section::Duhamel, Section::Chaos, Section::Pathology];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot format; tables are CSV unless this is `jsonl`.
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), format: Format::Csv }
    }
}

/// Box-Maxwellian data for both species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesConfig {
    pub dim: usize,
    pub mass: [f64; 2],
    pub temperature: f64,
    /// Half-width of the spatial support cube.
    pub half_width: f64,
    /// Mean velocities; empty means zero.
    pub drift_a: Vec<f64>,
    pub drift_b: Vec<f64>,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        SpeciesConfig { dim: 2, mass: [1.0, 2.0], temperature: 1.0, half_width: 3.0, drift_a: vec![0.5, 0.0], drift_b: vec![-0.25, 0.0] }
    }
}

impl SpeciesConfig {
    fn drift(&self, d: &[f64]) -> Vec<f64> {
        if d.is_empty() {
            vec![0.0; self.dim]
        } else {
            d.to_vec()
        }
    }

    pub fn samplers(&self) -> [BoxMaxwellian; 2] {
        [
            BoxMaxwellian::new(self.dim, self.half_width, self.mass[0], self.temperature).with_drift(self.drift(&self.drift_a)),
            BoxMaxwellian::new(self.dim, self.half_width, self.mass[1], self.temperature).with_drift(self.drift(&self.drift_b)),
        ]
    }

    /// Volume of the spatial support.
    pub fn area(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
    pub n2: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { c1: 4.0, c2: 4.0, b: 1.0, n2: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Absolute end time; overrides `mean_free_times`.
    pub t_end: Option<f64>,
    pub mean_free_times: f64,
    /// Initial configuration (CSV, or binary with a `.bin` extension); sampled when absent.
    pub initial: Option<PathBuf>,
    pub contact_tol: f64,
    pub events_max: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { t_end: None, mean_free_times: 1.0, initial: None, contact_tol: DEFAULT_CONTACT_TOL, events_max: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceGrid {
    pub half_width: f64,
    pub nodes: usize,
    /// Width of the Gaussian spatial profile of the initial data.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub radius: f64,
    pub nodes: usize,
    pub steps: usize,
    /// End time; defaults to `chaos.mean_free_times` mean free times.
    pub t_end: Option<f64>,
    pub gamma0: f64,
    pub mu0: f64,
    pub lambda: f64,
    /// Weight horizon T; defaults to 2 t_end.
    pub horizon: Option<f64>,
    pub homogeneous: bool,
    pub check_smallness: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub space: Option<SpaceGrid>,
}

impl Default for PdeSection {
    fn default() -> Self {
        PdeSection {
            radius: 6.0,
            nodes: 17,
            steps: 4,
            t_end: None,
            gamma0: 0.05,
            mu0: 0.0,
            lambda: 0.01,
            horizon: None,
            homogeneous: true,
            check_smallness: false,
            tol: 1e-8,
            max_iter: 50,
            space: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoConfig {
    pub k: usize,
    pub trials: usize,
    pub s: [usize; 2],
    pub t: f64,
    pub delta: f64,
    pub radius: f64,
    /// Positions of Z_s are uniform in [−window, window]^d.
    pub window: f64,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        PseudoConfig { k: 4, trials: 1000, s: [1, 1], t: 1.0, delta: 0.0, radius: 3.0, window: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuhamelSection {
    /// Highest order; terms 0..=k are estimated.
    pub k: usize,
    pub samples: usize,
    pub t: f64,
    pub delta: f64,
    pub radius: f64,
    /// Positions of the tagged A particles; one A at the origin when unset.
    pub x_a: Option<Vec<Vec<f64>>>,
    pub x_b: Vec<Vec<f64>>,
    pub rule: String,
    pub proposal: String,
    /// Defaults to the constant function.
    pub observable: Option<TestFunction>,
}

impl Default for DuhamelSection {
    fn default() -> Self {
        DuhamelSection {
            k: 2,
            samples: 20_000,
            t: 0.2,
            delta: 0.0,
            radius: 4.0,
            x_a: None,
            x_b: Vec::new(),
            rule: "boltzmann".into(),
            proposal: "uniform-ball".into(),
            observable: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosConfig {
    pub n2: Vec<usize>,
    pub ensemble: usize,
    pub mean_free_times: f64,
    pub window: (f64, f64),
    pub half_width: f64,
    pub probes: usize,
    pub probe_seed: u64,
    /// Nodes per axis of the reference quadrature.
    pub reference_nodes: usize,
    /// Defaults to [`default_specs`].
    pub specs: Option<Vec<ObservableSpec>>,
    /// Defaults to (v_x, v_x).
    pub covariance: Option<(TestFunction, TestFunction)>,
}

pub fn default_specs(dim: usize) -> Vec<ObservableSpec> {
    let one = TestFunction::one(dim);
    let vx = TestFunction::component(0, dim);
    let mut center = vec![0.0; dim];
    center[0] = 0.5;
    vec![
        ObservableSpec::new("one", [1, 1], vec![one.clone(), one.clone()], 0.5),
        ObservableSpec::new("vx-1", [1, 1], vec![vx.clone(), one.clone()], 0.5),
        ObservableSpec::new("1-vx", [1, 1], vec![one.clone(), vx], 0.5),
        ObservableSpec::new("energy-1", [1, 1], vec![TestFunction::energy(dim), one], 0.5),
        ObservableSpec::new(
            "gauss-box",
            [1, 1],
            vec![TestFunction::Gaussian { center, width: 1.0 }, TestFunction::IndicatorBox { lo: vec![-1.0; dim], hi: vec![1.0; dim] }],
            0.5,
        ),
    ]
}

impl Default for ChaosConfig {
    fn default() -> Self {
        ChaosConfig {
            n2: vec![64, 128, 256],
            ensemble: 2000,
            mean_free_times: 0.3,
            window: (-1.0, 1.0),
            half_width: 0.5,
            probes: 64,
            probe_seed: 5,
            reference_nodes: 241,
            specs: None,
            covariance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathologyConfig {
    pub seeds: u64,
    pub windows: Vec<f64>,
    pub mean_free_times: f64,
}

impl Default for PathologyConfig {
    fn default() -> Self {
        PathologyConfig { seeds: 200, windows: vec![1e-4, 1e-6, 1e-8], mean_free_times: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output: OutputConfig,
    pub species: SpeciesConfig,
    pub scaling: ScalingConfig,
    pub dynamics: DynamicsConfig,
    pub pde: PdeSection,
    pub pseudo: PseudoConfig,
    pub duhamel: DuhamelSection,
    pub chaos: ChaosConfig,
    pub pathology: PathologyConfig,
}

/// Quantities derived from a configuration without running anything.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub realized: RealizedScaling,
    pub kernel_constants: [[f64; 2]; 2],
    /// Mean free time of the limiting gas with unit-normalized spatial density on the support cube.
    pub mean_free_time: f64,
    pub dynamics_t_end: f64,
    pub pde_t_end: f64,
    pub pde_horizon: f64,
    /// Advisory contraction horizon of the Picard map.
    pub horizon_heuristic: f64,
    pub chaos_t: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), detail: e.to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), detail: e.to_string() })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| field_err("config", e.to_string()))
    }

    pub fn duhamel_x_a(&self) -> Vec<Vec<f64>> {
        self.duhamel.x_a.clone().unwrap_or_else(|| vec![vec![0.0; self.species.dim]])
    }

    pub fn duhamel_observable(&self) -> TestFunction {
        self.duhamel.observable.clone().unwrap_or_else(|| TestFunction::one(self.species.dim))
    }

    pub fn chaos_specs(&self) -> Vec<ObservableSpec> {
        self.chaos.specs.clone().unwrap_or_else(|| default_specs(self.species.dim))
    }

    pub fn chaos_covariance(&self) -> (TestFunction, TestFunction) {
        self.chaos.covariance.clone().unwrap_or_else(|| {
            let vx = TestFunction::component(0, self.species.dim);
            (vx.clone(), vx)
        })
    }

    pub fn grad_scaling(&self) -> Result<GradScaling, ConfigError> {
        GradScaling::new(self.scaling.c1, self.scaling.c2, self.scaling.b, self.species.dim).map_err(|e| field_err("scaling", e.to_string()))
    }

    pub fn realized(&self) -> Result<RealizedScaling, ConfigError> {
        self.grad_scaling()?.realize(self.scaling.n2).map_err(|e| field_err("scaling.n2", e.to_string()))
    }

    /// Kernel constants per unit spatial density on the support cube.
    pub fn density_constants(&self) -> Result<[[f64; 2]; 2], ConfigError> {
        let a = self.species.area();
        Ok(self.grad_scaling()?.kernel_table().map(|row| row.map(|c| c / a)))
    }

    pub fn mean_free_time(&self) -> Result<f64, ConfigError> {
        let [g, h] = self.species.samplers();
        let rel = mean_relative_speeds([&g, &h], 20_000, 1);
        Ok(mean_free_time(self.density_constants()?, [1.0, 1.0], rel, self.species.dim))
    }

    /// Checks every section; returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        self.validate_for(&Section::ALL)
    }

    /// Checks the run-wide fields plus the listed sections.
    pub fn validate_for(&self, sections: &[Section]) -> Result<Vec<String>, ConfigError> {
        if self.seed > i64::MAX as u64 {
            return Err(field_err("seed", "must fit in a signed 64-bit integer"));
        }
        let sp = &self.species;
        if !(2..=3).contains(&sp.dim) {
            return Err(field_err("species.dim", "must be 2 or 3"));
        }
        for (i, m) in sp.mass.iter().enumerate() {
            if !(*m > 0.0) {
                return Err(field_err(&format!("species.mass[{i}]"), format!("must be positive, got {m}")));
            }
        }
        positive("species.temperature", sp.temperature)?;
        positive("species.half_width", sp.half_width)?;
        for (name, d) in [("species.drift_a", &sp.drift_a), ("species.drift_b", &sp.drift_b)] {
            if !d.is_empty() && d.len() != sp.dim {
                return Err(field_err(name, format!("needs {} components", sp.dim)));
            }
        }
        positive("scaling.c1", self.scaling.c1)?;
        positive("scaling.c2", self.scaling.c2)?;
        positive("scaling.b", self.scaling.b)?;
        self.realized()?;

        let mut warnings = Vec::new();
        for s in sections {
            match s {
                Section::Dynamics => self.check_dynamics()?,
                Section::Pde => self.check_pde(&mut warnings)?,
                Section::Pseudo => self.check_pseudo()?,
                Section::Duhamel => self.check_duhamel()?,
                Section::Chaos => self.check_chaos(&mut warnings)?,
                Section::Pathology => self.check_pathology()?,
            }
        }
        Ok(warnings)
    }

    fn check_dynamics(&self) -> Result<(), ConfigError> {
        let dy = &self.dynamics;
        if let Some(t) = dy.t_end {
            if !(t >= 0.0) {
                return Err(field_err("dynamics.t_end", "must be nonnegative"));
            }
        }
        positive("dynamics.mean_free_times", dy.mean_free_times)?;
        positive("dynamics.contact_tol", dy.contact_tol)?;
        nonzero("dynamics.events_max", dy.events_max)?;
        Ok(())
    }

    fn check_pde(&self, warnings: &mut Vec<String>) -> Result<(), ConfigError> {
        let p = &self.pde;
        positive("pde.radius", p.radius)?;
        if p.nodes < 3 {
            return Err(field_err("pde.nodes", "need at least 3 nodes per axis"));
        }
        nonzero("pde.steps", p.steps)?;
        positive("pde.gamma0", p.gamma0)?;
        positive("pde.lambda", p.lambda)?;
        positive("pde.tol", p.tol)?;
        nonzero("pde.max_iter", p.max_iter)?;
        if let Some(t) = p.t_end {
            positive("pde.t_end", t)?;
        }
        if let Some(h) = p.horizon {
            positive("pde.horizon", h)?;
        }
        if let Some(s) = &p.space {
            positive("pde.space.half_width", s.half_width)?;
            positive("pde.space.width", s.width)?;
            if s.nodes < 2 {
                return Err(field_err("pde.space.nodes", "need at least 2 nodes per axis"));
            }
        }
        let d = self.derived()?;
        if d.pde_t_end > d.pde_horizon {
            return Err(field_err("pde.t_end", format!("exceeds the weight horizon {}", d.pde_horizon)));
        }
        if p.gamma0 - p.lambda * d.pde_horizon <= 0.0 {
            return Err(field_err("pde.lambda", "γ(T) = γ₀ − λT must stay positive"));
        }
        if d.pde_t_end > d.horizon_heuristic {
            warnings.push(format!(
                "pde t_end = {:.4} exceeds the contraction horizon heuristic {:.4}; the Picard map may fail to contract",
                d.pde_t_end, d.horizon_heuristic
            ));
        }
        Ok(())
    }

    fn check_pseudo(&self) -> Result<(), ConfigError> {
        let ps = &self.pseudo;
        nonzero("pseudo.trials", ps.trials)?;
        if ps.s[0] + ps.s[1] == 0 {
            return Err(field_err("pseudo.s", "need at least one tagged particle"));
        }
        positive("pseudo.t", ps.t)?;
        positive("pseudo.radius", ps.radius)?;
        positive("pseudo.window", ps.window)?;
        if !(ps.delta >= 0.0) || ps.t <= (ps.k + 1) as f64 * ps.delta {
            return Err(field_err("pseudo.delta", "need 0 ≤ δ and (k+1)δ < t"));
        }
        Ok(())
    }

    fn check_duhamel(&self) -> Result<(), ConfigError> {
        let sp = &self.species;
        let du = &self.duhamel;
        nonzero("duhamel.samples", du.samples)?;
        positive("duhamel.radius", du.radius)?;
        if !(du.t >= 0.0) || !(du.delta >= 0.0) {
            return Err(field_err("duhamel.t", "t and δ must be nonnegative"));
        }
        let x_a = self.duhamel_x_a();
        if x_a.len() + du.x_b.len() == 0 {
            return Err(field_err("duhamel.x_a", "need at least one tagged particle"));
        }
        if x_a.iter().chain(&du.x_b).any(|x| x.len() != sp.dim) {
            return Err(field_err("duhamel.x_a", format!("positions need {} components", sp.dim)));
        }
        if !["boltzmann", "bbgky"].contains(&du.rule.as_str()) {
            return Err(field_err("duhamel.rule", "must be \"boltzmann\" or \"bbgky\""));
        }
        if !["uniform-ball", "gaussian"].contains(&du.proposal.as_str()) {
            return Err(field_err("duhamel.proposal", "must be \"uniform-ball\" or \"gaussian\""));
        }
        self.duhamel_observable().validate(sp.dim).map_err(|e| field_err("duhamel.observable", e.to_string()))?;
        Ok(())
    }

    fn check_chaos(&self, warnings: &mut Vec<String>) -> Result<(), ConfigError> {
        let sp = &self.species;
        let ch = &self.chaos;
        if ch.n2.is_empty() {
            return Err(field_err("chaos.n2", "need at least one scaling point"));
        }
        let gs = self.grad_scaling()?;
        for (i, &n) in ch.n2.iter().enumerate() {
            gs.realize(n).map_err(|e| field_err(&format!("chaos.n2[{i}]"), e.to_string()))?;
        }
        if ch.ensemble < 2 {
            return Err(field_err("chaos.ensemble", "need at least two samples"));
        }
        positive("chaos.mean_free_times", ch.mean_free_times)?;
        if !(ch.window.0 < ch.window.1) {
            return Err(field_err("chaos.window", "lower end must be below upper end"));
        }
        positive("chaos.half_width", ch.half_width)?;
        nonzero("chaos.probes", ch.probes)?;
        if ch.reference_nodes < 3 {
            return Err(field_err("chaos.reference_nodes", "need at least 3 nodes per axis"));
        }
        for (i, s) in self.chaos_specs().iter().enumerate() {
            s.validate(sp.dim).map_err(|e| field_err(&format!("chaos.specs[{i}]"), e.to_string()))?;
        }
        let (f, g) = self.chaos_covariance();
        f.validate(sp.dim).map_err(|e| field_err("chaos.covariance", e.to_string()))?;
        g.validate(sp.dim).map_err(|e| field_err("chaos.covariance", e.to_string()))?;
        if ch.mean_free_times > 0.5 {
            warnings.push("chaos horizon above 0.5 mean free times; boundary effects may enter".into());
        }
        Ok(())
    }

    fn check_pathology(&self) -> Result<(), ConfigError> {
        nonzero("pathology.seeds", self.pathology.seeds as usize)?;
        positive("pathology.mean_free_times", self.pathology.mean_free_times)?;
        for (i, w) in self.pathology.windows.iter().enumerate() {
            positive(&format!("pathology.windows[{i}]"), *w)?;
        }
        Ok(())
    }

    pub fn derived(&self) -> Result<Derived, ConfigError> {
        let realized = self.realized()?;
        let mft = self.mean_free_time()?;
        let chaos_t = self.chaos.mean_free_times * mft;
        let pde_t_end = self.pde.t_end.unwrap_or(chaos_t);
        Ok(Derived {
            realized,
            kernel_constants: self.grad_scaling()?.kernel_table(),
            mean_free_time: mft,
            dynamics_t_end: self.dynamics.t_end.unwrap_or(self.dynamics.mean_free_times * mft),
            pde_t_end,
            pde_horizon: self.pde.horizon.unwrap_or(2.0 * pde_t_end),
            horizon_heuristic: self.horizon_heuristic()?,
            chaos_t,
        })
    }

    /// Advisory Picard horizon: T ν̄ ≤ ½ with ν̄ the mean collision
    /// frequency of the data, capped by γ₀/λ.
    pub fn horizon_heuristic(&self) -> Result<f64, ConfigError> {
        Ok((0.5 * self.mean_free_time()?).min(self.pde.gamma0 / self.pde.lambda))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be positive, got {v}")))
    }
}

fn nonzero(field: &str, v: usize) -> Result<(), ConfigError> {
    if v > 0 {
        Ok(())
    } else {
        Err(field_err(field, "must be at least 1"))
    }
}
