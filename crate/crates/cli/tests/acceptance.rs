//! Acceptance criteria 1–10. Runs as a plain binary so that every criterion
//! prints a PASS/FAIL line; `cargo test --test acceptance -- 4 6` runs a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use hsmix_cli::experiments::{chaos_pipeline, pde_setup};
use hsmix_cli::RunConfig;
use hsmix_core::collision::{
    collision_rhs, q_kernel_split, solve_mixture_pde, GridDensityPair, GridFunction, Lattice, PdeConfig, SolverWeights, SphereQuadrature, VelocityField, VelocityGrid,
};
use hsmix_core::dynamics::{advance, mean_free_time, mean_relative_speeds, sample_configuration, FlowOptions, DEFAULT_ACCEPTANCE_FLOOR};
use hsmix_core::hierarchy::{
    build_bbgky_pseudo, build_boltzmann_pseudo, compare_pseudo, duhamel_iterate, homogeneous_series_terms, sample_history,
    truncate_to_ball, BoltzmannRule, DuhamelConfig, HistoryClass, TensorMarginals, TestFactor,
};
use hsmix_core::mixture::{collide, impact_operator};
use hsmix_core::rng::stream;
use hsmix_core::sampling::{maxwellian, uniform_in_ball, uniform_on_sphere, BoxMaxwellian};
use hsmix_core::scaling::GradScaling;
use hsmix_core::vecops::{dot, norm, norm2};
use hsmix_core::{Configuration, MixtureParams, SpeciesKind};
use rand::Rng;

const PAIRS: [(SpeciesKind, SpeciesKind); 4] =
    [(SpeciesKind::A, SpeciesKind::A), (SpeciesKind::A, SpeciesKind::B), (SpeciesKind::B, SpeciesKind::A), (SpeciesKind::B, SpeciesKind::B)];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn main() {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Verdict); 10] = [
        (1, "collision conservation", conservation),
        (2, "involution and reversibility", involution_and_reversal),
        (3, "group law", group_law),
        (4, "scaling identities", scaling_identities),
        (5, "pseudo-trajectory proximity", proximity),
        (6, "equilibrium annihilation", annihilation),
        (7, "Picard contraction and hierarchy consistency", picard),
        (8, "series truncation trend", truncation_trend),
        (9, "propagation of chaos trend", chaos_trend),
        (10, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !picked.is_empty() && !picked.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}: {name} ({:.1}s) {}", start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn conservation() -> Verdict {
    let mut rng = stream(1, 0);
    let ratios = [1.0, 3.0, 10.0];
    let start = Instant::now();
    let (mut worst_p, mut worst_e) = (0.0f64, 0.0f64);
    let (mut va, mut vb, mut n) = (vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
    for i in 0..1_000_000 {
        let d = 2 + i % 2;
        let mb = ratios[(i / 2) % 3];
        let (va, vb, n) = (&mut va[..d], &mut vb[..d], &mut n[..d]);
        for c in 0..d {
            va[c] = rng.gen_range(-3.0..3.0);
            vb[c] = rng.gen_range(-3.0..3.0);
        }
        uniform_on_sphere(&mut rng, n);
        let (a, b) = collide(va, vb, n, 1.0, mb).unwrap();
        let e0 = dot(va, va) + mb * dot(vb, vb);
        let e1 = dot(&a, &a) + mb * dot(&b, &b);
        worst_e = worst_e.max((e1 - e0).abs() / e0);
        let scale = norm(va) + mb * norm(vb);
        for c in 0..d {
            worst_p = worst_p.max((a[c] + mb * b[c] - va[c] - mb * vb[c]).abs() / scale);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_p <= 1e-12 && worst_e <= 1e-12 && secs < 5.0,
        format!("max rel momentum err {worst_p:.2e}, energy err {worst_e:.2e}, {secs:.2} s for 10^6 calls"),
    )
}

/// Two particles in contact along `n` with B at x_A − σn.
fn contact(rng: &mut hsmix_core::rng::SimRng, d: usize, params: &MixtureParams) -> Option<Configuration> {
    let (mut n, mut va, mut vb) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    uniform_on_sphere(rng, &mut n);
    for c in 0..d {
        va[c] = rng.gen_range(-3.0..3.0);
        vb[c] = rng.gen_range(-3.0..3.0);
    }
    if (dot(&va, &n) - dot(&vb, &n)).abs() < 1e-3 {
        return None;
    }
    let sigma = params.interaction_distance(SpeciesKind::A, SpeciesKind::B);
    let xb: Vec<f64> = n.iter().map(|c| -sigma * c).collect();
    let mut z = Configuration::new(d);
    z.push(SpeciesKind::A, &vec![0.0; d], &va);
    z.push(SpeciesKind::B, &xb, &vb);
    Some(z)
}

struct Md {
    samplers: [BoxMaxwellian; 2],
    params: MixtureParams,
    mft: f64,
}

/// N₁ = N₂ = 10 in [−1, 1]², masses 1 and 3, ε = 0.1.
fn md() -> Md {
    let scaling = GradScaling::new(1.0, 1.0, 1.0, 2).unwrap();
    let params = scaling.realize(10).unwrap().mixture_params([1.0, 3.0]).unwrap();
    let samplers = [BoxMaxwellian::new(2, 1.0, 1.0, 1.0), BoxMaxwellian::new(2, 1.0, 3.0, 1.0)];
    let coef = scaling.kernel_table().map(|r| r.map(|c| c / 4.0));
    let rel = mean_relative_speeds([&samplers[0], &samplers[1]], 20_000, 1);
    Md { mft: mean_free_time(coef, [1.0, 1.0], rel, 2), params, samplers }
}

fn md_initial(m: &Md, seed: u64) -> Configuration {
    sample_configuration([&m.samplers[0], &m.samplers[1]], [10, 10], &m.params, None, seed, DEFAULT_ACCEPTANCE_FLOOR).unwrap().config
}

fn involution_and_reversal() -> Verdict {
    let mut rng = stream(2, 0);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100_000 {
        let d = 2 + done % 2;
        let params = MixtureParams::new(d, [1.0, [1.0, 3.0, 10.0][done % 3]], [0.1, 0.05]).unwrap();
        let Some(z) = contact(&mut rng, d, &params) else { continue };
        let back = impact_operator(&impact_operator(&z, &params).unwrap(), &params).unwrap();
        worst = worst.max(back.max_deviation(&z) / z.max_speed().max(1.0));
        done += 1;
    }

    let m = md();
    let opts = FlowOptions::default();
    let (mut good, mut flagged, mut silent) = (0, 0, 0);
    let mut worst_dev = 0.0f64;
    for seed in 0..1000 {
        let z = md_initial(&m, seed);
        let fwd = advance(&z, m.mft, &m.params, &opts).unwrap();
        let back = advance(&fwd.final_state, -m.mft, &m.params, &opts).unwrap();
        let dev = back.final_state.max_deviation(&z);
        let clean = fwd.is_clean() && back.is_clean();
        if dev <= 1e-6 && clean {
            good += 1;
            worst_dev = worst_dev.max(dev);
        } else if !clean {
            flagged += 1;
        } else {
            silent += 1;
        }
    }
    verdict(
        worst <= 1e-12 && good >= 990 && silent == 0,
        format!("T∘T err {worst:.2e} on 10^5 contacts; reversal ≤ 1e-6 on {good}/1000 seeds (max {worst_dev:.2e}), {flagged} flagged, {silent} silently off"),
    )
}

fn group_law() -> Verdict {
    let m = md();
    let opts = FlowOptions::default();
    let (t, s) = (0.6 * m.mft, 0.4 * m.mft);
    let (mut good, mut flagged, mut silent) = (0, 0, 0);
    let mut worst = 0.0f64;
    for seed in 0..1000 {
        let z = md_initial(&m, seed);
        let whole = advance(&z, t + s, &m.params, &opts).unwrap();
        let first = advance(&z, s, &m.params, &opts).unwrap();
        let second = advance(&first.final_state, t, &m.params, &opts).unwrap();
        let dev = whole.final_state.max_deviation(&second.final_state);
        let clean = whole.is_clean() && first.is_clean() && second.is_clean();
        if !clean {
            flagged += 1;
        } else if dev <= 1e-8 {
            good += 1;
            worst = worst.max(dev);
        } else {
            silent += 1;
        }
    }
    verdict(
        silent == 0 && good >= 990,
        format!("|Ψ^(t+s) − Ψ^t Ψ^s| ≤ 1e-8 on {good}/1000 seeds (max {worst:.2e}), {flagged} flagged, {silent} off"),
    )
}

fn scaling_identities() -> Verdict {
    let start = Instant::now();
    let mut worst_id = 0.0f64;
    let mut closed_ok = true;
    let mut defect_ok = true;
    let mut worst_ratio = 0.0f64;
    // (n1 per n2, c2, b, d)
    let shapes = [(1.0, 1.0, 1.0, 2), (0.25, 2.0, 2.0, 3), (2.0, 0.5, 0.5, 2), (1.0, 1.5, 1.0, 3), (0.5, 3.0, 4.0, 2)];
    for &(ratio, c2, b, dim) in &shapes {
        let p = dim as i32 - 1;
        let c1 = c2 * ratio * f64::powi(b, p);
        let gs = GradScaling::new(c1, c2, b, dim).unwrap();
        let k = gs.limit_constants();
        let expect_c12 = c2 * ((1.0 + b) / 2.0).powi(p);
        let expect_c21 = c1 * ((1.0 + 1.0 / b) / 2.0).powi(p);
        closed_ok &= k.c1 == c1 && k.c2 == c2 && k.c12 == expect_c12 && k.c21 == expect_c21;
        for n2 in [100, 1_000, 10_000] {
            let r = gs.realize(n2).unwrap();
            worst_id = worst_id
                .max((r.n1 as f64 * r.eps1.powi(p) / c1 - 1.0).abs())
                .max((r.n2 as f64 * r.eps2.powi(p) / c2 - 1.0).abs())
                .max((r.eps1 / (b * r.eps2) - 1.0).abs());
            for (s, added) in [([1, 0], [0, 0]), ([1, 1], [2, 1]), ([2, 2], [3, 3])] {
                let c = r.prefactor_defect_constant(s, added);
                let bound = c * r.max_eps().powi(p);
                for (a, be) in PAIRS {
                    let defect = 1.0 - r.bbgky_prefactor(s, added, a, be).unwrap() / gs.kernel_constant(a, be);
                    // no β-particle used: the prefactor is the limit constant itself
                    let used = s[be.index()] + added[be.index()];
                    let positive = if used == 0 { defect.abs() < 1e-13 } else { defect > 0.0 };
                    // attained for a lone tagged particle of the smaller species; 1 − x loses ~1e-16 absolute
                    defect_ok &= positive && defect <= bound + 1e-14;
                    worst_ratio = worst_ratio.max(defect / bound);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_id <= 1e-10 && closed_ok && defect_ok && secs < 1.0,
        format!("identity err {worst_id:.1e}, closed forms exact: {closed_ok}, max defect/bound {worst_ratio:.3}, {secs:.3} s"),
    )
}

fn proximity() -> Verdict {
    let start = Instant::now();
    let realized = GradScaling::new(1.0, 2.0, 0.5, 2).unwrap().realize(200).unwrap();
    let mut rng = stream(5, 0);
    let shapes = [[1, 0], [0, 1], [1, 1], [2, 1], [1, 2]];
    let (mut violations, mut worst_v) = (0, 0.0f64);
    let (mut worst_particle, mut worst_total) = (0.0f64, 0.0f64);
    for trial in 0..1000 {
        let s = shapes[trial % shapes.len()];
        let k = rng.gen_range(0..=6);
        let mut z = Configuration::new(2);
        for sp in SpeciesKind::ALL {
            for _ in 0..s[sp.index()] {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let mut v = [0.0; 2];
                uniform_in_ball(&mut rng, 3.0, &mut v);
                z.push(sp, &x, &v);
            }
        }
        let h = sample_history(&mut rng, s, k, 2.0, 0.0, 2, 3.0).unwrap();
        let b = build_boltzmann_pseudo(&z, &h, [1.0, 3.0]).unwrap();
        let e = build_bbgky_pseudo(&z, &h, [1.0, 3.0], realized.diameters()).unwrap();
        for dev in compare_pseudo(&b, &e).unwrap() {
            if !dev.within_bounds() || dev.max_velocity > 1e-12 {
                violations += 1;
            }
            worst_v = worst_v.max(dev.max_velocity);
            if dev.particle_bound > 0.0 {
                worst_particle = worst_particle.max(dev.max_position / dev.particle_bound);
            }
            worst_total = worst_total.max(dev.total_position / dev.total_bound);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        violations == 0 && secs < 30.0,
        format!(
            "{violations} stage violations over 1000 histories; velocity dev {worst_v:.1e}, position/bound {worst_particle:.3}, total/bound {worst_total:.3}, {secs:.1} s"
        ),
    )
}

/// Largest |Q_β^α(M_α, M_β)(v)| over two probe velocities, absolute and relative
/// to the loss term, for unit-density Maxwellians M_i at T = 1 sampled on
/// lattices of extent 6/√m_i with n nodes per axis.
fn equilibrium_residual(dim: usize, alpha: SpeciesKind, beta: SpeciesKind, params: &MixtureParams, n: usize) -> (f64, f64) {
    let extent = |s: SpeciesKind| 6.0 / params.mass[s.index()].sqrt();
    let maxwell = |s: SpeciesKind| {
        let m = params.mass[s.index()];
        GridFunction::sample(Lattice::symmetric(dim, extent(s), n), move |v| maxwellian(v, m, 1.0, &[0.0; 3][..dim]))
    };
    let (g, h) = (maxwell(alpha), maxwell(beta));
    let sphere = SphereQuadrature::default_for(dim).unwrap();
    let vg = VelocityGrid::new(dim, extent(beta), n).unwrap();
    let probes: [&[f64]; 2] = [&[0.35, -0.55, 0.2], &[-0.8, 0.1, 0.45]];
    probes.iter().fold((0.0, 0.0), |(abs, rel), v| {
        let q = q_kernel_split(&g, &h, alpha, beta, &v[..dim], params, &sphere, &vg).unwrap();
        let r = (q.gain - q.loss).abs();
        (f64::max(abs, r), f64::max(rel, r / q.loss))
    })
}

fn annihilation() -> Verdict {
    let mut pass = true;
    let mut rows = Vec::new();
    for (dim, n) in [(2, 25), (3, 17)] {
        let params = MixtureParams::new(dim, [1.0, 3.0], [0.01, 0.01]).unwrap();
        for (a, b) in PAIRS {
            let (coarse, _) = equilibrium_residual(dim, a, b, &params, n);
            let (fine, rel) = equilibrium_residual(dim, a, b, &params, 2 * n - 1);
            pass &= fine <= 1e-3 && coarse / fine >= 2.0;
            rows.push(format!("d={dim} {a:?}{b:?}: {fine:.1e} (rel {rel:.0e}, ÷{:.1})", coarse / fine));
        }
    }
    verdict(pass, rows.join(", "))
}

fn picard() -> Verdict {
    // reference settings; μ₀ = −1 puts the data at |G₀|_(γ₀, μ₀+1) ≤ ½
    let mut cfg = RunConfig::default();
    cfg.pde.mu0 = -1.0;
    cfg.pde.check_smallness = true;
    let (init, pc) = pde_setup(&cfg).unwrap();
    let sol = solve_mixture_pde(&init, &pc).unwrap();
    let bound_ok = sol.iterations <= 20 && sol.solution_norm <= 2.0 * sol.initial_norm * 1.1;
    let picard_line = format!(
        "{} iterations to t = {:.3}, |G| = {:.4} vs |G0| = {:.4}",
        sol.iterations, pc.t_end, sol.solution_norm, sol.initial_norm
    );

    // first iterate of the hierarchy for s = (1, 1) against the first Picard correction
    let scaling = GradScaling::new(1.0, 1.0, 1.0, 2).unwrap();
    let masses = [1.0, 2.0];
    let (t, r) = (0.3, 4.0);
    let g = |_: &[f64], v: &[f64]| 0.3 * (-0.5 * ((v[0] - 0.6).powi(2) + v[1] * v[1])).exp() / (2.0 * std::f64::consts::PI);
    let h = |_: &[f64], v: &[f64]| 0.3 * (-norm2(&[v[0] + 0.3, v[1]])).exp() / std::f64::consts::PI;
    let phi_a = |v: &[f64]| v[0] * v[0];
    let phi_b = |v: &[f64]| 1.0 + v[1] * v[1];
    let params = MixtureParams::new(2, masses, [0.01, 0.01]).unwrap();
    // homogeneous data: the first Picard correction at t is t 𝒩(G₀, G₀)
    let tensor_first = |n: usize| {
        let vg = [VelocityGrid::new(2, r, n).unwrap(), VelocityGrid::new(2, r, n).unwrap()];
        let w = SolverWeights::new(0.05, 0.0, 0.01, 1.0).unwrap();
        let mut pde = PdeConfig::new(scaling.kernel_table(), params.clone(), w, t, 1, vg).unwrap();
        pde.homogeneous = true;
        let raw = GridDensityPair::sample(None, [pde.vgrids[0].lattice.clone(), pde.vgrids[1].lattice.clone()], [&g, &h]);
        let data = truncate_to_ball(&raw, &pde);
        let rate = collision_rhs(&pde, &data, &data).unwrap();
        let moment = |state: &GridDensityPair, s: usize, phi: &dyn Fn(&[f64]) -> f64| {
            let f = state.field(s, 0);
            pde.vgrids[s].integrate(|v| phi(v) * VelocityField::eval(&f, v))
        };
        t * (moment(&data, 0, &phi_a) * moment(&rate, 1, &phi_b) + moment(&rate, 0, &phi_a) * moment(&data, 1, &phi_b))
    };
    let (coarse, fine) = (tensor_first(21), tensor_first(41));
    let quad_err = (coarse - fine).abs();

    let mut xs = Configuration::new(2);
    xs.push(SpeciesKind::A, &[0.0, 0.0], &[0.0, 0.0]);
    xs.push(SpeciesKind::B, &[0.5, 0.0], &[0.0, 0.0]);
    let f0 = TensorMarginals { g: Arc::new(g), h: Arc::new(h) };
    let phi = move |z: &Configuration| phi_a(z.v(SpeciesKind::A, 0)) * phi_b(z.v(SpeciesKind::B, 0));
    let dc = DuhamelConfig::new(xs, HistoryClass::all(1), r, t, 4_000_000, 7, masses);
    let mc = duhamel_iterate(&f0, &phi, &dc, &BoltzmannRule::new(&scaling)).unwrap();
    let sigma = (mc.stderr * mc.stderr + quad_err * quad_err).sqrt();
    let gap = (mc.estimate - fine).abs();
    verdict(
        bound_ok && gap <= 3.0 * sigma,
        format!("{picard_line}; first iterate MC {:.5} ± {:.1e} vs PDE {fine:.5} (quad ±{quad_err:.1e}), {:.1}σ", mc.estimate, mc.stderr, gap / sigma),
    )
}

fn truncation_trend() -> Verdict {
    let pi = std::f64::consts::PI;
    let t = 0.08;
    let g0 = |_: &[f64], v: &[f64]| (-0.5 * ((v[0] - 0.8).powi(2) + v[1] * v[1])).exp() / (2.0 * pi);
    let h0 = |_: &[f64], v: &[f64]| (-((v[0] + 0.4).powi(2) + v[1] * v[1])).exp() / pi;
    let phi = |v: &[f64]| v[0] * v[0];
    let params = MixtureParams::new(2, [1.0, 2.0], [0.01, 0.01]).unwrap();
    let w = SolverWeights::new(0.05, 0.0, 0.01, 2.0).unwrap();
    let setup = |r: f64| {
        let vg = [VelocityGrid::new(2, r, 17).unwrap(), VelocityGrid::new(2, r, 17).unwrap()];
        let mut cfg = PdeConfig::new([[1.0; 2]; 2], params.clone(), w, t, 8, vg).unwrap();
        cfg.homogeneous = true;
        cfg.check_smallness = false;
        let init = GridDensityPair::sample(None, [cfg.vgrids[0].lattice.clone(), cfg.vgrids[1].lattice.clone()], [&g0, &h0]);
        (cfg, init)
    };
    let (cfg, init) = setup(6.0);
    let sol = solve_mixture_pde(&init, &cfg).unwrap();
    let gf = sol.final_state().field(0, 0);
    let reference = cfg.vgrids[0].integrate(|v| phi(v) * VelocityField::eval(&gf, v));

    let errors = |r: f64| -> Vec<f64> {
        let (cfg, init) = setup(r);
        let terms = homogeneous_series_terms(&init, &cfg, &[TestFactor { species: SpeciesKind::A, phi: &phi }], t, 0.0, 5).unwrap();
        let mut partial = terms[0];
        terms[1..]
            .iter()
            .map(|c| {
                partial += c;
                (reference - partial).abs()
            })
            .collect()
    };
    let (wide, narrow) = (errors(6.0), errors(3.0));
    let in_n = wide.windows(2).all(|p| p[1] < p[0]);
    let in_r = wide.iter().zip(&narrow).all(|(a, b)| a < b);
    let fmt = |e: &[f64]| e.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    verdict(in_n && in_r, format!("n=1..5 errors R=6: [{}], R=3: [{}]", fmt(&wide), fmt(&narrow)))
}

fn chaos_trend() -> Verdict {
    let cfg = RunConfig::default();
    let o = chaos_pipeline(&cfg).unwrap();
    let specs = cfg.chaos_specs();
    let decreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
    let mut monotone = 0;
    let mut parts = Vec::new();
    for spec in &specs {
        let gaps = o.report.gaps(&spec.id);
        let ok = decreasing(&gaps);
        monotone += ok as usize;
        let slope = o.report.slopes.iter().find(|(id, _)| *id == spec.id).map(|s| s.1).unwrap_or(f64::NAN);
        parts.push(format!("{}{} slope {slope:.2}", spec.id, if ok { "↓" } else { "✗" }));
    }
    let cov: Vec<f64> = o.report.covariance.iter().map(|c| c.cov.abs()).collect();
    let cov_ok = decreasing(&cov);
    verdict(
        monotone >= 4 && cov_ok,
        format!(
            "{monotone}/{} gaps monotone [{}]; |cov| {:?} {}; t = {:.3}",
            specs.len(),
            parts.join(", "),
            cov.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>(),
            if cov_ok { "↓" } else { "✗" },
            o.t
        ),
    )
}

fn hsmix(args: &[&str], out: &Path) {
    let o = Command::new(env!("CARGO_BIN_EXE_hsmix")).args(args).arg("--out").arg(out).env_remove("HSMIX_OUT").output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn data_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.file_name().unwrap() != "manifest.json").collect();
    v.sort();
    v
}

fn determinism() -> Verdict {
    let root = std::env::temp_dir().join(format!("hsmix-determinism-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let runs: [&[&str]; 6] = [
        &["scaling", "--seed", "3"],
        &["simulate", "--seed", "3"],
        &["simulate", "--seed", "3", "--format", "jsonl"],
        &["pseudo-compare", "--seed", "3", "--trials", "100"],
        &["duhamel", "--seed", "3", "--samples", "2000"],
        &["pathology-scan", "--seed", "3"],
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let (a, b) = (root.join(format!("{i}a")), root.join(format!("{i}b")));
        hsmix(args, &a);
        hsmix(args, &b);
        let (fa, fb) = (data_files(&a), data_files(&b));
        assert_eq!(fa.iter().map(|p| p.file_name()).collect::<Vec<_>>(), fb.iter().map(|p| p.file_name()).collect::<Vec<_>>());
        for (x, y) in fa.iter().zip(&fb) {
            compared += 1;
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                differing.push(format!("{} {}", args[0], x.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    verdict(differing.is_empty() && compared > 0, format!("{compared} files byte-compared across {} subcommand runs; differing: {differing:?}", runs.len()))
}
