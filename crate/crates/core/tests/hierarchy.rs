use std::sync::Arc;

use hsmix_core::collision::{
    apply_boltzmann_hierarchy_op, gauss_legendre, GridDensityPair, HierarchyQuadrature, PdeConfig, SolverWeights, SphereQuadrature,
    VelocityGrid,
};
use hsmix_core::hierarchy::{
    build_bbgky_pseudo, build_boltzmann_pseudo, compare_pseudo, duhamel_iterate, homogeneous_series_terms, sample_history,
    simplex_volume, sample_time_simplex, BbgkyRule, BoltzmannRule, DuhamelConfig, HistoryClass, TensorMarginals, TestFactor,
};
use hsmix_core::rng::stream;
use hsmix_core::sampling::uniform_in_ball;
use hsmix_core::scaling::GradScaling;
use hsmix_core::vecops::norm2;
use hsmix_core::{Configuration, MixtureParams, SpeciesKind};
use proptest::prelude::*;
use rand::Rng;

fn random_zs(rng: &mut hsmix_core::rng::SimRng, s: [usize; 2], radius: f64) -> Configuration {
    let mut z = Configuration::new(2);
    for sp in SpeciesKind::ALL {
        for _ in 0..s[sp.index()] {
            let x = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
            let mut v = [0.0; 2];
            uniform_in_ball(rng, radius, &mut v);
            z.push(sp, &x, &v);
        }
    }
    z
}

fn gauss(x: &[f64], v: &[f64]) -> f64 {
    (-0.5 * norm2(v) - 0.5 * norm2(x)).exp() / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
}

#[test]
fn proximity_bounds_over_random_histories() {
    let realized = GradScaling::new(1.0, 2.0, 0.5, 2).unwrap().realize(200).unwrap();
    let mut rng = stream(42, 0);
    let shapes = [[1, 0], [0, 1], [1, 1], [2, 1], [1, 2]];
    for trial in 0..1000 {
        let s = shapes[trial % shapes.len()];
        let k = rng.gen_range(0..=6);
        let z = random_zs(&mut rng, s, 3.0);
        let h = sample_history(&mut rng, s, k, 2.0, 0.0, 2, 3.0).unwrap();
        let b = build_boltzmann_pseudo(&z, &h, [1.0, 3.0]).unwrap();
        let e = build_bbgky_pseudo(&z, &h, [1.0, 3.0], realized.diameters()).unwrap();
        for dev in compare_pseudo(&b, &e).unwrap() {
            assert!(dev.within_bounds(), "trial {trial}: {dev:?}");
            assert_eq!(dev.max_velocity, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stage_populations_grow_by_one(seed in 0u64..10_000, k in 0usize..6, s1 in 0usize..3, s2 in 0usize..3) {
        prop_assume!(s1 + s2 > 0);
        let mut rng = stream(seed, 1);
        let z = random_zs(&mut rng, [s1, s2], 2.0);
        let h = sample_history(&mut rng, [s1, s2], k, 1.5, 0.0, 2, 2.0).unwrap();
        let traj = build_boltzmann_pseudo(&z, &h, [1.0, 2.0]).unwrap();
        prop_assert_eq!(traj.stages.len(), k + 2);
        for (i, st) in traj.stages.iter().enumerate() {
            let added = h.added(i.saturating_sub(1).min(k));
            let expect = if i == 0 { s1 + s2 } else { s1 + s2 + added[0] + added[1] };
            prop_assert_eq!(st.total(), expect);
        }
        prop_assert_eq!(traj.final_stage().total(), s1 + s2 + k);
    }

    #[test]
    fn flavors_share_velocities_bitwise(seed in 0u64..10_000, k in 0usize..6, eps in 1e-4f64..0.2) {
        let mut rng = stream(seed, 2);
        let z = random_zs(&mut rng, [1, 1], 2.0);
        let h = sample_history(&mut rng, [1, 1], k, 1.0, 0.0, 2, 2.0).unwrap();
        let b = build_boltzmann_pseudo(&z, &h, [1.0, 4.0]).unwrap();
        let e = build_bbgky_pseudo(&z, &h, [1.0, 4.0], [eps, 0.5 * eps]).unwrap();
        for (sb, se) in b.stages.iter().zip(&e.stages) {
            for sp in SpeciesKind::ALL {
                prop_assert_eq!(sb.velocities(sp), se.velocities(sp));
            }
        }
    }

    #[test]
    fn simplex_samples_are_ordered_and_separated(seed in 0u64..10_000, k in 1usize..7, delta in 0.0f64..0.1) {
        let t = 1.0;
        prop_assume!(t > (k + 1) as f64 * delta);
        let (ts, vol) = sample_time_simplex(k, t, delta, seed).unwrap();
        prop_assert!((vol - simplex_volume(k, t, delta)).abs() < 1e-15);
        prop_assert!(t - ts[0] >= delta - 1e-12);
        for w in ts.windows(2) {
            prop_assert!(w[0] - w[1] >= delta - 1e-12);
        }
        prop_assert!(ts[k - 1] >= delta - 1e-12);
    }

    #[test]
    fn history_json_round_trips(seed in 0u64..10_000, k in 0usize..5) {
        let mut rng = stream(seed, 3);
        let h = sample_history(&mut rng, [2, 1], k, 1.0, 0.01, 3, 1.5).unwrap();
        let back = hsmix_core::hierarchy::CollisionHistory::from_json(&h.to_json().unwrap()).unwrap();
        prop_assert_eq!(h, back);
    }
}

fn x_cluster() -> Configuration {
    let mut z = Configuration::new(2);
    z.push(SpeciesKind::A, &[0.0, 0.0], &[0.0, 0.0]);
    z.push(SpeciesKind::A, &[0.15, 0.05], &[0.0, 0.0]);
    z.push(SpeciesKind::B, &[-0.1, 0.12], &[0.0, 0.0]);
    z
}

#[test]
fn rejection_fraction_shrinks_with_diameter() {
    let scaling = GradScaling::new(1.0, 1.0, 1.0, 2).unwrap();
    let f0 = TensorMarginals { g: Arc::new(gauss), h: Arc::new(gauss) };
    let phi = |_: &Configuration| 1.0;
    let mut fractions = Vec::new();
    for n2 in [20, 80, 320] {
        let realized = scaling.realize(n2).unwrap();
        let rule = BbgkyRule { realized };
        let cfg = DuhamelConfig::new(x_cluster(), HistoryClass::all(3), 3.0, 1.0, 3000, 9, [1.0, 2.0]);
        let e = duhamel_iterate(&f0, &phi, &cfg, &rule).unwrap();
        fractions.push(e.rejection_fraction());
    }
    assert!(fractions[0] > fractions[1] && fractions[1] > fractions[2], "{fractions:?}");
    assert!(fractions[0] > 0.0);
}

#[test]
fn coupled_flavors_differ_by_order_eps() {
    let scaling = GradScaling::new(1.0, 1.0, 1.0, 2).unwrap();
    let f0 = TensorMarginals { g: Arc::new(gauss), h: Arc::new(gauss) };
    let phi = |z: &Configuration| 1.0 + 0.5 * z.v(SpeciesKind::A, 0)[0];
    let mut x = Configuration::new(2);
    x.push(SpeciesKind::A, &[0.2, 0.0], &[0.0, 0.0]);
    x.push(SpeciesKind::B, &[-0.4, 0.3], &[0.0, 0.0]);
    let cfg = DuhamelConfig::new(x, HistoryClass::all(2), 3.0, 0.8, 2000, 21, [1.0, 2.0]);
    let boltz = duhamel_iterate(&f0, &phi, &cfg, &BoltzmannRule::new(&scaling)).unwrap().estimate;
    let gaps: Vec<f64> = [25, 100, 400]
        .iter()
        .map(|&n2| {
            let rule = BbgkyRule { realized: scaling.realize(n2).unwrap() };
            (duhamel_iterate(&f0, &phi, &cfg, &rule).unwrap().estimate - boltz).abs()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn loss_only_first_iterate_matches_operator_quadrature() {
    let scaling = GradScaling::new(1.0, 1.5, 1.0, 2).unwrap();
    let params = MixtureParams::new(2, [1.0, 2.0], [0.01, 0.01]).unwrap();
    let (t, r) = (0.6, 2.5);
    let x = [0.3, -0.2];
    let mut xs = Configuration::new(2);
    xs.push(SpeciesKind::A, &x, &[0.0, 0.0]);
    let phi_v = |v: &[f64]| 1.0 + v[1] * v[1];
    let phi = move |z: &Configuration| phi_v(z.v(SpeciesKind::A, 0));
    let f0 = TensorMarginals { g: Arc::new(gauss), h: Arc::new(gauss) };
    let class = HistoryClass { k: 1, alpha: Some(vec![SpeciesKind::A]), beta: Some(vec![SpeciesKind::B]), j: Some(vec![-1]), m: None };
    let cfg = DuhamelConfig::new(xs, class, r, t, 40_000, 17, [1.0, 2.0]);
    let mc = duhamel_iterate(&f0, &phi, &cfg, &BoltzmannRule::new(&scaling)).unwrap();

    // −∫_{B_R} φ(v) ∫_0^t 𝒞⁻[S^{t1} f0](x − (t − t1)v, v) dt1 dv
    let quad = HierarchyQuadrature::new(SphereQuadrature::trapezoid_2d(96), VelocityGrid::new(2, r, 41).unwrap()).unwrap();
    let outer = VelocityGrid::new(2, r, 25).unwrap();
    let (nodes, weights) = gauss_legendre(6);
    let mut oracle = 0.0;
    for (u, w) in nodes.iter().zip(&weights) {
        let t1 = 0.5 * t * (u + 1.0);
        let flowed = {
            let f0 = f0.clone();
            move |z: &Configuration| {
                let mut y = z.clone();
                y.free_flight(-t1);
                hsmix_core::collision::PhaseFunction::eval(&f0, &y)
            }
        };
        let op = apply_boltzmann_hierarchy_op(&flowed, [1, 0], SpeciesKind::A, SpeciesKind::B, &scaling, &params, &quad).unwrap();
        let inner = outer.integrate(|v| {
            let mut z = Configuration::new(2);
            z.push(SpeciesKind::A, &[x[0] - (t - t1) * v[0], x[1] - (t - t1) * v[1]], v);
            phi_v(v) * op.split(&z).unwrap().loss
        });
        oracle -= 0.5 * t * w * inner;
    }
    let tol = 3.0 * mc.stderr + 0.01 * oracle.abs();
    assert!((mc.estimate - oracle).abs() < tol, "{} ± {} vs {oracle}", mc.estimate, mc.stderr);
}

#[test]
fn first_iterate_matches_homogeneous_series() {
    let scaling = GradScaling::new(1.0, 1.0, 1.0, 2).unwrap();
    let masses = [1.0, 2.0];
    let (t, r) = (0.3, 4.0);
    let g = |_: &[f64], v: &[f64]| (-0.5 * ((v[0] - 0.6).powi(2) + v[1] * v[1])).exp() / (2.0 * std::f64::consts::PI);
    let h = |_: &[f64], v: &[f64]| (-norm2(&[v[0] + 0.3, v[1]])).exp() / std::f64::consts::PI;
    let phi_v = |v: &[f64]| v[0] * v[0];

    let p = MixtureParams::new(2, masses, [0.01, 0.01]).unwrap();
    let w = SolverWeights::new(0.05, 0.0, 0.01, 1.0).unwrap();
    let vg = [VelocityGrid::new(2, r, 21).unwrap(), VelocityGrid::new(2, r, 21).unwrap()];
    let mut pde = PdeConfig::new(scaling.kernel_table(), p, w, t, 1, vg).unwrap();
    pde.homogeneous = true;
    let init = GridDensityPair::sample(None, [pde.vgrids[0].lattice.clone(), pde.vgrids[1].lattice.clone()], [&g, &h]);
    let terms = homogeneous_series_terms(&init, &pde, &[TestFactor { species: SpeciesKind::A, phi: &phi_v }], t, 0.0, 1).unwrap();

    let mut xs = Configuration::new(2);
    xs.push(SpeciesKind::A, &[0.0, 0.0], &[0.0, 0.0]);
    let f0 = TensorMarginals { g: Arc::new(g), h: Arc::new(h) };
    let phi = move |z: &Configuration| phi_v(z.v(SpeciesKind::A, 0));
    let cfg = DuhamelConfig::new(xs, HistoryClass::all(1), r, t, 40_000, 5, masses);
    let mc = duhamel_iterate(&f0, &phi, &cfg, &BoltzmannRule::new(&scaling)).unwrap();
    let tol = 3.0 * mc.stderr + 0.02 * terms[1].abs();
    assert!((mc.estimate - terms[1]).abs() < tol, "{} ± {} vs {}", mc.estimate, mc.stderr, terms[1]);
}
