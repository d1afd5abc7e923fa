mod common;

use std::f64::consts::PI;

use multiport::fixtures::FixtureSet;
use multiport::{
    amplitude_distribution, compare_up_to_gauge, compose_unbiased, estimate_uncertainty,
    ideal_tritter, normalize_counts, random_unitary, reconstruct_composed, reconstruct_direct,
    synth_counts, visibility_matrix, OptimizerConfig, PhaseShifts, Stage,
};

/// Phases, in units of π, giving exactly the same ideal-tritter multiport
/// data as (0.3, −0.5). Found by relabelling ports 1 and 2 and by the
/// cyclic symmetry of the tritter, then checked numerically below.
const TWINS: [(f64, f64); 6] = [
    (0.3, -0.5),
    (0.5, -0.3),
    (-0.8, -0.3),
    (0.3, 0.8),
    (0.5, 0.8),
    (-0.8, -0.5),
];

#[test]
fn ideal_tritter_twin_set_is_exact() {
    let f = ideal_tritter();
    let data = |a: f64, b: f64| {
        visibility_matrix(&compose_unbiased(&f, PhaseShifts::from_pi(a, b)).unwrap()).unwrap()
    };
    let target = data(0.3, -0.5);
    for (a, b) in TWINS {
        let v = data(a, b);
        let d = v
            .vals()
            .iter()
            .flatten()
            .zip(target.vals().iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-12, "({a}, {b}) differs by {d:e}");
    }
    // the sign-flipped pair is not equivalent
    let flipped = data(-0.3, 0.5);
    let d = flipped
        .vals()
        .iter()
        .flatten()
        .zip(target.vals().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d > 0.1, "{d}");
}

#[test]
fn composed_fit_recovers_a_twin() {
    let f = ideal_tritter();
    let target =
        visibility_matrix(&compose_unbiased(&f, PhaseShifts::from_pi(0.3, -0.5)).unwrap()).unwrap();
    let (ph, _, res) =
        reconstruct_composed(&f, &f.transpose(), &target, &OptimizerConfig::default()).unwrap();
    let hit = TWINS
        .iter()
        .any(|&(a, b)| ph.distance(PhaseShifts::from_pi(a, b)) <= 0.02 * PI);
    let (a, b) = ph.in_pi();
    assert!(hit, "recovered ({a}, {b})");
    assert!(res.objective < 1e-12);
    assert!(res.converged);
}

#[test]
fn synthetic_counts_match_model_at_a_million_events() {
    let u = random_unitary(3, 31).unwrap();
    let model_amp = amplitude_distribution(&u);
    let model_vis = visibility_matrix(&u).unwrap();
    let totals = 1_000_000;
    for seed in 0..5 {
        let table = synth_counts(&u, totals, seed, true).unwrap();
        let amp = normalize_counts(&table).unwrap();
        let sigma = amp.sigma().unwrap();
        for k in 0..3 {
            for i in 0..3 {
                let dev = (amp.get(k, i) - model_amp.get(k, i)).abs();
                assert!(
                    dev <= 5.0 * sigma[k][i] + 1e-9,
                    "seed {seed} ({k},{i}): {dev}"
                );
            }
        }
        let vis = table.visibility_matrix().unwrap();
        let vs = vis.sigma().unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let dev = (vis.get(r, c) - model_vis.get(r, c)).abs();
                assert!(
                    dev <= 5.0 * vs[r][c] + 1e-9,
                    "seed {seed} vis ({r},{c}): {dev}"
                );
            }
        }
    }
}

#[test]
fn rounded_counts_are_deterministic_and_near_exact() {
    let u = random_unitary(3, 8).unwrap();
    let a = synth_counts(&u, 1_000_000_000, 1, false).unwrap();
    let b = synth_counts(&u, 1_000_000_000, 99, false).unwrap();
    assert_eq!(a, b);
    let amp = normalize_counts(&a).unwrap();
    let model = amplitude_distribution(&u);
    for k in 0..3 {
        for i in 0..3 {
            assert!((amp.get(k, i) - model.get(k, i)).abs() < 1e-8);
        }
    }
    let p = synth_counts(&u, 10_000, 5, true).unwrap();
    assert_eq!(p, synth_counts(&u, 10_000, 5, true).unwrap());
    assert_ne!(p, synth_counts(&u, 10_000, 6, true).unwrap());
}

#[test]
fn round_trip_holds_for_every_stage() {
    for stage in [Stage::PhasesOnly, Stage::Full, Stage::Both] {
        let cfg = OptimizerConfig {
            stage,
            restarts: 16,
            ..Default::default()
        };
        for seed in 0..8 {
            let u = random_unitary(3, 400 + seed).unwrap();
            let res = reconstruct_direct(
                &visibility_matrix(&u).unwrap(),
                &amplitude_distribution(&u),
                &cfg,
            )
            .unwrap();
            let (f, _) = compare_up_to_gauge(&u, &res.matrix).unwrap();
            assert!(f >= 0.99, "{stage:?} seed {seed}: {f}");
            assert!(res.converged, "{stage:?} seed {seed}");
        }
    }
}

#[test]
fn reconstruction_is_seed_deterministic() {
    let fx = FixtureSet::load().unwrap();
    let cfg = OptimizerConfig {
        seed: 11,
        restarts: 16,
        ..Default::default()
    };
    let a = reconstruct_direct(&fx.v_f, &fx.u_f2, &cfg).unwrap();
    let b = reconstruct_direct(&fx.v_f, &fx.u_f2, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn uncertainty_grows_with_input_sigma() {
    let fx = FixtureSet::load().unwrap();
    let cfg = OptimizerConfig {
        restarts: 8,
        ..Default::default()
    };
    let vs = *fx.v_f.sigma().unwrap();
    let asg: Vec<Vec<f64>> = fx.u_f2.sigma().unwrap().to_vec();
    let double = |s: f64| 2.0 * s;
    let vis2 = fx
        .v_f
        .clone()
        .with_sigma(vs.map(|r| r.map(double)))
        .unwrap();
    let amp2 = fx
        .u_f2
        .clone()
        .with_sigma(
            asg.iter()
                .map(|r| r.iter().map(|s| double(*s)).collect())
                .collect(),
        )
        .unwrap();

    let mean = |s: &multiport::SigmaMatrix| s.mag.iter().flatten().sum::<f64>() / 9.0;
    let base = estimate_uncertainty(&fx.v_f, &fx.u_f2, &cfg, 60).unwrap();
    let wide = estimate_uncertainty(&vis2, &amp2, &cfg, 60).unwrap();
    assert!(
        mean(&wide) > 1.3 * mean(&base),
        "{} vs {}",
        mean(&wide),
        mean(&base)
    );
    assert!(wide.max_phase() > base.max_phase());
}
