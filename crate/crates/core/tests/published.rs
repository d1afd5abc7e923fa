//! Cross-checks between the bundled measurement tables.

use multiport::fixtures::FixtureSet;
use multiport::{
    amplitude_distribution, compose_general, real_border, similarity, visibility_matrix, NormAxis,
};

#[test]
fn rebuilt_composed_matrix_matches_print_except_one_phase_sign() {
    let fx = FixtureSet::load().unwrap();
    let sigma = fx.w.sigma.unwrap();
    let (w, _) =
        real_border(&compose_general(&fx.u_b.matrix, fx.phases, &fx.u_f.matrix).unwrap()).unwrap();
    for k in 0..3 {
        for i in 0..3 {
            let (a, b) = (w.get(k, i), fx.w.matrix.get(k, i));
            assert!((a.norm() - b.norm()).abs() < 0.005, "({k},{i})");
            let want = if (k, i) == (1, 1) { -b.arg() } else { b.arg() };
            let d = (a.arg() - want).abs();
            let tol = sigma.phase[k][i].max(0.01 * std::f64::consts::PI);
            assert!(d < tol, "({k},{i}) phase off by {d}");
        }
    }
}

#[test]
fn measured_amplitudes_are_row_stochastic_output_by_input() {
    let fx = FixtureSet::load().unwrap();
    assert_eq!(fx.u_m.axis(), NormAxis::Rows);
    let model = amplitude_distribution(&fx.v.matrix);
    let direct = (0..9)
        .map(|n| (model.get(n / 3, n % 3) - fx.u_m.get(n / 3, n % 3)).abs())
        .fold(0.0, f64::max);
    let t = fx.u_m.transposed();
    let swapped = (0..9)
        .map(|n| (model.get(n / 3, n % 3) - t.get(n / 3, n % 3)).abs())
        .fold(0.0, f64::max);
    assert!(direct < 0.01 && swapped > direct, "{direct} vs {swapped}");
}

#[test]
fn visibility_orientation_prefers_rows_as_input_pairs() {
    let fx = FixtureSet::load().unwrap();
    let model = visibility_matrix(&fx.v.matrix).unwrap();
    let s = similarity(&model, &fx.v_m);
    assert!(s > similarity(&model, &fx.v_m.transposed()));
    assert!((s - 0.937).abs() < 0.01);
}

#[test]
fn tritter_tables_are_consistent_with_their_matrices() {
    let fx = FixtureSet::load().unwrap();
    for (vis, amp, m) in [
        (&fx.v_f, &fx.u_f2, &fx.u_f.matrix),
        (&fx.v_b, &fx.u_b2, &fx.u_b.matrix),
    ] {
        let s = similarity(&visibility_matrix(m).unwrap(), vis);
        assert!(s > 0.9, "{s}");
        let model = amplitude_distribution(m);
        let dev = (0..9)
            .map(|n| (model.get(n / 3, n % 3) - amp.get(n / 3, n % 3)).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.05, "{dev}");
    }
}
