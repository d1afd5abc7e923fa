//! Test-only oracles, independent of the library's coincidence formulas.

#![allow(dead_code)]

use std::collections::BTreeMap;

use multiport::{
    amplitude_distribution, coincidence_distinguishable, coincidence_indistinguishable,
    visibility_matrix, PortPair, TransferMatrix,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random `(left, right)` diagonal phase factors.
pub fn random_diagonal_phases(seed: u64) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut draw = || Complex64::cis(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
    let left = (0..3).map(|_| draw()).collect();
    let right = (0..3).map(|_| draw()).collect();
    (left, right)
}

pub fn max_vis_diff(a: &TransferMatrix, b: &TransferMatrix) -> f64 {
    let va = visibility_matrix(a).unwrap();
    let vb = visibility_matrix(b).unwrap();
    va.vals()
        .iter()
        .flatten()
        .zip(vb.vals().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_amp_diff(a: &TransferMatrix, b: &TransferMatrix) -> f64 {
    let pa = amplitude_distribution(a);
    let pb = amplitude_distribution(b);
    pa.probs()
        .iter()
        .flatten()
        .zip(pb.probs().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Two-photon output statistics for photons entering `i` and `j`, by
/// expanding `a_i† a_j† → Σ_kl U_ki U_lj b_k† b_l†` over all nine ordered
/// output mode pairs.
///
/// Returns, per unordered output pair, `(distinguishable, indistinguishable)`
/// probabilities, plus the total indistinguishable probability including
/// bunched outcomes.
pub fn enumerate_two_photon(
    u: &TransferMatrix,
    i: usize,
    j: usize,
) -> (BTreeMap<(usize, usize), (f64, f64)>, f64) {
    let mut coherent: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    let mut incoherent: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for k in 0..3 {
        for l in 0..3 {
            let amp = u.get(k, i) * u.get(l, j);
            let key = (k.min(l), k.max(l));
            *coherent.entry(key).or_default() += amp;
            *incoherent.entry(key).or_default() += amp.norm_sqr();
        }
    }
    let mut out = BTreeMap::new();
    let mut total = 0.0;
    for (&(k, l), amp) in &coherent {
        if k == l {
            // |2_k> carries a √2 normalisation relative to the operator product
            total += 2.0 * amp.norm_sqr();
        } else {
            total += amp.norm_sqr();
            out.insert((k, l), (incoherent[&(k, l)], amp.norm_sqr()));
        }
    }
    (out, total)
}

/// Largest deviation between the enumeration oracle and the library's
/// coincidence probabilities and visibilities.
pub fn brute_force_deviation(u: &TransferMatrix) -> f64 {
    let vis = visibility_matrix(u).unwrap();
    let mut worst: f64 = 0.0;
    for (r, inp) in PortPair::CANONICAL.iter().enumerate() {
        let (table, total) = enumerate_two_photon(u, inp.lo, inp.hi);
        if u.is_unitary(1e-9) {
            worst = worst.max((total - 1.0).abs());
        }
        for (c, out) in PortPair::CANONICAL.iter().enumerate() {
            let (cd, qd) = table[&(out.lo, out.hi)];
            let lib_c = coincidence_distinguishable(u, inp.lo, inp.hi, out.lo, out.hi).unwrap();
            let lib_q = coincidence_indistinguishable(u, inp.lo, inp.hi, out.lo, out.hi).unwrap();
            worst = worst.max((cd - lib_c).abs()).max((qd - lib_q).abs());
            if cd > 1e-12 {
                worst = worst.max(((cd - qd) / cd - vis.get(r, c)).abs());
            }
        }
    }
    worst
}
