//! Monte-Carlo error propagation through direct reconstruction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{AmplitudeDistribution, VisibilityMatrix};
use crate::matrix::TransferMatrix;
use crate::reconstruction::{compare_up_to_gauge, reconstruct_direct, OptimizerConfig};

/// Substream offset keeping sample noise apart from solver restarts.
const SAMPLE_STREAM_BASE: u64 = 1 << 32;

/// Per-entry one-standard-deviation spread of a transfer matrix:
/// magnitudes and phases (radians), indexed `[output][input]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaMatrix {
    pub mag: [[f64; 3]; 3],
    pub phase: [[f64; 3]; 3],
}

impl SigmaMatrix {
    pub fn max_mag(&self) -> f64 {
        self.mag.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_phase(&self) -> f64 {
        self.phase.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Circular standard deviation `sqrt(−2 ln R)` of a set of angles.
pub fn circular_std(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = ((s / n).powi(2) + (c / n).powi(2)).sqrt().min(1.0);
    (-2.0 * r.ln()).max(0.0).sqrt()
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// Perturbs every visibility and amplitude entry by independent Gaussian
/// noise of its stated σ, reconstructs each sample and reports the spread
/// of the real-bordered results.
///
/// Samples are aligned to the conjugation branch of the unperturbed
/// reconstruction before statistics are taken. Fails if more than half of
/// the samples do not converge.
pub fn estimate_uncertainty(
    target: &VisibilityMatrix,
    amp: &AmplitudeDistribution,
    cfg: &OptimizerConfig,
    samples: usize,
) -> Result<SigmaMatrix> {
    if samples < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 samples, got {samples}"
        )));
    }
    let vis_sigma = *target
        .sigma()
        .ok_or_else(|| Error::InvalidParameter("visibility matrix has no sigma".into()))?;
    let amp_sigma = amp
        .sigma()
        .ok_or_else(|| Error::InvalidParameter("amplitude distribution has no sigma".into()))?
        .to_vec();
    if amp.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: amp.dim(),
        });
    }

    let reference = reconstruct_direct(target, amp, cfg)?.matrix;

    let outcomes: Vec<Result<(TransferMatrix, bool)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(SAMPLE_STREAM_BASE + s as u64);
            let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };

            let mut vals = *target.vals();
            for r in 0..3 {
                for c in 0..3 {
                    if !target.is_undefined(r, c) {
                        vals[r][c] = (vals[r][c] + vis_sigma[r][c] * noise()).clamp(-1.0, 1.0);
                    }
                }
            }
            let vis = VisibilityMatrix::new(vals)?.with_undefined(*target.undefined());

            let probs: Vec<Vec<f64>> = (0..3)
                .map(|k| {
                    (0..3)
                        .map(|i| (amp.get(k, i) + amp_sigma[k][i] * noise()).clamp(0.0, 1.0))
                        .collect()
                })
                .collect();
            let amp_s = AmplitudeDistribution::perturbed(probs, amp.axis());

            let sample_cfg = OptimizerConfig {
                seed: cfg.seed.wrapping_add(s as u64 + 1),
                ..*cfg
            };
            let res = reconstruct_direct(&vis, &amp_s, &sample_cfg)?;
            let (_, conj) = compare_up_to_gauge(&reference, &res.matrix)?;
            let aligned = if conj { res.matrix.conj() } else { res.matrix };
            Ok((aligned, res.converged))
        })
        .collect();

    let mut matrices = Vec::with_capacity(samples);
    let mut failed = 0;
    for outcome in outcomes {
        let (m, converged) = outcome?;
        if !converged {
            failed += 1;
        }
        matrices.push(m);
    }
    if 2 * failed > samples {
        return Err(Error::TooManyFailures {
            failed,
            total: samples,
        });
    }

    let mut sigma = SigmaMatrix {
        mag: [[0.0; 3]; 3],
        phase: [[0.0; 3]; 3],
    };
    for k in 0..3 {
        for i in 0..3 {
            let mags: Vec<f64> = matrices.iter().map(|m| m.get(k, i).norm()).collect();
            let phases: Vec<f64> = matrices.iter().map(|m| m.get(k, i).arg()).collect();
            sigma.mag[k][i] = sample_std(&mags);
            sigma.phase[k][i] = circular_std(&phases);
        }
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{amplitude_distribution, visibility_matrix};
    use crate::matrix::random_unitary;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn circular_std_of_identical_angles_is_zero() {
        assert_abs_diff_eq!(circular_std(&[0.3; 5]), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn circular_std_wraps_across_pi() {
        let a = circular_std(&[PI - 0.04, 0.04 - PI, PI - 0.02, 0.02 - PI]);
        let b = circular_std(&[0.04, -0.04, 0.02, -0.02]);
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn requires_sigma_and_enough_samples() {
        let u = random_unitary(3, 1).unwrap();
        let vis = visibility_matrix(&u).unwrap();
        let amp = amplitude_distribution(&u);
        let cfg = OptimizerConfig::default();
        assert!(estimate_uncertainty(&vis, &amp, &cfg, 100).is_err());
        let vis = vis.with_sigma([[0.0; 3]; 3]).unwrap();
        let amp = amp.with_sigma(vec![vec![0.0; 3]; 3]).unwrap();
        assert!(estimate_uncertainty(&vis, &amp, &cfg, 5).is_err());
    }

    #[test]
    fn zero_input_sigma_gives_solver_noise_only() {
        let u = random_unitary(3, 12).unwrap();
        let vis = visibility_matrix(&u)
            .unwrap()
            .with_sigma([[0.0; 3]; 3])
            .unwrap();
        let amp = amplitude_distribution(&u)
            .with_sigma(vec![vec![0.0; 3]; 3])
            .unwrap();
        let cfg = OptimizerConfig {
            restarts: 8,
            ..Default::default()
        };
        let s = estimate_uncertainty(&vis, &amp, &cfg, 10).unwrap();
        assert!(s.max_mag() < 1e-3, "{s:?}");
        assert!(s.max_phase() < 1e-3, "{s:?}");
    }
}
