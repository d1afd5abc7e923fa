//! Transfer-matrix reconstruction from visibility and amplitude data.
//!
//! Direct reconstruction fits the real-bordered form
//!
//! ```text
//!     | |u00|   |u01|          |u02|         |
//! U = | |u10|   |u11| e^{iα}   |u12| e^{iβ}  |
//!     | |u20|   |u21| e^{iγ}   |u22| e^{iδ}  |
//! ```
//!
//! in two stages: the four phases first, with magnitudes pinned to the
//! measured amplitude distribution, then all thirteen parameters together.
//! Composed reconstruction only fits the two mirror phases of
//! `W = U_B Φ(φ1, φ2) U_F` for independently known `U_F`, `U_B`.
//!
//! Visibilities and amplitudes are invariant under complex conjugation of
//! the transfer matrix, so every solution has an indistinguishable twin.
//! Comparisons against a reference go through [`compare_up_to_gauge`], which
//! reports which branch matched.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{fill_visibilities, AmplitudeDistribution, NormAxis, VisibilityMatrix};
use crate::matrix::{
    compose_general, fidelity, real_border, wrap_phase, PhaseShifts, TransferMatrix,
};
use crate::optim::{Minimum, NelderMead};
use crate::uncertainty::SigmaMatrix;

/// Grid resolution per phase for composed reconstruction.
pub const COMPOSED_GRID: usize = 24;

/// Floor on σ when weighting by inverse variance.
pub const MIN_SIGMA: f64 = 1e-3;

/// Default anchoring of the all-parameter stage to the amplitude data.
pub const DEFAULT_AMPLITUDE_WEIGHT: f64 = 100.0;

/// Magnitudes and phases of the real-bordered form, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealBorderedParams {
    pub mags: [f64; 9],
    /// `[α, β, γ, δ]` on entries (1,1), (1,2), (2,1), (2,2).
    pub phases: [f64; 4],
}

impl RealBorderedParams {
    pub fn new(mags: [f64; 9], phases: [f64; 4]) -> Result<Self> {
        if mags.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidParameter(
                "magnitudes must be finite and >= 0".into(),
            ));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("phases must be finite".into()));
        }
        Ok(Self { mags, phases })
    }

    /// Reads the parameters off a matrix already in real-bordered form.
    pub fn from_matrix(u: &TransferMatrix) -> Result<Self> {
        u.ensure_dim(3)?;
        let e = u.entries();
        let mags = std::array::from_fn(|idx| e[idx].norm());
        let phases = [e[4].arg(), e[5].arg(), e[7].arg(), e[8].arg()];
        Ok(Self { mags, phases })
    }

    /// Rescales the magnitudes so squared magnitudes sum to one along `axis`.
    pub fn normalized(mut self, axis: NormAxis) -> Self {
        normalize_mags(&mut self.mags, axis);
        self
    }
}

const PHASE_SLOTS: [usize; 4] = [4, 5, 7, 8];

fn normalize_mags(mags: &mut [f64; 9], axis: NormAxis) {
    for a in 0..3 {
        let idx = |b: usize| match axis {
            NormAxis::Rows => a * 3 + b,
            NormAxis::Columns => b * 3 + a,
        };
        let norm = (0..3).map(|b| mags[idx(b)].powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for b in 0..3 {
                mags[idx(b)] /= norm;
            }
        }
    }
}

/// Builds the real-bordered matrix. Border entries are real and
/// non-negative by construction.
pub fn params_to_matrix(p: &RealBorderedParams) -> TransferMatrix {
    let mut entries: Vec<Complex64> = p.mags.iter().map(|&m| Complex64::new(m, 0.0)).collect();
    for (slot, &phase) in PHASE_SLOTS.iter().zip(&p.phases) {
        entries[*slot] = Complex64::from_polar(p.mags[*slot], phase);
    }
    TransferMatrix::from_vec(3, entries).expect("nine finite entries")
}

/// Residual weighting for the visibility fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Plain sum of squared residuals.
    #[default]
    Uniform,
    /// Residuals divided by the target's σ (floored at [`MIN_SIGMA`]);
    /// falls back to uniform when the target has no σ.
    InverseVariance,
}

/// Which reconstruction stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Phases only, magnitudes pinned to the amplitude data.
    PhasesOnly,
    /// All thirteen parameters from every start.
    Full,
    /// Phases first, then all parameters from the best phase fit.
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Random starts added to the fixed seed lattice.
    pub restarts: usize,
    /// Iteration cap per local search.
    pub max_iters: usize,
    pub ftol: f64,
    pub seed: u64,
    pub stage: Stage,
    pub weighting: Weighting,
    /// Weight of `Σ (|u_ki|² − p_ki)²` against the measured amplitudes in
    /// the all-parameter stage. Zero fits visibilities alone.
    pub amplitude_weight: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 2000,
            ftol: 1e-10,
            seed: 0,
            stage: Stage::Both,
            weighting: Weighting::Uniform,
            amplitude_weight: DEFAULT_AMPLITUDE_WEIGHT,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.ftol.is_finite() && self.ftol > 0.0) {
            return Err(Error::InvalidParameter("ftol must be > 0".into()));
        }
        if !(self.amplitude_weight.is_finite() && self.amplitude_weight >= 0.0) {
            return Err(Error::InvalidParameter(
                "amplitude_weight must be >= 0".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    fn local(&self, step: f64, adaptive: bool) -> NelderMead {
        NelderMead {
            max_iters: self.max_iters,
            ftol: self.ftol,
            xtol: 1e-8,
            step,
            adaptive,
        }
    }

    fn rng_for(&self, start: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(start as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// Recovered matrix in real-bordered form.
    pub matrix: TransferMatrix,
    /// Unweighted sum of squared visibility residuals.
    pub objective: f64,
    /// Similarity of the model visibilities to the target.
    pub similarity: f64,
    pub restarts_used: usize,
    pub converged: bool,
    /// Set when the result has been compared to a reference: whether the
    /// conjugate branch matched it better.
    pub conjugated: Option<bool>,
    pub sigma: Option<SigmaMatrix>,
    /// Target entries that entered the fit (undefined ones are skipped).
    pub defined_entries: usize,
    /// Running best objective after each start, in start order.
    pub history: Vec<f64>,
    /// Number of starts whose local minimum matched the best value.
    pub best_hits: usize,
}

/// Sum of squared residuals against a target, skipping undefined entries.
struct Objective {
    target: [[f64; 3]; 3],
    weights: [[f64; 3]; 3],
    /// Measured `|u_ki|²` and the weight of their squared residuals.
    anchor: Option<([[f64; 3]; 3], f64)>,
}

impl Objective {
    fn new(target: &VisibilityMatrix, weighting: Weighting) -> Self {
        let mut weights = [[1.0; 3]; 3];
        if let (Weighting::InverseVariance, Some(sigma)) = (weighting, target.sigma()) {
            for r in 0..3 {
                for c in 0..3 {
                    weights[r][c] = 1.0 / sigma[r][c].max(MIN_SIGMA).powi(2);
                }
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                if target.is_undefined(r, c) {
                    weights[r][c] = 0.0;
                }
            }
        }
        Self {
            target: *target.vals(),
            weights,
            anchor: None,
        }
    }

    fn anchored(mut self, amp: &AmplitudeDistribution, weight: f64) -> Self {
        if weight > 0.0 {
            let probs = std::array::from_fn(|k| std::array::from_fn(|i| amp.get(k, i)));
            self.anchor = Some((probs, weight));
        }
        self
    }

    fn eval(&self, u: &TransferMatrix) -> f64 {
        let mut vals = [[0.0; 3]; 3];
        let mut undefined = [[false; 3]; 3];
        fill_visibilities(u, &mut vals, &mut undefined);
        let mut s = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let d = vals[r][c] - self.target[r][c];
                s += self.weights[r][c] * d * d;
            }
        }
        if let Some((probs, weight)) = &self.anchor {
            let mut a = 0.0;
            for k in 0..3 {
                for i in 0..3 {
                    let d = u.get(k, i).norm_sqr() - probs[k][i];
                    a += d * d;
                }
            }
            s += weight * a;
        }
        s
    }
}

/// Sum of squared differences between the model visibilities of `p` and
/// `target`, skipping entries the target flags undefined.
pub fn rms_objective(p: &RealBorderedParams, target: &VisibilityMatrix) -> f64 {
    Objective::new(target, Weighting::Uniform).eval(&params_to_matrix(p))
}

/// `1 − Σ|a − b| / 18`.
pub fn similarity(a: &VisibilityMatrix, b: &VisibilityMatrix) -> f64 {
    let dist: f64 = a
        .vals()
        .iter()
        .flatten()
        .zip(b.vals().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .sum();
    1.0 - dist / 18.0
}

/// Fidelity after real-bordering both matrices, maximised over conjugating
/// `b`. Returns the fidelity and whether the conjugate branch won.
pub fn compare_up_to_gauge(a: &TransferMatrix, b: &TransferMatrix) -> Result<(f64, bool)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (ra, _) = real_border(a)?;
    let (rb, _) = real_border(b)?;
    let direct = fidelity(&ra, &rb)?;
    let twin = fidelity(&ra, &rb.conj())?;
    Ok(if twin > direct {
        (twin, true)
    } else {
        (direct, false)
    })
}

fn model_similarity(u: &TransferMatrix, target: &VisibilityMatrix) -> f64 {
    let mut vals = [[0.0; 3]; 3];
    let mut undefined = [[false; 3]; 3];
    fill_visibilities(u, &mut vals, &mut undefined);
    let model = VisibilityMatrix::new(vals)
        .map(|m| m.with_undefined(undefined))
        .expect("model visibilities lie in [-1, 1]");
    similarity(&model, target)
}

fn running_best(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(f64::INFINITY, |best, &v| {
            *best = best.min(v);
            Some(*best)
        })
        .collect()
}

/// Index of the smallest value (first on ties) and how many starts reached it.
fn pick_best(mins: &[Minimum]) -> (usize, usize) {
    let best = (0..mins.len())
        .min_by(|&a, &b| mins[a].f.total_cmp(&mins[b].f))
        .expect("at least one start");
    let fb = mins[best].f;
    let tol = 1e-6 * fb.abs().max(1e-9);
    let hits = mins.iter().filter(|m| (m.f - fb).abs() <= tol).count();
    (best, hits)
}

fn is_converged(
    defined: usize,
    f: f64,
    local_converged: bool,
    hits: usize,
    cfg: &OptimizerConfig,
) -> bool {
    defined > 0 && local_converged && (f <= 100.0 * cfg.ftol || hits >= 2)
}

/// Phase seeds: the {−2π/3, 0, 2π/3}⁴ lattice, then `cfg.restarts` random
/// points, each drawn from its own substream.
fn phase_seeds(cfg: &OptimizerConfig) -> Vec<[f64; 4]> {
    let lattice = [-2.0 * PI / 3.0, 0.0, 2.0 * PI / 3.0];
    let mut seeds = Vec::with_capacity(81 + cfg.restarts);
    for a in lattice {
        for b in lattice {
            for c in lattice {
                for d in lattice {
                    seeds.push([a, b, c, d]);
                }
            }
        }
    }
    for r in 0..cfg.restarts {
        let mut rng = cfg.rng_for(r);
        seeds.push(std::array::from_fn(|_| rng.random_range(-PI..PI)));
    }
    seeds
}

fn full_params(x: &[f64], axis: NormAxis) -> RealBorderedParams {
    let mut mags: [f64; 9] = std::array::from_fn(|i| x[i].abs());
    normalize_mags(&mut mags, axis);
    RealBorderedParams {
        mags,
        phases: [x[9], x[10], x[11], x[12]],
    }
}

fn canonical_phases(mut p: RealBorderedParams) -> RealBorderedParams {
    for ph in p.phases.iter_mut() {
        *ph = wrap_phase(*ph);
    }
    p
}

/// Recovers a transfer matrix from a measured visibility matrix and
/// amplitude distribution.
///
/// A result is always returned; `converged` is false when the data carry no
/// information, the final local search hit its iteration cap, or the best
/// value is neither near zero nor reproduced by a second start.
pub fn reconstruct_direct(
    target: &VisibilityMatrix,
    amp: &AmplitudeDistribution,
    cfg: &OptimizerConfig,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    if amp.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: amp.dim(),
        });
    }
    let axis = amp.axis();
    let objective = Objective::new(target, cfg.weighting);
    let defined = target.defined_count();
    let mags0: [f64; 9] = std::array::from_fn(|idx| amp.get(idx / 3, idx % 3).max(0.0).sqrt());
    let seeds = phase_seeds(cfg);

    if defined == 0 {
        let params = RealBorderedParams {
            mags: mags0,
            phases: [0.0; 4],
        };
        let matrix = params_to_matrix(&params);
        return Ok(ReconstructionResult {
            objective: rms_objective(&params, target),
            similarity: model_similarity(&matrix, target),
            matrix,
            restarts_used: 0,
            converged: false,
            conjugated: None,
            sigma: None,
            defined_entries: 0,
            history: vec![],
            best_hits: 0,
        });
    }

    let phase_fit = |ph: &[f64]| {
        let p = RealBorderedParams {
            mags: mags0,
            phases: [ph[0], ph[1], ph[2], ph[3]],
        };
        objective.eval(&params_to_matrix(&p))
    };
    let anchored = Objective::new(target, cfg.weighting).anchored(amp, cfg.amplitude_weight);
    let full_fit = |x: &[f64]| anchored.eval(&params_to_matrix(&full_params(x, axis)));
    let stage2 = cfg.local(0.1, true);
    let stage2_rounds = 20;

    let (params, history, hits, local_ok) = match cfg.stage {
        Stage::PhasesOnly | Stage::Both => {
            let nm = cfg.local(0.5, false);
            let mins: Vec<Minimum> = seeds
                .par_iter()
                .map(|s| nm.minimize(phase_fit, s))
                .collect();
            let history = running_best(&mins.iter().map(|m| m.f).collect::<Vec<_>>());
            let (best, hits) = pick_best(&mins);
            let phases: [f64; 4] = std::array::from_fn(|i| mins[best].x[i]);
            if cfg.stage == Stage::PhasesOnly {
                let p = RealBorderedParams {
                    mags: mags0,
                    phases,
                };
                (p, history, hits, mins[best].converged)
            } else {
                let mut x0 = mags0.to_vec();
                x0.extend_from_slice(&phases);
                let m = stage2.minimize_restarting(full_fit, &x0, stage2_rounds);
                (full_params(&m.x, axis), history, hits, m.converged)
            }
        }
        Stage::Full => {
            let mins: Vec<Minimum> = seeds
                .par_iter()
                .map(|s| {
                    let mut x0 = mags0.to_vec();
                    x0.extend_from_slice(s);
                    stage2.minimize_restarting(full_fit, &x0, stage2_rounds)
                })
                .collect();
            let history = running_best(&mins.iter().map(|m| m.f).collect::<Vec<_>>());
            let (best, hits) = pick_best(&mins);
            (
                full_params(&mins[best].x, axis),
                history,
                hits,
                mins[best].converged,
            )
        }
    };

    let params = canonical_phases(params);
    let matrix = params_to_matrix(&params);
    let weighted = match cfg.stage {
        Stage::PhasesOnly => objective.eval(&matrix),
        _ => anchored.eval(&matrix),
    };
    Ok(ReconstructionResult {
        objective: rms_objective(&params, target),
        similarity: model_similarity(&matrix, target),
        matrix,
        restarts_used: seeds.len(),
        converged: is_converged(defined, weighted, local_ok, hits, cfg),
        conjugated: None,
        sigma: None,
        defined_entries: defined,
        history,
        best_hits: hits,
    })
}

/// Fits the mirror phases of `W = U_B Φ(φ1, φ2) U_F` to a measured
/// visibility matrix. Returns the phases in (−π, π], the real-bordered `W`
/// and diagnostics.
pub fn reconstruct_composed(
    uf: &TransferMatrix,
    ub: &TransferMatrix,
    target: &VisibilityMatrix,
    cfg: &OptimizerConfig,
) -> Result<(PhaseShifts, TransferMatrix, ReconstructionResult)> {
    cfg.validate()?;
    uf.ensure_dim(3)?;
    ub.ensure_dim(3)?;
    let objective = Objective::new(target, cfg.weighting);
    let defined = target.defined_count();
    let compose =
        |ph: &[f64]| compose_general(ub, PhaseShifts::new(ph[0], ph[1]), uf).expect("3x3 operands");
    let fit = |ph: &[f64]| objective.eval(&compose(ph));

    let step = 2.0 * PI / COMPOSED_GRID as f64;
    let mut grid: Vec<([f64; 2], f64)> = (0..COMPOSED_GRID * COMPOSED_GRID)
        .into_par_iter()
        .map(|idx| {
            let p = [
                -PI + step * ((idx / COMPOSED_GRID) + 1) as f64,
                -PI + step * ((idx % COMPOSED_GRID) + 1) as f64,
            ];
            (p, fit(&p))
        })
        .collect();
    // stable sort keeps grid order on ties
    grid.sort_by(|a, b| a.1.total_cmp(&b.1));
    let starts: Vec<[f64; 2]> = grid
        .iter()
        .take(cfg.restarts.min(grid.len()))
        .map(|(p, _)| *p)
        .collect();

    let nm = cfg.local(step / 2.0, false);
    let mins: Vec<Minimum> = starts.par_iter().map(|s| nm.minimize(fit, s)).collect();
    let history = running_best(&mins.iter().map(|m| m.f).collect::<Vec<_>>());
    let (best, hits) = pick_best(&mins);
    let phases = PhaseShifts::new(mins[best].x[0], mins[best].x[1]).reduced();

    let w0 = compose(&[phases.phi1, phases.phi2]);
    let w = real_border(&w0).map(|(w, _)| w).unwrap_or(w0);
    let unweighted = Objective::new(target, Weighting::Uniform).eval(&w);
    let result = ReconstructionResult {
        objective: unweighted,
        similarity: model_similarity(&w, target),
        matrix: w.clone(),
        restarts_used: starts.len(),
        converged: is_converged(defined, mins[best].f, mins[best].converged, hits, cfg),
        conjugated: None,
        sigma: None,
        defined_entries: defined,
        history,
        best_hits: hits,
    };
    Ok((phases, w, result))
}
