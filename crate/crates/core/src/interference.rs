//! Forward model: amplitude distributions, two-photon coincidences and
//! Hong-Ou-Mandel visibilities.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;

/// Coincidence probabilities at or below this leave the visibility undefined.
pub const VISIBILITY_EPS: f64 = 1e-12;

/// Row-sum tolerance for model-generated amplitude distributions.
pub const MODEL_SUM_TOL: f64 = 1e-6;

/// Row-sum tolerance for measured amplitude distributions.
pub const MEASURED_SUM_TOL: f64 = 0.05;

/// Coherence length of the down-converted photons, read as a FWHM.
pub const COHERENCE_LENGTH_UM: f64 = 440.0;

/// Unordered pair of distinct ports, stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortPair {
    pub lo: usize,
    pub hi: usize,
}

impl PortPair {
    /// Canonical order of the three pairs of a 3-port device.
    pub const CANONICAL: [PortPair; 3] = [
        PortPair { lo: 0, hi: 1 },
        PortPair { lo: 0, hi: 2 },
        PortPair { lo: 1, hi: 2 },
    ];

    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::EqualIndices(a));
        }
        Ok(Self {
            lo: a.min(b),
            hi: a.max(b),
        })
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.lo, self.hi)
    }

    /// Position of this pair in [`PortPair::CANONICAL`].
    pub fn canonical_index(&self) -> Option<usize> {
        Self::CANONICAL.iter().position(|p| p == self)
    }

    /// Parses a two-digit label such as `"01"`.
    pub fn parse(label: &str) -> Result<Self> {
        let digits: Vec<usize> = label
            .trim()
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidParameter(format!("bad port pair {label:?}")))?;
        match digits.as_slice() {
            [a, b] => Self::new(*a, *b),
            _ => Err(Error::InvalidParameter(format!("bad port pair {label:?}"))),
        }
    }
}

impl fmt::Display for PortPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.lo, self.hi)
    }
}

/// Which axis of an amplitude distribution sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormAxis {
    /// Each row (fixed output port) sums to one.
    Rows,
    /// Each column (fixed input port) sums to one.
    #[default]
    Columns,
}

/// Single-photon output probabilities, indexed `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeDistribution {
    dim: usize,
    probs: Vec<Vec<f64>>,
    sigma: Option<Vec<Vec<f64>>>,
    axis: NormAxis,
}

impl AmplitudeDistribution {
    /// Wraps model-generated probabilities; the given axis must sum to one
    /// within [`MODEL_SUM_TOL`].
    pub fn model(probs: Vec<Vec<f64>>, axis: NormAxis) -> Result<Self> {
        let dist = Self::unchecked(probs, None, axis)?;
        let dev = dist.sum_deviation(axis);
        if dev > MODEL_SUM_TOL {
            return Err(Error::InvalidData(format!(
                "amplitude sums deviate from 1 by {dev:.3e}"
            )));
        }
        Ok(dist)
    }

    /// Wraps measured probabilities. The normalisation axis is whichever is
    /// closer to stochastic; it must lie within [`MEASURED_SUM_TOL`].
    pub fn measured(probs: Vec<Vec<f64>>, sigma: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let mut dist = Self::unchecked(probs, sigma, NormAxis::Rows)?;
        let rows = dist.sum_deviation(NormAxis::Rows);
        let cols = dist.sum_deviation(NormAxis::Columns);
        dist.axis = if rows <= cols {
            NormAxis::Rows
        } else {
            NormAxis::Columns
        };
        let dev = rows.min(cols);
        if dev > MEASURED_SUM_TOL {
            return Err(Error::InvalidData(format!(
                "measured amplitudes are not stochastic along either axis (deviation {dev:.3})"
            )));
        }
        Ok(dist)
    }

    fn unchecked(
        probs: Vec<Vec<f64>>,
        sigma: Option<Vec<Vec<f64>>>,
        axis: NormAxis,
    ) -> Result<Self> {
        let dim = probs.len();
        check_square(&probs, dim)?;
        if let Some(s) = &sigma {
            check_square(s, dim)?;
            if s.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidData(
                    "sigma entries must be finite and >= 0".into(),
                ));
            }
        }
        if probs
            .iter()
            .flatten()
            .any(|p| !p.is_finite() || !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidData(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            dim,
            probs,
            sigma,
            axis,
        })
    }

    /// Noisy resample of measured data; skips the row-sum check.
    pub(crate) fn perturbed(probs: Vec<Vec<f64>>, axis: NormAxis) -> Self {
        Self {
            dim: probs.len(),
            probs,
            sigma: None,
            axis,
        }
    }

    pub(crate) fn with_sigma_opt(mut self, sigma: Option<Vec<Vec<f64>>>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Probability that a photon entering `input` leaves from `output`.
    pub fn get(&self, output: usize, input: usize) -> f64 {
        self.probs[output][input]
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn sigma(&self) -> Option<&[Vec<f64>]> {
        self.sigma.as_deref()
    }

    pub fn axis(&self) -> NormAxis {
        self.axis
    }

    pub fn with_sigma(mut self, sigma: Vec<Vec<f64>>) -> Result<Self> {
        check_square(&sigma, self.dim)?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    /// Swaps the output/input roles, for data recorded the other way round.
    pub fn transposed(&self) -> Self {
        let t = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..self.dim)
                .map(|r| (0..self.dim).map(|c| m[c][r]).collect())
                .collect()
        };
        Self {
            dim: self.dim,
            probs: t(&self.probs),
            sigma: self.sigma.as_deref().map(t),
            axis: match self.axis {
                NormAxis::Rows => NormAxis::Columns,
                NormAxis::Columns => NormAxis::Rows,
            },
        }
    }

    /// Largest `|Σ − 1|` along `axis`.
    pub fn sum_deviation(&self, axis: NormAxis) -> f64 {
        (0..self.dim)
            .map(|a| {
                let s: f64 = match axis {
                    NormAxis::Rows => self.probs[a].iter().sum(),
                    NormAxis::Columns => self.probs.iter().map(|r| r[a]).sum(),
                };
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_square(m: &[Vec<f64>], dim: usize) -> Result<()> {
    if m.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.len(),
        });
    }
    for row in m {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
    }
    Ok(())
}

/// One HOM visibility value. `undefined` marks a vanishing distinguishable
/// coincidence probability, in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visibility {
    pub value: f64,
    pub undefined: bool,
}

/// 3×3 visibility matrix: rows are input pairs, columns output pairs, both
/// in [`PortPair::CANONICAL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMatrix {
    vals: [[f64; 3]; 3],
    sigma: Option<[[f64; 3]; 3]>,
    undefined: [[bool; 3]; 3],
}

impl VisibilityMatrix {
    pub fn new(vals: [[f64; 3]; 3]) -> Result<Self> {
        for v in vals.iter().flatten() {
            if !v.is_finite() || !(-1.0..=1.0).contains(v) {
                return Err(Error::InvalidData(format!(
                    "visibility {v} outside [-1, 1]"
                )));
            }
        }
        Ok(Self {
            vals,
            sigma: None,
            undefined: [[false; 3]; 3],
        })
    }

    pub fn with_sigma(mut self, sigma: [[f64; 3]; 3]) -> Result<Self> {
        if sigma
            .iter()
            .flatten()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::InvalidData(
                "sigma entries must be finite and >= 0".into(),
            ));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn with_undefined(mut self, undefined: [[bool; 3]; 3]) -> Self {
        for (r, row) in undefined.iter().enumerate() {
            for (c, &u) in row.iter().enumerate() {
                if u {
                    self.vals[r][c] = 0.0;
                }
            }
        }
        self.undefined = undefined;
        self
    }

    pub fn vals(&self) -> &[[f64; 3]; 3] {
        &self.vals
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.vals[row][col]
    }

    pub fn sigma(&self) -> Option<&[[f64; 3]; 3]> {
        self.sigma.as_ref()
    }

    pub fn undefined(&self) -> &[[bool; 3]; 3] {
        &self.undefined
    }

    pub fn is_undefined(&self, row: usize, col: usize) -> bool {
        self.undefined[row][col]
    }

    /// Number of entries carrying information.
    pub fn defined_count(&self) -> usize {
        self.undefined.iter().flatten().filter(|u| !**u).count()
    }

    pub fn transposed(&self) -> Self {
        let t = |m: &[[f64; 3]; 3]| -> [[f64; 3]; 3] {
            std::array::from_fn(|r| std::array::from_fn(|c| m[c][r]))
        };
        Self {
            vals: t(&self.vals),
            sigma: self.sigma.as_ref().map(t),
            undefined: std::array::from_fn(|r| std::array::from_fn(|c| self.undefined[c][r])),
        }
    }
}

/// Number of counts for one input pair / output pair combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoincidenceCounts {
    pub inputs: PortPair,
    pub outputs: PortPair,
    pub distinguishable: u64,
    pub indistinguishable: u64,
}

/// Raw detector counts for a 3-port device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    /// `singles[i][k]`: counts at output `k` for a photon sent into input `i`.
    pub singles: [[u64; 3]; 3],
    /// One record per (input pair, output pair), in canonical order.
    pub coincidences: Vec<CoincidenceCounts>,
}

impl CountTable {
    /// Checks that the coincidence records cover every canonical pair
    /// combination exactly once and in order.
    pub fn validate(&self) -> Result<()> {
        if self.coincidences.len() != 9 {
            return Err(Error::InvalidData(format!(
                "expected 9 coincidence records, found {}",
                self.coincidences.len()
            )));
        }
        for (idx, rec) in self.coincidences.iter().enumerate() {
            let want_in = PortPair::CANONICAL[idx / 3];
            let want_out = PortPair::CANONICAL[idx % 3];
            if rec.inputs != want_in || rec.outputs != want_out {
                return Err(Error::InvalidData(format!(
                    "coincidence record {idx} is {}:{}, expected {want_in}:{want_out}",
                    rec.inputs, rec.outputs
                )));
            }
        }
        Ok(())
    }

    pub fn coincidence(&self, inputs: PortPair, outputs: PortPair) -> Option<&CoincidenceCounts> {
        self.coincidences
            .iter()
            .find(|r| r.inputs == inputs && r.outputs == outputs)
    }

    /// Visibilities estimated from the counts, with Poisson error bars.
    pub fn visibility_matrix(&self) -> Result<VisibilityMatrix> {
        self.validate()?;
        let mut vals = [[0.0; 3]; 3];
        let mut sigma = [[0.0; 3]; 3];
        let mut undefined = [[false; 3]; 3];
        for (idx, rec) in self.coincidences.iter().enumerate() {
            let (r, c) = (idx / 3, idx % 3);
            let cd = rec.distinguishable as f64;
            let qd = rec.indistinguishable as f64;
            if rec.distinguishable == 0 {
                undefined[r][c] = true;
                continue;
            }
            vals[r][c] = ((cd - qd) / cd).clamp(-1.0, 1.0);
            let ratio = qd / cd;
            let rel = (1.0 / cd + if qd > 0.0 { 1.0 / qd } else { 0.0 }).sqrt();
            sigma[r][c] = ratio * rel;
        }
        Ok(VisibilityMatrix::new(vals)?
            .with_sigma(sigma)?
            .with_undefined(undefined))
    }
}

/// `|u_ki|²` for every output `k` and input `i`.
pub fn amplitude_distribution(u: &TransferMatrix) -> AmplitudeDistribution {
    let n = u.dim();
    let probs = (0..n)
        .map(|k| (0..n).map(|i| u.get(k, i).norm_sqr().min(1.0)).collect())
        .collect();
    AmplitudeDistribution {
        dim: n,
        probs,
        sigma: None,
        axis: NormAxis::Columns,
    }
}

/// Single-photon counts normalised over outputs for each input.
pub fn normalize_counts(c: &CountTable) -> Result<AmplitudeDistribution> {
    let mut probs = vec![vec![0.0; 3]; 3];
    let mut sigma = vec![vec![0.0; 3]; 3];
    for (i, row) in c.singles.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput(i));
        }
        let n = total as f64;
        for (k, &count) in row.iter().enumerate() {
            let p = count as f64 / n;
            probs[k][i] = p;
            sigma[k][i] = (p * (1.0 - p) / n).sqrt();
        }
    }
    Ok(AmplitudeDistribution {
        dim: 3,
        probs,
        sigma: Some(sigma),
        axis: NormAxis::Columns,
    })
}

fn check_ports(u: &TransferMatrix, ports: [usize; 4]) -> Result<()> {
    let n = u.dim();
    for p in ports {
        if p >= n {
            return Err(Error::IndexOutOfRange { index: p, dim: n });
        }
    }
    if ports[0] == ports[1] {
        return Err(Error::EqualIndices(ports[0]));
    }
    if ports[2] == ports[3] {
        return Err(Error::EqualIndices(ports[2]));
    }
    Ok(())
}

/// Coincidence probability at outputs `k`, `l` for distinguishable photons
/// entering `i`, `j`.
pub fn coincidence_distinguishable(
    u: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    check_ports(u, [i, j, k, l])?;
    Ok(distinguishable_unchecked(u, i, j, k, l))
}

/// Coincidence probability at outputs `k`, `l` for indistinguishable photons
/// entering `i`, `j`.
pub fn coincidence_indistinguishable(
    u: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    check_ports(u, [i, j, k, l])?;
    Ok(indistinguishable_unchecked(u, i, j, k, l))
}

#[inline]
fn distinguishable_unchecked(u: &TransferMatrix, i: usize, j: usize, k: usize, l: usize) -> f64 {
    (u.get(k, i) * u.get(l, j)).norm_sqr() + (u.get(l, i) * u.get(k, j)).norm_sqr()
}

#[inline]
fn indistinguishable_unchecked(u: &TransferMatrix, i: usize, j: usize, k: usize, l: usize) -> f64 {
    (u.get(k, i) * u.get(l, j) + u.get(l, i) * u.get(k, j)).norm_sqr()
}

/// `(c − q) / c`; positive for a dip, negative for a peak.
pub fn visibility(c: f64, q: f64) -> Visibility {
    if c <= VISIBILITY_EPS {
        Visibility {
            value: 0.0,
            undefined: true,
        }
    } else {
        Visibility {
            value: (c - q) / c,
            undefined: false,
        }
    }
}

/// Model visibility matrix of a 3×3 transfer matrix.
pub fn visibility_matrix(u: &TransferMatrix) -> Result<VisibilityMatrix> {
    u.ensure_dim(3)?;
    let mut vals = [[0.0; 3]; 3];
    let mut undefined = [[false; 3]; 3];
    fill_visibilities(u, &mut vals, &mut undefined);
    Ok(VisibilityMatrix {
        vals,
        sigma: None,
        undefined,
    })
}

/// Allocation-free core of [`visibility_matrix`], used on optimiser hot paths.
pub(crate) fn fill_visibilities(
    u: &TransferMatrix,
    vals: &mut [[f64; 3]; 3],
    undefined: &mut [[bool; 3]; 3],
) {
    for (r, inp) in PortPair::CANONICAL.iter().enumerate() {
        for (c, out) in PortPair::CANONICAL.iter().enumerate() {
            let cd = distinguishable_unchecked(u, inp.lo, inp.hi, out.lo, out.hi);
            let qd = indistinguishable_unchecked(u, inp.lo, inp.hi, out.lo, out.hi);
            let v = visibility(cd, qd);
            vals[r][c] = v.value;
            undefined[r][c] = v.undefined;
        }
    }
}

/// Gaussian-envelope model of a delay scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeModel {
    /// Envelope standard deviation in micrometres.
    pub coherence_sigma: f64,
    /// Expected total coincidences per delay point.
    pub rate: f64,
}

impl FringeModel {
    pub fn new(coherence_sigma: f64, rate: f64) -> Result<Self> {
        if !(coherence_sigma.is_finite() && coherence_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coherence sigma must be > 0, got {coherence_sigma}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rate must be > 0, got {rate}"
            )));
        }
        Ok(Self {
            coherence_sigma,
            rate,
        })
    }

    /// Standard deviation matching a FWHM coherence length.
    pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
        fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }
}

impl Default for FringeModel {
    fn default() -> Self {
        Self {
            coherence_sigma: Self::sigma_from_fwhm(COHERENCE_LENGTH_UM),
            rate: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    pub delay_um: f64,
    pub expected: f64,
}

/// Expected coincidences against delay:
/// `rate · [C − (C − Q)·exp(−Δ²/2σ²)]`.
pub fn fringe(
    u: &TransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    delays: &[f64],
    fm: &FringeModel,
) -> Result<Vec<FringePoint>> {
    let fm = FringeModel::new(fm.coherence_sigma, fm.rate)?;
    let c = coincidence_distinguishable(u, i, j, k, l)?;
    let q = coincidence_indistinguishable(u, i, j, k, l)?;
    let two_var = 2.0 * fm.coherence_sigma * fm.coherence_sigma;
    Ok(delays
        .iter()
        .map(|&d| FringePoint {
            delay_um: d,
            expected: fm.rate * (c - (c - q) * (-d * d / two_var).exp()),
        })
        .collect())
}

/// Poisson draw with the given mean; zero mean gives zero.
pub(crate) fn poisson_draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let x: f64 = d.sample(rng);
    x as u64
}

/// Poisson-sampled counts for each fringe point.
pub fn sample_fringe_counts(points: &[FringePoint], seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points
        .iter()
        .map(|p| poisson_draw(&mut rng, p.expected))
        .collect()
}

/// Synthetic detector counts for `u`, scaled to `totals` events per input
/// configuration. With `poisson = false` every count is its rounded mean.
pub fn synth_counts(
    u: &TransferMatrix,
    totals: u64,
    seed: u64,
    poisson: bool,
) -> Result<CountTable> {
    u.ensure_dim(3)?;
    if totals == 0 {
        return Err(Error::InvalidParameter("totals must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = totals as f64;
    let mut draw = |mean: f64| -> u64 {
        if poisson {
            poisson_draw(&mut rng, mean)
        } else {
            mean.round() as u64
        }
    };
    let mut singles = [[0u64; 3]; 3];
    for (i, row) in singles.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            *cell = draw(n * u.get(k, i).norm_sqr());
        }
    }
    let mut coincidences = Vec::with_capacity(9);
    for inputs in PortPair::CANONICAL {
        for outputs in PortPair::CANONICAL {
            let c = distinguishable_unchecked(u, inputs.lo, inputs.hi, outputs.lo, outputs.hi);
            let q = indistinguishable_unchecked(u, inputs.lo, inputs.hi, outputs.lo, outputs.hi);
            coincidences.push(CoincidenceCounts {
                inputs,
                outputs,
                distinguishable: draw(n * c),
                indistinguishable: draw(n * q),
            });
        }
    }
    Ok(CountTable {
        singles,
        coincidences,
    })
}
