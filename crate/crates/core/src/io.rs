//! JSON and CSV formats.
//!
//! All matrices are row-major with row = output port, column = input port;
//! every document carries `"convention": "row=output,col=input"`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interference::{
    AmplitudeDistribution, CoincidenceCounts, CountTable, FringePoint, NormAxis, PortPair,
    VisibilityMatrix,
};
use crate::matrix::{PhaseShifts, TransferMatrix};
use crate::reconstruction::ReconstructionResult;
use crate::uncertainty::SigmaMatrix;

pub const CONVENTION: &str = "row=output,col=input";

fn pair_labels() -> Vec<String> {
    PortPair::CANONICAL.iter().map(PortPair::label).collect()
}

/// One matrix entry: cartesian, or polar with the phase in units of π.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryJson {
    Cartesian { re: f64, im: f64 },
    Polar { mag: f64, phase_pi: f64 },
}

impl EntryJson {
    fn value(self) -> Complex64 {
        match self {
            EntryJson::Cartesian { re, im } => Complex64::new(re, im),
            EntryJson::Polar { mag, phase_pi } => Complex64::from_polar(mag, phase_pi * PI),
        }
    }
}

/// Entrywise σ of a matrix: magnitude and phase (units of π).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSigmaJson {
    pub mag: [[f64; 3]; 3],
    pub phase_pi: [[f64; 3]; 3],
}

impl From<&SigmaMatrix> for MatrixSigmaJson {
    fn from(s: &SigmaMatrix) -> Self {
        Self {
            mag: s.mag,
            phase_pi: s.phase.map(|row| row.map(|p| p / PI)),
        }
    }
}

impl From<&MatrixSigmaJson> for SigmaMatrix {
    fn from(s: &MatrixSigmaJson) -> Self {
        Self {
            mag: s.mag,
            phase: s.phase_pi.map(|row| row.map(|p| p * PI)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub convention: String,
    pub entries: Vec<Vec<EntryJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<MatrixSigmaJson>,
}

impl MatrixJson {
    pub fn from_matrix(m: &TransferMatrix) -> Self {
        Self {
            dim: m.dim(),
            convention: CONVENTION.into(),
            entries: m
                .rows()
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|z| EntryJson::Cartesian { re: z.re, im: z.im })
                        .collect()
                })
                .collect(),
            sigma: None,
        }
    }

    pub fn to_matrix(&self) -> Result<TransferMatrix> {
        check_convention(&self.convention)?;
        if self.entries.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.entries.len(),
            });
        }
        let rows = self
            .entries
            .iter()
            .map(|row| row.iter().map(|e| e.value()).collect())
            .collect();
        TransferMatrix::from_rows(rows)
    }
}

fn check_convention(c: &str) -> Result<()> {
    if c != CONVENTION {
        return Err(Error::InvalidData(format!(
            "unsupported convention {c:?}, expected {CONVENTION:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisibilityJson {
    pub input_pairs: Vec<String>,
    pub output_pairs: Vec<String>,
    pub vals: [[f64; 3]; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined: Option<[[bool; 3]; 3]>,
}

impl VisibilityJson {
    pub fn from_matrix(v: &VisibilityMatrix) -> Self {
        let any_undefined = v.undefined().iter().flatten().any(|u| *u);
        Self {
            input_pairs: pair_labels(),
            output_pairs: pair_labels(),
            vals: *v.vals(),
            sigma: v.sigma().copied(),
            undefined: any_undefined.then(|| *v.undefined()),
        }
    }

    pub fn to_matrix(&self) -> Result<VisibilityMatrix> {
        if self.input_pairs != pair_labels() || self.output_pairs != pair_labels() {
            return Err(Error::InvalidData(
                "visibility pairs must be [\"01\", \"02\", \"12\"]".into(),
            ));
        }
        let mut v = VisibilityMatrix::new(self.vals)?;
        if let Some(s) = self.sigma {
            v = v.with_sigma(s)?;
        }
        if let Some(u) = self.undefined {
            v = v.with_undefined(u);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmplitudeJson {
    pub dim: usize,
    pub convention: String,
    pub probs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    /// Axis that sums to one; detected on load when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<NormAxis>,
}

impl AmplitudeJson {
    pub fn from_distribution(a: &AmplitudeDistribution) -> Self {
        Self {
            dim: a.dim(),
            convention: CONVENTION.into(),
            probs: a.probs().to_vec(),
            sigma: a.sigma().map(|s| s.to_vec()),
            axis: Some(a.axis()),
        }
    }

    pub fn to_distribution(&self) -> Result<AmplitudeDistribution> {
        check_convention(&self.convention)?;
        if self.probs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.probs.len(),
            });
        }
        let a = AmplitudeDistribution::measured(self.probs.clone(), self.sigma.clone())?;
        if let Some(axis) = self.axis {
            if a.sum_deviation(axis) > crate::interference::MEASURED_SUM_TOL {
                return Err(Error::InvalidData(format!(
                    "amplitudes do not sum to one along declared axis {axis:?}"
                )));
            }
            if axis != a.axis() {
                return Ok(AmplitudeDistribution::perturbed(self.probs.clone(), axis)
                    .with_sigma_opt(self.sigma.clone()));
            }
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoincidenceJson {
    pub inputs: String,
    pub outputs: String,
    pub distinguishable: u64,
    pub indistinguishable: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountTableJson {
    pub singles: [[u64; 3]; 3],
    pub coincidences: Vec<CoincidenceJson>,
}

impl CountTableJson {
    pub fn from_table(t: &CountTable) -> Self {
        Self {
            singles: t.singles,
            coincidences: t
                .coincidences
                .iter()
                .map(|c| CoincidenceJson {
                    inputs: c.inputs.label(),
                    outputs: c.outputs.label(),
                    distinguishable: c.distinguishable,
                    indistinguishable: c.indistinguishable,
                })
                .collect(),
        }
    }

    pub fn to_table(&self) -> Result<CountTable> {
        let coincidences = self
            .coincidences
            .iter()
            .map(|c| {
                Ok(CoincidenceCounts {
                    inputs: PortPair::parse(&c.inputs)?,
                    outputs: PortPair::parse(&c.outputs)?,
                    distinguishable: c.distinguishable,
                    indistinguishable: c.indistinguishable,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let t = CountTable {
            singles: self.singles,
            coincidences,
        };
        t.validate()?;
        Ok(t)
    }
}

/// Phases in radians, or in units of π with optional σ.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhasesJson {
    Radians {
        phi1: f64,
        phi2: f64,
    },
    PiUnits {
        phi1_pi: f64,
        phi2_pi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_pi: Option<[f64; 2]>,
    },
}

impl PhasesJson {
    pub fn phases(&self) -> PhaseShifts {
        match *self {
            PhasesJson::Radians { phi1, phi2 } => PhaseShifts::new(phi1, phi2),
            PhasesJson::PiUnits {
                phi1_pi, phi2_pi, ..
            } => PhaseShifts::from_pi(phi1_pi, phi2_pi),
        }
    }

    /// Stated σ in radians, if any.
    pub fn sigma(&self) -> Option<[f64; 2]> {
        match *self {
            PhasesJson::PiUnits {
                sigma_pi: Some([a, b]),
                ..
            } => Some([a * PI, b * PI]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionJson {
    pub matrix: MatrixJson,
    pub objective: f64,
    pub similarity: f64,
    pub converged: bool,
    pub restarts_used: usize,
    pub conjugated: Option<bool>,
    pub defined_entries: usize,
    pub best_hits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseShifts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<MatrixSigmaJson>,
}

impl ReconstructionJson {
    pub fn from_result(r: &ReconstructionResult, phases: Option<PhaseShifts>) -> Self {
        Self {
            matrix: MatrixJson::from_matrix(&r.matrix),
            objective: r.objective,
            similarity: r.similarity,
            converged: r.converged,
            restarts_used: r.restarts_used,
            conjugated: r.conjugated,
            defined_entries: r.defined_entries,
            best_hits: r.best_hits,
            phases,
            sigma: r.sigma.as_ref().map(MatrixSigmaJson::from),
        }
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn parse_matrix(text: &str) -> Result<TransferMatrix> {
    serde_json::from_str::<MatrixJson>(text)?.to_matrix()
}

pub fn read_matrix(path: &Path) -> Result<TransferMatrix> {
    read_json::<MatrixJson>(path)?.to_matrix()
}

pub fn write_matrix(path: &Path, m: &TransferMatrix) -> Result<()> {
    write_json(path, &MatrixJson::from_matrix(m))
}

pub fn read_visibility(path: &Path, transpose: bool) -> Result<VisibilityMatrix> {
    let v = read_json::<VisibilityJson>(path)?.to_matrix()?;
    Ok(if transpose { v.transposed() } else { v })
}

pub fn write_visibility(path: &Path, v: &VisibilityMatrix) -> Result<()> {
    write_json(path, &VisibilityJson::from_matrix(v))
}

pub fn read_amplitude(path: &Path, transpose: bool) -> Result<AmplitudeDistribution> {
    let a = read_json::<AmplitudeJson>(path)?.to_distribution()?;
    Ok(if transpose { a.transposed() } else { a })
}

pub fn write_amplitude(path: &Path, a: &AmplitudeDistribution) -> Result<()> {
    write_json(path, &AmplitudeJson::from_distribution(a))
}

pub fn read_counts(path: &Path) -> Result<CountTable> {
    read_json::<CountTableJson>(path)?.to_table()
}

pub fn write_counts(path: &Path, t: &CountTable) -> Result<()> {
    write_json(path, &CountTableJson::from_table(t))
}

pub fn read_phases(path: &Path) -> Result<PhaseShifts> {
    Ok(read_json::<PhasesJson>(path)?.phases())
}

/// `delay_um,expected,counts`, one row per delay point.
pub fn fringe_csv(points: &[FringePoint], counts: &[u64]) -> String {
    let mut out = String::from("delay_um,expected,counts\n");
    for (p, c) in points.iter().zip(counts) {
        out.push_str(&format!("{},{},{}\n", p.delay_um, p.expected, c));
    }
    out
}

/// Hex SHA-256 of some bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
