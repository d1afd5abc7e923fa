//! Transfer-matrix algebra.
//!
//! Row index is the output port, column index the input port. Backward
//! propagation through a device is the plain transpose of its forward matrix
//! (no conjugation): reversing a passive reciprocal element swaps the roles of
//! its ports but keeps every path amplitude.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unitarity check on constructed matrices.
pub const UNITARY_TOL: f64 = 1e-9;

/// Border entries smaller than this have no well-defined phase.
pub const GAUGE_EPS: f64 = 1e-12;

/// Square complex matrix describing a linear-optical device.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    dim: usize,
    entries: Vec<Complex64>,
    unitary: bool,
}

impl TransferMatrix {
    /// Builds a matrix from row-major entries. Measured or reconstructed data
    /// goes through here and carries no unitarity flag.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "transfer matrix needs dim >= 2, got {dim}"
            )));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        Self::from_vec(dim, entries)
    }

    pub fn from_vec(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "transfer matrix needs dim >= 2, got {dim}"
            )));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidData("non-finite matrix entry".into()));
        }
        Ok(Self {
            dim,
            entries,
            unitary: false,
        })
    }

    /// Builds a matrix from polar entries `(magnitude, phase in radians)`.
    pub fn from_polar(dim: usize, polar: &[(f64, f64)]) -> Result<Self> {
        let entries = polar
            .iter()
            .map(|&(r, th)| Complex64::from_polar(r, th))
            .collect();
        Self::from_vec(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = Complex64::new(1.0, 0.0);
        }
        Self {
            dim,
            entries,
            unitary: true,
        }
    }

    /// Permutation matrix sending input `i` to output `perm[i]`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let dim = perm.len();
        let mut seen = vec![false; dim];
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, &k) in perm.iter().enumerate() {
            if k >= dim {
                return Err(Error::IndexOutOfRange { index: k, dim });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidParameter(format!(
                    "{perm:?} is not a permutation"
                )));
            }
            entries[k * dim + i] = Complex64::new(1.0, 0.0);
        }
        let mut m = Self::from_vec(dim, entries)?;
        m.unitary = true;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Amplitude from input `input` to output `output`.
    #[inline]
    pub fn get(&self, output: usize, input: usize) -> Complex64 {
        self.entries[output * self.dim + input]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Whether the matrix was constructed as unitary (not merely close to it).
    pub fn is_flagged_unitary(&self) -> bool {
        self.unitary
    }

    #[cfg(test)]
    pub(crate) fn with_unitary_flag(mut self, unitary: bool) -> Self {
        self.unitary = unitary;
        self
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_deviation(&self) -> f64 {
        let g = self.adjoint().matmul(self).expect("square");
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((g.get(r, c) - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let entries = (0..n * n).map(|idx| self.get(idx % n, idx / n)).collect();
        Self {
            dim: n,
            entries,
            unitary: self.unitary,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
            unitary: self.unitary,
        }
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let n = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                for c in 0..n {
                    entries[r * n + c] += a * rhs.get(k, c);
                }
            }
        }
        Ok(Self {
            dim: n,
            entries,
            unitary: self.unitary && rhs.unitary,
        })
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    pub fn determinant(&self) -> Complex64 {
        // Gaussian elimination with partial pivoting.
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap();
            if a[pivot * n + col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for c in col..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= f * v;
                }
            }
        }
        det
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `diag(left) · self · diag(right)`.
    pub fn scale_diag(&self, left: &[Complex64], right: &[Complex64]) -> Result<Self> {
        let n = self.dim;
        if left.len() != n || right.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: left.len().min(right.len()),
            });
        }
        let entries = (0..n * n)
            .map(|idx| left[idx / n] * self.entries[idx] * right[idx % n])
            .collect();
        let phases_only = left
            .iter()
            .chain(right)
            .all(|z| (z.norm() - 1.0).abs() < 1e-12);
        Ok(Self {
            dim: n,
            entries,
            unitary: self.unitary && phases_only,
        })
    }

    pub(crate) fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }
}

impl Mul for &TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: Self) -> TransferMatrix {
        self.matmul(rhs).expect("matrix dimensions must agree")
    }
}

impl fmt::Display for TransferMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.entries.chunks(self.dim) {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:.3}∠{:+.3}π", z.norm(), z.arg() / PI))
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Relative phases of modes 1 and 2; mode 0 is the reference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseShifts {
    pub phi1: f64,
    pub phi2: f64,
}

impl PhaseShifts {
    pub fn new(phi1: f64, phi2: f64) -> Self {
        Self { phi1, phi2 }
    }

    /// Both phases in units of π.
    pub fn from_pi(phi1: f64, phi2: f64) -> Self {
        Self::new(phi1 * PI, phi2 * PI)
    }

    /// Phases reduced to (−π, π].
    pub fn reduced(self) -> Self {
        Self::new(wrap_phase(self.phi1), wrap_phase(self.phi2))
    }

    pub fn in_pi(self) -> (f64, f64) {
        (self.phi1 / PI, self.phi2 / PI)
    }

    /// Largest circular distance between the corresponding phases.
    pub fn distance(self, other: Self) -> f64 {
        wrap_phase(self.phi1 - other.phi1)
            .abs()
            .max(wrap_phase(self.phi2 - other.phi2).abs())
    }
}

/// Diagonal phase factors of the real-bordering transform:
/// `W = diag(e^{iφa}, e^{iφb}, e^{iφc}) · U · diag(1, e^{iφd}, e^{iφe})`.
///
/// `left` holds one phase per output port, `right` one per input port
/// excluding port 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaugePhases {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl GaugePhases {
    pub fn left_factors(&self) -> Vec<Complex64> {
        self.left.iter().map(|&p| Complex64::cis(p)).collect()
    }

    pub fn right_factors(&self) -> Vec<Complex64> {
        std::iter::once(Complex64::new(1.0, 0.0))
            .chain(self.right.iter().map(|&p| Complex64::cis(p)))
            .collect()
    }
}

/// Reduces an angle to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Parses a phase literal: plain radians (`"1.2"`) or multiples of π
/// (`"0.383pi"`, `"-pi"`, `"pi"`).
pub fn parse_phase(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse phase literal {text:?}"));
    let lower = t.to_ascii_lowercase();
    let (body, scale) = match lower.strip_suffix("pi").or_else(|| lower.strip_suffix('π')) {
        Some(b) => (b.trim_end_matches('*').to_string(), PI),
        None => (lower.clone(), 1.0),
    };
    let coeff = match body.as_str() {
        "" | "+" if scale == PI => 1.0,
        "-" if scale == PI => -1.0,
        b => b.parse::<f64>().map_err(|_| bad())?,
    };
    let v = coeff * scale;
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

/// The symmetric three-port discrete Fourier transform.
pub fn ideal_tritter() -> TransferMatrix {
    let s = 1.0 / 3f64.sqrt();
    let w = Complex64::cis(2.0 * PI / 3.0);
    let one = Complex64::new(1.0, 0.0);
    let rows = [[one, one, one], [one, w, w.conj()], [one, w.conj(), w]];
    let entries = rows.iter().flatten().map(|z| z * s).collect();
    TransferMatrix {
        dim: 3,
        entries,
        unitary: true,
    }
}

/// `diag(1, e^{iφ1}, e^{iφ2})`.
pub fn phase_matrix(ph: PhaseShifts) -> TransferMatrix {
    let mut m = TransferMatrix::identity(3);
    m.entries[4] = Complex64::cis(ph.phi1);
    m.entries[8] = Complex64::cis(ph.phi2);
    m
}

/// Directionally-biased multiport: `U_F · Φ · U_F`.
pub fn compose_biased(uf: &TransferMatrix, ph: PhaseShifts) -> Result<TransferMatrix> {
    uf.ensure_dim(3)?;
    let phi = phase_matrix(ph);
    uf.matmul(&phi)?.matmul(uf)
}

/// Directionally-unbiased multiport: `U_Fᵀ · Φ · U_F`.
pub fn compose_unbiased(uf: &TransferMatrix, ph: PhaseShifts) -> Result<TransferMatrix> {
    uf.ensure_dim(3)?;
    compose_general(&backward(uf), ph, uf)
}

/// `U_B · Φ · U_F` for an independently characterised backward pass.
pub fn compose_general(
    ub: &TransferMatrix,
    ph: PhaseShifts,
    uf: &TransferMatrix,
) -> Result<TransferMatrix> {
    ub.ensure_dim(3)?;
    uf.ensure_dim(3)?;
    ub.matmul(&phase_matrix(ph))?.matmul(uf)
}

/// Backward propagation: plain transpose, no conjugation.
pub fn backward(uf: &TransferMatrix) -> TransferMatrix {
    uf.transpose()
}

/// `|Tr(a† b)| / dim`.
pub fn fidelity(a: &TransferMatrix, b: &TransferMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let tr: Complex64 = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(tr.norm() / a.dim as f64)
}

/// Brings `u` to real-bordered form: row 0 and column 0 real and
/// non-negative. Returns the canonical matrix and the gauge phases used.
pub fn real_border(u: &TransferMatrix) -> Result<(TransferMatrix, GaugePhases)> {
    let n = u.dim;
    for k in 0..n {
        check_border(u, k, 0)?;
    }
    for i in 1..n {
        check_border(u, 0, i)?;
    }
    let left: Vec<f64> = (0..n).map(|k| -u.get(k, 0).arg()).collect();
    let right: Vec<f64> = (1..n).map(|i| -u.get(0, i).arg() - left[0]).collect();
    let gauge = GaugePhases { left, right };
    let mut w = u.scale_diag(&gauge.left_factors(), &gauge.right_factors())?;
    // Zero the rounding residue on the border so it is exactly real.
    for k in 0..n {
        w.entries[k * n] = Complex64::new(w.entries[k * n].norm(), 0.0);
    }
    for i in 1..n {
        w.entries[i] = Complex64::new(w.entries[i].norm(), 0.0);
    }
    Ok((w, gauge))
}

fn check_border(u: &TransferMatrix, row: usize, col: usize) -> Result<()> {
    let magnitude = u.get(row, col).norm();
    if magnitude < GAUGE_EPS {
        return Err(Error::DegenerateGauge {
            row,
            col,
            magnitude,
        });
    }
    Ok(())
}

/// Haar-distributed unitary from Gram-Schmidt orthonormalisation of a
/// complex Gaussian matrix. Deterministic for a given seed.
pub fn random_unitary(dim: usize, seed: u64) -> Result<TransferMatrix> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "random unitary needs dim >= 2, got {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) / 2f64.sqrt()
                })
                .collect()
        })
        .collect();
    // Modified Gram-Schmidt, two passes. The resulting R has a positive real
    // diagonal, which is the phase fix that makes Q Haar distributed.
    for j in 0..dim {
        for _ in 0..2 {
            for p in 0..j {
                let proj: Complex64 = cols[p]
                    .iter()
                    .zip(&cols[j])
                    .map(|(q, v)| q.conj() * v)
                    .sum();
                let (done, rest) = cols.split_at_mut(j);
                for (v, q) in rest[0].iter_mut().zip(&done[p]) {
                    *v -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    let entries = (0..dim * dim)
        .map(|idx| cols[idx % dim][idx / dim])
        .collect();
    Ok(TransferMatrix {
        dim,
        entries,
        unitary: true,
    })
}
