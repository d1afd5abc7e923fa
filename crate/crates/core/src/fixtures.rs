//! Published measurement tables of a fibre-tritter multiport, bundled as
//! data files with their recorded SHA-256 digests.
//!
//! Values are stored with exactly the three printed decimal digits; phases
//! are in units of π.

use std::path::Path;

use crate::error::{Error, Result};
use crate::interference::{AmplitudeDistribution, VisibilityMatrix};
use crate::io::{self, AmplitudeJson, MatrixJson, PhasesJson, VisibilityJson};
use crate::matrix::{PhaseShifts, TransferMatrix};
use crate::uncertainty::SigmaMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Matrix,
    Visibility,
    Amplitude,
    Phases,
}

#[derive(Debug, Clone, Copy)]
pub struct FixtureFile {
    pub name: &'static str,
    pub file: &'static str,
    pub kind: FixtureKind,
    pub description: &'static str,
    pub contents: &'static str,
    pub sha256: &'static str,
}

macro_rules! fixture {
    ($name:literal, $kind:ident, $desc:literal, $sha:literal) => {
        FixtureFile {
            name: $name,
            file: concat!($name, ".json"),
            kind: FixtureKind::$kind,
            description: $desc,
            contents: include_str!(concat!("../fixtures/", $name, ".json")),
            sha256: $sha,
        }
    };
}

pub const FILES: &[FixtureFile] = &[
    fixture!(
        "v_m",
        Visibility,
        "unbiased multiport: measured HOM visibility matrix with sigma",
        "061e73377c415fdbdf7e1a40ae4414fd38b3f1ff56b2e67a69c52f847aacf318"
    ),
    fixture!(
        "u_m",
        Amplitude,
        "unbiased multiport: measured amplitude distribution with sigma",
        "8aa2381aafcab2098fc74daa18d88f4b66fb359490a4a6fdfd6a6e2b3f258d6c"
    ),
    fixture!(
        "v",
        Matrix,
        "unbiased multiport: directly reconstructed transfer matrix V with sigma",
        "ab0b281f60e0e91ee14a8bc4784f1b5504feb4db7c06ef162c7d4204a569b1c9"
    ),
    fixture!(
        "u_f",
        Matrix,
        "tritter, forward direction: reconstructed transfer matrix with sigma",
        "9418a04d7672ed33851dc9e6e62dfd86350344eed73e820e238214621cfb855d"
    ),
    fixture!(
        "u_b",
        Matrix,
        "tritter, backward direction: reconstructed transfer matrix with sigma",
        "977c693803ade5d9e0ec7c51f4f33ca91a301fd57dc29f359570f02afb91acde"
    ),
    fixture!(
        "w",
        Matrix,
        "unbiased multiport: real-bordered composed matrix W as printed, with sigma",
        "b26147b84483e4c06df167d22c3e29d860014adc0d28010f0bb2e4dae6e586e4"
    ),
    fixture!(
        "v_f",
        Visibility,
        "tritter, forward direction: measured HOM visibility matrix with sigma",
        "ddfb8c626dd47bd64d42187334def3b743eed7c34e1096aaad8d827a4d5f5f20"
    ),
    fixture!(
        "u_f2",
        Amplitude,
        "tritter, forward direction: measured amplitude distribution with sigma",
        "aa1b35c236c29304d0a0d51fd88960c56c9b0335a5319d6d0bf6fa2676597427"
    ),
    fixture!(
        "v_b",
        Visibility,
        "tritter, backward direction: measured HOM visibility matrix with sigma",
        "395aa84346eccb4ae79b2916d8dd45830d2248efae5e65280257ef8ea9bc46db"
    ),
    fixture!(
        "u_b2",
        Amplitude,
        "tritter, backward direction: measured amplitude distribution with sigma",
        "14ab4a28f658664d4c1a0eebf04705d2edc86fa452239cfc9c2c9a1b6f31c07c"
    ),
    fixture!(
        "phases",
        Phases,
        "unbiased multiport: fitted mirror phases [phi1, phi2] with sigma",
        "4cdf41472c72e4d349fb9e4fac089b6de5c9bc86108e043cd637f9cb5c5d9cff"
    ),
];

pub fn find(name: &str) -> Option<&'static FixtureFile> {
    FILES.iter().find(|f| f.name == name)
}

impl FixtureFile {
    pub fn digest(&self) -> String {
        io::sha256_hex(self.contents.as_bytes())
    }

    pub fn verify_digest(&self) -> Result<()> {
        let got = self.digest();
        if got != self.sha256 {
            return Err(Error::InvalidData(format!(
                "fixture {} digest {got} does not match recorded {}",
                self.name, self.sha256
            )));
        }
        Ok(())
    }
}

/// A transfer matrix together with its published entrywise σ.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFixture {
    pub matrix: TransferMatrix,
    pub sigma: Option<SigmaMatrix>,
}

#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub v_m: VisibilityMatrix,
    pub u_m: AmplitudeDistribution,
    pub v: MatrixFixture,
    pub u_f: MatrixFixture,
    pub u_b: MatrixFixture,
    pub w: MatrixFixture,
    pub v_f: VisibilityMatrix,
    pub u_f2: AmplitudeDistribution,
    pub v_b: VisibilityMatrix,
    pub u_b2: AmplitudeDistribution,
    pub phases: PhaseShifts,
    /// One-σ errors of `phases`, radians.
    pub phases_sigma: [f64; 2],
}

fn parse_matrix(name: &str) -> Result<MatrixFixture> {
    let doc: MatrixJson = serde_json::from_str(contents(name))?;
    Ok(MatrixFixture {
        matrix: doc.to_matrix()?,
        sigma: doc.sigma.as_ref().map(SigmaMatrix::from),
    })
}

fn parse_visibility(name: &str) -> Result<VisibilityMatrix> {
    serde_json::from_str::<VisibilityJson>(contents(name))?.to_matrix()
}

fn parse_amplitude(name: &str) -> Result<AmplitudeDistribution> {
    serde_json::from_str::<AmplitudeJson>(contents(name))?.to_distribution()
}

fn contents(name: &str) -> &'static str {
    find(name).expect("bundled fixture").contents
}

impl FixtureSet {
    /// Parses every bundled fixture after checking its digest. Loading
    /// re-validates visibility ranges and amplitude row sums.
    pub fn load() -> Result<Self> {
        for f in FILES {
            f.verify_digest()?;
        }
        let phases: PhasesJson = serde_json::from_str(contents("phases"))?;
        Ok(Self {
            v_m: parse_visibility("v_m")?,
            u_m: parse_amplitude("u_m")?,
            v: parse_matrix("v")?,
            u_f: parse_matrix("u_f")?,
            u_b: parse_matrix("u_b")?,
            w: parse_matrix("w")?,
            v_f: parse_visibility("v_f")?,
            u_f2: parse_amplitude("u_f2")?,
            v_b: parse_visibility("v_b")?,
            u_b2: parse_amplitude("u_b2")?,
            phases: phases.phases(),
            phases_sigma: phases.sigma().unwrap_or([0.0; 2]),
        })
    }
}

/// Writes every fixture file into `dir`.
pub fn export(dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    FILES
        .iter()
        .map(|f| {
            let path = dir.join(f.file);
            io::write_text(&path, f.contents)?;
            Ok(path.display().to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn digests_match() {
        for f in FILES {
            f.verify_digest().unwrap();
        }
    }

    #[test]
    fn all_fixtures_load() {
        let fx = FixtureSet::load().unwrap();
        assert_eq!(fx.v_m.get(0, 0), -0.176);
        assert_eq!(fx.v_m.sigma().unwrap()[1][0], 0.083);
        assert_eq!(fx.u_m.get(2, 0), 0.679);
        assert!((fx.v.matrix.get(1, 1).arg() - 0.437 * PI).abs() < 1e-12);
        assert!((fx.v.matrix.get(1, 1).norm() - 0.783).abs() < 1e-12);
        assert_eq!(fx.v.matrix.get(0, 2).re, 0.807);
        assert!((fx.w.sigma.unwrap().phase[2][2] - 0.297 * PI).abs() < 1e-12);
        assert!((fx.phases.phi1 - 0.383 * PI).abs() < 1e-12);
        assert!((fx.phases_sigma[1] - 0.010 * PI).abs() < 1e-12);
    }

    #[test]
    fn every_fixture_is_listed_once() {
        let mut names: Vec<_> = FILES.iter().map(|f| f.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), FILES.len());
        assert!(find("v_m").is_some());
        assert!(find("nope").is_none());
    }
}
