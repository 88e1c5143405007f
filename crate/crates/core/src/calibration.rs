//! Stored constants for the inequalities whose constants are only known to
//! exist. The file is CSV with columns `constant_name,value,commit_note`;
//! the note records how the value was obtained and may contain commas.

use std::fmt;

use crate::error::VerificationError;

pub const C_GN: &str = "c_gn";
pub const C_BERNSTEIN_LINF: &str = "c_bernstein_linf";
pub const C_BERNSTEIN_GRAD: &str = "c_bernstein_grad";
pub const C_SDS: &str = "c_sds";
pub const C_LP_TRAJ: &str = "c_lp_traj";
pub const C_GROWTH: &str = "c_growth";
pub const K_GRONWALL: &str = "k_gronwall";

/// Every constant a complete calibration file must define.
pub const REQUIRED: [&str; 7] = [C_GN, C_BERNSTEIN_LINF, C_BERNSTEIN_GRAD, C_SDS, C_LP_TRAJ, C_GROWTH, K_GRONWALL];

/// Factor applied to measured suprema before they are stored.
pub const SAFETY_FACTOR: f64 = 1.25;

const HEADER: &str = "constant_name,value,commit_note";
const BUILTIN: &str = include_str!("../data/calibration.csv");

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationEntry {
    pub name: String,
    pub value: f64,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Calibration {
    entries: Vec<CalibrationEntry>,
}

impl Calibration {
    /// The constants shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled calibration file is valid")
    }

    pub fn parse(text: &str) -> Result<Self, VerificationError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            found => {
                return Err(VerificationError::MalformedCalibration {
                    line: found.map_or(1, |(i, _)| i + 1),
                    reason: format!("expected header `{HEADER}`"),
                })
            }
        }
        let mut cal = Calibration::default();
        for (i, line) in lines {
            let bad = |reason: String| VerificationError::MalformedCalibration { line: i + 1, reason };
            let mut parts = line.splitn(3, ',');
            let name = parts.next().unwrap_or("").trim();
            let value = parts.next().ok_or_else(|| bad("missing value".into()))?.trim();
            let note = parts.next().unwrap_or("").trim();
            if name.is_empty() {
                return Err(bad("empty constant name".into()));
            }
            let value: f64 = value.parse().map_err(|_| bad(format!("`{value}` is not a number")))?;
            if !value.is_finite() || value < 0.0 {
                return Err(bad(format!("`{name}` must be finite and non-negative")));
            }
            if cal.entry(name).is_some() {
                return Err(bad(format!("`{name}` defined twice")));
            }
            cal.set(name, value, note);
        }
        Ok(cal)
    }

    pub fn get(&self, name: &str) -> Result<f64, VerificationError> {
        self.entry(name)
            .map(|e| e.value)
            .ok_or_else(|| VerificationError::MissingConstant(name.to_string()))
    }

    pub fn entry(&self, name: &str) -> Option<&CalibrationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.entries
    }

    /// Inserts or replaces a constant.
    pub fn set(&mut self, name: &str, value: f64, note: &str) {
        let entry = CalibrationEntry {
            name: name.to_string(),
            value,
            note: note.replace('\n', " "),
        };
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) => *e = entry,
            None => self.entries.push(entry),
        }
    }

    /// Fails on the first constant from [`REQUIRED`] that is missing.
    pub fn ensure_complete(&self) -> Result<(), VerificationError> {
        REQUIRED.iter().try_for_each(|n| self.get(n).map(|_| ()))
    }
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{HEADER}")?;
        for e in &self.entries {
            writeln!(f, "{},{},{}", e.name, e.value, e.note)?;
        }
        Ok(())
    }
}
