//! JSON input documents: system descriptions, complex matrices, and
//! piecewise fan/vase specifications.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use phasegain::lti::StateSpace;
use phasegain::stability::{FanVaseSegment, FanVaseSpec};
use phasegain::ComplexMatrix;

fn default_version() -> u32 {
    1
}

/// A system description in one of three forms.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    StateSpace {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
    },
    SecondOrder {
        m: Vec<Vec<f64>>,
        c_damp: Vec<Vec<f64>>,
        k: Vec<Vec<f64>>,
        b_in: Vec<Vec<f64>>,
        h1: Vec<Vec<f64>>,
        h2: Vec<Vec<f64>>,
    },
    ScalarRational {
        #[serde(alias = "numerator")]
        num: Vec<f64>,
        #[serde(alias = "denominator")]
        den: Vec<f64>,
    },
}

#[derive(Debug, Deserialize)]
pub struct SystemDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    #[serde(flatten)]
    pub system: SystemKind,
    /// Free-form tag carried through from the input document.
    #[serde(default)]
    #[allow(dead_code)]
    pub label: Option<String>,
}

fn real_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() {
        return Err(format!("{name}: matrix must not be empty"));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(format!("{name}: matrix rows must not be empty"));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{name}: rows have inconsistent lengths"));
    }
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(format!("{name}: non-finite entry at ({i}, {j})"));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

impl SystemDocument {
    pub fn parse(text: &str, path: &str) -> Result<Self, String> {
        let doc: SystemDocument = serde_json::from_str(text)
            .map_err(|e| format!("{path}: malformed system document: {e}"))?;
        if doc.format_version != 1 {
            return Err(format!(
                "{path}: unsupported format_version {}",
                doc.format_version
            ));
        }
        Ok(doc)
    }

    /// Validates dimensions and converts to a state-space realization.
    pub fn realize(&self, path: &str) -> Result<StateSpace, String> {
        let err = |e: phasegain::Error| format!("{path}: {e}");
        match &self.system {
            SystemKind::StateSpace { a, b, c, d } => {
                let a = real_matrix("a", a).map_err(|e| format!("{path}: {e}"))?;
                let b = real_matrix("b", b).map_err(|e| format!("{path}: {e}"))?;
                let c = real_matrix("c", c).map_err(|e| format!("{path}: {e}"))?;
                let d = real_matrix("d", d).map_err(|e| format!("{path}: {e}"))?;
                StateSpace::new(a, b, c, d).map_err(err)
            }
            SystemKind::SecondOrder {
                m,
                c_damp,
                k,
                b_in,
                h1,
                h2,
            } => {
                let m = real_matrix("m", m).map_err(|e| format!("{path}: {e}"))?;
                let c_damp = real_matrix("c_damp", c_damp).map_err(|e| format!("{path}: {e}"))?;
                let k = real_matrix("k", k).map_err(|e| format!("{path}: {e}"))?;
                let b_in = real_matrix("b_in", b_in).map_err(|e| format!("{path}: {e}"))?;
                let h1 = real_matrix("h1", h1).map_err(|e| format!("{path}: {e}"))?;
                let h2 = real_matrix("h2", h2).map_err(|e| format!("{path}: {e}"))?;
                StateSpace::from_second_order(&m, &c_damp, &k, &b_in, &h1, &h2).map_err(err)
            }
            SystemKind::ScalarRational { num, den } => {
                StateSpace::from_scalar_rational(num, den).map_err(err)
            }
        }
    }
}

pub fn load_system(path: &str) -> Result<StateSpace, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{path}: cannot read file: {e}"))?;
    SystemDocument::parse(&text, path)?.realize(path)
}

/// A dense complex matrix: entries as `[re, im]` pairs (bare numbers are
/// accepted for real entries).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub entries: Vec<Vec<ComplexEntry>>,
    /// Free-form tag carried through from the input document.
    #[serde(default)]
    #[allow(dead_code)]
    pub label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexEntry {
    fn value(&self) -> Complex64 {
        match self {
            ComplexEntry::Real(re) => Complex64::new(*re, 0.0),
            ComplexEntry::Pair([re, im]) => Complex64::new(*re, *im),
        }
    }
}

pub fn load_complex_matrix(path: &str) -> Result<ComplexMatrix, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{path}: cannot read file: {e}"))?;
    let doc: MatrixDocument =
        serde_json::from_str(&text).map_err(|e| format!("{path}: malformed matrix document: {e}"))?;
    if doc.format_version != 1 {
        return Err(format!(
            "{path}: unsupported format_version {}",
            doc.format_version
        ));
    }
    let rows = doc.entries.len();
    if rows == 0 {
        return Err(format!("{path}: matrix must not be empty"));
    }
    let cols = doc.entries[0].len();
    if cols == 0 || doc.entries.iter().any(|r| r.len() != cols) {
        return Err(format!("{path}: rows have inconsistent lengths"));
    }
    let mut m = ComplexMatrix::zeros(rows, cols);
    for (i, row) in doc.entries.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let v = e.value();
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(format!("{path}: non-finite entry at ({i}, {j})"));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

pub fn load_real_matrix(path: &str) -> Result<DMatrix<f64>, String> {
    let m = load_complex_matrix(path)?;
    if m.iter().any(|z| z.im != 0.0) {
        return Err(format!("{path}: expected a real matrix"));
    }
    Ok(m.map(|z| z.re))
}

/// Piecewise-constant fan/vase tables.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanVaseDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub segments: Vec<FanVaseSegmentDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanVaseSegmentDoc {
    pub omega_lo: f64,
    #[serde(default)]
    pub phase: Option<[f64; 2]>,
    #[serde(default)]
    pub gain: Option<f64>,
}

pub fn load_fanvase_spec(path: &str) -> Result<FanVaseSpec, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{path}: cannot read file: {e}"))?;
    let doc: FanVaseDocument = serde_json::from_str(&text)
        .map_err(|e| format!("{path}: malformed fan/vase document: {e}"))?;
    if doc.format_version != 1 {
        return Err(format!(
            "{path}: unsupported format_version {}",
            doc.format_version
        ));
    }
    let segments = doc
        .segments
        .iter()
        .map(|s| FanVaseSegment {
            omega_lo: s.omega_lo,
            phase: s.phase.map(|[a, b]| (a, b)),
            gain: s.gain,
        })
        .collect();
    FanVaseSpec::new(segments).map_err(|e| format!("{path}: {e}"))
}
