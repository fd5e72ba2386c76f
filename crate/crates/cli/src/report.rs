//! Machine-readable reports and CSV emission.

use num_complex::Complex64;
use serde::Serialize;

use phasegain::kyp::KypCertificate;
use phasegain::lti::FrequencyResponseSample;
use phasegain::stability::{StabilityVerdict, Verdict};
use phasegain::ComplexMatrix;

/// Deterministic number formatting shared by every CSV writer: fixed
/// scientific notation so identical inputs give byte-identical files.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.12e}")
    }
}

pub fn fmt_angle(x: f64, degrees: bool) -> String {
    if degrees {
        fmt_num(x.to_degrees())
    } else {
        fmt_num(x)
    }
}

#[derive(Serialize)]
pub struct FailureReport {
    pub omega: f64,
    pub s_re: f64,
    pub s_im: f64,
    pub condition: String,
    pub margin: f64,
}

#[derive(Serialize)]
pub struct FrequencyRow {
    pub omega: f64,
    pub sigma_plant: f64,
    pub sigma_controller: f64,
    pub gain_product: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_sum_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_sum_lo: Option<f64>,
}

#[derive(Serialize)]
pub struct ComplexMatrixReport(pub Vec<Vec<[f64; 2]>>);

impl ComplexMatrixReport {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| {
                        let z: Complex64 = m[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        ComplexMatrixReport(rows)
    }
}

#[derive(Serialize)]
pub struct CertificateReport {
    pub p: Vec<ComplexMatrixReport>,
    pub q: Vec<ComplexMatrixReport>,
    pub residuals: Vec<f64>,
}

impl CertificateReport {
    pub fn from_certificate(cert: &KypCertificate) -> Self {
        CertificateReport {
            p: cert.p.iter().map(ComplexMatrixReport::from_matrix).collect(),
            q: cert.q.iter().map(ComplexMatrixReport::from_matrix).collect(),
            residuals: cert.residuals.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub theorem: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins_min: Option<f64>,
    pub failures: Vec<FailureReport>,
    pub diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<FrequencyRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    pub parameters: serde_json::Value,
}

impl AnalysisReport {
    pub fn new(theorem: &str, seed: u64) -> Self {
        AnalysisReport {
            tool: "phasegain".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            theorem: theorem.into(),
            verdict: String::new(),
            margins_min: None,
            failures: Vec::new(),
            diagnostics: Vec::new(),
            table: Vec::new(),
            certificate: None,
            parameters: serde_json::Value::Null,
        }
    }

    pub fn with_verdict(mut self, verdict: &StabilityVerdict) -> Self {
        self.verdict = verdict_name(verdict.verdict).into();
        self.margins_min = Some(verdict.margins_min);
        self.failures = verdict
            .failures
            .iter()
            .map(|f| FailureReport {
                omega: f.omega,
                s_re: f.s.re,
                s_im: f.s.im,
                condition: f.condition.clone(),
                margin: f.margin,
            })
            .collect();
        self.diagnostics = verdict.diagnostics.clone();
        self
    }

    pub fn write(&self, path: &str) -> Result<(), String> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| format!("report serialization failed: {e}"))?;
        std::fs::write(path, body).map_err(|e| format!("{path}: cannot write report: {e}"))
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Stable => "Stable",
        Verdict::ConditionFailed => "ConditionFailed",
        Verdict::Unknown => "Unknown",
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Stable => 0,
        Verdict::ConditionFailed => 1,
        Verdict::Unknown => 2,
    }
}

/// Per-frequency diagnostic table from a joint sweep of plant and
/// controller.
pub fn frequency_table(
    p: &[FrequencyResponseSample],
    c: &[FrequencyResponseSample],
) -> Vec<FrequencyRow> {
    p.iter()
        .zip(c.iter())
        .map(|(sp, sc)| FrequencyRow {
            omega: sp.omega,
            sigma_plant: sp.sigma_max(),
            sigma_controller: sc.sigma_max(),
            gain_product: sp.sigma_max() * sc.sigma_max(),
            phase_sum_hi: match (&sp.phases, &sc.phases) {
                (Some(a), Some(b)) => Some(a.hi + b.hi),
                _ => None,
            },
            phase_sum_lo: match (&sp.phases, &sc.phases) {
                (Some(a), Some(b)) => Some(a.lo + b.lo),
                _ => None,
            },
        })
        .collect()
}
