use ctrlscore::certify::UniquenessCertificate;
use ctrlscore::netmetrics::{CentralityReport, CorrelationTable};
use ctrlscore::solver::RateReport;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    /// File name without directories, so reports do not depend on where
    /// the input lives.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveResult {
    pub objective: String,
    pub scores: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_step_norm: f64,
    pub kkt_residual: f64,
    pub rate: Option<RateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema_version: u32,
    pub input: InputInfo,
    #[serde(rename = "T")]
    pub t: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<Vec<String>>,
    pub objectives: Vec<ObjectiveResult>,
    pub certificate: UniquenessCertificate,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub centralities: Vec<CentralityReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub schema_version: u32,
    pub input: InputInfo,
    pub certificate: UniquenessCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityFile {
    pub schema_version: u32,
    pub input: InputInfo,
    pub reports: Vec<CentralityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub file: String,
    pub exit_code: i32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub schema_version: u32,
    #[serde(rename = "T")]
    pub t: f64,
    pub succeeded: Vec<InputInfo>,
    pub failures: Vec<BatchFailure>,
    pub correlations: CorrelationTable,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}
