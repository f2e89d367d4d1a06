use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ctrlscore::certify::{uniqueness_certificate, Verdict};
use ctrlscore::fixtures::{random_connectome, rng};
use ctrlscore::linops::{GramianSet, SystemMatrix};
use ctrlscore::netmetrics::{
    build_laplacian, centrality_reports, correlation_study, CentralityParams, CentralityReport, ConnectivityMatrix,
    CorrelationTable, IndividualReports, LaplacianMode, Metric, DEFAULT_DAMPING, DEFAULT_PAGERANK_TOL,
    DEFAULT_RANK_TOL,
};
use ctrlscore::objective::{ObjectiveKind, ScoringProblem, StopRule};
use ctrlscore::solver::{distances_to_final, fit_log_linear, kkt_residual, rate_report, solve, MIN_RATE_ITERATES};
use log::{info, warn};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::io::{format_value, matrix_to_csv, read_matrix_csv, write_text, LabeledMatrix};
use crate::report::{
    to_json, BatchFailure, BatchSummary, CentralityFile, CertificateReport, InputInfo, ObjectiveResult, ScoreReport,
    SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub matrix: Option<PathBuf>,
    pub connectivity: Option<PathBuf>,
    pub dir: Option<PathBuf>,
    pub t: f64,
    pub objectives: Vec<ObjectiveKind>,
    pub metrics: Vec<Metric>,
    pub damping: f64,
    pub rank_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
    pub mode: LaplacianMode,
    pub binarize_paths: bool,
    /// Individuals and regions for generated fixtures.
    pub count: usize,
    pub nodes: usize,
    pub density: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stop = StopRule::default();
        Self {
            matrix: None,
            connectivity: None,
            dir: None,
            t: 100.0,
            objectives: ObjectiveKind::ALL.to_vec(),
            metrics: Metric::CLASSICAL.to_vec(),
            damping: DEFAULT_DAMPING,
            rank_tol: DEFAULT_RANK_TOL,
            tol: stop.eps_step,
            max_iter: stop.max_iter,
            format: Format::Json,
            out: None,
            jobs: 1,
            seed: 0,
            mode: LaplacianMode::Directed,
            binarize_paths: false,
            count: 10,
            nodes: 20,
            density: 0.2,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(CliError::Usage(format!("--T must be positive, got {}", self.t)));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CliError::Usage("--max-iter must be at least 1".into()));
        }
        if self.objectives.is_empty() {
            return Err(CliError::Usage("no objective selected".into()));
        }
        Ok(())
    }

    fn stop_rule(&self) -> StopRule {
        StopRule { eps_step: self.tol, max_iter: self.max_iter }
    }

    fn centrality_params(&self) -> CentralityParams {
        CentralityParams {
            t: self.t,
            damping: self.damping,
            pagerank_tol: DEFAULT_PAGERANK_TOL,
            rank_tol: self.rank_tol,
            binarize_paths: self.binarize_paths,
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref().ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

fn input_info(path: &Path, sha256: String) -> InputInfo {
    let file = path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned());
    InputInfo { file, sha256 }
}

/// Writes `text` to `--out` when given and returns it.
fn emit(config: &RunConfig, text: String) -> CliResult<String> {
    if let Some(out) = &config.out {
        write_text(out, &text)?;
    }
    Ok(text)
}

fn read_system(path: &Path) -> CliResult<(SystemMatrix, LabeledMatrix, InputInfo)> {
    let (parsed, sha) = read_matrix_csv(path)?;
    let sys = SystemMatrix::new(parsed.matrix.clone())?;
    Ok((sys, parsed, input_info(path, sha)))
}

fn read_connectivity(path: &Path) -> CliResult<(ConnectivityMatrix, InputInfo)> {
    let (parsed, sha) = read_matrix_csv(path)?;
    let mut c = ConnectivityMatrix::new(parsed.matrix)?;
    if let Some(labels) = parsed.labels {
        c = c.with_labels(labels)?;
    }
    Ok((c, input_info(path, sha)))
}

/// Solves every requested objective on one set of Gramians and attaches
/// the uniqueness certificate.
fn score_system(
    sys: &SystemMatrix,
    config: &RunConfig,
    input: InputInfo,
    labels: Option<Vec<String>>,
) -> CliResult<ScoreReport> {
    let gramians = Arc::new(GramianSet::compute(sys, config.t)?);
    let mut warnings = Vec::new();
    let mut objectives = Vec::new();
    for &kind in &config.objectives {
        let prob = ScoringProblem::new(kind, gramians.clone()).with_stop(config.stop_rule());
        let trace = solve(&prob)?;
        if !trace.converged {
            warnings.push(format!("{kind}: stopped after {} iterations without converging", trace.iterations));
        }
        let rate = match rate_report(&trace, &prob) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("{kind}: no rate estimate ({e})"));
                None
            }
        };
        objectives.push(ObjectiveResult {
            objective: kind.label().to_string(),
            kkt_residual: kkt_residual(&trace.final_point, &prob)?,
            value: *trace.values.last().expect("trace holds the starting value"),
            iterations: trace.iterations,
            converged: trace.converged,
            final_step_norm: trace.final_step_norm,
            scores: trace.final_point.as_slice().to_vec(),
            rate,
        });
    }
    let certificate = uniqueness_certificate(sys, config.t)?;
    if certificate.verdict == Verdict::Inconclusive {
        warnings.push(format!(
            "uniqueness certificate inconclusive (margin {:e})",
            certificate.margin
        ));
    }
    for w in &warnings {
        warn!("{}: {w}", input.file);
    }
    Ok(ScoreReport {
        schema_version: SCHEMA_VERSION,
        input,
        t: config.t,
        n: sys.n(),
        labels,
        objectives,
        certificate,
        centralities: Vec::new(),
        warnings,
    })
}

fn node_name(labels: Option<&[String]>, i: usize) -> String {
    labels.map_or_else(|| (i + 1).to_string(), |l| l[i].clone())
}

fn scores_csv(report: &ScoreReport) -> String {
    let mut out = String::from("node");
    for o in &report.objectives {
        out.push(',');
        out.push_str(&o.objective);
    }
    out.push('\n');
    for i in 0..report.n {
        out.push_str(&node_name(report.labels.as_deref(), i));
        for o in &report.objectives {
            out.push(',');
            out.push_str(&format_value(o.scores[i]));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_score(config: &RunConfig) -> CliResult<String> {
    config.validate()?;
    let path = required(&config.matrix, "--matrix")?;
    let (sys, parsed, input) = read_system(path)?;
    let report = score_system(&sys, config, input, parsed.labels)?;
    let text = match config.format {
        Format::Json => to_json(&report),
        Format::Csv => scores_csv(&report),
    };
    emit(config, text)
}

pub fn cmd_laplacian(config: &RunConfig) -> CliResult<String> {
    let path = required(&config.connectivity, "--connectivity")?;
    let (c, _) = read_connectivity(path)?;
    let lap = build_laplacian(&c, config.mode)?;
    info!("Laplacian row-sum residual {:e}", lap.row_sum_residual());
    emit(config, matrix_to_csv(lap.system.matrix(), c.labels()))
}

pub fn cmd_certify(config: &RunConfig) -> CliResult<String> {
    config.validate()?;
    let path = required(&config.matrix, "--matrix")?;
    let (sys, _, input) = read_system(path)?;
    let certificate = uniqueness_certificate(&sys, config.t)?;
    if certificate.verdict == Verdict::Inconclusive {
        warn!("{}: uniqueness certificate inconclusive (margin {:e})", input.file, certificate.margin);
    }
    emit(config, to_json(&CertificateReport { schema_version: SCHEMA_VERSION, input, certificate }))
}

fn centrality_csv(reports: &[CentralityReport], labels: Option<&[String]>) -> String {
    let mut out = String::from("node");
    for r in reports {
        out.push(',');
        out.push_str(r.metric.key());
    }
    out.push('\n');
    let n = reports.first().map_or(0, |r| r.values.len());
    for i in 0..n {
        out.push_str(&node_name(labels, i));
        for r in reports {
            out.push(',');
            out.push_str(&format_value(r.values[i]));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_centrality(config: &RunConfig) -> CliResult<String> {
    config.validate()?;
    let path = required(&config.connectivity, "--connectivity")?;
    let (c, input) = read_connectivity(path)?;
    let lap = build_laplacian(&c, config.mode)?;
    let mut reports = Vec::new();
    let graph_metrics: Vec<Metric> =
        config.metrics.iter().copied().filter(|m| !matches!(m, Metric::Vcs | Metric::Aecs)).collect();
    reports.extend(centrality_reports(&c, &lap, &graph_metrics, &config.centrality_params())?);
    let score_kinds: Vec<ObjectiveKind> = config
        .metrics
        .iter()
        .filter_map(|m| match m {
            Metric::Vcs => Some(ObjectiveKind::Vcs),
            Metric::Aecs => Some(ObjectiveKind::Aecs),
            _ => None,
        })
        .collect();
    if !score_kinds.is_empty() {
        let gramians = Arc::new(GramianSet::compute(&lap.system, config.t)?);
        for kind in score_kinds {
            let prob = ScoringProblem::new(kind, gramians.clone()).with_stop(config.stop_rule());
            let scores = solve(&prob)?.final_point.as_slice().to_vec();
            let metric = if kind == ObjectiveKind::Vcs { Metric::Vcs } else { Metric::Aecs };
            reports.push(CentralityReport::new(metric, scores).with_param("T", config.t));
        }
    }
    let text = match config.format {
        Format::Json => to_json(&CentralityFile { schema_version: SCHEMA_VERSION, input, reports }),
        Format::Csv => centrality_csv(&reports, c.labels()),
    };
    emit(config, text)
}

/// Plot-ready `(k, log‖p^(k) − p*‖)` rows with a fitted slope footer.
/// Zero distances (the final iterate) are omitted.
pub fn convergence_csv(distances: &[f64]) -> String {
    let mut out = String::from("k,log_distance\n");
    for (k, d) in distances.iter().enumerate().filter(|(_, d)| **d > 0.0) {
        out.push_str(&format!("{k},{}\n", format_value(d.ln())));
    }
    if distances.len() < MIN_RATE_ITERATES {
        out.push_str(&format!(
            "# warning: trace has {} iterates, fewer than {MIN_RATE_ITERATES}\n",
            distances.len()
        ));
    }
    let fit_len = distances.len().saturating_sub(2);
    match fit_log_linear(&distances[..fit_len]) {
        Ok((slope, r2)) => out.push_str(&format!("# slope={},r2={}\n", format_value(slope), format_value(r2))),
        Err(e) => out.push_str(&format!("# warning: {e}\n")),
    }
    out
}

pub fn cmd_convergence(config: &RunConfig) -> CliResult<String> {
    config.validate()?;
    let path = required(&config.matrix, "--matrix")?;
    let (sys, _, input) = read_system(path)?;
    let gramians = Arc::new(GramianSet::compute(&sys, config.t)?);
    let kind = config.objectives[0];
    if config.objectives.len() > 1 {
        info!("convergence data uses the first objective, {kind}");
    }
    let trace = solve(&ScoringProblem::new(kind, gramians).with_stop(config.stop_rule()))?;
    let distances = distances_to_final(&trace);
    if distances.len() < MIN_RATE_ITERATES {
        warn!("{}: short trace ({} iterates)", input.file, distances.len());
    }
    emit(config, convergence_csv(&distances))
}

/// Sorted `*.csv` files of a directory.
pub fn list_inputs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn batch_individual(path: &Path, config: &RunConfig) -> CliResult<(ScoreReport, IndividualReports)> {
    let (c, input) = read_connectivity(path)?;
    let lap = build_laplacian(&c, config.mode)?;
    let mut report = score_system(&lap.system, config, input, c.labels().map(<[String]>::to_vec))?;
    let centralities = centrality_reports(&c, &lap, &config.metrics, &config.centrality_params())?;
    let mut by_metric: IndividualReports = BTreeMap::new();
    for r in &centralities {
        by_metric.insert(r.metric, r.clone());
    }
    for o in &report.objectives {
        let metric = if o.objective == ObjectiveKind::Vcs.label() { Metric::Vcs } else { Metric::Aecs };
        by_metric.insert(metric, CentralityReport::new(metric, o.scores.clone()).with_param("T", config.t));
    }
    report.centralities = centralities;
    Ok((report, by_metric))
}

fn correlations_csv(table: &CorrelationTable) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, format_value);
    let mut out = String::from("pair,mean,std,individuals_used,individuals_undefined\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label,
            opt(r.mean),
            opt(r.std),
            r.individuals_used,
            r.individuals_undefined
        ));
    }
    out
}

/// Laplacian, scores and centralities for every CSV in `--dir`, then the
/// correlation table. Per-file failures are recorded and skipped.
pub fn cmd_batch(config: &RunConfig) -> CliResult<String> {
    let mut config = config.clone();
    config.validate()?;
    config.objectives = ObjectiveKind::ALL.to_vec();
    for m in Metric::CLASSICAL {
        if !config.metrics.contains(&m) {
            config.metrics.push(m);
        }
    }
    config.metrics.retain(|m| !matches!(m, Metric::Vcs | Metric::Aecs));
    let dir = required(&config.dir, "--dir")?;
    let out = required(&config.out, "--out")?.to_path_buf();
    let files = list_inputs(dir)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .csv files in {}", dir.display())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", config.jobs)))?;
    let results: Vec<CliResult<(ScoreReport, IndividualReports)>> =
        pool.install(|| files.par_iter().map(|f| batch_individual(f, &config)).collect());

    let mut individuals = Vec::new();
    let mut succeeded = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in files.iter().zip(results) {
        let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        match result {
            Ok((report, reports)) => {
                write_text(&out.join(format!("{stem}.json")), &to_json(&report))?;
                succeeded.push(report.input.clone());
                individuals.push(reports);
            }
            Err(e) => {
                warn!("{}: {e}", path.display());
                failures.push(BatchFailure {
                    file: path.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
                    exit_code: e.exit_code(),
                    error: e.to_string(),
                });
            }
        }
    }
    write_text(&out.join("failures.json"), &to_json(&failures))?;
    let correlations = correlation_study(&individuals)?;
    write_text(&out.join("correlations.csv"), &correlations_csv(&correlations))?;
    let summary = BatchSummary { schema_version: SCHEMA_VERSION, t: config.t, succeeded, failures, correlations };
    let text = to_json(&summary);
    write_text(&out.join("summary.json"), &text)?;
    Ok(text)
}

/// Writes `count` seeded synthetic connectomes to `--out`.
pub fn cmd_fixtures(config: &RunConfig) -> CliResult<String> {
    let out = required(&config.out, "--out")?;
    if config.nodes < 2 || config.count == 0 {
        return Err(CliError::Usage("fixtures need --count >= 1 and --nodes >= 2".into()));
    }
    if !(0.0..=1.0).contains(&config.density) {
        return Err(CliError::Usage(format!("--density must lie in [0,1], got {}", config.density)));
    }
    let mut r = rng(config.seed);
    let mut written = String::new();
    for k in 0..config.count {
        let c = random_connectome(&mut r, config.nodes, config.density);
        let name = format!("individual_{:03}.csv", k + 1);
        write_text(&out.join(&name), &matrix_to_csv(c.weights(), None))?;
        written.push_str(&name);
        written.push('\n');
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_trace_footer() {
        let d: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let csv = convergence_csv(&d);
        let footer = csv.lines().last().unwrap();
        let slope: f64 = footer.trim_start_matches("# slope=").split(",r2=").next().unwrap().parse().unwrap();
        assert!((slope - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(csv.lines().nth(1).unwrap(), format!("0,{}", format_value(0.0)));
    }

    #[test]
    fn short_trace_warns() {
        let csv = convergence_csv(&[0.0]);
        assert!(csv.contains("# warning: trace has 1 iterates"));
    }

    #[test]
    fn config_validation() {
        let bad = RunConfig { t: 0.0, ..RunConfig::default() };
        assert!(matches!(bad.validate(), Err(CliError::Usage(_))));
        assert!(RunConfig::default().validate().is_ok());
    }
}
