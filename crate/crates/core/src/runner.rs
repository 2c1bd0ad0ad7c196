//! Parallel execution of the verification suites and report assembly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, SuiteName};
use crate::exponentiable::Verdict;
use crate::random::shard_rng;
use crate::report::{write_csv, BoundReport};
use crate::schatten::SchattenIndex;
use crate::suites::{self, InstanceOutput, NamedCertificate, DUALITY_INDICES};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "KMS_LAB_THREADS";
/// Unit-ball probes per duality instance in suite runs.
pub const DUALITY_PROBES: usize = 1000;
/// KMS triples per state in suite runs.
pub const KMS_TRIPLES: usize = 10;
/// Sampled tube points per TR instance in suite runs.
pub const TR_SAMPLES: usize = 200;
/// Default tolerance of the TR rows.
pub const TR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
}

/// A checked row with its trial index and the tolerance it was judged by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedRow {
    pub suite: SuiteName,
    pub trial: usize,
    pub tolerance: f64,
    pub passed: bool,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub trial: usize,
    pub dim: usize,
    pub failed: bool,
    #[serde(flatten)]
    pub certificate: NamedCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: ExperimentConfig,
    pub rows: Vec<CheckedRow>,
    pub diagnostics: Vec<CheckedRow>,
    pub certificates: Vec<CertificateRow>,
    pub summary: Summary,
    pub wall_time_secs: f64,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckedRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn bound_reports(&self) -> Vec<BoundReport> {
        self.rows.iter().map(|r| r.report.clone()).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        write_csv(writer, &self.bound_reports())
    }

    /// JSON with the config echo, summary, certificates, diagnostics and failures.
    pub fn summary_json(&self) -> String {
        let failures: Vec<&CheckedRow> = self.failures().collect();
        let value = serde_json::json!({
            "config": self.config,
            "summary": self.summary,
            "wall_time_secs": self.wall_time_secs,
            "certificates": self.certificates,
            "diagnostics": self.diagnostics,
            "failures": failures,
        });
        serde_json::to_string_pretty(&value).expect("summary serializes")
    }

    /// Writes `report.csv` and `summary.json` under `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<(PathBuf, PathBuf), RunError> {
        let io = |path: &Path, e: &dyn std::fmt::Display| RunError::Io { path: path.display().to_string(), message: e.to_string() };
        fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
        let csv_path = dir.join("report.csv");
        let file = fs::File::create(&csv_path).map_err(|e| io(&csv_path, &e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| io(&csv_path, &e))?;
        let json_path = dir.join("summary.json");
        fs::write(&json_path, self.summary_json()).map_err(|e| io(&json_path, &e))?;
        Ok((csv_path, json_path))
    }
}

/// Tolerance for a row: explicit override, then the TR default, then the
/// config-wide tolerance.
pub fn tolerance_for(config: &ExperimentConfig, name: &str) -> f64 {
    if let Some(&t) = config.tolerance_overrides.get(name) {
        t
    } else if name.starts_with("tr0") || name.starts_with("tr1") {
        TR_TOLERANCE
    } else {
        config.tolerance
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    suite: SuiteName,
    dim: usize,
    trial: usize,
}

fn jobs(config: &ExperimentConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for suite in config.suite.expand() {
        for &dim in &config.dims {
            for trial in 0..config.trials {
                out.push(Job { suite, dim, trial });
            }
        }
    }
    out
}

fn run_job(config: &ExperimentConfig, job: Job) -> crate::Result<InstanceOutput> {
    let tag = format!("{}/{}", job.suite, job.dim);
    let mut rng = shard_rng(config.seed, &tag, job.trial as u64);
    let seed = shard_rng(config.seed, &format!("{tag}/seed"), job.trial as u64).next_u64();
    let budget = &config.budget;
    let dim = job.dim;
    let mut out = InstanceOutput::default();
    match job.suite {
        SuiteName::Inequalities => {
            out.rows.push(suites::holder_instance(&mut rng, dim)?);
            out.rows.push(suites::three_term_instance(&mut rng, dim)?);
            out.rows.push(suites::minkowski_instance(&mut rng, dim)?);
            out.rows.push(suites::interpolation_instance(&mut rng, dim)?);
            out.rows.push(suites::growth_instance(&mut rng, dim)?);
            for p in DUALITY_INDICES {
                let idx = if p.is_finite() { SchattenIndex::Finite(p) } else { SchattenIndex::Infinity };
                out.rows.extend(suites::duality_instance(&mut rng, dim, idx, DUALITY_PROBES)?);
            }
        }
        SuiteName::Modular => out.rows.extend(suites::modular_instance(&mut rng, dim)?),
        SuiteName::Kms => out.rows.extend(suites::kms_instance(&mut rng, dim, KMS_TRIPLES, seed)?),
        SuiteName::Expansional => out.extend(suites::expansional_instance(&mut rng, dim, budget)?),
        SuiteName::Exponentiable => {
            if job.trial == 0 && dim == config.dims[0] {
                out.extend(suites::exponentiable_reference(budget)?);
            }
            out.rows.extend(suites::exponentiable_matrix_instance(&mut rng, dim)?);
        }
        SuiteName::Perturbation => {
            out.rows.extend(suites::perturbation_instance(&mut rng, dim, budget, seed)?);
            let n = 1 + job.trial % 4;
            out.rows.extend(suites::tr_instance(&mut rng, dim, n, TR_SAMPLES, seed)?);
            out.rows.extend(suites::stability_instance(&mut rng, dim, budget)?);
        }
        SuiteName::All => unreachable!("expanded before scheduling"),
    }
    for row in out.rows.iter_mut().chain(out.diagnostics.iter_mut()) {
        row.seed = seed;
    }
    Ok(out)
}

fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

fn certificate_failed(c: &NamedCertificate) -> bool {
    match c.expected {
        Verdict::Converges => c.certificate.diverges(),
        Verdict::Diverges => c.certificate.converges(),
        Verdict::Inconclusive => false,
    }
}

/// Runs every (suite, dim, trial) job and assembles the report. Rows are
/// ordered by name, then trial, then generation order.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteReport, RunError> {
    config.validate()?;
    let start = Instant::now();
    let jobs = jobs(config);
    let outputs: Vec<(Job, crate::Result<InstanceOutput>)> =
        thread_pool().install(|| jobs.par_iter().map(|&job| (job, run_job(config, job))).collect());

    let check = |job: &Job, report: BoundReport| {
        let tolerance = tolerance_for(config, &report.name);
        CheckedRow { suite: job.suite, trial: job.trial, tolerance, passed: report.passes(tolerance), report }
    };
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut certificates = Vec::new();
    for (job, out) in outputs {
        match out {
            Ok(out) => {
                rows.extend(out.rows.into_iter().map(|r| check(&job, r)));
                diagnostics.extend(out.diagnostics.into_iter().map(|r| check(&job, r)));
                certificates.extend(out.certificates.into_iter().map(|c| CertificateRow {
                    trial: job.trial,
                    dim: job.dim,
                    failed: certificate_failed(&c),
                    certificate: c,
                }));
            }
            Err(e) => {
                let report = BoundReport::new("trial_error", job.dim, format!("{}: {e}", job.suite), 1.0, 0.0);
                rows.push(CheckedRow { suite: job.suite, trial: job.trial, tolerance: 0.0, passed: false, report });
            }
        }
    }
    rows.sort_by(|a, b| a.report.name.cmp(&b.report.name).then(a.trial.cmp(&b.trial)));
    diagnostics.sort_by(|a, b| a.report.name.cmp(&b.report.name).then(a.trial.cmp(&b.trial)));

    let mut summary = Summary::default();
    for r in &rows {
        if r.passed {
            summary.passed += 1;
        } else {
            summary.failed += 1;
        }
    }
    for c in &certificates {
        if c.failed {
            summary.failed += 1;
        } else if c.certificate.certificate.verdict == Verdict::Inconclusive {
            summary.inconclusive += 1;
        } else {
            summary.passed += 1;
        }
    }
    Ok(SuiteReport {
        config: config.clone(),
        rows,
        diagnostics,
        certificates,
        summary,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
