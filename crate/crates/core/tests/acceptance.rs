//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use kms_lab_core::config::{ExperimentConfig, SuiteName};
use kms_lab_core::exponentiable::Verdict;
use kms_lab_core::random::shard_rng;
use kms_lab_core::report::BoundReport;
use kms_lab_core::runner::run_suite;
use kms_lab_core::schatten::SchattenIndex;
use kms_lab_core::suites::{self, DUALITY_INDICES};
use kms_lab_core::{Result, SeriesBudget};
use rand::RngCore;
use rayon::prelude::*;

const SEED: u64 = 0x5eed_2026;

struct Outcome {
    id: u8,
    title: &'static str,
    passed: bool,
    detail: String,
}

/// Rows that fail `ok`, plus a count of all rows.
#[derive(Default)]
struct Tally {
    rows: usize,
    failures: Vec<BoundReport>,
    errors: Vec<String>,
    worst: f64,
}

impl Tally {
    fn add(&mut self, rows: Result<Vec<BoundReport>>, ok: impl Fn(&BoundReport) -> bool, score: impl Fn(&BoundReport) -> f64) {
        match rows {
            Ok(rows) => {
                for r in rows {
                    self.rows += 1;
                    self.worst = self.worst.max(score(&r));
                    if !ok(&r) {
                        self.failures.push(r);
                    }
                }
            }
            Err(e) => self.errors.push(e.to_string()),
        }
    }

    fn passed(&self) -> bool {
        self.rows > 0 && self.failures.is_empty() && self.errors.is_empty()
    }

    fn describe(&self) -> String {
        let mut s = format!("{} rows, worst {:.3e}", self.rows, self.worst);
        if let Some(f) = self.failures.first() {
            s += &format!("; {} failing, first {} dim={} [{}] lhs={:e} rhs={:e}", self.failures.len(), f.name, f.dim, f.indices, f.lhs, f.rhs);
        }
        if let Some(e) = self.errors.first() {
            s += &format!("; {} errors, first: {e}", self.errors.len());
        }
        s
    }
}

/// Relative violation `max(0, −slack)/max(1, |rhs|)`.
fn violation(r: &BoundReport) -> f64 {
    (-r.slack).max(0.0) / r.rhs.abs().max(1.0)
}

fn deviation(r: &BoundReport) -> f64 {
    r.lhs
}

fn collect<F>(count: usize, tag: &str, f: F) -> Vec<Result<Vec<BoundReport>>>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> Result<Vec<BoundReport>> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = shard_rng(SEED, tag, i as u64);
            f(&mut rng, i)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    let mut per_family = Vec::new();
    type Family = fn(&mut rand_chacha::ChaCha8Rng, usize) -> Result<BoundReport>;
    let families: [(&str, Family); 4] = [
        ("holder", |r, d| suites::holder_instance(r, d)),
        ("three_term_holder", |r, d| suites::three_term_instance(r, d)),
        ("minkowski", |r, d| suites::minkowski_instance(r, d)),
        ("interpolation", |r, d| suites::interpolation_instance(r, d)),
    ];
    for (name, family) in families {
        let mut fam = Tally::default();
        for rows in collect(10_000, name, |rng, i| family(rng, 2 + i % 7).map(|r| vec![r])) {
            fam.add(rows, |r| r.passes(1e-10), violation);
        }
        per_family.push(format!("{name} {}", fam.rows));
        tally.rows += fam.rows;
        tally.worst = tally.worst.max(fam.worst);
        tally.failures.extend(fam.failures);
        tally.errors.extend(fam.errors);
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        title: "trace inequalities, 1e4 per family, dims 2-8",
        passed: tally.passed() && secs < 60.0,
        detail: format!("{}; {}; {secs:.1}s (limit 60s)", per_family.join(", "), tally.describe()),
    }
}

fn criterion_2() -> Outcome {
    let mut tally = Tally::default();
    for p in DUALITY_INDICES {
        let idx = if p.is_finite() { SchattenIndex::Finite(p) } else { SchattenIndex::Infinity };
        for rows in collect(1000, &format!("duality/{p}"), |rng, i| suites::duality_instance(rng, 2 + i % 5, idx, 1000)) {
            tally.add(
                rows,
                |r| if r.name == "duality_probes" { r.passes(1e-12) } else { r.lhs <= r.rhs },
                |r| if r.name == "duality_probes" { violation(r) } else { r.lhs - r.rhs },
            );
        }
    }
    Outcome {
        id: 2,
        title: "duality witness and 1e3 unit-ball probes, 1e3 instances per p",
        passed: tally.passed(),
        detail: tally.describe(),
    }
}

fn criterion_3() -> Outcome {
    let mut modular = Tally::default();
    for rows in collect(100, "modular", |rng, i| suites::modular_instance(rng, 2 + i % 5)) {
        let rows = rows.map(|rs| rs.into_iter().filter(|r| r.name.starts_with("modular_")).collect());
        modular.add(rows, |r| r.lhs <= r.rhs, deviation);
    }
    let mut kms = Tally::default();
    for rows in collect(100, "kms", |rng, i| {
        let seed = shard_rng(SEED, "kms/seed", i as u64).next_u64();
        suites::kms_instance(rng, 2 + i % 5, 10, seed)
    }) {
        kms.add(rows, |r| r.lhs <= 1e-9, deviation);
    }
    Outcome {
        id: 3,
        title: "modular identities on 100 states, KMS boundary over 1e3 triples",
        passed: modular.passed() && kms.passed() && kms.rows >= 1000,
        detail: format!("modular: {}; kms: {}", modular.describe(), kms.describe()),
    }
}

fn criterion_4() -> Outcome {
    let budget = SeriesBudget::default();
    let mut tally = Tally::default();
    let limit = |name: &str| match name {
        "interchange_identity" => Some(1e-8),
        n if n.starts_with("cocycle_") || n.starts_with("relative_cocycle_") => Some(1e-7),
        _ => None,
    };
    for rows in collect(100, "expansional", |rng, i| suites::expansional_instance(rng, 2 + i % 5, &budget).map(|o| o.rows)) {
        tally.add(
            rows,
            |r| match limit(&r.name) {
                Some(t) => r.lhs < t,
                None => r.passes(1e-10),
            },
            |r| if limit(&r.name).is_some() { r.lhs } else { violation(r) },
        );
    }
    Outcome {
        id: 4,
        title: "interchange identity, cocycle properties, relative cocycle on 100 pairs",
        passed: tally.passed(),
        detail: tally.describe(),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let out = suites::exponentiable_reference(&SeriesBudget::default());
    let secs = start.elapsed().as_secs_f64();
    let mut tally = Tally::default();
    let mut detail = String::new();
    match out {
        Ok(out) => {
            tally.add(Ok(out.rows.clone()), |r| r.lhs <= r.rhs, |r| r.lhs - r.rhs);
            let mismatched: Vec<&str> = out
                .certificates
                .iter()
                .filter(|c| c.certificate.verdict != c.expected || c.expected == Verdict::Inconclusive)
                .map(|c| c.name.as_str())
                .collect();
            if !mismatched.is_empty() {
                tally.errors.push(format!("verdict mismatch: {mismatched:?}"));
            }
            let find = |name: &str| out.certificates.iter().find(|c| c.name == name).map(|c| c.certificate.clone());
            if let Some(c) = find("example1;lambda=1") {
                detail += &format!("example1(1) = {:.5}; ", c.value.unwrap_or(f64::NAN));
            }
            if let Some(c) = find("example2;lambda=1") {
                detail += &format!("example2(1) = {:.6}; ", c.value.unwrap_or(f64::NAN));
            }
            if let Some(w) = find("example2_doubled;lambda=1").and_then(|c| c.divergence_witness) {
                detail += &format!("doubled witness ratio {:.6}; ", w.ratio);
            }
        }
        Err(e) => tally.errors.push(e.to_string()),
    }
    Outcome {
        id: 5,
        title: "exponentiability reference values",
        passed: tally.passed() && secs < 5.0,
        detail: format!("{detail}{}; {secs:.2}s (limit 5s)", tally.describe()),
    }
}

fn criterion_6() -> Outcome {
    let mut tally = Tally::default();
    for rows in collect(100, "tr", |rng, i| {
        let seed = shard_rng(SEED, "tr/seed", i as u64).next_u64();
        suites::tr_instance(rng, 2 + i % 5, 1 + i % 4, 200, seed)
    }) {
        tally.add(rows, |r| if r.name.starts_with("tr") { r.passes(1e-9) } else { r.lhs <= r.rhs }, violation);
    }
    Outcome {
        id: 6,
        title: "TR0/TR1 over 100 instances, n <= 4, 200 tube points each",
        passed: tally.passed(),
        detail: tally.describe(),
    }
}

fn criterion_7() -> Outcome {
    let budget = SeriesBudget::default();
    let mut tally = Tally::default();
    let judge = |r: &BoundReport| match r.name.as_str() {
        "perturbed_vector_oracle" | "analytic_exponential_identity" => r.lhs < 1e-6,
        "perturbed_state_trace_distance" | "perturbed_kms_boundary" => r.lhs <= 1e-7,
        _ => r.passes(1e-10),
    };
    for rows in collect(30, "perturbation", |rng, i| {
        let seed = shard_rng(SEED, "perturbation/seed", i as u64).next_u64();
        suites::perturbation_instance(rng, 2 + i % 3, &budget, seed)
    }) {
        tally.add(rows, judge, violation);
    }
    let small = (|| -> Result<BoundReport> {
        let mut rng = shard_rng(SEED, "perturbation/small", 0);
        let ctx = kms_lab_core::modular::build_gns(&kms_lab_core::random::random_density(&mut rng, 2))?;
        let q = kms_lab_core::random::random_hermitian_with_norm(&mut rng, 2, 0.4);
        kms_lab_core::perturbation::check_perturbed_vector(&ctx, &q, &SeriesBudget::fixed(12), 1e-6)
    })();
    tally.add(small.map(|r| vec![r]), judge, violation);
    Outcome {
        id: 7,
        title: "perturbed KMS vector, domination, perturbed state, dims 2-4",
        passed: tally.passed(),
        detail: tally.describe(),
    }
}

fn criterion_8() -> Outcome {
    let budget = SeriesBudget::default();
    let mut tally = Tally::default();
    let mut final_max: f64 = 0.0;
    for rows in collect(25, "stability", |rng, i| suites::stability_instance(rng, 2 + i % 5, &budget)) {
        if let Ok(rs) = &rows {
            for r in rs.iter().filter(|r| r.name == "stability_final") {
                final_max = final_max.max(r.lhs);
            }
        }
        tally.add(rows, |r| r.lhs <= r.rhs, |r| r.lhs - r.rhs);
    }
    Outcome {
        id: 8,
        title: "spectral-cut approximants decrease to < 1e-8",
        passed: tally.passed() && final_max < 1e-8,
        detail: format!("{}; final difference max {final_max:.3e}", tally.describe()),
    }
}

fn criterion_9() -> Outcome {
    let mut mismatched = Vec::new();
    let mut errors = Vec::new();
    let mut bytes = 0;
    for suite in SuiteName::CONCRETE {
        let cfg = ExperimentConfig { suite, dims: vec![2, 3], trials: 3, seed: 7, ..Default::default() };
        let run = |threads: Option<&str>| -> std::result::Result<Vec<u8>, String> {
            match threads {
                Some(t) => std::env::set_var("KMS_LAB_THREADS", t),
                None => std::env::remove_var("KMS_LAB_THREADS"),
            }
            let report = run_suite(&cfg).map_err(|e| e.to_string())?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf).map_err(|e| e.to_string())?;
            Ok(buf)
        };
        match (run(Some("1")), run(None)) {
            (Ok(a), Ok(b)) => {
                bytes += a.len();
                if a != b {
                    mismatched.push(suite.as_str());
                }
            }
            (Err(e), _) | (_, Err(e)) => errors.push(format!("{suite}: {e}")),
        }
    }
    std::env::remove_var("KMS_LAB_THREADS");
    Outcome {
        id: 9,
        title: "same seed reproduces byte-identical CSV",
        passed: mismatched.is_empty() && errors.is_empty(),
        detail: format!("{} suites, {bytes} bytes compared; mismatched {mismatched:?}; errors {errors:?}", SuiteName::CONCRETE.len()),
    }
}

fn main() {
    let criteria: [fn() -> Outcome; 9] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9];
    let mut failed = 0;
    for run in criteria {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {}: {} - {} ({})", o.id, if o.passed { "PASS" } else { "FAIL" }, o.title, o.detail);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
