//! Run directories: export, re-verification from stored files, tidy plot data
//! and basis tables.
//!
//! Layout of a run directory:
//!
//! ```text
//! summary.json            schema "blochgate-run-v1": config, ε → terminal cost, per-stage data
//! timings.json            wall-clock seconds per stage (kept apart so summaries are reproducible)
//! stage-<ε>/controls.csv  t, nu_<label>…, hamiltonian, stationarity
//! stage-<ε>/bloch.csv     t, u<j>_re, u<j>_im (j = 0 … d²-1), p<j>_re, p<j>_im
//! stage-<ε>/terminal_running.csv   t, bloch, oracle
//! stage-<ε>/verification.json
//! ```
//!
//! `<ε>` is written in Rust's `{:e}` form, so 0.005 becomes `5e-3`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{operator_kind, OperatorBasis, OperatorKind, StructureConstants, ORDERING_TAG};
use crate::error::{Error, Result};
use crate::model::ExperimentConfig;
use crate::pmp::{pontryagin_hamiltonian, stationarity_residual, ExtremalState};
use crate::synthesis::{
    verify_samples, CompiledExperiment, StageSamples, SynthesisRun, Verification,
    VerificationReport, VerificationThresholds,
};

pub const SUMMARY_SCHEMA: &str = "blochgate-run-v1";
pub const VERIFICATION_SCHEMA: &str = "blochgate-verification-v1";

/// Key used for a stage in file names and summary maps.
pub fn epsilon_label(epsilon: f64) -> String {
    format!("{epsilon:e}")
}

pub fn stage_dir(run_dir: &Path, epsilon: f64) -> PathBuf {
    run_dir.join(format!("stage-{}", epsilon_label(epsilon)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSummary {
    pub epsilon: f64,
    pub status: String,
    pub terminal_cost: f64,
    pub integral_cost: f64,
    pub initial_nodes: usize,
    pub final_nodes: usize,
    pub max_residual: f64,
    pub newton_iterations: usize,
    pub solves: usize,
    pub intermediate_epsilons: Vec<f64>,
    pub retried: bool,
    pub verification: VerificationReport,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub schema: String,
    pub ordering: String,
    pub name: Option<String>,
    pub succeeded: bool,
    pub failed_epsilon: Option<f64>,
    /// ε label → terminal cost, in schedule order.
    pub terminal_costs: serde_json::Map<String, serde_json::Value>,
    pub thresholds: VerificationThresholds,
    pub stages: Vec<StageSummary>,
    pub config: ExperimentConfig,
}

impl RunSummary {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join("summary.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let summary: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if summary.schema != SUMMARY_SCHEMA {
            return Err(Error::format(
                &path,
                format!("unknown schema {:?}", summary.schema),
            ));
        }
        Ok(summary)
    }

    /// Stages whose verification failed, with the exceeded thresholds.
    pub fn verification_failures(&self) -> Vec<(f64, Vec<String>)> {
        self.stages
            .iter()
            .filter(|s| !s.failures.is_empty())
            .map(|s| (s.epsilon, s.failures.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VerificationFile {
    schema: String,
    epsilon: f64,
    thresholds: VerificationThresholds,
    report: VerificationReport,
    passed: bool,
    failures: Vec<String>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(path, e.to_string())
}

fn write_row(w: &mut csv::Writer<fs::File>, path: &Path, row: &[f64]) -> Result<()> {
    w.write_record(row.iter().map(|v| v.to_string()))
        .map_err(csv_error(path))
}

fn bloch_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for block in ["u", "p"] {
        for j in 0..n {
            h.push(format!("{block}{j}_re"));
            h.push(format!("{block}{j}_im"));
        }
    }
    h
}

fn controls_header(exp: &CompiledExperiment) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(exp.model.channels.iter().map(|c| format!("nu_{}", c.label)));
    h.push("hamiltonian".into());
    h.push("stationarity".into());
    h
}

/// Writes the sample files of one stage.
pub fn write_stage_samples(
    dir: &Path,
    exp: &CompiledExperiment,
    epsilon: f64,
    samples: &StageSamples,
    verification: &Verification,
) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join("controls.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(controls_header(exp))
        .map_err(csv_error(&path))?;
    for (i, st) in samples.states.iter().enumerate() {
        let nu = samples.controls_at(i);
        let h = pontryagin_hamiltonian(st, &nu, &exp.model, epsilon, &exp.constants).value;
        let stat = stationarity_residual(st, &nu, &exp.model, epsilon, &exp.constants)
            .into_iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        let mut row = vec![samples.times[i]];
        row.extend(nu);
        row.push(h);
        row.push(stat);
        write_row(&mut w, &path, &row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("bloch.csv");
    let mut w = csv_writer(&path)?;
    let n = exp.dim() * exp.dim();
    w.write_record(bloch_header(n)).map_err(csv_error(&path))?;
    for (t, st) in samples.times.iter().zip(&samples.states) {
        let mut row = Vec::with_capacity(1 + 4 * n);
        row.push(*t);
        for z in st.state.iter().chain(&st.costate) {
            row.push(z.re);
            row.push(z.im);
        }
        write_row(&mut w, &path, &row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("terminal_running.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["t", "bloch", "oracle"])
        .map_err(csv_error(&path))?;
    let running = samples.running_terminal(&exp.target);
    for ((t, b), o) in samples
        .times
        .iter()
        .zip(&running)
        .zip(&verification.oracle_running)
    {
        write_row(&mut w, &path, &[*t, *b, *o])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn write_verification(
    dir: &Path,
    epsilon: f64,
    report: &VerificationReport,
    thresholds: &VerificationThresholds,
) -> Result<Vec<String>> {
    let failures = report.failures(thresholds);
    let file = VerificationFile {
        schema: VERIFICATION_SCHEMA.into(),
        epsilon,
        thresholds: *thresholds,
        report: *report,
        passed: failures.is_empty(),
        failures: failures.clone(),
    };
    write_text(
        &dir.join("verification.json"),
        &serde_json::to_string_pretty(&file).expect("plain data serializes"),
    )?;
    Ok(failures)
}

/// Verifies every stage of `run` and writes the run directory.
pub fn export_report(
    run: &SynthesisRun,
    run_dir: &Path,
    thresholds: &VerificationThresholds,
) -> Result<RunSummary> {
    if run.stages.is_empty() {
        return Err(Error::Config("run has no stages to export".into()));
    }
    create_dir(run_dir)?;
    let exp = &run.experiment;
    let mut stages = Vec::new();
    let mut costs = serde_json::Map::new();
    let mut timings = serde_json::Map::new();
    for stage in &run.stages {
        let dir = stage_dir(run_dir, stage.epsilon);
        let samples = stage.samples(exp)?;
        let verification = verify_samples(exp, stage.epsilon, &samples)?;
        write_stage_samples(&dir, exp, stage.epsilon, &samples, &verification)?;
        let failures = write_verification(&dir, stage.epsilon, &verification.report, thresholds)?;
        let label = epsilon_label(stage.epsilon);
        costs.insert(label.clone(), stage.terminal_cost.into());
        timings.insert(label, stage.elapsed.as_secs_f64().into());
        stages.push(StageSummary {
            epsilon: stage.epsilon,
            status: format!("{:?}", stage.solution.status),
            terminal_cost: stage.terminal_cost,
            integral_cost: stage.integral_cost,
            initial_nodes: stage.initial_nodes,
            final_nodes: stage.solution.nodes(),
            max_residual: stage.solution.max_residual(),
            newton_iterations: stage.newton_iterations,
            solves: stage.solves,
            intermediate_epsilons: stage.intermediate.clone(),
            retried: stage.retried,
            verification: verification.report,
            failures,
        });
    }
    timings.insert("total".into(), run.elapsed.as_secs_f64().into());
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA.into(),
        ordering: ORDERING_TAG.into(),
        name: exp.config.name.clone(),
        succeeded: run.succeeded(),
        failed_epsilon: run.failed_stage.map(|k| run.stages[k].epsilon),
        terminal_costs: costs,
        thresholds: *thresholds,
        stages,
        config: exp.config.clone(),
    };
    write_text(
        &run_dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("plain data serializes"),
    )?;
    write_text(
        &run_dir.join("timings.json"),
        &serde_json::to_string_pretty(&timings).expect("plain data serializes"),
    )?;
    Ok(summary)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::format(path, format!("cannot open: {e}")),
        _ => Error::format(path, e.to_string()),
    })?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_error(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error(path))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
        if row.len() != header.len() {
            return Err(Error::format(
                path,
                format!("row {} has {} fields", i + 1, row.len()),
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads the stored samples of one stage.
pub fn read_stage_samples(dir: &Path, exp: &CompiledExperiment) -> Result<StageSamples> {
    let controls_path = dir.join("controls.csv");
    let (header, rows) = read_table(&controls_path)?;
    if header != controls_header(exp) {
        return Err(Error::format(&controls_path, "unexpected header"));
    }
    let s = exp.model.n_controls();
    let bloch_path = dir.join("bloch.csv");
    let (bheader, brows) = read_table(&bloch_path)?;
    let n = exp.dim() * exp.dim();
    if bheader != bloch_header(n) {
        return Err(Error::format(&bloch_path, "unexpected header"));
    }
    if brows.len() != rows.len() || rows.len() < 2 {
        return Err(Error::format(
            &bloch_path,
            "row count differs from controls.csv",
        ));
    }
    let mut times = Vec::with_capacity(rows.len());
    let mut controls = vec![Vec::with_capacity(rows.len()); s];
    let mut states = Vec::with_capacity(rows.len());
    for (row, brow) in rows.iter().zip(&brows) {
        if row[0] != brow[0] {
            return Err(Error::format(
                &bloch_path,
                format!("time {} does not match controls", brow[0]),
            ));
        }
        times.push(row[0]);
        for (l, c) in controls.iter_mut().enumerate() {
            c.push(row[1 + l]);
        }
        let z = |k: usize| Complex64::new(brow[1 + 2 * k], brow[2 + 2 * k]);
        states.push(ExtremalState {
            state: (0..n).map(z).collect(),
            costate: (n..2 * n).map(z).collect(),
        });
    }
    Ok(StageSamples {
        times,
        controls,
        states,
    })
}

/// Outcome of re-verifying one stored stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredStageCheck {
    pub epsilon: f64,
    pub report: VerificationReport,
    pub failures: Vec<String>,
}

/// Re-runs verification for every stage of a run directory from the stored
/// controls and trajectories; the oracle uses the Hamiltonian in
/// `summary.json`.
pub fn verify_run_dir(
    run_dir: &Path,
    thresholds: &VerificationThresholds,
    cache_dir: Option<&Path>,
) -> Result<Vec<StoredStageCheck>> {
    let summary = RunSummary::load(run_dir)?;
    let exp = CompiledExperiment::new(summary.config.clone(), cache_dir)?;
    let mut out = Vec::new();
    for stage in &summary.stages {
        let samples = read_stage_samples(&stage_dir(run_dir, stage.epsilon), &exp)?;
        let report = verify_samples(&exp, stage.epsilon, &samples)?.report;
        out.push(StoredStageCheck {
            epsilon: stage.epsilon,
            failures: report.failures(thresholds),
            report,
        });
    }
    Ok(out)
}

/// Long-format CSV (`epsilon,series,t,value`) of the controls, the
/// Pontryagin function and both running terminal-cost curves of every stage.
pub fn plot_data(run_dir: &Path) -> Result<String> {
    let summary = RunSummary::load(run_dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let out_err = |e: csv::Error| Error::format(run_dir, e.to_string());
    w.write_record(["epsilon", "series", "t", "value"])
        .map_err(out_err)?;
    for stage in &summary.stages {
        let dir = stage_dir(run_dir, stage.epsilon);
        let label = epsilon_label(stage.epsilon);
        for (file, skip) in [
            ("controls.csv", &["stationarity"][..]),
            ("terminal_running.csv", &[][..]),
        ] {
            let (header, rows) = read_table(&dir.join(file))?;
            for row in &rows {
                for (name, v) in header.iter().zip(row).skip(1) {
                    if skip.contains(&name.as_str()) {
                        continue;
                    }
                    let series = match file {
                        "terminal_running.csv" => format!("terminal_{name}"),
                        _ => name.clone(),
                    };
                    w.write_record([label.clone(), series, row[0].to_string(), v.to_string()])
                        .map_err(out_err)?;
                }
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(run_dir, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn kind_fields(kind: OperatorKind) -> (&'static str, usize, usize) {
    match kind {
        OperatorKind::Symmetric { m, k } => ("sym", m, k),
        OperatorKind::Antisymmetric { m, k } => ("asym", m, k),
        OperatorKind::Diagonal { l } => ("diag", l, 0),
    }
}

/// Writes `operators.csv` (sparse entries of every operator),
/// `structure_constants.csv` (g and f triplets) and the JSON cache file for
/// dimension `d` into `dir`. Returns the written paths.
pub fn write_basis_tables(d: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let basis = OperatorBasis::new(d)?;
    create_dir(dir)?;
    let ops = dir.join(format!("su{d}-{ORDERING_TAG}-operators.csv"));
    let mut w = csv_writer(&ops)?;
    w.write_record(["index", "family", "a", "b", "row", "col", "re", "im"])
        .map_err(csv_error(&ops))?;
    for index in 1..=basis.len() {
        let (family, a, b) = kind_fields(operator_kind(index, d)?);
        for &(r, c, v) in basis.operator(index)?.entries() {
            w.write_record([
                index.to_string(),
                family.to_string(),
                a.to_string(),
                b.to_string(),
                (r + 1).to_string(),
                (c + 1).to_string(),
                v.re.to_string(),
                v.im.to_string(),
            ])
            .map_err(csv_error(&ops))?;
        }
    }
    w.flush().map_err(|e| Error::io(&ops, e))?;

    let sc = StructureConstants::compute(&basis);
    let table = dir.join(format!("su{d}-{ORDERING_TAG}-structure.csv"));
    let mut w = csv_writer(&table)?;
    w.write_record(["tensor", "k", "m", "l", "value"])
        .map_err(csv_error(&table))?;
    for (name, triplets) in [("g", sc.g()), ("f", sc.f())] {
        for t in triplets {
            w.write_record([
                name.to_string(),
                t.k.to_string(),
                t.m.to_string(),
                t.l.to_string(),
                t.value.to_string(),
            ])
            .map_err(csv_error(&table))?;
        }
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    let json = StructureConstants::cache_path(dir, d);
    sc.save(&json)?;
    Ok(vec![ops, table, json])
}
