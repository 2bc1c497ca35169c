//! Experiment specifications, runs, and their on-disk artifacts.
//!
//! A run writes `<out>/<name>/trace.csv` (or `trace.json`) and
//! `<out>/<name>/summary.json`. Every check happens before the output
//! directory is created, so a rejected spec leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::harness::instances::generate_instance;
use crate::linalg::dist;
use crate::solver::{
    distance_to_solution_set, run_kumam, run_main, AlphaSchedule, Anchor, BetaSchedule, IterationRecord,
    ProblemInstance, ResolventOrder, SolverConfig, Trace,
};

/// Fixed leading and trailing columns of `trace.csv`; `x_0 … x_{d-1}` sit between them.
pub const TRACE_HEAD: &[&str] = &["n"];
pub const TRACE_TAIL: &[&str] = &[
    "dist_to_ref",
    "dist_to_proj_anchor0",
    "dist_to_proj_x1",
    "ep_residual_max",
    "fixpoint_residual",
    "step_norm",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Builtin { name: String, dim: usize },
    Inline { problem: Box<ProblemInstance> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Main,
    Kumam,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: TraceFormat,
    /// Parent directory of the per-run directory; overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Solver settings of a spec. The probe seed is the spec's `seed`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent_order: Option<ResolventOrder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Anchor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ep_probes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Drives instance generation and the residual probes.
    pub seed: u64,
    pub instance: InstanceSpec,
    pub solver: SolverKind,
    #[serde(default)]
    pub config: ConfigSpec,
    /// Starting point; defaults to the instance's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<Point>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("experiment spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("specs serialize")
    }

    pub fn solver_config(&self) -> SolverConfig {
        let c = &self.config;
        let mut cfg = SolverConfig::new(self.seed);
        if let Some(a) = &c.alpha {
            cfg.alpha = a.clone();
        }
        if let Some(b) = &c.beta {
            cfg.beta = b.clone();
        }
        if let Some(v) = c.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = c.stop_residual {
            cfg.stop_residual = v;
        }
        if let Some(v) = c.resolvent_tol {
            cfg.resolvent_tol = v;
        }
        if let Some(v) = c.resolvent_order {
            cfg.resolvent_order = v;
        }
        if let Some(v) = &c.anchor {
            cfg.anchor = v.clone();
        }
        if let Some(v) = c.ep_probes {
            cfg.ep_probes = v;
        }
        cfg
    }

    /// Everything a run needs, checked. Any failure here is a validation error.
    pub fn prepare(&self) -> Result<PreparedRun> {
        let invalid = |e: Error| Error::Validation(e.to_string());
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.name.starts_with('.')
        {
            return Err(Error::Validation(format!(
                "experiment name '{}' must be non-empty and use only [A-Za-z0-9._-]",
                self.name
            )));
        }
        let config = self.solver_config();
        config.validate()?;
        let problem = match &self.instance {
            InstanceSpec::Builtin { name, dim } => generate_instance(name, *dim, self.seed),
            InstanceSpec::Inline { problem } => {
                let p = (**problem).clone();
                p.validate().map(|_| p)
            }
        }
        .map_err(invalid)?;
        let x1 = self
            .x1
            .clone()
            .or_else(|| problem.default_start.clone())
            .ok_or_else(|| Error::Validation("no starting point: set x1".into()))?;
        if x1.dim() != problem.dim() {
            return Err(Error::Validation("x1 has wrong dimension".into()));
        }
        problem.f.check_interior(&x1).map_err(invalid)?;
        if !problem.set.contains(&x1, crate::tol::MEMBERSHIP) {
            return Err(Error::Validation("x1 is not in C".into()));
        }
        if self.solver == SolverKind::Kumam && problem.bifunctions.len() != 1 {
            return Err(Error::Validation(
                "the kumam solver takes exactly one bifunction".into(),
            ));
        }
        crate::solver::anchor_point(&problem, &config.anchor).map_err(invalid)?;
        Ok(PreparedRun {
            problem,
            config,
            x1,
            solver: self.solver,
        })
    }
}

/// A validated spec, ready to execute.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub problem: ProblemInstance,
    pub config: SolverConfig,
    pub x1: Point,
    pub solver: SolverKind,
}

impl PreparedRun {
    pub fn execute(&self) -> Result<Trace> {
        match self.solver {
            SolverKind::Main => run_main(&self.problem, &self.config, &self.x1),
            SolverKind::Kumam => run_kumam(&self.problem, &self.config, &self.x1),
        }
    }
}

/// Which limit candidate the final iterate sits closer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approached {
    Anchor,
    Start,
    /// The two candidates coincide.
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCandidates {
    pub anchor: Point,
    pub proj_anchor: Point,
    pub proj_x1: Point,
    pub dist_to_proj_anchor: f64,
    pub dist_to_proj_x1: f64,
    pub approached: Approached,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub instance: String,
    pub solver: SolverKind,
    pub seed: u64,
    pub dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_x: Point,
    pub final_ep_residual_max: f64,
    pub final_fixpoint_residual: f64,
    pub final_step_norm: f64,
    pub final_dist_to_ref: Option<f64>,
    /// Euclidean distance from `final_x` to `Ω`.
    pub dist_to_solution_set: Option<f64>,
    pub limit_candidates: Option<LimitCandidates>,
}

impl RunSummary {
    pub fn new(spec: &ExperimentSpec, run: &PreparedRun, trace: &Trace) -> Result<Self> {
        let last = trace.last();
        let x = &trace.final_x;
        let limit_candidates = match (&trace.proj_anchor, &trace.proj_x1) {
            (Some(pa), Some(px)) => {
                let (da, dx) = (dist(x, pa), dist(x, px));
                let approached = if dist(pa, px) <= 1e-9 {
                    Approached::Both
                } else if da <= dx {
                    Approached::Anchor
                } else {
                    Approached::Start
                };
                Some(LimitCandidates {
                    anchor: trace.anchor.clone(),
                    proj_anchor: pa.clone(),
                    proj_x1: px.clone(),
                    dist_to_proj_anchor: da,
                    dist_to_proj_x1: dx,
                    approached,
                })
            }
            _ => None,
        };
        let problem = &run.problem;
        Ok(RunSummary {
            name: spec.name.clone(),
            instance: problem.name.clone(),
            solver: spec.solver,
            seed: spec.seed,
            dim: problem.dim(),
            iterations: trace.records.len(),
            converged: trace.converged,
            final_x: x.clone(),
            final_ep_residual_max: last.ep_residual_max,
            final_fixpoint_residual: last.fixpoint_residual,
            final_step_norm: last.step_norm,
            final_dist_to_ref: problem
                .reference_solution
                .as_ref()
                .map(|p| problem.f.bregman_distance(p, x))
                .transpose()?,
            dist_to_solution_set: distance_to_solution_set(problem, x)?,
            limit_candidates,
        })
    }
}

/// Paths written by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub trace: PathBuf,
    pub summary: PathBuf,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Header of `trace.csv` for dimension `d`.
pub fn trace_header(d: usize) -> Vec<String> {
    TRACE_HEAD
        .iter()
        .map(|s| s.to_string())
        .chain((0..d).map(|i| format!("x_{i}")))
        .chain(TRACE_TAIL.iter().map(|s| s.to_string()))
        .collect()
}

/// Writes the trace as CSV. Floats use the shortest round-tripping decimal form.
pub fn write_trace_csv(path: &Path, records: &[IterationRecord], d: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(trace_header(d)).map_err(|e| io_error(path, e))?;
    for r in records {
        let row: Vec<String> = std::iter::once(r.n.to_string())
            .chain(r.x.iter().map(|v| v.to_string()))
            .chain([
                fmt_opt(r.dist_to_ref),
                fmt_opt(r.dist_to_proj_anchor0),
                fmt_opt(r.dist_to_proj_x1),
                r.ep_residual_max.to_string(),
                r.fixpoint_residual.to_string(),
                r.step_norm.to_string(),
            ])
            .collect();
        w.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// One parsed row of `trace.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub x: Vec<f64>,
    /// The six trailing columns in [`TRACE_TAIL`] order; `None` for empty fields.
    pub values: [Option<f64>; 6],
}

/// Reads a CSV trace back, checking the header against [`trace_header`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| io_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let d = header
        .len()
        .checked_sub(TRACE_HEAD.len() + TRACE_TAIL.len())
        .ok_or_else(|| Error::Validation("trace header too short".into()))?;
    if header != trace_header(d) {
        return Err(Error::Validation(format!("unexpected trace header {header:?}")));
    }
    let bad = |line: usize, what: &str| Error::Validation(format!("trace row {line}: bad {what}"));
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        let n = rec[0].parse().map_err(|_| bad(line, "n"))?;
        let x = (1..=d)
            .map(|i| rec[i].parse::<f64>().map_err(|_| bad(line, "coordinate")))
            .collect::<Result<Vec<_>>>()?;
        let mut values = [None; 6];
        for (k, v) in values.iter_mut().enumerate() {
            let field = &rec[1 + d + k];
            if !field.is_empty() {
                *v = Some(field.parse().map_err(|_| bad(line, TRACE_TAIL[k]))?);
            }
        }
        rows.push(TraceRow { n, x, values });
    }
    Ok(rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

/// Validates, runs and persists one experiment under `out/<name>/`.
///
/// `out` overrides the spec's own output directory; with neither, `results` is used.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<(RunSummary, RunArtifacts)> {
    let run = spec.prepare()?;
    let trace = run.execute()?;
    let summary = RunSummary::new(spec, &run, &trace)?;

    let root = out
        .map(Path::to_path_buf)
        .or_else(|| spec.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let dir = root.join(&spec.name);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let trace_path = match spec.output.format {
        TraceFormat::Csv => {
            let p = dir.join("trace.csv");
            write_trace_csv(&p, &trace.records, run.problem.dim())?;
            p
        }
        TraceFormat::Json => {
            let p = dir.join("trace.json");
            write_json(&p, &trace.records)?;
            p
        }
    };
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok((
        summary,
        RunArtifacts {
            dir,
            trace: trace_path,
            summary: summary_path,
        },
    ))
}
