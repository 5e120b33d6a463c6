//! Command-line front end. JSON goes to stdout, human summaries to stderr.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complex::{
    build_incidence, complex_json, discover_cells, explore_from, export_complex_with, incidence_table, type_table,
    ExportFormat, Region, SpineComplex,
};
use crate::cusp::Cusp;
use crate::error::{Result, SpineError};
use crate::heights::{first_contact_pair, height_eval, pair_invariant, riem_gradient, HeightParams, Model, ModelKind, ModelPoint};
use crate::spine::{first_contact_check, retract_map, solve_tie};
use crate::suites::{self, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub tie: f64,
    pub fit: f64,
    pub newton: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tie: 1e-9,
            fit: 1e-8,
            newton: 1e-12,
        }
    }
}

/// Everything a run depends on; the `--config` file has this shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: String,
    #[serde(rename = "D")]
    pub d: Option<i64>,
    pub lambda: f64,
    /// Per-cusp scales, keyed by cusp string.
    pub lambda_overrides: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    /// Flattened `lo,hi` pairs per axis.
    pub region: Option<Vec<f64>>,
    pub grid: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "h2".into(),
            d: None,
            lambda: 1.0,
            lambda_overrides: BTreeMap::new(),
            tolerances: Tolerances::default(),
            region: None,
            grid: 32,
            seed: 0,
            output: None,
            format: "json".into(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if !(t.tie > 0.0 && t.fit > 0.0 && t.newton > 0.0) {
            return Err(SpineError::PreconditionViolated("tolerances must be positive".into()));
        }
        if !(self.lambda > 0.0) || self.lambda_overrides.values().any(|v| !(*v > 0.0)) {
            return Err(SpineError::PreconditionViolated("scales must be positive".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        let kind = ModelKind::from_name(&self.model)?;
        let d = self.d.unwrap_or(match kind {
            ModelKind::ModularH2 => 0,
            ModelKind::BianchiH3 => -1,
            ModelKind::HilbertH2xH2 => 2,
        });
        Model::new(kind, d)
    }

    pub fn build_params(&self, model: &Model) -> Result<HeightParams> {
        let mut p = HeightParams::uniform(self.lambda);
        for (c, v) in &self.lambda_overrides {
            p = p.with_override(Cusp::parse(c, model.d())?, *v);
        }
        Ok(p)
    }

    pub fn build_region(&self, model: &Model) -> Result<Region> {
        match &self.region {
            None => Ok(Region::default_for(model)),
            Some(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                Region::parse(model.kind, &s.join(","))
            }
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spinekit", version, about = "Spines of exhaustion functions for arithmetic groups")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// h2, bianchi or hilbert
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Field discriminant parameter
    #[arg(long = "D", global = true, allow_negative_numbers = true)]
    pub d: Option<i64>,
    /// Uniform height scale
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Per-cusp scale, `cusp=value`; repeatable
    #[arg(long = "scale", global = true)]
    pub scales: Vec<String>,
    /// JSON file with a RunConfig
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tie_tol: Option<f64>,
    #[arg(long, global = true)]
    pub fit_tol: Option<f64>,
    #[arg(long, global = true)]
    pub newton_tol: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Invariants,
    Cone,
    Flowform,
    Cover,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Off,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Height and Riemannian gradient of one cusp at a point
    Heights {
        #[arg(long)]
        cusp: String,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Retraction of a point onto the spine
    Retract {
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Discovery, incidence and export of the spine over a region
    Spine {
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Points per exported outline
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Randomized property suites
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid for the cover suite
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Incidence table by orbit and by symmetry type
    Table {
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        /// Explore around the tie of these cusps instead of a grid
        #[arg(long, allow_hyphen_values = true)]
        around: Option<String>,
        /// Seed point for solving the `--around` tie
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
    },
    /// Write the discovered complex to a file
    Export {
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// First-contact height and witness of a pair of cusps
    FirstContact {
        /// Two cusps, comma separated
        #[arg(long, allow_hyphen_values = true)]
        cusps: String,
    },
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<SpineError> for Failure {
    fn from(e: SpineError) -> Self {
        match e {
            SpineError::Parse(_)
            | SpineError::UnsupportedField(_)
            | SpineError::NotSquarefree(_)
            | SpineError::ModelMismatch(_)
            | SpineError::FieldMismatch(..)
            | SpineError::InvalidPoint(_)
            | SpineError::EqualCusps
            | SpineError::PreconditionViolated(_)
            | SpineError::NonIntegerInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

fn merged_config(common: &Common) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(m) = &common.model {
        cfg.model = m.clone();
    }
    if common.d.is_some() {
        cfg.d = common.d;
    }
    if let Some(l) = common.lambda {
        cfg.lambda = l;
    }
    for s in &common.scales {
        let (c, v) = s.split_once('=').ok_or_else(|| Failure::Usage(format!("scale '{s}' is not cusp=value")))?;
        let v: f64 = v.parse().map_err(|_| Failure::Usage(format!("scale '{s}'")))?;
        cfg.lambda_overrides.insert(c.to_string(), v);
    }
    if let Some(t) = common.tie_tol {
        cfg.tolerances.tie = t;
    }
    if let Some(t) = common.fit_tol {
        cfg.tolerances.fit = t;
    }
    if let Some(t) = common.newton_tol {
        cfg.tolerances.newton = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &mut dyn Write, v: &impl Serialize) -> std::result::Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Failed(e.to_string()))?;
    s.push('\n');
    out.write_all(s.as_bytes()).map_err(|e| Failure::Failed(e.to_string()))
}

fn parse_cusps(s: &str, d: i64) -> Result<Vec<Cusp>> {
    s.split(',').map(|c| Cusp::parse(c.trim(), d)).collect()
}

fn region_for(cfg: &RunConfig, model: &Model, flag: &Option<String>) -> Result<Region> {
    match flag {
        Some(s) => Region::parse(model.kind, s),
        None => cfg.build_region(model),
    }
}

fn discover(cfg: &RunConfig, model: &Model, params: &HeightParams, region: &Region, grid: usize) -> Result<SpineComplex> {
    let cx = discover_cells(model, params, region, grid, cfg.tolerances.tie)?;
    Ok(build_incidence(&cx, cfg.tolerances.tie))
}

fn summary(cx: &SpineComplex) -> serde_json::Value {
    json!({
        "model": {"kind": cx.model.kind.name(), "D": cx.model.d()},
        "cells": cx.cells.len(),
        "orbits": cx.orbit_summary(),
        "failures": cx.failures,
    })
}

fn report_suites(reports: &[SuiteReport], err: &mut dyn Write) -> bool {
    for r in reports {
        let _ = writeln!(
            err,
            "{}: {}/{} passed, max error {:e} (tolerance {:e})",
            r.suite, r.passed, r.trials, r.max_error, r.tolerance
        );
    }
    reports.iter().all(|r| r.ok())
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let cfg = merged_config(&cli.common)?;
    let model = cfg.build_model()?;
    let params = cfg.build_params(&model)?;
    let tol = cfg.tolerances.tie;
    match cli.command {
        Command::Heights { cusp, point } => {
            let c = Cusp::parse(&cusp, model.d())?;
            let z = ModelPoint::parse(model.kind, &point)?;
            let f = height_eval(&model, &params, &c, &z)?;
            let g = riem_gradient(&model, &params, &c, &z)?;
            let _ = writeln!(err, "f = {f}");
            emit(out, &json!({"cusp": c.to_string(), "point": z, "f": f, "grad": g}))?;
        }
        Command::Retract { point, t } => {
            let z = ModelPoint::parse(model.kind, &point)?;
            let r = retract_map(&model, &params, &z, t, tol)?;
            let _ = writeln!(err, "retracted to {:?}, active {:?}", r.point.coords(), r.active.cusp_strings());
            emit(out, &r)?;
        }
        Command::Spine {
            region,
            grid,
            out: path,
            format,
            resolution,
        } => {
            let region = region_for(&cfg, &model, &region)?;
            let cx = discover(&cfg, &model, &params, &region, grid.unwrap_or(cfg.grid))?;
            let _ = writeln!(err, "{} cells in {} orbits", cx.cells.len(), cx.orbits().len());
            match path.or(cfg.output.clone()) {
                Some(p) => {
                    let fmt = match format {
                        Some(Format::Off) => ExportFormat::Off,
                        Some(Format::Json) => ExportFormat::Json,
                        None => cfg.format.parse()?,
                    };
                    export_complex_with(&cx, fmt, &p, resolution)?;
                    let mut s = summary(&cx);
                    s["out"] = json!(p.display().to_string());
                    emit(out, &s)?;
                }
                None => {
                    out.write_all(complex_json(&cx).as_bytes()).map_err(|e| Failure::Failed(e.to_string()))?;
                }
            }
        }
        Command::Export {
            region,
            grid,
            out: path,
            format,
            resolution,
        } => {
            let region = region_for(&cfg, &model, &region)?;
            let cx = discover(&cfg, &model, &params, &region, grid.unwrap_or(cfg.grid))?;
            let fmt = match format {
                Format::Json => ExportFormat::Json,
                Format::Off => ExportFormat::Off,
            };
            export_complex_with(&cx, fmt, &path, resolution)?;
            let _ = writeln!(err, "wrote {}", path.display());
            let mut s = summary(&cx);
            s["out"] = json!(path.display().to_string());
            emit(out, &s)?;
        }
        Command::Verify { suite, trials, seed, grid } => {
            let seed = seed.unwrap_or(cfg.seed);
            let reports = match suite {
                Suite::Invariants => vec![
                    suites::height_invariance(&model, &params, trials, seed),
                    suites::retraction_equivariance(&model, &params, trials, seed),
                ],
                Suite::Cone => suites::cone_lemmas(trials, seed),
                Suite::Flowform => {
                    let mut r = suites::flow_form(&model, &params, trials, seed);
                    if r.max_error > cfg.tolerances.fit {
                        r.failed = r.failed.max(1);
                    }
                    vec![r]
                }
                Suite::Cover => vec![suites::cover(&model, &params, grid.unwrap_or(cfg.grid), trials, seed)?],
            };
            let ok = report_suites(&reports, err);
            emit(out, &json!({"ok": ok, "reports": reports}))?;
            if !ok {
                return Ok(EXIT_FAILED);
            }
        }
        Command::Table {
            region,
            grid,
            around,
            point,
        } => {
            let cx = match around {
                Some(list) => {
                    let cusps = parse_cusps(&list, model.d())?;
                    let seed = match point {
                        Some(p) => ModelPoint::parse(model.kind, &p)?,
                        None => return Err(Failure::Usage("--around needs --point".into())),
                    };
                    let ts = solve_tie(&model, &params, &cusps, &seed, cfg.tolerances.newton.max(tol))?;
                    build_incidence(&explore_from(&model, &params, &[ts], tol), tol)
                }
                None => {
                    let region = region_for(&cfg, &model, &region)?;
                    discover(&cfg, &model, &params, &region, grid.unwrap_or(cfg.grid))?
                }
            };
            let orbits = incidence_table(&cx)?;
            let types = type_table(&orbits, model.d())?;
            let _ = write!(err, "{}", types.render());
            emit(out, &json!({"orbits": orbits, "types": types}))?;
        }
        Command::FirstContact { cusps } => {
            let cs = parse_cusps(&cusps, model.d())?;
            if cs.len() != 2 {
                return Err(Failure::Usage("--cusps needs exactly two cusps".into()));
            }
            let (h, w) = first_contact_pair(&model, &params, &cs[0], &cs[1])?;
            let rho = pair_invariant(&model, &params, &cs[0], &cs[1])?;
            let check = first_contact_check(&model, &params, &w, &cs[0], &cs[1])?;
            let _ = writeln!(err, "first contact at height {h}");
            emit(
                out,
                &json!({
                    "cusps": [cs[0].to_string(), cs[1].to_string()],
                    "height": h,
                    "witness": w,
                    "pair_invariant": rho,
                    "check": check,
                }),
            )?;
        }
    }
    Ok(EXIT_OK)
}

/// Caps rayon's worker count from `SPINEKIT_THREADS`, once per process.
fn configure_threads() {
    if let Some(n) = std::env::var("SPINEKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs the command line `args` (program name first) and returns the
/// exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Failed(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_FAILED
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
