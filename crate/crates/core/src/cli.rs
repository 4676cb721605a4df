//! Command-line front end. Every subcommand reads an optional `key = value`
//! config, applies flag overrides, runs one suite and writes a report as JSON
//! or CSV.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::fock::{
    check_wick_identity, factorization_convergence, wick_convergence, FockSpace, SourceProfile, TimeGrid,
};
use crate::genfun::{green, z_series, GenfunError, DEFAULT_ORDER_CAP};
use crate::lattice::{
    build_kernel, fourier_chain_propagator, kernel_residual, propagator, Boundary, Geometry, ModelSpec,
    RESIDUAL_TOLERANCE,
};
use crate::oracle::{compare_full, compare_routes, default_source, QuadratureMode, QuadratureSpec, MIN_NODES};
use crate::wick::verify_coefficient_identity;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "zgen", version, about = "Generating functional and S-matrix checks for lattice phi^4")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub p_max: Option<usize>,
    #[arg(long, global = true)]
    pub m_max: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact check of the time-ordering coefficient identity.
    WickVerify,
    /// Build the lattice propagator and report `K Delta + I`.
    Propagator,
    /// Perturbative Z[J] per order.
    ZSeries,
    /// n-point Green's function per order.
    Green {
        /// Comma-separated site indices.
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<usize>>,
    },
    /// Perturbative series against direct quadrature.
    Compare,
    /// Operator-level Wick identity and slicing convergence.
    FockCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Runtime(_) => EXIT_FAIL,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(err: impl fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Point,
    Chain,
    Grid,
}

/// Everything a run needs. Field names double as config keys, see
/// [`RunConfig::KEYS`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub geometry: GeometryKind,
    /// Sites along the chain, or time sites of a grid.
    pub sites: usize,
    /// Space sites of a grid.
    pub space_sites: usize,
    pub spacing: f64,
    pub space_spacing: f64,
    pub mass: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub boundary: Boundary,
    pub p_max: usize,
    pub m_max: usize,
    pub n_max: usize,
    pub steps: usize,
    pub dim: usize,
    pub t0: f64,
    pub t1: f64,
    pub amplitude: f64,
    pub source: f64,
    pub nodes: usize,
    pub cutoff: Option<f64>,
    pub points: Option<Vec<usize>>,
    pub tolerance: Option<f64>,
    #[serde(skip)]
    pub format: Format,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryKind::Point,
            sites: 4,
            space_sites: 2,
            spacing: 1.0,
            space_spacing: 1.0,
            mass: 1.0,
            epsilon: 0.1,
            lambda: 0.1,
            boundary: Boundary::Periodic,
            p_max: 2,
            m_max: 12,
            n_max: 3,
            steps: 200,
            dim: 16,
            t0: 0.0,
            t1: 4.0,
            amplitude: 0.2,
            source: 0.1,
            nodes: MIN_NODES,
            cutoff: None,
            points: None,
            tolerance: None,
            format: Format::Json,
            output: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value.parse().map_err(|_| usage(format!("line {line}: cannot parse `{value}` for `{key}`")))
}

fn parse_points(value: &str) -> Result<Vec<usize>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("bad site index `{s}`")))
        .collect()
}

impl RunConfig {
    pub const KEYS: [&'static str; 23] = [
        "geometry",
        "N",
        "Nx",
        "a",
        "ax",
        "m",
        "epsilon",
        "lambda",
        "boundary",
        "p_max",
        "m_max",
        "n_max",
        "steps",
        "dim",
        "t0",
        "t1",
        "amplitude",
        "source",
        "nodes",
        "cutoff",
        "points",
        "tolerance",
        "format",
    ];

    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
    /// keys are rejected. `output` is also accepted.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        let mut seen = BTreeSet::new();
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| usage(format!("line {line_no}: expected `key = value`")))?;
            if !seen.insert(key.to_string()) {
                return Err(usage(format!("line {line_no}: duplicate key `{key}`")));
            }
            config.set(key, value, line_no)?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        match key {
            "geometry" => {
                self.geometry = match value {
                    "point" => GeometryKind::Point,
                    "chain" => GeometryKind::Chain,
                    "grid" => GeometryKind::Grid,
                    other => return Err(usage(format!("line {line}: unknown geometry `{other}`"))),
                }
            }
            "N" => self.sites = parse_value(key, value, line)?,
            "Nx" => self.space_sites = parse_value(key, value, line)?,
            "a" => self.spacing = parse_value(key, value, line)?,
            "ax" => self.space_spacing = parse_value(key, value, line)?,
            "m" => self.mass = parse_value(key, value, line)?,
            "epsilon" => self.epsilon = parse_value(key, value, line)?,
            "lambda" => self.lambda = parse_value(key, value, line)?,
            "boundary" => {
                self.boundary = match value {
                    "periodic" => Boundary::Periodic,
                    "dirichlet" => Boundary::Dirichlet,
                    other => return Err(usage(format!("line {line}: unknown boundary `{other}`"))),
                }
            }
            "p_max" => self.p_max = parse_value(key, value, line)?,
            "m_max" => self.m_max = parse_value(key, value, line)?,
            "n_max" => self.n_max = parse_value(key, value, line)?,
            "steps" => self.steps = parse_value(key, value, line)?,
            "dim" => self.dim = parse_value(key, value, line)?,
            "t0" => self.t0 = parse_value(key, value, line)?,
            "t1" => self.t1 = parse_value(key, value, line)?,
            "amplitude" => self.amplitude = parse_value(key, value, line)?,
            "source" => self.source = parse_value(key, value, line)?,
            "nodes" => self.nodes = parse_value(key, value, line)?,
            "cutoff" => self.cutoff = Some(parse_value(key, value, line)?),
            "points" => self.points = Some(parse_points(value).map_err(|e| usage(format!("line {line}: {e}")))?),
            "tolerance" => {
                let t: f64 = parse_value(key, value, line)?;
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(usage(format!("line {line}: tolerance must be a non-negative number")));
                }
                self.tolerance = Some(t);
            }
            "format" => {
                self.format = Format::from_str(value, true)
                    .map_err(|_| usage(format!("line {line}: unknown format `{value}`")))?
            }
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(usage(format!("line {line}: unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Flags win over the file.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.output {
            self.output = Some(v.clone());
        }
        if let Some(v) = o.format {
            self.format = v;
        }
        if let Some(v) = o.p_max {
            self.p_max = v;
        }
        if let Some(v) = o.m_max {
            self.m_max = v;
        }
        if let Some(v) = o.steps {
            self.steps = v;
        }
        if let Some(v) = o.dim {
            self.dim = v;
        }
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.mass {
            self.mass = v;
        }
        if let Some(v) = o.epsilon {
            self.epsilon = v;
        }
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let geometry = match self.geometry {
            GeometryKind::Point => Geometry::Point,
            GeometryKind::Chain => Geometry::Chain { sites: self.sites, spacing: self.spacing },
            GeometryKind::Grid => Geometry::Grid {
                time_sites: self.sites,
                space_sites: self.space_sites,
                time_spacing: self.spacing,
                space_spacing: self.space_spacing,
            },
        };
        let spec = ModelSpec {
            geometry,
            mass: self.mass,
            epsilon: self.epsilon,
            boundary: self.boundary,
            coupling: self.lambda,
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        Ok(spec)
    }

    fn check_order(&self) -> Result<(), CliError> {
        if self.p_max > DEFAULT_ORDER_CAP {
            return Err(usage(format!("order {} exceeds the cap of {DEFAULT_ORDER_CAP}", self.p_max)));
        }
        Ok(())
    }
}

/// The result of one subcommand.
pub struct Report {
    pub command: &'static str,
    pub pass: bool,
    pub notes: Vec<String>,
    pub result: Value,
    pub csv_header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<String>>,
}

impl Report {
    pub fn render(&self, config: &RunConfig) -> Result<String, CliError> {
        match config.format {
            Format::Json => {
                let doc = json!({
                    "schema": SCHEMA_VERSION,
                    "command": self.command,
                    "pass": self.pass,
                    "notes": self.notes,
                    "config": config,
                    "result": self.result,
                });
                let mut text = serde_json::to_string_pretty(&doc).map_err(runtime)?;
                text.push('\n');
                Ok(text)
            }
            Format::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                writer.write_record(&self.csv_header).map_err(runtime)?;
                for row in &self.csv_rows {
                    writer.write_record(row).map_err(runtime)?;
                }
                String::from_utf8(writer.into_inner().map_err(runtime)?).map_err(runtime)
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Value, CliError> {
    serde_json::to_value(value).map_err(runtime)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn complex_cells(z: Complex64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

fn cmd_wick_verify(config: &RunConfig) -> Result<Report, CliError> {
    if config.m_max == 0 {
        return Err(usage("m_max must be at least 1"));
    }
    let report = verify_coefficient_identity(config.m_max).map_err(|e| usage(e.to_string()))?;
    let mut notes = Vec::new();
    if let Some(first) = report.first_failure() {
        notes.push(format!("first failure at m = {}, r = {}", first.m, first.r));
    }
    let rows = report
        .cases
        .iter()
        .map(|c| vec![c.m.to_string(), c.r.to_string(), c.lhs.to_string(), c.rhs.to_string(), c.pass.to_string()])
        .collect();
    Ok(Report {
        command: "wick-verify",
        pass: report.pass,
        notes,
        result: to_json(&report)?,
        csv_header: vec!["m", "r", "lhs", "rhs", "pass"],
        csv_rows: rows,
    })
}

fn cmd_propagator(config: &RunConfig) -> Result<Report, CliError> {
    let spec = config.model()?;
    let kernel = build_kernel(&spec).map_err(|e| usage(e.to_string()))?;
    let delta = propagator(&kernel).map_err(runtime)?;
    let residual = kernel_residual(&kernel, &delta);
    let tolerance = config.tolerance.unwrap_or(RESIDUAL_TOLERANCE);
    let fourier = match (spec.geometry, spec.boundary) {
        (Geometry::Chain { .. }, Boundary::Periodic) => {
            let f = fourier_chain_propagator(&spec).map_err(runtime)?;
            Some((delta.matrix() - f.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max))
        }
        _ => None,
    };
    let n = delta.size();
    let matrix: Vec<Vec<[f64; 2]>> =
        (0..n).map(|x| (0..n).map(|y| [delta.get(x, y).re, delta.get(x, y).im]).collect()).collect();
    let rows = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .map(|(x, y)| {
            let [re, im] = complex_cells(delta.get(x, y));
            vec![x.to_string(), y.to_string(), re, im]
        })
        .collect();
    let pass = residual < tolerance && fourier.is_none_or(|d| d < tolerance);
    Ok(Report {
        command: "propagator",
        pass,
        notes: Vec::new(),
        result: json!({
            "sites": n,
            "residual": residual,
            "fourier_deviation": fourier,
            "tolerance": tolerance,
            "delta": matrix,
        }),
        csv_header: vec!["x", "y", "re", "im"],
        csv_rows: rows,
    })
}

fn propagator_for(config: &RunConfig) -> Result<(ModelSpec, Arc<crate::lattice::Propagator>), CliError> {
    let spec = config.model()?;
    let kernel = build_kernel(&spec).map_err(|e| usage(e.to_string()))?;
    Ok((spec, Arc::new(propagator(&kernel).map_err(runtime)?)))
}

fn cmd_z_series(config: &RunConfig) -> Result<Report, CliError> {
    config.check_order()?;
    let (spec, delta) = propagator_for(config)?;
    let series = z_series(&delta, config.p_max).map_err(runtime)?;
    let normalized = series.normalize().map_err(runtime)?;
    let source = default_source(spec.site_count(), config.source);
    let values = normalized.evaluate(&source).map_err(runtime)?;
    let vacuum = series.vacuum_coefficients();
    let orders: Vec<Value> = (0..=config.p_max)
        .map(|p| {
            json!({
                "order": p,
                "vacuum": [vacuum[p].re, vacuum[p].im],
                "normalized_at_source": [values[p].re, values[p].im],
                "monomials": series.orders()[p].len(),
            })
        })
        .collect();
    let rows = (0..=config.p_max)
        .map(|p| {
            let [vr, vi] = complex_cells(vacuum[p]);
            let [zr, zi] = complex_cells(values[p]);
            vec![p.to_string(), vr, vi, zr, zi, series.orders()[p].len().to_string()]
        })
        .collect();
    Ok(Report {
        command: "z-series",
        pass: true,
        notes: Vec::new(),
        result: json!({
            "source": source,
            "sum_at_lambda": {
                "normalized": complex_pair(normalized.sum_at(config.lambda, &source).map_err(runtime)?),
            },
            "orders": orders,
        }),
        csv_header: vec!["order", "vacuum_re", "vacuum_im", "normalized_re", "normalized_im", "monomials"],
        csv_rows: rows,
    })
}

fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn cmd_green(config: &RunConfig, points: Option<Vec<usize>>) -> Result<Report, CliError> {
    config.check_order()?;
    let points =
        points.or_else(|| config.points.clone()).ok_or_else(|| usage("green needs --points or a `points` key"))?;
    let (_, delta) = propagator_for(config)?;
    let series = z_series(&delta, config.p_max).and_then(|s| s.normalize()).map_err(runtime)?;
    let result = green(&series, &points).map_err(|e| match e {
        GenfunError::InvalidSite { .. } => usage(e.to_string()),
        other => runtime(other),
    })?;
    let mut notes = Vec::new();
    if points.len() % 2 == 1 {
        notes.push(format!("odd point count {}: vanishes identically by parity", points.len()));
    }
    let rows = result
        .per_order
        .iter()
        .enumerate()
        .map(|(p, z)| {
            let [re, im] = complex_cells(*z);
            vec![p.to_string(), re, im]
        })
        .collect();
    Ok(Report {
        command: "green",
        pass: true,
        notes,
        result: json!({
            "green": to_json(&result)?,
            "sum_at_lambda": complex_pair(result.sum_at(config.lambda)),
        }),
        csv_header: vec!["order", "re", "im"],
        csv_rows: rows,
    })
}

fn cmd_compare(config: &RunConfig) -> Result<Report, CliError> {
    config.check_order()?;
    let spec = config.model()?;
    let n = spec.site_count();
    let tolerance = config.tolerance.unwrap_or(if n == 1 { 1e-6 } else { 1e-4 });
    let source = default_source(n, config.source);
    let quad = QuadratureSpec {
        cutoff: config.cutoff,
        nodes: config.nodes,
        mode: QuadratureMode::PerOrder { p_max: config.p_max },
    };
    let report = compare_routes(&spec, &quad, &source, tolerance).map_err(|e| usage(e.to_string()))?;
    let mut notes = Vec::new();
    let mut pass = report.pass;
    if let Some(first) = report.first_failure() {
        notes.push(format!(
            "{} at order {} deviates by {:e} (tolerance {:e})",
            first.quantity, first.order, first.relative_deviation, tolerance
        ));
    }
    let full = if n == 1 {
        let quad = QuadratureSpec { mode: QuadratureMode::Full { lambda: config.lambda }, ..quad };
        let full = compare_full(&spec, &quad, &source, config.p_max).map_err(runtime)?;
        if !full.pass {
            notes.push(format!("resummed integral deviates by {:e}", full.relative_deviation));
            pass = false;
        }
        Some(full)
    } else {
        None
    };
    let rows = report
        .entries
        .iter()
        .map(|e| {
            let [sr, si] = complex_cells(e.series);
            let [qr, qi] = complex_cells(e.quadrature);
            vec![
                e.quantity.clone(),
                e.order.to_string(),
                sr,
                si,
                qr,
                qi,
                num(e.absolute_deviation),
                num(e.relative_deviation),
                e.pass.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        command: "compare",
        pass,
        notes,
        result: json!({ "per_order": to_json(&report)?, "resummed": to_json(&full)? }),
        csv_header: vec![
            "quantity",
            "order",
            "series_re",
            "series_im",
            "quadrature_re",
            "quadrature_im",
            "absolute_deviation",
            "relative_deviation",
            "pass",
        ],
        csv_rows: rows,
    })
}

/// Continuum Wick residual bound.
pub const FOCK_TOLERANCE: f64 = 1e-3;

fn cmd_fock(config: &RunConfig) -> Result<Report, CliError> {
    let space = FockSpace::new(config.dim, config.mass).map_err(|e| usage(e.to_string()))?;
    let grid = TimeGrid::new(config.t0, config.t1, config.steps).map_err(|e| usage(e.to_string()))?;
    let source = SourceProfile::pulse(&grid, config.amplitude);
    let tolerance = config.tolerance.unwrap_or(FOCK_TOLERANCE);
    let wick = check_wick_identity(&space, &grid, &source).map_err(runtime)?;
    let convergence = wick_convergence(&space, &grid, &source).map_err(runtime)?;
    let factorization = factorization_convergence(&space, &grid, config.lambda, &source).map_err(runtime)?;
    let mut notes = Vec::new();
    if wick.truncation_warning {
        notes.push(format!(
            "truncation: top level population {:e} at dim {}; increase dim",
            wick.top_population, config.dim
        ));
    }
    if !convergence.converged {
        notes.push("wick identity: slicing error not in the second-order regime".into());
    }
    if !factorization.converged {
        notes.push("factorization: slicing error not in the second-order regime".into());
    }
    let within = wick.continuum_residual < tolerance;
    if !within {
        notes.push(format!("wick residual {:e} exceeds {:e}", wick.continuum_residual, tolerance));
    }
    let pass = within && convergence.converged && factorization.converged;
    let mut rows = vec![vec![
        "wick".to_string(),
        wick.steps.to_string(),
        num(wick.continuum_residual),
        num(wick.discrete_residual),
        String::new(),
    ]];
    for (label, report) in [("wick_convergence", &convergence), ("factorization", &factorization)] {
        for (i, (&steps, &dev)) in report.steps.iter().zip(&report.deviations).enumerate() {
            let ratio =
                if i == 0 { String::new() } else { report.ratios.get(i - 1).map(|r| num(*r)).unwrap_or_default() };
            rows.push(vec![label.to_string(), steps.to_string(), num(dev), String::new(), ratio]);
        }
    }
    Ok(Report {
        command: "fock-check",
        pass,
        notes,
        result: json!({
            "source": to_json(&source)?,
            "tolerance": tolerance,
            "wick": to_json(&wick)?,
            "wick_convergence": to_json(&convergence)?,
            "factorization": to_json(&factorization)?,
        }),
        csv_header: vec!["check", "steps", "deviation", "discrete_residual", "ratio"],
        csv_rows: rows,
    })
}

fn load_config(overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = match &overrides.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    config.apply(overrides);
    Ok(config)
}

/// Runs a parsed command and returns the rendered report with its verdict.
pub fn execute(cli: Cli) -> Result<(RunConfig, Report), CliError> {
    let config = load_config(&cli.overrides)?;
    let report = match cli.command {
        Command::WickVerify => cmd_wick_verify(&config)?,
        Command::Propagator => cmd_propagator(&config)?,
        Command::ZSeries => cmd_z_series(&config)?,
        Command::Green { points } => cmd_green(&config, points)?,
        Command::Compare => cmd_compare(&config)?,
        Command::FockCheck => cmd_fock(&config)?,
    };
    Ok((config, report))
}

fn emit(config: &RunConfig, report: &Report) -> Result<(), CliError> {
    let text = report.render(config)?;
    match &config.output {
        Some(path) => std::fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(runtime),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let outcome = execute(cli).and_then(|(config, report)| {
        emit(&config, &report)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            for note in &report.notes {
                eprintln!("{}: {note}", report.command);
            }
            if report.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# model\ngeometry = chain\nN = 3\nm = 1.5  # heavier\nboundary = dirichlet\npoints = 0, 2\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.geometry, GeometryKind::Chain);
        assert_eq!(c.sites, 3);
        assert_eq!(c.mass, 1.5);
        assert_eq!(c.boundary, Boundary::Dirichlet);
        assert_eq!(c.points, Some(vec![0, 2]));
        assert_eq!(c.model().unwrap().site_count(), 3);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed_lines() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse("m = 1\nm = 2"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse("m 1"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse("steps = many"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse("tolerance = -1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let values = [
            "chain", "2", "2", "1", "1", "1", "0.1", "0.1", "periodic", "1", "4", "2", "10", "4", "0", "1", "0.2",
            "0.1", "64", "12", "0,1", "1e-3", "csv",
        ];
        let text: String = RunConfig::KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert!(RunConfig::parse(&text).is_ok());
    }

    #[test]
    fn flags_override_the_file() {
        let mut c = RunConfig::parse("m = 2\nsteps = 10").unwrap();
        c.apply(&Overrides { mass: Some(3.0), ..Default::default() });
        assert_eq!(c.mass, 3.0);
        assert_eq!(c.steps, 10);
    }

    #[test]
    fn order_cap_is_a_usage_error() {
        let c = RunConfig { p_max: DEFAULT_ORDER_CAP + 1, points: Some(vec![0, 0]), ..Default::default() };
        assert!(matches!(cmd_green(&c, None), Err(CliError::Usage(_))));
    }

    #[test]
    fn wick_verify_zero_is_a_usage_error() {
        let c = RunConfig { m_max: 0, ..Default::default() };
        assert!(matches!(cmd_wick_verify(&c), Err(CliError::Usage(_))));
    }
}
