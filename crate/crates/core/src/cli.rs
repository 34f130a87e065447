//! Command-line front end: parses flags into a [`RunConfig`], runs one
//! experiment, and renders CSV or JSON.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cycle::{run_cycle_with, sweep_tau, CycleRecord};
use crate::fcs::{
    average_split, moments, stage_cd_expansion, variance, work_statistics, ExpansionKind,
    WorkDistribution,
};
use crate::propagator::{Scheme, DEFAULT_TOLERANCE};
use crate::spin_model::{EngineMode, EngineParams};
use crate::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(Error::Params(_)) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    #[value(alias = "measurement_based", alias = "measurement-based")]
    Measurement,
    #[value(alias = "two_bath")]
    TwoBath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Magnus4,
    Midpoint,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Magnus4 => Scheme::Magnus4,
            SchemeArg::Midpoint => Scheme::ExponentialMidpoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// `start:stop:count[:log]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl FromStr for TauGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected start:stop:count[:log|lin], got {s:?}"));
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let start = num(parts[0])?;
        let stop = num(parts[1])?;
        let count = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("{:?}: {e}", parts[2]))?;
        let spacing = match parts.get(3).map(|x| x.trim()) {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(format!("unknown spacing {other:?}")),
        };
        let grid = TauGrid {
            start,
            stop,
            count,
            spacing,
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl TauGrid {
    fn validate(&self) -> Result<(), String> {
        if self.count < 1 {
            return Err("grid count must be at least 1".into());
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start > self.stop {
            return Err(format!(
                "grid needs start <= stop, got {} > {}",
                self.start, self.stop
            ));
        }
        if self.start <= 0.0 {
            return Err("stroke durations must be positive".into());
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let s = k as f64 / n;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * s,
                    Spacing::Log => {
                        (self.start.ln() + (self.stop.ln() - self.start.ln()) * s).exp()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "otto-fcs",
    version,
    about = "Work statistics of a measurement-fuelled two-spin Otto engine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Energies, works, heats and coherences of one cycle.
    Cycle,
    /// Stroke and full-cycle quasi-probability work distributions.
    WorkDist,
    /// Scalar observables over a grid of stroke durations.
    SweepTau,
    /// l1 coherence after the heating stroke over a grid of durations.
    Coherence,
    /// Term-by-term breakdown of the compression-stroke distribution.
    ExpansionReport,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    #[arg(long, global = true, value_enum, default_value = "measurement")]
    pub mode: ModeArg,
    /// Anisotropy gamma in [-1, 1].
    #[arg(long, global = true, default_value_t = 1.0, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(
        long = "coupling-J",
        global = true,
        default_value_t = 1.0,
        allow_hyphen_values = true
    )]
    pub coupling_j: f64,
    #[arg(long, global = true, default_value_t = 1.0, allow_hyphen_values = true)]
    pub b1: f64,
    #[arg(long, global = true, default_value_t = 2.0, allow_hyphen_values = true)]
    pub b2: f64,
    /// Cold bath temperature.
    #[arg(long, global = true, default_value_t = 1.0, allow_hyphen_values = true)]
    pub temp: f64,
    /// Hot bath temperature (two-bath mode only).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub temp_hot: Option<f64>,
    /// Stroke duration for single-point commands.
    #[arg(long, global = true, default_value_t = 1.0, allow_hyphen_values = true)]
    pub tau: f64,
    /// start:stop:count[:log] for sweep-tau and coherence.
    #[arg(long, global = true)]
    pub tau_grid: Option<TauGrid>,
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE, allow_hyphen_values = true)]
    pub tol: f64,
    #[arg(long, global = true, value_enum, default_value = "magnus4")]
    pub scheme: SchemeArg,
    /// Output file; standard output when absent or "-".
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Validated configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub params: EngineParams,
    pub tau_grid: Option<TauGrid>,
    pub tol: f64,
    pub scheme: Scheme,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let o = &cli.options;
        let mode = match (o.mode, o.temp_hot) {
            (ModeArg::Measurement, _) => EngineMode::MeasurementBased,
            (ModeArg::TwoBath, Some(t)) => EngineMode::TwoBath { hot_temperature: t },
            (ModeArg::TwoBath, None) => {
                return Err(CliError::Validation(
                    "--mode two-bath requires --temp-hot".into(),
                ))
            }
        };
        let params = EngineParams::new(o.coupling_j, o.gamma, o.b1, o.b2, o.temp, o.tau, mode)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if !(o.tol > 0.0 && o.tol.is_finite()) {
            return Err(CliError::Validation(format!(
                "--tol must be positive, got {}",
                o.tol
            )));
        }
        Ok(Self {
            command: cli.command,
            params,
            tau_grid: o.tau_grid,
            tol: o.tol,
            scheme: o.scheme.into(),
            out: o.out.clone().filter(|p| p.as_os_str() != "-"),
            format: o.format,
            seed: o.seed,
        })
    }

    fn taus(&self) -> Vec<f64> {
        self.tau_grid
            .map_or_else(|| vec![self.params.tau()], |g| g.points())
    }
}

#[derive(Debug, Clone, Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    command: Command,
    mode: &'static str,
    coupling_j: f64,
    gamma: f64,
    b1: f64,
    b2: f64,
    temp: f64,
    temp_hot: Option<f64>,
    tau: f64,
    tau_grid: Option<TauGrid>,
    tol: f64,
    scheme: String,
    seed: Option<u64>,
    /// Sign convention of the work columns.
    work_convention: &'static str,
    extra: Vec<(String, f64)>,
}

impl Metadata {
    fn new(cfg: &RunConfig) -> Self {
        let p = &cfg.params;
        let (mode, temp_hot) = match p.mode() {
            EngineMode::MeasurementBased => ("measurement", None),
            EngineMode::TwoBath { hot_temperature } => ("two-bath", Some(hot_temperature)),
        };
        Self {
            tool: "otto-fcs",
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command,
            mode,
            coupling_j: p.coupling(),
            gamma: p.anisotropy(),
            b1: p.field_initial(),
            b2: p.field_final(),
            temp: p.temperature(),
            temp_hot,
            tau: p.tau(),
            tau_grid: match cfg.command {
                Command::SweepTau | Command::Coherence => cfg.tau_grid,
                _ => None,
            },
            tol: cfg.tol,
            scheme: cfg.scheme.to_string(),
            seed: cfg.seed,
            work_convention:
                "w = energy change of the working system (w1 + w2); w_engine = -(W1 + W2)",
            extra: Vec::new(),
        }
    }

    fn csv_block(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), num);
        let mut s = String::new();
        let _ = writeln!(s, "# {} {}", self.tool, self.version);
        let _ = writeln!(s, "# command = {}", command_name(self.command));
        let _ = writeln!(s, "# mode = {}", self.mode);
        let _ = writeln!(s, "# coupling_j = {}", num(self.coupling_j));
        let _ = writeln!(s, "# gamma = {}", num(self.gamma));
        let _ = writeln!(s, "# b1 = {}", num(self.b1));
        let _ = writeln!(s, "# b2 = {}", num(self.b2));
        let _ = writeln!(s, "# temp = {}", num(self.temp));
        let _ = writeln!(s, "# temp_hot = {}", opt(self.temp_hot));
        match self.tau_grid {
            Some(g) => {
                let spacing = if g.spacing == Spacing::Log {
                    "log"
                } else {
                    "linear"
                };
                let _ = writeln!(
                    s,
                    "# tau_grid = {}:{}:{}:{}",
                    num(g.start),
                    num(g.stop),
                    g.count,
                    spacing
                );
            }
            None => {
                let _ = writeln!(s, "# tau = {}", num(self.tau));
            }
        }
        let _ = writeln!(s, "# tol = {}", num(self.tol));
        let _ = writeln!(s, "# scheme = {}", self.scheme);
        let _ = writeln!(
            s,
            "# seed = {}",
            self.seed.map_or_else(|| "none".into(), |v| v.to_string())
        );
        let _ = writeln!(s, "# work_convention = {}", self.work_convention);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "# {k} = {}", num(*v));
        }
        s
    }
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Cycle => "cycle",
        Command::WorkDist => "work-dist",
        Command::SweepTau => "sweep-tau",
        Command::Coherence => "coherence",
        Command::ExpansionReport => "expansion-report",
    }
}

/// Plain table that renders to either output format.
trait Row: Serialize {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

/// Shortest representation that parses back to the same bits.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn render<R: Row>(meta: &Metadata, rows: &[R], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = meta.csv_block();
            s.push_str(&R::HEADER.join(","));
            s.push('\n');
            for r in rows {
                s.push_str(&r.cells().join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a, R> {
                metadata: &'a Metadata,
                rows: &'a [R],
            }
            let mut s = serde_json::to_string_pretty(&Doc {
                metadata: meta,
                rows,
            })
            .expect("plain data serialises");
            s.push('\n');
            s
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleRow {
    pub tau: f64,
    pub energy_a: f64,
    pub energy_b: f64,
    pub energy_c: f64,
    pub energy_d: f64,
    pub w1: f64,
    pub w2: f64,
    pub q_in: f64,
    pub q_l: f64,
    pub w_engine: f64,
    pub is_engine: bool,
    pub coherence_a: f64,
    pub coherence_b: f64,
    pub coherence_c: f64,
    pub coherence_d: f64,
    pub first_law_residual: f64,
}

impl From<&CycleRecord> for CycleRow {
    fn from(r: &CycleRecord) -> Self {
        Self {
            tau: r.params.tau(),
            energy_a: r.energy_a,
            energy_b: r.energy_b,
            energy_c: r.energy_c,
            energy_d: r.energy_d,
            w1: r.w1,
            w2: r.w2,
            q_in: r.q_in,
            q_l: r.q_l,
            w_engine: r.w_engine,
            is_engine: r.is_engine,
            coherence_a: r.coherence[0],
            coherence_b: r.coherence[1],
            coherence_c: r.coherence[2],
            coherence_d: r.coherence[3],
            first_law_residual: r.first_law_residual(),
        }
    }
}

impl Row for CycleRow {
    const HEADER: &'static [&'static str] = &[
        "tau",
        "energy_a",
        "energy_b",
        "energy_c",
        "energy_d",
        "w1",
        "w2",
        "q_in",
        "q_l",
        "w_engine",
        "is_engine",
        "coherence_a",
        "coherence_b",
        "coherence_c",
        "coherence_d",
        "first_law_residual",
    ];
    fn cells(&self) -> Vec<String> {
        let mut v: Vec<String> = [
            self.tau,
            self.energy_a,
            self.energy_b,
            self.energy_c,
            self.energy_d,
            self.w1,
            self.w2,
            self.q_in,
            self.q_l,
            self.w_engine,
        ]
        .into_iter()
        .map(num)
        .collect();
        v.push(self.is_engine.to_string());
        v.extend(
            [
                self.coherence_a,
                self.coherence_b,
                self.coherence_c,
                self.coherence_d,
                self.first_law_residual,
            ]
            .into_iter()
            .map(num),
        );
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistRow {
    pub stage: String,
    pub w: f64,
    pub p: f64,
    pub p_diagonal: f64,
    pub p_off_diagonal: f64,
    pub origin: &'static str,
}

impl Row for DistRow {
    const HEADER: &'static [&'static str] =
        &["w", "p", "origin", "stage", "p_diagonal", "p_off_diagonal"];
    fn cells(&self) -> Vec<String> {
        vec![
            num(self.w),
            num(self.p),
            self.origin.to_string(),
            self.stage.clone(),
            num(self.p_diagonal),
            num(self.p_off_diagonal),
        ]
    }
}

fn dist_rows(d: &WorkDistribution) -> impl Iterator<Item = DistRow> + '_ {
    d.support.iter().map(move |p| DistRow {
        stage: d.stage.to_string(),
        w: p.work,
        p: p.probability,
        p_diagonal: p.diagonal,
        p_off_diagonal: p.off_diagonal,
        origin: p.origin.as_str(),
    })
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct SweepRow {
    pub tau: f64,
    pub status: String,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub w_engine: Option<f64>,
    /// FCS first moment of the full-cycle distribution, `<w1 + w2>`.
    pub mean_work: Option<f64>,
    pub mean_work_diagonal: Option<f64>,
    pub mean_work_off_diagonal: Option<f64>,
    pub work_variance: Option<f64>,
    pub coherence_c: Option<f64>,
    pub min_probability: Option<f64>,
    pub q_in: Option<f64>,
    pub is_engine: Option<bool>,
}

impl Row for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "tau",
        "status",
        "w1",
        "w2",
        "w_engine",
        "mean_work",
        "mean_work_diagonal",
        "mean_work_off_diagonal",
        "work_variance",
        "coherence_c",
        "min_probability",
        "q_in",
        "is_engine",
    ];
    fn cells(&self) -> Vec<String> {
        let mut v = vec![num(self.tau), csv_escape(&self.status)];
        v.extend(
            [
                self.w1,
                self.w2,
                self.w_engine,
                self.mean_work,
                self.mean_work_diagonal,
                self.mean_work_off_diagonal,
                self.work_variance,
                self.coherence_c,
                self.min_probability,
                self.q_in,
            ]
            .into_iter()
            .map(opt_num),
        );
        v.push(self.is_engine.map(|b| b.to_string()).unwrap_or_default());
        v
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

fn sweep_row(tau: f64, record: crate::Result<CycleRecord>) -> SweepRow {
    let analysed = record.and_then(|r| work_statistics(&r).map(|s| (r, s)));
    match analysed {
        Ok((r, s)) => {
            let (d, o) = average_split(&s.full);
            SweepRow {
                tau,
                status: "ok".into(),
                w1: Some(r.w1),
                w2: Some(r.w2),
                w_engine: Some(r.w_engine),
                mean_work: Some(moments(&s.full, 1)),
                mean_work_diagonal: Some(d),
                mean_work_off_diagonal: Some(o),
                work_variance: Some(variance(&s.full)),
                coherence_c: Some(r.coherence[2]),
                min_probability: Some(s.full.min_probability()),
                q_in: Some(r.q_in),
                is_engine: Some(r.is_engine),
            }
        }
        Err(e) => SweepRow {
            tau,
            status: format!("error: {e}"),
            ..Default::default()
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceRow {
    pub tau: f64,
    pub status: String,
    pub coherence_b: Option<f64>,
    pub coherence_c: Option<f64>,
}

impl Row for CoherenceRow {
    const HEADER: &'static [&'static str] = &["tau", "status", "coherence_b", "coherence_c"];
    fn cells(&self) -> Vec<String> {
        vec![
            num(self.tau),
            csv_escape(&self.status),
            opt_num(self.coherence_b),
            opt_num(self.coherence_c),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionRow {
    pub label: &'static str,
    pub kind: ExpansionKind,
    pub w: f64,
    pub value: f64,
}

impl Row for ExpansionRow {
    const HEADER: &'static [&'static str] = &["label", "kind", "w", "value"];
    fn cells(&self) -> Vec<String> {
        let kind = match self.kind {
            ExpansionKind::Population => "population",
            ExpansionKind::Interference => "interference",
        };
        vec![
            self.label.to_string(),
            kind.to_string(),
            num(self.w),
            num(self.value),
        ]
    }
}

/// Runs the configured command and returns the rendered output.
pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    let mut meta = Metadata::new(cfg);
    let out = match cfg.command {
        Command::Cycle => {
            let r = run_cycle_with(&cfg.params, cfg.scheme, cfg.tol)?;
            meta.extra
                .push(("steps_expansion".into(), r.expansion.steps as f64));
            meta.extra
                .push(("steps_compression".into(), r.compression.steps as f64));
            render(&meta, &[CycleRow::from(&r)], cfg.format)
        }
        Command::WorkDist => {
            let r = run_cycle_with(&cfg.params, cfg.scheme, cfg.tol)?;
            let s = work_statistics(&r)?;
            let mut rows = Vec::new();
            for d in s.stages() {
                meta.extra.push((
                    format!("normalization_residual_{}", d.stage),
                    d.normalization_residual(),
                ));
                meta.extra.push((
                    format!("off_diagonal_sum_{}", d.stage),
                    d.off_diagonal_total(),
                ));
                rows.extend(dist_rows(d));
            }
            render(&meta, &rows, cfg.format)
        }
        Command::SweepTau => {
            let taus = cfg.taus();
            let rows: Vec<SweepRow> = sweep_tau(&cfg.params, &taus, cfg.scheme, cfg.tol)
                .into_iter()
                .zip(&taus)
                .map(|(r, &tau)| sweep_row(tau, r))
                .collect();
            render(&meta, &rows, cfg.format)
        }
        Command::Coherence => {
            let taus = cfg.taus();
            let rows: Vec<CoherenceRow> = sweep_tau(&cfg.params, &taus, cfg.scheme, cfg.tol)
                .into_iter()
                .zip(&taus)
                .map(|(r, &tau)| match r {
                    Ok(r) => CoherenceRow {
                        tau,
                        status: "ok".into(),
                        coherence_b: Some(r.coherence[1]),
                        coherence_c: Some(r.coherence[2]),
                    },
                    Err(e) => CoherenceRow {
                        tau,
                        status: format!("error: {e}"),
                        coherence_b: None,
                        coherence_c: None,
                    },
                })
                .collect();
            render(&meta, &rows, cfg.format)
        }
        Command::ExpansionReport => {
            let r = run_cycle_with(&cfg.params, cfg.scheme, cfg.tol)?;
            let s = work_statistics(&r)?;
            let e = stage_cd_expansion(&r, &r.compression)?;
            meta.extra
                .push(("interference_total".into(), e.interference_total()));
            meta.extra
                .push(("off_diagonal_sum_CD".into(), s.cd.off_diagonal_total()));
            let assembled = e.assemble();
            let mismatch =
                s.cd.support
                    .iter()
                    .map(|pt| {
                        let other = assembled
                            .support
                            .iter()
                            .find(|q| (q.work - pt.work).abs() < 1e-9)
                            .map_or(0.0, |q| q.probability);
                        (other - pt.probability).abs()
                    })
                    .fold(0.0, f64::max);
            meta.extra
                .push(("max_mismatch_vs_CD_distribution".into(), mismatch));
            let rows: Vec<ExpansionRow> = e
                .terms
                .iter()
                .map(|t| ExpansionRow {
                    label: t.label,
                    kind: t.kind,
                    w: t.work,
                    value: t.value,
                })
                .collect();
            render(&meta, &rows, cfg.format)
        }
    };
    Ok(out)
}

/// Parses `args`, runs, and writes the output. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match RunConfig::from_cli(&cli).and_then(|cfg| {
        let text = execute(&cfg)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("otto-fcs: {e}");
            e.exit_code()
        }
    }
}
