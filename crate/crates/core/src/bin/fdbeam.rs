#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fdbeam::channel::{ChannelError, Scene};
use fdbeam::config::{parse_config, parse_range, ConfigError, ExperimentConfig};
use fdbeam::dataset::{export_sweep, import_sweep, read_meta, DatasetError, SweepMeta};
use fdbeam::metrics::to_linear;
use fdbeam::plot::{render_bars, render_cdfs, render_heatmap, ColorScale, PlotError};
use fdbeam::scenario::{
    align_pair, export_report, model_for, read_report_csv, report_bars, run_scenario_paper, ScenarioError,
};
use fdbeam::selection::{oracle, steer, steer_plus, SelectionError, SelectionResult, SteerParams, SteerPlusParams};
use fdbeam::sweep::{cdf, cdf_of_stat, reciprocity_delta, stats_maps, InrMap, StatKind, SweepError};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Verify(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::InvalidParams(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(_)
            | ScenarioError::Channel(_)
            | ScenarioError::TooFewUsers(_)
            | ScenarioError::BadPair(..)
            | ScenarioError::EmptyCodebook => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Full-duplex mmWave beam sweeps, self-interference analysis and beam selection.
#[derive(Parser)]
#[command(name = "fdbeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a scene over transmit/receive profiles and export the INR map.
    Sweep(SweepArgs),
    /// Statistics over an exported sweep.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Run STEER or STEER+ for one user pair.
    Select(SelectArgs),
    /// Sweep, pair experiment and figures in one go.
    Scenario(ScenarioArgs),
    /// Draw a figure from exported files.
    #[command(subcommand)]
    Plot(PlotCmd),
    /// Validate an external sweep CSV and store it as a dataset.
    Import(ImportArgs),
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// Scene TOML file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Experiment config; its scene is used when --scene is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scene seed.
    #[arg(long, env = "FDBEAM_SEED")]
    seed: Option<u64>,
    /// Phase-shifter resolution in bits (0 for ideal phases).
    #[arg(long)]
    phase_bits: Option<u32>,
}

impl SceneArgs {
    fn load(&self) -> Result<(Scene, ExperimentConfig), CliError> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(p)?,
            None => {
                let scene = self
                    .scene
                    .clone()
                    .ok_or_else(|| CliError::Config("either --scene or --config is required".into()))?;
                ExperimentConfig::for_scene(scene)
            }
        };
        if let Some(s) = &self.scene {
            cfg.scene = s.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(b) = self.phase_bits {
            cfg.phase_bits = b;
        }
        cfg.validate()?;
        let scene = Scene::load(&cfg.scene)?;
        Ok((scene, cfg))
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    output: PathBuf,
    /// START:STEP:STOP in degrees.
    #[arg(long)]
    tx_profile: Option<String>,
    /// START:STEP:STOP in degrees.
    #[arg(long)]
    rx_profile: Option<String>,
    /// Also draw the heatmap.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Quantiles of the INR distribution.
    Cdf {
        #[arg(long)]
        input: PathBuf,
    },
    /// Neighborhood minimum and range statistics.
    Neighborhood {
        #[arg(long)]
        input: PathBuf,
        /// Neighborhood half-width in degrees (both sides).
        #[arg(long, default_value_t = 1.0)]
        nbr: f64,
        /// Receive half-width when it differs from --nbr.
        #[arg(long)]
        nbr_rx: Option<f64>,
    },
    /// Largest dB difference between a map and the transpose of another.
    Reciprocity {
        #[arg(long)]
        input: PathBuf,
        /// Sweep taken with the array roles exchanged.
        #[arg(long)]
        other: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Steer,
    SteerPlus,
}

fn parse_db(text: &str) -> Result<f64, String> {
    match text.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|e| e.to_string()).and_then(|v| {
            if v.is_nan() {
                Err("NaN is not allowed".into())
            } else {
                Ok(v)
            }
        }),
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(value_enum)]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    scene: SceneArgs,
    /// Downlink user index.
    #[arg(long)]
    dl: usize,
    /// Uplink user index.
    #[arg(long)]
    ul: usize,
    /// Neighborhood half-width in degrees.
    #[arg(long, default_value_t = 3.0)]
    nbr: f64,
    /// Neighborhood resolution in degrees.
    #[arg(long, default_value_t = 1.0)]
    res: f64,
    /// INR target in dB (accepts inf).
    #[arg(long, value_parser = parse_db, allow_hyphen_values = true)]
    inr_target: Option<f64>,
    /// Sum spectral efficiency target in bps/Hz (accepts inf).
    #[arg(long, value_parser = parse_db, allow_hyphen_values = true)]
    se_target: Option<f64>,
    /// Cross-check against the exhaustive reference solver.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output directory (defaults to the config's).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Δ values as START:STEP:STOP.
    #[arg(long)]
    deltas: Option<String>,
    /// Skip the full sweep and its figures.
    #[arg(long)]
    no_sweep: bool,
}

#[derive(Args, Clone, Copy)]
struct ScaleArgs {
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    color_min: f64,
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    color_max: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Inr,
    Min,
    Rng,
}

#[derive(Subcommand)]
enum PlotCmd {
    /// INR heatmap of a sweep dataset.
    Heatmap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// CDFs of one or more sweep datasets.
    Cdf {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "inr")]
        stat: StatArg,
        #[arg(long, default_value_t = 1.0)]
        nbr: f64,
    },
    /// Normalized sum SE bars from a scenario report.
    Bars {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "steer-plus")]
        algorithm: AlgorithmArg,
        /// Comma-separated Δ values to show.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the normalized dataset.
    #[arg(long)]
    output: PathBuf,
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Data(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Data(e.to_string())),
        _ => Ok(()),
    }
}

fn sweep_files(dir: &Path) -> PathBuf {
    dir.join("sweep.csv")
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let (scene, mut cfg) = a.scene.load()?;
    if let Some(p) = &a.tx_profile {
        cfg.sweep.tx_profile = p.clone();
    }
    if let Some(p) = &a.rx_profile {
        cfg.sweep.rx_profile = p.clone();
    }
    let model = model_for(&scene, &cfg)?;
    let map = model.sweep(&cfg.tx_profile()?, &cfg.rx_profile()?)?;
    let path = sweep_files(&a.output);
    export_sweep(&map, &SweepMeta::for_map(&map, Some(model.scene())), &path)?;
    if a.plot {
        let scale = ColorScale {
            min_db: cfg.plots.color_min_db,
            max_db: cfg.plots.color_max_db,
        };
        let exported = import_sweep(&path)?;
        render_heatmap(&exported, &scale, &model.scene().name, &a.output.join("heatmap.svg"))?;
    }
    print_json(&json!({
        "output": path,
        "cells": map.len(),
        "median_inr_db": cdf(&map).median(),
    }))
}

fn cdf_summary(map: &InrMap) -> serde_json::Value {
    let c = cdf(map);
    json!({
        "cells": c.len(),
        "min_db": c.quantile(0.0),
        "p10_db": c.quantile(0.1),
        "median_db": c.median(),
        "p90_db": c.quantile(0.9),
        "max_db": c.quantile(1.0),
        "fraction_above_0db": c.fraction_above(0.0),
    })
}

fn cmd_analyze(cmd: &AnalyzeCmd) -> Result<(), CliError> {
    match cmd {
        AnalyzeCmd::Cdf { input } => print_json(&cdf_summary(&import_sweep(input)?)),
        AnalyzeCmd::Neighborhood { input, nbr, nbr_rx } => {
            let map = import_sweep(input)?;
            let d_rx = nbr_rx.unwrap_or(*nbr);
            if !(nbr.is_finite() && *nbr >= 0.0 && d_rx.is_finite() && d_rx >= 0.0) {
                return Err(CliError::Config(
                    "neighborhood half-widths must be finite and >= 0".into(),
                ));
            }
            let st = stats_maps(&map, *nbr, d_rx);
            let min = cdf_of_stat(&st, StatKind::Min);
            let rng = cdf_of_stat(&st, StatKind::Rng);
            print_json(&json!({
                "delta_tx_deg": nbr,
                "delta_rx_deg": d_rx,
                "cells": min.len(),
                "fraction_min_below_0db": min.fraction_below(0.0),
                "median_min_db": min.median(),
                "median_rng_db": rng.median(),
                "p90_rng_db": rng.quantile(0.9),
                "undefined_range_cells": st.undefined_count(),
            }))
        }
        AnalyzeCmd::Reciprocity { input, other } => {
            let a = import_sweep(input)?;
            let b = import_sweep(other)?;
            print_json(&json!({ "max_delta_db": reciprocity_delta(&a, &b)? }))
        }
    }
}

fn same_selection(a: &SelectionResult, b: &SelectionResult) -> bool {
    a.theta_tx_star == b.theta_tx_star
        && a.theta_rx_star == b.theta_rx_star
        && a.deviation_metric == b.deviation_metric
        && a.r_sum == b.r_sum
        && a.fallback_used == b.fallback_used
}

fn cmd_select(a: &SelectArgs) -> Result<(), CliError> {
    let (scene, cfg) = a.scene.load()?;
    let model = model_for(&scene, &cfg)?;
    let meas = model.pair(a.dl, a.ul)?;
    let inr_cl = cfg.selection.crosslink_inr_db.map(to_linear).unwrap_or(meas.inr_cl);
    let init = align_pair(&meas, &cfg.codebook_angles()?)?;
    let (result, reference) = match a.algorithm {
        AlgorithmArg::Steer => {
            let target = a.inr_target.unwrap_or(cfg.selection.steer_inr_target_db);
            let p = SteerParams::symmetric(a.nbr, a.res, target);
            let r = steer(&init, &p, &meas, inr_cl)?;
            (r, a.verify.then(|| oracle::steer(&init, &p, &meas, inr_cl)))
        }
        AlgorithmArg::SteerPlus => {
            let target = a.inr_target.unwrap_or(cfg.selection.plus_inr_target_db);
            let p = SteerPlusParams {
                steer: SteerParams::symmetric(a.nbr, a.res, target),
                se_target: a.se_target.unwrap_or(cfg.selection.plus_se_target),
            };
            let r = steer_plus(&init, &p, &meas, inr_cl)?;
            (r, a.verify.then(|| oracle::steer_plus(&init, &p, &meas, inr_cl)))
        }
    };
    print_json(&json!({
        "theta_tx_init": init.theta_dl_init.degrees(),
        "theta_rx_init": init.theta_ul_init.degrees(),
        "result": result,
        "verified": reference.as_ref().map(|r| same_selection(&result, r)),
    }))?;
    match reference {
        Some(r) if !same_selection(&result, &r) => Err(CliError::Verify(format!(
            "reference solver chose ({}, {}) with r_sum {}",
            r.theta_tx_star, r.theta_rx_star, r.r_sum
        ))),
        _ => Ok(()),
    }
}

fn cmd_scenario(a: &ScenarioArgs) -> Result<(), CliError> {
    let (scene, mut cfg) = a.scene.load()?;
    if let Some(d) = &a.deltas {
        parse_range(d)?;
        cfg.deltas = fdbeam::config::RangeSpec::Range(d.clone());
    }
    if let Some(o) = &a.output {
        cfg.output = o.clone();
    }
    let out = cfg.output.clone();
    let report = run_scenario_paper(&scene, &cfg)?;
    let (csv_path, json_path) = export_report(&report, &out)?;
    let mut figures = Vec::new();
    if !a.no_sweep {
        let model = model_for(&scene, &cfg)?;
        let map = model.sweep(&cfg.tx_profile()?, &cfg.rx_profile()?)?;
        let sweep_path = sweep_files(&out);
        export_sweep(&map, &SweepMeta::for_map(&map, Some(model.scene())), &sweep_path)?;
        let exported = import_sweep(&sweep_path)?;
        if cfg.plots.heatmap {
            let scale = ColorScale {
                min_db: cfg.plots.color_min_db,
                max_db: cfg.plots.color_max_db,
            };
            let p = out.join("heatmap.svg");
            render_heatmap(&exported, &scale, &report.scene, &p)?;
            figures.push(p);
        }
        if cfg.plots.cdf {
            let p = out.join("cdf.svg");
            render_cdfs(&[(report.scene.clone(), cdf(&exported))], "INR (dB)", &p)?;
            figures.push(p);
        }
    }
    if cfg.plots.bars {
        let rows = read_report_csv(&csv_path)?;
        for algorithm in ["steer", "steer-plus"] {
            let p = out.join(format!("bars-{algorithm}.svg"));
            render_bars(&report_bars(&rows, algorithm, None), &p)?;
            figures.push(p);
        }
    }
    print_json(&json!({
        "report_csv": csv_path,
        "report_json": json_path,
        "records": report.records.len(),
        "figures": figures,
    }))
}

fn cmd_plot(cmd: &PlotCmd) -> Result<(), CliError> {
    match cmd {
        PlotCmd::Heatmap { input, output, scale } => {
            if !(scale.color_min < scale.color_max) {
                return Err(CliError::Config("--color-min must be below --color-max".into()));
            }
            let map = import_sweep(input)?;
            let title = read_meta(input)?
                .and_then(|m| m.scene)
                .unwrap_or_else(|| input.display().to_string());
            let s = ColorScale {
                min_db: scale.color_min,
                max_db: scale.color_max,
            };
            render_heatmap(&map, &s, &title, output)?;
        }
        PlotCmd::Cdf {
            input,
            output,
            stat,
            nbr,
        } => {
            let mut series = Vec::new();
            for p in input {
                let map = import_sweep(p)?;
                let label = p.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep").to_string();
                let c = match stat {
                    StatArg::Inr => cdf(&map),
                    StatArg::Min => cdf_of_stat(&stats_maps(&map, *nbr, *nbr), StatKind::Min),
                    StatArg::Rng => cdf_of_stat(&stats_maps(&map, *nbr, *nbr), StatKind::Rng),
                };
                series.push((label, c));
            }
            let x = match stat {
                StatArg::Inr => "INR (dB)",
                StatArg::Min => "neighborhood minimum INR (dB)",
                StatArg::Rng => "neighborhood INR range (dB)",
            };
            render_cdfs(&series, x, output)?;
        }
        PlotCmd::Bars {
            input,
            output,
            algorithm,
            deltas,
        } => {
            let rows = read_report_csv(input)?;
            let name = match algorithm {
                AlgorithmArg::Steer => "steer",
                AlgorithmArg::SteerPlus => "steer-plus",
            };
            render_bars(&report_bars(&rows, name, deltas.as_deref()), output)?;
        }
    }
    Ok(())
}

fn cmd_import(a: &ImportArgs) -> Result<(), CliError> {
    let map = import_sweep(&a.input)?;
    let path = sweep_files(&a.output);
    export_sweep(&map, &SweepMeta::for_map(&map, None), &path)?;
    let mut summary = cdf_summary(&map);
    summary["output"] = json!(path);
    summary["tx_profile"] = json!(map.tx_profile().describe());
    summary["rx_profile"] = json!(map.rx_profile().describe());
    print_json(&summary)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(c) => cmd_analyze(c),
        Command::Select(a) => cmd_select(a),
        Command::Scenario(a) => cmd_scenario(a),
        Command::Plot(c) => cmd_plot(c),
        Command::Import(a) => cmd_import(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
