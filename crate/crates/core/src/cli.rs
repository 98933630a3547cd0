//! Command-line driver: build/query lookup tables, run single
//! evaluations, launch optimization runs, and run the strategist
//! comparison harness.
//!
//! Exit codes are a stable contract: 0 ok/converged, 1 error, 2
//! usage/config, 3 iteration budget exhausted, 4 stalled.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::assets;
use crate::backends::stub::RecordedBackend;
use crate::backends::spice::{SpiceBackend, SpiceConfig};
use crate::backends::{AnalyticBackend, Backend, LutSet, PerfMetrics};
use crate::device_model::{DeviceKind, ModelConfig, ProcessCorner};
use crate::lut::LutGrid;
use crate::netlist::{extract_params, NameMap, NetlistDoc};
use crate::orchestrator::{
    load_run, recheck_converged, run, IterationRecord, RunConfig, RunStatus, RUNLOG_HEADER,
};
use crate::specs::{
    compute_fom, evaluate_specs, worst_case, EvalMode, Metric, SpecSet, DEFAULT_FOM_FORMULA,
};
use crate::strategy::digest::lut_digest;
use crate::strategy::gmid::GmidStrategist;
use crate::strategy::llm::{ChatConfig, HttpTransport, LlmStrategist};
use crate::strategy::replay::ReplayStrategist;
use crate::strategy::rules::RulesStrategist;
use crate::strategy::{StaticKnowledge, Strategist};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_STALLED: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "gmidloop",
    version,
    about = "Closed-loop two-stage op-amp sizing with gm/Id lookup tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build lookup-table files from the device model
    LutBuild(LutBuildArgs),
    /// Query one lookup table at an operating point
    LutQuery(LutQueryArgs),
    /// Evaluate one netlist at one corner and print the metrics
    Simulate(SimulateArgs),
    /// Run the closed optimization loop
    Optimize(OptimizeArgs),
    /// Summarize a finished run from its log
    Report(ReportArgs),
    /// Compare strategists under identical budgets
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Llm,
    LlmNoGmid,
    Rules,
    Gmid,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Analytic,
    Spice,
    StubFixtures,
}

#[derive(Debug, Args)]
pub struct LutBuildArgs {
    /// Device polarity; both when omitted
    #[arg(long)]
    pub kind: Option<String>,
    /// Process corner (default TT)
    #[arg(long, conflicts_with = "all_corners")]
    pub corner: Option<String>,
    /// Build every corner
    #[arg(long)]
    pub all_corners: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Device-model parameter file; built-in defaults when omitted
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// Overwrite existing table files
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct LutQueryArgs {
    /// Directory holding `<kind>_<corner>.lut` files
    #[arg(long)]
    pub luts: PathBuf,
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value = "TT")]
    pub corner: String,
    /// Channel length, um
    #[arg(long)]
    pub l: f64,
    /// Gate-source voltage, V
    #[arg(long, conflicts_with = "ratio")]
    pub vgs: Option<f64>,
    /// gm/Id ratio to invert for Vgs instead of giving it directly
    #[arg(long)]
    pub ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long, default_value = "TT")]
    pub corner: String,
    #[arg(long, value_enum, default_value_t = BackendChoice::Analytic)]
    pub backend: BackendChoice,
    /// LUT directory for the analytic backend; built in-process when omitted
    #[arg(long)]
    pub luts: Option<PathBuf>,
    /// Recorded-metrics fixture file for --backend stub-fixtures
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Simulator executable for --backend spice
    #[arg(long, default_value = "ngspice")]
    pub spice_cmd: String,
    /// Spec file: also print pass/fail verdicts
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: StrategyChoice,
    #[arg(long, value_enum, default_value_t = BackendChoice::Analytic)]
    pub backend: BackendChoice,
    #[arg(long)]
    pub luts: Option<PathBuf>,
    /// Recorded-metrics fixture file for --backend stub-fixtures
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Run-log path (append-only audit trail)
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Phase-1 iteration budget
    #[arg(long, default_value_t = 15)]
    pub max_iters: usize,
    /// Phase-2 fix budget
    #[arg(long, default_value_t = 5)]
    pub max_corner_iters: usize,
    /// Patch script for --strategy replay
    #[arg(long)]
    pub replay_script: Option<PathBuf>,
    /// Chat endpoint config for the llm strategies; the credential is
    /// read from the environment variable named inside it
    #[arg(long)]
    pub llm_config: Option<PathBuf>,
    #[arg(long, default_value = "ngspice")]
    pub spice_cmd: String,
    /// Emit run-log records instead of human tables
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = DEFAULT_FOM_FORMULA)]
    pub fom: String,
    /// Spec file for the worst-case table; built-in defaults when omitted
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Emit run-log records instead of human tables
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Seed netlist; built-in fixture when omitted
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    /// Spec file; built-in comparison spec when omitted
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub luts: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendChoice::Analytic)]
    pub backend: BackendChoice,
    /// Write machine-readable result records here as well
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub max_iters: usize,
    #[arg(long)]
    pub llm_config: Option<PathBuf>,
}

/// A failure that already knows its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    fn error(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_ERROR,
            msg: msg.into(),
        }
    }
}

type CliResult = Result<u8, Failure>;

/// Execute a parsed invocation. Returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::LutBuild(args) => lut_build(&args),
        Command::LutQuery(args) => lut_query(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Optimize(args) => optimize(&args),
        Command::Report(args) => report(&args),
        Command::Ablate(args) => ablate(&args),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn parse_kind(s: &str) -> Result<DeviceKind, Failure> {
    DeviceKind::parse(s).ok_or_else(|| Failure::usage(format!("unknown device kind `{s}`")))
}

fn parse_corner(s: &str) -> Result<ProcessCorner, Failure> {
    ProcessCorner::parse(s).ok_or_else(|| Failure::usage(format!("unknown corner `{s}`")))
}

fn load_model(path: Option<&Path>) -> Result<ModelConfig, Failure> {
    match path {
        Some(p) => ModelConfig::from_file(p).map_err(|e| Failure::usage(e.to_string())),
        None => Ok(ModelConfig::default()),
    }
}

fn load_luts(dir: Option<&Path>) -> Result<LutSet, Failure> {
    match dir {
        Some(d) => LutSet::load_dir(d).map_err(|e| Failure::error(e.to_string())),
        None => LutSet::build_default(&ModelConfig::default())
            .map_err(|e| Failure::error(e.to_string())),
    }
}

fn load_netlist(path: &Path) -> Result<NetlistDoc, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    NetlistDoc::parse(&text).map_err(|e| Failure::error(format!("{}: {e}", path.display())))
}

fn load_specs(path: &Path) -> Result<SpecSet, Failure> {
    SpecSet::from_file(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn lut_build(args: &LutBuildArgs) -> CliResult {
    let model = load_model(args.model_config.as_deref())?;
    let kinds: Vec<DeviceKind> = match &args.kind {
        Some(s) => vec![parse_kind(s)?],
        None => DeviceKind::ALL.to_vec(),
    };
    let corners: Vec<ProcessCorner> = if args.all_corners {
        ProcessCorner::ALL.to_vec()
    } else {
        vec![parse_corner(args.corner.as_deref().unwrap_or("TT"))?]
    };

    let targets: Vec<(DeviceKind, ProcessCorner, PathBuf)> = kinds
        .iter()
        .flat_map(|&k| {
            corners
                .iter()
                .map(move |&c| (k, c, LutGrid::file_name(k, c)))
        })
        .map(|(k, c, name)| (k, c, args.out.join(name)))
        .collect();

    if !args.force {
        if let Some((_, _, existing)) = targets.iter().find(|(_, _, p)| p.exists()) {
            return Err(Failure::usage(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::error(e.to_string()))?;

    for (kind, corner, path) in &targets {
        let grid = LutGrid::build_default(&model, *kind, *corner)
            .map_err(|e| Failure::error(e.to_string()))?;
        grid.write_to(path).map_err(|e| Failure::error(e.to_string()))?;
        println!(
            "wrote {}: {} {} grid {}x{} (L x Vgs), Vds {:.2} V",
            path.display(),
            kind.as_str(),
            corner.as_str(),
            grid.l_axis.len(),
            grid.vgs_axis.len(),
            grid.vds
        );
    }
    Ok(EXIT_OK)
}

fn lut_query(args: &LutQueryArgs) -> CliResult {
    let kind = parse_kind(&args.kind)?;
    let corner = parse_corner(&args.corner)?;
    let set = LutSet::load_dir(&args.luts).map_err(|e| Failure::error(e.to_string()))?;
    let grid = set.get(kind, corner).map_err(|e| Failure::error(e.to_string()))?;

    let vgs = match (args.vgs, args.ratio) {
        (Some(v), None) => v,
        (None, Some(r)) => grid
            .invert_gm_over_id(args.l, r)
            .map_err(|e| Failure::error(e.to_string()))?,
        _ => return Err(Failure::usage("give exactly one of --vgs or --ratio")),
    };
    let op = grid.query(args.l, vgs).map_err(|e| Failure::error(e.to_string()))?;
    println!("{} {} L={} um Vgs={:.4} V Vds={:.2} V", kind.as_str(), corner.as_str(), args.l, vgs, grid.vds);
    println!("  id/W   {:.6e} A/um", op.id_per_w);
    println!("  gm/W   {:.6e} S/um", op.gm_per_w);
    println!("  gds/W  {:.6e} S/um", op.gds_per_w);
    println!("  cgg/W  {:.6e} F/um", op.cgg_per_w);
    println!("  gm/Id  {:.4} 1/V", op.gm_over_id);
    println!("  Vov    {:+.4} V", op.vov);
    Ok(EXIT_OK)
}

enum AnyBackend {
    Analytic(AnalyticBackend),
    Spice(SpiceBackend),
    Recorded(RecordedBackend),
}

impl AnyBackend {
    fn as_dyn(&self) -> &dyn Backend {
        match self {
            AnyBackend::Analytic(b) => b,
            AnyBackend::Spice(b) => b,
            AnyBackend::Recorded(b) => b,
        }
    }
}

fn make_backend(
    choice: BackendChoice,
    luts: &LutSet,
    fixtures: Option<&Path>,
    spice_cmd: &str,
) -> Result<AnyBackend, Failure> {
    match choice {
        BackendChoice::Analytic => Ok(AnyBackend::Analytic(AnalyticBackend::new(luts.clone()))),
        BackendChoice::Spice => {
            let root = std::env::temp_dir().join("gmidloop-spice");
            Ok(AnyBackend::Spice(SpiceBackend::new(SpiceConfig::new(
                spice_cmd, &root,
            ))))
        }
        BackendChoice::StubFixtures => {
            let backend = match fixtures {
                Some(p) => RecordedBackend::from_file(p)
                    .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?,
                // no fixture file: fall back to the bundled recorded
                // trajectory so the replay demo is self-contained
                None => RecordedBackend::from_text(&assets::trajectory_recorded_metrics())
                    .map_err(|e| Failure::error(e.to_string()))?,
            };
            Ok(AnyBackend::Recorded(backend))
        }
    }
}

fn print_metrics(m: &PerfMetrics) {
    for metric in Metric::ALL {
        println!("  {:<5} {}", metric.as_str(), metric.display(metric.of(m)));
    }
}

fn simulate(args: &SimulateArgs) -> CliResult {
    let corner = parse_corner(&args.corner)?;
    let doc = load_netlist(&args.netlist)?;
    let params = extract_params(&doc, &NameMap::default())
        .map_err(|e| Failure::error(e.to_string()))?;
    let luts = if args.backend == BackendChoice::Analytic {
        load_luts(args.luts.as_deref())?
    } else {
        LutSet::new()
    };
    let backend = make_backend(args.backend, &luts, args.fixtures.as_deref(), &args.spice_cmd)?;
    let metrics = backend
        .as_dyn()
        .evaluate(&doc, &params, corner, "simulate")
        .map_err(|e| Failure::error(e.to_string()))?;
    println!("{} @ {}", args.netlist.display(), corner.as_str());
    print_metrics(&metrics);
    if let Some(spec_path) = &args.spec {
        let specs = load_specs(spec_path)?;
        let report = evaluate_specs(&metrics, &specs, EvalMode::Tt);
        for e in &report.entries {
            println!(
                "  {:<5} {} vs {} -> {}",
                e.metric.as_str(),
                e.metric.display(e.value),
                e.metric.display(e.target),
                if e.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    Ok(EXIT_OK)
}

/// Builds the static prompt material for the llm strategies.
fn default_knowledge(specs: &SpecSet, luts: &LutSet, include_tables: bool) -> StaticKnowledge {
    let circuit_brief = "\
Two-stage Miller-compensated op-amp, 1.8 V supply, 10 uA reference.
M1/M2: nmos differential input pair. M3/M4: pmos current-mirror load.
M5: nmos tail-current source (tail = 10 uA x m). M6: pmos second-stage
current source (10 uA x m). M7: nmos common-source second stage.
C1: Miller compensation capacitor across the second stage. CL: fixed
2 pF load (not tunable)."
        .to_string();
    let heuristics = "\
- GBW = gm1 / (2*pi*C1): raise gm1 (wider M1/M2 or more tail current) or lower C1.
- Phase margin improves with larger C1 and with larger gm7 (wider M7 or more fingers); keep the second pole gm7/(2*pi*CL) about 3x beyond GBW.
- DC gain improves with longer channels on M1-M4 (higher intrinsic gain), at the cost of bandwidth.
- Slew rate = min(tail current, second-stage current) over the respective capacitor; raise mirror ratios m(M5)/m(M6) to speed up, lower them to save supply current.
- Keep devices in moderate inversion (gm/Id 10-20) unless a spec forces an extreme."
        .to_string();
    StaticKnowledge {
        circuit_brief,
        heuristics,
        lut_digest: if include_tables { lut_digest(luts) } else { String::new() },
        spec_table: specs.to_text(),
    }
}

fn make_strategist(
    args: &OptimizeArgs,
    luts: &LutSet,
    specs: &SpecSet,
) -> Result<Box<dyn Strategist>, Failure> {
    match args.strategy {
        StrategyChoice::Rules => Ok(Box::new(RulesStrategist::new())),
        StrategyChoice::Gmid => Ok(Box::new(GmidStrategist::new(luts.clone()))),
        StrategyChoice::Replay => {
            let s = match &args.replay_script {
                Some(p) => ReplayStrategist::from_file(p)
                    .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?,
                None => ReplayStrategist::from_text(assets::TRAJECTORY_SCRIPT)
                    .map_err(|e| Failure::error(e.to_string()))?,
            };
            Ok(Box::new(s))
        }
        StrategyChoice::Llm | StrategyChoice::LlmNoGmid => {
            let config_path = args
                .llm_config
                .as_ref()
                .ok_or_else(|| Failure::usage("--llm-config is required for llm strategies"))?;
            let config = ChatConfig::from_file(config_path)
                .map_err(|e| Failure::usage(format!("{}: {e}", config_path.display())))?;
            // fail fast, before any iteration runs
            if std::env::var(&config.credential_env).is_err() {
                return Err(Failure::usage(format!(
                    "credential environment variable {} is not set",
                    config.credential_env
                )));
            }
            let include_tables = args.strategy == StrategyChoice::Llm;
            let knowledge = default_knowledge(specs, luts, include_tables);
            Ok(Box::new(LlmStrategist::new(
                config,
                Box::new(HttpTransport),
                knowledge,
                include_tables,
            )))
        }
    }
}

fn status_exit(status: RunStatus) -> u8 {
    match status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::IterationLimit => EXIT_BUDGET,
        RunStatus::Stalled => EXIT_STALLED,
        RunStatus::Error => EXIT_ERROR,
    }
}

fn phase_name(phase: EvalMode) -> &'static str {
    match phase {
        EvalMode::Tt => "tt",
        EvalMode::Corner => "corner",
    }
}

fn iteration_line(r: &IterationRecord) -> String {
    let verdicts = r
        .report
        .entries
        .iter()
        .map(|e| {
            format!(
                "{} {}{}",
                e.metric.as_str(),
                e.metric.display(e.value),
                if e.pass { "" } else { " FAIL" }
            )
        })
        .collect::<Vec<_>>()
        .join(" | ");
    format!(
        "iter {:>2} [{:<6}] {}",
        r.iteration,
        phase_name(r.phase),
        verdicts
    )
}

/// Final parameter/metric table in the shape used throughout the docs.
fn print_final_table(r: &IterationRecord) {
    println!("\nfinal parameters (iteration {}):", r.iteration);
    println!("  {:<4} {:>8} {:>8} {:>4}", "dev", "W/um", "L/um", "m");
    for (i, d) in r.params.devices.iter().enumerate() {
        println!("  M{:<3} {:>8.3} {:>8.3} {:>4}", i + 1, d.w_um, d.l_um, d.m);
    }
    println!("  C1   {:>8.3} pF", r.params.c1_f * 1e12);
    println!("  CL   {:>8.3} pF (fixed)", r.params.cl_f * 1e12);
    println!("\nfinal metrics:");
    let mut corners: Vec<_> = r.metrics.keys().collect();
    corners.sort();
    for corner in corners {
        let m = &r.metrics[corner];
        let cells = Metric::ALL
            .iter()
            .map(|metric| format!("{} {}", metric.as_str(), metric.display(metric.of(m))))
            .collect::<Vec<_>>()
            .join(" | ");
        println!("  {:<3} {}", corner.as_str(), cells);
    }
}

fn emit_records(history: &[IterationRecord]) {
    println!("{RUNLOG_HEADER}");
    for r in history {
        println!("{}", serde_json::to_string(r).expect("record serializes"));
    }
}

fn optimize(args: &OptimizeArgs) -> CliResult {
    let doc = load_netlist(&args.netlist)?;
    let specs = load_specs(&args.spec)?;
    let luts = load_luts(args.luts.as_deref())?;
    let mut strategist = make_strategist(args, &luts, &specs)?;
    let backend = make_backend(args.backend, &luts, args.fixtures.as_deref(), &args.spice_cmd)?;
    let config = RunConfig {
        max_tt_iters: args.max_iters,
        max_corner_iters: args.max_corner_iters,
        log_path: args.log.clone(),
        ..RunConfig::default()
    };
    if let Err(msg) = config.validate() {
        return Err(Failure::usage(msg));
    }

    let outcome = run(&config, &doc, &specs, strategist.as_mut(), backend.as_dyn());

    if args.records {
        emit_records(&outcome.history);
    } else {
        for r in &outcome.history {
            println!("{}", iteration_line(r));
        }
        if let Some(last) = outcome.final_record() {
            print_final_table(last);
        }
        if let Some(fom) = &outcome.fom {
            println!(
                "\nFOM ({}) {:.1} | area {:.1} um^2 | FoMA {:.2}",
                fom.formula, fom.fom, fom.area_um2, fom.foma
            );
        }
        println!("\nstatus: {}", outcome.status.as_str());
        if let Some(detail) = &outcome.detail {
            println!("detail: {detail}");
        }
    }
    if outcome.status == RunStatus::Error {
        if let Some(detail) = &outcome.detail {
            eprintln!("error: {detail}");
        }
    }
    Ok(status_exit(outcome.status))
}

fn phase_counts(history: &[IterationRecord]) -> (usize, usize) {
    let tt = history.iter().filter(|r| r.phase == EvalMode::Tt).count();
    let total = history.last().map(|r| r.iteration).unwrap_or(0);
    (tt, total.saturating_sub(tt))
}

fn report(args: &ReportArgs) -> CliResult {
    let (history, truncated) =
        load_run(&args.log).map_err(|e| Failure::error(e.to_string()))?;
    if truncated {
        eprintln!("warning: dropped a truncated final record");
    }
    if history.is_empty() {
        return Err(Failure::error(format!(
            "{}: run log contains no records",
            args.log.display()
        )));
    }
    if args.records {
        emit_records(&history);
        return Ok(EXIT_OK);
    }

    let specs = match &args.spec {
        Some(p) => load_specs(p)?,
        None => SpecSet::default_opamp(),
    };
    let last = history.last().unwrap();
    let converged = recheck_converged(&history, &specs);
    let (tt, corner) = phase_counts(&history);

    println!("run log: {}", args.log.display());
    println!(
        "status: {}",
        if converged { "converged" } else { "not converged" }
    );
    println!("iterations: {} (TT:{tt}, corner:{corner})", tt + corner);

    if let Some(m) = last.metrics.get(&ProcessCorner::TT) {
        let fom = compute_fom(m, &last.params, &args.fom)
            .map_err(|e| Failure::usage(e.to_string()))?;
        println!(
            "FOM ({}) {:.1} | area {:.1} um^2 | FoMA {:.2}",
            fom.formula, fom.fom, fom.area_um2, fom.foma
        );
    }

    if last.metrics.len() > 1 {
        let wc = worst_case(&last.metrics, &specs).map_err(|e| Failure::error(e.to_string()))?;
        println!("\nworst case across corners (derated targets):");
        println!("  {:<5} {:>14} {:>7} {:>14} {:>6}", "spec", "worst", "corner", "target", "");
        for item in &specs.items {
            let (value, corner) = wc[&item.metric];
            let target = item.corner_target();
            let pass = match item.direction {
                crate::specs::Direction::AtLeast => value >= target,
                crate::specs::Direction::AtMost => value <= target,
            };
            println!(
                "  {:<5} {:>14} {:>7} {:>14} {:>6}",
                item.metric.as_str(),
                item.metric.display(value),
                corner.as_str(),
                item.metric.display(target),
                if pass { "PASS" } else { "FAIL" }
            );
        }
    }
    print_final_table(last);
    Ok(EXIT_OK)
}

#[derive(Debug, serde::Serialize)]
struct AblationRow {
    strategist: String,
    status: String,
    tt_iters: usize,
    corner_iters: usize,
    total_iters: usize,
    detail: String,
}

fn ablate(args: &AblateArgs) -> CliResult {
    let doc = match &args.netlist {
        Some(p) => load_netlist(p)?,
        None => NetlistDoc::parse(assets::ITER1_NETLIST).expect("bundled netlist parses"),
    };
    let specs = match &args.spec {
        Some(p) => load_specs(p)?,
        None => SpecSet::from_text(assets::ABLATION_SPEC).expect("bundled spec parses"),
    };
    let luts = load_luts(args.luts.as_deref())?;
    let backend = make_backend(args.backend, &luts, None, "ngspice")?;
    let config = RunConfig {
        max_tt_iters: args.max_iters,
        ..RunConfig::default()
    };

    let llm_config = match &args.llm_config {
        Some(p) => Some(ChatConfig::from_file(p).map_err(|e| Failure::usage(e.to_string()))?),
        None => None,
    };
    let credentials_present = llm_config
        .as_ref()
        .map(|c| std::env::var(&c.credential_env).is_ok())
        .unwrap_or(false);

    let mut rows: Vec<AblationRow> = Vec::new();
    let mut any_error = false;

    let lineup: Vec<(&str, Option<Box<dyn Strategist>>)> = {
        let mut v: Vec<(&str, Option<Box<dyn Strategist>>)> = vec![
            ("gmid", Some(Box::new(GmidStrategist::new(luts.clone())))),
            ("rules", Some(Box::new(RulesStrategist::new()))),
        ];
        for (name, include_tables) in [("llm", true), ("llm-no-gmid", false)] {
            let s: Option<Box<dyn Strategist>> = match (&llm_config, credentials_present) {
                (Some(c), true) => Some(Box::new(LlmStrategist::new(
                    c.clone(),
                    Box::new(HttpTransport),
                    default_knowledge(&specs, &luts, include_tables),
                    include_tables,
                ))),
                _ => None,
            };
            v.push((name, s));
        }
        v
    };

    for (name, strategist) in lineup {
        let row = match strategist {
            None => AblationRow {
                strategist: name.to_string(),
                status: "skipped".into(),
                tt_iters: 0,
                corner_iters: 0,
                total_iters: 0,
                detail: "no credentials".into(),
            },
            Some(mut s) => {
                let outcome = run(&config, &doc, &specs, s.as_mut(), backend.as_dyn());
                if outcome.status == RunStatus::Error {
                    any_error = true;
                }
                let (tt, corner) = phase_counts(&outcome.history);
                AblationRow {
                    strategist: name.to_string(),
                    status: outcome.status.as_str().to_string(),
                    tt_iters: tt,
                    corner_iters: corner,
                    total_iters: tt + corner,
                    detail: outcome.detail.unwrap_or_default(),
                }
            }
        };
        rows.push(row);
    }

    println!(
        "{:<12} {:<16} {:>5} {:>7} {:>6}  {}",
        "strategist", "status", "tt", "corner", "total", "detail"
    );
    for r in &rows {
        println!(
            "{:<12} {:<16} {:>5} {:>7} {:>6}  {}",
            r.strategist, r.status, r.tt_iters, r.corner_iters, r.total_iters, r.detail
        );
    }

    if let Some(out) = &args.out {
        let mut text = String::new();
        for r in &rows {
            text.push_str(&serde_json::to_string(r).expect("row serializes"));
            text.push('\n');
        }
        std::fs::write(out, text).map_err(|e| Failure::error(e.to_string()))?;
    }
    Ok(if any_error { EXIT_ERROR } else { EXIT_OK })
}
