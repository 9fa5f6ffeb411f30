use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vitdse::approx::ApproxConfig;
use vitdse::driver::{
    cmd_approx_report, cmd_compile, cmd_emit, cmd_schedule, cmd_search, parse_format, resolve_hardware_doc,
    resolve_model_doc, ApproxReportOptions, CompileOptions, DriverError, ScheduleOptions, SearchMode, SearchOptions,
    Stage,
};
use vitdse::dse::{SearchConfig, SpaceCaps, EXHAUSTIVE_CAP};
use vitdse::hw::TileParams;
use vitdse::layout::LayoutConfig;

#[derive(Parser)]
#[command(name = "vitdse", version, about = "Map ViT models onto a multi-kernel matrix accelerator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search tiles, plan schedules and write manifest.json.
    Compile(CompileArgs),
    /// Run exhaustive and/or heuristic search and write evaluation logs.
    Search(SearchArgs),
    /// Plan bank layouts and write schedule traces.
    Schedule(ScheduleArgs),
    /// Measure approximation error against exact references.
    ApproxReport(ApproxArgs),
    /// Write template parameters for a manifest.
    Emit(EmitArgs),
}

#[derive(Args)]
struct Inputs {
    /// Model preset (deit_tiny, deit_small, deit_base) or JSON path.
    #[arg(long)]
    model: String,
    /// Hardware preset (vu9p) or JSON path.
    #[arg(long, default_value = "vu9p")]
    hw: String,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Fuse Q/K/V projections where the fused weight fits on chip.
    #[arg(long)]
    fuse_qkv: bool,
    #[arg(long)]
    batch: Option<u64>,
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON search configuration; flags below override it.
    #[arg(long)]
    search_config: Option<PathBuf>,
    #[arg(long)]
    set_size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    preservation: Option<usize>,
    /// Stop after this many distinct evaluations.
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long, default_value_t = EXHAUSTIVE_CAP)]
    exhaustive_cap: u64,
    /// Run exhaustive search even above the cap.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    tn_step: Option<u64>,
    #[arg(long)]
    tm_step: Option<u64>,
    #[arg(long)]
    tn_max: Option<u64>,
    #[arg(long)]
    tm_max: Option<u64>,
    #[arg(long)]
    pn_max: Option<u64>,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    search: SearchFlags,
    /// Use exhaustive instead of heuristic search.
    #[arg(long)]
    exhaustive: bool,
    /// Fixed tiles `pn,pm,tn,tm`; skips the search.
    #[arg(long)]
    tiles: Option<String>,
    /// Compute Q/K/V projections head by head.
    #[arg(long)]
    split_heads: bool,
    /// JSON approximation configuration.
    #[arg(long)]
    approx_config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Heuristic,
    Both,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    search: SearchFlags,
    #[arg(long, value_enum, default_value_t = ModeArg::Heuristic)]
    mode: ModeArg,
    /// Include wall-clock times in the comparison report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Kernels sharing the banks (default: min(kernels, banks)).
    #[arg(long)]
    kernels: Option<u32>,
    /// Require one kernel per bank for LayerNorm rotation.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Activation format, e.g. Q8.8 or Q4.4.
    #[arg(long)]
    format: Option<String>,
    /// Replace approximations with exact references.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    approx_config: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    /// Manifest written by `compile`.
    #[arg(long)]
    manifest: PathBuf,
    /// Output file (default: template_params.txt next to the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path, stage: Stage) -> Result<String, DriverError> {
    fs::read_to_string(path).map_err(|e| DriverError::new(stage, format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), DriverError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DriverError::new(Stage::Io, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| DriverError::new(Stage::Io, format!("{}: {e}", path.display())))
}

fn docs(inputs: &Inputs) -> Result<(String, String), DriverError> {
    Ok((resolve_model_doc(&inputs.model)?, resolve_hardware_doc(&inputs.hw)?))
}

fn search_config(flags: &SearchFlags) -> Result<SearchConfig, DriverError> {
    let mut cfg = match &flags.search_config {
        Some(p) => SearchConfig::from_json(&read(p, Stage::Input)?).map_err(|e| DriverError::new(Stage::Input, e))?,
        None => SearchConfig::default(),
    };
    cfg.seed = flags.seed;
    if let Some(v) = flags.set_size {
        cfg.set_size = v;
    }
    if let Some(v) = flags.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = flags.preservation {
        cfg.preservation_size = v;
    }
    if flags.max_evals.is_some() {
        cfg.max_evaluations = flags.max_evals;
    }
    cfg.validate().map_err(|e| DriverError::new(Stage::Usage, e))?;
    Ok(cfg)
}

fn caps(flags: &SearchFlags) -> SpaceCaps {
    SpaceCaps {
        tn_step: flags.tn_step,
        tm_step: flags.tm_step,
        tn_max: flags.tn_max,
        tm_max: flags.tm_max,
        pn_max: flags.pn_max,
        ..SpaceCaps::default()
    }
}

fn parse_tiles(text: &str) -> Result<TileParams, DriverError> {
    let v: Vec<u64> = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| DriverError::new(Stage::Usage, format!("bad --tiles `{text}`")))?;
    match v[..] {
        [pn, pm, tn, tm] => Ok(TileParams::new(pn, pm, tn, tm)),
        _ => Err(DriverError::new(Stage::Usage, "--tiles takes pn,pm,tn,tm")),
    }
}

fn approx_config(path: &Option<PathBuf>) -> Result<ApproxConfig, DriverError> {
    match path {
        Some(p) => ApproxConfig::from_json(&read(p, Stage::Input)?).map_err(|e| DriverError::new(Stage::Input, e)),
        None => Ok(ApproxConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), DriverError> {
    match cli.command {
        Command::Compile(a) => {
            let (model, hw) = docs(&a.inputs)?;
            let opts = CompileOptions {
                seed: a.search.seed,
                exhaustive: a.exhaustive,
                exhaustive_cap: a.search.exhaustive_cap,
                force: a.search.force,
                tiles: a.tiles.as_deref().map(parse_tiles).transpose()?,
                fuse_qkv: a.inputs.fuse_qkv,
                split_heads: a.split_heads,
                batch: a.inputs.batch,
                search: search_config(&a.search)?,
                caps: caps(&a.search),
                layout: LayoutConfig::default(),
                approx: approx_config(&a.approx_config)?,
            };
            let manifest = cmd_compile(&model, &hw, &opts)?;
            let path = a.inputs.out_dir.join("manifest.json");
            write(&path, &manifest.to_json())?;
            let t = manifest.tiles;
            println!(
                "tiles pn={} pm={} tn={} tm={}  latency {:.6} ms  ({} search, {} evaluations)",
                t.pn,
                t.pm,
                t.tn,
                t.tm,
                manifest.latency.latency_s * 1e3,
                manifest.search.mode,
                manifest.search.evaluations_used
            );
            println!("wrote {}", path.display());
        }
        Command::Search(a) => {
            let (model, hw) = docs(&a.inputs)?;
            let opts = SearchOptions {
                mode: match a.mode {
                    ModeArg::Exhaustive => SearchMode::Exhaustive,
                    ModeArg::Heuristic => SearchMode::Heuristic,
                    ModeArg::Both => SearchMode::Both,
                },
                seed: a.search.seed,
                search: search_config(&a.search)?,
                caps: caps(&a.search),
                exhaustive_cap: a.search.exhaustive_cap,
                force: a.search.force,
                fuse_qkv: a.inputs.fuse_qkv,
                batch: a.inputs.batch,
                timing: a.timing,
            };
            let out = cmd_search(&model, &hw, &opts, &a.inputs.out_dir)?;
            for (tag, r) in [("heuristic", &out.heuristic), ("exhaustive", &out.exhaustive)] {
                if let Some(r) = r {
                    let t = r.best.tiles;
                    println!(
                        "{tag}: pn={} tn={} tm={}  {:.6} ms  {} of {} points evaluated",
                        t.pn,
                        t.tn,
                        t.tm,
                        r.best.latency.seconds().unwrap_or(f64::NAN) * 1e3,
                        r.evaluations_used,
                        r.space_size
                    );
                }
            }
            if let Some(c) = &out.comparison {
                println!(
                    "latency ratio {:.4}, pareto coverage {:.1}%, evaluation fraction {:.2}%",
                    c.latency_ratio,
                    c.pareto_coverage * 100.0,
                    c.evaluation_fraction * 100.0
                );
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Schedule(a) => {
            let (model, hw) = docs(&a.inputs)?;
            let opts = ScheduleOptions {
                layout: LayoutConfig { kernels: a.kernels, strict_layernorm: a.strict, ..LayoutConfig::default() },
                fuse_qkv: a.inputs.fuse_qkv,
                batch: a.inputs.batch,
            };
            let (plans, files) = cmd_schedule(&model, &hw, &opts, &a.inputs.out_dir)?;
            let steps: u64 = plans.iter().map(|p| p.steps).sum();
            println!("{} nodes, {steps} schedule steps", plans.len());
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::ApproxReport(a) => {
            let opts = ApproxReportOptions {
                format: a.format.as_deref().map(parse_format).transpose()?,
                exact: a.exact,
                samples: a.samples,
                seed: a.seed,
                base: approx_config(&a.approx_config)?,
            };
            for r in cmd_approx_report(&opts, Some(&a.out_dir))? {
                println!(
                    "{:<8} max_abs {:.3e}  max_rel {:.3e}  mean_abs {:.3e}",
                    r.function.name(),
                    r.max_abs,
                    r.max_rel,
                    r.mean_abs
                );
            }
            println!("wrote {}", a.out_dir.join("approx_report.json").display());
        }
        Command::Emit(a) => {
            let text = cmd_emit(&read(&a.manifest, Stage::Emit)?)?;
            let out = a.out.unwrap_or_else(|| a.manifest.with_file_name("template_params.txt"));
            write(&out, &text)?;
            print!("{text}");
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
