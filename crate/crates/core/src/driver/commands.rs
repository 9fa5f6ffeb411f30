use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::manifest::{CompilationManifest, KindSchedule, SearchSummary, TemplateParams, MANIFEST_VERSION};
use super::{DriverError, Stage, StageExt};
use crate::approx::{error_report, reports_to_csv, ApproxConfig, ApproxFn, ErrorReport, FixedFormat};
use crate::dse::{
    check_exhaustive_cap, compare_searches, enumerate_space, evaluations_to_csv, exhaustive_search, heuristic_search,
    pareto_front, pareto_to_csv, ComparisonReport, SearchConfig, SearchResult, SpaceCaps, EXHAUSTIVE_CAP,
};
use crate::hw::{parse_hardware, validate_tiles, CostModel, GraphCost, HardwareSpec, TileParams};
use crate::layout::{plan_layouts, schedule_node, LayoutConfig, NodePlan};
use crate::model::{batch_expand, build_dag, fuse_qkv, parse_model, split_heads, Dag, ModelSpec, OpTag};

/// Graph-shaping switches shared by the commands.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Rewrites {
    fuse_qkv: bool,
    split_heads: bool,
    batch: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub seed: u64,
    pub exhaustive: bool,
    pub exhaustive_cap: u64,
    pub force: bool,
    /// Skip the search and use these tiles.
    pub tiles: Option<TileParams>,
    pub fuse_qkv: bool,
    pub split_heads: bool,
    pub batch: Option<u64>,
    pub search: SearchConfig,
    pub caps: SpaceCaps,
    pub layout: LayoutConfig,
    pub approx: ApproxConfig,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            exhaustive: false,
            exhaustive_cap: EXHAUSTIVE_CAP,
            force: false,
            tiles: None,
            fuse_qkv: false,
            split_heads: false,
            batch: None,
            search: SearchConfig::default(),
            caps: SpaceCaps::default(),
            layout: LayoutConfig::default(),
            approx: ApproxConfig::default(),
        }
    }
}

fn parse_inputs(model_doc: &str, hw_doc: &str) -> Result<(ModelSpec, HardwareSpec), DriverError> {
    let model = parse_model(model_doc).map_err(|e| DriverError::new(Stage::Input, format!("model: {e}")))?;
    let hw = parse_hardware(hw_doc).map_err(|e| DriverError::new(Stage::Input, format!("hardware: {e}")))?;
    Ok((model, hw))
}

fn build(model: &ModelSpec, hw: &HardwareSpec, rw: &Rewrites) -> Result<(Dag, Vec<String>), DriverError> {
    let mut dag = build_dag(model).stage(Stage::Build)?;
    let mut applied = Vec::new();
    if rw.fuse_qkv {
        let out = fuse_qkv(&dag, hw).stage(Stage::Rewrite)?;
        applied.push(format!("fuse_qkv:{}", out.fused));
        dag = out.dag;
    }
    if rw.split_heads {
        dag = split_heads(&dag).stage(Stage::Rewrite)?;
        applied.push("split_heads".into());
    }
    if let Some(b) = rw.batch {
        dag = batch_expand(&dag, b).stage(Stage::Rewrite)?;
        applied.push(format!("batch:{b}"));
    }
    Ok((dag, applied))
}

fn fingerprint<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("serializable")))
}

fn summarize(plans: &[NodePlan]) -> BTreeMap<String, KindSchedule> {
    let mut out: BTreeMap<String, KindSchedule> = BTreeMap::new();
    for p in plans.iter().filter(|p| p.steps > 0) {
        let e = out.entry(p.kind.name().to_string()).or_insert(KindSchedule {
            nodes: 0,
            total_steps: 0,
            lower_bound_steps: 0,
            partial_steps: 0,
        });
        e.nodes += 1;
        e.total_steps += p.steps;
        e.lower_bound_steps += p.step_lower_bound;
        e.partial_steps += p.partial_steps;
    }
    out
}

/// Runs the full pipeline and returns the manifest; nothing is written.
pub fn cmd_compile(model_doc: &str, hw_doc: &str, opts: &CompileOptions) -> Result<CompilationManifest, DriverError> {
    let (model, hw) = parse_inputs(model_doc, hw_doc)?;
    let rw = Rewrites { fuse_qkv: opts.fuse_qkv, split_heads: opts.split_heads, batch: opts.batch };
    let (dag, rewrites) = build(&model, &hw, &rw)?;

    let (tiles, search) = match opts.tiles {
        Some(t) => {
            let verdict = validate_tiles(&t, &hw);
            if !verdict.is_feasible() {
                return Err(DriverError::new(Stage::Search, format!("tiles {t:?} infeasible: {:?}", verdict.violations)));
            }
            let summary =
                SearchSummary { mode: "fixed".into(), space_size: None, space_fingerprint: None, evaluations_used: 0, config: None };
            (t, summary)
        }
        None => {
            let space = enumerate_space(&dag, &hw, &opts.caps).stage(Stage::Search)?;
            let (result, mode, config) = if opts.exhaustive {
                check_exhaustive_cap(&space, opts.exhaustive_cap, opts.force).stage(Stage::Search)?;
                (exhaustive_search(&dag, &hw, &space).stage(Stage::Search)?, "exhaustive", None)
            } else {
                let cfg = SearchConfig { seed: opts.seed, ..opts.search.clone() };
                (heuristic_search(&dag, &hw, &space, &cfg).stage(Stage::Search)?, "heuristic", Some(cfg))
            };
            let summary = SearchSummary {
                mode: mode.into(),
                space_size: Some(result.space_size),
                space_fingerprint: Some(result.space_fingerprint.clone()),
                evaluations_used: result.evaluations_used,
                config,
            };
            (result.best.tiles, summary)
        }
    };

    let latency = match CostModel::new(&dag).evaluate(&tiles, &hw) {
        GraphCost::Feasible(g) => g,
        GraphCost::Infeasible { violations } => {
            return Err(DriverError::new(Stage::Search, format!("chosen tiles infeasible: {violations:?}")))
        }
    };
    let layout = plan_layouts(&dag, &hw, &opts.layout).stage(Stage::Schedule)?;
    opts.approx.validate().stage(Stage::Approx)?;

    Ok(CompilationManifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.seed,
        model_fingerprint: fingerprint(&model),
        model,
        hardware: hw,
        rewrites,
        search,
        tiles,
        latency,
        schedules: summarize(&layout),
        layout,
        approx: opts.approx.clone(),
        extra: BTreeMap::new(),
    })
}

/// Template parameter file for a manifest document.
pub fn cmd_emit(manifest_doc: &str) -> Result<String, DriverError> {
    let m = CompilationManifest::from_json(manifest_doc)?;
    Ok(TemplateParams::from_manifest(&m)?.emit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Heuristic,
    Both,
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub mode: SearchMode,
    pub seed: u64,
    pub search: SearchConfig,
    pub caps: SpaceCaps,
    pub exhaustive_cap: u64,
    pub force: bool,
    pub fuse_qkv: bool,
    pub batch: Option<u64>,
    /// Record wall-clock times in the comparison (makes it non-reproducible).
    pub timing: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            mode: SearchMode::Heuristic,
            seed: 0,
            search: SearchConfig::default(),
            caps: SpaceCaps::default(),
            exhaustive_cap: EXHAUSTIVE_CAP,
            force: false,
            fuse_qkv: false,
            batch: None,
            timing: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub heuristic: Option<SearchResult>,
    pub exhaustive: Option<SearchResult>,
    pub comparison: Option<ComparisonReport>,
    pub files: Vec<PathBuf>,
}

fn write(path: PathBuf, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<(), DriverError> {
    fs::write(&path, contents).map_err(|e| DriverError::new(Stage::Io, format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn write_result(out_dir: &Path, tag: &str, r: &SearchResult, files: &mut Vec<PathBuf>) -> Result<(), DriverError> {
    let mut evals = Vec::new();
    evaluations_to_csv(&r.all_evaluated, &mut evals).stage(Stage::Io)?;
    write(out_dir.join(format!("{tag}_evals.csv")), &evals, files)?;
    let mut front = Vec::new();
    pareto_to_csv(&pareto_front(&r.all_evaluated), &mut front).stage(Stage::Io)?;
    write(out_dir.join(format!("{tag}_pareto.csv")), &front, files)?;
    // The full evaluation list is in the CSV.
    let summary = serde_json::json!({
        "best": r.best,
        "evaluations_used": r.evaluations_used,
        "history": r.history,
        "space_size": r.space_size,
        "space_fingerprint": r.space_fingerprint,
    });
    write(out_dir.join(format!("{tag}.json")), &pretty(&summary), files)
}

fn ensure_dir(dir: &Path) -> Result<(), DriverError> {
    fs::create_dir_all(dir).map_err(|e| DriverError::new(Stage::Io, format!("{}: {e}", dir.display())))
}

/// Runs the requested searches and writes evaluation logs, Pareto fronts and,
/// for [`SearchMode::Both`], a comparison report into `out_dir`.
pub fn cmd_search(model_doc: &str, hw_doc: &str, opts: &SearchOptions, out_dir: &Path) -> Result<SearchOutcome, DriverError> {
    let (model, hw) = parse_inputs(model_doc, hw_doc)?;
    let rw = Rewrites { fuse_qkv: opts.fuse_qkv, split_heads: false, batch: opts.batch };
    let (dag, _) = build(&model, &hw, &rw)?;
    let space = enumerate_space(&dag, &hw, &opts.caps).stage(Stage::Search)?;
    let mut outcome = SearchOutcome { heuristic: None, exhaustive: None, comparison: None, files: Vec::new() };
    let mut clocks = (0.0, 0.0);

    if matches!(opts.mode, SearchMode::Exhaustive | SearchMode::Both) {
        check_exhaustive_cap(&space, opts.exhaustive_cap, opts.force).stage(Stage::Search)?;
        let start = Instant::now();
        outcome.exhaustive = Some(exhaustive_search(&dag, &hw, &space).stage(Stage::Search)?);
        clocks.1 = start.elapsed().as_secs_f64();
    }
    if matches!(opts.mode, SearchMode::Heuristic | SearchMode::Both) {
        let cfg = SearchConfig { seed: opts.seed, ..opts.search.clone() };
        let start = Instant::now();
        outcome.heuristic = Some(heuristic_search(&dag, &hw, &space, &cfg).stage(Stage::Search)?);
        clocks.0 = start.elapsed().as_secs_f64();
    }
    if let (Some(h), Some(x)) = (&outcome.heuristic, &outcome.exhaustive) {
        outcome.comparison = Some(compare_searches(h, x, opts.timing.then_some(clocks)).stage(Stage::Search)?);
    }

    ensure_dir(out_dir)?;
    let mut files = Vec::new();
    if let Some(r) = &outcome.heuristic {
        write_result(out_dir, "heuristic", r, &mut files)?;
    }
    if let Some(r) = &outcome.exhaustive {
        write_result(out_dir, "exhaustive", r, &mut files)?;
    }
    if let Some(c) = &outcome.comparison {
        write(out_dir.join("comparison.json"), &pretty(c), &mut files)?;
    }
    outcome.files = files;
    Ok(outcome)
}

#[derive(Debug, Clone, Default)]
pub struct ScheduleOptions {
    pub layout: LayoutConfig,
    pub fuse_qkv: bool,
    pub batch: Option<u64>,
}

/// Plans every node and writes `schedule_plan.json` plus one trace per
/// scheduled kind (`trace_<kind>.txt`, first node of that kind).
pub fn cmd_schedule(
    model_doc: &str,
    hw_doc: &str,
    opts: &ScheduleOptions,
    out_dir: &Path,
) -> Result<(Vec<NodePlan>, Vec<PathBuf>), DriverError> {
    let (model, hw) = parse_inputs(model_doc, hw_doc)?;
    let rw = Rewrites { fuse_qkv: opts.fuse_qkv, split_heads: false, batch: opts.batch };
    let (dag, _) = build(&model, &hw, &rw)?;
    let plans = plan_layouts(&dag, &hw, &opts.layout).stage(Stage::Schedule)?;
    ensure_dir(out_dir)?;
    let mut files = Vec::new();
    write(out_dir.join("schedule_plan.json"), &pretty(&plans), &mut files)?;
    let mut done: Vec<OpTag> = Vec::new();
    for node in dag.nodes() {
        let tag = node.kind.tag();
        if done.contains(&tag) {
            continue;
        }
        if let Some(s) = schedule_node(node, opts.layout.choice(tag), &hw, &opts.layout).stage(Stage::Schedule)? {
            let name = format!("trace_{}.txt", tag.name().to_lowercase());
            write(out_dir.join(name), s.to_trace().as_bytes(), &mut files)?;
            done.push(tag);
        }
    }
    Ok((plans, files))
}

/// Parses `Q<int>.<frac>` (signed) or `UQ<int>.<frac>` (unsigned).
pub fn parse_format(text: &str) -> Result<FixedFormat, DriverError> {
    let err = || DriverError::new(Stage::Usage, format!("bad format `{text}` (expected e.g. Q8.8)"));
    let (signed, rest) = match text.strip_prefix("UQ") {
        Some(r) => (false, r),
        None => (true, text.strip_prefix('Q').ok_or_else(err)?),
    };
    let (i, f) = rest.split_once('.').ok_or_else(err)?;
    let (i, f): (u32, u32) = (i.parse().map_err(|_| err())?, f.parse().map_err(|_| err())?);
    let total = i + f + u32::from(signed && i == 0);
    FixedFormat::new(total, f, signed).map_err(|e| DriverError::new(Stage::Usage, e))
}

#[derive(Debug, Clone)]
pub struct ApproxReportOptions {
    /// Activation format; the wide format doubles both widths.
    pub format: Option<FixedFormat>,
    pub exact: bool,
    pub samples: usize,
    pub seed: u64,
    pub base: ApproxConfig,
}

impl Default for ApproxReportOptions {
    fn default() -> Self {
        Self { format: None, exact: false, samples: 4096, seed: 0, base: ApproxConfig::default() }
    }
}

/// Error reports for `isqrt`, `exp`, `softmax` and `gelu`; written as
/// `approx_report.json` and `approx_report.csv` when `out_dir` is given.
pub fn cmd_approx_report(opts: &ApproxReportOptions, out_dir: Option<&Path>) -> Result<Vec<ErrorReport>, DriverError> {
    let mut cfg = ApproxConfig { exact: opts.exact, ..opts.base.clone() };
    if let Some(f) = opts.format {
        cfg.format = f;
        cfg.wide = FixedFormat::new(2 * f.total_bits, 2 * f.frac_bits, f.signed).stage(Stage::Approx)?;
    }
    cfg.validate().stage(Stage::Approx)?;
    let sweeps = [
        (ApproxFn::Isqrt, (0.0625, 256.0)),
        (ApproxFn::Exp, cfg.exp_domain),
        (ApproxFn::Softmax { len: 197 }, (-8.0, 8.0)),
        (ApproxFn::Gelu, (-6.0, 6.0)),
    ];
    let reports = sweeps
        .iter()
        .map(|&(f, d)| {
            let samples = if let ApproxFn::Softmax { .. } = f { (opts.samples / 16).max(1) } else { opts.samples };
            error_report(f, d, samples, opts.seed, &cfg)
        })
        .collect::<Result<Vec<_>, _>>()
        .stage(Stage::Approx)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        let mut files = Vec::new();
        write(dir.join("approx_report.json"), &pretty(&reports), &mut files)?;
        let mut csv = Vec::new();
        reports_to_csv(&reports, &mut csv).stage(Stage::Io)?;
        write(dir.join("approx_report.csv"), &csv, &mut files)?;
    }
    Ok(reports)
}
