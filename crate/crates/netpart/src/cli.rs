//! `netpart` command line.
//!
//! Every subcommand reads one JSON document (a file or `-` for stdin) and
//! writes one document to stdout, so stages can be piped:
//!
//! ```text
//! netpart gen modular --levels 2 | netpart fsu | netpart partition refined --alpha 3
//! ```

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use netpart_core::dmpc::simulate;
use netpart_core::exact::{
    alpha_sweep, branch_and_bound, brute_force_partition, run_engine, BnbOptions, Engine, Objective,
};
use netpart_core::fsu::{select_fsus, FsuCollection};
use netpart_core::generate::{
    gen_generic, gen_modular, gen_random_fsu, GenericSpec, ModularSpec, RandomFsuSpec,
};
use netpart_core::graph::{
    build_linear_graph, build_pwa_graph, EquivalentGraph, SystemModel, Vertex,
};
use netpart_core::greedy::{greedy_refined_with, greedy_with, GreedyOptions, StepKind};
use netpart_core::metrics::{
    components, condensed_components, delta_from_partition, quadratic_of_labels, quadratic_terms,
    IndexConfig, Partition, SizeMeasure,
};
use serde::Serialize;
use serde_json::Value;

use crate::clock::StdClock;
use crate::error::CliError;
use crate::formats::{
    to_dot, write_metrics_csv, write_residual_csv, write_trajectory_csv, ComponentsDoc, FsuDoc,
    GraphDoc, IncumbentDoc, MoveDoc, PartitionDoc, ScenarioDoc, SystemDoc,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
/// An exact search stopped on its time limit without proving optimality.
pub const EXIT_ANYTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "netpart",
    version,
    about = "Partition networked systems into control units"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark system.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Build the equivalent graph of a system.
    Graph(GraphArgs),
    /// Select the fundamental system units of a system.
    Fsu(GraphArgs),
    /// Partition FSUs into composite units.
    Partition(PartitionArgs),
    /// Evaluate a stored partition.
    Metrics(MetricsArgs),
    /// Run an engine over a range of granularities.
    Sweep(SweepArgs),
    /// Closed-loop MPC on a partitioned linear system.
    Simulate(SimulateArgs),
    /// Render a graph, FSU collection or partition in Graphviz format.
    ExportDot(DotArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Hierarchical modular network of scalar FSUs.
    Modular {
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long, default_value_t = 4)]
        base_size: usize,
        #[arg(long, default_value_t = 0.1)]
        strong: f64,
        #[arg(long, default_value_t = 0.01)]
        weak: f64,
        #[arg(long, default_value_t = 1.0)]
        weak_scale: f64,
    },
    /// Random connected network of scalar FSUs.
    Random {
        #[arg(long, default_value_t = 9)]
        fsus: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 0.01)]
        w_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        w_hi: f64,
        /// Emit a two-mode piecewise-affine system.
        #[arg(long)]
        pwa: bool,
    },
    /// Sparse random input/state system.
    Generic {
        #[arg(long, default_value_t = 100)]
        states: usize,
        #[arg(long, default_value_t = 20)]
        inputs: usize,
        #[arg(long, default_value_t = 0.03)]
        density: f64,
        /// Embed one cluster per input.
        #[arg(long)]
        planted: bool,
    },
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(default_value = "-")]
    pub input: PathBuf,
    /// Mode of a piecewise-affine system, counted from 0.
    #[arg(long)]
    pub mode: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Greedy,
    Refined,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExactEngine {
    Bnb,
    Brute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SizeArg {
    Fsu,
    Node,
}

impl From<SizeArg> for SizeMeasure {
    fn from(s: SizeArg) -> Self {
        match s {
            SizeArg::Fsu => SizeMeasure::FsuCount,
            SizeArg::Node => SizeMeasure::NodeCount,
        }
    }
}

#[derive(Debug, Args)]
pub struct Granularity {
    /// Weight of the size term.
    #[arg(long, conflicts_with = "kappa")]
    pub alpha: Option<f64>,
    /// Granularity relative to the weakest coupling: α = (κ / w_min)².
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, value_enum, default_value_t = SizeArg::Fsu)]
    pub size: SizeArg,
}

impl Granularity {
    fn config(&self, coll: &FsuCollection) -> Result<IndexConfig, CliError> {
        let cfg = match (self.alpha, self.kappa) {
            (Some(a), _) => IndexConfig::new(a)?,
            (None, Some(k)) => IndexConfig::from_kappa(k, coll)?,
            (None, None) => {
                return Err(CliError::Usage(
                    "one of --alpha or --kappa is required".into(),
                ))
            }
        };
        Ok(cfg.with_size(self.size.into()))
    }
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(value_enum)]
    pub method: Method,
    #[arg(default_value = "-")]
    pub input: PathBuf,
    #[command(flatten)]
    pub granularity: Granularity,
    #[arg(long, value_enum, default_value_t = ExactEngine::Bnb)]
    pub engine: ExactEngine,
    /// Time budget in seconds for branch and bound.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Relative gap at which branch and bound may stop.
    #[arg(long, default_value_t = 0.0)]
    pub gap: f64,
    /// Include the move or incumbent trace.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub mode: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(default_value = "-")]
    pub input: PathBuf,
    /// Evaluate at this α instead of the one stored with the partition.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = SizeArg::Fsu)]
    pub size: SizeArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepEngine {
    Greedy,
    Refined,
    Brute,
    Bnb,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(default_value = "-")]
    pub input: PathBuf,
    /// Comma-separated κ values.
    #[arg(long, value_delimiter = ',', conflicts_with = "alphas")]
    pub kappas: Vec<f64>,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SweepEngine::Refined)]
    pub engine: SweepEngine,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub mode: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Partition document that carries its FSUs and system.
    #[arg(default_value = "-")]
    pub input: PathBuf,
    /// FSU document, when the partition does not carry one.
    #[arg(long)]
    pub fsus: Option<PathBuf>,
    /// Scenario JSON; defaults apply to missing fields.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Per-step metrics CSV. Printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for residual, trajectory and summary files.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DotArgs {
    #[arg(default_value = "-")]
    pub input: PathBuf,
    #[arg(long)]
    pub mode: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut io::stdin().lock(), &mut out) {
        Ok(code) => code,
        Err(e) => {
            report(&e, cli.format);
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                _ => EXIT_DOMAIN,
            }
        }
    }
}

fn report(e: &CliError, format: OutputFormat) {
    let mut err = io::stderr().lock();
    if format == OutputFormat::Json {
        let v = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
        let _ = writeln!(err, "{v}");
    } else {
        let _ = writeln!(err, "error: {e}");
    }
}

/// Runs a parsed command against the given streams and returns the exit code.
pub fn run(cli: &Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<u8, CliError> {
    let mut ctx = Ctx {
        stdin,
        out,
        format: cli.format,
    };
    match &cli.command {
        Command::Gen(g) => cmd_gen(&mut ctx, g, cli.seed),
        Command::Graph(a) => cmd_graph(&mut ctx, a),
        Command::Fsu(a) => cmd_fsu(&mut ctx, a),
        Command::Partition(a) => cmd_partition(&mut ctx, a),
        Command::Metrics(a) => cmd_metrics(&mut ctx, a),
        Command::Sweep(a) => cmd_sweep(&mut ctx, a),
        Command::Simulate(a) => cmd_simulate(&mut ctx, a),
        Command::ExportDot(a) => cmd_dot(&mut ctx, a),
    }
}

struct Ctx<'a> {
    stdin: &'a mut dyn Read,
    out: &'a mut dyn Write,
    format: OutputFormat,
}

impl Ctx<'_> {
    fn read(&mut self, path: &Path) -> Result<String, CliError> {
        if path.as_os_str() == "-" {
            let mut s = String::new();
            self.stdin
                .read_to_string(&mut s)
                .map_err(|e| CliError::io("<stdin>", e))?;
            Ok(s)
        } else {
            fs::read_to_string(path).map_err(|e| CliError::io(path, e))
        }
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut *self.out, value)?;
        writeln!(self.out).map_err(|e| CliError::io("<stdout>", e))
    }

    fn text(&mut self, s: &str) -> Result<(), CliError> {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e))
    }
}

/// Any document a stage may receive.
enum Doc {
    System(SystemDoc),
    Fsus(FsuDoc),
    Partition(PartitionDoc),
}

fn parse_doc(text: &str) -> Result<Doc, CliError> {
    let v: Value = serde_json::from_str(text)?;
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::Format("expected a JSON object".into()))?;
    if obj.contains_key("blocks") {
        Ok(Doc::Partition(serde_json::from_value(v)?))
    } else if obj.contains_key("fsus") {
        Ok(Doc::Fsus(serde_json::from_value(v)?))
    } else if obj.contains_key("kind") {
        Ok(Doc::System(serde_json::from_value(v)?))
    } else {
        Err(CliError::Format(
            "unrecognized document: expected a system, FSU collection or partition".into(),
        ))
    }
}

fn graph_of(model: &SystemModel, mode: Option<usize>) -> Result<EquivalentGraph, CliError> {
    match model {
        SystemModel::Linear(sys) => {
            if mode.is_some_and(|q| q != 0) {
                return Err(CliError::Usage(
                    "--mode applies to piecewise-affine systems".into(),
                ));
            }
            Ok(build_linear_graph(sys))
        }
        SystemModel::Pwa(sys) => Ok(build_pwa_graph(sys, mode.unwrap_or(0))?),
        SystemModel::Differentiable(_) => Err(CliError::Format(
            "differentiable models are library-only".into(),
        )),
    }
}

fn select(system: SystemDoc, mode: Option<usize>) -> Result<(FsuDoc, FsuCollection), CliError> {
    let model = system.to_model()?;
    let g = graph_of(&model, mode)?;
    let coll = select_fsus(&g)?;
    info!("selected {} FSUs from {} states", coll.len(), g.n_states());
    let is_pwa = matches!(model, SystemModel::Pwa(_));
    let doc = FsuDoc::new(&coll, Some(system), is_pwa.then_some(mode.unwrap_or(0)));
    Ok((doc, coll))
}

/// FSU document and collection from a system or FSU document.
fn fsus_from(doc: Doc, mode: Option<usize>) -> Result<(FsuDoc, FsuCollection), CliError> {
    match doc {
        Doc::System(s) => select(s, mode),
        Doc::Fsus(f) => {
            let coll = f.collection()?;
            Ok((f, coll))
        }
        Doc::Partition(p) => {
            let f = p
                .source
                .ok_or_else(|| CliError::Format("partition carries no FSU collection".into()))?;
            let coll = f.collection()?;
            Ok((f, coll))
        }
    }
}

fn cmd_gen(ctx: &mut Ctx, g: &GenCommand, seed: u64) -> Result<u8, CliError> {
    if ctx.format == OutputFormat::Csv {
        return Err(CliError::Usage("gen writes JSON only".into()));
    }
    let doc = match *g {
        GenCommand::Modular {
            levels,
            base_size,
            strong,
            weak,
            weak_scale,
        } => {
            if levels == 0 || base_size < 2 {
                return Err(CliError::Usage(
                    "need --levels >= 1 and --base-size >= 2".into(),
                ));
            }
            let spec = ModularSpec {
                levels,
                base_size,
                strong_w: strong,
                weak_w: weak,
                weak_scale,
            };
            SystemDoc::linear(&gen_modular(&spec))
        }
        GenCommand::Random {
            fsus,
            density,
            w_lo,
            w_hi,
            pwa,
        } => {
            if fsus == 0 || !(density > 0.0 && density <= 1.0) || !(0.0 < w_lo && w_lo <= w_hi) {
                return Err(CliError::Usage(
                    "need --fsus >= 1, 0 < --density <= 1 and 0 < --w-lo <= --w-hi".into(),
                ));
            }
            let spec = RandomFsuSpec {
                n_fsus: fsus,
                density,
                w_lo,
                w_hi,
                seed,
                pwa,
            };
            SystemDoc::from_model(&gen_random_fsu(&spec))?
        }
        GenCommand::Generic {
            states,
            inputs,
            density,
            planted,
        } => {
            if inputs == 0 || states < inputs || !(0.0..=1.0).contains(&density) {
                return Err(CliError::Usage(
                    "need 1 <= --inputs <= --states and 0 <= --density <= 1".into(),
                ));
            }
            let spec = GenericSpec {
                n: states,
                p: inputs,
                density,
                seed,
                planted,
            };
            let gs = gen_generic(&spec);
            let mut doc = SystemDoc::linear(&gs.system);
            doc.clusters = gs.clusters;
            doc
        }
    };
    ctx.json(&doc)?;
    Ok(EXIT_OK)
}

fn cmd_graph(ctx: &mut Ctx, a: &GraphArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let system = match parse_doc(&text)? {
        Doc::System(s) => s,
        Doc::Fsus(f) => f
            .system
            .ok_or_else(|| CliError::Format("FSU document carries no system".into()))?,
        Doc::Partition(_) => return Err(CliError::Format("graph expects a system".into())),
    };
    let g = graph_of(&system.to_model()?, a.mode)?;
    match ctx.format {
        OutputFormat::Json => ctx.json(&GraphDoc::new(&g, a.mode))?,
        OutputFormat::Csv => {
            let mut s = String::from("source,target,weight\n");
            for e in g.edges() {
                s.push_str(&format!("{},{},{}\n", e.source, e.target, e.weight));
            }
            ctx.text(&s)?;
        }
    }
    Ok(EXIT_OK)
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_fsu(ctx: &mut Ctx, a: &GraphArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let (doc, _) = match parse_doc(&text)? {
        Doc::System(s) => select(s, a.mode)?,
        _ => return Err(CliError::Format("fsu expects a system".into())),
    };
    match ctx.format {
        OutputFormat::Json => ctx.json(&doc)?,
        OutputFormat::Csv => {
            let mut s = String::from("fsu,inputs,states\n");
            for (k, f) in doc.fsus.iter().enumerate() {
                s.push_str(&format!("{k},{},{}\n", join(&f.inputs), join(&f.states)));
            }
            ctx.text(&s)?;
        }
    }
    Ok(EXIT_OK)
}

fn partition_doc(
    source: FsuDoc,
    coll: &FsuCollection,
    cfg: &IndexConfig,
    engine: &str,
    p: &Partition,
) -> PartitionDoc {
    let comps = condensed_components(coll, p, cfg);
    let labels = p.labels();
    PartitionDoc {
        engine: engine.into(),
        alpha: cfg.alpha(),
        blocks: p.blocks().to_vec(),
        ratio: comps.ratio(cfg.alpha()),
        quadratic: quadratic_of_labels(coll, &labels, cfg.alpha()),
        labels,
        components: comps.into(),
        optimal: None,
        gap: None,
        nodes: None,
        incumbents: Vec::new(),
        moves: Vec::new(),
        source: Some(source),
    }
}

fn write_partition(ctx: &mut Ctx, doc: &PartitionDoc) -> Result<(), CliError> {
    match ctx.format {
        OutputFormat::Json => ctx.json(doc),
        OutputFormat::Csv => {
            let mut s = String::from("fsu,block\n");
            for (f, b) in doc.labels.iter().enumerate() {
                s.push_str(&format!("{f},{b}\n"));
            }
            ctx.text(&s)
        }
    }
}

fn cmd_partition(ctx: &mut Ctx, a: &PartitionArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let (source, coll) = fsus_from(parse_doc(&text)?, a.mode)?;
    let cfg = a.granularity.config(&coll)?;
    let opts = GreedyOptions::default();
    let mut code = EXIT_OK;
    let doc = match a.method {
        Method::Greedy | Method::Refined => {
            let (name, r) = if a.method == Method::Greedy {
                ("greedy", greedy_with(&coll, &cfg, opts))
            } else {
                ("refined", greedy_refined_with(&coll, &cfg, opts))
            };
            let mut doc = partition_doc(source, &coll, &cfg, name, &r.partition);
            if a.trace {
                doc.moves = r
                    .trace
                    .iter()
                    .map(|t| MoveDoc {
                        kind: match t.kind {
                            StepKind::Assign => "assign".into(),
                            StepKind::Relocate => "relocate".into(),
                        },
                        fsu: t.fsu,
                        block: t.block,
                        gain: t.gain,
                        value: t.value,
                    })
                    .collect();
            }
            doc
        }
        Method::Exact => match a.engine {
            ExactEngine::Brute => {
                let (p, _) = brute_force_partition(&coll, &cfg, Objective::Quadratic)?;
                let mut doc = partition_doc(source, &coll, &cfg, "brute", &p);
                doc.optimal = Some(true);
                doc.gap = Some(0.0);
                doc
            }
            ExactEngine::Bnb => {
                if !(a.gap >= 0.0) || a.time_limit.is_some_and(|t| !(t >= 0.0)) {
                    return Err(CliError::Usage(
                        "--gap and --time-limit must be non-negative".into(),
                    ));
                }
                let opts = BnbOptions {
                    time_limit: a.time_limit,
                    gap_tol: a.gap,
                    prune: true,
                };
                let r = branch_and_bound(&coll, &cfg, opts, &StdClock::new());
                info!("branch and bound: {} nodes, gap {}", r.nodes, r.gap);
                let mut doc = partition_doc(source, &coll, &cfg, "bnb", &r.partition);
                doc.optimal = Some(r.is_optimal());
                doc.gap = Some(r.gap);
                doc.nodes = Some(r.nodes);
                if a.trace {
                    doc.incumbents = r
                        .trace
                        .iter()
                        .map(|t| IncumbentDoc {
                            nodes: t.nodes,
                            time: t.time,
                            value: t.value,
                            gap: t.gap,
                        })
                        .collect();
                }
                if r.timed_out && !r.is_optimal() {
                    code = EXIT_ANYTIME;
                }
                doc
            }
        },
    };
    info!("{} blocks at alpha {}", doc.blocks.len(), doc.alpha);
    write_partition(ctx, &doc)?;
    Ok(code)
}

#[derive(Serialize)]
struct MetricsDoc {
    alpha: f64,
    blocks: usize,
    /// `node` when computed on the equivalent graph, `condensed` otherwise.
    level: &'static str,
    ratio: ComponentsDoc,
    ratio_value: f64,
    quadratic: ComponentsDoc,
    quadratic_value: f64,
}

fn cmd_metrics(ctx: &mut Ctx, a: &MetricsArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let pdoc = match parse_doc(&text)? {
        Doc::Partition(p) => p,
        _ => return Err(CliError::Format("metrics expects a partition".into())),
    };
    let p = pdoc.partition()?;
    let source = pdoc
        .source
        .as_ref()
        .ok_or_else(|| CliError::Format("partition carries no FSU collection".into()))?;
    let coll = source.collection()?;
    if p.fsu_count() != coll.len() {
        return Err(CliError::Format(
            "partition does not match its FSU collection".into(),
        ));
    }
    let cfg = IndexConfig::new(a.alpha.unwrap_or(pdoc.alpha))?.with_size(a.size.into());
    let (level, comps) = match &source.system {
        Some(s) => {
            let g = graph_of(&s.to_model()?, source.mode)?;
            ("node", components(&g, &coll, &p, &cfg))
        }
        None => ("condensed", condensed_components(&coll, &p, &cfg)),
    };
    let quad = quadratic_terms(&delta_from_partition(&p), &coll);
    let alpha = cfg.alpha();
    let doc = MetricsDoc {
        alpha,
        blocks: p.block_count(),
        level,
        ratio: comps.into(),
        ratio_value: comps.ratio(alpha),
        quadratic: quad.into(),
        quadratic_value: quad.inter - quad.intra + alpha * quad.size,
    };
    match ctx.format {
        OutputFormat::Json => ctx.json(&doc)?,
        OutputFormat::Csv => ctx.text(&format!(
            "alpha,blocks,level,intra,inter,size,ratio,q_intra,q_inter,q_size,quadratic\n{},{},{},{},{},{},{},{},{},{},{}\n",
            doc.alpha,
            doc.blocks,
            doc.level,
            comps.intra,
            comps.inter,
            comps.size,
            doc.ratio_value,
            quad.intra,
            quad.inter,
            quad.size,
            doc.quadratic_value
        ))?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepRow {
    kappa: Option<f64>,
    alpha: f64,
    blocks: usize,
    sizes: Vec<usize>,
    labels: Vec<usize>,
}

fn cmd_sweep(ctx: &mut Ctx, a: &SweepArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let (_, coll) = fsus_from(parse_doc(&text)?, a.mode)?;
    let engine = match a.engine {
        SweepEngine::Greedy => Engine::Greedy,
        SweepEngine::Refined => Engine::Refined,
        SweepEngine::Brute => Engine::Brute,
        SweepEngine::Bnb => Engine::BranchAndBound(BnbOptions {
            time_limit: a.time_limit,
            ..BnbOptions::default()
        }),
    };
    let clock = StdClock::new();
    let rows: Vec<SweepRow> = if !a.kappas.is_empty() {
        alpha_sweep(&coll, &a.kappas, engine, &clock)?
            .into_iter()
            .map(|pt| SweepRow {
                kappa: Some(pt.kappa),
                alpha: pt.alpha,
                blocks: pt.partition.block_count(),
                sizes: pt.partition.sizes(),
                labels: pt.partition.labels(),
            })
            .collect()
    } else if !a.alphas.is_empty() {
        let mut rows = Vec::new();
        for &alpha in &a.alphas {
            let p = run_engine(&coll, &IndexConfig::new(alpha)?, engine, &clock)?;
            rows.push(SweepRow {
                kappa: None,
                alpha,
                blocks: p.block_count(),
                sizes: p.sizes(),
                labels: p.labels(),
            });
        }
        rows
    } else {
        return Err(CliError::Usage(
            "one of --kappas or --alphas is required".into(),
        ));
    };
    match ctx.format {
        OutputFormat::Json => ctx.json(&rows)?,
        OutputFormat::Csv => {
            let mut s = String::from("kappa,alpha,blocks,sizes\n");
            for r in &rows {
                let k = r.kappa.map(|k| k.to_string()).unwrap_or_default();
                s.push_str(&format!(
                    "{k},{},{},{}\n",
                    r.alpha,
                    r.blocks,
                    join(&r.sizes)
                ));
            }
            ctx.text(&s)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RunSummary {
    blocks: usize,
    cores: usize,
    steps: usize,
    cumulative_cost: f64,
    core_seconds: f64,
    mean_step_time: f64,
    admm_iterations: usize,
    unconverged_steps: usize,
    soft_solves: usize,
    bound_violation: f64,
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = io::BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn cmd_simulate(ctx: &mut Ctx, a: &SimulateArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let pdoc = match parse_doc(&text)? {
        Doc::Partition(p) => p,
        _ => return Err(CliError::Format("simulate expects a partition".into())),
    };
    let source = match &a.fsus {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            match parse_doc(&text)? {
                Doc::Fsus(f) => f,
                _ => {
                    return Err(CliError::Format(format!(
                        "{}: expected FSUs",
                        path.display()
                    )))
                }
            }
        }
        None => pdoc.source.clone().ok_or_else(|| {
            CliError::Format("partition carries no FSU collection; pass --fsus".into())
        })?,
    };
    let sys = match source
        .system
        .as_ref()
        .map(SystemDoc::to_model)
        .transpose()?
    {
        Some(SystemModel::Linear(s)) => s,
        Some(_) => return Err(CliError::Format("simulation needs a linear system".into())),
        None => return Err(CliError::Format("FSU document carries no system".into())),
    };
    let coll = source.collection()?;
    let p = pdoc.partition()?;
    let scenario = match &a.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<ScenarioDoc>(&text)?.scenario()
        }
        None => ScenarioDoc::default().scenario(),
    };
    info!(
        "simulating {} steps on {} blocks, horizon {}",
        scenario.steps,
        p.block_count(),
        scenario.horizon
    );
    let m = simulate(&sys, &p, &coll, &scenario, &StdClock::new())?;
    if let Some(dir) = &a.traces {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_file(&dir.join("residuals.csv"), |w| write_residual_csv(w, &m))?;
        write_file(&dir.join("trajectory.csv"), |w| {
            write_trajectory_csv(w, &m, &scenario)
        })?;
    }
    let summary = RunSummary {
        blocks: p.block_count(),
        cores: m.cores,
        steps: m.records.len(),
        cumulative_cost: m.cumulative_cost(),
        core_seconds: m.core_seconds(),
        mean_step_time: m.mean_step_time(),
        admm_iterations: m.total_iterations(),
        unconverged_steps: m.unconverged_steps(),
        soft_solves: m.soft_solves,
        bound_violation: m.bound_violation(&scenario),
    };
    if let Some(dir) = &a.traces {
        write_file(&dir.join("summary.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &summary)?;
            writeln!(w)
        })?;
    }
    match &a.out {
        Some(path) => {
            write_file(path, |w| write_metrics_csv(w, &m))?;
            match ctx.format {
                OutputFormat::Json => ctx.json(&summary)?,
                OutputFormat::Csv => ctx.text(&format!(
                    "blocks,cores,cumulative_cost,core_seconds,mean_step_time\n{},{},{},{},{}\n",
                    summary.blocks,
                    summary.cores,
                    summary.cumulative_cost,
                    summary.core_seconds,
                    summary.mean_step_time
                ))?,
            }
        }
        None => {
            let mut buf = Vec::new();
            write_metrics_csv(&mut buf, &m).map_err(|e| CliError::io("<buffer>", e))?;
            ctx.text(&String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_dot(ctx: &mut Ctx, a: &DotArgs) -> Result<u8, CliError> {
    let text = ctx.read(&a.input)?;
    let members = |coll: &FsuCollection, fsus: &[usize]| -> Vec<Vertex> {
        fsus.iter()
            .flat_map(|&f| coll.fsus()[f].nodes().collect::<Vec<_>>())
            .collect()
    };
    let (system, mode, groups) = match parse_doc(&text)? {
        Doc::System(s) => (s, a.mode, None),
        Doc::Fsus(f) => {
            let coll = f.collection()?;
            let groups = (0..coll.len()).map(|k| members(&coll, &[k])).collect();
            let system = f
                .system
                .ok_or_else(|| CliError::Format("FSU document carries no system".into()))?;
            (system, f.mode.or(a.mode), Some(("FSU ", groups)))
        }
        Doc::Partition(p) => {
            let f = p
                .source
                .ok_or_else(|| CliError::Format("partition carries no FSU collection".into()))?;
            let coll = f.collection()?;
            let groups = p.blocks.iter().map(|b| members(&coll, b)).collect();
            let system = f
                .system
                .ok_or_else(|| CliError::Format("FSU document carries no system".into()))?;
            (system, f.mode.or(a.mode), Some(("CSU ", groups)))
        }
    };
    let g = graph_of(&system.to_model()?, mode)?;
    let dot = to_dot(&g, groups);
    match &a.out {
        Some(path) => fs::write(path, dot).map_err(|e| CliError::io(path, e))?,
        None => ctx.text(&dot)?,
    }
    Ok(EXIT_OK)
}
