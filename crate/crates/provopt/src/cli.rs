//! Command-line front end. Every command writes to a caller-supplied sink so
//! it can be driven from tests as well as from `main`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use provopt_core::algebra::{QueryGraph, Value};
use provopt_core::cbo::{Clock, FirstChoice, Report, SimulatedClock, StopRule, Strategy};
use provopt_core::executor::{evaluate, BagRelation, CostParams, Database, Statistics};
use provopt_core::instrument::{
    instrument_query, reenact_relation, AggMethod, AggPolicy, ScopeMethod, VersionedStore,
};
use provopt_core::pat::{apply_pats, PatConfig, PatStep, Rule};
use provopt_core::pipeline::{Generated, Pipeline};
use provopt_core::properties::infer_all;
use provopt_core::sqlgen::to_sql;

use crate::bench::{run_bench, BenchConfig};
use crate::data::{load_dir, Dataset};
use crate::plan::{parse_plan, print_plan, print_plan_annotated};
use crate::update::parse_updates;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "PROVOPT_SEED";

#[derive(Debug, Parser)]
#[command(name = "provopt", version, about = "Provenance instrumentation with cost-based plan choices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Instrument, rewrite and optimize a query, then evaluate the best plan.
    Run(RunArgs),
    /// Print the instrumented plan (or its SQL) without rewrites.
    Instrument(InstrumentArgs),
    /// Apply the rewrite rules to a plan.
    Optimize(OptimizeArgs),
    /// Print a plan annotated with the inferred properties of every operator.
    ExplainProperties(PlanFileArgs),
    /// Print the SQL for a plan.
    Sql(PlanFileArgs),
    /// Compare aggregation methods on a synthetic stacked-aggregation workload.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggChoice {
    Join,
    Window,
    /// Leave the choice to the optimizer.
    Cbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    None,
    Filter,
    Histjoin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyName {
    Seq,
    Bin,
    Sa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockName {
    Wall,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Jsonl,
}

fn parse_stop(s: &str) -> Result<StopRule, String> {
    match s {
        "none" => Ok(StopRule::None),
        "adaptive" => Ok(StopRule::Adaptive),
        _ => match s.strip_prefix("max-iters=").map(str::parse) {
            Some(Ok(n)) => Ok(StopRule::MaxIters(n)),
            _ => Err(format!("expected none, adaptive or max-iters=N, got `{s}`")),
        },
    }
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false)]
pub struct InputSource {
    /// Plan whose provenance is computed.
    #[arg(long, value_name = "PLAN")]
    pub prov_of: Option<PathBuf>,
    /// Plan evaluated as is.
    #[arg(long, value_name = "PLAN")]
    pub query: Option<PathBuf>,
    /// Transaction of UPDATE statements to reenact.
    #[arg(long, value_name = "TXN")]
    pub reenact: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub source: InputSource,
    /// Directory of `<rel>.csv` files with `<rel>.schema` sidecars.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AggChoice::Cbo)]
    pub agg_method: AggChoice,
    /// Restrict reenactment to the rows the transaction modified.
    #[arg(long, value_enum, default_value_t = Scope::None)]
    pub scope: Scope,
}

#[derive(Debug, Args)]
pub struct RewriteArgs {
    /// Comma-separated rules; `-rule` disables one. Without any positive
    /// entry every rule not disabled runs.
    #[arg(long, value_name = "LIST")]
    pub rules: Option<String>,
    /// Skip the rewrite stage.
    #[arg(long)]
    pub no_pats: bool,
    /// Let the optimizer choose the input order of every join.
    #[arg(long)]
    pub reorder_joins: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value_t = StrategyName::Seq)]
    pub strategy: StrategyName,
    /// none, adaptive or max-iters=N.
    #[arg(long, value_parser = parse_stop, default_value = "none")]
    pub stop: StopRule,
    #[arg(long, default_value_t = 100.0)]
    pub sa_temp: f64,
    #[arg(long, default_value_t = 0.95)]
    pub sa_cooling: f64,
    #[arg(long, default_value_t = 50)]
    pub sa_steps: usize,
    /// Overridden by the PROVOPT_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Source of optimization time for adaptive stopping.
    #[arg(long, value_enum, default_value_t = ClockName::Wall)]
    pub clock: ClockName,
    /// Cost units per second of wall-clock time.
    #[arg(long, default_value_t = 1e6)]
    pub time_scale: f64,
    /// Cost units charged per iteration by the simulated clock.
    #[arg(long, default_value_t = 1.0)]
    pub iteration_cost: f64,
    /// Write one `path<TAB>cost` line per iteration to this file.
    #[arg(long, value_name = "FILE")]
    pub trace_plans: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub rewrite: RewriteArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct InstrumentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Print SQL instead of the plan.
    #[arg(long)]
    pub sql: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub plan: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Comma-separated rules; `-rule` disables one.
    #[arg(long, value_name = "LIST")]
    pub rules: Option<String>,
    /// Print the plan after every rule that changed it.
    #[arg(long)]
    pub dump_steps: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanFileArgs {
    pub plan: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Number of stacked aggregations.
    #[arg(long, default_value_t = 3)]
    pub aggs: usize,
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    /// Distinct groups at the lowest level.
    #[arg(long, default_value_t = 64)]
    pub groups: i64,
    /// How many groups of one level form a group of the next.
    #[arg(long, default_value_t = 4)]
    pub fan_in: i64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also compare expression sizes of a chain of this many updates with
    /// and without the merge safety check.
    #[arg(long)]
    pub reenact_depth: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parse `--rules`.
pub fn parse_rules(list: &str) -> Result<PatConfig> {
    let mut enable = Vec::new();
    let mut disable = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.strip_prefix('-') {
            Some(r) => disable.push(Rule::parse(r)?),
            None => enable.push(Rule::parse(item)?),
        }
    }
    let mut config = if enable.is_empty() { PatConfig::default() } else { PatConfig::only(&enable) };
    for r in disable {
        config.rules.remove(&r);
    }
    Ok(config)
}

/// `--seed` unless the environment overrides it.
pub fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().with_context(|| format!("{SEED_ENV}=`{s}` is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

/// Wall-clock time converted to cost units.
pub struct WallClock {
    last: Instant,
    scale: f64,
}

impl WallClock {
    pub fn new(units_per_second: f64) -> Self {
        WallClock { last: Instant::now(), scale: units_per_second }
    }
}

impl Clock for WallClock {
    fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let dt = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        dt * self.scale
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_data(dir: Option<&Path>) -> Result<Dataset> {
    match dir {
        Some(d) => Ok(load_dir(d)?),
        None => Ok(Dataset::default()),
    }
}

fn load_plan(path: &Path, ds: &Dataset) -> Result<QueryGraph> {
    let text = read(path)?;
    parse_plan(&text, &ds.catalog()).with_context(|| format!("parsing {}", path.display()))
}

/// A query to run and the database it runs over.
struct Loaded {
    graph: QueryGraph,
    db: Database,
    instrument: bool,
}

fn load_input(args: &InputArgs, ds: &Dataset) -> Result<Loaded> {
    let src = &args.source;
    if let Some(p) = src.prov_of.as_deref().or(src.query.as_deref()) {
        if args.scope != Scope::None {
            bail!("--scope only applies to --reenact");
        }
        return Ok(Loaded { graph: load_plan(p, ds)?, db: ds.db.clone(), instrument: src.prov_of.is_some() });
    }
    let path = src.reenact.as_deref().expect("one input is required");
    let updates = parse_updates(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let Some(relation) = updates.first().map(|u| u.relation.clone()) else {
        bail!("{}: transaction has no updates", path.display());
    };
    let Some(table) = ds.tables.get(&relation) else {
        bail!("relation `{relation}` is not in the data directory");
    };
    let method = match args.scope {
        Scope::None => {
            let graph = reenact_relation(&relation, table.schema.clone(), &updates)?;
            return Ok(Loaded { graph, db: ds.db.clone(), instrument: false });
        }
        Scope::Filter => ScopeMethod::FilterUpdated,
        Scope::Histjoin => ScopeMethod::HistJoin,
    };
    let mut store = VersionedStore::new();
    let key = table.keys.first().cloned().unwrap_or_default();
    store.create(relation.clone(), table.schema.clone(), key, ds.rows(&relation))?;
    let txn = store.execute(updates)?;
    Ok(Loaded { graph: store.scoped_reenactment(txn, method)?, db: store.history_database(txn)?, instrument: false })
}

fn policy(choice: AggChoice) -> AggPolicy {
    match choice {
        AggChoice::Join => AggPolicy::Fixed(AggMethod::Join),
        AggChoice::Window => AggPolicy::Fixed(AggMethod::Window),
        AggChoice::Cbo => AggPolicy::Choose,
    }
}

fn strategy(args: &SearchArgs, seed: u64) -> Strategy {
    match args.strategy {
        StrategyName::Seq => Strategy::Sequential,
        StrategyName::Bin => Strategy::Binary,
        StrategyName::Sa => {
            Strategy::Annealing { seed, temp0: args.sa_temp, cooling: args.sa_cooling, steps: args.sa_steps }
        }
    }
}

fn open_out<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(stdout),
    })
}

fn json_value(v: &Value) -> serde_json::Value {
    match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => json!(b),
        Value::Int(i) => json!(i),
        Value::Float(f) => json!(f),
        Value::Str(s) => json!(s),
    }
}

fn fmt_path(path: &[usize]) -> String {
    let items: Vec<String> = path.iter().map(usize::to_string).collect();
    format!("[{}]", items.join(","))
}

fn fmt_cost(cost: Option<f64>) -> String {
    cost.map_or_else(|| "error".into(), |c| format!("{c}"))
}

/// Rows with duplicates repeated, one line each.
pub fn write_table(out: &mut dyn Write, rel: &BagRelation) -> std::io::Result<()> {
    writeln!(out, "{}", rel.schema().names().join(" | "))?;
    for (t, m) in rel.iter() {
        let line: Vec<String> = t.iter().map(Value::to_string).collect();
        for _ in 0..*m {
            writeln!(out, "{}", line.join(" | "))?;
        }
    }
    Ok(())
}

fn write_trace_file(path: &Path, report: &Report<Generated>) -> Result<()> {
    let mut text = String::new();
    for t in &report.trace {
        text.push_str(&format!("{}\t{}\n", fmt_path(&t.path), fmt_cost(t.cost)));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let seed = effective_seed(args.search.seed)?;
    let ds = load_data(args.input.data.as_deref())?;
    let input = load_input(&args.input, &ds)?;
    let pats = match (&args.rewrite.rules, args.rewrite.no_pats) {
        (_, true) => None,
        (Some(list), false) => Some(parse_rules(list)?),
        (None, false) => Some(PatConfig::default()),
    };
    let pipeline = Pipeline {
        instrument: input.instrument.then(|| policy(args.input.agg_method)),
        pats,
        base_keys: ds.base_keys(),
        reorder_joins: args.rewrite.reorder_joins,
    };
    let stats = Statistics::from_database(&input.db);
    let mut wall = WallClock::new(args.search.time_scale);
    let mut sim = SimulatedClock { per_iteration: args.search.iteration_cost };
    let clock: &mut dyn Clock = match args.search.clock {
        ClockName::Wall => &mut wall,
        ClockName::Simulated => &mut sim,
    };
    let report = pipeline.optimize(
        &input.graph,
        &stats,
        CostParams::default(),
        strategy(&args.search, seed),
        args.search.stop,
        clock,
    )?;
    if let Some(p) = &args.search.trace_plans {
        write_trace_file(p, &report)?;
    }
    let Some(best) = &report.best else {
        bail!("no plan could be costed in {} iterations", report.iterations());
    };
    let result = evaluate(&best.plan.graph, &input.db)?;
    let mut out = open_out(args.output.out.as_deref(), stdout)?;
    match args.output.format {
        Format::Text => {
            writeln!(out, "seed: {seed}")?;
            for (i, t) in report.trace.iter().enumerate() {
                let mark = if t.accepted { "" } else { " rejected" };
                writeln!(out, "iteration {}: path {} cost {}{mark}", i + 1, fmt_path(&t.path), fmt_cost(t.cost))?;
            }
            writeln!(
                out,
                "best: path {} cost {} after {} iterations",
                fmt_path(&best.path),
                best.cost,
                report.iterations()
            )?;
            writeln!(out, "result: {} rows", result.total())?;
            write_table(&mut out, &result)?;
            writeln!(out, "sql:\n{}", best.plan.sql)?;
        }
        Format::Jsonl => {
            writeln!(out, "{}", json!({"type": "seed", "seed": seed}))?;
            for (i, t) in report.trace.iter().enumerate() {
                let rec = json!({"type": "iteration", "n": i + 1, "path": t.path, "cost": t.cost, "accepted": t.accepted});
                writeln!(out, "{rec}")?;
            }
            let rec = json!({"type": "best", "path": best.path, "cost": best.cost, "iterations": report.iterations()});
            writeln!(out, "{rec}")?;
            writeln!(out, "{}", json!({"type": "columns", "names": result.schema().names()}))?;
            for (t, m) in result.iter() {
                let values: Vec<_> = t.iter().map(json_value).collect();
                writeln!(out, "{}", json!({"type": "row", "values": values, "count": m}))?;
            }
            writeln!(out, "{}", json!({"type": "sql", "text": best.plan.sql}))?;
        }
    }
    Ok(())
}

fn cmd_instrument(args: &InstrumentArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load_data(args.input.data.as_deref())?;
    let input = load_input(&args.input, &ds)?;
    let graph = if !input.instrument {
        input.graph
    } else if args.input.agg_method == AggChoice::Cbo {
        let pipeline = Pipeline { instrument: Some(AggPolicy::Choose), pats: None, ..Pipeline::default() };
        let report = pipeline.optimize(
            &input.graph,
            &Statistics::from_database(&input.db),
            CostParams::default(),
            Strategy::Sequential,
            StopRule::None,
            &mut SimulatedClock { per_iteration: 0.0 },
        )?;
        report.best.context("no instrumented plan could be costed")?.plan.graph
    } else {
        instrument_query(&input.graph, policy(args.input.agg_method), &mut FirstChoice)?
    };
    let mut out = open_out(args.out.as_deref(), stdout)?;
    if args.sql {
        writeln!(out, "{}", to_sql(&graph)?.text())?;
    } else {
        write!(out, "{}", print_plan(&graph))?;
    }
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load_data(args.data.as_deref())?;
    let graph = load_plan(&args.plan, &ds)?;
    let config = match &args.rules {
        Some(list) => parse_rules(list)?,
        None => PatConfig::default(),
    };
    let mut steps: Vec<PatStep> = Vec::new();
    let trace = args.dump_steps.then_some(&mut steps);
    let result = apply_pats(&graph, &config, &ds.base_keys(), &mut FirstChoice, trace)?;
    let mut out = open_out(args.out.as_deref(), stdout)?;
    for s in &steps {
        writeln!(out, "; round {} after {}", s.round + 1, s.rule)?;
        write!(out, "{}", print_plan(&s.graph))?;
    }
    if args.dump_steps {
        writeln!(out, "; result")?;
    }
    write!(out, "{}", print_plan(&result))?;
    Ok(())
}

fn cmd_explain(args: &PlanFileArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load_data(args.data.as_deref())?;
    let graph = load_plan(&args.plan, &ds)?;
    let props = infer_all(&graph, &ds.base_keys());
    let annotate = |n: &provopt_core::algebra::NodeRef| {
        let Some(p) = props.get(n.id()) else { return Vec::new() };
        let keys: Vec<String> = p
            .keys
            .iter()
            .map(|k| format!("{{{}}}", k.iter().cloned().collect::<Vec<_>>().join(",")))
            .collect();
        let icols: Vec<&str> = p.icols.iter().map(String::as_str).collect();
        vec![
            format!("keys: {}", if keys.is_empty() { "none".into() } else { keys.join(" ") }),
            format!("ec: {}", p.ec),
            format!("icols: {{{}}}", icols.join(",")),
            format!("set: {}", p.set),
        ]
    };
    let mut out = open_out(args.out.as_deref(), stdout)?;
    write!(out, "{}", print_plan_annotated(&graph, &annotate))?;
    Ok(())
}

fn cmd_sql(args: &PlanFileArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load_data(args.data.as_deref())?;
    let graph = load_plan(&args.plan, &ds)?;
    let mut out = open_out(args.out.as_deref(), stdout)?;
    writeln!(out, "{}", to_sql(&graph)?.text())?;
    Ok(())
}

fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = BenchConfig {
        aggs: args.aggs,
        rows: args.rows,
        groups: args.groups,
        fan_in: args.fan_in,
        seed: effective_seed(args.seed)?,
        reenact_depth: args.reenact_depth,
    };
    let report = run_bench(&config)?;
    let mut out = open_out(args.output.out.as_deref(), stdout)?;
    match args.output.format {
        Format::Text => {
            writeln!(out, "seed: {}", config.seed)?;
            writeln!(out, "method heuristics est_cost runtime_ms plans path")?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{} {} {} {:.3} {} {}",
                    r.method,
                    if r.heuristics { "heu" } else { "noheu" },
                    r.est_cost,
                    r.runtime_ms,
                    r.plans,
                    fmt_path(&r.path)
                )?;
            }
            if let Some(s) = &report.reenact {
                writeln!(
                    out,
                    "reenact depth {}: single {} guarded {} unguarded {}",
                    s.depth, s.single_update, s.guarded, s.unguarded
                )?;
            }
        }
        Format::Jsonl => {
            writeln!(out, "{}", json!({"type": "seed", "seed": config.seed}))?;
            for r in &report.rows {
                let rec = json!({
                    "type": "bench",
                    "method": r.method,
                    "heuristics": r.heuristics,
                    "est_cost": r.est_cost,
                    "runtime_ms": r.runtime_ms,
                    "plans": r.plans,
                    "path": r.path,
                });
                writeln!(out, "{rec}")?;
            }
            if let Some(s) = &report.reenact {
                let rec = json!({
                    "type": "reenact",
                    "depth": s.depth,
                    "single_update": s.single_update,
                    "guarded": s.guarded,
                    "unguarded": s.unguarded,
                });
                writeln!(out, "{rec}")?;
            }
        }
    }
    Ok(())
}

/// Run one parsed command line.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Instrument(a) => cmd_instrument(a, out),
        Command::Optimize(a) => cmd_optimize(a, out),
        Command::ExplainProperties(a) => cmd_explain(a, out),
        Command::Sql(a) => cmd_sql(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}
