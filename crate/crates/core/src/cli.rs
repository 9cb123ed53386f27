//! Command-line front end: engine config files and the `build`, `query`,
//! `bench`, `stats` and `parse` commands.
//!
//! Exit codes: 0 on success, 1 for user or query errors, 2 for I/O and
//! configuration errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::bench::{generate_workload, run_benchmark, BenchConfig, WorkloadSpec};
use crate::catalog::{infer_schema, parse_table, AttributeKind, Database};
use crate::error::{Error, Result};
use crate::estimator::{estimate_result, EstimatorOptions, JoinEstimation, Sigma};
use crate::inference::InferenceMethod;
use crate::model::{directory_bytes, BubbleModel, BuildConfig};
use crate::network::ModelParams;
use crate::partitioner::BubbleSource;
use crate::sql::{parse, parse_and_bind, Aggregate};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodName {
    Ve,
    Ps,
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ve" => Ok(MethodName::Ve),
            "ps" => Ok(MethodName::Ps),
            other => Err(Error::Config(format!(
                "unknown inference method `{other}` (expected ve or ps)"
            ))),
        }
    }
}

/// Relation declared in a config file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationSource {
    pub path: PathBuf,
    pub primary_key: Option<String>,
    /// attribute -> (relation, attribute)
    pub foreign_keys: BTreeMap<String, (String, String)>,
    pub types: BTreeMap<String, AttributeKind>,
}

/// Engine settings from a `key = value` file. Command-line flags override
/// file values.
///
/// ```text
/// data.Orders = orders.csv        # path relative to the config file
/// key.Orders = o_key
/// fk.Orders.c_key = Customer.c_key
/// type.Orders.price = float
/// theta = 500000
/// k = 3
/// join_mode = true
/// k_mcv = 60
/// buckets = 100
/// samples = 1000
/// seed = 1
/// method = ve
/// sigma = ALL
/// join_estimation = chain
/// model_dir = model
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub relations: BTreeMap<String, RelationSource>,
    pub build: BuildConfig,
    pub method: MethodName,
    pub seed: u64,
    pub sigma: Sigma,
    pub join_estimation: JoinEstimation,
    pub model_dir: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            relations: BTreeMap::new(),
            build: BuildConfig::default(),
            method: MethodName::Ve,
            seed: 1,
            sigma: Sigma::All,
            join_estimation: JoinEstimation::Chain,
            model_dir: None,
        }
    }
}

fn config_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_join_estimation(value: &str) -> Result<JoinEstimation> {
    match value.to_ascii_lowercase().as_str() {
        "chain" => Ok(JoinEstimation::Chain),
        "uniformity" => Ok(JoinEstimation::Uniformity),
        other => Err(Error::Config(format!("unknown join estimation `{other}`"))),
    }
}

impl EngineConfig {
    /// Parses config text; relative data paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = EngineConfig::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            if seen.insert(key.to_string(), n + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            cfg.set(key, value, base)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_config(e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["data", rel] => self.relations.entry(rel.to_string()).or_default().path = base.join(value),
            ["key", rel] => self.relations.entry(rel.to_string()).or_default().primary_key = Some(value.to_string()),
            ["fk", rel, attr] => {
                let (r, a) = value
                    .split_once('.')
                    .ok_or_else(|| Error::Config(format!("`{key}` must name Relation.attribute")))?;
                self.relations
                    .entry(rel.to_string())
                    .or_default()
                    .foreign_keys
                    .insert(attr.to_string(), (r.to_string(), a.to_string()));
            }
            ["type", rel, attr] => {
                let kind = AttributeKind::from_str(value)?;
                self.relations
                    .entry(rel.to_string())
                    .or_default()
                    .types
                    .insert(attr.to_string(), kind);
            }
            ["theta"] => self.build.partition.theta = config_value(key, value)?,
            ["k"] => self.build.partition.k = config_value(key, value)?,
            ["join_mode"] => self.build.partition.join_mode = parse_bool(key, value)?,
            ["k_mcv"] => self.build.params.k_mcv = config_value(key, value)?,
            ["buckets"] => self.build.params.buckets = config_value(key, value)?,
            ["samples"] => self.build.params.samples = config_value(key, value)?,
            ["seed"] => self.seed = config_value(key, value)?,
            ["method"] => self.method = value.parse()?,
            ["sigma"] => self.sigma = value.parse()?,
            ["join_estimation"] => self.join_estimation = parse_join_estimation(value)?,
            ["model_dir"] => self.model_dir = Some(base.join(value)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.build.partition;
        if p.theta == 0 || p.k == 0 {
            return Err(Error::Config(format!(
                "theta and k must be >= 1 (got {}, {})",
                p.theta, p.k
            )));
        }
        ModelParams::new(
            self.build.params.k_mcv,
            self.build.params.buckets,
            self.build.params.samples,
        )
        .map_err(|e| Error::Config(strip_config(e)))?;
        for (name, r) in &self.relations {
            if r.path.as_os_str().is_empty() {
                return Err(Error::Config(format!("relation `{name}` has no `data.{name}` entry")));
            }
        }
        Ok(())
    }

    pub fn method(&self) -> InferenceMethod {
        match self.method {
            MethodName::Ve => InferenceMethod::VariableElimination,
            MethodName::Ps => InferenceMethod::ProgressiveSampling {
                samples: self.build.params.samples,
                seed: self.seed,
            },
        }
    }

    pub fn estimator_options(&self, use_join_bubbles: bool) -> EstimatorOptions {
        EstimatorOptions {
            sigma: self.sigma,
            method: self.method(),
            join_estimation: self.join_estimation,
            use_join_bubbles,
        }
    }

    /// Loads every declared relation with its keys and type overrides.
    pub fn load_database(&self) -> Result<Database> {
        if self.relations.is_empty() {
            return Err(Error::Config(
                "no relations declared (`data.<Relation> = <file>`)".into(),
            ));
        }
        let mut tables = Vec::with_capacity(self.relations.len());
        for (name, src) in &self.relations {
            let text = fs::read_to_string(&src.path).map_err(|e| Error::io(&src.path, e))?;
            let mut schema = infer_schema(name, &text)?;
            for (attr, kind) in &src.types {
                schema.set_kind(attr, *kind)?;
            }
            if let Some(pk) = &src.primary_key {
                schema = schema.with_primary_key(pk)?;
            }
            for (attr, (rel, ref_attr)) in &src.foreign_keys {
                schema = schema.with_foreign_key(attr, rel, ref_attr)?;
            }
            tables.push(parse_table(text.as_bytes(), schema)?);
        }
        Database::new(tables)
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

#[derive(Parser, Debug)]
#[command(name = "tbq", about = "Approximate aggregation queries over tuple bubbles", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn bubble networks from CSV data and write a model directory.
    Build(BuildArgs),
    /// Estimate one query, or read queries from stdin with --repl.
    Query(QueryArgs),
    /// Compare estimates with exact answers over a workload.
    Bench(BenchArgs),
    /// Describe the bubbles of a model directory.
    Stats(StatsArgs),
    /// Check queries for syntax (and names, with --model).
    Parse(ParseArgs),
}

#[derive(Args, Debug, Default)]
pub struct BuildOverrides {
    #[arg(long)]
    pub theta: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub join_mode: Option<bool>,
    #[arg(long)]
    pub k_mcv: Option<usize>,
    #[arg(long)]
    pub buckets: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct EstimateOverrides {
    /// ve or ps.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// ALL or a positive number of bubble combinations.
    #[arg(long)]
    pub sigma: Option<String>,
    /// chain or uniformity.
    #[arg(long)]
    pub join_estimation: Option<String>,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `model_dir` from the config.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: BuildOverrides,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: EstimateOverrides,
    /// Ignore join bubbles and chain per-relation networks.
    #[arg(long)]
    pub no_join_bubbles: bool,
    #[arg(long)]
    pub repl: bool,
    pub sql: Option<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `NAME=DIR`, repeatable; defaults to `model_dir` from the config.
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Comma-separated subset of ve, ps, uniformity.
    #[arg(long, default_value = "ve")]
    pub methods: String,
    /// One query per line; generated when absent.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Inclusive join range, e.g. `0..2`.
    #[arg(long, default_value = "0..2")]
    pub joins: String,
    #[arg(long, default_value = "1..3")]
    pub predicates: String,
    /// Comma-separated aggregates to draw.
    #[arg(long, default_value = "COUNT,SUM,AVG,MIN,MAX")]
    pub aggregates: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: EstimateOverrides,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    #[arg(long)]
    pub check: bool,
    /// Bind names against this model's catalog as well.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Query file, one query per line; stdin when absent.
    pub file: Option<PathBuf>,
}

/// Streams used by the commands.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn apply_estimate_overrides(cfg: &mut EngineConfig, o: &EstimateOverrides) -> Result<()> {
    if let Some(m) = &o.method {
        cfg.method = m.parse()?;
    }
    if let Some(s) = o.samples {
        cfg.build.params.samples = s;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(s) = &o.sigma {
        cfg.sigma = s.parse()?;
    }
    if let Some(j) = &o.join_estimation {
        cfg.join_estimation = parse_join_estimation(j)?;
    }
    cfg.validate()
}

pub fn cmd_build(args: &BuildArgs, io: &mut Io<'_>) -> Result<()> {
    let mut cfg = EngineConfig::load(&args.config)?;
    let o = &args.overrides;
    if let Some(v) = o.theta {
        cfg.build.partition.theta = v;
    }
    if let Some(v) = o.k {
        cfg.build.partition.k = v;
    }
    if let Some(v) = o.join_mode {
        cfg.build.partition.join_mode = v;
    }
    if let Some(v) = o.k_mcv {
        cfg.build.params.k_mcv = v;
    }
    if let Some(v) = o.buckets {
        cfg.build.params.buckets = v;
    }
    cfg.validate()?;
    let dir = args
        .model
        .clone()
        .or_else(|| cfg.model_dir.clone())
        .ok_or_else(|| Error::Config("no model directory (--model or `model_dir`)".into()))?;
    let db = cfg.load_database()?;
    let model = BubbleModel::build(&db, &cfg.build)?;
    let bytes = model.save(&dir)?;
    let joins = model
        .bubbles
        .iter()
        .filter(|b| matches!(b.source, BubbleSource::Join { .. }))
        .count();
    writeln!(
        io.stdout,
        "built {} bubbles ({} relation, {joins} join) in {}: {bytes} bytes",
        model.bubbles.len(),
        model.bubbles.len() - joins,
        dir.display()
    )
    .map_err(io_err)?;
    Ok(())
}

fn estimate_one(model: &BubbleModel, sql: &str, options: &EstimatorOptions, io: &mut Io<'_>) -> Result<()> {
    let query = parse_and_bind(sql, &model.catalog)?;
    let report = estimate_result(model, &query, options)?;
    write!(io.stdout, "{report}").map_err(io_err)?;
    writeln!(io.stderr, "latency: {:.3} ms", report.latency.as_secs_f64() * 1e3).map_err(io_err)?;
    Ok(())
}

pub fn cmd_query(args: &QueryArgs, io: &mut Io<'_>) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    apply_estimate_overrides(&mut cfg, &args.overrides)?;
    let model = BubbleModel::load(&args.model)?;
    let options = cfg.estimator_options(!args.no_join_bubbles);
    if args.repl {
        let mut failures = 0;
        let mut line = String::new();
        loop {
            line.clear();
            if io.stdin.read_line(&mut line).map_err(|e| Error::io("<stdin>", e))? == 0 {
                break;
            }
            let sql = line.trim().trim_end_matches(';');
            if sql.is_empty() {
                continue;
            }
            if let Err(e) = estimate_one(&model, sql, &options, io) {
                failures += 1;
                writeln!(io.stdout, "error: {e}").map_err(io_err)?;
            }
        }
        return if failures == 0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{failures} queries failed")))
        };
    }
    let sql = args
        .sql
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("give a query or --repl".into()))?;
    estimate_one(&model, sql, &options, io)
}

fn parse_range(text: &str, what: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::Config(format!("invalid {what} range `{text}` (expected A..B or N)"));
    match text.split_once("..") {
        Some((a, b)) => {
            Ok(a.trim().parse().map_err(|_| bad())?..=b.trim().trim_start_matches('=').parse().map_err(|_| bad())?)
        }
        None => {
            let n = text.trim().parse().map_err(|_| bad())?;
            Ok(n..=n)
        }
    }
}

fn parse_aggregates(text: &str) -> Result<Vec<Aggregate>> {
    text.split(',')
        .map(|a| match a.trim().to_ascii_uppercase().as_str() {
            "COUNT" => Ok(Aggregate::Count),
            "SUM" => Ok(Aggregate::Sum),
            "AVG" => Ok(Aggregate::Avg),
            "MIN" => Ok(Aggregate::Min),
            "MAX" => Ok(Aggregate::Max),
            other => Err(Error::Config(format!("unknown aggregate `{other}`"))),
        })
        .collect()
}

fn read_queries(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim().trim_end_matches(';').trim())
        .filter(|l| !l.is_empty() && !l.starts_with("--") && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn cmd_bench(args: &BenchArgs, io: &mut Io<'_>) -> Result<()> {
    let mut cfg = EngineConfig::load(&args.config)?;
    apply_estimate_overrides(&mut cfg, &args.overrides)?;
    let mut named: Vec<(String, PathBuf)> = Vec::new();
    for m in &args.models {
        let (name, dir) = m
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--model expects NAME=DIR, got `{m}`")))?;
        named.push((name.to_string(), PathBuf::from(dir)));
    }
    if named.is_empty() {
        let dir = cfg
            .model_dir
            .clone()
            .ok_or_else(|| Error::Config("no model (--model NAME=DIR or `model_dir`)".into()))?;
        named.push(("model".to_string(), dir));
    }
    let mut models = Vec::with_capacity(named.len());
    for (name, dir) in &named {
        models.push((name.clone(), BubbleModel::load(dir)?, directory_bytes(dir)?));
    }

    let db = cfg.load_database()?;
    let workload = match &args.workload {
        Some(p) => read_queries(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
        None => generate_workload(
            &db,
            &WorkloadSpec {
                queries: args.queries,
                joins: parse_range(&args.joins, "join")?,
                predicates: parse_range(&args.predicates, "predicate")?,
                aggregates: parse_aggregates(&args.aggregates)?,
                seed: cfg.seed,
            },
        )?,
    };

    let mut configs = Vec::new();
    for (name, model, bytes) in &models {
        for method in args.methods.split(',').map(str::trim) {
            let mut options = cfg.estimator_options(true);
            match method {
                "ve" => options.method = InferenceMethod::VariableElimination,
                "ps" => {
                    options.method = InferenceMethod::ProgressiveSampling {
                        samples: cfg.build.params.samples,
                        seed: cfg.seed,
                    }
                }
                "uniformity" => {
                    options.method = InferenceMethod::VariableElimination;
                    options.join_estimation = JoinEstimation::Uniformity;
                }
                other => return Err(Error::Config(format!("unknown bench method `{other}`"))),
            }
            configs.push(BenchConfig {
                name: format!("{name}/{method}"),
                model,
                options,
                model_bytes: *bytes,
            });
        }
    }
    let report = run_benchmark(&db, &workload, &configs)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut sql = workload.join("\n");
    sql.push('\n');
    write_out(&args.out, "workload.sql", &sql)?;
    write_out(&args.out, "report.csv", &report.report_csv())?;
    write_out(&args.out, "summary.csv", &report.summary_csv())?;
    write_out(&args.out, "timing.csv", &report.timing_csv())?;
    write!(io.stdout, "{report}").map_err(io_err)?;
    Ok(())
}

pub fn cmd_stats(args: &StatsArgs, io: &mut Io<'_>) -> Result<()> {
    let model = BubbleModel::load(&args.model)?;
    let bytes = directory_bytes(&args.model)?;
    let out = &mut io.stdout;
    let p = &model.config;
    writeln!(
        out,
        "model: {} bubbles, {bytes} bytes; theta={} k={} join_mode={} k_mcv={} buckets={} samples={}",
        model.bubbles.len(),
        p.partition.theta,
        p.partition.k,
        p.partition.join_mode,
        p.params.k_mcv,
        p.params.buckets,
        p.params.samples
    )
    .map_err(io_err)?;
    for (name, info) in &model.catalog.relations {
        writeln!(
            out,
            "relation {name}: {} rows, {} attributes",
            info.rows,
            info.schema.attributes.len()
        )
        .map_err(io_err)?;
    }
    for b in &model.bubbles {
        let net = &b.network;
        writeln!(
            out,
            "bubble {}: {} rows, root {}, {} stored CPT entries{}",
            b.id,
            b.rows,
            net.nodes[net.root].name,
            net.stored_entries(),
            if net.degenerate { " (empty)" } else { "" }
        )
        .map_err(io_err)?;
        for (parent, child) in net.edges() {
            writeln!(out, "  {} -> {}", net.nodes[parent].name, net.nodes[child].name).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn cmd_parse_check(args: &ParseArgs, io: &mut Io<'_>) -> Result<()> {
    if !args.check {
        return Err(Error::InvalidArgument("parse needs --check".into()));
    }
    let text = match &args.file {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => {
            let mut s = String::new();
            io.stdin.read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
            s
        }
    };
    let model = args.model.as_deref().map(BubbleModel::load).transpose()?;
    let mut failures = 0;
    for (i, sql) in read_queries(&text).iter().enumerate() {
        let result = match &model {
            Some(m) => parse(sql).and_then(|q| crate::sql::bind(&q, &m.catalog).map(|_| q)),
            None => parse(sql),
        };
        match result {
            Ok(q) => writeln!(io.stdout, "ok {}: {q}", i + 1),
            Err(e) => {
                failures += 1;
                writeln!(io.stdout, "error {}: {e}", i + 1)
            }
        }
        .map_err(io_err)?;
    }
    if failures > 0 {
        return Err(Error::InvalidArgument(format!("{failures} queries failed to parse")));
    }
    Ok(())
}

pub fn execute(cli: &Cli, io: &mut Io<'_>) -> Result<()> {
    match &cli.command {
        Command::Build(a) => cmd_build(a, io),
        Command::Query(a) => cmd_query(a, io),
        Command::Bench(a) => cmd_bench(a, io),
        Command::Stats(a) => cmd_stats(a, io),
        Command::Parse(a) => cmd_parse_check(a, io),
    }
}

pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_environmental() => 2,
        Err(_) => 1,
    }
}

/// Parses arguments, runs the command, reports errors on stderr and
/// returns the process exit code.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(io.stderr, "{e}");
            return code;
        }
    };
    let result = execute(&cli, io);
    if let Err(e) = &result {
        let _ = writeln!(io.stderr, "error: {e}");
    }
    exit_code(&result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_relations_and_settings() {
        let text = "data.Orders = o.csv\nkey.Orders = o_key\nfk.Orders.c_key = Customer.c_key\n\
                    type.Orders.price = float # money\ntheta = 10\njoin_mode = yes\nsigma = 2\nmethod = ps\n";
        let cfg = EngineConfig::parse(text, Path::new("/data")).unwrap();
        let o = &cfg.relations["Orders"];
        assert_eq!(o.path, Path::new("/data/o.csv"));
        assert_eq!(o.foreign_keys["c_key"], ("Customer".to_string(), "c_key".to_string()));
        assert_eq!(o.types["price"], AttributeKind::Float);
        assert_eq!(cfg.build.partition.theta, 10);
        assert!(cfg.build.partition.join_mode);
        assert_eq!(cfg.sigma, Sigma::Count(2));
        assert_eq!(cfg.method, MethodName::Ps);
    }

    #[test]
    fn config_errors_are_environmental() {
        for bad in ["nonsense", "theta = x", "bogus = 1", "k = 1\nk = 2"] {
            let e = EngineConfig::parse(bad, Path::new(".")).unwrap_err();
            assert!(e.is_environmental(), "{bad}: {e}");
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0..2", "x").unwrap(), 0..=2);
        assert_eq!(parse_range("1..=3", "x").unwrap(), 1..=3);
        assert_eq!(parse_range("2", "x").unwrap(), 2..=2);
        assert!(parse_range("a..b", "x").is_err());
    }
}
