//! Command-line harness for the hypergraph packing pipeline.
//!
//! Every subcommand writes its artifacts into `--out` and prints a short
//! human summary. Exit codes: 0 success, 1 I/O failure, 2 validation failure
//! (including malformed input files), 3 parameter rejection.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use hyperpack::combinatorics::binomial;
use hyperpack::packer::{exact_max_packing, validate_packing};
use hyperpack::peel::check_global_disjointness;
use hyperpack::procedure::{check_procedure_output, coverage_histogram, MemoryMode};
use hyperpack::regularity::{audit_l_property, LPropertyReport};
use hyperpack::rng::{stream_rng, Stream};
use hyperpack::schedule::check_schedule;
use hyperpack::*;

#[derive(Parser)]
#[command(
    name = "hyperpack",
    version,
    about = "Pack type-ell Hamilton cycles into k-uniform hypergraphs"
)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON object supplying defaults for any flag of the subcommand (keys
    /// are flag names); flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a complete or binomial random k-graph.
    Generate(GenerateArgs),
    /// Audit a k-graph against the regularity definition or a sequence property.
    Audit(AuditArgs),
    /// Build the shift digraph of a permutation and dump it.
    Reduce(ReduceArgs),
    /// Run one labelled round of random digraphs.
    Procedure1(ProcedureArgs),
    /// Pack Hamilton cycles in a dumped digraph.
    Pack(PackArgs),
    /// Run the full peeling loop.
    Peel(PeelArgs),
    /// Monte-Carlo check of one round quantity against its prediction.
    LemmaCheck(LemmaArgs),
    /// Validate a cycle file against a k-graph.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize, Deserialize)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Edge probability; 1 gives the complete graph.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value = "graph.txt")]
    output: String,
}

#[derive(Args, Serialize, Deserialize)]
struct AuditArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    ell: usize,
    /// Density to audit against; defaults to the edge density.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// exhaustive or sampled.
    #[arg(long, default_value = "sampled")]
    mode: String,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// definition1, one of L1..L8, or all-l.
    #[arg(long, default_value = "definition1")]
    property: String,
}

#[derive(Args, Serialize, Deserialize)]
struct ReduceArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    ell: usize,
    /// Comma-separated permutation of 1..n; random from the seed if absent.
    #[arg(long)]
    perm: Option<String>,
    #[arg(long, default_value = "digraph.dump")]
    output: String,
}

#[derive(Args, Serialize, Deserialize)]
struct ProcedureArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Override kappa instead of using the formula.
    #[arg(long)]
    kappa: Option<f64>,
    /// Override r instead of using the formula.
    #[arg(long)]
    r: Option<usize>,
    /// Largest formula r accepted without an override.
    #[arg(long, default_value_t = 1e6)]
    r_budget: f64,
    /// Regenerate digraphs instead of holding all of them.
    #[arg(long)]
    low_memory: bool,
    /// Also dump every nonempty filtered digraph.
    #[arg(long)]
    dump_filtered: bool,
}

#[derive(Args, Serialize, Deserialize)]
struct PackArgs {
    #[arg(long)]
    dump: PathBuf,
    #[arg(long, default_value_t = 200)]
    restart_factor: usize,
    #[arg(long, default_value_t = 2)]
    rotation_factor: usize,
    #[arg(long, default_value_t = 20)]
    fail_budget: usize,
    #[arg(long, default_value_t = 32)]
    trials: usize,
    /// Also run the exact oracle (small digraphs only).
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Serialize, Deserialize)]
struct PeelArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 1e6)]
    r_budget: f64,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pack_trials: usize,
    #[arg(long, default_value_t = 20)]
    fail_budget: usize,
    #[arg(long)]
    low_memory: bool,
}

#[derive(Args, Serialize, Deserialize)]
struct LemmaArgs {
    /// coverage, condensed, firstorder, secondorder or digraph-regularity.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    ell: usize,
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Edge probability of a random host graph; complete graph if absent.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 5.0)]
    kappa: f64,
    #[arg(long, default_value_t = 30)]
    r: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    ell: usize,
    /// One cycle per line, given as its cyclic vertex order.
    #[arg(long)]
    cycles: PathBuf,
}

enum Failure {
    Io(anyhow::Error),
    Validation(anyhow::Error),
    Rejected(anyhow::Error),
}

impl From<hyperpack::Error> for Failure {
    fn from(e: hyperpack::Error) -> Self {
        match e {
            hyperpack::Error::Io(_) => Failure::Io(e.into()),
            hyperpack::Error::Parse { .. } => Failure::Validation(e.into()),
            _ if e.is_parameter_rejection() => Failure::Rejected(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn reject(msg: impl Into<String>) -> Failure {
    Failure::Rejected(anyhow!(msg.into()))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(anyhow!(msg.into()))
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Validation(e)) => {
            eprintln!("validation failed: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Rejected(e)) => {
            eprintln!("rejected: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(matches: &ArgMatches) -> CliResult<()> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| reject(e.to_string()))?;
    let config = match &cli.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(map)) => Some(map),
                Ok(_) => return Err(reject("config must be a JSON object")),
                Err(e) => return Err(reject(format!("config {}: {e}", path.display()))),
            }
        }
        None => None,
    };
    let seed = match config.as_ref().and_then(|c| c.get("seed")) {
        Some(v) if matches.value_source("seed") != Some(ValueSource::CommandLine) => v
            .as_u64()
            .ok_or_else(|| reject("config seed must be a non-negative integer"))?,
        _ => cli.seed,
    };
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let ctx = Ctx {
        seed,
        out: cli.out.clone(),
    };
    fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let cfg = config.as_ref();
    match cli.command {
        Command::Generate(a) => generate(&ctx, merge(a, sub, cfg)?),
        Command::Audit(a) => audit(&ctx, merge(a, sub, cfg)?),
        Command::Reduce(a) => reduce(&ctx, merge(a, sub, cfg)?),
        Command::Procedure1(a) => procedure1(&ctx, merge(a, sub, cfg)?),
        Command::Pack(a) => pack(&ctx, merge(a, sub, cfg)?),
        Command::Peel(a) => peel(&ctx, merge(a, sub, cfg)?),
        Command::LemmaCheck(a) => lemma_check(&ctx, merge(a, sub, cfg)?),
        Command::Verify(a) => verify(&ctx, merge(a, sub, cfg)?),
    }
}

/// Fill every flag not given on the command line from the config object.
/// Keys that the subcommand does not know are ignored, so one config file can
/// serve several subcommands.
fn merge<T: Serialize + DeserializeOwned>(
    args: T,
    sub: &ArgMatches,
    config: Option<&Map<String, Value>>,
) -> CliResult<T> {
    let Some(config) = config else {
        return Ok(args);
    };
    let mut value = serde_json::to_value(&args).map_err(|e| Failure::Io(e.into()))?;
    let fields = value
        .as_object_mut()
        .expect("argument structs serialize to objects");
    for (key, v) in config {
        let id = key.replace('-', "_");
        if fields.contains_key(&id) && sub.value_source(&id) != Some(ValueSource::CommandLine) {
            fields.insert(id, v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| reject(format!("config: {e}")))
}

struct Ctx {
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.into()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }
}

fn load_graph(path: &Path) -> CliResult<KGraph> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    KGraph::read_text(BufReader::new(f)).map_err(|e| match e {
        hyperpack::Error::Io(_) => Failure::Io(anyhow!("{}: {e}", path.display())),
        _ => invalid(format!("{}: {e}", path.display())),
    })
}

fn edge_density(h: &KGraph) -> f64 {
    let total = binomial(h.n() as u64, h.k() as u64);
    if total == 0 {
        0.0
    } else {
        h.edge_count() as f64 / total as f64
    }
}

fn params_for(h: &KGraph, ell: usize) -> CliResult<Params> {
    let params = Params::derive(h.k(), ell, h.n())?;
    if !params.two_q_divides_n() {
        eprintln!(
            "warning: 2q = {} does not divide n = {}; continuing with q | n",
            2 * params.q,
            params.n
        );
    }
    Ok(params)
}

fn write_cycles(path: &Path, orders: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for order in orders {
        writeln!(w, "{}", order.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn type_l_lines(cycles: &[TypeLCycle]) -> Vec<Vec<String>> {
    cycles
        .iter()
        .map(|c| c.vertex_order.iter().map(|v| v.to_string()).collect())
        .collect()
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> CliResult<()> {
    if a.k < 2 || a.n < a.k {
        return Err(reject(format!(
            "need 2 <= k <= n, got n = {}, k = {}",
            a.n, a.k
        )));
    }
    let h = if a.p >= 1.0 {
        KGraph::complete(a.n, a.k)
    } else {
        KGraph::random(a.n, a.k, a.p, ctx.seed)?
    };
    let path = ctx.path(&a.output);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    h.write_text(BufWriter::new(f))?;
    ctx.write_json(
        "generate.json",
        &json!({ "n": a.n, "k": a.k, "p": a.p, "seed": ctx.seed, "edges": h.edge_count(), "graph": a.output }),
    )?;
    println!("wrote {} ({} edges)", path.display(), h.edge_count());
    Ok(())
}

fn audit(ctx: &Ctx, a: AuditArgs) -> CliResult<()> {
    let h = load_graph(&a.graph)?;
    let params = params_for(&h, a.ell)?;
    let p = a.p.unwrap_or_else(|| edge_density(&h));
    let mode: AuditMode = a.mode.parse().map_err(|e: String| reject(e))?;
    let cfg = AuditConfig {
        mode,
        samples: a.samples,
        seed: ctx.seed,
        ..Default::default()
    };
    match a.property.as_str() {
        "definition1" => {
            let rep = audit_definition1(&h, &params, p, a.eps, &cfg)?;
            ctx.write_json(
                "audit.json",
                &json!({ "params": params, "seed": ctx.seed, "report": rep }),
            )?;
            println!(
                "{:>3} {:>3} {:>14} {:>10} {:>12} {:>8}",
                "d", "s", "target", "families", "worst_ratio", "flag"
            );
            for c in &rep.cells {
                println!(
                    "{:>3} {:>3} {:>14.4} {:>10} {:>12.4} {:>8}",
                    c.d,
                    c.s,
                    c.target,
                    c.families,
                    c.worst_ratio,
                    if c.sub_unit_target { "sub-unit" } else { "" }
                );
            }
            println!(
                "epsilon_hat = {:.6} (requested {}), violations = {}",
                rep.epsilon_hat, a.eps, rep.violation_count
            );
        }
        other => {
            let props: Vec<LProperty> = if other == "all-l" {
                LProperty::ALL
                    .into_iter()
                    .filter(|&pr| hyperpack::regularity::l_shape(&params, pr).is_ok())
                    .collect()
            } else {
                vec![other.parse().map_err(|e: String| reject(e))?]
            };
            let reports: Vec<LPropertyReport> = props
                .iter()
                .map(|&pr| audit_l_property(&h, &params, p, pr, &cfg))
                .collect::<Result<_>>()?;
            ctx.write_json(
                "audit.json",
                &json!({ "params": params, "seed": ctx.seed, "reports": reports }),
            )?;
            println!(
                "{:>4} {:>14} {:>10} {:>12} {:>8}",
                "prop", "target", "tested", "worst_ratio", "flag"
            );
            for r in &reports {
                println!(
                    "{:>4} {:>14.4} {:>10} {:>12.4} {:>8}",
                    r.property.to_string(),
                    r.target,
                    r.tested_configs,
                    r.worst_ratio,
                    if r.sub_unit_target { "sub-unit" } else { "" }
                );
            }
        }
    }
    Ok(())
}

fn parse_perm(text: &str) -> CliResult<Permutation> {
    let seq = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<Vertex>()
                .map_err(|e| reject(format!("permutation entry {t:?}: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Permutation::new(seq)?)
}

fn reduce(ctx: &Ctx, a: ReduceArgs) -> CliResult<()> {
    let h = load_graph(&a.graph)?;
    let params = params_for(&h, a.ell)?;
    let sigma = match &a.perm {
        Some(text) => parse_perm(text)?,
        None => Permutation::random(h.n(), &mut stream_rng(ctx.seed, Stream::Permutation, &[0])),
    };
    let d = build_digraph(&h, &sigma, &params)?;
    let path = ctx.path(&a.output);
    d.write_dump(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))?;
    let partition = check_ownership_partition(&d);
    ctx.write_json(
        "reduce.json",
        &json!({
            "params": params,
            "seed": ctx.seed,
            "sigma": sigma.as_slice(),
            "nu_q": d.nu(),
            "arcs": d.arc_count(),
            "owned_edges": d.owned_edges().count(),
            "ownership_partition": partition,
            "two_q_divides_n": params.two_q_divides_n(),
            "dump": a.output,
        }),
    )?;
    println!(
        "wrote {}: {} vertices, {} arcs",
        path.display(),
        d.nu(),
        d.arc_count()
    );
    if !partition {
        return Err(invalid("owned edge sets are not pairwise disjoint"));
    }
    Ok(())
}

fn procedure1(ctx: &Ctx, a: ProcedureArgs) -> CliResult<()> {
    let h = load_graph(&a.graph)?;
    let params = params_for(&h, a.ell)?;
    let p = a.p.unwrap_or_else(|| edge_density(&h));
    let pp = compute_procedure_params(
        &params,
        p,
        a.eps,
        Overrides {
            kappa: a.kappa,
            r: a.r,
        },
        a.r_budget,
    )?;
    let pcfg = ProcedureConfig {
        memory: if a.low_memory {
            MemoryMode::Low
        } else {
            MemoryMode::Auto
        },
        ..Default::default()
    };
    let out = run_procedure1_with(&h, &params, &pp, ctx.seed, &pcfg)?;
    let check = check_procedure_output(&h, &out);
    let hist = coverage_histogram(&out, &params, p, a.eps);
    if a.dump_filtered {
        for (i, f) in out
            .filtered
            .iter()
            .enumerate()
            .filter(|(_, f)| f.arc_count() > 0)
        {
            let path = ctx.path(&format!("filtered_{i}.dump"));
            f.write_dump(BufWriter::new(
                File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            ))?;
        }
    }
    let packed = out.packed_total();
    ctx.write_json(
        "procedure1.json",
        &json!({
            "params": params,
            "p": p,
            "eps": a.eps,
            "seed": ctx.seed,
            "procedure": out.procedure,
            "low_memory": out.low_memory,
            "accounting": {
                "edges": h.edge_count(),
                "residual": out.residual.edge_count(),
                "filtered_total": packed,
                "filtered_sizes": out.packed_graphs.iter().map(|g| g.len()).collect::<Vec<_>>(),
                "h_sizes": out.h_sizes,
                "uncovered": out.uncovered(),
                "identity_holds": h.edge_count() == out.residual.edge_count() + packed,
            },
            "coverage": hist,
            "filtered_arcs": out.filtered.iter().map(|f| f.arc_count()).collect::<Vec<_>>(),
            "check": check.as_ref().err(),
        }),
    )?;
    println!(
        "r = {}, kappa = {}: {} edges, {} in filtered graphs, {} residual, mean |I_e| = {:.3} (target {:.3})",
        pp.r,
        pp.kappa,
        h.edge_count(),
        packed,
        out.residual.edge_count(),
        hist.mean,
        hist.target
    );
    check.map_err(invalid)
}

fn pack(ctx: &Ctx, a: PackArgs) -> CliResult<()> {
    let f = File::open(&a.dump).with_context(|| format!("opening {}", a.dump.display()))?;
    let d = ShiftDigraph::read_dump(BufReader::new(f))
        .map_err(|e| invalid(format!("{}: {e}", a.dump.display())))?;
    let dg = d.to_digraph();
    let cfg = PackerConfig {
        restart_factor: a.restart_factor,
        rotation_factor: a.rotation_factor,
        fail_budget: a.fail_budget,
        trials: a.trials,
    };
    let packing = pack_hamilton_cycles(&dg, &cfg, ctx.seed);
    validate_packing(&dg, &packing).map_err(invalid)?;
    let lifted = packing
        .cycles
        .iter()
        .map(|c| lift_cycle(&d, c))
        .collect::<Result<Vec<_>>>()?;
    let exact = if a.exact {
        Some(exact_max_packing(&dg)?.cycles.len())
    } else {
        None
    };
    write_cycles(
        &ctx.path("cycles.txt"),
        packing
            .cycles
            .iter()
            .map(|c| c.iter().map(|v| (v + 1).to_string()).collect()),
    )?;
    write_cycles(&ctx.path("typel_cycles.txt"), type_l_lines(&lifted))?;
    ctx.write_json(
        "pack.json",
        &json!({
            "seed": ctx.seed,
            "nu": dg.nu(),
            "nu_even": dg.nu() % 2 == 0,
            "arcs": dg.arc_count(),
            "config": cfg,
            "cycles": packing.cycles.len(),
            "leftover_arcs": packing.leftover_arcs.len(),
            "leftover_fraction": packing.leftover_fraction,
            "attempts": packing.attempts,
            "trials_run": packing.trials_run,
            "exact_cycles": exact,
        }),
    )?;
    println!(
        "{} cycles on {} vertices, leftover fraction {:.4}{}",
        packing.cycles.len(),
        dg.nu(),
        packing.leftover_fraction,
        exact
            .map(|e| format!(", exact optimum {e}"))
            .unwrap_or_default()
    );
    Ok(())
}

#[derive(Serialize)]
struct RoundRow {
    round: usize,
    seed: u64,
    eps_t: f64,
    p_t: f64,
    kappa: f64,
    kappa_mode: String,
    r: usize,
    r_mode: String,
    edges_before: usize,
    filtered_edges: usize,
    cycles: usize,
    cycle_edges: usize,
    lost_edges: usize,
    uncovered: usize,
    unkept: usize,
    residual: usize,
    mean_leftover_fraction: Option<f64>,
    packer_attempts: u64,
}

impl From<&RoundStats> for RoundRow {
    fn from(s: &RoundStats) -> Self {
        let lf = &s.leftover_fractions;
        RoundRow {
            round: s.round,
            seed: s.seed,
            eps_t: s.eps_t,
            p_t: s.p_t,
            kappa: s.kappa,
            kappa_mode: format!("{:?}", s.kappa_mode).to_lowercase(),
            r: s.r,
            r_mode: format!("{:?}", s.r_mode).to_lowercase(),
            edges_before: s.edges_before,
            filtered_edges: s.filtered_edges,
            cycles: s.cycles,
            cycle_edges: s.cycle_edges,
            lost_edges: s.lost_edges,
            uncovered: s.uncovered,
            unkept: s.unkept,
            residual: s.residual,
            mean_leftover_fraction: (!lf.is_empty())
                .then(|| lf.iter().sum::<f64>() / lf.len() as f64),
            packer_attempts: s.packer_attempts,
        }
    }
}

fn peel(ctx: &Ctx, a: PeelArgs) -> CliResult<()> {
    let h = load_graph(&a.graph)?;
    let params = params_for(&h, a.ell)?;
    let p = a.p.unwrap_or_else(|| edge_density(&h));
    let schedule = compute_schedule(&params, p, a.eps)?;
    if let Err(m) = check_schedule(&schedule) {
        return Err(invalid(format!("schedule: {m}")));
    }
    if let Some(d) = &schedule.diagnostic {
        eprintln!("warning: schedule: {d}");
    }
    let cfg = PeelConfig {
        overrides: Overrides {
            kappa: a.kappa,
            r: a.r,
        },
        r_budget: a.r_budget,
        max_rounds: a.max_rounds,
        packer: PackerConfig {
            trials: a.pack_trials,
            fail_budget: a.fail_budget,
            ..Default::default()
        },
        procedure: ProcedureConfig {
            memory: if a.low_memory {
                MemoryMode::Low
            } else {
                MemoryMode::Auto
            },
            ..Default::default()
        },
    };
    let res = run_peeling(&h, &params, &schedule, &cfg, ctx.seed)?;
    let mut notes = vec![
        "kappa and r are recomputed per round from eps_t and p_t unless overridden".to_string(),
        "log is the natural logarithm".to_string(),
        "filtered edges left out of every packed cycle are deleted and counted as lost".to_string(),
    ];
    if a.kappa.is_some() || a.r.is_some() {
        notes.push(format!(
            "overrides applied to every round: kappa = {:?}, r = {:?}",
            a.kappa, a.r
        ));
    }
    if !res.nu_q_even {
        notes.push(format!("nu_q = {} is odd", params.nu_q));
    }
    ctx.write_json(
        "peel.json",
        &json!({
            "graph": { "n": h.n(), "k": h.k(), "edges": h.edge_count() },
            "config": cfg,
            "schedule": {
                "alpha": schedule.alpha,
                "threshold": schedule.threshold,
                "t_stop": schedule.t_stop,
                "steps": schedule.eps_t.len(),
                "saturated": schedule.saturated,
                "diagnostic": schedule.diagnostic,
            },
            "result": res,
            "notes": notes,
        }),
    )?;
    let mut w =
        csv::Writer::from_path(ctx.path("rounds.csv")).map_err(|e| Failure::Io(e.into()))?;
    for s in &res.per_round {
        w.serialize(RoundRow::from(s))
            .map_err(|e| Failure::Io(e.into()))?;
    }
    w.flush()?;
    write_cycles(&ctx.path("cycles.txt"), type_l_lines(&res.cycles))?;
    println!(
        "{} rounds ({}), {} cycles, covered {}/{} edges, uncovered fraction {:.4} (eps^alpha = {:.4})",
        res.rounds_run,
        res.stop_reason,
        res.cycles.len(),
        res.covered_edges,
        res.total_edges,
        res.uncovered_fraction,
        res.eps_alpha
    );
    Ok(())
}

fn lemma_check(ctx: &Ctx, a: LemmaArgs) -> CliResult<()> {
    let target: LemmaTarget = a.target.parse().map_err(|e: String| reject(e))?;
    let cfg = LemmaConfig {
        k: a.k,
        ell: a.ell,
        n: a.n,
        graph: match a.density {
            Some(p) => GraphSpec::Random { p },
            None => GraphSpec::Complete,
        },
        eps: a.eps,
        kappa: a.kappa,
        r: a.r,
        trials: a.trials,
        d: a.d,
        ..Default::default()
    };
    let rep = lemma_montecarlo(target, &cfg, ctx.seed)?;
    ctx.write_json("lemma.json", &rep)?;
    println!(
        "{:?}: mean {:.4} (sd {:.4}, se {:.4}) vs predicted {:.4} in [{:.4}, {:.4}]; {} of {} trials outside",
        rep.target,
        rep.mean,
        rep.sd,
        rep.se,
        rep.predicted,
        rep.predicted_band.0,
        rep.predicted_band.1,
        rep.outside_band,
        rep.samples.len()
    );
    if let (Some(m), Some(l)) = (rep.oracle_mean, &rep.oracle_label) {
        println!("oracle ({l}): {m:.4}");
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
    Ok(())
}

fn verify(ctx: &Ctx, a: VerifyArgs) -> CliResult<()> {
    let h = load_graph(&a.graph)?;
    let params = params_for(&h, a.ell)?;
    let text =
        fs::read_to_string(&a.cycles).with_context(|| format!("reading {}", a.cycles.display()))?;
    let mut cycles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let order = line
            .split_whitespace()
            .map(|t| {
                t.parse::<Vertex>()
                    .map_err(|e| invalid(format!("line {}: {t:?}: {e}", i + 1)))
            })
            .collect::<CliResult<Vec<_>>>()?;
        cycles.push(TypeLCycle::from_vertex_order(order, params.k, params.ell));
    }
    let failures: Vec<String> = cycles
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            validate_type_l_cycle(&h, c, &params)
                .err()
                .map(|v| format!("cycle {i}: clause ({}) {v}", v.clause()))
        })
        .collect();
    let disjoint = check_global_disjointness(&h, &cycles).map_err(|e| e.to_string());
    ctx.write_json(
        "verify.json",
        &json!({
            "cycles": cycles.len(),
            "failures": failures,
            "globally_disjoint": disjoint.is_ok(),
            "disjointness_error": disjoint.as_ref().err(),
        }),
    )?;
    println!(
        "{} cycles, {} invalid, globally disjoint: {}",
        cycles.len(),
        failures.len(),
        disjoint.is_ok()
    );
    if let Some(f) = failures.first() {
        return Err(invalid(f.clone()));
    }
    disjoint.map_err(invalid)
}
