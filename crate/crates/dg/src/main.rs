//! Command line front end for the delay game toolkit.
//!
//! The `synth` subcommand runs the whole pipeline from an automaton file to
//! a verified strategy machine; the remaining subcommands expose the
//! individual stages so artifacts can be generated, reduced, solved,
//! converted, verified, simulated and rendered separately. All artifacts
//! are plain text and flow through stdin/stdout when no file is given, so
//! stages compose with pipes.
//!
//! Exit codes: 0 on success, 1 when a checked property fails (Player I
//! wins, verification finds a counterexample, strategies differ), 2 on
//! usage errors including exhausted budgets, 3 on malformed input files.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dg_core::automata::{
    gen_family, normalize_to_parity, parse_oaut, write_oaut, Acceptance, FamilySpec,
    NormalizeError, OmegaAutomaton,
};
use dg_core::engine::{
    adversarial_input, minimal_blocksize, render_block_lasso, render_trace, simulate,
    strategies_equivalent, verify_block_strategy, EngineError, InputStrategy, Trace,
};
use dg_core::games::{
    build_block_arena, build_reduced_game, game_dot, parse_pg, write_pg, zielonka_solve,
    GameError, ParityGame, Player, ReducedGameMeta, Solution,
};
use dg_core::monitor::{
    monitored_product, muller_monitor, parity_monitor, AggregatedCondition, MonitoredProduct,
};
use dg_core::strategy::{
    block_dot, block_positional_to_transducer, explicit_to_succinct,
    minimize_block_transducer, parse_sst, positional_to_mealy, reduced_to_block,
    reduced_to_succinct, succinct_dot, succinct_to_explicit, write_sst, write_sst_explicit,
    ExplicitBlockTransducer, SstMachine, StrategyError, SuccinctTransducer,
};
use dg_core::summary::{
    build_summary_automaton, effective_blocksize, infinite_class_threshold, infinite_classes,
    EqClass, SummaryAutomaton,
};

const DEFAULT_BUDGET: usize = 5_000_000;

#[derive(Parser)]
#[command(
    name = "dg",
    version,
    about = "Synthesize and inspect blockwise strategies for omega-regular conditions with lookahead"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Size budget for exponential constructions (vertices and table
    /// entries); DG_BUDGET sets the same limit, the flag wins.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Seed for every randomized choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only print results and errors, no stage report.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print one JSON object carrying the same numbers as the text report.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Explicit,
    Succinct,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a stock automaton family member as an .oaut file.
    Gen {
        /// One of: copy, badjpair, badjpairvec, reversal.
        family: String,
        /// Family parameter: symbol count, index bound, or prefix length.
        n: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the whole pipeline: reduce, solve, lower to a strategy machine,
    /// verify it, and write the result.
    Synth {
        /// Automaton file (.oaut); stdin when omitted.
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        /// Block size; defaults to the effective blocksize d_eff.
        #[arg(short = 'd', long = "blocksize")]
        d: Option<usize>,
        /// Output machine shape.
        #[arg(long, value_enum, default_value_t = Format::Explicit)]
        format: Format,
        /// Shorthand for --format succinct.
        #[arg(long)]
        succinct: bool,
        /// Strategy file to write; without it only the report is printed.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Skip the model check of the synthesized machine.
        #[arg(long)]
        no_verify: bool,
    },
    /// Print the effective blocksize and the worst-case bound.
    Bound {
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
    },
    /// Reduce an automaton to its summary-class parity game (.pg).
    Reduce {
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve a parity game file and print winner and regions.
    Solve {
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
    },
    /// Convert a strategy machine between explicit and succinct shape.
    Convert {
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        to: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Model-check a strategy machine against an automaton.
    Verify {
        /// Automaton file (.oaut); stdin when omitted.
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        /// Strategy machine file (.sst).
        #[arg(short = 's', long)]
        strategy: PathBuf,
        /// Block size; defaults to the machine's own.
        #[arg(short = 'd', long = "blocksize")]
        d: Option<usize>,
    },
    /// Play rounds of the game and print the resulting trace.
    Simulate {
        /// Automaton file (.oaut); stdin when omitted.
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        /// Strategy machine file (.sst).
        #[arg(short = 's', long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = 20)]
        rounds: usize,
        /// Input discipline: random, script:<file>, or adversarial.
        #[arg(long = "input", default_value = "random")]
        mode: String,
    },
    /// Check two strategy machines for behavioral equivalence.
    Equiv {
        #[arg(short = 'a')]
        a: PathBuf,
        #[arg(short = 'b')]
        b: PathBuf,
        /// Block size; defaults to the machines' own.
        #[arg(short = 'd', long = "blocksize")]
        d: Option<usize>,
        /// Number of announced blocks per probe.
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Search the smallest winning blocksize up to a limit.
    Minblock {
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        max: usize,
    },
    /// Render any artifact (.oaut, .pg, .sst) as Graphviz dot.
    Dot {
        #[arg(short = 'i', long = "in")]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// A failed run: the exit code bucket plus the message for stderr.
enum Failure {
    /// Exit 1: a checked property does not hold.
    Property(String),
    /// Exit 2: bad invocation, unusable files, exhausted budgets.
    Usage(String),
    /// Exit 3: an input file that does not parse.
    Parse(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Property(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Parse(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Property(m) | Failure::Usage(m) | Failure::Parse(m) => m,
        }
    }
}

fn game_failure(e: GameError) -> Failure {
    Failure::Usage(e.to_string())
}

fn strategy_failure(e: StrategyError) -> Failure {
    Failure::Usage(e.to_string())
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::NotWinningForI => Failure::Property(e.to_string()),
        other => Failure::Usage(other.to_string()),
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String, Failure> {
    match path {
        Some(p) if p.as_os_str() != "-" => fs::read_to_string(p)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display()))),
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Failure::Usage(format!("cannot read stdin: {e}")))?;
            Ok(buf)
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_automaton(text: &str) -> Result<OmegaAutomaton, Failure> {
    parse_oaut(text).map_err(|e| Failure::Parse(e.to_string()))
}

fn parse_machine(path: &PathBuf) -> Result<SstMachine, Failure> {
    parse_sst(&read_file(path)?).map_err(|e| Failure::Parse(e.to_string()))
}

/// Collects the report as text lines and a JSON object at the same time, so
/// both views print the same numbers by construction.
struct Report {
    lines: Vec<String>,
    json: serde_json::Map<String, serde_json::Value>,
    quiet: bool,
    as_json: bool,
}

impl Report {
    fn new(quiet: bool, as_json: bool) -> Report {
        Report { lines: Vec::new(), json: serde_json::Map::new(), quiet, as_json }
    }

    /// A report line plus its JSON fields. Essential lines survive --quiet.
    fn put(&mut self, essential: bool, line: String, fields: serde_json::Value) {
        if essential || !self.quiet {
            self.lines.push(line);
        }
        if let serde_json::Value::Object(map) = fields {
            for (k, v) in map {
                self.json.insert(k, v);
            }
        }
    }

    fn finish(mut self, timings: &[(&'static str, f64)]) {
        if !timings.is_empty() {
            let total: f64 = timings.iter().map(|(_, ms)| ms).sum();
            let parts = timings
                .iter()
                .map(|(name, ms)| format!("{name}={ms:.1}ms"))
                .collect::<Vec<_>>()
                .join(" ");
            if !self.quiet {
                self.lines.push(format!("timing: {parts} total={total:.1}ms"));
            }
            let mut tmap = serde_json::Map::new();
            for (name, ms) in timings {
                tmap.insert(name.to_string(), json!(ms));
            }
            tmap.insert("total".into(), json!(total));
            self.json.insert("timing_ms".into(), serde_json::Value::Object(tmap));
        }
        if self.as_json {
            println!("{}", serde_json::Value::Object(self.json));
        } else {
            for line in &self.lines {
                println!("{line}");
            }
        }
    }
}

/// Per-stage wall clock times feeding the report.
struct Timings(Vec<(&'static str, f64)>);

impl Timings {
    fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((name, start.elapsed().as_secs_f64() * 1e3));
        out
    }
}

fn winner_str(p: Player) -> &'static str {
    match p {
        Player::I => "I",
        Player::O => "O",
    }
}

fn bound_text(log2: u64) -> String {
    if log2 <= 63 {
        format!("2^{log2} = {}", 1u64 << log2)
    } else {
        format!("2^{log2}")
    }
}

fn bound_json(log2: u64) -> serde_json::Value {
    if log2 <= 63 {
        json!({ "bound_log2": log2, "bound": 1u64 << log2 })
    } else {
        json!({ "bound_log2": log2 })
    }
}

/// The pipeline up to the summary automaton and its block classes. The
/// automaton kept here is the judged one: parity-normalized and pruned,
/// except under a Muller condition, which is monitored as given.
struct Front {
    states: usize,
    acceptance: &'static str,
    product: MonitoredProduct,
    cond: AggregatedCondition,
    sa: SummaryAutomaton,
    classes: Vec<EqClass>,
    d_eff: usize,
    threshold: usize,
    bound_log2: u64,
}

fn run_front(a: &OmegaAutomaton, t: &mut Timings) -> Result<Front, Failure> {
    let states = a.n_states();
    let acceptance = a.acceptance.kind();
    let (judged, monitored) = if matches!(a.acceptance, Acceptance::Muller { .. }) {
        let judged = t.time("normalize", || a.pruned_to_reachable());
        let m = t.time("monitor", || muller_monitor(&judged));
        (judged, m)
    } else {
        let judged = t.time("normalize", || {
            normalize_to_parity(a).map(|n| n.pruned_to_reachable())
        });
        let judged = judged.map_err(|e: NormalizeError| Failure::Usage(e.to_string()))?;
        let m = t.time("monitor", || parity_monitor(&judged));
        (judged, m)
    };
    let (monitor, cond) = monitored.map_err(|e| Failure::Usage(e.to_string()))?;
    let product = t.time("product", || monitored_product(&judged, &monitor));
    let sa = t.time("summaries", || build_summary_automaton(&product));
    let classes = t.time("classes", || infinite_classes(&sa));
    let d_eff = effective_blocksize(&sa);
    let threshold = infinite_class_threshold(&sa);
    let bound_log2 = worst_case(&sa);
    Ok(Front {
        states,
        acceptance,
        product,
        cond,
        sa,
        classes,
        d_eff,
        threshold,
        bound_log2,
    })
}

fn worst_case(sa: &SummaryAutomaton) -> u64 {
    dg_core::summary::worst_case_blocksize_log2(sa)
}

fn report_front(rep: &mut Report, f: &Front) {
    rep.put(
        false,
        format!("automaton: states={} acceptance={}", f.states, f.acceptance),
        json!({ "states": f.states, "acceptance": f.acceptance }),
    );
    rep.put(
        false,
        format!("monitor: memory={}", f.product.monitor.memory_size_with_bottom()),
        json!({ "memory": f.product.monitor.memory_size_with_bottom() }),
    );
    rep.put(
        false,
        format!(
            "summaries: count={} classes={} d_eff={} certified_from={}",
            f.sa.summaries.len(),
            f.classes.len(),
            f.d_eff,
            f.threshold
        ),
        json!({
            "summaries": f.sa.summaries.len(),
            "classes": f.classes.len(),
            "d_eff": f.d_eff,
            "certified_from": f.threshold,
        }),
    );
    rep.put(
        false,
        format!("worst-case bound: {}", bound_text(f.bound_log2)),
        bound_json(f.bound_log2),
    );
}

fn run_reduced(
    f: &Front,
    t: &mut Timings,
) -> (ParityGame, ReducedGameMeta, Solution) {
    let (game, meta) =
        t.time("reduce", || build_reduced_game(&f.product, &f.cond, &f.classes));
    let sol = t.time("solve", || zielonka_solve(&game));
    (game, meta, sol)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dg: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn resolve_budget(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var("DG_BUDGET") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| Failure::Usage(format!("DG_BUDGET is not a number: {v}"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn write_artifact(
    path: &Option<PathBuf>,
    as_json: bool,
    text: &str,
) -> Result<Option<String>, Failure> {
    match path {
        Some(p) => {
            fs::write(p, text)
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
            Ok(Some(p.display().to_string()))
        }
        None if as_json => Err(Failure::Usage(
            "--json claims stdout, write the artifact with -o".into(),
        )),
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let budget = resolve_budget(cli.budget)?;
    match cli.cmd {
        Cmd::Gen { family, n, output } => cmd_gen(&family, n, &output, cli.json),
        Cmd::Synth { input, d, format, succinct, output, no_verify } => {
            let format = if succinct { Format::Succinct } else { format };
            cmd_synth(&input, d, format, &output, !no_verify, budget, cli.quiet, cli.json)
        }
        Cmd::Bound { input } => cmd_bound(&input, cli.quiet, cli.json),
        Cmd::Reduce { input, output } => {
            cmd_reduce(&input, &output, cli.quiet, cli.json)
        }
        Cmd::Solve { input } => cmd_solve(&input, cli.quiet, cli.json),
        Cmd::Convert { input, to, output } => {
            cmd_convert(&input, to, &output, budget, cli.quiet, cli.json)
        }
        Cmd::Verify { input, strategy, d } => {
            cmd_verify(&input, &strategy, d, budget, cli.quiet, cli.json)
        }
        Cmd::Simulate { input, strategy, rounds, mode } => {
            cmd_simulate(&input, &strategy, rounds, &mode, cli.seed, budget, cli.quiet, cli.json)
        }
        Cmd::Equiv { a, b, d, depth } => {
            cmd_equiv(&a, &b, d, depth, budget, cli.seed, cli.quiet, cli.json)
        }
        Cmd::Minblock { input, max } => cmd_minblock(&input, max, budget, cli.json),
        Cmd::Dot { input, output } => cmd_dot(&input, &output, cli.json),
    }
}

fn cmd_gen(
    family: &str,
    n: u32,
    output: &Option<PathBuf>,
    as_json: bool,
) -> Result<(), Failure> {
    let spec = match family {
        "copy" => FamilySpec::Copy { symbols: (0..n).map(|i| i.to_string()).collect() },
        "badjpair" => FamilySpec::BadJPair { n },
        "badjpairvec" => FamilySpec::BadJPairVec { n },
        "reversal" => FamilySpec::Reversal { k: n },
        other => {
            return Err(Failure::Usage(format!(
                "unknown family '{other}' (known: copy, badjpair, badjpairvec, reversal)"
            )))
        }
    };
    let a = gen_family(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let written = write_artifact(output, as_json, &write_oaut(&a))?;
    if as_json {
        println!(
            "{}",
            json!({ "family": family, "n": n, "states": a.n_states(), "output": written })
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    input: &Option<PathBuf>,
    d_flag: Option<usize>,
    format: Format,
    output: &Option<PathBuf>,
    verify: bool,
    budget: usize,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let a = parse_automaton(&read_input(input)?)?;
    let mut t = Timings(Vec::new());
    let front = run_front(&a, &mut t)?;
    let (game, meta, sol) = run_reduced(&front, &mut t);
    let winner = sol.winner_at(game.arena.initial());
    let d = match d_flag {
        Some(0) => return Err(Failure::Usage("the blocksize must be positive".into())),
        Some(d) => d,
        None => front.d_eff,
    };

    let mut rep = Report::new(quiet, as_json);
    report_front(&mut rep, &front);
    rep.put(
        false,
        format!("reduced game: vertices={} winner={}", game.arena.n_vertices(), winner_str(winner)),
        json!({ "game_vertices": game.arena.n_vertices(), "winner": winner_str(winner) }),
    );

    if winner == Player::I {
        rep.finish(&t.0);
        return Err(Failure::Property(
            "winner is Player I: no blocksize admits a winning output strategy".into(),
        ));
    }

    // Strategies for block sizes below the certified threshold cannot come
    // from the reduced game; solve the block arena of that size directly.
    enum Machine {
        Explicit(ExplicitBlockTransducer),
        Succinct(SuccinctTransducer),
    }
    let route;
    let machine = if d >= front.threshold {
        route = "summary";
        let mealy =
            positional_to_mealy(&game, &sol, &meta).map_err(strategy_failure)?;
        match format {
            Format::Succinct => {
                let m = t.time("lower", || {
                    reduced_to_succinct(&mealy, &front.product, &front.sa, d)
                });
                Machine::Succinct(m.map_err(strategy_failure)?)
            }
            Format::Explicit => {
                let m = t.time("lower", || {
                    reduced_to_block(&mealy, &front.product, &front.sa, d)
                });
                Machine::Explicit(m.map_err(strategy_failure)?)
            }
        }
    } else {
        route = "block-arena";
        let norm = normalize_to_parity(&a).map_err(|_| {
            Failure::Usage(format!(
                "blocksize {d} is below the certified minimum {} and a Muller \
                 condition rules out the direct block game",
                front.threshold
            ))
        })?;
        let (bgame, bmeta) =
            t.time("arena", || build_block_arena(&norm, d, budget)).map_err(game_failure)?;
        let bsol = t.time("solve-arena", || zielonka_solve(&bgame));
        let bwinner = bsol.winner_at(bgame.arena.initial());
        rep.put(
            false,
            format!(
                "block arena: vertices={} winner={}",
                bgame.arena.n_vertices(),
                winner_str(bwinner)
            ),
            json!({ "arena_vertices": bgame.arena.n_vertices(), "arena_winner": winner_str(bwinner) }),
        );
        if bwinner == Player::I {
            rep.finish(&t.0);
            return Err(Failure::Property(format!(
                "winner at blocksize {d} is Player I; the smallest winning \
                 blocksize can be found with `dg minblock`"
            )));
        }
        let m = t.time("lower", || {
            let full =
                block_positional_to_transducer(&a.alphabet, &bgame, &bsol, &bmeta, budget)?;
            minimize_block_transducer(&full, budget)
        });
        let m = m.map_err(strategy_failure)?;
        match format {
            Format::Succinct => Machine::Succinct(
                t.time("tabulate", || explicit_to_succinct(&m, budget))
                    .map_err(strategy_failure)?,
            ),
            Format::Explicit => Machine::Explicit(m),
        }
    };

    // Materialize explicit tables up front so the dump is total; on budget
    // overflow keep the lazily filled part and say so.
    let mut partial = false;
    if let Machine::Explicit(m) = &machine {
        match t.time("fill", || m.materialize_all(budget)) {
            Ok(()) => {}
            Err(StrategyError::Budget { .. }) => partial = true,
            Err(e) => return Err(strategy_failure(e)),
        }
    }

    let (fmt_name, masters, delta, lambda) = match &machine {
        Machine::Succinct(m) => {
            ("succinct", m.n_masters(), m.delta_size(), m.lambda_size())
        }
        Machine::Explicit(m) => {
            let (dtab, ltab) = m.snapshot_tables();
            ("explicit", m.n_masters(), dtab.len(), ltab.len())
        }
    };
    rep.put(
        false,
        format!(
            "strategy: d={d} format={fmt_name} route={route} masters={masters} \
             delta={delta} lambda={lambda}{}",
            if partial { " (partial: table exceeds budget)" } else { "" }
        ),
        json!({
            "d": d,
            "format": fmt_name,
            "route": route,
            "masters": masters,
            "delta": delta,
            "lambda": lambda,
            "partial": partial,
        }),
    );

    if verify {
        let lowered;
        let view = match &machine {
            Machine::Succinct(m) => {
                lowered = succinct_to_explicit(m, d);
                &lowered
            }
            Machine::Explicit(m) => m,
        };
        match t.time("verify", || verify_block_strategy(&a, view, d, budget)) {
            Ok(v) if v.winning => {
                rep.put(true, "verified: winning".into(), json!({ "verified": "winning" }));
            }
            Ok(v) => {
                let ce = v.counterexample.expect("losing verdicts carry a witness");
                rep.put(
                    true,
                    format!(
                        "verified: losing, counterexample {}",
                        render_block_lasso(&a.alphabet.inputs, &ce)
                    ),
                    json!({ "verified": "losing" }),
                );
                rep.finish(&t.0);
                return Err(Failure::Property(
                    "the synthesized machine fails its own model check".into(),
                ));
            }
            Err(EngineError::Game(GameError::BudgetExceeded { .. })) => {
                rep.put(
                    true,
                    "verified: skipped (budget)".into(),
                    json!({ "verified": "skipped (budget)" }),
                );
            }
            Err(e) => return Err(engine_failure(e)),
        }
    } else {
        rep.put(false, "verified: off".into(), json!({ "verified": "off" }));
    }

    let text = match &machine {
        Machine::Succinct(m) => write_sst(m),
        Machine::Explicit(m) => write_sst_explicit(m),
    };
    let written = match output {
        Some(p) => {
            fs::write(p, &text)
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
            Some(p.display().to_string())
        }
        None => None,
    };
    rep.put(
        false,
        format!("output: {}", written.as_deref().unwrap_or("(not written, no -o)")),
        json!({ "output": written }),
    );
    rep.finish(&t.0);
    Ok(())
}

fn cmd_bound(
    input: &Option<PathBuf>,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let a = parse_automaton(&read_input(input)?)?;
    let mut t = Timings(Vec::new());
    let front = run_front(&a, &mut t)?;
    let mut rep = Report::new(quiet, as_json);
    rep.put(true, format!("d_eff={}", front.d_eff), json!({ "d_eff": front.d_eff }));
    rep.put(
        true,
        format!("worst-case bound: {}", bound_text(front.bound_log2)),
        bound_json(front.bound_log2),
    );
    rep.finish(&t.0);
    Ok(())
}

fn cmd_reduce(
    input: &Option<PathBuf>,
    output: &Option<PathBuf>,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let a = parse_automaton(&read_input(input)?)?;
    let mut t = Timings(Vec::new());
    let front = run_front(&a, &mut t)?;
    let (game, _meta) =
        t.time("reduce", || build_reduced_game(&front.product, &front.cond, &front.classes));
    let mut rep = Report::new(quiet, as_json);
    report_front(&mut rep, &front);
    rep.put(
        false,
        format!("reduced game: vertices={}", game.arena.n_vertices()),
        json!({ "game_vertices": game.arena.n_vertices() }),
    );
    let written = write_artifact(output, as_json, &write_pg(&game))?;
    rep.put(false, format!("output: {}", written.as_deref().unwrap_or("-")), json!({ "output": written }));
    if output.is_some() || as_json {
        rep.finish(&t.0);
    }
    Ok(())
}

fn cmd_solve(input: &Option<PathBuf>, quiet: bool, as_json: bool) -> Result<(), Failure> {
    let game = parse_pg(&read_input(input)?).map_err(|e| Failure::Parse(e.to_string()))?;
    let mut t = Timings(Vec::new());
    let sol = t.time("solve", || zielonka_solve(&game));
    let winner = sol.winner_at(game.arena.initial());
    let mut rep = Report::new(quiet, as_json);
    rep.put(true, format!("winner={}", winner_str(winner)), json!({ "winner": winner_str(winner) }));
    for p in [Player::O, Player::I] {
        let region = sol.region(p);
        let listed = if region.len() <= 200 {
            format!(
                ": {}",
                region.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
            )
        } else {
            String::new()
        };
        rep.put(
            false,
            format!("region {} ({}){}", winner_str(p), region.len(), listed),
            json!({ format!("region_{}", winner_str(p)): region }),
        );
    }
    rep.finish(&t.0);
    if winner == Player::I {
        return Err(Failure::Property("winner is Player I".into()));
    }
    Ok(())
}

fn cmd_convert(
    input: &Option<PathBuf>,
    to: Format,
    output: &Option<PathBuf>,
    budget: usize,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let text = read_input(input)?;
    let machine = parse_sst(&text).map_err(|e| Failure::Parse(e.to_string()))?;
    let (out_text, d, masters, from) = match (machine, to) {
        (SstMachine::Succinct(m), Format::Explicit) => {
            let e = succinct_to_explicit(&m, m.d);
            e.materialize_all(budget).map_err(strategy_failure)?;
            (write_sst_explicit(&e), m.d, e.n_masters(), "succinct")
        }
        (SstMachine::Explicit(m), Format::Succinct) => {
            let s = explicit_to_succinct(&m, budget).map_err(|e| match e {
                // A partial table cannot be tabulated; the file lacks rows.
                StrategyError::TableMiss => Failure::Parse(
                    "the explicit table is partial, cannot tabulate a succinct machine".into(),
                ),
                other => strategy_failure(other),
            })?;
            (write_sst(&s), m.d, s.n_masters(), "explicit")
        }
        (SstMachine::Succinct(m), Format::Succinct) => {
            (write_sst(&m), m.d, m.n_masters(), "succinct")
        }
        (SstMachine::Explicit(m), Format::Explicit) => {
            (write_sst_explicit(&m), m.d, m.n_masters(), "explicit")
        }
    };
    let to_name = match to {
        Format::Explicit => "explicit",
        Format::Succinct => "succinct",
    };
    let written = write_artifact(output, as_json, &out_text)?;
    let mut rep = Report::new(quiet, as_json);
    rep.put(
        false,
        format!("convert: {from}->{to_name} d={d} masters={masters}"),
        json!({ "from": from, "to": to_name, "d": d, "masters": masters, "output": written }),
    );
    if output.is_some() || as_json {
        rep.finish(&[]);
    }
    Ok(())
}

/// An explicit view of a parsed machine at block size `d`.
fn explicit_view(
    machine: SstMachine,
    d_flag: Option<usize>,
) -> Result<(ExplicitBlockTransducer, usize), Failure> {
    match machine {
        SstMachine::Explicit(m) => {
            let d = d_flag.unwrap_or(m.d);
            if d != m.d {
                return Err(Failure::Usage(format!(
                    "the machine plays blocks of {} letters, not {d}",
                    m.d
                )));
            }
            Ok((m, d))
        }
        SstMachine::Succinct(m) => {
            let d = d_flag.unwrap_or(m.d);
            if d != m.d {
                return Err(Failure::Usage(format!(
                    "the machine plays blocks of {} letters, not {d}",
                    m.d
                )));
            }
            Ok((succinct_to_explicit(&m, d), d))
        }
    }
}

fn cmd_verify(
    input: &Option<PathBuf>,
    strategy: &PathBuf,
    d_flag: Option<usize>,
    budget: usize,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let a = parse_automaton(&read_input(input)?)?;
    let (view, d) = explicit_view(parse_machine(strategy)?, d_flag)?;
    let mut t = Timings(Vec::new());
    let verdict = t
        .time("verify", || verify_block_strategy(&a, &view, d, budget))
        .map_err(engine_failure)?;
    let mut rep = Report::new(quiet, as_json);
    if verdict.winning {
        rep.put(true, format!("verified: winning d={d}"), json!({ "verified": "winning", "d": d }));
        rep.finish(&t.0);
        Ok(())
    } else {
        let ce = verdict.counterexample.expect("losing verdicts carry a witness");
        let rendered = render_block_lasso(&a.alphabet.inputs, &ce);
        rep.put(
            true,
            format!("verified: losing d={d} counterexample {rendered}"),
            json!({ "verified": "losing", "d": d, "counterexample": rendered }),
        );
        rep.finish(&t.0);
        Err(Failure::Property("the strategy loses; counterexample above".into()))
    }
}

fn parse_script(
    path: &str,
    a: &OmegaAutomaton,
    d: usize,
) -> Result<Vec<Vec<usize>>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
    let mut blocks = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut block = Vec::new();
        for token in line.split([' ', ',']).filter(|s| !s.is_empty()) {
            let Some(idx) = a.alphabet.inputs.iter().position(|n| n == token) else {
                return Err(Failure::Parse(format!(
                    "script line {}: unknown input letter '{token}'",
                    no + 1
                )));
            };
            block.push(idx);
        }
        if block.len() != d {
            return Err(Failure::Parse(format!(
                "script line {}: a block needs {d} letters, found {}",
                no + 1,
                block.len()
            )));
        }
        blocks.push(block);
    }
    if blocks.is_empty() {
        return Err(Failure::Parse("the script contains no blocks".into()));
    }
    Ok(blocks)
}

fn trace_json(a: &OmegaAutomaton, trace: &Trace) -> serde_json::Value {
    let names = |letters: &[usize], table: &[String]| {
        letters.iter().map(|&x| table[x].clone()).collect::<Vec<_>>()
    };
    json!({
        "rounds": trace
            .rounds
            .iter()
            .map(|r| {
                json!({
                    "round": r.round,
                    "in": names(&r.input, &a.alphabet.inputs),
                    "out": names(&r.output, &a.alphabet.outputs),
                    "state": a.state_names[r.state],
                    "agg": r.aggregate,
                })
            })
            .collect::<Vec<_>>(),
        "verdict": trace.verdict.to_string(),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    input: &Option<PathBuf>,
    strategy: &PathBuf,
    rounds: usize,
    mode: &str,
    seed: u64,
    budget: usize,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    if rounds == 0 {
        return Err(Failure::Usage("a simulation needs at least one round".into()));
    }
    let a = parse_automaton(&read_input(input)?)?;
    let (view, d) = explicit_view(parse_machine(strategy)?, None)?;
    let discipline = if mode == "random" {
        InputStrategy::Random { seed }
    } else if let Some(path) = mode.strip_prefix("script:") {
        InputStrategy::Scripted { blocks: parse_script(path, &a, d)? }
    } else if mode == "adversarial" {
        adversarial_input(&a, d, budget).map_err(|e| match e {
            EngineError::NotWinningForI => Failure::Property(e.to_string()),
            other => engine_failure(other),
        })?
    } else {
        return Err(Failure::Usage(format!(
            "unknown input discipline '{mode}' (random, script:<file>, adversarial)"
        )));
    };
    let trace = simulate(&a, &view, &discipline, rounds, seed).map_err(engine_failure)?;
    if as_json {
        println!("{}", trace_json(&a, &trace));
    } else if quiet {
        println!("verdict={}", trace.verdict);
    } else {
        print!("{}", render_trace(&a, &trace));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_equiv(
    a_path: &PathBuf,
    b_path: &PathBuf,
    d_flag: Option<usize>,
    depth: usize,
    budget: usize,
    seed: u64,
    quiet: bool,
    as_json: bool,
) -> Result<(), Failure> {
    if depth < 2 {
        return Err(Failure::Usage("equivalence probes need depth at least 2".into()));
    }
    let (left, d) = explicit_view(parse_machine(a_path)?, d_flag)?;
    let (right, d2) = explicit_view(parse_machine(b_path)?, Some(d))?;
    debug_assert_eq!(d, d2);
    if left.n_inputs() != right.n_inputs() || left.n_outputs() != right.n_outputs() {
        return Err(Failure::Usage("the machines use different alphabets".into()));
    }
    let exhaustive = (left.n_inputs() as u128)
        .checked_pow((d * depth) as u32)
        .map(|p| p <= budget as u128)
        .unwrap_or(false);
    let method = if exhaustive { "exhaustive" } else { "sampled" };
    let mut rep = Report::new(quiet, as_json);
    match strategies_equivalent(&left, &right, depth, budget, seed)
        .map_err(engine_failure)?
    {
        None => {
            rep.put(
                true,
                format!("equivalent: yes depth={depth} method={method}"),
                json!({ "equivalent": true, "depth": depth, "method": method }),
            );
            rep.finish(&[]);
            Ok(())
        }
        Some(ce) => {
            let blocks = ce
                .inputs
                .iter()
                .map(|b| {
                    b.iter()
                        .map(|&x| left.input_names[x].as_str())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(";");
            let render_out = |b: &[usize]| {
                b.iter().map(|&x| left.output_names[x].as_str()).collect::<Vec<_>>().join(",")
            };
            rep.put(
                true,
                format!(
                    "equivalent: no inputs={blocks} round={} left={} right={}",
                    ce.round,
                    render_out(&ce.left),
                    render_out(&ce.right)
                ),
                json!({
                    "equivalent": false,
                    "inputs": blocks,
                    "round": ce.round,
                    "left": render_out(&ce.left),
                    "right": render_out(&ce.right),
                    "method": method,
                }),
            );
            rep.finish(&[]);
            Err(Failure::Property("the machines emit different blocks".into()))
        }
    }
}

fn cmd_minblock(
    input: &Option<PathBuf>,
    max: usize,
    budget: usize,
    as_json: bool,
) -> Result<(), Failure> {
    if max == 0 {
        return Err(Failure::Usage("--max must be positive".into()));
    }
    let a = parse_automaton(&read_input(input)?)?;
    match minimal_blocksize(&a, max, budget).map_err(engine_failure)? {
        Some(d) => {
            if as_json {
                println!("{}", json!({ "d_min": d, "max": max }));
            } else {
                println!("d_min={d}");
            }
            Ok(())
        }
        None => {
            if as_json {
                println!("{}", json!({ "d_min": null, "max": max }));
            } else {
                println!("d_min=none (search stopped at {max})");
            }
            Err(Failure::Property(format!("no winning blocksize up to {max}")))
        }
    }
}

fn cmd_dot(
    input: &Option<PathBuf>,
    output: &Option<PathBuf>,
    as_json: bool,
) -> Result<(), Failure> {
    let text = read_input(input)?;
    let dot = if let Ok(a) = parse_oaut(&text) {
        a.to_dot()
    } else if let Ok(g) = parse_pg(&text) {
        game_dot(&g)
    } else {
        match parse_sst(&text) {
            Ok(SstMachine::Succinct(m)) => succinct_dot(&m),
            Ok(SstMachine::Explicit(m)) => block_dot(&m),
            Err(_) => {
                return Err(Failure::Parse(
                    "the input parses as none of .oaut, .pg, .sst".into(),
                ))
            }
        }
    };
    let written = write_artifact(output, as_json, &dot)?;
    if as_json {
        println!("{}", json!({ "output": written }));
    }
    Ok(())
}
