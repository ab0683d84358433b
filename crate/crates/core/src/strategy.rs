//! Strategy machines and the conversions between them.
//!
//! A winning strategy for the output player exists in several shapes along
//! the pipeline. The solver hands back a positional strategy on the reduced
//! game; folding it over the Player-I vertices gives a Mealy machine whose
//! input letters are block classes. From there the strategy can be lowered
//! to machines that read concrete letters: an *explicit block transducer*
//! consuming one input block per round, a *succinct transducer* that splits
//! the same work into a master automaton plus two slave automata reading the
//! blocks letter by letter, and a plain Mealy machine playing the original
//! lookahead game letter by letter. The point of the succinct shape is that
//! its slaves can be exponentially smaller than any explicit table.
//!
//! Block transducers keep their transition and output functions as memoized
//! procedures rather than eager tables: the block domain grows as
//! `|inputs|^d` and almost all of it is never queried.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use thiserror::Error;

use crate::automata::ProductAlphabet;
use crate::games::{
    BlockArenaMeta, BlockVertex, ParityGame, Player, ReducedGameMeta, ReducedVertex, Solution,
};
use crate::monitor::{MemoryElem, MonitoredProduct};
use crate::summary::{
    find_completion, infinite_class_threshold, infinite_classes, SummaryAutomaton,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("Player O does not win from the initial vertex")]
    NotWinning,
    #[error("block size {d} is below the certified minimum {required}")]
    BlockTooShort { d: usize, required: usize },
    #[error("output slave emitted {got} letters for a block pair, needs exactly {expected}")]
    MalformedOutputSlave { expected: usize, got: usize },
    #[error("the strategy asked for a pair its block summary does not allow")]
    IllegalMove,
    #[error("no materialized table entry for the queried block")]
    TableMiss,
    #[error("{0}")]
    BadParameter(String),
    #[error("delay strategy returned {got} outputs for a prefix that determines {expected}")]
    IllFormedDelayStrategy { expected: usize, got: usize },
    #[error("materializing would need {required} table entries, budget is {budget}")]
    Budget { required: u128, budget: usize },
}

// ---------------------------------------------------------------------------
// Mealy machines.
// ---------------------------------------------------------------------------

/// A deterministic machine emitting one output symbol per transition. Inputs
/// and outputs are abstract symbol indices: the reduced-game strategy uses
/// class indices and monitored pairs, the lowered letter-level strategies use
/// plain alphabet letters.
#[derive(Debug, Clone)]
pub struct MealyStrategy {
    pub state_names: Vec<String>,
    pub initial: usize,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    /// `transition[s][i]` is the successor state on input symbol `i`.
    pub transition: Vec<Vec<usize>>,
    /// `output[s][i]` is the output symbol emitted on that transition.
    pub output: Vec<Vec<usize>>,
    /// When output symbols denote monitored pairs, their decoding; consumed
    /// by the block lowerings.
    pub output_pairs: Option<Vec<(usize, MemoryElem)>>,
}

impl MealyStrategy {
    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn step(&self, s: usize, input: usize) -> (usize, usize) {
        (self.transition[s][input], self.output[s][input])
    }
}

/// The same machine shape with the output attached to the reached state
/// instead of the transition. The initial state carries a dummy output that
/// no run consumes.
#[derive(Debug, Clone)]
pub struct StateOutputMachine {
    pub state_names: Vec<String>,
    pub initial: usize,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub transition: Vec<Vec<usize>>,
    pub output: Vec<usize>,
}

/// Fold the state outputs onto the transitions entering each state.
pub fn state_output_to_mealy(m: &StateOutputMachine) -> MealyStrategy {
    let output = m
        .transition
        .iter()
        .map(|row| row.iter().map(|&t| m.output[t]).collect())
        .collect();
    MealyStrategy {
        state_names: m.state_names.clone(),
        initial: m.initial,
        input_names: m.input_names.clone(),
        output_names: m.output_names.clone(),
        transition: m.transition.clone(),
        output,
        output_pairs: None,
    }
}

/// Split each state by the output of its incoming transition. Only the pairs
/// that actually occur are materialised, so the blowup is bounded by the
/// number of distinct outputs per state.
pub fn mealy_to_state_output(m: &MealyStrategy) -> StateOutputMachine {
    assert!(!m.output_names.is_empty());
    let n_in = m.input_names.len();
    let mut states: Vec<(usize, usize)> = vec![(m.initial, 0)];
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    index.insert(states[0], 0);
    let mut transition: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (s, _) = states[i];
        let mut row = Vec::with_capacity(n_in);
        for a in 0..n_in {
            let key = (m.transition[s][a], m.output[s][a]);
            let t = match index.get(&key) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    index.insert(key, t);
                    states.push(key);
                    t
                }
            };
            row.push(t);
        }
        transition.push(row);
        i += 1;
    }
    StateOutputMachine {
        state_names: states
            .iter()
            .enumerate()
            .map(|(i, (s, o))| {
                if i == 0 {
                    format!("{}^", m.state_names[*s])
                } else {
                    format!("{}/{}", m.state_names[*s], m.output_names[*o])
                }
            })
            .collect(),
        initial: 0,
        input_names: m.input_names.clone(),
        output_names: m.output_names.clone(),
        transition,
        output: states.iter().map(|&(_, o)| o).collect(),
    }
}

/// Fold a solved reduced game into a Mealy machine over class indices:
/// states are the reachable Player-I vertices, reading the next announced
/// class crosses the intermediate Player-O vertex along the positional
/// choice and emits the pair that choice resolves the pending class to. The
/// initial state emits the dummy opening pair `(initial state, Bottom)`.
pub fn positional_to_mealy(
    game: &ParityGame,
    sol: &Solution,
    meta: &ReducedGameMeta,
) -> Result<MealyStrategy, StrategyError> {
    if sol.winner_at(game.arena.initial()) != Player::O {
        return Err(StrategyError::NotWinning);
    }
    let n_classes = meta.classes.len();
    let mut states: Vec<usize> = vec![game.arena.initial()];
    let mut state_index: HashMap<usize, usize> = HashMap::new();
    state_index.insert(states[0], 0);
    let mut pairs: Vec<(usize, MemoryElem)> = Vec::new();
    let mut pair_index: HashMap<(usize, MemoryElem), usize> = HashMap::new();
    let mut transition: Vec<Vec<usize>> = Vec::new();
    let mut output: Vec<Vec<usize>> = Vec::new();

    let mut intern_pair =
        |p: (usize, MemoryElem), pairs: &mut Vec<(usize, MemoryElem)>| match pair_index.get(&p) {
            Some(&i) => i,
            None => {
                let i = pairs.len();
                pair_index.insert(p.clone(), i);
                pairs.push(p);
                i
            }
        };

    let mut i = 0;
    while i < states.len() {
        let v = states[i];
        let mut trow = Vec::with_capacity(n_classes);
        let mut orow = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let (target, emitted) = match &meta.vertex_info[v] {
                ReducedVertex::Start => {
                    let u = *game
                        .arena
                        .successors(v)
                        .iter()
                        .find(|&&u| {
                            matches!(&meta.vertex_info[u],
                                ReducedVertex::Turn { class, .. } if *class == c)
                        })
                        .expect("the start vertex offers every class");
                    let q0 = match &meta.vertex_info[u] {
                        ReducedVertex::Turn { q, .. } => *q,
                        _ => unreachable!(),
                    };
                    (u, (q0, MemoryElem::Bottom))
                }
                ReducedVertex::Turn { .. } => {
                    let r = *game
                        .arena
                        .successors(v)
                        .iter()
                        .find(|&&r| {
                            matches!(&meta.vertex_info[r],
                                ReducedVertex::Resolve { next_class, .. } if *next_class == c)
                        })
                        .expect("every class stays announceable");
                    let t = sol.choice[r].expect("O fixes a move inside her region");
                    match &meta.vertex_info[t] {
                        ReducedVertex::Turn { q, m, .. } => (t, (*q, m.clone())),
                        _ => unreachable!("O's move lands on a Player-I vertex"),
                    }
                }
                ReducedVertex::Resolve { .. } => {
                    unreachable!("Mealy states are Player-I vertices only")
                }
            };
            let t = match state_index.get(&target) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    state_index.insert(target, t);
                    states.push(target);
                    t
                }
            };
            trow.push(t);
            orow.push(intern_pair(emitted, &mut pairs));
        }
        transition.push(trow);
        output.push(orow);
        i += 1;
    }

    let state_names = states
        .iter()
        .map(|&v| match &game.labels {
            Some(l) => l[v].clone(),
            None => format!("v{v}"),
        })
        .collect();
    Ok(MealyStrategy {
        state_names,
        initial: 0,
        input_names: (0..n_classes).map(|c| format!("S{c}")).collect(),
        output_names: pairs.iter().map(|(q, m)| format!("({q},{m})")).collect(),
        transition,
        output,
        output_pairs: Some(pairs),
    })
}

// ---------------------------------------------------------------------------
// Explicit block transducers.
// ---------------------------------------------------------------------------

struct ReducedBackend {
    mealy: MealyStrategy,
    pairs: Vec<(usize, MemoryElem)>,
    product: MonitoredProduct,
    sa: SummaryAutomaton,
    /// Summary-automaton state to class index, for infinite classes.
    class_of: Vec<Option<usize>>,
}

impl std::fmt::Debug for ReducedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ReducedBackend({} Mealy states)", self.mealy.n_states())
    }
}

#[derive(Debug)]
enum Backend {
    /// The memo tables are the whole function; queries outside them fail.
    Table,
    /// Derived from a reduced-game Mealy strategy via block completions.
    Reduced(Box<ReducedBackend>),
    /// Derived by running the slaves of a succinct transducer.
    Succinct(Box<SuccinctTransducer>),
}

/// A strategy consuming one input block per round: `step` advances the
/// master state on the answered block, `emit` answers block `b1` while
/// peeking at the following block `b2`. Both functions are memoized
/// procedures; the caches behave as pure-function caches and may be hit
/// concurrently.
#[derive(Debug)]
pub struct ExplicitBlockTransducer {
    pub d: usize,
    pub initial: usize,
    pub master_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    /// Free-form provenance note, kept through serialization so a partial
    /// table dump records where it came from.
    pub generator: String,
    backend: Backend,
    dcache: Mutex<HashMap<(usize, Vec<usize>), usize>>,
    lcache: Mutex<HashMap<(usize, Vec<usize>, Vec<usize>), Vec<usize>>>,
}

impl ExplicitBlockTransducer {
    pub fn n_masters(&self) -> usize {
        self.master_names.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_names.len()
    }

    /// Master transition on a completed block.
    pub fn step(&self, p: usize, block: &[usize]) -> Result<usize, StrategyError> {
        assert_eq!(block.len(), self.d, "blocks have length d");
        let key = (p, block.to_vec());
        if let Some(&t) = self.dcache.lock().unwrap().get(&key) {
            return Ok(t);
        }
        let t = match &self.backend {
            Backend::Table => return Err(StrategyError::TableMiss),
            Backend::Reduced(r) => {
                let c = r.block_class(block);
                r.mealy.transition[p][c]
            }
            Backend::Succinct(t) => t.master_step(p, block),
        };
        self.dcache.lock().unwrap().insert(key, t);
        Ok(t)
    }

    /// The output block answering `b1`, computed with the following input
    /// block `b2` already visible.
    pub fn emit(&self, p: usize, b1: &[usize], b2: &[usize]) -> Result<Vec<usize>, StrategyError> {
        assert_eq!(b1.len(), self.d);
        assert_eq!(b2.len(), self.d);
        let key = (p, b1.to_vec(), b2.to_vec());
        if let Some(out) = self.lcache.lock().unwrap().get(&key) {
            return Ok(out.clone());
        }
        let out = match &self.backend {
            Backend::Table => return Err(StrategyError::TableMiss),
            Backend::Reduced(r) => r.emit(p, b1, b2)?,
            Backend::Succinct(t) => t.emit(p, b1, b2)?,
        };
        self.lcache.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// Force every table entry into the caches, so a subsequent
    /// serialization captures the whole function.
    pub fn materialize_all(&self, budget: usize) -> Result<(), StrategyError> {
        let sigma = self.n_inputs() as u128;
        let n = self.n_masters() as u128;
        let per_master = sigma.pow(self.d as u32);
        let required = n * (per_master + per_master * per_master);
        if required > budget as u128 {
            return Err(StrategyError::Budget { required, budget });
        }
        let blocks = crate::util::enumerate_words(self.n_inputs(), self.d);
        for p in 0..self.n_masters() {
            for b1 in &blocks {
                self.step(p, b1)?;
                for b2 in &blocks {
                    self.emit(p, b1, b2)?;
                }
            }
        }
        Ok(())
    }

    fn from_tables(
        d: usize,
        initial: usize,
        master_names: Vec<String>,
        input_names: Vec<String>,
        output_names: Vec<String>,
        generator: String,
        dtab: HashMap<(usize, Vec<usize>), usize>,
        ltab: HashMap<(usize, Vec<usize>, Vec<usize>), Vec<usize>>,
    ) -> ExplicitBlockTransducer {
        ExplicitBlockTransducer {
            d,
            initial,
            master_names,
            input_names,
            output_names,
            generator,
            backend: Backend::Table,
            dcache: Mutex::new(dtab),
            lcache: Mutex::new(ltab),
        }
    }

    /// The table entries materialized so far, sorted for stable output.
    pub fn snapshot_tables(
        &self,
    ) -> (
        Vec<((usize, Vec<usize>), usize)>,
        Vec<((usize, Vec<usize>, Vec<usize>), Vec<usize>)>,
    ) {
        let mut d: Vec<_> = self
            .dcache
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let mut l: Vec<_> = self
            .lcache
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        d.sort();
        l.sort();
        (d, l)
    }
}

impl ReducedBackend {
    fn block_class(&self, block: &[usize]) -> usize {
        let mut s = self.sa.initial;
        for &a in block {
            s = self.sa.transitions[s][a];
        }
        self.class_of[s]
            .expect("blocks of certified length always fall in an infinite class")
    }

    fn emit(&self, p: usize, b1: &[usize], b2: &[usize]) -> Result<Vec<usize>, StrategyError> {
        let c1 = self.block_class(b1);
        let (p1, out1) = self.mealy.step(p, c1);
        let q_prev = self.pairs[out1].0;
        let c2 = self.block_class(b2);
        let (_, out2) = self.mealy.step(p1, c2);
        let (q_next, m_next) = self.pairs[out2].clone();
        let out = find_completion(&self.product, q_prev, q_next, &m_next, b1)
            .map_err(|_| StrategyError::IllegalMove)?;
        #[cfg(debug_assertions)]
        {
            let letters: Vec<_> = b1.iter().copied().zip(out.iter().copied()).collect();
            let run = crate::automata::run_word(&self.product.automaton, q_prev, &letters);
            assert_eq!(run.end(q_prev), q_next);
            assert_eq!(crate::monitor::aggregate_run(&self.product.monitor, &run), m_next);
        }
        Ok(out)
    }
}

/// Lower a reduced-game Mealy strategy to a block transducer for block size
/// `d`. Masters are exactly the Mealy states. Answering `b1` simulates the
/// Mealy machine two classes ahead: the pair emitted on `b1`'s class names
/// the state the play sits in when `b1` starts, the pair emitted on `b2`'s
/// class names where `b1`'s run must end, and the concrete letters come from
/// the lexicographically smallest completion between the two.
pub fn reduced_to_block(
    m: &MealyStrategy,
    p: &MonitoredProduct,
    sa: &SummaryAutomaton,
    d: usize,
) -> Result<ExplicitBlockTransducer, StrategyError> {
    let required = infinite_class_threshold(sa);
    if d < required {
        return Err(StrategyError::BlockTooShort { d, required });
    }
    let classes = infinite_classes(sa);
    if m.input_names.len() != classes.len() {
        return Err(StrategyError::BadParameter(format!(
            "Mealy machine reads {} symbols but there are {} block classes",
            m.input_names.len(),
            classes.len()
        )));
    }
    let pairs = m
        .output_pairs
        .clone()
        .ok_or_else(|| {
            StrategyError::BadParameter(
                "Mealy outputs must decode to monitored pairs".to_string(),
            )
        })?;
    let mut class_of = vec![None; sa.summaries.len()];
    for (i, c) in classes.iter().enumerate() {
        class_of[c.canonical_index] = Some(i);
    }
    Ok(ExplicitBlockTransducer {
        d,
        initial: m.initial,
        master_names: m.state_names.clone(),
        input_names: p.automaton.alphabet.inputs.clone(),
        output_names: p.automaton.alphabet.outputs.clone(),
        generator: format!("reduced d={d}"),
        backend: Backend::Reduced(Box::new(ReducedBackend {
            mealy: m.clone(),
            pairs,
            product: p.clone(),
            sa: sa.clone(),
            class_of,
        })),
        dcache: Mutex::new(HashMap::new()),
        lcache: Mutex::new(HashMap::new()),
    })
}

/// Fully random block transducer with complete tables, for round-trip and
/// equivalence testing.
pub fn random_block_transducer(
    seed: u64,
    n_masters: usize,
    d: usize,
    n_inputs: usize,
    n_outputs: usize,
) -> ExplicitBlockTransducer {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = crate::util::enumerate_words(n_inputs, d);
    let mut dtab = HashMap::new();
    let mut ltab = HashMap::new();
    for p in 0..n_masters {
        for b1 in &blocks {
            dtab.insert((p, b1.clone()), rng.gen_range(0..n_masters));
            for b2 in &blocks {
                let out: Vec<usize> = (0..d).map(|_| rng.gen_range(0..n_outputs)).collect();
                ltab.insert((p, b1.clone(), b2.clone()), out);
            }
        }
    }
    ExplicitBlockTransducer::from_tables(
        d,
        0,
        (0..n_masters).map(|i| format!("m{i}")).collect(),
        (0..n_inputs).map(|i| i.to_string()).collect(),
        (0..n_outputs).map(|i| i.to_string()).collect(),
        format!("random seed={seed}"),
        dtab,
        ltab,
    )
}

/// Block transducer with complete tables filled from the two closures, for
/// hand-written strategies in tests and experiments. Enumerates all
/// `n_inputs^d` blocks per master, so keep the parameters small.
pub fn table_block_transducer(
    d: usize,
    initial: usize,
    master_names: Vec<String>,
    input_names: Vec<String>,
    output_names: Vec<String>,
    generator: String,
    step: impl Fn(usize, &[usize]) -> usize,
    emit: impl Fn(usize, &[usize], &[usize]) -> Vec<usize>,
) -> ExplicitBlockTransducer {
    let n_masters = master_names.len();
    assert!(initial < n_masters);
    let blocks = crate::util::enumerate_words(input_names.len(), d);
    let mut dtab = HashMap::new();
    let mut ltab = HashMap::new();
    for p in 0..n_masters {
        for b1 in &blocks {
            let t = step(p, b1);
            assert!(t < n_masters, "master transition out of range");
            dtab.insert((p, b1.clone()), t);
            for b2 in &blocks {
                let out = emit(p, b1, b2);
                assert_eq!(out.len(), d, "output blocks have length d");
                assert!(out.iter().all(|&x| x < output_names.len()));
                ltab.insert((p, b1.clone(), b2.clone()), out);
            }
        }
    }
    ExplicitBlockTransducer::from_tables(
        d,
        initial,
        master_names,
        input_names,
        output_names,
        generator,
        dtab,
        ltab,
    )
}

/// Read Player O's positional strategy off a solved block arena and tabulate
/// it as a block transducer. Masters are pairs of an automaton state and the
/// block waiting for an answer; Answer vertices carry no priority, so the
/// color component of the arena vertices drops out. A dedicated initial
/// master covers the opening round where nothing is pending yet. Rows for
/// positions the strategy cannot reach are filled with harmless defaults.
pub fn block_positional_to_transducer(
    alphabet: &ProductAlphabet,
    game: &ParityGame,
    sol: &Solution,
    meta: &BlockArenaMeta,
    budget: usize,
) -> Result<ExplicitBlockTransducer, StrategyError> {
    assert_eq!(alphabet.n_inputs(), meta.n_inputs);
    assert_eq!(alphabet.n_outputs(), meta.n_outputs);
    if sol.winner_at(game.arena.initial()) != Player::O {
        return Err(StrategyError::NotWinning);
    }
    let b = meta.in_blocks.len();
    let n_masters = 1 + meta.n_states * b;
    let required = (n_masters as u128) * (b as u128) * (1 + b as u128);
    if required > budget as u128 {
        return Err(StrategyError::Budget { required, budget });
    }
    let q0 = match meta.decode(game.arena.successors(game.arena.initial())[0]) {
        BlockVertex::Announce { q, .. } => q,
        _ => unreachable!("the opening move announces a block"),
    };
    let d = meta.d;
    let code = |block: &[usize]| {
        block.iter().fold(0usize, |acc, &l| acc * meta.n_inputs + l)
    };
    // The answer the solved strategy plays on `pending` from `q` once `next`
    // is on the table, with the state that answer leads to. `None` only
    // outside Player O's winning region.
    let resolve = |q: usize, pending: usize, next: usize| -> Option<(usize, usize)> {
        let av = meta.answer_vertex(q, pending, next);
        let w = sol.choice[av]?;
        let bo = game.arena.successors(av).iter().position(|&t| t == w)?;
        match meta.decode(w) {
            BlockVertex::Announce { q: q2, .. } => Some((bo, q2)),
            _ => None,
        }
    };
    let master_of = |q: usize, pending: usize| 1 + q * b + pending;
    let settled = |p: usize, b1: usize| -> Option<(usize, usize)> {
        if p == 0 {
            return Some((q0, b1));
        }
        let (q, pending) = ((p - 1) / b, (p - 1) % b);
        let (_, q2) = resolve(q, pending, b1)?;
        Some((q2, b1))
    };

    let block_str = |bl: &[usize], names: &[String]| {
        bl.iter().map(|&l| names[l].as_str()).collect::<String>()
    };
    let mut master_names = Vec::with_capacity(n_masters);
    master_names.push("fresh".to_string());
    for q in 0..meta.n_states {
        for bi in 0..b {
            master_names
                .push(format!("{}|{}", q, block_str(&meta.in_blocks[bi], &alphabet.inputs)));
        }
    }

    Ok(table_block_transducer(
        d,
        0,
        master_names,
        alphabet.inputs.clone(),
        alphabet.outputs.clone(),
        format!("block arena d={d}"),
        |p, b1| match settled(p, code(b1)) {
            Some((q2, pending)) => master_of(q2, pending),
            None => 0,
        },
        |p, b1, b2| match settled(p, code(b1)).and_then(|(q2, pending)| {
            resolve(q2, pending, code(b2))
        }) {
            Some((bo, _)) => meta.out_blocks[bo].clone(),
            None => vec![0; d],
        },
    ))
}

/// Drop unreachable masters and merge behaviorally equivalent ones: masters
/// are partitioned by their complete answer tables and the partition is
/// split until transitions respect it, then one representative per class
/// survives. Behavior from the initial master is unchanged. Reads the full
/// tables of the reachable part, hence the materialization budget.
pub fn minimize_block_transducer(
    t: &ExplicitBlockTransducer,
    budget: usize,
) -> Result<ExplicitBlockTransducer, StrategyError> {
    let sigma = t.n_inputs();
    let d = t.d;
    let per = (sigma as u128).pow(d as u32);
    let required = t.n_masters() as u128 * (per + per * per);
    if required > budget as u128 {
        return Err(StrategyError::Budget { required, budget });
    }
    let blocks = crate::util::enumerate_words(sigma, d);
    let b = blocks.len();

    // Reachable masters in search order, with their step and emit rows.
    let n = t.n_masters();
    let mut steps: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut emits: Vec<Option<Vec<Vec<usize>>>> = vec![None; n];
    let mut queued = vec![false; n];
    queued[t.initial] = true;
    let mut order = vec![t.initial];
    let mut head = 0;
    while head < order.len() {
        let p = order[head];
        head += 1;
        let mut srow = Vec::with_capacity(b);
        let mut erow = Vec::with_capacity(b * b);
        for b1 in &blocks {
            let q = t.step(p, b1)?;
            srow.push(q);
            if !queued[q] {
                queued[q] = true;
                order.push(q);
            }
            for b2 in &blocks {
                erow.push(t.emit(p, b1, b2)?);
            }
        }
        steps[p] = Some(srow);
        emits[p] = Some(erow);
    }

    // Initial partition by answer table, refined until transitions agree.
    let mut class = vec![usize::MAX; n];
    {
        let mut ids: HashMap<&Vec<Vec<usize>>, usize> = HashMap::new();
        for &p in &order {
            let k = ids.len();
            class[p] = *ids.entry(emits[p].as_ref().unwrap()).or_insert(k);
        }
    }
    loop {
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut next = vec![usize::MAX; n];
        for &p in &order {
            let sig = (
                class[p],
                steps[p].as_ref().unwrap().iter().map(|&q| class[q]).collect::<Vec<_>>(),
            );
            let k = ids.len();
            next[p] = *ids.entry(sig).or_insert(k);
        }
        let stable = ids.len() == order.iter().map(|&p| class[p]).collect::<BTreeSet<_>>().len();
        class = next;
        if stable {
            break;
        }
    }

    let n_classes = order.iter().map(|&p| class[p]).collect::<BTreeSet<_>>().len();
    let mut rep = vec![usize::MAX; n_classes];
    for &p in &order {
        if rep[class[p]] == usize::MAX {
            rep[class[p]] = p;
        }
    }
    let code = |block: &[usize]| block.iter().fold(0usize, |acc, &l| acc * sigma + l);
    Ok(table_block_transducer(
        d,
        class[t.initial],
        rep.iter().map(|&p| t.master_names[p].clone()).collect(),
        t.input_names.clone(),
        t.output_names.clone(),
        format!("{} | minimized", t.generator),
        |c, b1| class[steps[rep[c]].as_ref().unwrap()[code(b1)]],
        |c, b1, b2| emits[rep[c]].as_ref().unwrap()[code(b1) * b + code(b2)].clone(),
    ))
}

// ---------------------------------------------------------------------------
// Succinct transducers.
// ---------------------------------------------------------------------------

/// Computes the master successor for a block, reading it letter by letter.
#[derive(Debug, Clone)]
pub struct TransitionSlave {
    pub n_states: usize,
    /// Starting slave state per master state.
    pub init_map: Vec<usize>,
    /// `trans[s][a]` for input letters `a`.
    pub trans: Vec<Vec<usize>>,
    /// Master state read off at the end of the block.
    pub out_map: Vec<usize>,
}

/// Computes the output block for `(q, b1, b2)` by reading `b1 $ b2 $` and
/// emitting chunks of output letters along the way. The chunks must add up
/// to exactly `d` letters on every legal run.
#[derive(Debug, Clone)]
pub struct OutputSlave {
    pub n_states: usize,
    pub init_map: Vec<usize>,
    /// `edges[s][x]` with `x < n_inputs` a letter and `x == n_inputs` the
    /// block separator `$`: (emitted chunk, successor).
    pub edges: Vec<Vec<(Vec<usize>, usize)>>,
}

#[derive(Debug, Clone)]
pub struct SuccinctTransducer {
    pub d: usize,
    pub initial: usize,
    pub master_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub delta: TransitionSlave,
    pub lambda: OutputSlave,
}

impl SuccinctTransducer {
    pub fn n_masters(&self) -> usize {
        self.master_names.len()
    }

    pub fn master_step(&self, q: usize, block: &[usize]) -> usize {
        assert_eq!(block.len(), self.d);
        let mut s = self.delta.init_map[q];
        for &a in block {
            s = self.delta.trans[s][a];
        }
        self.delta.out_map[s]
    }

    pub fn emit(&self, q: usize, b1: &[usize], b2: &[usize]) -> Result<Vec<usize>, StrategyError> {
        assert_eq!(b1.len(), self.d);
        assert_eq!(b2.len(), self.d);
        let dollar = self.input_names.len();
        let mut s = self.lambda.init_map[q];
        let mut out = Vec::with_capacity(self.d);
        let symbols = b1
            .iter()
            .copied()
            .chain(std::iter::once(dollar))
            .chain(b2.iter().copied())
            .chain(std::iter::once(dollar));
        for x in symbols {
            let (chunk, next) = &self.lambda.edges[s][x];
            out.extend_from_slice(chunk);
            s = *next;
        }
        if out.len() != self.d {
            return Err(StrategyError::MalformedOutputSlave {
                expected: self.d,
                got: out.len(),
            });
        }
        Ok(out)
    }

    /// Slave sizes as reported everywhere: the transition slave counts its
    /// states, the output slave counts its states plus the longest chunk it
    /// ever emits in one step.
    pub fn delta_size(&self) -> usize {
        self.delta.n_states
    }

    pub fn lambda_size(&self) -> usize {
        let max_chunk = self
            .lambda
            .edges
            .iter()
            .flatten()
            .map(|(chunk, _)| chunk.len())
            .max()
            .unwrap_or(0);
        self.lambda.n_states + max_chunk
    }
}

/// Wrap a succinct transducer as an explicit one by running its slaves on
/// demand. Master states carry over unchanged; the output slave's
/// exactly-`d` obligation is validated lazily per query.
pub fn succinct_to_explicit(t: &SuccinctTransducer, d: usize) -> ExplicitBlockTransducer {
    assert_eq!(t.d, d, "block size disagrees with the transducer");
    ExplicitBlockTransducer {
        d,
        initial: t.initial,
        master_names: t.master_names.clone(),
        input_names: t.input_names.clone(),
        output_names: t.output_names.clone(),
        generator: "from succinct".to_string(),
        backend: Backend::Succinct(Box::new(t.clone())),
        dcache: Mutex::new(HashMap::new()),
        lcache: Mutex::new(HashMap::new()),
    }
}

/// Index of a word in the prefix tree ordering: the empty word first, then
/// by length, then lexicographically.
fn word_tree_index(word: &[usize], base: usize) -> usize {
    let mut shorter = 0;
    for _ in 0..word.len() {
        shorter = shorter * base + 1;
    }
    let mut val = 0;
    for &a in word {
        val = val * base + a;
    }
    shorter + val
}

fn word_tree_size(base: usize, max_len: usize) -> usize {
    let mut total = 0usize;
    let mut layer = 1usize;
    for _ in 0..=max_len {
        total += layer;
        layer *= base;
    }
    total
}

/// Tabulate an explicit transducer into a succinct one: the transition
/// slave buffers a whole block per master, the output slave reads the two
/// lookahead blocks and emits the table entry as a single chunk as soon as
/// every completion of what it has read agrees on it. Equal subtrees are
/// shared across masters, so strategies with structure tabulate into few
/// states while the worst case stays `|masters| * |inputs|^{2d}`.
pub fn explicit_to_succinct(
    t: &ExplicitBlockTransducer,
    budget: usize,
) -> Result<SuccinctTransducer, StrategyError> {
    let sigma = t.n_inputs();
    let d = t.d;
    let n = t.n_masters();
    let per_master = (sigma as u128).pow(d as u32);
    let required = n as u128 * (per_master + per_master * per_master);
    if required > budget as u128 {
        return Err(StrategyError::Budget { required, budget });
    }

    // Transition slave. Leaves are keyed by the master they hand over to,
    // inner nodes by their child vector; a child vector pins the distance
    // to the block end, so sharing never confuses depths.
    let mut dtrans: Vec<Vec<usize>> = Vec::new();
    let mut dout: Vec<usize> = Vec::new();
    let mut leaf_ids: HashMap<usize, usize> = HashMap::new();
    let mut node_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut dinit = Vec::with_capacity(n);
    for q in 0..n {
        let mut prev: Vec<usize> = Vec::new();
        for len in (0..=d).rev() {
            let words = crate::util::enumerate_words(sigma, len);
            let mut cur = Vec::with_capacity(words.len());
            for (wi, w) in words.iter().enumerate() {
                let id = if len == d {
                    let m = t.step(q, w)?;
                    *leaf_ids.entry(m).or_insert_with(|| {
                        let id = dout.len();
                        dtrans.push(vec![id; sigma]);
                        dout.push(m);
                        id
                    })
                } else {
                    let children: Vec<usize> =
                        (0..sigma).map(|a| prev[wi * sigma + a]).collect();
                    *node_ids.entry(children.clone()).or_insert_with(|| {
                        let id = dout.len();
                        dtrans.push(children);
                        dout.push(0);
                        id
                    })
                };
                cur.push(id);
            }
            prev = cur;
        }
        dinit.push(prev[0]);
    }
    let delta = TransitionSlave {
        n_states: dout.len(),
        init_map: dinit,
        trans: dtrans,
        out_map: dout,
    };

    // Output slave: reads `b1 $ b2 $` and emits the table entry in one
    // chunk on the first edge where every remaining completion agrees on
    // it, then coasts through the rest of the feed on two shared skip
    // states. Outputs that depend on the whole lookahead fall back to a
    // buffered prefix tree; rows are hash-consed either way.
    const TRAP: usize = 0;
    const DONE: usize = 1;
    // SKIP_LAST swallows letters until the closing separator, SKIP_BOTH
    // does the same across both remaining separators.
    const SKIP_LAST: usize = 2;
    const SKIP_BOTH: usize = 3;
    let mut edges: Vec<Vec<(Vec<usize>, usize)>> = Vec::new();
    let mut row_ids: HashMap<Vec<(Vec<usize>, usize)>, usize> = HashMap::new();
    edges.push(vec![(Vec::new(), TRAP); sigma + 1]);
    row_ids.insert(edges[TRAP].clone(), TRAP);
    edges.push(vec![(Vec::new(), DONE); sigma + 1]);
    row_ids.insert(edges[DONE].clone(), DONE);
    let mut row = vec![(Vec::new(), SKIP_LAST); sigma];
    row.push((Vec::new(), DONE));
    edges.push(row);
    row_ids.insert(edges[SKIP_LAST].clone(), SKIP_LAST);
    let mut row = vec![(Vec::new(), SKIP_BOTH); sigma];
    row.push((Vec::new(), SKIP_LAST));
    edges.push(row);
    row_ids.insert(edges[SKIP_BOTH].clone(), SKIP_BOTH);

    let intern = |edges: &mut Vec<Vec<(Vec<usize>, usize)>>,
                      row_ids: &mut HashMap<Vec<(Vec<usize>, usize)>, usize>,
                      row: Vec<(Vec<usize>, usize)>| {
        *row_ids.entry(row.clone()).or_insert_with(|| {
            edges.push(row);
            edges.len() - 1
        })
    };
    // A subtree either settles on one output block (emitted by the edge
    // entering it) or needs a real state to keep reading.
    enum Sub {
        Settled(Vec<usize>),
        Branch(usize),
    }
    let n_blocks = per_master as usize;
    let mut linit = Vec::with_capacity(n);
    for q in 0..n {
        let mut table = Vec::with_capacity(n_blocks);
        for b1 in crate::util::enumerate_words(sigma, d) {
            let mut per_b2 = Vec::with_capacity(n_blocks);
            for b2 in crate::util::enumerate_words(sigma, d) {
                per_b2.push(t.emit(q, &b1, &b2)?);
            }
            table.push(per_b2);
        }
        // Reading the tail of b2 for a fixed b1: `vi` indexes the b2
        // letters consumed so far.
        fn peek_tail(
            table: &[Vec<Vec<usize>>],
            edges: &mut Vec<Vec<(Vec<usize>, usize)>>,
            row_ids: &mut HashMap<Vec<(Vec<usize>, usize)>, usize>,
            intern: &impl Fn(
                &mut Vec<Vec<(Vec<usize>, usize)>>,
                &mut HashMap<Vec<(Vec<usize>, usize)>, usize>,
                Vec<(Vec<usize>, usize)>,
            ) -> usize,
            sigma: usize,
            d: usize,
            b1: usize,
            vi: usize,
            len: usize,
        ) -> Sub {
            let span = sigma.pow((d - len) as u32);
            let lo = vi * span;
            if table[b1][lo..lo + span].iter().all(|b| *b == table[b1][lo]) {
                return Sub::Settled(table[b1][lo].clone());
            }
            let mut row = Vec::with_capacity(sigma + 1);
            for a in 0..sigma {
                match peek_tail(table, edges, row_ids, intern, sigma, d, b1, vi * sigma + a, len + 1)
                {
                    Sub::Settled(block) => row.push((block, SKIP_LAST)),
                    Sub::Branch(id) => row.push((Vec::new(), id)),
                }
            }
            row.push((Vec::new(), TRAP));
            Sub::Branch(intern(edges, row_ids, row))
        }
        // Reading b1: `wi` indexes the letters consumed so far. Settling
        // here means the block is independent of everything still unread,
        // including all of b2.
        fn read_head(
            table: &[Vec<Vec<usize>>],
            edges: &mut Vec<Vec<(Vec<usize>, usize)>>,
            row_ids: &mut HashMap<Vec<(Vec<usize>, usize)>, usize>,
            intern: &impl Fn(
                &mut Vec<Vec<(Vec<usize>, usize)>>,
                &mut HashMap<Vec<(Vec<usize>, usize)>, usize>,
                Vec<(Vec<usize>, usize)>,
            ) -> usize,
            sigma: usize,
            d: usize,
            wi: usize,
            len: usize,
        ) -> Sub {
            let span = sigma.pow((d - len) as u32);
            let lo = wi * span;
            let first = &table[lo][0];
            if table[lo..lo + span].iter().all(|row| row.iter().all(|b| b == first)) {
                return Sub::Settled(first.clone());
            }
            if len == d {
                let tail = match peek_tail(table, edges, row_ids, intern, sigma, d, lo, 0, 0) {
                    Sub::Branch(id) => id,
                    Sub::Settled(_) => unreachable!("a settled tail settles the head too"),
                };
                let mut row = vec![(Vec::new(), TRAP); sigma];
                row.push((Vec::new(), tail));
                return Sub::Branch(intern(edges, row_ids, row));
            }
            let mut row = Vec::with_capacity(sigma + 1);
            for a in 0..sigma {
                match read_head(table, edges, row_ids, intern, sigma, d, wi * sigma + a, len + 1) {
                    Sub::Settled(block) => row.push((block, SKIP_BOTH)),
                    Sub::Branch(id) => row.push((Vec::new(), id)),
                }
            }
            row.push((Vec::new(), TRAP));
            Sub::Branch(intern(edges, row_ids, row))
        }
        let init = match read_head(&table, &mut edges, &mut row_ids, &intern, sigma, d, 0, 0) {
            Sub::Branch(id) => id,
            Sub::Settled(block) => {
                // The master ignores its lookahead entirely, so the first
                // letter edge carries the whole block.
                let mut row = vec![(block, SKIP_BOTH); sigma];
                row.push((Vec::new(), TRAP));
                intern(&mut edges, &mut row_ids, row)
            }
        };
        linit.push(init);
    }
    let lambda = OutputSlave { n_states: edges.len(), init_map: linit, edges };
    Ok(SuccinctTransducer {
        d,
        initial: t.initial,
        master_names: t.master_names.clone(),
        input_names: t.input_names.clone(),
        output_names: t.output_names.clone(),
        delta,
        lambda,
    })
}

/// Lower a reduced-game Mealy strategy directly to a succinct transducer:
/// the transition slave walks the summary automaton and applies the Mealy
/// step at block end; the output slave stores the answered block verbatim,
/// summarizes the peeked block, and emits the completion on the second
/// separator.
pub fn reduced_to_succinct(
    m: &MealyStrategy,
    p: &MonitoredProduct,
    sa: &SummaryAutomaton,
    d: usize,
) -> Result<SuccinctTransducer, StrategyError> {
    let required = infinite_class_threshold(sa);
    if d < required {
        return Err(StrategyError::BlockTooShort { d, required });
    }
    let classes = infinite_classes(sa);
    if m.input_names.len() != classes.len() {
        return Err(StrategyError::BadParameter(format!(
            "Mealy machine reads {} symbols but there are {} block classes",
            m.input_names.len(),
            classes.len()
        )));
    }
    let pairs = m.output_pairs.clone().ok_or_else(|| {
        StrategyError::BadParameter("Mealy outputs must decode to monitored pairs".to_string())
    })?;
    let mut class_of = vec![None; sa.summaries.len()];
    for (i, c) in classes.iter().enumerate() {
        class_of[c.canonical_index] = Some(i);
    }
    let class_at = |s: usize| -> usize {
        class_of[s].expect("blocks of certified length land in infinite classes")
    };
    let walk = |block: &[usize]| -> usize {
        let mut s = sa.initial;
        for &a in block {
            s = sa.transitions[s][a];
        }
        s
    };

    let sigma = p.automaton.alphabet.n_inputs();
    let n_t = m.n_states();
    let n_sum = sa.summaries.len();

    // Transition slave: (Mealy state, summary of the block so far).
    let dstate = |p_: usize, s: usize| p_ * n_sum + s;
    let mut dtrans = vec![vec![0usize; sigma]; n_t * n_sum];
    let mut dout = vec![0usize; n_t * n_sum];
    for pq in 0..n_t {
        for s in 0..n_sum {
            for a in 0..sigma {
                dtrans[dstate(pq, s)][a] = dstate(pq, sa.transitions[s][a]);
            }
            dout[dstate(pq, s)] = match class_of[s] {
                Some(c) => m.transition[pq][c],
                // Finite summaries never end a block of legal length.
                None => pq,
            };
        }
    }
    let delta = TransitionSlave {
        n_states: n_t * n_sum,
        init_map: (0..n_t).map(|pq| dstate(pq, sa.initial)).collect(),
        trans: dtrans,
        out_map: dout,
    };

    // Output slave: phase 1 stores b1 as a word of length <= d, phase 2
    // additionally walks the summary automaton over b2.
    let half = word_tree_size(sigma, d);
    let per = half + half * n_sum;
    let trap = n_t * per;
    let done = trap + 1;
    let dollar = sigma;
    let mut edges: Vec<Vec<(Vec<usize>, usize)>> =
        vec![vec![(Vec::new(), trap); sigma + 1]; done + 1];
    edges[done] = vec![(Vec::new(), done); sigma + 1];
    for pq in 0..n_t {
        let off1 = pq * per;
        let off2 = pq * per + half;
        for len in 0..=d {
            for w in crate::util::enumerate_words(sigma, len) {
                let wid = word_tree_index(&w, sigma);
                let id1 = off1 + wid;
                for a in 0..sigma {
                    edges[id1][a] = if len < d {
                        let mut wa = w.clone();
                        wa.push(a);
                        (Vec::new(), off1 + word_tree_index(&wa, sigma))
                    } else {
                        (Vec::new(), trap)
                    };
                }
                edges[id1][dollar] = if len == d {
                    (Vec::new(), off2 + wid * n_sum + sa.initial)
                } else {
                    (Vec::new(), trap)
                };
                if len == d {
                    for s in 0..n_sum {
                        let id2 = off2 + wid * n_sum + s;
                        for a in 0..sigma {
                            edges[id2][a] = (Vec::new(), off2 + wid * n_sum + sa.transitions[s][a]);
                        }
                        edges[id2][dollar] = match class_of[s] {
                            Some(c2) => {
                                let c1 = class_at(walk(&w));
                                let (p1, out1) = m.step(pq, c1);
                                let q_prev = pairs[out1].0;
                                let (_, out2) = m.step(p1, c2);
                                let (q_next, m_next) = pairs[out2].clone();
                                match find_completion(p, q_prev, q_next, &m_next, &w) {
                                    Ok(chunk) => (chunk, done),
                                    Err(_) => return Err(StrategyError::IllegalMove),
                                }
                            }
                            None => (Vec::new(), trap),
                        };
                    }
                }
            }
        }
    }
    let lambda = OutputSlave {
        n_states: done + 1,
        init_map: (0..n_t).map(|pq| pq * per).collect(),
        edges,
    };
    Ok(SuccinctTransducer {
        d,
        initial: m.initial,
        master_names: m.state_names.clone(),
        input_names: p.automaton.alphabet.inputs.clone(),
        output_names: p.automaton.alphabet.outputs.clone(),
        delta,
        lambda,
    })
}

// ---------------------------------------------------------------------------
// Letter-level strategies.
// ---------------------------------------------------------------------------

/// A letter-by-letter Mealy strategy for the lookahead game where the
/// output may wait for `lookahead` input letters. Transitions before the
/// horizon emit padding; from the transition reading input letter number
/// `lookahead` onward, each transition emits one real output letter.
#[derive(Debug, Clone)]
pub struct DelayMealy {
    pub machine: MealyStrategy,
    pub lookahead: usize,
}

/// Lower a block transducer to a letter-level strategy assuming lookahead
/// `2d`: buffer the first two blocks, then keep one complete block and one
/// growing block around, spending one stored output letter per input letter.
/// Reachable states stay within `masters * |inputs|^{2d} * d` bookkeeping;
/// unreachable buffer combinations are never materialised.
pub fn block_to_delay_mealy(
    t: &ExplicitBlockTransducer,
    d: usize,
) -> Result<DelayMealy, StrategyError> {
    assert_eq!(t.d, d, "block size disagrees with the transducer");
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum S {
        Fill(Vec<usize>),
        Steady {
            master: usize,
            prev: Vec<usize>,
            buf: Vec<usize>,
            rem: Vec<usize>,
        },
    }
    let sigma = t.n_inputs();
    let mut states: Vec<S> = vec![S::Fill(Vec::new())];
    let mut index: HashMap<S, usize> = HashMap::new();
    index.insert(states[0].clone(), 0);
    let mut transition: Vec<Vec<usize>> = Vec::new();
    let mut output: Vec<Vec<usize>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let cur = states[i].clone();
        names.push(match &cur {
            S::Fill(w) => format!("fill:{}", render_word(w)),
            S::Steady { master, prev, buf, rem } => format!(
                "{}[{}|{}|{}]",
                t.master_names[*master],
                render_word(prev),
                render_word(buf),
                render_word(rem)
            ),
        });
        let mut trow = Vec::with_capacity(sigma);
        let mut orow = Vec::with_capacity(sigma);
        for a in 0..sigma {
            let (next, emitted) = match &cur {
                S::Fill(w) => {
                    let mut w2 = w.clone();
                    w2.push(a);
                    if w2.len() < 2 * d {
                        // Padding before the horizon; never part of the
                        // produced output stream.
                        (S::Fill(w2), 0)
                    } else {
                        let b = t.emit(t.initial, &w2[..d], &w2[d..])?;
                        let master = t.step(t.initial, &w2[..d])?;
                        (
                            S::Steady {
                                master,
                                prev: w2[d..].to_vec(),
                                buf: Vec::new(),
                                rem: b[1..].to_vec(),
                            },
                            b[0],
                        )
                    }
                }
                S::Steady { master, prev, buf, rem } => {
                    let mut buf2 = buf.clone();
                    buf2.push(a);
                    if buf2.len() < d {
                        let (head, tail) = rem.split_first().expect("one letter per step");
                        (
                            S::Steady {
                                master: *master,
                                prev: prev.clone(),
                                buf: buf2,
                                rem: tail.to_vec(),
                            },
                            *head,
                        )
                    } else {
                        debug_assert!(rem.is_empty());
                        let b = t.emit(*master, prev, &buf2)?;
                        let next_master = t.step(*master, prev)?;
                        (
                            S::Steady {
                                master: next_master,
                                prev: buf2,
                                buf: Vec::new(),
                                rem: b[1..].to_vec(),
                            },
                            b[0],
                        )
                    }
                }
            };
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    index.insert(next.clone(), id);
                    states.push(next);
                    id
                }
            };
            trow.push(id);
            orow.push(emitted);
        }
        transition.push(trow);
        output.push(orow);
        i += 1;
    }
    Ok(DelayMealy {
        machine: MealyStrategy {
            state_names: names,
            initial: 0,
            input_names: t.input_names.clone(),
            output_names: t.output_names.clone(),
            transition,
            output,
            output_pairs: None,
        },
        lookahead: 2 * d,
    })
}

fn render_word(w: &[usize]) -> String {
    w.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("")
}

/// Adapter turning a letter-level lookahead strategy into a block strategy:
/// feed input blocks in order; from the second block on, every push yields
/// the next output block, each letter computed from exactly the input
/// prefix the lookahead game would have revealed for it.
pub struct DelayToBlockAdapter<'a> {
    sigma: Box<dyn FnMut(&[usize]) -> Vec<usize> + 'a>,
    d: usize,
    history: Vec<usize>,
    next_round: usize,
}

/// `sigma` maps each revealed input prefix to all output letters due by
/// then: with block size `d`, a prefix of `d + p` letters determines output
/// positions `0..=p`.
pub fn delay_fn_to_block<'a>(
    sigma: Box<dyn FnMut(&[usize]) -> Vec<usize> + 'a>,
    d: usize,
) -> DelayToBlockAdapter<'a> {
    assert!(d >= 1);
    DelayToBlockAdapter { sigma, d, history: Vec::new(), next_round: 0 }
}

impl DelayToBlockAdapter<'_> {
    pub fn push_block(&mut self, block: &[usize]) -> Result<Option<Vec<usize>>, StrategyError> {
        assert_eq!(block.len(), self.d);
        self.history.extend_from_slice(block);
        if self.history.len() < 2 * self.d {
            return Ok(None);
        }
        let d = self.d;
        let round = self.next_round;
        let mut out = Vec::with_capacity(d);
        for pos in round * d..(round + 1) * d {
            let prefix = &self.history[..d + pos];
            let produced = (self.sigma)(prefix);
            if produced.len() != pos + 1 {
                return Err(StrategyError::IllFormedDelayStrategy {
                    expected: pos + 1,
                    got: produced.len(),
                });
            }
            out.push(produced[pos]);
        }
        self.next_round += 1;
        Ok(Some(out))
    }
}

// ---------------------------------------------------------------------------
// Hand-built succinct strategies for the stock families.
// ---------------------------------------------------------------------------

/// Which hand construction to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuiltinSpec {
    /// Echo every input block unchanged; wins the copy game for any `d`.
    Copy { symbols: Vec<String>, d: usize },
    /// Scan the first two blocks for a repeated index enclosing only
    /// smaller ones and commit to it; needs `2d > 2^n`.
    BadJPair { n: u32, d: usize },
    /// Replay the first `k` input letters in reverse across the first two
    /// output blocks; needs `k/2 <= d <= k`.
    Reversal { k: u32, d: usize },
}

pub fn builtin_strategy(spec: &BuiltinSpec) -> Result<SuccinctTransducer, StrategyError> {
    match spec {
        BuiltinSpec::Copy { symbols, d } => builtin_copy(symbols, *d),
        BuiltinSpec::BadJPair { n, d } => builtin_badjpair(*n, *d),
        BuiltinSpec::Reversal { k, d } => builtin_reversal(*k, *d),
    }
}

fn builtin_copy(symbols: &[String], d: usize) -> Result<SuccinctTransducer, StrategyError> {
    if symbols.len() < 2 || d == 0 {
        return Err(StrategyError::BadParameter(
            "copy needs at least two symbols and a positive block size".to_string(),
        ));
    }
    let sigma = symbols.len();
    // One echo state per block position, then a sink that ignores the rest.
    let n_l = d + 1;
    let done = d;
    let mut edges: Vec<Vec<(Vec<usize>, usize)>> = Vec::with_capacity(n_l);
    for pos in 0..d {
        let mut row: Vec<(Vec<usize>, usize)> = (0..sigma).map(|a| (vec![a], pos + 1)).collect();
        row.push((Vec::new(), pos)); // `$` cannot occur mid-block
        edges.push(row);
    }
    let mut sink: Vec<(Vec<usize>, usize)> = (0..sigma).map(|_| (Vec::new(), done)).collect();
    sink.push((Vec::new(), done));
    edges.push(sink);
    Ok(SuccinctTransducer {
        d,
        initial: 0,
        master_names: vec!["m".to_string()],
        input_names: symbols.to_vec(),
        output_names: symbols.to_vec(),
        delta: TransitionSlave {
            n_states: 1,
            init_map: vec![0],
            trans: vec![vec![0; sigma]],
            out_map: vec![0],
        },
        lambda: OutputSlave { n_states: n_l, init_map: vec![0], edges },
    })
}

fn builtin_badjpair(n: u32, d: usize) -> Result<SuccinctTransducer, StrategyError> {
    if n == 0 || n > 16 {
        return Err(StrategyError::BadParameter("index range must be 1..=16".to_string()));
    }
    if 2 * d <= (1usize << n) {
        return Err(StrategyError::BadParameter(format!(
            "block size {d} gives a window of {} letters, need more than 2^{n}",
            2 * d - 1
        )));
    }
    let sigma = n as usize;
    let names: Vec<String> = (1..=sigma).map(|v| v.to_string()).collect();
    // Output-slave layout: position-0 skip, then one collector per subset of
    // indices, then the echo-until-$ state for committed rounds, then a sink.
    let skip0 = 0usize;
    let coll = |set: usize| 1 + set;
    let echo = 1 + (1usize << n);
    let ignore = echo + 1;
    let n_l = ignore + 1;
    let mut edges: Vec<Vec<(Vec<usize>, usize)>> =
        vec![vec![(Vec::new(), ignore); sigma + 1]; n_l];
    edges[skip0] = (0..sigma)
        .map(|_| (Vec::new(), coll(0)))
        .chain(std::iter::once((Vec::new(), skip0)))
        .collect();
    for set in 0..(1usize << n) {
        let row = (0..sigma)
            .map(|x| {
                // Letter index x stands for the value x + 1.
                if set & (1 << x) != 0 {
                    // Second occurrence with only smaller values between:
                    // commit to this index and pad the rest of the block.
                    let mut chunk = vec![x];
                    chunk.resize(d, 0);
                    (chunk, ignore)
                } else {
                    let keep = set & !((1 << x) - 1);
                    (Vec::new(), coll(keep | (1 << x)))
                }
            })
            .chain(std::iter::once((Vec::new(), coll(set))))
            .collect();
        edges[coll(set)] = row;
    }
    edges[echo] = (0..sigma)
        .map(|a| (vec![a], echo))
        .chain(std::iter::once((Vec::new(), ignore)))
        .collect();
    Ok(SuccinctTransducer {
        d,
        initial: 0,
        master_names: vec!["fresh".to_string(), "committed".to_string()],
        input_names: names.clone(),
        output_names: names,
        delta: TransitionSlave {
            n_states: 1,
            init_map: vec![0, 0],
            trans: vec![vec![0; sigma]],
            out_map: vec![1],
        },
        lambda: OutputSlave { n_states: n_l, init_map: vec![skip0, echo], edges },
    })
}

fn builtin_reversal(k: u32, d: usize) -> Result<SuccinctTransducer, StrategyError> {
    let k = k as usize;
    if k == 0 || k % 2 != 0 {
        return Err(StrategyError::BadParameter("window length must be even and positive".into()));
    }
    if d < k / 2 || d > k {
        return Err(StrategyError::BadParameter(format!(
            "block size {d} outside the feasible range {}..={k}",
            k / 2
        )));
    }
    let r = k - d; // letters owed to the second output block
    let sigma = 2usize;
    let names = vec!["0".to_string(), "1".to_string()];
    let n_masters = 1 + (1 << r) + 1;
    let master_fresh = 0usize;
    let master_w = |code: usize| 1 + code;
    let master_done = 1 + (1 << r);
    let mut master_names = vec!["fresh".to_string()];
    for code in 0..(1 << r) {
        master_names.push(format!("w{:0width$b}", code, width = r.max(1)));
    }
    master_names.push("done".to_string());

    // Transition slave: collect the first r letters of the block, then idle.
    let tree = word_tree_size(sigma, r);
    let to_done = tree;
    let n_d = tree + 1;
    let mut dtrans = vec![vec![0usize; sigma]; n_d];
    let mut dout = vec![master_fresh; n_d];
    for len in 0..=r {
        for w in crate::util::enumerate_words(sigma, len) {
            let id = word_tree_index(&w, sigma);
            for a in 0..sigma {
                dtrans[id][a] = if len < r {
                    let mut wa = w.clone();
                    wa.push(a);
                    word_tree_index(&wa, sigma)
                } else {
                    id
                };
            }
            if len == r {
                let mut code = 0;
                for &b in &w {
                    code = code * 2 + b;
                }
                dout[id] = master_w(code);
            }
        }
    }
    dtrans[to_done] = vec![to_done; sigma];
    dout[to_done] = master_done;
    let delta = TransitionSlave {
        n_states: n_d,
        init_map: std::iter::once(word_tree_index(&[], sigma))
            .chain((0..(1 << r)).map(|_| to_done))
            .chain(std::iter::once(to_done))
            .collect(),
        trans: dtrans,
        out_map: dout,
    };

    // Output slave: skip r letters, store the next d - 1, and emit the
    // reversed window in one chunk on the letter completing it; dedicated
    // one-shot states handle the later masters.
    let store_tree = word_tree_size(sigma, d - 1);
    let skip = |i: usize| i; // 0..r
    let store = |w: &[usize]| r + word_tree_index(w, sigma);
    let s_w = |code: usize| r + store_tree + code;
    let s_done = r + store_tree + (1 << r);
    let ignore = s_done + 1;
    let n_l = ignore + 1;
    let mut edges: Vec<Vec<(Vec<usize>, usize)>> =
        vec![vec![(Vec::new(), ignore); sigma + 1]; n_l];
    for i in 0..r {
        let next = if i + 1 < r { skip(i + 1) } else { store(&[]) };
        edges[skip(i)] = (0..sigma)
            .map(|_| (Vec::new(), next))
            .chain(std::iter::once((Vec::new(), skip(i))))
            .collect();
    }
    for len in 0..d {
        for w in crate::util::enumerate_words(sigma, len) {
            let id = store(&w);
            let row = (0..sigma)
                .map(|a| {
                    let mut wa = w.clone();
                    wa.push(a);
                    if wa.len() < d {
                        (Vec::new(), store(&wa))
                    } else {
                        wa.reverse();
                        (wa, ignore)
                    }
                })
                .chain(std::iter::once((Vec::new(), id)))
                .collect();
            edges[id] = row;
        }
    }
    for code in 0..(1usize << r) {
        let mut chunk: Vec<usize> = (0..r).map(|i| (code >> i) & 1).collect();
        chunk.resize(d, 0);
        edges[s_w(code)] = (0..sigma)
            .map(|_| (chunk.clone(), ignore))
            .chain(std::iter::once((Vec::new(), s_w(code))))
            .collect();
    }
    edges[s_done] = (0..sigma)
        .map(|_| (vec![0; d], ignore))
        .chain(std::iter::once((Vec::new(), s_done)))
        .collect();
    let lambda = OutputSlave {
        n_states: n_l,
        init_map: std::iter::once(if r > 0 { skip(0) } else { store(&[]) })
            .chain((0..(1 << r)).map(s_w))
            .chain(std::iter::once(s_done))
            .collect(),
        edges,
    };
    debug_assert_eq!(n_masters, master_names.len());
    Ok(SuccinctTransducer {
        d,
        initial: master_fresh,
        master_names,
        input_names: names.clone(),
        output_names: names,
        delta,
        lambda,
    })
}

// ---------------------------------------------------------------------------
// Serialization (.sst) and DOT export.
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SstParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// Either transducer shape, as read back from an `.sst` file.
#[derive(Debug)]
pub enum SstMachine {
    Succinct(SuccinctTransducer),
    Explicit(ExplicitBlockTransducer),
}

/// Render a succinct transducer. The output slave's edges use `$` for the
/// block separator and `-` for an empty emission.
pub fn write_sst(t: &SuccinctTransducer) -> String {
    let mut out = String::new();
    let push = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push(
        &mut out,
        format!(
            "master states={} initial={} d={} inputs={} outputs={}",
            t.n_masters(),
            t.initial,
            t.d,
            t.input_names.join(","),
            t.output_names.join(",")
        ),
    );
    for (i, name) in t.master_names.iter().enumerate() {
        push(&mut out, format!("master-name {i} {name}"));
    }
    push(&mut out, format!("delta-slave states={}", t.delta.n_states));
    for (q, s) in t.delta.init_map.iter().enumerate() {
        push(&mut out, format!("dinit {q} {s}"));
    }
    for (s, row) in t.delta.trans.iter().enumerate() {
        for (a, nx) in row.iter().enumerate() {
            push(&mut out, format!("dtrans {s} {} {nx}", t.input_names[a]));
        }
    }
    for (s, q) in t.delta.out_map.iter().enumerate() {
        push(&mut out, format!("dout {s} {q}"));
    }
    push(&mut out, format!("lambda-slave states={}", t.lambda.n_states));
    for (q, s) in t.lambda.init_map.iter().enumerate() {
        push(&mut out, format!("linit {q} {s}"));
    }
    for (s, row) in t.lambda.edges.iter().enumerate() {
        for (x, (chunk, nx)) in row.iter().enumerate() {
            let sym = if x < t.input_names.len() { t.input_names[x].as_str() } else { "$" };
            let emit = if chunk.is_empty() {
                "-".to_string()
            } else {
                chunk.iter().map(|&o| t.output_names[o].clone()).collect::<Vec<_>>().join(",")
            };
            push(&mut out, format!("edge {s} {sym} -> emit={emit} {nx}"));
        }
    }
    out
}

/// Render an explicit transducer: whatever table entries have been
/// materialized so far, plus the generator note for provenance.
pub fn write_sst_explicit(t: &ExplicitBlockTransducer) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "explicit masters={} initial={} d={} inputs={} outputs={}\n",
        t.n_masters(),
        t.initial,
        t.d,
        t.input_names.join(","),
        t.output_names.join(",")
    ));
    for (i, name) in t.master_names.iter().enumerate() {
        out.push_str(&format!("master-name {i} {name}\n"));
    }
    if !t.generator.is_empty() {
        out.push_str(&format!("generator {}\n", t.generator));
    }
    let render_in = |b: &[usize]| {
        b.iter().map(|&a| t.input_names[a].clone()).collect::<Vec<_>>().join(",")
    };
    let render_out = |b: &[usize]| {
        b.iter().map(|&o| t.output_names[o].clone()).collect::<Vec<_>>().join(",")
    };
    let (dtab, ltab) = t.snapshot_tables();
    for ((p, b), nx) in dtab {
        out.push_str(&format!("dtab {p} {} {nx}\n", render_in(&b)));
    }
    for ((p, b1, b2), o) in ltab {
        out.push_str(&format!(
            "ltab {p} {} {} {}\n",
            render_in(&b1),
            render_in(&b2),
            render_out(&o)
        ));
    }
    out
}

pub fn parse_sst(text: &str) -> Result<SstMachine, SstParseError> {
    let mal = |line: usize, msg: String| SstParseError::Malformed { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| mal(0, "empty file".to_string()))?;
    let head: Vec<&str> = first.split_whitespace().collect();
    let kv = |tok: &str, key: &str, line: usize| -> Result<String, SstParseError> {
        tok.strip_prefix(&format!("{key}="))
            .map(|v| v.to_string())
            .ok_or_else(|| mal(line, format!("expected {key}=..., found {tok}")))
    };
    let num = |s: &str, line: usize| -> Result<usize, SstParseError> {
        s.parse::<usize>().map_err(|_| mal(line, format!("not a number: {s}")))
    };
    if head.len() != 6 {
        return Err(mal(first_no, "header needs five key=value fields".to_string()));
    }
    let n_masters = num(&kv(head[1], if head[0] == "explicit" { "masters" } else { "states" }, first_no)?, first_no)?;
    let initial = num(&kv(head[2], "initial", first_no)?, first_no)?;
    let d = num(&kv(head[3], "d", first_no)?, first_no)?;
    let input_names: Vec<String> =
        kv(head[4], "inputs", first_no)?.split(',').map(str::to_string).collect();
    let output_names: Vec<String> =
        kv(head[5], "outputs", first_no)?.split(',').map(str::to_string).collect();
    if initial >= n_masters || d == 0 {
        return Err(mal(first_no, "initial state or block size out of range".to_string()));
    }
    let in_index = |name: &str, line: usize| -> Result<usize, SstParseError> {
        input_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| mal(line, format!("unknown input letter {name}")))
    };
    let out_index = |name: &str, line: usize| -> Result<usize, SstParseError> {
        output_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| mal(line, format!("unknown output letter {name}")))
    };
    let parse_in_block = |s: &str, line: usize| -> Result<Vec<usize>, SstParseError> {
        let b = s.split(',').map(|n| in_index(n, line)).collect::<Result<Vec<_>, _>>()?;
        if b.len() != d {
            return Err(mal(line, format!("block of {} letters, expected {d}", b.len())));
        }
        Ok(b)
    };
    let mut master_names: Vec<String> = (0..n_masters).map(|i| format!("m{i}")).collect();

    if head[0] == "explicit" {
        let mut generator = String::new();
        let mut dtab: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut ltab: HashMap<(usize, Vec<usize>, Vec<usize>), Vec<usize>> = HashMap::new();
        for (no, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "master-name" if toks.len() == 3 => {
                    let i = num(toks[1], no)?;
                    if i >= n_masters {
                        return Err(mal(no, format!("no master {i}")));
                    }
                    master_names[i] = toks[2].to_string();
                }
                "generator" => {
                    generator = line["generator".len()..].trim().to_string();
                }
                "dtab" if toks.len() == 4 => {
                    let p = num(toks[1], no)?;
                    let nx = num(toks[3], no)?;
                    if p >= n_masters || nx >= n_masters {
                        return Err(mal(no, "master index out of range".to_string()));
                    }
                    dtab.insert((p, parse_in_block(toks[2], no)?), nx);
                }
                "ltab" if toks.len() == 5 => {
                    let p = num(toks[1], no)?;
                    if p >= n_masters {
                        return Err(mal(no, "master index out of range".to_string()));
                    }
                    let b1 = parse_in_block(toks[2], no)?;
                    let b2 = parse_in_block(toks[3], no)?;
                    let o = toks[4]
                        .split(',')
                        .map(|n| out_index(n, no))
                        .collect::<Result<Vec<_>, _>>()?;
                    if o.len() != d {
                        return Err(mal(no, format!("output block of {} letters, expected {d}", o.len())));
                    }
                    ltab.insert((p, b1, b2), o);
                }
                other => return Err(mal(no, format!("unexpected directive {other}"))),
            }
        }
        return Ok(SstMachine::Explicit(ExplicitBlockTransducer::from_tables(
            d,
            initial,
            master_names,
            input_names,
            output_names,
            generator,
            dtab,
            ltab,
        )));
    }
    if head[0] != "master" {
        return Err(mal(first_no, format!("expected master or explicit header, found {}", head[0])));
    }

    let sigma = input_names.len();
    let mut delta_states = None;
    let mut dinit: Vec<Option<usize>> = vec![None; n_masters];
    let mut dtrans: Vec<Vec<Option<usize>>> = Vec::new();
    let mut dout: Vec<Option<usize>> = Vec::new();
    let mut lambda_states = None;
    let mut linit: Vec<Option<usize>> = vec![None; n_masters];
    let mut ledges: Vec<Vec<Option<(Vec<usize>, usize)>>> = Vec::new();
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "master-name" if toks.len() == 3 => {
                let i = num(toks[1], no)?;
                if i >= n_masters {
                    return Err(mal(no, format!("no master {i}")));
                }
                master_names[i] = toks[2].to_string();
            }
            "delta-slave" if toks.len() == 2 => {
                let n = num(&kv(toks[1], "states", no)?, no)?;
                delta_states = Some(n);
                dtrans = vec![vec![None; sigma]; n];
                dout = vec![None; n];
            }
            "lambda-slave" if toks.len() == 2 => {
                let n = num(&kv(toks[1], "states", no)?, no)?;
                lambda_states = Some(n);
                ledges = vec![vec![None; sigma + 1]; n];
            }
            "dinit" if toks.len() == 3 => {
                let q = num(toks[1], no)?;
                let s = num(toks[2], no)?;
                if q >= n_masters || s >= delta_states.ok_or_else(|| mal(no, "dinit before delta-slave".to_string()))? {
                    return Err(mal(no, "dinit index out of range".to_string()));
                }
                dinit[q] = Some(s);
            }
            "dtrans" if toks.len() == 4 => {
                let n = delta_states.ok_or_else(|| mal(no, "dtrans before delta-slave".to_string()))?;
                let s = num(toks[1], no)?;
                let a = in_index(toks[2], no)?;
                let nx = num(toks[3], no)?;
                if s >= n || nx >= n {
                    return Err(mal(no, "dtrans state out of range".to_string()));
                }
                dtrans[s][a] = Some(nx);
            }
            "dout" if toks.len() == 3 => {
                let n = delta_states.ok_or_else(|| mal(no, "dout before delta-slave".to_string()))?;
                let s = num(toks[1], no)?;
                let q = num(toks[2], no)?;
                if s >= n || q >= n_masters {
                    return Err(mal(no, "dout index out of range".to_string()));
                }
                dout[s] = Some(q);
            }
            "linit" if toks.len() == 3 => {
                let q = num(toks[1], no)?;
                let s = num(toks[2], no)?;
                if q >= n_masters || s >= lambda_states.ok_or_else(|| mal(no, "linit before lambda-slave".to_string()))? {
                    return Err(mal(no, "linit index out of range".to_string()));
                }
                linit[q] = Some(s);
            }
            "edge" if toks.len() == 6 && toks[3] == "->" => {
                let n = lambda_states.ok_or_else(|| mal(no, "edge before lambda-slave".to_string()))?;
                let s = num(toks[1], no)?;
                let x = if toks[2] == "$" { sigma } else { in_index(toks[2], no)? };
                let emit = kv(toks[4], "emit", no)?;
                let chunk = if emit == "-" {
                    Vec::new()
                } else {
                    emit.split(',').map(|nm| out_index(nm, no)).collect::<Result<Vec<_>, _>>()?
                };
                let nx = num(toks[5], no)?;
                if s >= n || nx >= n {
                    return Err(mal(no, "edge state out of range".to_string()));
                }
                ledges[s][x] = Some((chunk, nx));
            }
            other => return Err(mal(no, format!("unexpected directive {other}"))),
        }
    }
    let delta_states = delta_states.ok_or_else(|| mal(0, "missing delta-slave section".to_string()))?;
    let lambda_states = lambda_states.ok_or_else(|| mal(0, "missing lambda-slave section".to_string()))?;
    let unwrap_all = |v: Vec<Option<usize>>, what: &str| -> Result<Vec<usize>, SstParseError> {
        v.into_iter()
            .enumerate()
            .map(|(i, x)| x.ok_or_else(|| mal(0, format!("missing {what} for {i}"))))
            .collect()
    };
    let trans = dtrans
        .into_iter()
        .enumerate()
        .map(|(s, row)| {
            row.into_iter()
                .enumerate()
                .map(|(a, x)| x.ok_or_else(|| mal(0, format!("missing dtrans {s} on letter {a}"))))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let edges = ledges
        .into_iter()
        .enumerate()
        .map(|(s, row)| {
            row.into_iter()
                .enumerate()
                .map(|(x, e)| e.ok_or_else(|| mal(0, format!("missing edge {s} on symbol {x}"))))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SstMachine::Succinct(SuccinctTransducer {
        d,
        initial,
        master_names,
        input_names,
        output_names,
        delta: TransitionSlave {
            n_states: delta_states,
            init_map: unwrap_all(dinit, "dinit")?,
            trans,
            out_map: unwrap_all(dout, "dout")?,
        },
        lambda: OutputSlave {
            n_states: lambda_states,
            init_map: unwrap_all(linit, "linit")?,
            edges,
        },
    }))
}

/// DOT rendering of a Mealy machine; edges are labeled `input/output`.
pub fn mealy_dot(m: &MealyStrategy) -> String {
    let mut out = String::from("digraph mealy {\n  rankdir=LR;\n  init [shape=point];\n");
    for (s, name) in m.state_names.iter().enumerate() {
        out.push_str(&format!("  s{s} [label=\"{name}\"];\n"));
    }
    out.push_str(&format!("  init -> s{};\n", m.initial));
    for s in 0..m.n_states() {
        for a in 0..m.input_names.len() {
            out.push_str(&format!(
                "  s{s} -> s{} [label=\"{}/{}\"];\n",
                m.transition[s][a], m.input_names[a], m.output_names[m.output[s][a]]
            ));
        }
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of a succinct transducer: one cluster per machine, dashed
/// arrows for the init and readout maps between masters and slaves.
pub fn succinct_dot(t: &SuccinctTransducer) -> String {
    let mut out = String::from("digraph succinct {\n  rankdir=LR;\n");
    out.push_str("  subgraph cluster_master {\n    label=\"master\";\n");
    for (q, name) in t.master_names.iter().enumerate() {
        let shape = if q == t.initial { "doublecircle" } else { "circle" };
        out.push_str(&format!("    m{q} [label=\"{name}\", shape={shape}];\n"));
    }
    out.push_str("  }\n  subgraph cluster_delta {\n    label=\"transition slave\";\n");
    for s in 0..t.delta.n_states {
        out.push_str(&format!("    d{s} [label=\"{s}\", shape=box];\n"));
    }
    for (s, row) in t.delta.trans.iter().enumerate() {
        for (a, nx) in row.iter().enumerate() {
            out.push_str(&format!("    d{s} -> d{nx} [label=\"{}\"];\n", t.input_names[a]));
        }
    }
    out.push_str("  }\n  subgraph cluster_lambda {\n    label=\"output slave\";\n");
    for s in 0..t.lambda.n_states {
        out.push_str(&format!("    l{s} [label=\"{s}\", shape=box];\n"));
    }
    for (s, row) in t.lambda.edges.iter().enumerate() {
        for (x, (chunk, nx)) in row.iter().enumerate() {
            let sym = if x < t.input_names.len() { t.input_names[x].as_str() } else { "$" };
            let emit = if chunk.is_empty() {
                "-".to_string()
            } else {
                chunk.iter().map(|&o| t.output_names[o].clone()).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!("    l{s} -> l{nx} [label=\"{sym}/{emit}\"];\n"));
        }
    }
    out.push_str("  }\n");
    for (q, s) in t.delta.init_map.iter().enumerate() {
        out.push_str(&format!("  m{q} -> d{s} [style=dashed];\n"));
    }
    for (s, q) in t.delta.out_map.iter().enumerate() {
        out.push_str(&format!("  d{s} -> m{q} [style=dashed, color=gray];\n"));
    }
    for (q, s) in t.lambda.init_map.iter().enumerate() {
        out.push_str(&format!("  m{q} -> l{s} [style=dashed];\n"));
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of an explicit transducer's master automaton, using the
/// block transitions materialized so far.
pub fn block_dot(t: &ExplicitBlockTransducer) -> String {
    let mut out = String::from("digraph block {\n  rankdir=LR;\n  init [shape=point];\n");
    for (q, name) in t.master_names.iter().enumerate() {
        out.push_str(&format!("  m{q} [label=\"{name}\"];\n"));
    }
    out.push_str(&format!("  init -> m{};\n", t.initial));
    let (dtab, _) = t.snapshot_tables();
    for ((p, b), nx) in dtab {
        let label =
            b.iter().map(|&a| t.input_names[a].clone()).collect::<Vec<_>>().join(",");
        out.push_str(&format!("  m{p} -> m{nx} [label=\"{label}\"];\n"));
    }
    out.push_str("}\n");
    out
}
