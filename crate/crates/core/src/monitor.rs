//! Monitors: finite memories that aggregate finite run pieces.
//!
//! Acceptance of an infinite run depends on the whole run, but for parity and
//! Muller conditions it can be recovered from per-piece aggregates: the
//! maximal source color of each piece, or the set of source states of each
//! piece. A monitor packages such an aggregation as a memory set with an
//! update function folded over the transitions of a piece, starting from a
//! distinguished empty memory. The product of an automaton with a monitor
//! runs both in lockstep, so that the memory component of the product state
//! is always the aggregate of the piece read since the memory was last reset.
//!
//! A monitor is a strong aggregation when acceptance of every run equals the
//! verdict of an aggregated condition on the sequence of piece aggregates,
//! for every decomposition into pieces. The two stock monitors built here
//! (maximal source color for parity, source-state set for Muller) are strong;
//! [`check_strong_aggregation_on_lassos`] probes the property empirically on
//! random ultimately periodic runs, which is how the deliberately broken
//! constant monitor used in the tests is caught.

use std::collections::{BTreeSet, HashMap};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::automata::{
    lasso_accepts, unroll_run_lasso, Acceptance, Lasso, LetterPair, OmegaAutomaton,
    RunStep,
};

/// Memory element of a monitor. `Bottom` is the distinguished empty memory;
/// update never returns it, so inside a product it marks exactly the states
/// where no transition has been aggregated yet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MemoryElem {
    Bottom,
    /// Maximal source color seen so far (parity monitor).
    Color(u32),
    /// Accumulated source states of the current piece (Muller monitor).
    Set(BTreeSet<usize>),
}

impl std::fmt::Display for MemoryElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MemoryElem::Bottom => write!(f, "_"),
            MemoryElem::Color(c) => write!(f, "{c}"),
            MemoryElem::Set(s) => {
                write!(f, "{{")?;
                for (i, q) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{q}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Whether the aggregated condition fully captures acceptance (strong) or
/// only suffices for one direction of the lookahead transfer (weak). The
/// pipeline uses the flag to label its guarantee; no stock monitor is weak.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strength {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum UpdRule {
    /// New memory is the maximum of the old one and the color of the
    /// transition source.
    MaxSourceColor(Vec<u32>),
    /// New memory is the old set extended by the transition source.
    AccumulateSources,
    /// Constant function, deliberately forgetful; only used to exercise the
    /// aggregation checker.
    Constant(u32),
}

/// Finite memory with a total update function over the transitions of one
/// fixed automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monitor {
    /// The memory set in canonical order (without `Bottom`).
    pub memory: Vec<MemoryElem>,
    pub strength: Strength,
    rule: UpdRule,
}

impl Monitor {
    /// Apply the update function to one transition.
    pub fn update(&self, m: &MemoryElem, step: &RunStep) -> MemoryElem {
        match &self.rule {
            UpdRule::MaxSourceColor(colors) => {
                let c = colors[step.src];
                match m {
                    MemoryElem::Bottom => MemoryElem::Color(c),
                    MemoryElem::Color(old) => MemoryElem::Color(c.max(*old)),
                    MemoryElem::Set(_) => panic!("color monitor applied to a set memory"),
                }
            }
            UpdRule::AccumulateSources => match m {
                MemoryElem::Bottom => MemoryElem::Set(BTreeSet::from([step.src])),
                MemoryElem::Set(s) => {
                    let mut s = s.clone();
                    s.insert(step.src);
                    MemoryElem::Set(s)
                }
                MemoryElem::Color(_) => panic!("set monitor applied to a color memory"),
            },
            UpdRule::Constant(c) => MemoryElem::Color(*c),
        }
    }

    /// Number of memory elements including `Bottom`.
    pub fn memory_size_with_bottom(&self) -> usize {
        self.memory.len() + 1
    }
}

/// Closed-form acceptance over sequences of memory elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregatedCondition {
    /// The maximal color occurring infinitely often is even. Pairs with the
    /// parity monitor.
    LimsupEven,
    /// The union of the sets occurring infinitely often is a member of the
    /// family. Pairs with the Muller monitor.
    InfUnionInFamily(Vec<BTreeSet<usize>>),
}

/// Error of the monitor constructors.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MonitorError {
    #[error("monitor requires {expected} acceptance, automaton has {got}")]
    WrongAcceptance { expected: &'static str, got: &'static str },
}

/// Monitor tracking the maximal source color of a piece, together with the
/// matching condition: a run is accepted exactly if the largest color among
/// the piece aggregates seen infinitely often is even.
pub fn parity_monitor(
    aut: &OmegaAutomaton,
) -> Result<(Monitor, AggregatedCondition), MonitorError> {
    let colors = match &aut.acceptance {
        Acceptance::Parity { colors } => colors.clone(),
        other => {
            return Err(MonitorError::WrongAcceptance { expected: "parity", got: other.kind() })
        }
    };
    let mut present: Vec<u32> = colors.clone();
    present.sort_unstable();
    present.dedup();
    Ok((
        Monitor {
            memory: present.into_iter().map(MemoryElem::Color).collect(),
            strength: Strength::Strong,
            rule: UpdRule::MaxSourceColor(colors),
        },
        AggregatedCondition::LimsupEven,
    ))
}

/// Monitor tracking the set of source states of a piece, together with the
/// matching condition on the union of the sets seen infinitely often.
///
/// The memory holds only the source-state sets of actual chained run pieces,
/// enumerated by a fixpoint over (set, end state) pairs; the full power set
/// would be both prohibitive and unreachable.
pub fn muller_monitor(
    aut: &OmegaAutomaton,
) -> Result<(Monitor, AggregatedCondition), MonitorError> {
    let family = match &aut.acceptance {
        Acceptance::Muller { family } => family.clone(),
        other => {
            return Err(MonitorError::WrongAcceptance { expected: "muller", got: other.kind() })
        }
    };
    let mut seen: BTreeSet<(BTreeSet<usize>, usize)> = BTreeSet::new();
    let mut queue: Vec<(BTreeSet<usize>, usize)> = Vec::new();
    for q in 0..aut.n_states() {
        for (a, b) in aut.alphabet.pairs() {
            let item = (BTreeSet::from([q]), aut.step(q, (a, b)));
            if seen.insert(item.clone()) {
                queue.push(item);
            }
        }
    }
    while let Some((set, q)) = queue.pop() {
        for (a, b) in aut.alphabet.pairs() {
            let mut next = set.clone();
            next.insert(q);
            let item = (next, aut.step(q, (a, b)));
            if seen.insert(item.clone()) {
                queue.push(item);
            }
        }
    }
    let sets: BTreeSet<BTreeSet<usize>> = seen.into_iter().map(|(s, _)| s).collect();
    Ok((
        Monitor {
            memory: sets.into_iter().map(MemoryElem::Set).collect(),
            strength: Strength::Strong,
            rule: UpdRule::AccumulateSources,
        },
        AggregatedCondition::InfUnionInFamily(family),
    ))
}

/// Monitor that forgets everything: every update returns color 0. Its
/// claimed strength is a lie, which is exactly what the aggregation checker
/// is expected to expose.
pub fn broken_constant_monitor() -> (Monitor, AggregatedCondition) {
    (
        Monitor {
            memory: vec![MemoryElem::Color(0)],
            strength: Strength::Strong,
            rule: UpdRule::Constant(0),
        },
        AggregatedCondition::LimsupEven,
    )
}

/// Fold the update function over a finite run, starting from `Bottom`.
pub fn aggregate_run(monitor: &Monitor, run: &crate::automata::FiniteRun) -> MemoryElem {
    let mut m = MemoryElem::Bottom;
    for step in &run.steps {
        m = monitor.update(&m, step);
    }
    m
}

/// Verdict of an aggregated condition on an ultimately periodic memory
/// sequence. Only the cycle matters: the elements occurring infinitely often
/// are exactly those of the cycle.
pub fn condition_accepts(cond: &AggregatedCondition, cycle: &[MemoryElem]) -> bool {
    assert!(!cycle.is_empty(), "memory lasso needs a non-empty cycle");
    match cond {
        AggregatedCondition::LimsupEven => {
            let top = cycle
                .iter()
                .map(|m| match m {
                    MemoryElem::Color(c) => *c,
                    other => panic!("limsup condition on non-color memory {other:?}"),
                })
                .max()
                .unwrap();
            top % 2 == 0
        }
        AggregatedCondition::InfUnionInFamily(family) => {
            let mut union = BTreeSet::new();
            for m in cycle {
                match m {
                    MemoryElem::Set(s) => union.extend(s.iter().copied()),
                    other => panic!("inf-union condition on non-set memory {other:?}"),
                }
            }
            family.contains(&union)
        }
    }
}

/// Product of an automaton with a monitor. States are pairs of an automaton
/// state and a memory element; reading a letter advances both components.
/// Only states reachable from the initial pair are materialised.
#[derive(Debug, Clone)]
pub struct MonitoredProduct {
    pub automaton: OmegaAutomaton,
    pub monitor: Monitor,
    /// Reachable product states in search order; index 0 is the initial
    /// state, the only one whose memory is `Bottom`.
    pub states: Vec<(usize, MemoryElem)>,
    /// `transitions[s][a][b]` indexes into `states`.
    pub transitions: Vec<Vec<Vec<usize>>>,
    pub initial: usize,
    /// Size of the unpruned state space `|Q| * |memory + 1|`.
    pub full_state_count: usize,
    index: HashMap<(usize, MemoryElem), usize>,
}

impl MonitoredProduct {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, q: usize, m: &MemoryElem) -> Option<usize> {
        self.index.get(&(q, m.clone())).copied()
    }

    /// Number of product states dropped by reachability pruning.
    pub fn pruned_away(&self) -> usize {
        self.full_state_count - self.states.len()
    }

    /// One product step on a raw pair, independent of reachability. Summary
    /// computations start pieces from `(q, Bottom)` for arbitrary `q`, so
    /// they cannot rely on the materialised state table.
    pub fn pair_step(&self, q: usize, m: &MemoryElem, letter: LetterPair) -> (usize, MemoryElem) {
        let dst = self.automaton.step(q, letter);
        let step = RunStep { src: q, letter, dst };
        (dst, self.monitor.update(m, &step))
    }
}

/// Build the monitored product, pruned to the states reachable from the
/// initial pair.
pub fn monitored_product(aut: &OmegaAutomaton, monitor: &Monitor) -> MonitoredProduct {
    let n_in = aut.alphabet.n_inputs();
    let n_out = aut.alphabet.n_outputs();
    let mut states: Vec<(usize, MemoryElem)> = vec![(aut.initial, MemoryElem::Bottom)];
    let mut index: HashMap<(usize, MemoryElem), usize> = HashMap::new();
    index.insert(states[0].clone(), 0);
    let mut transitions: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (q, m) = states[i].clone();
        let mut per_state = Vec::with_capacity(n_in);
        for a in 0..n_in {
            let mut per_in = Vec::with_capacity(n_out);
            for b in 0..n_out {
                let dst = aut.step(q, (a, b));
                let step = RunStep { src: q, letter: (a, b), dst };
                let nm = monitor.update(&m, &step);
                debug_assert!(nm != MemoryElem::Bottom, "update must never return Bottom");
                let key = (dst, nm);
                let target = match index.get(&key) {
                    Some(&t) => t,
                    None => {
                        let t = states.len();
                        index.insert(key.clone(), t);
                        states.push(key);
                        t
                    }
                };
                per_in.push(target);
            }
            per_state.push(per_in);
        }
        transitions.push(per_state);
        i += 1;
    }
    MonitoredProduct {
        automaton: aut.clone(),
        monitor: monitor.clone(),
        full_state_count: aut.n_states() * (monitor.memory.len() + 1),
        states,
        transitions,
        initial: 0,
        index,
    }
}

/// Normal form of an ultimately periodic sequence given as stem and cycle:
/// the cycle is reduced to its primitive period and the stem is shortened as
/// long as its last element equals the last element of the (rotated) cycle.
/// Two stem-cycle presentations denote the same infinite sequence exactly if
/// their normal forms are equal.
pub fn lasso_normal_form<T: Clone + PartialEq>(stem: &[T], cycle: &[T]) -> (Vec<T>, Vec<T>) {
    assert!(!cycle.is_empty());
    let mut cycle: Vec<T> = cycle.to_vec();
    // Primitive period: smallest divisor length that tiles the cycle.
    let n = cycle.len();
    for p in 1..=n {
        if n % p == 0 && (0..n).all(|i| cycle[i] == cycle[i % p]) {
            cycle.truncate(p);
            break;
        }
    }
    let mut stem: Vec<T> = stem.to_vec();
    while let Some(last) = stem.last() {
        if *last == *cycle.last().unwrap() {
            let tail = cycle.pop().unwrap();
            cycle.insert(0, tail);
            stem.pop();
        } else {
            break;
        }
    }
    (stem, cycle)
}

/// Ultimately periodic run with a piece decomposition aligned to the period,
/// as produced by the aggregation checker.
#[derive(Debug, Clone)]
pub struct DecomposedRunLasso {
    /// The word the automaton runs on.
    pub word: Lasso,
    /// Piece lengths of the unrolled run stem and run cycle.
    pub stem_piece_lengths: Vec<usize>,
    pub cycle_piece_lengths: Vec<usize>,
    /// Aggregates of the pieces, one per piece.
    pub stem_aggregates: Vec<MemoryElem>,
    pub cycle_aggregates: Vec<MemoryElem>,
    /// Acceptance of the run.
    pub accepted: bool,
}

/// Pair of decomposed runs with equal aggregation sequences but different
/// acceptance, refuting strong aggregation.
#[derive(Debug, Clone)]
pub struct AggregationCounterexample {
    pub accepted_run: DecomposedRunLasso,
    pub rejected_run: DecomposedRunLasso,
}

/// Probe the strong-aggregation property on random ultimately periodic runs.
///
/// Each sample draws a random word lasso, unrolls its run until the cycle
/// entry state repeats (so the run itself is presented as a lasso), and cuts
/// the run into pieces of length at most `bound`, aligned to the period.
/// Samples are bucketed by the normal form of their aggregation lasso; two
/// samples in one bucket with different acceptance form a counterexample.
/// A returned counterexample is always a genuine violation, absence of one
/// is evidence, not proof.
pub fn check_strong_aggregation_on_lassos(
    aut: &OmegaAutomaton,
    monitor: &Monitor,
    bound: usize,
    samples: usize,
    seed: u64,
) -> Option<AggregationCounterexample> {
    assert!(bound >= 2, "piece bound must be at least 2");
    let mut rng = StdRng::seed_from_u64(seed);
    let mut buckets: HashMap<(Vec<MemoryElem>, Vec<MemoryElem>), DecomposedRunLasso> =
        HashMap::new();

    for _ in 0..samples {
        let stem_len = rng.gen_range(0..=2 * bound);
        let cycle_len = rng.gen_range(1..=2 * bound);
        let draw = |rng: &mut StdRng, len: usize| -> Vec<LetterPair> {
            (0..len)
                .map(|_| {
                    (
                        rng.gen_range(0..aut.alphabet.n_inputs()),
                        rng.gen_range(0..aut.alphabet.n_outputs()),
                    )
                })
                .collect()
        };
        let word = Lasso::new(draw(&mut rng, stem_len), draw(&mut rng, cycle_len));
        let (run_stem, run_cycle) = unroll_run_lasso(aut, &word);

        let cut = |rng: &mut StdRng, steps: &[RunStep]| -> (Vec<usize>, Vec<MemoryElem>) {
            let mut lengths = Vec::new();
            let mut aggs = Vec::new();
            let mut i = 0;
            while i < steps.len() {
                let len = rng.gen_range(1..=bound.min(steps.len() - i));
                let mut m = MemoryElem::Bottom;
                for step in &steps[i..i + len] {
                    m = monitor.update(&m, step);
                }
                lengths.push(len);
                aggs.push(m);
                i += len;
            }
            (lengths, aggs)
        };
        let (stem_piece_lengths, stem_aggregates) = cut(&mut rng, &run_stem);
        let (cycle_piece_lengths, cycle_aggregates) = cut(&mut rng, &run_cycle);

        let accepted = lasso_accepts(aut, &word);
        let sample = DecomposedRunLasso {
            word,
            stem_piece_lengths,
            cycle_piece_lengths,
            stem_aggregates: stem_aggregates.clone(),
            cycle_aggregates: cycle_aggregates.clone(),
            accepted,
        };
        let key = lasso_normal_form(&stem_aggregates, &cycle_aggregates);
        match buckets.get(&key) {
            Some(prev) if prev.accepted != accepted => {
                let (acc, rej) = if accepted {
                    (sample, prev.clone())
                } else {
                    (prev.clone(), sample)
                };
                return Some(AggregationCounterexample { accepted_run: acc, rejected_run: rej });
            }
            Some(_) => {}
            None => {
                buckets.insert(key, sample);
            }
        }
    }
    None
}
