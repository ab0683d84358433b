//! Deterministic complete omega-automata over a product alphabet.
//!
//! Words are infinite sequences of letter pairs: Player I contributes the
//! input component, Player O the output component. An automaton reads one
//! pair per step, so a joint play of the two players induces exactly one run.
//! Four acceptance conditions are supported: safety (stay inside a set of
//! states forever), reachability (visit the set at least once), parity
//! (the maximal color seen infinitely often is even, colors sit on states and
//! a transition counts with the color of its source), and Muller (the set of
//! states seen infinitely often belongs to a declared family).
//!
//! Besides the model itself this module provides the stock example families
//! used throughout the test suite and the command line tool, acceptance
//! checks for ultimately periodic words, normalization of safety and
//! reachability conditions into parity, and a line-oriented text format.
//!
//! # Text format
//!
//! ```text
//! # comment lines start with a hash
//! alphabet input 0 1
//! alphabet output 0 1
//! states ok rej
//! initial ok
//! acceptance safety
//! accepting ok
//! trans ok 0/0 ok
//! trans ok 0/1 rej
//! ...
//! ```
//!
//! `acceptance` is one of `safety`, `reachability`, `parity`, `muller`.
//! Safety and reachability declare their state set with a single `accepting`
//! line, parity uses one `color <state> <n>` line per state, and Muller uses
//! one `accset <state>...` line per member of the family. Every automaton
//! must declare exactly one `trans` line per state and letter pair; missing
//! or duplicate transitions are rejected, keeping automata total and
//! deterministic by construction.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

/// Letter pair as indices into the input and output alphabet tables.
pub type LetterPair = (usize, usize);

/// Ordered input and output alphabets of an automaton.
///
/// Declaration order is canonical: whenever an operation needs a
/// deterministic tie-break over letters (lexicographically smallest
/// completion, canonical successor enumeration) it uses the order of the
/// symbol tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductAlphabet {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl ProductAlphabet {
    pub fn new(inputs: Vec<String>, outputs: Vec<String>) -> Self {
        ProductAlphabet { inputs, outputs }
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_index(&self, sym: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s == sym)
    }

    pub fn output_index(&self, sym: &str) -> Option<usize> {
        self.outputs.iter().position(|s| s == sym)
    }

    /// All letter pairs in canonical order (input major, output minor).
    pub fn pairs(&self) -> impl Iterator<Item = LetterPair> + '_ {
        let n_out = self.outputs.len();
        (0..self.inputs.len()).flat_map(move |a| (0..n_out).map(move |b| (a, b)))
    }
}

/// Acceptance condition of an automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Acceptance {
    /// Every state of the run must lie in the set.
    Safety { accepting: BTreeSet<usize> },
    /// Some state of the run must lie in the set.
    Reachability { accepting: BTreeSet<usize> },
    /// The maximal color occurring infinitely often must be even.
    /// `colors[q]` is the color of state `q`; a transition counts with the
    /// color of its source state.
    Parity { colors: Vec<u32> },
    /// The set of states occurring infinitely often must be a member of the
    /// family.
    Muller { family: Vec<BTreeSet<usize>> },
}

impl Acceptance {
    pub fn kind(&self) -> &'static str {
        match self {
            Acceptance::Safety { .. } => "safety",
            Acceptance::Reachability { .. } => "reachability",
            Acceptance::Parity { .. } => "parity",
            Acceptance::Muller { .. } => "muller",
        }
    }
}

/// Deterministic complete omega-automaton over a product alphabet.
///
/// `transitions[q][a][b]` is the successor of state `q` under the letter pair
/// `(a, b)`. The table is total by construction, so every pair of input and
/// output streams induces exactly one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaAutomaton {
    pub state_names: Vec<String>,
    pub alphabet: ProductAlphabet,
    pub initial: usize,
    pub transitions: Vec<Vec<Vec<usize>>>,
    pub acceptance: Acceptance,
}

impl OmegaAutomaton {
    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    /// Successor of `q` under the letter pair.
    pub fn step(&self, q: usize, letter: LetterPair) -> usize {
        self.transitions[q][letter.0][letter.1]
    }

    /// States reachable from the initial state, in search order.
    pub fn reachable_states(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_states()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut i = 0;
        while i < order.len() {
            let q = order[i];
            i += 1;
            for (a, b) in self.alphabet.pairs() {
                let dst = self.step(q, (a, b));
                if !seen[dst] {
                    seen[dst] = true;
                    order.push(dst);
                }
            }
        }
        order
    }

    /// Copy of the automaton restricted to states reachable from the initial
    /// state. The language is unchanged; state indices are renumbered in
    /// search order.
    pub fn pruned_to_reachable(&self) -> OmegaAutomaton {
        let order = self.reachable_states();
        let mut new_index = vec![usize::MAX; self.n_states()];
        for (i, &q) in order.iter().enumerate() {
            new_index[q] = i;
        }
        let remap_set = |set: &BTreeSet<usize>| {
            set.iter()
                .filter(|&&q| new_index[q] != usize::MAX)
                .map(|&q| new_index[q])
                .collect::<BTreeSet<usize>>()
        };
        let acceptance = match &self.acceptance {
            Acceptance::Safety { accepting } => Acceptance::Safety { accepting: remap_set(accepting) },
            Acceptance::Reachability { accepting } => {
                Acceptance::Reachability { accepting: remap_set(accepting) }
            }
            Acceptance::Parity { colors } => {
                Acceptance::Parity { colors: order.iter().map(|&q| colors[q]).collect() }
            }
            Acceptance::Muller { family } => {
                // A family member mentioning an unreachable state can never be
                // the infinity set of a run, so it is dropped.
                Acceptance::Muller {
                    family: family
                        .iter()
                        .filter(|set| set.iter().all(|&q| new_index[q] != usize::MAX))
                        .map(|set| remap_set(set))
                        .collect(),
                }
            }
        };
        OmegaAutomaton {
            state_names: order.iter().map(|&q| self.state_names[q].clone()).collect(),
            alphabet: self.alphabet.clone(),
            initial: 0,
            transitions: order
                .iter()
                .map(|&q| {
                    (0..self.alphabet.n_inputs())
                        .map(|a| {
                            (0..self.alphabet.n_outputs())
                                .map(|b| new_index[self.transitions[q][a][b]])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            acceptance,
        }
    }

    /// Graphviz rendering with the acceptance annotation in the node labels.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n  rankdir=LR;\n  node [shape=circle];\n");
        for (q, name) in self.state_names.iter().enumerate() {
            let extra = match &self.acceptance {
                Acceptance::Safety { accepting } | Acceptance::Reachability { accepting } => {
                    if accepting.contains(&q) {
                        " peripheries=2".to_string()
                    } else {
                        String::new()
                    }
                }
                Acceptance::Parity { colors } => format!(" xlabel=\"{}\"", colors[q]),
                Acceptance::Muller { .. } => String::new(),
            };
            let _ = writeln!(out, "  q{q} [label=\"{name}\"{extra}];");
        }
        let _ = writeln!(out, "  init [shape=point]; init -> q{};", self.initial);
        // Group parallel edges into one arrow per (src, dst) pair to keep the
        // rendering readable.
        for q in 0..self.n_states() {
            let mut by_dst: Vec<(usize, Vec<String>)> = Vec::new();
            for (a, b) in self.alphabet.pairs() {
                let dst = self.step(q, (a, b));
                let lab = format!("{}/{}", self.alphabet.inputs[a], self.alphabet.outputs[b]);
                match by_dst.iter_mut().find(|(d, _)| *d == dst) {
                    Some((_, labs)) => labs.push(lab),
                    None => by_dst.push((dst, vec![lab])),
                }
            }
            for (dst, labs) in by_dst {
                let _ = writeln!(out, "  q{q} -> q{dst} [label=\"{}\"];", labs.join("\\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// One step of a run: source state, letter pair, target state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStep {
    pub src: usize,
    pub letter: LetterPair,
    pub dst: usize,
}

/// Finite run of an automaton, stored as chained steps: the target of each
/// step is the source of the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteRun {
    pub steps: Vec<RunStep>,
}

impl FiniteRun {
    /// State the run ends in; `start` is returned for the empty run.
    pub fn end(&self, start: usize) -> usize {
        self.steps.last().map(|s| s.dst).unwrap_or(start)
    }

    /// Source states of the steps, in order.
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.src)
    }
}

/// Ultimately periodic word: `stem` followed by `cycle` repeated forever.
/// The cycle must be non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub stem: Vec<LetterPair>,
    pub cycle: Vec<LetterPair>,
}

impl Lasso {
    pub fn new(stem: Vec<LetterPair>, cycle: Vec<LetterPair>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be non-empty");
        Lasso { stem, cycle }
    }
}

/// Run of the automaton on a finite word of letter pairs from `start`.
pub fn run_word(aut: &OmegaAutomaton, start: usize, word: &[LetterPair]) -> FiniteRun {
    let mut steps = Vec::with_capacity(word.len());
    let mut q = start;
    for &letter in word {
        let dst = aut.step(q, letter);
        steps.push(RunStep { src: q, letter, dst });
        q = dst;
    }
    FiniteRun { steps }
}

/// Does the automaton accept the ultimately periodic word?
///
/// The unique run on the word is itself ultimately periodic. The check pumps
/// the cycle from the state reached after the stem until a cycle entry state
/// repeats; at most `|Q|` pumps are needed. The states visited between the
/// first and second occurrence of the repeating entry state are exactly the
/// states visited infinitely often, which settles the parity and Muller
/// conditions. Safety inspects every state on the run, reachability any.
pub fn lasso_accepts(aut: &OmegaAutomaton, lasso: &Lasso) -> bool {
    assert!(!lasso.cycle.is_empty(), "lasso cycle must be non-empty");
    let stem_run = run_word(aut, aut.initial, &lasso.stem);
    let mut prefix_states: Vec<usize> = vec![aut.initial];
    prefix_states.extend(stem_run.steps.iter().map(|s| s.dst));

    // Pump the cycle until an entry state repeats, remembering the states
    // visited during each pass.
    let mut entries: Vec<usize> = vec![*prefix_states.last().unwrap()];
    let mut pass_states: Vec<Vec<usize>> = Vec::new();
    let (first, last) = loop {
        let from = *entries.last().unwrap();
        let run = run_word(aut, from, &lasso.cycle);
        pass_states.push(run.sources().collect());
        let to = run.end(from);
        if let Some(i) = entries.iter().position(|&e| e == to) {
            entries.push(to);
            break (i, entries.len() - 1);
        }
        entries.push(to);
    };

    // States visited infinitely often: everything inside the repeating span
    // of passes.
    let infinitely_often: BTreeSet<usize> = pass_states[first..last]
        .iter()
        .flat_map(|pass| pass.iter().copied())
        .collect();
    match &aut.acceptance {
        Acceptance::Safety { accepting } => prefix_states
            .iter()
            .chain(pass_states.iter().flatten())
            .all(|q| accepting.contains(q)),
        Acceptance::Reachability { accepting } => prefix_states
            .iter()
            .chain(pass_states.iter().flatten())
            .any(|q| accepting.contains(q)),
        Acceptance::Parity { colors } => {
            let top = infinitely_often.iter().map(|&q| colors[q]).max().unwrap();
            top % 2 == 0
        }
        Acceptance::Muller { family } => family.contains(&infinitely_often),
    }
}

/// Unroll the run on an ultimately periodic word into a run lasso: a run
/// stem followed by a non-empty run cycle that returns to its own first
/// state. The cycle consists of whole passes over the word cycle, so the
/// decomposition is aligned with the word period.
pub fn unroll_run_lasso(aut: &OmegaAutomaton, lasso: &Lasso) -> (Vec<RunStep>, Vec<RunStep>) {
    assert!(!lasso.cycle.is_empty());
    let stem_run = run_word(aut, aut.initial, &lasso.stem);
    let mut entries = vec![stem_run.end(aut.initial)];
    let mut passes: Vec<Vec<RunStep>> = Vec::new();
    let (first, last) = loop {
        let from = *entries.last().unwrap();
        let pass = run_word(aut, from, &lasso.cycle);
        let to = pass.end(from);
        passes.push(pass.steps);
        if let Some(i) = entries.iter().position(|&e| e == to) {
            entries.push(to);
            break (i, entries.len() - 1);
        }
        entries.push(to);
    };
    let mut run_stem = stem_run.steps;
    for pass in &passes[..first] {
        run_stem.extend_from_slice(pass);
    }
    let mut run_cycle = Vec::new();
    for pass in &passes[first..last] {
        run_cycle.extend_from_slice(pass);
    }
    (run_stem, run_cycle)
}

/// Error of [`normalize_to_parity`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("Muller conditions have no equivalent parity coloring on the same state space")]
    MullerNotNormalizable,
}

/// Recast safety and reachability acceptance as a parity condition with an
/// equivalent language; parity automata pass through unchanged.
///
/// Safety: all non-accepting states collapse into a single absorbing sink,
/// since leaving the accepting set loses the run for good. The result has
/// one state per accepting state plus the sink, colors 0 on the accepting
/// part and 1 on the sink.
///
/// Reachability: each state is doubled with a sticky flag remembering
/// whether the accepting set has been visited. Unflagged states get color 1,
/// flagged states color 2, so a run is accepted exactly if the flag is
/// eventually set. The result has exactly twice the states of the input.
pub fn normalize_to_parity(aut: &OmegaAutomaton) -> Result<OmegaAutomaton, NormalizeError> {
    match &aut.acceptance {
        Acceptance::Parity { .. } => Ok(aut.clone()),
        Acceptance::Muller { .. } => Err(NormalizeError::MullerNotNormalizable),
        Acceptance::Safety { accepting } => {
            let kept: Vec<usize> = (0..aut.n_states()).filter(|q| accepting.contains(q)).collect();
            let mut new_index = vec![usize::MAX; aut.n_states()];
            for (i, &q) in kept.iter().enumerate() {
                new_index[q] = i;
            }
            let sink = kept.len();
            let mut state_names: Vec<String> = kept.iter().map(|&q| aut.state_names[q].clone()).collect();
            state_names.push("sink".to_string());
            let n_in = aut.alphabet.n_inputs();
            let n_out = aut.alphabet.n_outputs();
            let mut transitions = Vec::with_capacity(sink + 1);
            for &q in &kept {
                transitions.push(
                    (0..n_in)
                        .map(|a| {
                            (0..n_out)
                                .map(|b| {
                                    let dst = aut.transitions[q][a][b];
                                    if new_index[dst] == usize::MAX { sink } else { new_index[dst] }
                                })
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>(),
                );
            }
            transitions.push(vec![vec![sink; n_out]; n_in]);
            let mut colors = vec![0u32; sink];
            colors.push(1);
            let initial = if new_index[aut.initial] == usize::MAX { sink } else { new_index[aut.initial] };
            Ok(OmegaAutomaton {
                state_names,
                alphabet: aut.alphabet.clone(),
                initial,
                transitions,
                acceptance: Acceptance::Parity { colors },
            })
        }
        Acceptance::Reachability { accepting } => {
            // State (q, f) is encoded as q + f * n.
            let n = aut.n_states();
            let n_in = aut.alphabet.n_inputs();
            let n_out = aut.alphabet.n_outputs();
            let mut state_names = Vec::with_capacity(2 * n);
            for f in 0..2 {
                for q in 0..n {
                    state_names.push(format!("{}:{}", aut.state_names[q], f));
                }
            }
            let mut transitions = Vec::with_capacity(2 * n);
            for f in 0..2usize {
                for q in 0..n {
                    transitions.push(
                        (0..n_in)
                            .map(|a| {
                                (0..n_out)
                                    .map(|b| {
                                        let dst = aut.transitions[q][a][b];
                                        let nf = if f == 1 || accepting.contains(&dst) { 1 } else { 0 };
                                        dst + nf * n
                                    })
                                    .collect::<Vec<_>>()
                            })
                            .collect::<Vec<_>>(),
                    );
                }
            }
            let mut colors = vec![1u32; n];
            colors.extend(vec![2u32; n]);
            let initial = if accepting.contains(&aut.initial) { aut.initial + n } else { aut.initial };
            Ok(OmegaAutomaton {
                state_names,
                alphabet: aut.alphabet.clone(),
                initial,
                transitions,
                acceptance: Acceptance::Parity { colors },
            })
        }
    }
}

/// Stock example families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilySpec {
    /// Safety condition demanding that the output stream copies the input
    /// stream letter for letter, over the given symbol set.
    Copy { symbols: Vec<String> },
    /// Reachability condition over the alphabet `{1..n}` on both sides:
    /// Player O selects, with the first component of her first letter, an
    /// index `j`, and wins once the input stream contains a bad j-pair, two
    /// occurrences of `j` enclosing only letters smaller than `j`, after
    /// position zero.
    BadJPair { n: u32 },
    /// Variant of [`FamilySpec::BadJPair`] whose input letters additionally
    /// carry a bit vector of length `n` and whose output letters carry one
    /// bit that must echo the selected component of the current bit vector.
    BadJPairVec { n: u32 },
    /// Safety condition demanding that the first `k` output letters replay
    /// the first `k` input letters in reverse order, over the alphabet
    /// `{0, 1}`. `k` must be even and positive.
    Reversal { k: u32 },
}

/// Error of [`gen_family`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("bad parameter for family {family}: {reason}")]
    BadParameter { family: &'static str, reason: String },
}

/// Build a stock automaton.
pub fn gen_family(spec: &FamilySpec) -> Result<OmegaAutomaton, GenError> {
    match spec {
        FamilySpec::Copy { symbols } => gen_copy(symbols),
        FamilySpec::BadJPair { n } => gen_bad_j_pair(*n),
        FamilySpec::BadJPairVec { n } => gen_bad_j_pair_vec(*n),
        FamilySpec::Reversal { k } => gen_reversal(*k),
    }
}

fn gen_copy(symbols: &[String]) -> Result<OmegaAutomaton, GenError> {
    if symbols.is_empty() {
        return Err(GenError::BadParameter { family: "copy", reason: "symbol set must be non-empty".into() });
    }
    let mut uniq = symbols.to_vec();
    uniq.dedup();
    uniq.sort();
    uniq.dedup();
    if uniq.len() != symbols.len() {
        return Err(GenError::BadParameter { family: "copy", reason: "symbols must be distinct".into() });
    }
    let sigma = symbols.len();
    let ok = 0usize;
    let rej = 1usize;
    let transitions = (0..2)
        .map(|q| {
            (0..sigma)
                .map(|a| {
                    (0..sigma)
                        .map(|b| if q == ok && a == b { ok } else { rej })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(OmegaAutomaton {
        state_names: vec!["ok".into(), "rej".into()],
        alphabet: ProductAlphabet::new(symbols.to_vec(), symbols.to_vec()),
        initial: ok,
        transitions,
        acceptance: Acceptance::Safety { accepting: BTreeSet::from([ok]) },
    })
}

fn gen_bad_j_pair(n: u32) -> Result<OmegaAutomaton, GenError> {
    if n < 2 {
        return Err(GenError::BadParameter { family: "badjpair", reason: "n must be at least 2".into() });
    }
    let n = n as usize;
    let symbols: Vec<String> = (1..=n).map(|v| v.to_string()).collect();
    // State layout: init, then per gadget j a waiting and an armed state,
    // then the accepting and the rejecting sink. Letter index i carries the
    // value i + 1.
    let init = 0usize;
    let wait = |j: usize| 1 + 2 * (j - 1);
    let armed = |j: usize| 2 + 2 * (j - 1);
    let acc = 1 + 2 * n;
    let rej = 2 + 2 * n;
    let n_states = 3 + 2 * n;
    let mut state_names = vec!["init".to_string()];
    for j in 1..=n {
        state_names.push(format!("g{j}w"));
        state_names.push(format!("g{j}a"));
    }
    state_names.push("acc".into());
    state_names.push("rej".into());

    let mut transitions = vec![vec![vec![0usize; n]; n]; n_states];
    for a in 0..n {
        for b in 0..n {
            // The first output letter selects the gadget; the first input
            // letter is not inspected by any gadget.
            transitions[init][a][b] = wait(b + 1);
            let x = a + 1;
            for j in 1..=n {
                transitions[wait(j)][a][b] = if x == j { armed(j) } else { wait(j) };
                transitions[armed(j)][a][b] = if x == j {
                    acc
                } else if x < j {
                    armed(j)
                } else {
                    wait(j)
                };
            }
            transitions[acc][a][b] = acc;
            transitions[rej][a][b] = rej;
        }
    }
    Ok(OmegaAutomaton {
        state_names,
        alphabet: ProductAlphabet::new(symbols.clone(), symbols),
        initial: init,
        transitions,
        acceptance: Acceptance::Reachability { accepting: BTreeSet::from([acc]) },
    })
}

fn gen_bad_j_pair_vec(n: u32) -> Result<OmegaAutomaton, GenError> {
    if n < 2 {
        return Err(GenError::BadParameter { family: "badjpair_vec", reason: "n must be at least 2".into() });
    }
    let n = n as usize;
    // Input letters are pairs (value, bit vector), output letters pairs
    // (value, bit), rendered as "v:bits" and "v:b". Enumeration is value
    // major, bits as ascending binary numbers with the component for j = 1
    // leftmost.
    let mut inputs = Vec::with_capacity(n << n);
    for v in 1..=n {
        for bits in 0..(1usize << n) {
            let s: String = (0..n).map(|j| if bits >> (n - 1 - j) & 1 == 1 { '1' } else { '0' }).collect();
            inputs.push(format!("{v}:{s}"));
        }
    }
    let mut outputs = Vec::with_capacity(2 * n);
    for v in 1..=n {
        for b in 0..2 {
            outputs.push(format!("{v}:{b}"));
        }
    }
    let in_value = |a: usize| a / (1 << n) + 1;
    let in_bit = |a: usize, j: usize| a >> (n - j) & 1; // j is 1-based
    let out_value = |b: usize| b / 2 + 1;
    let out_bit = |b: usize| b % 2;

    let init = 0usize;
    let wait = |j: usize| 1 + 2 * (j - 1);
    let armed = |j: usize| 2 + 2 * (j - 1);
    let acc = 1 + 2 * n;
    let rej = 2 + 2 * n;
    let n_states = 3 + 2 * n;
    let mut state_names = vec!["init".to_string()];
    for j in 1..=n {
        state_names.push(format!("g{j}w"));
        state_names.push(format!("g{j}a"));
    }
    state_names.push("acc".into());
    state_names.push("rej".into());

    let n_in = inputs.len();
    let n_out = outputs.len();
    let mut transitions = vec![vec![vec![0usize; n_out]; n_in]; n_states];
    for a in 0..n_in {
        for b in 0..n_out {
            let j_sel = out_value(b);
            // Selecting gadget j demands that the output bit echoes the j-th
            // component of the current input vector; so does every later
            // step inside the gadget, where the value component of the
            // output is ignored.
            transitions[init][a][b] =
                if out_bit(b) == in_bit(a, j_sel) { wait(j_sel) } else { rej };
            let x = in_value(a);
            for j in 1..=n {
                let (w_dst, a_dst) = if out_bit(b) == in_bit(a, j) {
                    (
                        if x == j { armed(j) } else { wait(j) },
                        if x == j {
                            acc
                        } else if x < j {
                            armed(j)
                        } else {
                            wait(j)
                        },
                    )
                } else {
                    (rej, rej)
                };
                transitions[wait(j)][a][b] = w_dst;
                transitions[armed(j)][a][b] = a_dst;
            }
            transitions[acc][a][b] = acc;
            transitions[rej][a][b] = rej;
        }
    }
    Ok(OmegaAutomaton {
        state_names,
        alphabet: ProductAlphabet::new(inputs, outputs),
        initial: init,
        transitions,
        acceptance: Acceptance::Reachability { accepting: BTreeSet::from([acc]) },
    })
}

fn gen_reversal(k: u32) -> Result<OmegaAutomaton, GenError> {
    if k == 0 || k % 2 != 0 {
        return Err(GenError::BadParameter { family: "reversal", reason: "k must be even and positive".into() });
    }
    let k = k as usize;
    let half = k / 2;
    // The first k letters satisfy the reversal demand exactly if the pair
    // read at position k - 1 - i is the swap of the pair read at position i.
    // A stack of at most k/2 letter pairs checks this: the first half is
    // pushed, the second half pops in reverse order. States carry the stack
    // and a phase flag; all deviations fall into a rejecting sink and the
    // empty popping stack accepts everything that follows.
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Key {
        Up(Vec<(usize, usize)>),
        Down(Vec<(usize, usize)>),
        Rej,
    }
    let mut keys: Vec<Key> = Vec::new();
    for len in 0..=half {
        let mut stacks = vec![Vec::new()];
        for _ in 0..len {
            stacks = stacks
                .into_iter()
                .flat_map(|s: Vec<(usize, usize)>| {
                    (0..2usize).flat_map(move |a| {
                        let s = s.clone();
                        (0..2usize).map(move |b| {
                            let mut t = s.clone();
                            t.push((a, b));
                            t
                        })
                    })
                })
                .collect();
        }
        for s in stacks {
            keys.push(Key::Up(s));
        }
    }
    for len in 0..half {
        let mut stacks = vec![Vec::new()];
        for _ in 0..len {
            stacks = stacks
                .into_iter()
                .flat_map(|s: Vec<(usize, usize)>| {
                    (0..2usize).flat_map(move |a| {
                        let s = s.clone();
                        (0..2usize).map(move |b| {
                            let mut t = s.clone();
                            t.push((a, b));
                            t
                        })
                    })
                })
                .collect();
        }
        for s in stacks {
            keys.push(Key::Down(s));
        }
    }
    keys.push(Key::Rej);
    let index_of = |key: &Key| keys.iter().position(|k| k == key).unwrap();

    let name_of = |key: &Key| -> String {
        let render = |s: &[(usize, usize)]| {
            s.iter().map(|&(a, b)| format!("{a}{b}")).collect::<Vec<_>>().join(".")
        };
        match key {
            Key::Up(s) if s.is_empty() => "u".into(),
            Key::Up(s) => format!("u:{}", render(s)),
            Key::Down(s) if s.is_empty() => "d".into(),
            Key::Down(s) => format!("d:{}", render(s)),
            Key::Rej => "rej".into(),
        }
    };

    let n_states = keys.len();
    let mut transitions = vec![vec![vec![0usize; 2]; 2]; n_states];
    for (q, key) in keys.iter().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                let dst = match key {
                    Key::Up(s) if s.len() < half => {
                        let mut t = s.clone();
                        t.push((a, b));
                        Key::Up(t)
                    }
                    Key::Up(s) => {
                        let &(sa, sb) = s.last().unwrap();
                        if (a, b) == (sb, sa) {
                            Key::Down(s[..s.len() - 1].to_vec())
                        } else {
                            Key::Rej
                        }
                    }
                    Key::Down(s) if s.is_empty() => Key::Down(Vec::new()),
                    Key::Down(s) => {
                        let &(sa, sb) = s.last().unwrap();
                        if (a, b) == (sb, sa) {
                            Key::Down(s[..s.len() - 1].to_vec())
                        } else {
                            Key::Rej
                        }
                    }
                    Key::Rej => Key::Rej,
                };
                transitions[q][a][b] = index_of(&dst);
            }
        }
    }
    let accepting: BTreeSet<usize> = (0..n_states - 1).collect();
    Ok(OmegaAutomaton {
        state_names: keys.iter().map(name_of).collect(),
        alphabet: ProductAlphabet::new(vec!["0".into(), "1".into()], vec!["0".into(), "1".into()]),
        initial: 0,
        transitions,
        acceptance: Acceptance::Safety { accepting },
    })
}

/// Does the word over `{1..n}` (1-based values) contain a bad j-pair, two
/// occurrences of `j` with only values smaller than `j` in between?
pub fn has_bad_j_pair(word: &[u32], j: u32) -> bool {
    let mut armed = false;
    for &x in word {
        if x == j {
            if armed {
                return true;
            }
            armed = true;
        } else if x > j {
            armed = false;
        }
    }
    false
}

/// The longest word over `{1..n}` without any bad j-pair: defined by
/// doubling, `x_1 = 1` and `x_n = x_{n-1} n x_{n-1}`, of length `2^n - 1`.
pub fn xn_word(n: u32) -> Vec<u32> {
    assert!(n >= 1, "xn_word requires n >= 1");
    let mut w = vec![1u32];
    for v in 2..=n {
        let mut next = w.clone();
        next.push(v);
        next.extend_from_slice(&w);
        w = next;
    }
    w
}

/// Random parity automaton for randomised cross-checks: uniformly random
/// total transition table and colors, deterministic in the seed.
pub fn random_parity_automaton(
    seed: u64,
    n_states: usize,
    n_inputs: usize,
    n_outputs: usize,
    max_color: u32,
) -> OmegaAutomaton {
    assert!(n_states > 0 && n_inputs > 0 && n_outputs > 0);
    let mut rng = StdRng::seed_from_u64(seed);
    let transitions = (0..n_states)
        .map(|_| {
            (0..n_inputs)
                .map(|_| (0..n_outputs).map(|_| rng.gen_range(0..n_states)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
        .collect();
    let colors = (0..n_states).map(|_| rng.gen_range(0..=max_color)).collect();
    OmegaAutomaton {
        state_names: (0..n_states).map(|q| format!("q{q}")).collect(),
        alphabet: ProductAlphabet::new(
            (0..n_inputs).map(|a| a.to_string()).collect(),
            (0..n_outputs).map(|b| b.to_string()).collect(),
        ),
        initial: 0,
        transitions,
        acceptance: Acceptance::Parity { colors },
    }
}

/// Random lasso over an alphabet, deterministic in the seed. Stem length is
/// drawn from `0..=max_stem`, cycle length from `1..=max_cycle`.
pub fn random_lasso(
    seed: u64,
    alphabet: &ProductAlphabet,
    max_stem: usize,
    max_cycle: usize,
) -> Lasso {
    let mut rng = StdRng::seed_from_u64(seed);
    fn draw(rng: &mut StdRng, alphabet: &ProductAlphabet, len: usize) -> Vec<LetterPair> {
        (0..len)
            .map(|_| {
                (rng.gen_range(0..alphabet.n_inputs()), rng.gen_range(0..alphabet.n_outputs()))
            })
            .collect()
    }
    let stem_len = rng.gen_range(0..=max_stem);
    let cycle_len = rng.gen_range(1..=max_cycle);
    let stem = draw(&mut rng, alphabet, stem_len);
    let cycle = draw(&mut rng, alphabet, cycle_len);
    Lasso::new(stem, cycle)
}

/// Error of [`parse_oaut`], with 1-based line numbers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum OautParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unknown state '{name}'")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: unknown symbol '{name}'")]
    UnknownSymbol { line: usize, name: String },
    #[error("line {line}: duplicate transition for {state} {letter}")]
    DuplicateTransition { line: usize, state: String, letter: String },
    #[error("missing transition for {state} {letter}")]
    MissingTransition { state: String, letter: String },
    #[error("missing section: {0}")]
    MissingSection(&'static str),
}

/// Parse the text format described in the module documentation.
pub fn parse_oaut(text: &str) -> Result<OmegaAutomaton, OautParseError> {
    let mut inputs: Option<Vec<String>> = None;
    let mut outputs: Option<Vec<String>> = None;
    let mut state_names: Option<Vec<String>> = None;
    let mut initial: Option<usize> = None;
    let mut kind: Option<String> = None;
    let mut accepting: BTreeSet<usize> = BTreeSet::new();
    let mut saw_accepting = false;
    let mut colors: Vec<Option<u32>> = Vec::new();
    let mut family: Vec<BTreeSet<usize>> = Vec::new();
    let mut table: Vec<Vec<Vec<Option<usize>>>> = Vec::new();

    let err = |line: usize, msg: &str| OautParseError::Malformed { line, msg: msg.to_string() };
    let state_index = |names: &Option<Vec<String>>, tok: &str, line: usize| {
        names
            .as_ref()
            .ok_or_else(|| err(line, "states must be declared before use"))?
            .iter()
            .position(|n| n == tok)
            .ok_or_else(|| OautParseError::UnknownState { line, name: tok.to_string() })
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "alphabet" => {
                if toks.len() < 3 {
                    return Err(err(line, "alphabet line needs a side and at least one symbol"));
                }
                let syms: Vec<String> = toks[2..].iter().map(|s| s.to_string()).collect();
                let mut uniq = syms.clone();
                uniq.sort();
                uniq.dedup();
                if uniq.len() != syms.len() {
                    return Err(err(line, "alphabet symbols must be distinct"));
                }
                match toks[1] {
                    "input" => inputs = Some(syms),
                    "output" => outputs = Some(syms),
                    side => return Err(err(line, &format!("unknown alphabet side '{side}'"))),
                }
            }
            "states" => {
                if toks.len() < 2 {
                    return Err(err(line, "states line needs at least one state"));
                }
                let names: Vec<String> = toks[1..].iter().map(|s| s.to_string()).collect();
                let mut uniq = names.clone();
                uniq.sort();
                uniq.dedup();
                if uniq.len() != names.len() {
                    return Err(err(line, "state names must be distinct"));
                }
                colors = vec![None; names.len()];
                state_names = Some(names);
            }
            "initial" => {
                if toks.len() != 2 {
                    return Err(err(line, "initial line needs exactly one state"));
                }
                initial = Some(state_index(&state_names, toks[1], line)?);
            }
            "acceptance" => {
                if toks.len() != 2 {
                    return Err(err(line, "acceptance line needs exactly one kind"));
                }
                match toks[1] {
                    "safety" | "reachability" | "parity" | "muller" => kind = Some(toks[1].to_string()),
                    k => return Err(err(line, &format!("unknown acceptance kind '{k}'"))),
                }
            }
            "accepting" => {
                saw_accepting = true;
                for tok in &toks[1..] {
                    accepting.insert(state_index(&state_names, tok, line)?);
                }
            }
            "color" => {
                if toks.len() != 3 {
                    return Err(err(line, "color line needs a state and a number"));
                }
                let q = state_index(&state_names, toks[1], line)?;
                let c: u32 = toks[2]
                    .parse()
                    .map_err(|_| err(line, &format!("invalid color '{}'", toks[2])))?;
                if colors[q].is_some() {
                    return Err(err(line, &format!("duplicate color for state '{}'", toks[1])));
                }
                colors[q] = Some(c);
            }
            "accset" => {
                let mut set = BTreeSet::new();
                for tok in &toks[1..] {
                    set.insert(state_index(&state_names, tok, line)?);
                }
                family.push(set);
            }
            "trans" => {
                if toks.len() != 4 {
                    return Err(err(line, "trans line is 'trans <src> <in>/<out> <dst>'"));
                }
                let (ins, outs) = match (&inputs, &outputs) {
                    (Some(i), Some(o)) => (i, o),
                    _ => return Err(err(line, "alphabets must be declared before transitions")),
                };
                let names = state_names
                    .as_ref()
                    .ok_or_else(|| err(line, "states must be declared before transitions"))?;
                if table.is_empty() {
                    table = vec![vec![vec![None; outs.len()]; ins.len()]; names.len()];
                }
                let src = state_index(&state_names, toks[1], line)?;
                let dst = state_index(&state_names, toks[3], line)?;
                let (in_sym, out_sym) = toks[2]
                    .split_once('/')
                    .ok_or_else(|| err(line, "letter must be '<in>/<out>'"))?;
                let a = ins
                    .iter()
                    .position(|s| s == in_sym)
                    .ok_or_else(|| OautParseError::UnknownSymbol { line, name: in_sym.to_string() })?;
                let b = outs
                    .iter()
                    .position(|s| s == out_sym)
                    .ok_or_else(|| OautParseError::UnknownSymbol { line, name: out_sym.to_string() })?;
                if table[src][a][b].is_some() {
                    return Err(OautParseError::DuplicateTransition {
                        line,
                        state: toks[1].to_string(),
                        letter: toks[2].to_string(),
                    });
                }
                table[src][a][b] = Some(dst);
            }
            other => return Err(err(line, &format!("unknown directive '{other}'"))),
        }
    }

    let inputs = inputs.ok_or(OautParseError::MissingSection("alphabet input"))?;
    let outputs = outputs.ok_or(OautParseError::MissingSection("alphabet output"))?;
    let state_names = state_names.ok_or(OautParseError::MissingSection("states"))?;
    let initial = initial.ok_or(OautParseError::MissingSection("initial"))?;
    let kind = kind.ok_or(OautParseError::MissingSection("acceptance"))?;

    let acceptance = match kind.as_str() {
        "safety" => Acceptance::Safety { accepting },
        "reachability" => Acceptance::Reachability { accepting },
        "parity" => {
            let mut cs = Vec::with_capacity(state_names.len());
            for (q, c) in colors.iter().enumerate() {
                cs.push(c.ok_or(OautParseError::MissingSection("color"))
                    .map_err(|_| OautParseError::Malformed {
                        line: 0,
                        msg: format!("missing color for state '{}'", state_names[q]),
                    })?);
            }
            Acceptance::Parity { colors: cs }
        }
        "muller" => Acceptance::Muller { family },
        _ => unreachable!(),
    };
    if matches!(acceptance, Acceptance::Safety { .. } | Acceptance::Reachability { .. }) && !saw_accepting {
        return Err(OautParseError::MissingSection("accepting"));
    }

    if table.is_empty() {
        table = vec![vec![vec![None; outputs.len()]; inputs.len()]; state_names.len()];
    }
    let mut transitions = vec![vec![vec![0usize; outputs.len()]; inputs.len()]; state_names.len()];
    for (q, per_state) in table.iter().enumerate() {
        for (a, per_in) in per_state.iter().enumerate() {
            for (b, entry) in per_in.iter().enumerate() {
                transitions[q][a][b] = entry.ok_or_else(|| OautParseError::MissingTransition {
                    state: state_names[q].clone(),
                    letter: format!("{}/{}", inputs[a], outputs[b]),
                })?;
            }
        }
    }

    Ok(OmegaAutomaton {
        state_names,
        alphabet: ProductAlphabet::new(inputs, outputs),
        initial,
        transitions,
        acceptance,
    })
}

/// Render an automaton in the text format; [`parse_oaut`] of the result is
/// the identity.
pub fn write_oaut(aut: &OmegaAutomaton) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alphabet input {}", aut.alphabet.inputs.join(" "));
    let _ = writeln!(out, "alphabet output {}", aut.alphabet.outputs.join(" "));
    let _ = writeln!(out, "states {}", aut.state_names.join(" "));
    let _ = writeln!(out, "initial {}", aut.state_names[aut.initial]);
    let _ = writeln!(out, "acceptance {}", aut.acceptance.kind());
    match &aut.acceptance {
        Acceptance::Safety { accepting } | Acceptance::Reachability { accepting } => {
            let names: Vec<&str> = accepting.iter().map(|&q| aut.state_names[q].as_str()).collect();
            let _ = writeln!(out, "accepting {}", names.join(" "));
        }
        Acceptance::Parity { colors } => {
            for (q, c) in colors.iter().enumerate() {
                let _ = writeln!(out, "color {} {}", aut.state_names[q], c);
            }
        }
        Acceptance::Muller { family } => {
            for set in family {
                let names: Vec<&str> = set.iter().map(|&q| aut.state_names[q].as_str()).collect();
                let _ = writeln!(out, "accset {}", names.join(" "));
            }
        }
    }
    for q in 0..aut.n_states() {
        for (a, b) in aut.alphabet.pairs() {
            let _ = writeln!(
                out,
                "trans {} {}/{} {}",
                aut.state_names[q],
                aut.alphabet.inputs[a],
                aut.alphabet.outputs[b],
                aut.state_names[aut.step(q, (a, b))]
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copy01() -> OmegaAutomaton {
        gen_family(&FamilySpec::Copy { symbols: vec!["0".into(), "1".into()] }).unwrap()
    }

    #[test]
    fn copy_shape() {
        let c = copy01();
        assert_eq!(c.n_states(), 2);
        assert_eq!(c.state_names, vec!["ok", "rej"]);
        assert_eq!(c.step(0, (0, 0)), 0);
        assert_eq!(c.step(0, (0, 1)), 1);
        assert_eq!(c.step(1, (1, 1)), 1);
    }

    #[test]
    fn copy_lasso_acceptance() {
        let c = copy01();
        assert!(lasso_accepts(&c, &Lasso::new(vec![], vec![(0, 0)])));
        assert!(lasso_accepts(&c, &Lasso::new(vec![(1, 1)], vec![(0, 0), (1, 1)])));
        assert!(!lasso_accepts(&c, &Lasso::new(vec![(0, 1)], vec![(0, 0)])));
        assert!(!lasso_accepts(&c, &Lasso::new(vec![], vec![(0, 0), (1, 0)])));
    }

    #[test]
    fn bad_j_pair_family_shape() {
        let a2 = gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap();
        assert_eq!(a2.n_states(), 7);
        assert_eq!(a2.alphabet.inputs, vec!["1", "2"]);
        // Output selects the gadget at step zero.
        assert_eq!(a2.state_names[a2.step(0, (0, 0))], "g1w");
        assert_eq!(a2.state_names[a2.step(0, (1, 1))], "g2w");
        // Gadget 2 arms on 2, survives 1, completes on 2.
        let g2w = a2.step(0, (0, 1));
        let g2a = a2.step(g2w, (1, 0));
        assert_eq!(a2.state_names[g2a], "g2a");
        assert_eq!(a2.state_names[a2.step(g2a, (0, 0))], "g2a");
        assert_eq!(a2.state_names[a2.step(g2a, (1, 0))], "acc");
        // Gadget 1 disarms on the larger value 2.
        let g1a = a2.step(a2.step(0, (0, 0)), (0, 0));
        assert_eq!(a2.state_names[g1a], "g1a");
        assert_eq!(a2.state_names[a2.step(g1a, (1, 0))], "g1w");
        assert!(gen_family(&FamilySpec::BadJPair { n: 1 }).is_err());
    }

    #[test]
    fn bad_j_pair_vec_bit_discipline() {
        let v2 = gen_family(&FamilySpec::BadJPairVec { n: 2 }).unwrap();
        assert_eq!(v2.n_states(), 7);
        assert_eq!(v2.alphabet.n_inputs(), 8);
        assert_eq!(v2.alphabet.n_outputs(), 4);
        let a_idx = v2.alphabet.input_index("1:10").unwrap();
        // Selecting gadget 1 with the matching bit 1 enters the gadget.
        let b_ok = v2.alphabet.output_index("1:1").unwrap();
        assert_eq!(v2.state_names[v2.step(0, (a_idx, b_ok))], "g1w");
        // Selecting gadget 1 with the wrong bit falls into the sink.
        let b_bad = v2.alphabet.output_index("1:0").unwrap();
        assert_eq!(v2.state_names[v2.step(0, (a_idx, b_bad))], "rej");
        // Inside gadget 2 the second component of the vector is the one that
        // must be echoed.
        let g2w = v2.step(0, (a_idx, v2.alphabet.output_index("2:0").unwrap()));
        assert_eq!(v2.state_names[g2w], "g2w");
        let a21 = v2.alphabet.input_index("2:01").unwrap();
        let echo = v2.alphabet.output_index("1:1").unwrap();
        assert_eq!(v2.state_names[v2.step(g2w, (a21, echo))], "g2a");
        let no_echo = v2.alphabet.output_index("1:0").unwrap();
        assert_eq!(v2.state_names[v2.step(g2w, (a21, no_echo))], "rej");
    }

    #[test]
    fn reversal_family_shape() {
        let r4 = gen_family(&FamilySpec::Reversal { k: 4 }).unwrap();
        // Stacks of pairs up to depth 2 while pushing, strictly below 2
        // while popping, plus the sink: (1 + 4 + 16) + (1 + 4) + 1.
        assert_eq!(r4.n_states(), 27);
        assert!(gen_family(&FamilySpec::Reversal { k: 3 }).is_err());
        assert!(gen_family(&FamilySpec::Reversal { k: 0 }).is_err());

        // The word 01 10 / 01 10 satisfies the reversal demand for k = 4:
        // outputs 0110 reversed are 0110, inputs are 0110.
        let word = [(0, 0), (1, 1), (1, 1), (0, 0)];
        let run = run_word(&r4, r4.initial, &word);
        assert_ne!(r4.state_names[run.end(r4.initial)], "rej");
        assert_eq!(r4.state_names[run.end(r4.initial)], "d");
        // Flipping the last output breaks it.
        let bad = [(0, 0), (1, 1), (1, 1), (0, 1)];
        let run = run_word(&r4, r4.initial, &bad);
        assert_eq!(r4.state_names[run.end(r4.initial)], "rej");
    }

    #[test]
    fn reversal_accepts_exactly_reversed_prefixes() {
        // Exhaustive over all inputs and outputs of length 4: the run stays
        // out of the sink exactly if outputs reverse inputs.
        let r4 = gen_family(&FamilySpec::Reversal { k: 4 }).unwrap();
        for word_bits in 0..256usize {
            let ins: Vec<usize> = (0..4).map(|i| word_bits >> i & 1).collect();
            let outs: Vec<usize> = (0..4).map(|i| word_bits >> (4 + i) & 1).collect();
            let pairs: Vec<LetterPair> = ins.iter().zip(&outs).map(|(&a, &b)| (a, b)).collect();
            let run = run_word(&r4, r4.initial, &pairs);
            let ok = (0..4).all(|i| outs[i] == ins[3 - i]);
            let in_sink = r4.state_names[run.end(r4.initial)] == "rej";
            assert_eq!(ok, !in_sink, "ins={ins:?} outs={outs:?}");
        }
    }

    #[test]
    fn bad_pair_scan() {
        assert!(has_bad_j_pair(&[2, 1, 1, 2], 2));
        assert!(has_bad_j_pair(&[1, 1], 1));
        assert!(!has_bad_j_pair(&[1, 2, 1], 1));
        assert!(!has_bad_j_pair(&[2, 1, 3, 2], 2));
        assert!(has_bad_j_pair(&[3, 1, 2, 1, 3], 3));
    }

    #[test]
    fn xn_words_are_bad_pair_free() {
        for n in 1..=4u32 {
            let w = xn_word(n);
            assert_eq!(w.len(), (1 << n) - 1);
            for j in 1..=n {
                assert!(!has_bad_j_pair(&w, j), "x_{n} has a bad {j}-pair");
            }
        }
    }

    #[test]
    fn every_maximal_length_word_has_a_bad_pair() {
        // Exhaustive over all words of length 2^n for n <= 3.
        for n in 1..=3u32 {
            let len = 1usize << n;
            let mut word = vec![1u32; len];
            loop {
                assert!(
                    (1..=n).any(|j| has_bad_j_pair(&word, j)),
                    "word {word:?} over 1..={n} has no bad pair"
                );
                // Next word in lexicographic order.
                let mut i = len;
                loop {
                    if i == 0 {
                        return;
                    }
                    i -= 1;
                    if word[i] < n {
                        word[i] += 1;
                        for x in &mut word[i + 1..] {
                            *x = 1;
                        }
                        break;
                    }
                }
                if word.iter().all(|&x| x == 1) {
                    break;
                }
            }
        }
    }

    #[test]
    fn normalize_safety_collapses_rejecting_part() {
        let c = copy01();
        let p = normalize_to_parity(&c).unwrap();
        assert_eq!(p.n_states(), 2);
        match &p.acceptance {
            Acceptance::Parity { colors } => assert_eq!(colors, &vec![0, 1]),
            _ => panic!("expected parity"),
        }
    }

    #[test]
    fn normalize_reachability_doubles() {
        let a2 = gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap();
        let p = normalize_to_parity(&a2).unwrap();
        assert_eq!(p.n_states(), 14);
        match &p.acceptance {
            Acceptance::Parity { colors } => {
                assert!(colors[..7].iter().all(|&c| c == 1));
                assert!(colors[7..].iter().all(|&c| c == 2));
            }
            _ => panic!("expected parity"),
        }
        // The flag is sticky: once the accepting sink is reached the run
        // stays in the flagged copy.
        let acc_flagged = 7 + 5; // "acc" is state 5 of the base automaton
        assert_eq!(p.step(acc_flagged, (0, 0)), acc_flagged);
    }

    #[test]
    fn normalize_rejects_muller() {
        let mut aut = copy01();
        aut.acceptance = Acceptance::Muller { family: vec![BTreeSet::from([0])] };
        assert_eq!(normalize_to_parity(&aut), Err(NormalizeError::MullerNotNormalizable));
    }

    #[test]
    fn normalize_preserves_acceptance_on_random_lassos() {
        for (i, spec) in [
            FamilySpec::Copy { symbols: vec!["0".into(), "1".into()] },
            FamilySpec::BadJPair { n: 2 },
            FamilySpec::Reversal { k: 2 },
        ]
        .iter()
        .enumerate()
        {
            let aut = gen_family(spec).unwrap();
            let norm = normalize_to_parity(&aut).unwrap();
            for s in 0..100u64 {
                let lasso = random_lasso(1000 * i as u64 + s, &aut.alphabet, 6, 5);
                assert_eq!(
                    lasso_accepts(&aut, &lasso),
                    lasso_accepts(&norm, &lasso),
                    "family {i} seed {s}"
                );
            }
        }
    }

    #[test]
    fn lasso_acceptance_stable_under_unrolling() {
        let automata = [
            copy01(),
            gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap(),
            normalize_to_parity(&gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap()).unwrap(),
            {
                let mut m = copy01();
                m.acceptance = Acceptance::Muller { family: vec![BTreeSet::from([0]), BTreeSet::from([1])] };
                m
            },
        ];
        for (i, aut) in automata.iter().enumerate() {
            for s in 0..100u64 {
                let lasso = random_lasso(7000 + 100 * i as u64 + s, &aut.alphabet, 5, 4);
                let mut doubled_cycle = lasso.cycle.clone();
                doubled_cycle.extend_from_slice(&lasso.cycle);
                let doubled = Lasso::new(lasso.stem.clone(), doubled_cycle);
                assert_eq!(lasso_accepts(aut, &lasso), lasso_accepts(aut, &doubled));
            }
        }
    }

    #[test]
    fn muller_lasso_uses_repeating_visit_set() {
        // Two states swapping on every letter: the infinity set is both
        // states regardless of the stem.
        let mut aut = copy01();
        aut.transitions = vec![vec![vec![1, 1], vec![1, 1]], vec![vec![0, 0], vec![0, 0]]];
        aut.acceptance = Acceptance::Muller { family: vec![BTreeSet::from([0, 1])] };
        assert!(lasso_accepts(&aut, &Lasso::new(vec![], vec![(0, 0)])));
        aut.acceptance = Acceptance::Muller { family: vec![BTreeSet::from([0])] };
        assert!(!lasso_accepts(&aut, &Lasso::new(vec![], vec![(0, 0)])));
    }

    #[test]
    fn format_round_trip() {
        for spec in [
            FamilySpec::Copy { symbols: vec!["a".into(), "b".into()] },
            FamilySpec::BadJPair { n: 2 },
            FamilySpec::BadJPairVec { n: 2 },
            FamilySpec::Reversal { k: 4 },
        ] {
            let aut = gen_family(&spec).unwrap();
            let text = write_oaut(&aut);
            let back = parse_oaut(&text).unwrap();
            assert_eq!(aut, back, "round trip failed for {spec:?}");
        }
        // Parity and Muller sections round-trip as well.
        let norm = normalize_to_parity(&gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap()).unwrap();
        assert_eq!(parse_oaut(&write_oaut(&norm)).unwrap(), norm);
        let mut muller = copy01();
        muller.acceptance = Acceptance::Muller { family: vec![BTreeSet::from([0]), BTreeSet::from([0, 1])] };
        assert_eq!(parse_oaut(&write_oaut(&muller)).unwrap(), muller);
    }

    #[test]
    fn format_rejects_partial_and_duplicate_tables() {
        let c = copy01();
        let text = write_oaut(&c);
        let mut lines: Vec<&str> = text.lines().collect();
        let last = lines.pop().unwrap();
        let partial = lines.join("\n");
        assert!(matches!(
            parse_oaut(&partial),
            Err(OautParseError::MissingTransition { .. })
        ));
        lines.push(last);
        lines.push(last);
        let duplicated = lines.join("\n");
        assert!(matches!(
            parse_oaut(&duplicated),
            Err(OautParseError::DuplicateTransition { .. })
        ));
    }

    #[test]
    fn format_reports_line_numbers_and_comments() {
        let text = "# header\nalphabet input 0\nalphabet output 0\nstates a\ninitial b\n";
        match parse_oaut(text) {
            Err(OautParseError::UnknownState { line, name }) => {
                assert_eq!(line, 5);
                assert_eq!(name, "b");
            }
            other => panic!("expected unknown state error, got {other:?}"),
        }
    }

    #[test]
    fn pruning_preserves_lasso_acceptance() {
        let a2 = gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap();
        let norm = normalize_to_parity(&a2).unwrap();
        let pruned = norm.pruned_to_reachable();
        assert!(pruned.n_states() < norm.n_states());
        for s in 0..100u64 {
            let lasso = random_lasso(31_000 + s, &norm.alphabet, 6, 5);
            assert_eq!(lasso_accepts(&norm, &lasso), lasso_accepts(&pruned, &lasso));
        }
    }
}
