//! Block summaries over a monitored product.
//!
//! When the output player answers inputs in blocks of length `d`, the only
//! thing that matters about a concrete input block `w` is: starting from each
//! product state `(q, Bottom)`, which pairs `(q', m)` can the output player
//! reach by choosing outputs freely while the inputs are forced to spell `w`?
//! Collecting that set for every automaton state `q` gives the *summary* of
//! `w`, a total map from states to sets of monitored pairs. Two blocks with
//! equal summaries are interchangeable: any strategy move that works after
//! one works after the other, with the same aggregated effect.
//!
//! Summaries themselves form a deterministic automaton over the input
//! alphabet (reading a letter updates every row at once). Its reachable part
//! is tiny in practice compared to the doubly exponential worst case, and it
//! is the object everything downstream runs on: equivalence classes of
//! blocks, the reduced game, and the certified block sizes.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::monitor::{MemoryElem, MonitoredProduct};
use crate::util::tarjan_sccs;

/// A set of monitored product pairs `(automaton state, memory)`.
pub type MonitoredStateSet = BTreeSet<(usize, MemoryElem)>;

/// The summary of a finite input block: for every automaton state `q`,
/// the set of pairs reachable from `(q, Bottom)` under that block with the
/// outputs ranging freely. `rows` is indexed by automaton state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SummaryFunction {
    pub rows: Vec<MonitoredStateSet>,
}

/// The deterministic automaton of reachable summaries. State 0 is the
/// summary of the empty block (every row is `{(q, Bottom)}`); it has no
/// incoming transitions because no update ever reproduces `Bottom`.
#[derive(Debug, Clone)]
pub struct SummaryAutomaton {
    /// Reachable summaries in breadth-first discovery order.
    pub summaries: Vec<SummaryFunction>,
    /// `transitions[s][a]` is the summary reached from `s` by input letter `a`.
    pub transitions: Vec<Vec<usize>>,
    pub initial: usize,
    /// `infinite[s]` holds when infinitely many blocks share summary `s`,
    /// i.e. when `s` is reachable from some cycle of the summary graph.
    pub infinite: Vec<bool>,
    /// `on_cycle[s]` holds when `s` itself lies on a cycle.
    pub on_cycle: Vec<bool>,
    /// A shortest input block with each summary; `witness[initial]` is empty.
    pub witness: Vec<Vec<usize>>,
    /// Input letter names, copied from the product for self-contained output.
    pub input_names: Vec<String>,
    /// `|Q|` of the underlying automaton, kept for the size bound.
    pub n_automaton_states: usize,
    /// Memory size including `Bottom`, kept for the size bound.
    pub memory_size_with_bottom: usize,
}

/// One equivalence class of input blocks that contains blocks of unboundedly
/// many lengths. These are the classes a block strategy can safely commit to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqClass {
    pub summary: SummaryFunction,
    /// Index of the summary in breadth-first discovery order.
    pub canonical_index: usize,
    /// A shortest block with this summary.
    pub witness: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SummaryError {
    /// No output word can steer the product from `(q, Bottom)` to the
    /// requested pair while the inputs spell the given block.
    #[error("no output completion reaches the requested pair")]
    NoCompletion,
}

/// One step of the summary subset construction: all pairs reachable from
/// `s` by reading input letter `a` paired with an arbitrary output letter.
pub fn delta_p(p: &MonitoredProduct, s: &MonitoredStateSet, a: usize) -> MonitoredStateSet {
    let n_out = p.automaton.alphabet.n_outputs();
    let mut next = MonitoredStateSet::new();
    for (q, m) in s {
        for b in 0..n_out {
            next.insert(p.pair_step(*q, m, (a, b)));
        }
    }
    next
}

fn initial_summary(p: &MonitoredProduct) -> SummaryFunction {
    let rows = (0..p.automaton.n_states())
        .map(|q| {
            let mut row = MonitoredStateSet::new();
            row.insert((q, MemoryElem::Bottom));
            row
        })
        .collect();
    SummaryFunction { rows }
}

fn apply_letter(p: &MonitoredProduct, f: &SummaryFunction, a: usize) -> SummaryFunction {
    SummaryFunction {
        rows: f.rows.iter().map(|row| delta_p(p, row, a)).collect(),
    }
}

/// The summary of a non-empty input block, computed row by row.
pub fn word_summary(p: &MonitoredProduct, w: &[usize]) -> SummaryFunction {
    assert!(!w.is_empty(), "the empty block has no summary");
    let mut f = initial_summary(p);
    for &a in w {
        f = apply_letter(p, &f, a);
    }
    f
}

/// Explore all reachable summaries breadth first, then classify each as
/// finite or infinite by condensing the summary graph: a summary stands for
/// infinitely many blocks exactly when it can be reached through a cycle.
pub fn build_summary_automaton(p: &MonitoredProduct) -> SummaryAutomaton {
    let n_in = p.automaton.alphabet.n_inputs();
    let mut summaries = vec![initial_summary(p)];
    let mut index: HashMap<SummaryFunction, usize> = HashMap::new();
    index.insert(summaries[0].clone(), 0);
    let mut transitions: Vec<Vec<usize>> = Vec::new();
    let mut witness: Vec<Vec<usize>> = vec![Vec::new()];
    let mut i = 0;
    while i < summaries.len() {
        let mut row = Vec::with_capacity(n_in);
        for a in 0..n_in {
            let next = apply_letter(p, &summaries[i], a);
            let target = match index.get(&next) {
                Some(&t) => t,
                None => {
                    let t = summaries.len();
                    index.insert(next.clone(), t);
                    let mut w = witness[i].clone();
                    w.push(a);
                    witness.push(w);
                    summaries.push(next);
                    t
                }
            };
            row.push(target);
        }
        transitions.push(row);
        i += 1;
    }

    let n = summaries.len();
    let succ = |v: usize, out: &mut Vec<usize>| out.extend(transitions[v].iter().copied());
    let mut on_cycle = vec![false; n];
    for comp in tarjan_sccs(n, &succ) {
        let cyclic = comp.len() > 1 || transitions[comp[0]].contains(&comp[0]);
        if cyclic {
            for v in comp {
                on_cycle[v] = true;
            }
        }
    }
    // Everything reachable from a cycle absorbs blocks of unbounded length.
    let mut infinite = on_cycle.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| on_cycle[v]).collect();
    while let Some(v) = queue.pop_front() {
        for &t in &transitions[v] {
            if !infinite[t] {
                infinite[t] = true;
                queue.push_back(t);
            }
        }
    }

    SummaryAutomaton {
        summaries,
        transitions,
        initial: 0,
        infinite,
        on_cycle,
        witness,
        input_names: p.automaton.alphabet.inputs.clone(),
        n_automaton_states: p.automaton.n_states(),
        memory_size_with_bottom: p.monitor.memory_size_with_bottom(),
    }
}

/// The infinite equivalence classes in discovery order. The first entry is
/// the canonical class a block strategy falls back on. Every complete
/// automaton has at least one: the summary graph is finite and total, so
/// some cycle is reachable from the initial summary.
pub fn infinite_classes(sa: &SummaryAutomaton) -> Vec<EqClass> {
    let classes: Vec<EqClass> = (0..sa.summaries.len())
        .filter(|&s| s != sa.initial && sa.infinite[s])
        .map(|s| EqClass {
            summary: sa.summaries[s].clone(),
            canonical_index: s,
            witness: sa.witness[s].clone(),
        })
        .collect();
    assert!(
        !classes.is_empty(),
        "a complete automaton always has an infinite block class"
    );
    classes
}

/// Shortest input word leading from `from` to `to` in the summary graph,
/// taking at least one step when `at_least_one` is set (used for cycles).
fn shortest_connecting_word(
    sa: &SummaryAutomaton,
    from: usize,
    to: usize,
    at_least_one: bool,
) -> Option<Vec<usize>> {
    if from == to && !at_least_one {
        return Some(Vec::new());
    }
    let n = sa.summaries.len();
    let n_in = sa.input_names.len();
    // prev[v] = (predecessor, letter); the seed step out of `from` is marked
    // with predecessor == usize::MAX.
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut queue = VecDeque::new();
    for a in 0..n_in {
        let t = sa.transitions[from][a];
        if prev[t].is_none() {
            prev[t] = Some((usize::MAX, a));
            if t == to {
                return Some(reconstruct(&prev, to));
            }
            queue.push_back(t);
        }
    }
    if prev[to].is_some() {
        return Some(reconstruct(&prev, to));
    }
    while let Some(v) = queue.pop_front() {
        for a in 0..n_in {
            let t = sa.transitions[v][a];
            if prev[t].is_none() && t != from {
                prev[t] = Some((v, a));
                if t == to {
                    return Some(reconstruct(&prev, to));
                }
                queue.push_back(t);
            } else if t == to && prev[t].is_none() {
                prev[t] = Some((v, a));
                return Some(reconstruct(&prev, to));
            }
        }
    }
    prev[to].map(|_| reconstruct(&prev, to))
}

fn reconstruct(prev: &[Option<(usize, usize)>], to: usize) -> Vec<usize> {
    let mut letters = Vec::new();
    let mut v = to;
    loop {
        let (p, a) = prev[v].expect("reconstruction follows recorded steps");
        letters.push(a);
        if p == usize::MAX {
            break;
        }
        v = p;
    }
    letters.reverse();
    letters
}

/// A block of the given class with length in `[min_len, min_len + D]`, where
/// `D` is the number of summaries. The shortest witness is returned when it
/// is already long enough; otherwise a reachable cycle is pumped past
/// `min_len` and the overshoot is trimmed by cutting summary repetitions
/// that occur after position `min_len`.
pub fn class_witness(sa: &SummaryAutomaton, class: &EqClass, min_len: usize) -> Vec<usize> {
    let d = sa.summaries.len();
    let target = class.canonical_index;
    let shortest = &sa.witness[target];
    if shortest.len() >= min_len {
        return shortest.clone();
    }

    // Reverse reachability to the target, to pick a cycle that still leads there.
    let n = sa.summaries.len();
    let mut reaches = vec![false; n];
    reaches[target] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for v in 0..n {
            if !reaches[v] && sa.transitions[v].iter().any(|&t| reaches[t]) {
                reaches[v] = true;
                changed = true;
            }
        }
    }
    let hub = (0..n)
        .find(|&v| sa.on_cycle[v] && reaches[v])
        .expect("infinite classes sit behind a cycle");

    let to_hub = sa.witness[hub].clone();
    let around = shortest_connecting_word(sa, hub, hub, true).expect("hub lies on a cycle");
    let onward = shortest_connecting_word(sa, hub, target, false)
        .expect("hub was chosen to reach the target");
    let base = to_hub.len() + onward.len();
    let pumps = min_len.saturating_sub(base).div_ceil(around.len());
    let mut w = to_hub;
    for _ in 0..pumps {
        w.extend_from_slice(&around);
    }
    w.extend_from_slice(&onward);
    debug_assert!(w.len() >= min_len);

    // Cut repeated summaries inside the window [min_len, min_len + D]; the
    // prefix below min_len is never touched, so the length cannot drop under
    // min_len, and each cut removes at least one letter.
    while w.len() > min_len + d {
        let mut states = Vec::with_capacity(w.len() + 1);
        let mut s = sa.initial;
        states.push(s);
        for &a in &w {
            s = sa.transitions[s][a];
            states.push(s);
        }
        let mut seen_at: HashMap<usize, usize> = HashMap::new();
        let mut cut = None;
        for i in min_len..=(min_len + d) {
            if let Some(&j) = seen_at.get(&states[i]) {
                cut = Some((j, i));
                break;
            }
            seen_at.insert(states[i], i);
        }
        let (i, j) = cut.expect("D + 1 prefixes must repeat a summary");
        w.drain(i..j);
    }
    debug_assert_eq!(&word_summary_via(sa, &w), &class.summary);
    w
}

fn word_summary_via(sa: &SummaryAutomaton, w: &[usize]) -> SummaryFunction {
    let mut s = sa.initial;
    for &a in w {
        s = sa.transitions[s][a];
    }
    sa.summaries[s].clone()
}

/// The smallest output word `w'` (ordered by output declaration order,
/// leftmost letter most significant) such that reading `w` paired with `w'`
/// takes the product from `(q, Bottom)` to exactly `(q_to, m)`. This is how
/// a block strategy turns an abstract move of the reduced game back into
/// concrete letters.
pub fn find_completion(
    p: &MonitoredProduct,
    q: usize,
    q_to: usize,
    m: &MemoryElem,
    w: &[usize],
) -> Result<Vec<usize>, SummaryError> {
    let goal = (q_to, m.clone());
    if w.is_empty() {
        return if goal == (q, MemoryElem::Bottom) {
            Ok(Vec::new())
        } else {
            Err(SummaryError::NoCompletion)
        };
    }
    let n_out = p.automaton.alphabet.n_outputs();

    let mut layers: Vec<MonitoredStateSet> = Vec::with_capacity(w.len() + 1);
    let mut first = MonitoredStateSet::new();
    first.insert((q, MemoryElem::Bottom));
    layers.push(first);
    for &a in w {
        let next = delta_p(p, layers.last().unwrap(), a);
        layers.push(next);
    }
    if !layers[w.len()].contains(&goal) {
        return Err(SummaryError::NoCompletion);
    }

    // Backward viability: pairs of each layer from which the goal is still
    // reachable under the remaining inputs.
    let mut viable: Vec<MonitoredStateSet> = vec![MonitoredStateSet::new(); w.len() + 1];
    viable[w.len()].insert(goal.clone());
    for i in (0..w.len()).rev() {
        let mut v = MonitoredStateSet::new();
        for (qq, mm) in &layers[i] {
            if (0..n_out).any(|b| viable[i + 1].contains(&p.pair_step(*qq, mm, (w[i], b)))) {
                v.insert((*qq, mm.clone()));
            }
        }
        viable[i] = v;
    }

    // Greedy smallest output letter that keeps the goal reachable.
    let mut out = Vec::with_capacity(w.len());
    let mut cur = (q, MemoryElem::Bottom);
    for (i, &a) in w.iter().enumerate() {
        let b = (0..n_out)
            .find(|&b| viable[i + 1].contains(&p.pair_step(cur.0, &cur.1, (a, b))))
            .expect("viability was established for the current pair");
        cur = p.pair_step(cur.0, &cur.1, (a, b));
        out.push(b);
    }
    debug_assert_eq!(cur, goal);
    Ok(out)
}

/// The number of reachable summaries. Blocks of this length always fall in
/// an infinite class, and it is the block size the pipeline actually uses,
/// as opposed to the worst-case bound of [`worst_case_blocksize_log2`].
pub fn effective_blocksize(sa: &SummaryAutomaton) -> usize {
    sa.summaries.len()
}

/// Base-2 logarithm of the worst-case number of summaries,
/// `|Q|^2 * (|memory| + 1)`: each summary is a relation between states and
/// monitored pairs. Reported alongside the effective size to show the gap.
pub fn worst_case_blocksize_log2(sa: &SummaryAutomaton) -> u64 {
    (sa.n_automaton_states as u64) * (sa.n_automaton_states as u64)
        * (sa.memory_size_with_bottom as u64)
}

/// The smallest length from which on every block lies in an infinite class:
/// one more than the longest path through finite summaries. Finite summaries
/// can never sit behind a cycle, so that region is acyclic and the longest
/// path is well defined.
pub fn infinite_class_threshold(sa: &SummaryAutomaton) -> usize {
    let n = sa.summaries.len();
    let succ = |v: usize, out: &mut Vec<usize>| {
        if !sa.infinite[v] {
            out.extend(sa.transitions[v].iter().filter(|&&t| !sa.infinite[t]));
        }
    };
    let comps = tarjan_sccs(n, &succ);
    // Components arrive in reverse topological order; walk them backwards to
    // push longest-path lengths along the edges.
    let mut dist: Vec<Option<usize>> = vec![None; n];
    dist[sa.initial] = Some(0);
    let mut longest = 0;
    for comp in comps.iter().rev() {
        let v = comp[0];
        if sa.infinite[v] {
            continue;
        }
        if let Some(dv) = dist[v] {
            longest = longest.max(dv);
            for &t in &sa.transitions[v] {
                if !sa.infinite[t] && dist[t].map_or(true, |dt| dt < dv + 1) {
                    dist[t] = Some(dv + 1);
                }
            }
        }
    }
    longest + 1
}

/// Graphviz rendering of the summary graph. Infinite classes are drawn with
/// a double border; parallel edges are merged and labelled with their input
/// letters.
pub fn summary_dot(sa: &SummaryAutomaton) -> String {
    use std::collections::BTreeMap;
    use std::fmt::Write;
    let mut s = String::new();
    writeln!(s, "digraph summaries {{").unwrap();
    writeln!(s, "  rankdir=LR;").unwrap();
    writeln!(s, "  init [shape=point];").unwrap();
    for v in 0..sa.summaries.len() {
        let shape = if sa.infinite[v] { "doublecircle" } else { "circle" };
        writeln!(s, "  s{} [shape={}];", v, shape).unwrap();
    }
    writeln!(s, "  init -> s{};", sa.initial).unwrap();
    for v in 0..sa.summaries.len() {
        let mut grouped: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for (a, &t) in sa.transitions[v].iter().enumerate() {
            grouped.entry(t).or_default().push(&sa.input_names[a]);
        }
        for (t, letters) in grouped {
            writeln!(s, "  s{} -> s{} [label=\"{}\"];", v, t, letters.join(",")).unwrap();
        }
    }
    writeln!(s, "}}").unwrap();
    s
}
