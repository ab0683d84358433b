//! Finite two-player games on graphs.
//!
//! Everything downstream of the summary construction is decided on parity
//! games: the reduced game whose moves are equivalence classes of blocks,
//! and brute-force reference arenas that spell the original game out, one
//! letter by letter without lookahead, one letter by letter with an
//! explicit input queue of length `d`, and one blockwise with both players
//! committing `d` letters per move. Player O wins a play when the maximum
//! color seen infinitely often is even, matching the automaton acceptance
//! it encodes.
//!
//! The solver is Zielonka's recursive attractor decomposition. It returns
//! positional strategies for both players and certifies every solution by
//! checking that the winner's strategy leaves the opponent no cycle whose
//! dominating color has the opponent's parity.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::automata::{Acceptance, OmegaAutomaton};
use crate::monitor::{AggregatedCondition, MemoryElem, MonitoredProduct};
use crate::summary::EqClass;
use crate::util::{enumerate_words, tarjan_sccs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    /// The input player, who wins on odd dominating colors.
    I,
    /// The output player, who wins on even dominating colors.
    O,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::I => Player::O,
            Player::O => Player::I,
        }
    }

    /// The player that wins plays dominated by this color.
    pub fn of_color(c: u32) -> Player {
        if c % 2 == 0 {
            Player::O
        } else {
            Player::I
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::I => write!(f, "I"),
            Player::O => write!(f, "O"),
        }
    }
}

/// A finite game graph without terminal vertices. Successors and
/// predecessors are stored in compressed adjacency form because the delay
/// arenas run into millions of vertices.
#[derive(Debug, Clone)]
pub struct Arena {
    owner: Vec<Player>,
    initial: usize,
    succ_start: Vec<usize>,
    succ_flat: Vec<usize>,
    pred_start: Vec<usize>,
    pred_flat: Vec<usize>,
}

impl Arena {
    /// Build from per-vertex successor lists. Lists are deduplicated; every
    /// vertex must keep at least one successor.
    pub fn from_successor_lists(
        owner: Vec<Player>,
        mut succs: Vec<Vec<usize>>,
        initial: usize,
    ) -> Arena {
        let n = owner.len();
        assert_eq!(succs.len(), n);
        assert!(initial < n, "initial vertex out of range");
        for (v, list) in succs.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            assert!(!list.is_empty(), "vertex {v} has no successor");
            assert!(list.iter().all(|&t| t < n), "successor out of range");
        }
        let mut succ_start = Vec::with_capacity(n + 1);
        let mut succ_flat = Vec::new();
        succ_start.push(0);
        for list in &succs {
            succ_flat.extend_from_slice(list);
            succ_start.push(succ_flat.len());
        }
        Arena::from_csr(owner, succ_start, succ_flat, initial)
    }

    fn from_csr(
        owner: Vec<Player>,
        succ_start: Vec<usize>,
        succ_flat: Vec<usize>,
        initial: usize,
    ) -> Arena {
        let n = owner.len();
        let mut pred_count = vec![0usize; n];
        for &t in &succ_flat {
            pred_count[t] += 1;
        }
        let mut pred_start = Vec::with_capacity(n + 1);
        pred_start.push(0);
        for v in 0..n {
            pred_start.push(pred_start[v] + pred_count[v]);
        }
        let mut fill = pred_start.clone();
        let mut pred_flat = vec![0usize; succ_flat.len()];
        for v in 0..n {
            for i in succ_start[v]..succ_start[v + 1] {
                let t = succ_flat[i];
                pred_flat[fill[t]] = v;
                fill[t] += 1;
            }
        }
        Arena {
            owner,
            initial,
            succ_start,
            succ_flat,
            pred_start,
            pred_flat,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, v: usize) -> Player {
        self.owner[v]
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ_flat[self.succ_start[v]..self.succ_start[v + 1]]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred_flat[self.pred_start[v]..self.pred_start[v + 1]]
    }

    pub fn count_owned_by(&self, p: Player) -> usize {
        self.owner.iter().filter(|&&o| o == p).count()
    }
}

/// A parity game: an arena with a color per vertex. `labels` carries
/// human-readable vertex provenance when the game is small enough to draw.
#[derive(Debug, Clone)]
pub struct ParityGame {
    pub arena: Arena,
    pub colors: Vec<u32>,
    pub labels: Option<Vec<String>>,
}

/// Winning regions and positional strategies of a solved game. `choice[v]`
/// is the move the owner of `v` commits to when that owner wins `v`, and
/// `None` otherwise; so each player's strategy is `choice` restricted to
/// their own vertices inside their region.
#[derive(Debug, Clone)]
pub struct Solution {
    pub winner_of: Vec<Player>,
    pub choice: Vec<Option<usize>>,
}

impl Solution {
    pub fn winner_at(&self, v: usize) -> Player {
        self.winner_of[v]
    }

    pub fn region(&self, p: Player) -> Vec<usize> {
        (0..self.winner_of.len())
            .filter(|&v| self.winner_of[v] == p)
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    /// The requested arena would not fit the configured vertex budget.
    #[error("arena needs {required} vertices, budget is {budget}")]
    BudgetExceeded { required: u128, budget: usize },
    /// Arena constructions read state colors, so the automaton must be in
    /// parity form first.
    #[error("automaton must carry a parity condition, found {found}")]
    NotParity { found: &'static str },
}

/// Least set containing `target` from which `player` can force entry into
/// `target` in finitely many steps. Returned ascending.
pub fn attractor(arena: &Arena, player: Player, target: &[usize]) -> Vec<usize> {
    let n = arena.n_vertices();
    let mask = vec![true; n];
    let mut tmask = vec![false; n];
    for &v in target {
        tmask[v] = true;
    }
    let (in_attr, _) = attractor_masked(arena, player, &tmask, &mask);
    (0..n).filter(|&v| in_attr[v]).collect()
}

/// Attractor inside a subgame `mask`, with the forced moves recorded for
/// `player`-owned vertices outside the target.
fn attractor_masked(
    arena: &Arena,
    player: Player,
    target: &[bool],
    mask: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = arena.n_vertices();
    let mut in_attr = vec![false; n];
    let mut strat = vec![None; n];
    // Opponent vertices fall in once all their in-mask successors have.
    let mut pending = vec![0usize; n];
    for v in 0..n {
        if mask[v] && arena.owner(v) != player {
            pending[v] = arena.successors(v).iter().filter(|&&t| mask[t]).count();
        }
    }
    let mut queue: VecDeque<usize> = VecDeque::new();
    for v in 0..n {
        if mask[v] && target[v] {
            in_attr[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &p in arena.predecessors(u) {
            if !mask[p] || in_attr[p] {
                continue;
            }
            if arena.owner(p) == player {
                in_attr[p] = true;
                strat[p] = Some(u);
                queue.push_back(p);
            } else {
                pending[p] -= 1;
                if pending[p] == 0 {
                    in_attr[p] = true;
                    queue.push_back(p);
                }
            }
        }
    }
    (in_attr, strat)
}

/// Solve a parity game exactly with Zielonka's algorithm. Both players get
/// positional strategies, and the result is certified before it is returned:
/// regions must be closed, and fixing the winner's strategy must leave no
/// cycle whose dominating color favours the loser.
pub fn zielonka_solve(g: &ParityGame) -> Solution {
    let n = g.arena.n_vertices();
    assert_eq!(g.colors.len(), n);
    let mut winner_of: Vec<Option<Player>> = vec![None; n];
    let mut choice: Vec<Option<usize>> = vec![None; n];
    let mask = vec![true; n];
    solve_rec(g, mask, &mut winner_of, &mut choice);
    let winner_of: Vec<Player> = winner_of
        .into_iter()
        .map(|w| w.expect("every vertex is assigned a winner"))
        .collect();
    let sol = Solution { winner_of, choice };
    certify(g, &sol);
    sol
}

fn solve_rec(
    g: &ParityGame,
    mut mask: Vec<bool>,
    winner_of: &mut [Option<Player>],
    choice: &mut [Option<usize>],
) {
    let n = g.arena.n_vertices();
    loop {
        let Some(c) = (0..n).filter(|&v| mask[v]).map(|v| g.colors[v]).max() else {
            return;
        };
        let me = Player::of_color(c);
        let opp = me.opponent();
        let mut top = vec![false; n];
        for v in 0..n {
            top[v] = mask[v] && g.colors[v] == c;
        }
        let (attr, astrat) = attractor_masked(&g.arena, me, &top, &mask);
        let mut sub = mask.clone();
        for v in 0..n {
            if attr[v] {
                sub[v] = false;
            }
        }
        solve_rec(g, sub.clone(), winner_of, choice);
        let mut opp_sub = vec![false; n];
        let mut opp_any = false;
        for v in 0..n {
            if sub[v] && winner_of[v] == Some(opp) {
                opp_sub[v] = true;
                opp_any = true;
            }
        }
        if !opp_any {
            // The whole subgame fell to me, so the full mask does: plays
            // either hit the top color infinitely often or settle into the
            // subgame region.
            for v in 0..n {
                if !mask[v] {
                    continue;
                }
                winner_of[v] = Some(me);
                if g.arena.owner(v) != me {
                    choice[v] = None;
                } else if attr[v] {
                    choice[v] = astrat[v].or_else(|| {
                        g.arena.successors(v).iter().copied().find(|&t| mask[t])
                    });
                }
            }
            return;
        }
        let (battr, bstrat) = attractor_masked(&g.arena, opp, &opp_sub, &mask);
        for v in 0..n {
            if !battr[v] {
                continue;
            }
            winner_of[v] = Some(opp);
            if g.arena.owner(v) == opp {
                if !opp_sub[v] {
                    choice[v] = bstrat[v];
                }
            } else {
                choice[v] = None;
            }
            mask[v] = false;
        }
    }
}

/// Panic unless the solution is self-consistent: regions are closed under
/// the loser's moves and the winner's strategy, the strategy stays inside
/// its region, and the strategy-restricted region contains no cycle whose
/// maximum color has the loser's parity.
fn certify(g: &ParityGame, sol: &Solution) {
    let n = g.arena.n_vertices();
    for p in [Player::O, Player::I] {
        let region: Vec<bool> = (0..n).map(|v| sol.winner_of[v] == p).collect();
        for v in 0..n {
            if !region[v] {
                continue;
            }
            if g.arena.owner(v) == p {
                let u = sol.choice[v].expect("winner must fix a move on owned vertices");
                assert!(region[u], "strategy must stay in the winning region");
            } else {
                assert!(sol.choice[v].is_none(), "loser keeps no move");
                assert!(
                    g.arena.successors(v).iter().all(|&u| region[u]),
                    "loser must be unable to leave the region"
                );
            }
        }
        let succ_fn = |v: usize, out: &mut Vec<usize>| {
            if !region[v] {
                return;
            }
            if g.arena.owner(v) == p {
                let u = sol.choice[v].unwrap();
                out.push(u);
            } else {
                out.extend(g.arena.successors(v).iter().copied());
            }
        };
        let bad_colors: BTreeSet<u32> = (0..n)
            .filter(|&v| region[v])
            .map(|v| g.colors[v])
            .filter(|&c| Player::of_color(c) != p)
            .collect();
        for &c in &bad_colors {
            let allowed: Vec<bool> = (0..n).map(|v| region[v] && g.colors[v] <= c).collect();
            let restricted = |v: usize, out: &mut Vec<usize>| {
                if !allowed[v] {
                    return;
                }
                let mut raw = Vec::new();
                succ_fn(v, &mut raw);
                out.extend(raw.into_iter().filter(|&t| allowed[t]));
            };
            for comp in tarjan_sccs(n, &restricted) {
                if !allowed[comp[0]] {
                    continue;
                }
                let cyclic = comp.len() > 1 || {
                    let mut out = Vec::new();
                    restricted(comp[0], &mut out);
                    out.contains(&comp[0])
                };
                assert!(
                    !(cyclic && comp.iter().any(|&v| g.colors[v] == c)),
                    "certification failed: color-{c} cycle left to the loser"
                );
            }
        }
    }
}

/// Reference solver for tests: enumerate every positional strategy of
/// Player O and check, per start vertex, whether some strategy denies
/// Player I every reachable odd-dominated cycle. Exponential, so callers
/// keep the games tiny.
pub fn solve_by_enumeration(g: &ParityGame) -> Vec<Player> {
    let n = g.arena.n_vertices();
    let o_vertices: Vec<usize> = (0..n).filter(|&v| g.arena.owner(v) == Player::O).collect();
    let mut pick: Vec<usize> = vec![0; o_vertices.len()];
    let mut o_wins = vec![false; n];
    loop {
        let chosen: HashMap<usize, usize> = o_vertices
            .iter()
            .zip(&pick)
            .map(|(&v, &i)| (v, g.arena.successors(v)[i]))
            .collect();
        let succ_of = |v: usize| -> Vec<usize> {
            match chosen.get(&v) {
                Some(&u) => vec![u],
                None => g.arena.successors(v).to_vec(),
            }
        };
        // Vertices on some odd-dominated cycle of the fixed graph.
        let mut on_bad = vec![false; n];
        let odd_colors: BTreeSet<u32> =
            g.colors.iter().copied().filter(|c| c % 2 == 1).collect();
        for &c in &odd_colors {
            let allowed: Vec<bool> = (0..n).map(|v| g.colors[v] <= c).collect();
            let restricted = |v: usize, out: &mut Vec<usize>| {
                if allowed[v] {
                    out.extend(succ_of(v).into_iter().filter(|&t| allowed[t]));
                }
            };
            for comp in tarjan_sccs(n, &restricted) {
                if !allowed[comp[0]] {
                    continue;
                }
                let cyclic = comp.len() > 1 || {
                    let mut out = Vec::new();
                    restricted(comp[0], &mut out);
                    out.contains(&comp[0])
                };
                if cyclic && comp.iter().any(|&v| g.colors[v] == c) {
                    for &v in &comp {
                        on_bad[v] = true;
                    }
                }
            }
        }
        // With O fixed, Player I controls all remaining branching, so I wins
        // exactly from the vertices that reach a bad cycle.
        let mut reach_bad = on_bad.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for v in 0..n {
                if !reach_bad[v] && succ_of(v).iter().any(|&t| reach_bad[t]) {
                    reach_bad[v] = true;
                    changed = true;
                }
            }
        }
        for v in 0..n {
            if !reach_bad[v] {
                o_wins[v] = true;
            }
        }
        // Next strategy in product order.
        let mut i = pick.len();
        loop {
            if i == 0 {
                return (0..n)
                    .map(|v| if o_wins[v] { Player::O } else { Player::I })
                    .collect();
            }
            i -= 1;
            pick[i] += 1;
            if pick[i] < g.arena.successors(o_vertices[i]).len() {
                break;
            }
            pick[i] = 0;
        }
    }
}

/// Seeded generator of small arbitrary parity games for solver testing.
pub fn random_parity_game(seed: u64, max_vertices: usize, max_color: u32) -> ParityGame {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vertices.max(1));
    let owner: Vec<Player> = (0..n)
        .map(|_| if rng.gen::<bool>() { Player::I } else { Player::O })
        .collect();
    let colors: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=max_color)).collect();
    let succs: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let deg = rng.gen_range(1..=3usize.min(n));
            (0..deg).map(|_| rng.gen_range(0..n)).collect()
        })
        .collect();
    ParityGame {
        arena: Arena::from_successor_lists(owner, succs, 0),
        colors,
        labels: None,
    }
}

// ---------------------------------------------------------------------------
// The reduced game over block classes.
// ---------------------------------------------------------------------------

/// What a vertex of the reduced game stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ReducedVertex {
    /// Initial vertex; Player I is about to pick the first class.
    Start,
    /// Player I, sitting in automaton state `q` with the monitor having
    /// reported `m` for the last resolved block, picks the next class.
    /// `class` is the class whose resolution is still pending.
    Turn { q: usize, m: MemoryElem, class: usize },
    /// Player O resolves the pending class `prev_class` from state `q` to a
    /// concrete pair, while `next_class` has just been announced.
    Resolve { q: usize, prev_class: usize, next_class: usize },
}

/// Construction data of the reduced game, kept for lifting a solved
/// strategy back to concrete blocks.
#[derive(Debug, Clone)]
pub struct ReducedGameMeta {
    pub classes: Vec<EqClass>,
    /// Descriptor per game vertex. After a Muller-to-parity reduction this
    /// maps each product vertex to the descriptor of its original vertex.
    pub vertex_info: Vec<ReducedVertex>,
}

/// Build the reduced game: Player I announces equivalence classes of input
/// blocks one round ahead, Player O resolves the previous class to one of
/// the monitored pairs its summary allows. The dummy opening move is folded
/// into the initial vertex. A Muller aggregation is turned into parity via
/// a latest-appearance record.
pub fn build_reduced_game(
    p: &MonitoredProduct,
    cond: &AggregatedCondition,
    classes: &[EqClass],
) -> (ParityGame, ReducedGameMeta) {
    assert!(!classes.is_empty(), "need at least one block class");
    let q_init = p.automaton.initial;

    let mut verts: Vec<ReducedVertex> = vec![ReducedVertex::Start];
    let mut index: HashMap<ReducedVertex, usize> = HashMap::new();
    index.insert(ReducedVertex::Start, 0);
    let mut succs: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < verts.len() {
        let cur = verts[i].clone();
        let mut out = Vec::new();
        let mut push = |v: ReducedVertex, verts: &mut Vec<ReducedVertex>| -> usize {
            match index.get(&v) {
                Some(&t) => t,
                None => {
                    let t = verts.len();
                    index.insert(v.clone(), t);
                    verts.push(v);
                    t
                }
            }
        };
        match cur {
            ReducedVertex::Start => {
                for c in 0..classes.len() {
                    out.push(push(
                        ReducedVertex::Turn { q: q_init, m: MemoryElem::Bottom, class: c },
                        &mut verts,
                    ));
                }
            }
            ReducedVertex::Turn { q, class, .. } => {
                for next in 0..classes.len() {
                    out.push(push(
                        ReducedVertex::Resolve { q, prev_class: class, next_class: next },
                        &mut verts,
                    ));
                }
            }
            ReducedVertex::Resolve { q, prev_class, next_class } => {
                for (q2, m2) in &classes[prev_class].summary.rows[q] {
                    out.push(push(
                        ReducedVertex::Turn { q: *q2, m: m2.clone(), class: next_class },
                        &mut verts,
                    ));
                }
            }
        }
        succs.push(out);
        i += 1;
    }

    let owner: Vec<Player> = verts
        .iter()
        .map(|v| match v {
            ReducedVertex::Resolve { .. } => Player::O,
            _ => Player::I,
        })
        .collect();
    let labels: Vec<String> = verts
        .iter()
        .map(|v| match v {
            ReducedVertex::Start => "start".to_string(),
            ReducedVertex::Turn { q, m, class } => {
                format!("T:{},{},S{}", p.automaton.state_names[*q], m, class)
            }
            ReducedVertex::Resolve { q, prev_class, next_class } => format!(
                "R:{},S{},S{}",
                p.automaton.state_names[*q], prev_class, next_class
            ),
        })
        .collect();
    let arena = Arena::from_successor_lists(owner, succs, 0);

    match cond {
        AggregatedCondition::LimsupEven => {
            let min_color = monitor_min_color(p);
            let colors: Vec<u32> = verts
                .iter()
                .map(|v| match v {
                    ReducedVertex::Turn { m: MemoryElem::Color(c), .. } => *c,
                    _ => min_color,
                })
                .collect();
            let game = ParityGame { arena, colors, labels: Some(labels) };
            (game, ReducedGameMeta { classes: classes.to_vec(), vertex_info: verts })
        }
        AggregatedCondition::InfUnionInFamily(family) => {
            let vertex_labels: Vec<Option<BTreeSet<usize>>> = verts
                .iter()
                .map(|v| match v {
                    ReducedVertex::Turn { m: MemoryElem::Set(s), .. } => Some(s.clone()),
                    _ => None,
                })
                .collect();
            let muller = MullerLabeledArena {
                arena,
                labels: vertex_labels,
                n_letters: p.automaton.n_states(),
                family: family.clone(),
            };
            let (mut game, orig) = lar_to_parity(&muller);
            game.labels = Some(orig.iter().map(|&o| labels[o].clone()).collect());
            let vertex_info = orig.iter().map(|&o| verts[o].clone()).collect();
            (game, ReducedGameMeta { classes: classes.to_vec(), vertex_info })
        }
    }
}

fn monitor_min_color(p: &MonitoredProduct) -> u32 {
    p.monitor
        .memory
        .iter()
        .filter_map(|m| match m {
            MemoryElem::Color(c) => Some(*c),
            _ => None,
        })
        .min()
        .expect("a color monitor has at least one color")
}

/// An arena whose vertices may carry sets of letters, to be accepted when
/// the union of the sets seen infinitely often belongs to the family.
#[derive(Debug, Clone)]
pub struct MullerLabeledArena {
    pub arena: Arena,
    pub labels: Vec<Option<BTreeSet<usize>>>,
    /// Letters range over `0..n_letters`.
    pub n_letters: usize,
    pub family: Vec<BTreeSet<usize>>,
}

/// Latest-appearance-record reduction to parity. The record is a
/// permutation of the letters; each labeled vertex moves its letters to the
/// front (keeping their declaration order among themselves) and the depth
/// of the deepest moved letter decides the color: `2h` when the letters up
/// to that depth form a set in the family, `2h + 1` otherwise. Unlabeled
/// vertices get color 0. Returns the product game and, per product vertex,
/// the original vertex it came from.
pub fn lar_to_parity(m: &MullerLabeledArena) -> (ParityGame, Vec<usize>) {
    #[derive(Clone, PartialEq, Eq, Hash)]
    struct Node {
        orig: usize,
        record: Vec<usize>,
    }
    let family: BTreeSet<&BTreeSet<usize>> = m.family.iter().collect();
    let initial_record: Vec<usize> = (0..m.n_letters).collect();

    let step = |record: &[usize], label: &Option<BTreeSet<usize>>| -> (Vec<usize>, u32) {
        match label {
            None => (record.to_vec(), 0),
            Some(set) => {
                let mut hit = 0;
                for (pos, &letter) in record.iter().enumerate() {
                    if set.contains(&letter) {
                        hit = pos + 1;
                    }
                }
                let moved: Vec<usize> =
                    (0..m.n_letters).filter(|l| set.contains(l)).collect();
                let mut rest: Vec<usize> = record
                    .iter()
                    .copied()
                    .filter(|l| !set.contains(l))
                    .collect();
                let mut new_record = moved;
                new_record.append(&mut rest);
                let prefix: BTreeSet<usize> = record[..hit].iter().copied().collect();
                let h = hit as u32;
                let color = if family.contains(&prefix) { 2 * h } else { 2 * h + 1 };
                (new_record, color)
            }
        }
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut colors: Vec<u32> = Vec::new();
    let mut index: HashMap<Node, usize> = HashMap::new();
    let (rec0, col0) = step(&initial_record, &m.labels[m.arena.initial()]);
    let start = Node { orig: m.arena.initial(), record: rec0 };
    index.insert(start.clone(), 0);
    nodes.push(start);
    colors.push(col0);
    let mut succs: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < nodes.len() {
        let node = nodes[i].clone();
        let mut out = Vec::new();
        for &t in m.arena.successors(node.orig) {
            let (rec, col) = step(&node.record, &m.labels[t]);
            let next = Node { orig: t, record: rec };
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = nodes.len();
                    index.insert(next.clone(), id);
                    nodes.push(next);
                    colors.push(col);
                    id
                }
            };
            out.push(id);
        }
        succs.push(out);
        i += 1;
    }
    let owner: Vec<Player> = nodes.iter().map(|n| m.arena.owner(n.orig)).collect();
    let orig: Vec<usize> = nodes.iter().map(|n| n.orig).collect();
    let arena = Arena::from_successor_lists(owner, succs, 0);
    (ParityGame { arena, colors, labels: None }, orig)
}

// ---------------------------------------------------------------------------
// Letter-by-letter reference arenas.
// ---------------------------------------------------------------------------

/// Decoded vertex of a delay arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayVertex {
    /// Player I is about to reveal the whole initial queue.
    Start,
    /// Player O answers the oldest of the `d` queued input letters from
    /// automaton state `q`.
    Answer { q: usize, queue: Vec<usize> },
    /// The automaton just took `(q_from, (input, output), q_to)`; Player I
    /// appends the next input letter to the `d - 1` queued ones.
    Feed { q_from: usize, input: usize, output: usize, q_to: usize, queue: Vec<usize> },
}

/// Dense vertex numbering of a delay arena, kept around to decode solved
/// strategies back into letters.
#[derive(Debug, Clone)]
pub struct DelayArenaMeta {
    /// Number of input letters Player I is ahead; the queue length.
    pub lookahead: usize,
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    i_base: usize,
    o_base: usize,
    queue_short: usize,
    queue_long: usize,
}

impl DelayArenaMeta {
    fn decode_queue(&self, mut code: usize, len: usize) -> Vec<usize> {
        let mut q = vec![0usize; len];
        for slot in (0..len).rev() {
            q[slot] = code % self.n_inputs;
            code /= self.n_inputs;
        }
        q
    }

    pub fn decode(&self, v: usize) -> DelayVertex {
        if v == 0 {
            return DelayVertex::Start;
        }
        if v < self.o_base {
            let t = (v - self.i_base) / self.queue_short;
            let u = (v - self.i_base) % self.queue_short;
            let b = t % self.n_outputs;
            let a = (t / self.n_outputs) % self.n_inputs;
            let q_from = t / (self.n_outputs * self.n_inputs);
            DelayVertex::Feed {
                q_from,
                input: a,
                output: b,
                q_to: usize::MAX, // caller resolves via the automaton
                queue: self.decode_queue(u, self.lookahead - 1),
            }
        } else {
            let q = (v - self.o_base) / self.queue_long;
            let e = (v - self.o_base) % self.queue_long;
            DelayVertex::Answer { q, queue: self.decode_queue(e, self.lookahead) }
        }
    }
}

/// Build the arena that plays the game letter by letter while Player I
/// keeps a queue of `d` input letters the automaton has not consumed yet:
/// I first reveals `d` letters, then the players alternate, O consuming the
/// oldest queued letter and I appending a fresh one. The winner equals the
/// winner of the lookahead game where O's first output may wait for `d`
/// input letters. Exponential in `d` by construction, hence the budget.
pub fn build_delay_arena(
    a: &OmegaAutomaton,
    d: usize,
    budget: usize,
) -> Result<(ParityGame, DelayArenaMeta), GameError> {
    assert!(d >= 1, "lookahead must be positive");
    let a = a.pruned_to_reachable();
    let state_colors = match &a.acceptance {
        Acceptance::Parity { colors } => colors.clone(),
        other => return Err(GameError::NotParity { found: other.kind() }),
    };
    let n = a.n_states();
    let sigma = a.alphabet.n_inputs();
    let tau = a.alphabet.n_outputs();
    let t_count = n * sigma * tau;

    let queue_short_u = (sigma as u128).checked_pow(d as u32 - 1);
    let queue_long_u = (sigma as u128).checked_pow(d as u32);
    let total: Option<u128> = (|| {
        let qs = queue_short_u?;
        let ql = queue_long_u?;
        let i_part = (t_count as u128).checked_mul(qs)?;
        let o_part = (n as u128).checked_mul(ql)?;
        1u128.checked_add(i_part)?.checked_add(o_part)
    })();
    let required = total.unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(GameError::BudgetExceeded { required, budget });
    }
    let queue_short = queue_short_u.unwrap() as usize;
    let queue_long = queue_long_u.unwrap() as usize;
    let n_vertices = required as usize;
    let i_base = 1;
    let o_base = 1 + t_count * queue_short;

    // Transition targets, indexed by (q * sigma + a) * tau + b.
    let mut tgt = vec![0usize; t_count];
    for q in 0..n {
        for ain in 0..sigma {
            for b in 0..tau {
                tgt[(q * sigma + ain) * tau + b] = a.step(q, (ain, b));
            }
        }
    }
    let min_color = *state_colors.iter().min().unwrap();

    let mut owner = vec![Player::I; n_vertices];
    let mut colors = vec![min_color; n_vertices];
    for v in o_base..n_vertices {
        owner[v] = Player::O;
    }
    for t in 0..t_count {
        let color = state_colors[tgt[t]];
        for u in 0..queue_short {
            colors[i_base + t * queue_short + u] = color;
        }
    }

    // Successor table in compressed form; out-degrees are uniform per kind.
    let mut succ_start = Vec::with_capacity(n_vertices + 1);
    succ_start.push(0usize);
    let mut succ_flat: Vec<usize> = Vec::new();
    succ_flat.reserve(queue_long + t_count * queue_short * sigma + n * queue_long * tau);
    // Start: reveal any full queue.
    for e in 0..queue_long {
        succ_flat.push(o_base + a.initial * queue_long + e);
    }
    succ_start.push(succ_flat.len());
    // Feed vertices: append one input letter.
    for t in 0..t_count {
        let q_to = tgt[t];
        for u in 0..queue_short {
            for ain in 0..sigma {
                succ_flat.push(o_base + q_to * queue_long + (u * sigma + ain));
            }
            succ_start.push(succ_flat.len());
        }
    }
    // Answer vertices: consume the oldest queued letter.
    for q in 0..n {
        for e in 0..queue_long {
            let head = e / queue_short;
            let rest = e % queue_short;
            for b in 0..tau {
                let t = (q * sigma + head) * tau + b;
                succ_flat.push(i_base + t * queue_short + rest);
            }
            succ_start.push(succ_flat.len());
        }
    }
    let arena = Arena::from_csr(owner, succ_start, succ_flat, 0);

    let meta = DelayArenaMeta {
        lookahead: d,
        n_states: n,
        n_inputs: sigma,
        n_outputs: tau,
        i_base,
        o_base,
        queue_short,
        queue_long,
    };
    let labels = if n_vertices <= 10_000 {
        Some(
            (0..n_vertices)
                .map(|v| delay_vertex_label(&a, &meta, v))
                .collect(),
        )
    } else {
        None
    };
    Ok((ParityGame { arena, colors, labels }, meta))
}

fn delay_vertex_label(a: &OmegaAutomaton, meta: &DelayArenaMeta, v: usize) -> String {
    let queue_str = |q: &[usize]| {
        q.iter()
            .map(|&l| a.alphabet.inputs[l].as_str())
            .collect::<Vec<_>>()
            .join("")
    };
    match meta.decode(v) {
        DelayVertex::Start => "start".to_string(),
        DelayVertex::Answer { q, queue } => {
            format!("O:{}|{}", a.state_names[q], queue_str(&queue))
        }
        DelayVertex::Feed { q_from, input, output, queue, .. } => format!(
            "I:{}-{}/{}|{}",
            a.state_names[q_from],
            a.alphabet.inputs[input],
            a.alphabet.outputs[output],
            queue_str(&queue)
        ),
    }
}

/// The arena without lookahead: Player I reveals one letter, Player O
/// answers it immediately. Same winner as the game played with no delay.
pub fn build_gs_arena(a: &OmegaAutomaton) -> Result<ParityGame, GameError> {
    build_delay_arena(a, 1, usize::MAX).map(|(g, _)| g)
}

// ---------------------------------------------------------------------------
// Block arena: whole blocks as moves.
// ---------------------------------------------------------------------------

/// Decoded vertex of a block arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockVertex {
    /// Player I is about to announce the opening input block.
    Start,
    /// Player I announces the next input block while `pending` waits for an
    /// answer; `color` is the largest priority the automaton passed while
    /// consuming the exchange that led here.
    Announce { q: usize, pending: usize, color: u32 },
    /// Player O answers `pending` from state `q` now that block `next` is
    /// on the table.
    Answer { q: usize, pending: usize, next: usize },
}

/// Dense vertex numbering of a block arena, kept around to decode solved
/// strategies back into blocks.
#[derive(Debug, Clone)]
pub struct BlockArenaMeta {
    /// The blocksize; every move commits `d` letters at once.
    pub d: usize,
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// Input blocks of length `d`; vertex encodings index into this list.
    pub in_blocks: Vec<Vec<usize>>,
    /// Output blocks of length `d`, in the order Answer successors appear.
    pub out_blocks: Vec<Vec<usize>>,
    i_base: usize,
    o_base: usize,
    n_colors: usize,
}

impl BlockArenaMeta {
    pub fn announce_vertex(&self, q: usize, pending: usize, color: u32) -> usize {
        let b = self.in_blocks.len();
        self.i_base + (q * b + pending) * self.n_colors + color as usize
    }

    pub fn answer_vertex(&self, q: usize, pending: usize, next: usize) -> usize {
        let b = self.in_blocks.len();
        self.o_base + (q * b + pending) * b + next
    }

    pub fn decode(&self, v: usize) -> BlockVertex {
        if v == 0 {
            return BlockVertex::Start;
        }
        let b = self.in_blocks.len();
        if v < self.o_base {
            let t = (v - self.i_base) / self.n_colors;
            let color = ((v - self.i_base) % self.n_colors) as u32;
            BlockVertex::Announce { q: t / b, pending: t % b, color }
        } else {
            let t = (v - self.o_base) / b;
            BlockVertex::Answer { q: t / b, pending: t % b, next: (v - self.o_base) % b }
        }
    }
}

/// Build the arena that plays the game in whole blocks of `d` letters:
/// Player I opens with two input blocks, then the players alternate, O
/// answering the older pending block only after seeing the newer one. This
/// is the game a blockwise transducer actually plays, and for small `d` its
/// winner can differ from every letter-by-letter lookahead arena. Announce
/// vertices carry the largest priority the automaton passed while consuming
/// the exchange, so the parity condition transfers unchanged. Exponential
/// in `d`; the budget caps vertices and edges together.
pub fn build_block_arena(
    a: &OmegaAutomaton,
    d: usize,
    budget: usize,
) -> Result<(ParityGame, BlockArenaMeta), GameError> {
    assert!(d >= 1, "blocksize must be positive");
    let a = a.pruned_to_reachable();
    let state_colors = match &a.acceptance {
        Acceptance::Parity { colors } => colors.clone(),
        other => return Err(GameError::NotParity { found: other.kind() }),
    };
    let n = a.n_states();
    let sigma = a.alphabet.n_inputs();
    let tau = a.alphabet.n_outputs();
    let max_color = *state_colors.iter().max().unwrap();
    let min_color = *state_colors.iter().min().unwrap();
    let n_colors = max_color as usize + 1;

    let sized: Option<(u128, u128)> = (|| {
        let b = (sigma as u128).checked_pow(d as u32)?;
        let ob = (tau as u128).checked_pow(d as u32)?;
        let i_part = (n as u128).checked_mul(b)?.checked_mul(n_colors as u128)?;
        let o_part = (n as u128).checked_mul(b)?.checked_mul(b)?;
        let vertices = 1u128.checked_add(i_part)?.checked_add(o_part)?;
        let edges = b
            .checked_add(i_part.checked_mul(b)?)?
            .checked_add(o_part.checked_mul(ob)?)?;
        Some((vertices, vertices.checked_add(edges)?))
    })();
    let required = sized.map(|(_, total)| total).unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(GameError::BudgetExceeded { required, budget });
    }
    let n_vertices = sized.unwrap().0 as usize;
    let in_blocks = enumerate_words(sigma, d);
    let out_blocks = enumerate_words(tau, d);
    let b_count = in_blocks.len();
    let i_base = 1;
    let o_base = 1 + n * b_count * n_colors;

    // Effect of one exchange, indexed by (q * b_count + bi) * out + bo:
    // the state reached and the largest priority passed on the way.
    let mut piece_tgt = vec![0usize; n * b_count * out_blocks.len()];
    let mut piece_color = vec![min_color; n * b_count * out_blocks.len()];
    for q in 0..n {
        for (bi, ain) in in_blocks.iter().enumerate() {
            for (bo, bout) in out_blocks.iter().enumerate() {
                let mut cur = q;
                let mut hi = min_color;
                for k in 0..d {
                    cur = a.step(cur, (ain[k], bout[k]));
                    hi = hi.max(state_colors[cur]);
                }
                let t = (q * b_count + bi) * out_blocks.len() + bo;
                piece_tgt[t] = cur;
                piece_color[t] = hi;
            }
        }
    }

    let mut owner = vec![Player::I; n_vertices];
    let mut colors = vec![min_color; n_vertices];
    for v in o_base..n_vertices {
        owner[v] = Player::O;
    }
    for q in 0..n {
        for bi in 0..b_count {
            for c in 0..n_colors {
                colors[i_base + (q * b_count + bi) * n_colors + c] = c as u32;
            }
        }
    }

    // Successor lists; Answer successors are pushed in output-block order,
    // so the position of a choice recovers the block that was played.
    let mut succ_start = Vec::with_capacity(n_vertices + 1);
    succ_start.push(0usize);
    let mut succ_flat: Vec<usize> = Vec::new();
    // Start: announce the opening block, nothing consumed yet.
    for bi in 0..b_count {
        succ_flat.push(i_base + (a.initial * b_count + bi) * n_colors + min_color as usize);
    }
    succ_start.push(succ_flat.len());
    // Announce vertices: put the next block on the table.
    for qb in 0..n * b_count {
        for _c in 0..n_colors {
            for next in 0..b_count {
                succ_flat.push(o_base + qb * b_count + next);
            }
            succ_start.push(succ_flat.len());
        }
    }
    // Answer vertices: consume the pending block against a chosen answer.
    for q in 0..n {
        for bi in 0..b_count {
            for next in 0..b_count {
                for bo in 0..out_blocks.len() {
                    let t = (q * b_count + bi) * out_blocks.len() + bo;
                    succ_flat.push(
                        i_base
                            + (piece_tgt[t] * b_count + next) * n_colors
                            + piece_color[t] as usize,
                    );
                }
                succ_start.push(succ_flat.len());
            }
        }
    }
    let arena = Arena::from_csr(owner, succ_start, succ_flat, 0);

    let meta = BlockArenaMeta {
        d,
        n_states: n,
        n_inputs: sigma,
        n_outputs: tau,
        in_blocks,
        out_blocks,
        i_base,
        o_base,
        n_colors,
    };
    let labels = if n_vertices <= 10_000 {
        Some((0..n_vertices).map(|v| block_vertex_label(&a, &meta, v)).collect())
    } else {
        None
    };
    Ok((ParityGame { arena, colors, labels }, meta))
}

fn block_vertex_label(a: &OmegaAutomaton, meta: &BlockArenaMeta, v: usize) -> String {
    let block_str = |bl: &[usize]| {
        bl.iter().map(|&l| a.alphabet.inputs[l].as_str()).collect::<Vec<_>>().join("")
    };
    match meta.decode(v) {
        BlockVertex::Start => "start".to_string(),
        BlockVertex::Announce { q, pending, color } => format!(
            "I:{}|{}|{}",
            a.state_names[q],
            block_str(&meta.in_blocks[pending]),
            color
        ),
        BlockVertex::Answer { q, pending, next } => format!(
            "O:{}|{}>{}",
            a.state_names[q],
            block_str(&meta.in_blocks[pending]),
            block_str(&meta.in_blocks[next])
        ),
    }
}

// ---------------------------------------------------------------------------
// Text formats.
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unknown vertex id {id}")]
    UnknownVertex { line: usize, id: usize },
    #[error("line {line}: duplicate vertex id {id}")]
    DuplicateVertex { line: usize, id: usize },
    #[error("vertex {id} has no successors")]
    Terminal { id: usize },
    #[error("missing initial declaration")]
    NoInitial,
}

/// Parse the line-oriented game format: one `vertex` line per vertex plus
/// one `initial` line. Ids may be sparse; they are renumbered densely in
/// declaration order and kept as labels.
pub fn parse_pg(text: &str) -> Result<ParityGame, PgParseError> {
    let mut ids: Vec<usize> = Vec::new();
    let mut id_index: HashMap<usize, usize> = HashMap::new();
    let mut owners: Vec<Player> = Vec::new();
    let mut colors: Vec<u32> = Vec::new();
    let mut raw_succs: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut initial_id: Option<(usize, usize)> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let head = parts.next().unwrap();
        let malformed = |msg: &str| PgParseError::Malformed { line, msg: msg.to_string() };
        match head {
            "vertex" => {
                let id: usize = parts
                    .next()
                    .ok_or_else(|| malformed("missing vertex id"))?
                    .parse()
                    .map_err(|_| malformed("vertex id must be a number"))?;
                if id_index.contains_key(&id) {
                    return Err(PgParseError::DuplicateVertex { line, id });
                }
                let owner_part = parts.next().ok_or_else(|| malformed("missing owner="))?;
                let owner = match owner_part {
                    "owner=I" => Player::I,
                    "owner=O" => Player::O,
                    _ => return Err(malformed("expected owner=I or owner=O")),
                };
                let color_part = parts.next().ok_or_else(|| malformed("missing color="))?;
                let color: u32 = color_part
                    .strip_prefix("color=")
                    .ok_or_else(|| malformed("expected color=<int>"))?
                    .parse()
                    .map_err(|_| malformed("color must be a non-negative number"))?;
                let succ_head = parts.next().ok_or_else(|| malformed("missing succ="))?;
                let mut succ_ids: Vec<usize> = Vec::new();
                let first = succ_head
                    .strip_prefix("succ=")
                    .ok_or_else(|| malformed("expected succ=<ids>"))?;
                for tok in std::iter::once(first).chain(parts) {
                    succ_ids.push(
                        tok.parse().map_err(|_| malformed("successor ids must be numbers"))?,
                    );
                }
                id_index.insert(id, ids.len());
                ids.push(id);
                owners.push(owner);
                colors.push(color);
                raw_succs.push((line, succ_ids));
            }
            "initial" => {
                let id: usize = parts
                    .next()
                    .ok_or_else(|| malformed("missing initial id"))?
                    .parse()
                    .map_err(|_| malformed("initial id must be a number"))?;
                initial_id = Some((line, id));
            }
            _ => return Err(malformed("expected `vertex` or `initial`")),
        }
    }

    let (init_line, init_id) = initial_id.ok_or(PgParseError::NoInitial)?;
    let &initial = id_index
        .get(&init_id)
        .ok_or(PgParseError::UnknownVertex { line: init_line, id: init_id })?;
    let mut succs: Vec<Vec<usize>> = Vec::with_capacity(ids.len());
    for (line, list) in &raw_succs {
        if list.is_empty() {
            return Err(PgParseError::Terminal { id: ids[succs.len()] });
        }
        let mut resolved = Vec::with_capacity(list.len());
        for id in list {
            resolved.push(
                *id_index
                    .get(id)
                    .ok_or(PgParseError::UnknownVertex { line: *line, id: *id })?,
            );
        }
        succs.push(resolved);
    }
    let labels = ids.iter().map(|id| id.to_string()).collect();
    Ok(ParityGame {
        arena: Arena::from_successor_lists(owners, succs, initial),
        colors,
        labels: Some(labels),
    })
}

/// Serialize a game in the `vertex ... / initial ...` format with dense ids.
pub fn write_pg(g: &ParityGame) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for v in 0..g.arena.n_vertices() {
        let succ = g
            .arena
            .successors(v)
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            s,
            "vertex {} owner={} color={} succ={}",
            v, g.arena.owner(v), g.colors[v], succ
        )
        .unwrap();
    }
    writeln!(s, "initial {}", g.arena.initial()).unwrap();
    s
}

/// Graphviz rendering: diamonds for Player I, ellipses for Player O, color
/// in the label, initial vertex marked by an arrow from a point.
pub fn game_dot(g: &ParityGame) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    writeln!(s, "digraph game {{").unwrap();
    writeln!(s, "  rankdir=LR;").unwrap();
    writeln!(s, "  init [shape=point];").unwrap();
    for v in 0..g.arena.n_vertices() {
        let shape = match g.arena.owner(v) {
            Player::I => "diamond",
            Player::O => "ellipse",
        };
        let name = match &g.labels {
            Some(labels) => format!("{}\\n{}", labels[v], g.colors[v]),
            None => format!("v{}\\n{}", v, g.colors[v]),
        };
        writeln!(s, "  v{} [shape={},label=\"{}\"];", v, shape, name).unwrap();
    }
    writeln!(s, "  init -> v{};", g.arena.initial()).unwrap();
    for v in 0..g.arena.n_vertices() {
        for &t in g.arena.successors(v) {
            writeln!(s, "  v{} -> v{};", v, t).unwrap();
        }
    }
    writeln!(s, "}}").unwrap();
    s
}
