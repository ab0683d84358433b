//! Release gate: the measured results this library stands behind, checked
//! end to end and reported one line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see every line; the
//! test fails if any criterion does.
//!
//! Tolerances, budgets, and seeds are pinned here as constants so a
//! regression cannot hide behind a loosened bound.

use std::panic::catch_unwind;
use std::time::{Duration, Instant};

use dg_core::automata::{
    gen_family, has_bad_j_pair, lasso_accepts, normalize_to_parity, random_parity_automaton,
    xn_word, FamilySpec, OmegaAutomaton,
};
use dg_core::engine::{
    minimal_blocksize, replay_block_lasso, simulate, verify_block_strategy, InputStrategy,
    PrefixVerdict,
};
use dg_core::games::{
    build_block_arena, build_delay_arena, build_reduced_game, random_parity_game,
    solve_by_enumeration, zielonka_solve, GameError, ParityGame, Player, ReducedGameMeta, Solution,
};
use dg_core::monitor::{
    broken_constant_monitor, check_strong_aggregation_on_lassos, monitored_product, parity_monitor,
    MemoryElem, MonitoredProduct,
};
use dg_core::strategy::{
    block_positional_to_transducer, builtin_strategy, explicit_to_succinct,
    minimize_block_transducer, positional_to_mealy, random_block_transducer, reduced_to_block,
    reduced_to_succinct, succinct_to_explicit, BuiltinSpec, ExplicitBlockTransducer,
    SuccinctTransducer,
};
use dg_core::summary::{
    build_summary_automaton, class_witness, effective_blocksize, find_completion,
    infinite_class_threshold, infinite_classes, word_summary, SummaryAutomaton,
};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// All words of the given length, lexicographic in declaration order.
fn enumerate_words(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut words: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..len {
        words = words
            .into_iter()
            .flat_map(|w| {
                (0..base).map(move |a| {
                    let mut wa = w.clone();
                    wa.push(a);
                    wa
                })
            })
            .collect();
    }
    words
}

/// Working budget for everything that is expected to be small.
const BUDGET: usize = 10_000_000;
/// Budget for the lookahead arenas of the n=3 bad-j-pair thresholds, the
/// largest objects in the suite.
const ARENA_BUDGET: usize = 80_000_000;
/// Budget deciding which lookahead the cross-validation uses: the full
/// certified one when it fits, the infinite-class threshold otherwise.
const CROSS_BUDGET: usize = 4_000_000;
/// Multiplicative slack on the tradeoff size bounds.
const SLACK: usize = 4;

fn copy_spec() -> FamilySpec {
    FamilySpec::Copy { symbols: vec!["0".into(), "1".into()] }
}

struct Pipe {
    parity: OmegaAutomaton,
    product: MonitoredProduct,
    sa: SummaryAutomaton,
    game: ParityGame,
    meta: ReducedGameMeta,
    sol: Solution,
}

fn pipeline(a: &OmegaAutomaton) -> Pipe {
    let parity = normalize_to_parity(a).unwrap().pruned_to_reachable();
    let (mon, cond) = parity_monitor(&parity).unwrap();
    let product = monitored_product(&parity, &mon);
    let sa = build_summary_automaton(&product);
    let classes = infinite_classes(&sa);
    let (game, meta) = build_reduced_game(&product, &cond, &classes);
    let sol = zielonka_solve(&game);
    Pipe { parity, product, sa, game, meta, sol }
}

fn reduced_winner(p: &Pipe) -> Player {
    p.sol.winner_at(p.game.arena.initial())
}

/// Winner of the letterwise game where O may lag `lookahead` letters
/// behind.
fn lookahead_winner(parity: &OmegaAutomaton, lookahead: usize, budget: usize) -> Player {
    let (g, _) = build_delay_arena(parity, lookahead, budget).unwrap();
    let sol = zielonka_solve(&g);
    sol.winner_at(g.arena.initial())
}

/// Feed every machine the same blocks and compare what comes out.
fn same_behavior(a: &ExplicitBlockTransducer, b: &ExplicitBlockTransducer, d: usize, depth: usize) {
    assert_eq!(a.n_masters(), b.n_masters());
    let blocks = enumerate_words(a.n_inputs(), d);
    for seq in enumerate_words(blocks.len(), depth) {
        let (mut pa, mut pb) = (a.initial, b.initial);
        for pair in seq.windows(2) {
            let (b1, b2) = (&blocks[pair[0]], &blocks[pair[1]]);
            assert_eq!(a.emit(pa, b1, b2).unwrap(), b.emit(pb, b1, b2).unwrap());
            pa = a.step(pa, b1).unwrap();
            pb = b.step(pb, b1).unwrap();
            assert_eq!(pa, pb, "master renumbering is not expected here");
        }
    }
}

// Criterion 1: the bad-j-pair family needs exactly the predicted
// blocksizes: 3 for n=2 (losing below, winning from there on) and 5 for
// n=3 (the 2^n/2 threshold).
fn c01_bad_j_pair_thresholds() {
    let start = Instant::now();
    let a2 = gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap();
    assert_eq!(minimal_blocksize(&a2, 6, BUDGET).unwrap(), Some(3));
    let parity = normalize_to_parity(&a2).unwrap();
    for (d, expect) in [
        (1, Player::I),
        (2, Player::I),
        (3, Player::O),
        (4, Player::O),
        (5, Player::O),
    ] {
        assert_eq!(
            lookahead_winner(&parity, 2 * d, BUDGET),
            expect,
            "blocksize {d} (lookahead {})",
            2 * d
        );
    }
    let a3 = gen_family(&FamilySpec::BadJPair { n: 3 }).unwrap();
    assert_eq!(minimal_blocksize(&a3, 5, ARENA_BUDGET).unwrap(), Some(5));
    assert!(start.elapsed() < Duration::from_secs(30), "took {:?}", start.elapsed());
}

// Criterion 2: the copy game is winnable at every blocksize 1..=4 through
// the full pipeline, and the hand-built copy machine is the minimal one:
// one master, one transition-slave state, one output-slave state plus the
// block it carries.
fn c02_copy_game_at_every_blocksize() {
    let c = gen_family(&copy_spec()).unwrap();
    let p = pipeline(&c);
    assert_eq!(reduced_winner(&p), Player::O);
    let threshold = infinite_class_threshold(&p.sa);
    let mealy = positional_to_mealy(&p.game, &p.sol, &p.meta).unwrap();
    for d in 1..=4 {
        let t = if d >= threshold {
            reduced_to_block(&mealy, &p.product, &p.sa, d).unwrap()
        } else {
            let (g, meta) = build_block_arena(&p.parity, d, BUDGET).unwrap();
            let sol = zielonka_solve(&g);
            assert_eq!(sol.winner_at(g.arena.initial()), Player::O, "blocksize {d}");
            block_positional_to_transducer(&p.parity.alphabet, &g, &sol, &meta, BUDGET).unwrap()
        };
        assert!(verify_block_strategy(&c, &t, d, BUDGET).unwrap().winning, "blocksize {d}");
    }
    for d in 1..=4 {
        let b = builtin_strategy(&BuiltinSpec::Copy { symbols: vec!["0".into(), "1".into()], d })
            .unwrap();
        assert_eq!(b.n_masters(), 1);
        assert_eq!(b.delta.n_states, 1);
        assert_eq!(b.lambda.n_states, 1 + d);
        let e = succinct_to_explicit(&b, d);
        assert!(verify_block_strategy(&c, &e, d, BUDGET).unwrap().winning);
    }
}

// Criterion 3: the reduced game answers the same winner as the spelled-out
// lookahead arena, on the three stock examples and twenty seeded random
// parity automata. The lookahead is twice the certified blocksize when
// that arena fits the budget, twice the infinite-class threshold
// otherwise.
fn c03_winner_cross_validation() {
    let start = Instant::now();
    let cross = |a: &OmegaAutomaton, label: &str| -> bool {
        let p = pipeline(a);
        let d_eff = effective_blocksize(&p.sa);
        let threshold = infinite_class_threshold(&p.sa);
        let arena = match build_delay_arena(&p.parity, 2 * d_eff, CROSS_BUDGET) {
            Ok((g, _)) => g,
            Err(GameError::BudgetExceeded { .. }) => {
                match build_delay_arena(&p.parity, 2 * threshold, CROSS_BUDGET) {
                    Ok((g, _)) => g,
                    Err(GameError::BudgetExceeded { .. }) => return false,
                    Err(e) => panic!("{label}: {e}"),
                }
            }
            Err(e) => panic!("{label}: {e}"),
        };
        let sol = zielonka_solve(&arena);
        assert_eq!(sol.winner_at(arena.arena.initial()), reduced_winner(&p), "{label}");
        true
    };
    for (spec, label) in [
        (copy_spec(), "copy"),
        (FamilySpec::BadJPair { n: 2 }, "badjpair(2)"),
        (FamilySpec::Reversal { k: 4 }, "reversal(4)"),
    ] {
        let a = gen_family(&spec).unwrap();
        assert!(cross(&a, label), "{label} must fit the cross-validation budget");
    }
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 20 {
        let a = random_parity_automaton(seed, 1 + (seed as usize % 3), 2, 2, 2);
        // Seeds whose threshold arena still overflows the budget are passed
        // over; the seed sequence itself stays fixed.
        if cross(&a, &format!("random seed {seed}")) {
            checked += 1;
        }
        seed += 1;
    }
    assert!(start.elapsed() < Duration::from_secs(120), "took {:?}", start.elapsed());
}

// Criterion 4: tabulating a machine and expanding it back (in either
// order) preserves its behavior exactly, over all block sequences of
// length up to 3.
fn c04_round_trips() {
    let d = 2;
    let mut explicits: Vec<ExplicitBlockTransducer> = vec![
        succinct_to_explicit(
            &builtin_strategy(&BuiltinSpec::Copy { symbols: vec!["0".into(), "1".into()], d })
                .unwrap(),
            d,
        ),
        succinct_to_explicit(&builtin_strategy(&BuiltinSpec::Reversal { k: 4, d }).unwrap(), d),
    ];
    for seed in 0..3 {
        explicits.push(random_block_transducer(seed, 2, d, 2, 2));
    }
    assert_eq!(explicits.len(), 5);
    for t in &explicits {
        let s = explicit_to_succinct(t, BUDGET).unwrap();
        let back = succinct_to_explicit(&s, d);
        same_behavior(t, &back, d, 3);
        // And once more starting from the tabulated form.
        let s2 = explicit_to_succinct(&back, BUDGET).unwrap();
        let back2 = succinct_to_explicit(&s2, d);
        same_behavior(&back, &back2, d, 3);
    }
}

// Criterion 5: the reversal machines trade transition-slave states for
// output-slave states as the blocksize grows: |delta| falls within
// 4 * 2^(k-d) while |lambda| stays within 4 * 2^d, and all of them win.
fn c05_reversal_tradeoff() {
    let k = 4u32;
    let rev = gen_family(&FamilySpec::Reversal { k }).unwrap();
    let mut prev_delta = usize::MAX;
    for d in 2..=4usize {
        let b = builtin_strategy(&BuiltinSpec::Reversal { k, d }).unwrap();
        let e = succinct_to_explicit(&b, d);
        assert!(verify_block_strategy(&rev, &e, d, BUDGET).unwrap().winning, "d={d}");
        let delta = b.delta_size();
        let lambda = b.lambda_size();
        assert!(delta <= SLACK << (k as usize - d), "d={d}: delta={delta}");
        assert!(lambda <= SLACK << d, "d={d}: lambda={lambda}");
        assert!(delta <= prev_delta, "delta must not grow with d");
        prev_delta = delta;
    }
}

// Criterion 6: the witness words behind the thresholds: x_n avoids bad
// pairs entirely, while no word of length 2^n over {1..n} does.
fn c06_bad_pair_combinatorics() {
    for n in 1..=4u32 {
        let w = xn_word(n);
        assert_eq!(w.len(), (1 << n) - 1);
        for j in 1..=n {
            assert!(!has_bad_j_pair(&w, j), "x_{n} contains a bad {j}-pair");
        }
    }
    for n in 1..=3u32 {
        let len = 1usize << n;
        for code in enumerate_words(n as usize, len) {
            let word: Vec<u32> = code.iter().map(|&a| a as u32 + 1).collect();
            assert!(
                (1..=n).any(|j| has_bad_j_pair(&word, j)),
                "length-{len} word {word:?} has no bad pair"
            );
        }
    }
}

// Criterion 7: the recursive solver agrees with brute-force strategy
// enumeration on 200 seeded games; every solution is certified internally
// against opponent-colored cycles.
fn c07_solver_oracle() {
    for seed in 0..200u64 {
        let g = random_parity_game(seed, 6, 2);
        let sol = zielonka_solve(&g);
        let brute = solve_by_enumeration(&g);
        for v in 0..g.arena.n_vertices() {
            assert_eq!(sol.winner_at(v), brute[v], "seed {seed}, vertex {v}");
        }
    }
}

// Criterion 8: the letterwise aggregation law holds on sampled lassos for
// the parity monitor and is refuted for a deliberately broken constant
// monitor.
fn c08_aggregation_law() {
    for seed in 0..50u64 {
        let a = random_parity_automaton(seed, 1 + (seed as usize % 4), 2, 2, 2);
        let (mon, _) = parity_monitor(&a).unwrap();
        assert!(
            check_strong_aggregation_on_lassos(&a, &mon, 8, 500, seed).is_none(),
            "seed {seed}: parity aggregation refuted"
        );
    }
    let c = normalize_to_parity(&gen_family(&copy_spec()).unwrap()).unwrap();
    let (broken, _) = broken_constant_monitor();
    let cex = check_strong_aggregation_on_lassos(&c, &broken, 8, 500, 11)
        .expect("the constant monitor must be refuted");
    assert!(lasso_accepts(&c, &cex.accepted_run.word));
    assert!(!lasso_accepts(&c, &cex.rejected_run.word));
}

// Criterion 9: completion search matches trying every output word, for all
// state and memory targets and every input word up to length 5.
fn c09_completion_oracle() {
    for spec in [copy_spec(), FamilySpec::BadJPair { n: 2 }] {
        let a = gen_family(&spec).unwrap();
        let parity = normalize_to_parity(&a).unwrap().pruned_to_reachable();
        let (mon, _) = parity_monitor(&parity).unwrap();
        let p = monitored_product(&parity, &mon);
        let nq = p.automaton.n_states();
        let n_in = p.automaton.alphabet.n_inputs();
        let n_out = p.automaton.alphabet.n_outputs();
        let mut memories = vec![MemoryElem::Bottom];
        memories.extend(p.monitor.memory.iter().cloned());
        for len in 1..=5 {
            for w in enumerate_words(n_in, len) {
                for q in 0..nq {
                    for q_to in 0..nq {
                        for m in &memories {
                            let fast = find_completion(&p, q, q_to, m, &w).ok();
                            let slow = brute_completion(&p, q, q_to, m, &w, n_out);
                            assert_eq!(fast, slow, "q={q} q_to={q_to} m={m} w={w:?}");
                        }
                    }
                }
            }
        }
    }
}

/// Reference for criterion 9: try every output word in declaration order.
fn brute_completion(
    p: &MonitoredProduct,
    q: usize,
    q_to: usize,
    m: &MemoryElem,
    w: &[usize],
    n_out: usize,
) -> Option<Vec<usize>> {
    for outs in enumerate_words(n_out, w.len()) {
        let mut cur = (q, MemoryElem::Bottom);
        for (i, &a) in w.iter().enumerate() {
            cur = p.pair_step(cur.0, &cur.1, (a, outs[i]));
        }
        if cur.0 == q_to && cur.1 == *m {
            return Some(outs);
        }
    }
    None
}

// Criterion 10: blocks of the certified length always land in infinite
// classes, and every class has witnesses of any requested minimum length
// within one certified length of the request.
fn c10_certified_length_classes() {
    let stock = [
        copy_spec(),
        FamilySpec::BadJPair { n: 2 },
        FamilySpec::BadJPair { n: 3 },
        FamilySpec::BadJPairVec { n: 2 },
        FamilySpec::Reversal { k: 4 },
    ];
    for spec in stock {
        let a = gen_family(&spec).unwrap();
        let parity = normalize_to_parity(&a).unwrap().pruned_to_reachable();
        let (mon, _) = parity_monitor(&parity).unwrap();
        let p = monitored_product(&parity, &mon);
        let sa = build_summary_automaton(&p);
        let classes = infinite_classes(&sa);
        let d_eff = effective_blocksize(&sa);
        let n_in = p.automaton.alphabet.n_inputs();
        let mut rng = ChaCha8Rng::seed_from_u64(0xd1ce);
        for _ in 0..200 {
            let w: Vec<usize> = (0..d_eff).map(|_| rng.gen_range(0..n_in)).collect();
            let s = word_summary(&p, &w);
            assert!(
                classes.iter().any(|c| c.summary == s),
                "a certified-length block fell outside the infinite classes"
            );
        }
        for class in &classes {
            for n in 0..=10 {
                let w = class_witness(&sa, class, n);
                assert!(w.len() >= n && w.len() <= n + d_eff, "witness length {}", w.len());
                assert_eq!(word_summary(&p, &w), class.summary);
            }
        }
    }
}

// Criterion 11: verifier coherence from both sides: losing verdicts come
// with counterexamples that really are rejected runs, and winning machines
// survive a thousand seeded simulations each.
fn c11_verifier_coherence() {
    let copy = gen_family(&copy_spec()).unwrap();
    let rev = gen_family(&FamilySpec::Reversal { k: 4 }).unwrap();
    let copy2 = succinct_to_explicit(
        &builtin_strategy(&BuiltinSpec::Copy { symbols: vec!["0".into(), "1".into()], d: 2 })
            .unwrap(),
        2,
    );
    let rev2 =
        succinct_to_explicit(&builtin_strategy(&BuiltinSpec::Reversal { k: 4, d: 2 }).unwrap(), 2);

    let mut losing = 0;
    let randoms: Vec<ExplicitBlockTransducer> =
        (0..8).map(|seed| random_block_transducer(seed, 2, 2, 2, 2)).collect();
    let mut pairs: Vec<(&OmegaAutomaton, &ExplicitBlockTransducer)> =
        vec![(&copy, &rev2), (&rev, &copy2)];
    pairs.extend(randoms.iter().map(|t| (&copy, t)));
    for &(a, t) in &pairs {
        let verdict = verify_block_strategy(a, t, 2, BUDGET).unwrap();
        if verdict.winning {
            continue;
        }
        let cex = verdict.counterexample.expect("losing verdicts carry a counterexample");
        let (lasso, accepted) = replay_block_lasso(a, t, &cex).unwrap();
        assert!(!accepted, "counterexample replays to an accepted run");
        assert!(!lasso_accepts(a, &lasso));
        losing += 1;
    }
    assert!(losing >= 6, "only {losing} losing verdicts turned up");

    let bad2 = gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap();
    let bp = pipeline(&bad2);
    let (bg, bmeta) = build_block_arena(&bp.parity, 3, BUDGET).unwrap();
    let bsol = zielonka_solve(&bg);
    let bad_machine = minimize_block_transducer(
        &block_positional_to_transducer(&bp.parity.alphabet, &bg, &bsol, &bmeta, BUDGET).unwrap(),
        BUDGET,
    )
    .unwrap();

    let cp = pipeline(&copy);
    let cmealy = positional_to_mealy(&cp.game, &cp.sol, &cp.meta).unwrap();
    let copy_machine = reduced_to_block(&cmealy, &cp.product, &cp.sa, 3).unwrap();

    let winners: [(&OmegaAutomaton, &ExplicitBlockTransducer, usize); 4] = [
        (&copy, &copy2, 2),
        (&rev, &rev2, 2),
        (&copy, &copy_machine, 3),
        (&bad2, &bad_machine, 3),
    ];
    for (a, t, d) in winners {
        assert!(verify_block_strategy(a, t, d, BUDGET).unwrap().winning);
        for seed in 0..1000u64 {
            let trace = simulate(a, t, &InputStrategy::Random { seed }, 20, seed).unwrap();
            assert!(
                !matches!(trace.verdict, PrefixVerdict::SafetyViolated { .. }),
                "seed {seed} violated at blocksize {d}"
            );
        }
    }
}

// Criterion 12: every conversion between machine forms keeps the master
// state count exactly; compression is a separate, explicit pass.
fn c12_master_state_conservation() {
    let mut conversions = 0usize;
    let copy = gen_family(&copy_spec()).unwrap();
    let p = pipeline(&copy);
    let mealy = positional_to_mealy(&p.game, &p.sol, &p.meta).unwrap();
    for d in 2..=4 {
        let t = reduced_to_block(&mealy, &p.product, &p.sa, d).unwrap();
        assert_eq!(t.n_masters(), mealy.n_states());
        conversions += 1;
        let s = reduced_to_succinct(&mealy, &p.product, &p.sa, d).unwrap();
        assert_eq!(s.n_masters(), mealy.n_states());
        conversions += 1;
    }
    let mut machines: Vec<ExplicitBlockTransducer> = vec![succinct_to_explicit(
        &builtin_strategy(&BuiltinSpec::Reversal { k: 4, d: 2 }).unwrap(),
        2,
    )];
    for seed in 0..3 {
        machines.push(random_block_transducer(seed, 3, 2, 2, 2));
    }
    for t in &machines {
        let s = explicit_to_succinct(t, BUDGET).unwrap();
        assert_eq!(s.n_masters(), t.n_masters());
        let back = succinct_to_explicit(&s, t.d);
        assert_eq!(back.n_masters(), t.n_masters());
        conversions += 2;
    }
    let bad2 = gen_family(&FamilySpec::BadJPair { n: 2 }).unwrap();
    let bp = pipeline(&bad2);
    let (bg, bmeta) = build_block_arena(&bp.parity, 3, BUDGET).unwrap();
    let bsol = zielonka_solve(&bg);
    let extracted =
        block_positional_to_transducer(&bp.parity.alphabet, &bg, &bsol, &bmeta, BUDGET).unwrap();
    let s: SuccinctTransducer = explicit_to_succinct(&extracted, BUDGET).unwrap();
    assert_eq!(s.n_masters(), extracted.n_masters());
    conversions += 1;
    assert!(conversions >= 10, "only {conversions} conversions exercised");
}

fn check(no: usize, name: &str, f: impl FnOnce() + std::panic::UnwindSafe) -> bool {
    let start = Instant::now();
    let result = catch_unwind(f);
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            println!("criterion {no:>2}: PASS ({secs:6.2}s) {name}");
            true
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("panic without message");
            println!("criterion {no:>2}: FAIL ({secs:6.2}s) {name}: {msg}");
            false
        }
    }
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let mut all = true;
    all &= check(1, "bad-j-pair blocksize thresholds (n=2 and n=3)", c01_bad_j_pair_thresholds);
    all &= check(2, "copy game winnable at blocksizes 1..=4, minimal machine", c02_copy_game_at_every_blocksize);
    all &= check(3, "reduced game agrees with the lookahead arena", c03_winner_cross_validation);
    all &= check(4, "tabulate/expand round trips preserve behavior", c04_round_trips);
    all &= check(5, "reversal size tradeoff within 4x of 2^(k-d) / 2^d", c05_reversal_tradeoff);
    all &= check(6, "bad-pair witness combinatorics, exhaustive", c06_bad_pair_combinatorics);
    all &= check(7, "solver agrees with brute force on 200 games", c07_solver_oracle);
    all &= check(8, "aggregation law holds; broken monitor refuted", c08_aggregation_law);
    all &= check(9, "completion search matches brute force to length 5", c09_completion_oracle);
    all &= check(10, "certified-length blocks land in infinite classes", c10_certified_length_classes);
    all &= check(11, "losing counterexamples replay; winners survive 1000 runs", c11_verifier_coherence);
    all &= check(12, "conversions conserve master states exactly", c12_master_state_conservation);
    println!("acceptance total: {:.2}s", start.elapsed().as_secs_f64());
    assert!(all, "at least one criterion failed, see the lines above");
}
