//! Synthesis of block strategies for delay games on omega-automata.
//!
//! A delay game is an infinite two-player game in which Player O (the
//! "output" player) may postpone her moves to gain lookahead on the moves of
//! Player I (the "input" player). The winning condition is a language of
//! infinite words over a product alphabet, given here as a deterministic
//! omega-automaton with a safety, reachability, parity, or Muller acceptance
//! condition. With constant lookahead the game can be recast in blocks of a
//! fixed size `d`: Player I reveals two input blocks up front and one more per
//! round, Player O answers one output block per round, always one block
//! behind.
//!
//! The pipeline implemented by this crate decides who wins with constant
//! lookahead and, when Player O wins, extracts a winning block strategy in a
//! compact two-slave transducer format:
//!
//! 1. [`automata`] defines the automaton model, stock example families, and
//!    the textual exchange format.
//! 2. [`monitor`] augments an automaton with a finite memory that summarises
//!    finite run pieces (maximal colors, visited source sets) so that
//!    acceptance of a play can be recovered from per-block aggregates.
//! 3. [`summary`] computes, per input word, which monitored states are
//!    realisable by some output completion. Words with the same summary are
//!    interchangeable; the finitely many summaries induce the block alphabet
//!    of the reduced game.
//! 4. [`games`] builds the reduced finite parity game (and, for comparison,
//!    the straightforward letter-by-letter arenas with and without lookahead)
//!    and solves parity games with strategy extraction.
//! 5. [`strategy`] converts positional winning strategies of the reduced game
//!    into block transducers, in explicit table form or in a succinct form
//!    with a transition slave and an output slave.
//! 6. [`engine`] verifies block strategies against the automaton, simulates
//!    plays, derives adversarial input strategies, and searches for the
//!    minimal winning block size.
//!
//! The `dg` binary packages the pipeline behind a command line interface.

pub mod automata;
pub mod engine;
pub mod games;
pub mod monitor;
pub mod strategy;
pub mod summary;
pub(crate) mod util;
