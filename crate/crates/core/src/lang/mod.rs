//! Grammars, automata and regular expressions over relation symbols.

pub mod automaton;
pub mod grammar;
pub mod product;
pub mod regex;

pub use automaton::Nfa;
pub use grammar::{Cfg, GrammarSymbol};
pub use product::{intersect_cfg_nfa, intersection_nonempty};
pub use regex::Regex;
