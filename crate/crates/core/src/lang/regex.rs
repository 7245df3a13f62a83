use std::fmt;

use super::automaton::{Nfa, StateId};
use crate::plan::Word;
use crate::schema::RelationSymbol;

/// Regular expressions over relation symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Regex {
    /// The empty language.
    Empty,
    Epsilon,
    Symbol(RelationSymbol),
    Concat(Vec<Regex>),
    Alt(Vec<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    pub fn word(w: &Word) -> Regex {
        match w.symbols() {
            [] => Regex::Epsilon,
            [s] => Regex::Symbol(s.clone()),
            syms => Regex::Concat(syms.iter().cloned().map(Regex::Symbol).collect()),
        }
    }

    /// Disjunction; the empty disjunction is the empty language.
    pub fn alt(parts: Vec<Regex>) -> Regex {
        let parts: Vec<_> = parts.into_iter().filter(|r| *r != Regex::Empty).collect();
        match parts.len() {
            0 => Regex::Empty,
            1 => parts.into_iter().next().unwrap(),
            _ => Regex::Alt(parts),
        }
    }

    pub fn concat(parts: Vec<Regex>) -> Regex {
        if parts.contains(&Regex::Empty) {
            return Regex::Empty;
        }
        let parts: Vec<_> = parts.into_iter().filter(|r| *r != Regex::Epsilon).collect();
        match parts.len() {
            0 => Regex::Epsilon,
            1 => parts.into_iter().next().unwrap(),
            _ => Regex::Concat(parts),
        }
    }

    pub fn star(inner: Regex) -> Regex {
        match inner {
            Regex::Empty | Regex::Epsilon => Regex::Epsilon,
            r => Regex::Star(Box::new(r)),
        }
    }

    /// Thompson construction.
    pub fn to_nfa(&self) -> Nfa {
        let mut nfa = Nfa::new();
        let end = nfa.add_state();
        self.build(&mut nfa, 0, end);
        nfa.add_final(end);
        nfa
    }

    fn build(&self, nfa: &mut Nfa, from: StateId, to: StateId) {
        match self {
            Regex::Empty => {}
            Regex::Epsilon => nfa.add_transition(from, None, to),
            Regex::Symbol(s) => nfa.add_transition(from, Some(s.clone()), to),
            Regex::Concat(parts) => {
                let mut cur = from;
                for (i, p) in parts.iter().enumerate() {
                    let next = if i + 1 == parts.len() {
                        to
                    } else {
                        nfa.add_state()
                    };
                    p.build(nfa, cur, next);
                    cur = next;
                }
                if parts.is_empty() {
                    nfa.add_transition(from, None, to);
                }
            }
            Regex::Alt(parts) => {
                for p in parts {
                    let s = nfa.add_state();
                    let e = nfa.add_state();
                    nfa.add_transition(from, None, s);
                    p.build(nfa, s, e);
                    nfa.add_transition(e, None, to);
                }
            }
            Regex::Star(inner) => {
                let s = nfa.add_state();
                let e = nfa.add_state();
                nfa.add_transition(from, None, s);
                inner.build(nfa, s, e);
                nfa.add_transition(e, None, s);
                nfa.add_transition(s, None, to);
            }
        }
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regex::Empty => f.write_str("∅"),
            Regex::Epsilon => f.write_str("ε"),
            Regex::Symbol(s) => write!(f, "{s}"),
            Regex::Concat(parts) => {
                let ps: Vec<_> = parts
                    .iter()
                    .map(|p| match p {
                        Regex::Alt(_) => format!("({p})"),
                        _ => p.to_string(),
                    })
                    .collect();
                f.write_str(&ps.join(" "))
            }
            Regex::Alt(parts) => {
                let ps: Vec<_> = parts.iter().map(|p| p.to_string()).collect();
                f.write_str(&ps.join(" | "))
            }
            Regex::Star(inner) => match **inner {
                Regex::Symbol(_) => write!(f, "{inner}*"),
                _ => write!(f, "({inner})*"),
            },
        }
    }
}
