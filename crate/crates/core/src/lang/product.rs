//! Intersection of a context-free grammar with a regular language.
//!
//! Triples `(p, X, q)` record that grammar symbol `X` derives some word
//! labelling a path from `p` to `q` in the automaton. They are saturated
//! bottom-up over the binarized grammar and the ε-free automaton; every
//! triple found this way is productive by construction, so emptiness of the
//! intersection is a lookup.

use std::collections::HashSet;

use super::automaton::Nfa;
use super::grammar::{Cfg, Production, Sym};

type Fact = (u32, u32, u32);

/// Facts as a bitset over `(p, X, q)` when that fits, a hash set otherwise.
enum FactSet {
    Dense {
        bits: Vec<u64>,
        syms: usize,
        states: usize,
    },
    Sparse(HashSet<Fact>),
}

impl FactSet {
    fn new(syms: usize, states: usize) -> Self {
        let size = syms.saturating_mul(states).saturating_mul(states);
        if size <= 1 << 30 {
            FactSet::Dense {
                bits: vec![0; size.div_ceil(64)],
                syms,
                states,
            }
        } else {
            FactSet::Sparse(HashSet::new())
        }
    }

    fn insert(&mut self, f: Fact) -> bool {
        match self {
            FactSet::Dense { bits, syms, states } => {
                let i = (f.0 as usize * *syms + f.1 as usize) * *states + f.2 as usize;
                let (w, b) = (i / 64, 1u64 << (i % 64));
                let new = bits[w] & b == 0;
                bits[w] |= b;
                new
            }
            FactSet::Sparse(set) => set.insert(f),
        }
    }

    fn contains(&self, f: Fact) -> bool {
        match self {
            FactSet::Dense { bits, syms, states } => {
                let i = (f.0 as usize * *syms + f.1 as usize) * *states + f.2 as usize;
                bits[i / 64] & (1u64 << (i % 64)) != 0
            }
            FactSet::Sparse(set) => set.contains(&f),
        }
    }
}

struct Saturation<'g> {
    grammar: &'g Cfg,
    terminals: u32,
    syms: usize,
    facts: FactSet,
    /// targets `q` of facts `(p, X, q)`, at `p * syms + X`
    out_index: Vec<Vec<u32>>,
    /// sources `p` of facts `(p, X, q)`, at `q * syms + X`
    in_index: Vec<Vec<u32>>,
    queue: Vec<Fact>,
    record: bool,
    derivations: Vec<(Fact, Vec<Fact>)>,
}

impl<'g> Saturation<'g> {
    fn sym_id(&self, s: Sym) -> u32 {
        match s {
            Sym::T(t) => t as u32,
            Sym::N(n) => self.terminals + n as u32,
        }
    }

    fn add(&mut self, fact: Fact, from: Vec<Fact>) {
        if self.record {
            self.derivations.push((fact, from));
        }
        if self.facts.insert(fact) {
            let (p, x, q) = fact;
            self.out_index[p as usize * self.syms + x as usize].push(q);
            self.in_index[q as usize * self.syms + x as usize].push(p);
            self.queue.push(fact);
        }
    }

    fn run(
        grammar: &'g Cfg,
        nfa: &Nfa,
        record: bool,
        goal: Option<(u32, &[u32])>,
    ) -> Saturation<'g> {
        let terminals = grammar.terminals().len() as u32;
        let syms = terminals as usize + grammar.nonterminals().len();
        let states = nfa.state_count();
        let mut sat = Saturation {
            grammar,
            terminals,
            syms,
            facts: FactSet::new(syms, states),
            out_index: vec![Vec::new(); syms * states],
            in_index: vec![Vec::new(); syms * states],
            queue: Vec::new(),
            record,
            derivations: Vec::new(),
        };
        // rules indexed by their first and second right-hand symbol
        let mut by_first: Vec<Vec<(u32, Option<u32>)>> = vec![Vec::new(); syms];
        let mut by_second: Vec<Vec<(u32, u32)>> = vec![Vec::new(); syms];
        let mut epsilon_lhs = Vec::new();
        for Production { lhs, rhs } in grammar.productions() {
            let lhs = sat.sym_id(Sym::N(*lhs));
            match rhs.as_slice() {
                [] => epsilon_lhs.push(lhs),
                [x] => by_first[sat.sym_id(*x) as usize].push((lhs, None)),
                [x, y] => {
                    let (x, y) = (sat.sym_id(*x), sat.sym_id(*y));
                    by_first[x as usize].push((lhs, Some(y)));
                    by_second[y as usize].push((lhs, x));
                }
                _ => unreachable!("binarized"),
            }
        }
        for p in 0..states {
            for (label, q) in nfa.transitions(p) {
                let label = label.as_ref().expect("ε-free automaton");
                if let Some(t) = grammar.terminal_id(label) {
                    sat.add((p as u32, t as u32, *q as u32), Vec::new());
                }
            }
            for &a in &epsilon_lhs {
                sat.add((p as u32, a, p as u32), Vec::new());
            }
        }
        while let Some(fact) = sat.queue.pop() {
            let (p, x, q) = fact;
            if let Some((start, finals)) = goal {
                if p == nfa.initial() as u32 && x == start && finals.contains(&q) {
                    break;
                }
            }
            for &(a, second) in &by_first[x as usize] {
                match second {
                    None => sat.add((p, a, q), vec![fact]),
                    Some(y) => {
                        // entries pushed meanwhile are found again from their side
                        let idx = q as usize * syms + y as usize;
                        for k in 0..sat.out_index[idx].len() {
                            let s = sat.out_index[idx][k];
                            sat.add((p, a, s), vec![fact, (q, y, s)]);
                        }
                    }
                }
            }
            for &(a, first) in &by_second[x as usize] {
                let idx = p as usize * syms + first as usize;
                for k in 0..sat.in_index[idx].len() {
                    let o = sat.in_index[idx][k];
                    sat.add((o, a, q), vec![(o, first, p), fact]);
                }
            }
        }
        sat
    }

    fn name(&self, (p, x, q): Fact) -> String {
        let inner = self.grammar.nonterminals()[(x - self.terminals) as usize].as_str();
        format!("[{p},{inner},{q}]")
    }
}

fn prepare(g: &Cfg, a: &Nfa) -> (std::sync::Arc<Cfg>, Nfa, u32, Vec<u32>) {
    let b = g.binarized();
    let nfa = a.remove_epsilons();
    let start = b.terminals().len() as u32 + b.start_index() as u32;
    let finals = nfa.finals().iter().map(|&f| f as u32).collect();
    (b, nfa, start, finals)
}

/// Whether some word of `a`'s language is derived by `g`.
pub fn intersection_nonempty(g: &Cfg, a: &Nfa) -> bool {
    let (b, nfa, start, finals) = prepare(g, a);
    let sat = Saturation::run(&b, &nfa, false, Some((start, &finals)));
    let init = nfa.initial() as u32;
    finals.iter().any(|&f| sat.facts.contains((init, start, f)))
}

/// A trimmed grammar for `L(g) ∩ L(a)` with start symbol `S'`.
pub fn intersect_cfg_nfa(g: &Cfg, a: &Nfa) -> Cfg {
    let (b, nfa, start, finals) = prepare(g, a);
    let sat = Saturation::run(&b, &nfa, true, None);
    let mut out = Cfg::with_terminals("S'", b.terminals());
    let top = out.start_index();
    let init = nfa.initial() as u32;
    let mut derivations: Vec<_> = sat.derivations.iter().collect();
    derivations.sort();
    derivations.dedup();
    let sym_of = |out: &mut Cfg, f: Fact| -> Sym {
        if f.1 < sat.terminals {
            Sym::T(f.1 as usize)
        } else {
            Sym::N(out.intern_nonterminal(&sat.name(f)))
        }
    };
    for &f in &finals {
        let fact = (init, start, f);
        if sat.facts.contains(fact) {
            let s = sym_of(&mut out, fact);
            out.push(Production {
                lhs: top,
                rhs: vec![s],
            });
        }
    }
    for (fact, from) in derivations {
        if fact.1 < sat.terminals {
            continue;
        }
        let Sym::N(lhs) = sym_of(&mut out, *fact) else {
            unreachable!()
        };
        let rhs = from.iter().map(|&f| sym_of(&mut out, f)).collect();
        out.push(Production { lhs, rhs });
    }
    out.trim()
}
