use std::collections::{BTreeMap, BTreeSet};

use crate::plan::Word;
use crate::schema::RelationSymbol;

pub type StateId = usize;

/// A nondeterministic automaton with ε-transitions (`None` labels).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Nfa {
    edges: Vec<Vec<(Option<RelationSymbol>, StateId)>>,
    initial: StateId,
    finals: BTreeSet<StateId>,
}

impl Nfa {
    /// An automaton with a single, non-accepting initial state.
    pub fn new() -> Self {
        Nfa {
            edges: vec![Vec::new()],
            initial: 0,
            finals: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self) -> StateId {
        self.edges.push(Vec::new());
        self.edges.len() - 1
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.initial = s;
    }

    pub fn add_final(&mut self, s: StateId) {
        self.finals.insert(s);
    }

    pub fn add_transition(&mut self, from: StateId, label: Option<RelationSymbol>, to: StateId) {
        if !self.edges[from].contains(&(label.clone(), to)) {
            self.edges[from].push((label, to));
        }
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals.contains(&s)
    }

    pub fn state_count(&self) -> usize {
        self.edges.len()
    }

    pub fn transitions(&self, from: StateId) -> &[(Option<RelationSymbol>, StateId)] {
        &self.edges[from]
    }

    pub fn transition_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Symbols labelling some transition.
    pub fn symbols(&self) -> BTreeSet<RelationSymbol> {
        self.edges
            .iter()
            .flatten()
            .filter_map(|(l, _)| l.clone())
            .collect()
    }

    pub fn epsilon_closure(&self, states: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut closure = states.clone();
        let mut stack: Vec<_> = states.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for (label, t) in &self.edges[s] {
                if label.is_none() && closure.insert(*t) {
                    stack.push(*t);
                }
            }
        }
        closure
    }

    fn step(&self, states: &BTreeSet<StateId>, sym: &RelationSymbol) -> BTreeSet<StateId> {
        let next = states
            .iter()
            .flat_map(|&s| self.edges[s].iter())
            .filter(|(l, _)| l.as_ref() == Some(sym))
            .map(|(_, t)| *t)
            .collect();
        self.epsilon_closure(&next)
    }

    pub fn accepts(&self, word: &Word) -> bool {
        let mut cur = self.epsilon_closure(&BTreeSet::from([self.initial]));
        for sym in word.symbols() {
            cur = self.step(&cur, sym);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|s| self.finals.contains(s))
    }

    /// An equivalent automaton without ε-transitions. Only the initial state
    /// and targets of symbol transitions survive, renumbered in order.
    pub fn remove_epsilons(&self) -> Nfa {
        let mut keep: BTreeSet<StateId> = BTreeSet::from([self.initial]);
        for edges in &self.edges {
            for (l, t) in edges {
                if l.is_some() {
                    keep.insert(*t);
                }
            }
        }
        let index: BTreeMap<StateId, StateId> =
            keep.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut out = Nfa {
            edges: vec![Vec::new(); keep.len()],
            initial: index[&self.initial],
            finals: BTreeSet::new(),
        };
        for &s in &keep {
            let closure = self.epsilon_closure(&BTreeSet::from([s]));
            if closure.iter().any(|c| self.finals.contains(c)) {
                out.finals.insert(index[&s]);
            }
            for &c in &closure {
                for (l, t) in &self.edges[c] {
                    if l.is_some() {
                        out.add_transition(index[&s], l.clone(), index[t]);
                    }
                }
            }
        }
        out
    }

    /// Subset construction. The result has no ε-transitions, at most one
    /// transition per (state, symbol), and no dead state.
    pub fn determinize(&self) -> Nfa {
        let symbols: Vec<_> = self.symbols().into_iter().collect();
        let start = self.epsilon_closure(&BTreeSet::from([self.initial]));
        let mut index = BTreeMap::from([(start.clone(), 0)]);
        let mut subsets = vec![start];
        let mut out = Nfa::new();
        let mut i = 0;
        while i < subsets.len() {
            let cur = subsets[i].clone();
            if cur.iter().any(|s| self.finals.contains(s)) {
                out.add_final(i);
            }
            for sym in &symbols {
                let next = self.step(&cur, sym);
                if next.is_empty() {
                    continue;
                }
                let t = match index.get(&next) {
                    Some(&t) => t,
                    None => {
                        let t = out.add_state();
                        index.insert(next.clone(), t);
                        subsets.push(next);
                        t
                    }
                };
                out.edges[i].push((Some(sym.clone()), t));
            }
            i += 1;
        }
        out
    }

    /// The minimal deterministic automaton of the same language, without a
    /// dead state. States are numbered in breadth-first order from the
    /// initial state.
    pub fn minimize(&self) -> Nfa {
        let d = self.determinize();
        let n = d.state_count();
        // states from which a final state is reachable
        let mut rev = vec![Vec::new(); n];
        for (s, edges) in d.edges.iter().enumerate() {
            for (_, t) in edges {
                rev[*t].push(s);
            }
        }
        let mut live = vec![false; n];
        let mut stack: Vec<_> = d.finals.iter().copied().collect();
        for &f in &stack {
            live[f] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &rev[s] {
                if !live[p] {
                    live[p] = true;
                    stack.push(p);
                }
            }
        }
        if !live[d.initial] {
            return Nfa::new();
        }
        // Moore refinement; edges into dead states are ignored
        let mut class: Vec<usize> = (0..n).map(|s| d.finals.contains(&s) as usize).collect();
        let mut count = 0;
        loop {
            let mut sigs = BTreeMap::new();
            let next: Vec<usize> = (0..n)
                .map(|s| {
                    let sig: Vec<_> = d.edges[s]
                        .iter()
                        .filter(|(_, t)| live[*t])
                        .map(|(l, t)| (l.clone(), class[*t]))
                        .collect();
                    let len = sigs.len();
                    *sigs.entry((class[s], sig)).or_insert(len)
                })
                .collect();
            let stable = sigs.len() == count;
            count = sigs.len();
            class = next;
            if stable {
                break;
            }
        }
        // renumber classes breadth-first from the initial state
        let mut order = BTreeMap::from([(class[d.initial], 0)]);
        let mut queue = std::collections::VecDeque::from([d.initial]);
        let mut seen = vec![false; n];
        seen[d.initial] = true;
        let mut out = Nfa::new();
        while let Some(s) = queue.pop_front() {
            let from = order[&class[s]];
            if d.finals.contains(&s) {
                out.add_final(from);
            }
            for (l, t) in &d.edges[s] {
                if !live[*t] {
                    continue;
                }
                let to = match order.get(&class[*t]) {
                    Some(&to) => to,
                    None => {
                        let to = out.add_state();
                        order.insert(class[*t], to);
                        to
                    }
                };
                out.add_transition(from, l.clone(), to);
                if !seen[*t] {
                    seen[*t] = true;
                    queue.push_back(*t);
                }
            }
        }
        out
    }

    /// Accepted words of length at most `max_length`, by length and then in
    /// the order of `alphabet`.
    pub fn words_up_to(&self, alphabet: &[RelationSymbol], max_length: usize) -> Vec<Word> {
        let mut out = Vec::new();
        let mut frontier = vec![(
            Vec::new(),
            self.epsilon_closure(&BTreeSet::from([self.initial])),
        )];
        for len in 0..=max_length {
            for (w, states) in &frontier {
                if states.iter().any(|s| self.finals.contains(s)) {
                    out.push(Word::new(w.clone()));
                }
            }
            if len == max_length {
                break;
            }
            let mut next = Vec::new();
            for (w, states) in &frontier {
                for sym in alphabet {
                    let st = self.step(states, sym);
                    if !st.is_empty() {
                        let mut w2 = w.clone();
                        w2.push(sym.clone());
                        next.push((w2, st));
                    }
                }
            }
            frontier = next;
        }
        out
    }
}
