//! The regular language of plan skeletons and its reverse transducer.
//!
//! Each call in a non-redundant plan contributes a segment `w_{f,i}`: the
//! whole body of `f` followed by the way back to the output `x_i` handed to
//! the next call. The last call's segment must be *final*, meaning its shape
//! lets a single filter produce the query atom on the plan output. The
//! transducer reads a word of segments and prints back the calls and used
//! outputs, from which the plan is rebuilt.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::lang::{Nfa, Regex};
use crate::plan::{forward_backward_segment, ExecutionPlan, PathFunction, Word};
use crate::schema::{AtomicQuery, RelationSymbol};

/// The word `w_{f,i}` and whether it may end a plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub function: Arc<PathFunction>,
    pub position: usize,
    pub word: Word,
    pub is_final: bool,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.function.name(),
            self.position,
            self.word,
            if self.is_final { "final" } else { "-" }
        )
    }
}

/// Whether `w_{f,i}` is final for the query relation `r`:
///
/// * its last letter is `r-`, or it is `r` and `i > 0`;
/// * `x_{i+1}` is an output;
/// * if `i < n - 1` and `x_{i+2}` is an output, the body does not read `r`
///   then `r-` at positions `i+1, i+2`.
pub fn is_final_segment(f: &PathFunction, i: usize, r: &RelationSymbol) -> bool {
    let n = f.len();
    if i >= n {
        return false;
    }
    let body = f.body();
    // for i < n the last letter of w_{f,i} is r_{i+1}-
    let last = body[i].inverse();
    let shape = last == r.inverse() || (last == *r && i > 0);
    let next_output = f.is_output(i + 1);
    let no_later_filter =
        !(i + 2 <= n && f.is_output(i + 2) && body[i] == *r && body[i + 1] == r.inverse());
    shape && next_output && no_later_filter
}

/// `w_{f,i}` for every function and every `i` in `{0} ∪ outputs(f)`.
pub fn compute_segments(functions: &[Arc<PathFunction>], query: &AtomicQuery) -> Vec<Segment> {
    let mut out = Vec::new();
    for f in functions {
        for i in std::iter::once(0).chain(f.outputs().iter().copied()) {
            out.push(Segment {
                function: Arc::clone(f),
                position: i,
                word: forward_backward_segment(f, i),
                is_final: is_final_segment(f, i, &query.relation),
            });
        }
    }
    out
}

/// `W0 | (W* W')` where `W` ranges over the segments with `i > 0`, `W'`
/// over the final ones with `0 < i < n` and `W0` over the final ones with
/// `i = 0`.
pub fn build_plan_regex(segments: &[Segment]) -> Regex {
    let pick = |keep: &dyn Fn(&Segment) -> bool| {
        Regex::alt(
            segments
                .iter()
                .filter(|s| keep(s))
                .map(|s| Regex::word(&s.word))
                .collect(),
        )
    };
    let w0 = pick(&|s| s.is_final && s.position == 0);
    let w = pick(&|s| s.position > 0);
    let w_last = pick(&|s| s.is_final && s.position > 0 && s.position < s.function.len());
    Regex::alt(vec![w0, Regex::concat(vec![Regex::star(w), w_last])])
}

/// Output letters of the reverse transducer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TapeSymbol {
    /// A call to the function with this index.
    Call(usize),
    /// The call hands on (or returns) its output at this position.
    Out(usize),
}

#[derive(Clone, Debug)]
struct Transition {
    input: Option<RelationSymbol>,
    output: Option<TapeSymbol>,
    to: usize,
}

/// A transducer accepting the plan language and printing, for each way of
/// cutting the input into segments, the calls and outputs used.
#[derive(Clone, Debug)]
pub struct ReverseTransducer {
    functions: Vec<Arc<PathFunction>>,
    transitions: Vec<Vec<Transition>>,
    initial: usize,
    accepting: usize,
}

impl ReverseTransducer {
    pub fn new(functions: &[Arc<PathFunction>], query: &AtomicQuery) -> Self {
        let segments = compute_segments(functions, query);
        let mut t = ReverseTransducer {
            functions: functions.to_vec(),
            transitions: Vec::new(),
            initial: 0,
            accepting: 0,
        };
        let s = t.state();
        let f = t.state();
        let (s_w0, f_w0) = (t.state(), t.state());
        let (s_w, f_w) = (t.state(), t.state());
        let (s_wl, f_wl) = (t.state(), t.state());
        t.initial = s;
        t.accepting = f;
        let index = |seg: &Segment| {
            functions
                .iter()
                .position(|g| Arc::ptr_eq(g, &seg.function))
                .expect("segment of a listed function")
        };
        let r = &query.relation;
        for seg in &segments {
            let fi = index(seg);
            let i = seg.position;
            if seg.is_final && i == 0 {
                t.chain(s_w0, f_w0, &seg.word, fi, 1);
            }
            if i > 0 {
                t.chain(s_w, f_w, &seg.word, fi, i);
            }
            if seg.is_final && i > 0 && i < seg.function.len() {
                let out = if seg.word.last() == Some(r) { i } else { i + 1 };
                t.chain(s_wl, f_wl, &seg.word, fi, out);
            }
        }
        t.epsilon(s, s_w0);
        t.epsilon(s, s_w);
        t.epsilon(s_w, f_w);
        t.epsilon(f_w, s_w);
        t.epsilon(f_w, s_wl);
        t.epsilon(f_w0, f);
        t.epsilon(f_wl, f);
        t
    }

    fn state(&mut self) -> usize {
        self.transitions.push(Vec::new());
        self.transitions.len() - 1
    }

    fn epsilon(&mut self, from: usize, to: usize) {
        self.transitions[from].push(Transition {
            input: None,
            output: None,
            to,
        });
    }

    fn chain(&mut self, from: usize, to: usize, word: &Word, function: usize, out: usize) {
        let mut cur = self.state();
        self.transitions[from].push(Transition {
            input: None,
            output: Some(TapeSymbol::Call(function)),
            to: cur,
        });
        for sym in word.symbols() {
            let next = self.state();
            self.transitions[cur].push(Transition {
                input: Some(sym.clone()),
                output: None,
                to: next,
            });
            cur = next;
        }
        self.transitions[cur].push(Transition {
            input: None,
            output: Some(TapeSymbol::Out(out)),
            to,
        });
    }

    pub fn functions(&self) -> &[Arc<PathFunction>] {
        &self.functions
    }

    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    /// The input automaton, dropping outputs.
    pub fn to_nfa(&self) -> Nfa {
        let mut nfa = Nfa::new();
        for _ in 1..self.transitions.len() {
            nfa.add_state();
        }
        for (from, ts) in self.transitions.iter().enumerate() {
            for tr in ts {
                nfa.add_transition(from, tr.input.clone(), tr.to);
            }
        }
        nfa.set_initial(self.initial);
        nfa.add_final(self.accepting);
        nfa
    }

    /// All output tapes of accepting runs on `word`, sorted.
    pub fn tapes(&self, word: &Word) -> Vec<Vec<TapeSymbol>> {
        let mut found = BTreeSet::new();
        let mut on_path = HashSet::new();
        let mut tape = Vec::new();
        self.search(
            word.symbols(),
            self.initial,
            0,
            &mut on_path,
            &mut tape,
            &mut found,
        );
        found.into_iter().collect()
    }

    fn search(
        &self,
        word: &[RelationSymbol],
        state: usize,
        pos: usize,
        on_path: &mut HashSet<(usize, usize)>,
        tape: &mut Vec<TapeSymbol>,
        found: &mut BTreeSet<Vec<TapeSymbol>>,
    ) {
        if state == self.accepting && pos == word.len() {
            found.insert(tape.clone());
        }
        // an ε-cycle revisits (state, pos) without consuming input
        if !on_path.insert((state, pos)) {
            return;
        }
        for tr in &self.transitions[state] {
            let next_pos = match &tr.input {
                None => pos,
                Some(sym) if word.get(pos) == Some(sym) => pos + 1,
                Some(_) => continue,
            };
            if let Some(o) = tr.output {
                tape.push(o);
            }
            self.search(word, tr.to, next_pos, on_path, tape, found);
            if tr.output.is_some() {
                tape.pop();
            }
        }
        on_path.remove(&(state, pos));
    }

    /// The chain plan described by a tape, with its minimal filter added.
    pub fn tape_to_plan(&self, tape: &[TapeSymbol], query: &AtomicQuery) -> Result<ExecutionPlan> {
        let steps: Vec<_> = tape
            .chunks(2)
            .map(|pair| match pair {
                [TapeSymbol::Call(f), TapeSymbol::Out(k)] => (Arc::clone(&self.functions[*f]), *k),
                _ => unreachable!("tapes alternate calls and outputs"),
            })
            .collect();
        let plan = ExecutionPlan::chain(query.constant.clone(), &steps)?;
        Ok(plan.with_minimal_filter(query))
    }

    /// Every distinct non-redundant minimal filtering plan whose full path
    /// transformation is `word`, in tape order.
    pub fn reverse_transform(&self, word: &Word, query: &AtomicQuery) -> Vec<ExecutionPlan> {
        let mut plans: Vec<ExecutionPlan> = Vec::new();
        for tape in self.tapes(word) {
            if let Ok(plan) = self.tape_to_plan(&tape, query) {
                if !plans.contains(&plan) {
                    plans.push(plan);
                }
            }
        }
        plans
    }
}

/// Convenience wrapper building the transducer for one word.
pub fn reverse_transform(
    word: &Word,
    functions: &[Arc<PathFunction>],
    query: &AtomicQuery,
) -> Vec<ExecutionPlan> {
    ReverseTransducer::new(functions, query).reverse_transform(word, query)
}
