//! Deciding and enumerating equivalent rewritings of an atomic query.
//!
//! The query has an equivalent plan iff the forward-backward grammar and the
//! plan language share a word. Words of the intersection map back to
//! minimal filtering plans through the reverse transducer; further filters
//! are kept when their root paths are loops the dependencies force.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::forward_backward::{build_forward_backward_grammar, loop_word_derivable};
use crate::lang::{intersect_cfg_nfa, intersection_nonempty, Cfg, Nfa};
use crate::plan::{ExecutionPlan, OutputRef, PathFunction, Word};
use crate::plan_language::{build_plan_regex, compute_segments, ReverseTransducer, Segment};
use crate::schema::{Alphabet, AtomicQuery, UidSet};

/// Functions, closed dependencies and the query to rewrite.
#[derive(Clone, Debug)]
pub struct RewritingProblem {
    pub alphabet: Alphabet,
    pub functions: Vec<Arc<PathFunction>>,
    pub uids: UidSet,
    pub query: AtomicQuery,
}

impl RewritingProblem {
    /// Checks that every symbol is in the alphabet and function names are
    /// unique. `uids` should already be closed.
    pub fn new(
        alphabet: Alphabet,
        functions: Vec<PathFunction>,
        uids: UidSet,
        query: AtomicQuery,
    ) -> Result<Self> {
        let mut names = HashSet::new();
        for f in &functions {
            if !names.insert(f.name().to_string()) {
                return Err(Error::DuplicateFunction(f.name().to_string()));
            }
            for s in f.body() {
                alphabet.check(s)?;
            }
        }
        query.validate(&alphabet)?;
        Ok(RewritingProblem {
            alphabet,
            functions: functions.into_iter().map(Arc::new).collect(),
            uids,
            query,
        })
    }

    pub fn function(&self, name: &str) -> Result<&Arc<PathFunction>> {
        self.functions
            .iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::UnknownFunction(name.to_string()))
    }

    /// The same functions and dependencies with another query.
    pub fn with_query(&self, query: AtomicQuery) -> Result<Self> {
        query.validate(&self.alphabet)?;
        Ok(RewritingProblem {
            query,
            ..self.clone()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RewriteOptions {
    /// Longest intersection word to consider; `None` uses eight times the
    /// longest function body.
    pub max_word_length: Option<usize>,
    pub max_plans: usize,
    /// Largest number of extra filters tried on top of the minimal one.
    pub max_filter_subset: usize,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        RewriteOptions {
            max_word_length: None,
            max_plans: 10,
            max_filter_subset: 3,
        }
    }
}

/// The grammar, plan language and transducer of one problem, built once.
pub struct Rewriter {
    problem: RewritingProblem,
    grammar: Cfg,
    segments: Vec<Segment>,
    plan_automaton: Nfa,
    transducer: ReverseTransducer,
    intersection: OnceLock<Cfg>,
    loops: Mutex<BTreeMap<Word, bool>>,
}

impl Rewriter {
    pub fn new(problem: RewritingProblem) -> Result<Self> {
        let grammar =
            build_forward_backward_grammar(&problem.alphabet, &problem.uids, &problem.query)?;
        let segments = compute_segments(&problem.functions, &problem.query);
        let plan_automaton = build_plan_regex(&segments).to_nfa().minimize();
        let transducer = ReverseTransducer::new(&problem.functions, &problem.query);
        Ok(Rewriter {
            problem,
            grammar,
            segments,
            plan_automaton,
            transducer,
            intersection: OnceLock::new(),
            loops: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn problem(&self) -> &RewritingProblem {
        &self.problem
    }

    pub fn grammar(&self) -> &Cfg {
        &self.grammar
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn plan_automaton(&self) -> &Nfa {
        &self.plan_automaton
    }

    pub fn transducer(&self) -> &ReverseTransducer {
        &self.transducer
    }

    /// Grammar of the words shared by both languages.
    pub fn intersection(&self) -> &Cfg {
        self.intersection
            .get_or_init(|| intersect_cfg_nfa(&self.grammar, &self.plan_automaton))
    }

    /// Whether an equivalent plan exists. Exact: no word length bound.
    pub fn exists_rewriting(&self) -> bool {
        match self.intersection.get() {
            Some(g) => !g.is_empty(),
            None => intersection_nonempty(&self.grammar, &self.plan_automaton),
        }
    }

    pub fn default_max_word_length(&self) -> usize {
        let longest = self
            .problem
            .functions
            .iter()
            .map(|f| f.len())
            .max()
            .unwrap_or(0);
        2 * longest * 4
    }

    /// Shortest word of the intersection, if any.
    pub fn witness_word(&self) -> Option<Word> {
        let len = self.intersection().shortest_word_length()?;
        self.intersection().enumerate_words(len, 1).next()
    }

    /// Whether the loop `w(a, a)` is forced, memoized per word.
    pub fn loop_derivable(&self, w: &Word) -> bool {
        if let Some(&v) = self.loops.lock().expect("poisoned").get(w) {
            return v;
        }
        let v = loop_word_derivable(&self.grammar, &self.problem.query, w);
        self.loops.lock().expect("poisoned").insert(w.clone(), v);
        v
    }

    /// Every filter's root path is a forced loop.
    pub fn filters_preserve_equivalence(&self, plan: &ExecutionPlan) -> Result<bool> {
        for (at, _) in plan.filters() {
            if !self.loop_derivable(&plan.root_path(at)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Equivalent plans: for each intersection word (by length, then
    /// lexicographically), each plan the transducer recovers, and each set of
    /// extra filters (by size, then position order) that keeps equivalence.
    pub fn enumerate_rewritings(&self, options: &RewriteOptions) -> Vec<ExecutionPlan> {
        let mut out = Vec::new();
        if options.max_plans == 0 || !self.exists_rewriting() {
            return out;
        }
        let max_len = options
            .max_word_length
            .unwrap_or_else(|| self.default_max_word_length());
        let mut seen = HashSet::new();
        // every intersection word yields at least one plan
        for word in self
            .intersection()
            .enumerate_words(max_len, options.max_plans)
        {
            for plan in self
                .transducer
                .reverse_transform(&word, &self.problem.query)
            {
                for variant in self.filter_variants(&plan, options.max_filter_subset) {
                    if seen.insert(variant.clone()) {
                        out.push(variant);
                        if out.len() >= options.max_plans {
                            return out;
                        }
                    }
                }
            }
        }
        out
    }

    /// The minimal filtering plan followed by its equivalent extensions with
    /// up to `max_extra` additional filters.
    fn filter_variants(&self, plan: &ExecutionPlan, max_extra: usize) -> Vec<ExecutionPlan> {
        let a = &self.problem.query.constant;
        let candidates: Vec<OutputRef> = plan
            .filterable_positions()
            .into_iter()
            .filter(|at| !plan.calls()[at.call].filters.contains_key(&at.position))
            .filter(|at| plan.root_path(*at).is_ok_and(|w| self.loop_derivable(&w)))
            .collect();
        let mut out = vec![plan.clone()];
        for size in 1..=max_extra.min(candidates.len()) {
            for subset in combinations(candidates.len(), size) {
                let mut p = plan.clone();
                for &k in &subset {
                    p = p
                        .with_filter(candidates[k], a.clone())
                        .expect("filterable position");
                }
                if self.filters_preserve_equivalence(&p).unwrap_or(false) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// One-shot decision.
pub fn exists_rewriting(problem: &RewritingProblem) -> Result<bool> {
    Ok(Rewriter::new(problem.clone())?.exists_rewriting())
}

/// One-shot enumeration.
pub fn enumerate_rewritings(
    problem: &RewritingProblem,
    options: &RewriteOptions,
) -> Result<Vec<ExecutionPlan>> {
    Ok(Rewriter::new(problem.clone())?.enumerate_rewritings(options))
}
