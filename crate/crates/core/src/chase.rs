//! A bounded chase used as an independent equivalence oracle.
//!
//! Under unary inclusion dependencies, the restricted chase of `r(a, b)` is
//! a tree in which every element has at most one outgoing fact per relation
//! symbol. A well-filtering plan is equivalent to `r(a, x)` exactly when it
//! returns `b` on that (infinite) chase; truncating it at a depth larger than
//! the plan semantics reaches keeps the answer.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::plan::{Atom, ConjunctiveQuery, ExecutionPlan, PathFunction, Term, Word};
use crate::schema::{AtomicQuery, RelationSymbol, UidSet};

/// Read access to facts, by element and relation symbol.
pub trait FactSource {
    fn element(&mut self, name: &str) -> Option<usize>;
    fn name(&self, id: usize) -> &str;
    /// Targets of `sym`-facts leaving `id` (following `r-` walks `r` backwards).
    fn neighbors(&mut self, id: usize, sym: &RelationSymbol) -> Vec<usize>;
    fn element_ids(&mut self) -> Vec<usize>;
}

/// A finite set of binary facts.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    facts: BTreeSet<(RelationSymbol, usize, usize)>,
    adjacency: HashMap<(usize, RelationSymbol), Vec<usize>>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.ids.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    /// Adds `sym(subject, object)`; inverse symbols are stored as the
    /// forward fact with swapped arguments.
    pub fn add_fact(&mut self, sym: &RelationSymbol, subject: &str, object: &str) -> bool {
        let (s, o) = (self.intern(subject), self.intern(object));
        let (rel, s, o) = if sym.is_inverted() {
            (sym.inverse(), o, s)
        } else {
            (sym.clone(), s, o)
        };
        if !self.facts.insert((rel.clone(), s, o)) {
            return false;
        }
        self.adjacency.entry((s, rel.clone())).or_default().push(o);
        self.adjacency
            .entry((o, rel.inverse()))
            .or_default()
            .push(s);
        true
    }

    pub fn contains(&self, sym: &RelationSymbol, subject: &str, object: &str) -> bool {
        let (Some(&s), Some(&o)) = (self.ids.get(subject), self.ids.get(object)) else {
            return false;
        };
        self.adjacency
            .get(&(s, sym.clone()))
            .is_some_and(|v| v.contains(&o))
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Forward facts `(relation, subject, object)` in insertion-independent
    /// order.
    pub fn facts(&self) -> impl Iterator<Item = (&RelationSymbol, &str, &str)> {
        self.facts
            .iter()
            .map(|(r, s, o)| (r, self.names[*s].as_str(), self.names[*o].as_str()))
    }

    /// Whether every element with an outgoing `r`-fact has an outgoing
    /// `s`-fact for each `r ⇝ s`.
    pub fn satisfies(&self, uids: &UidSet) -> bool {
        uids.iter().all(|(r, s)| {
            (0..self.names.len()).all(|e| {
                !self.adjacency.contains_key(&(e, r.clone()))
                    || self.adjacency.contains_key(&(e, s.clone()))
            })
        })
    }

    pub fn evaluate(&self, query: &ConjunctiveQuery) -> BTreeSet<String> {
        evaluate(&mut self.clone(), query)
    }

    pub fn holds_path(&self, word: &Word, from: &str, to: &str) -> bool {
        holds_path(&mut self.clone(), word, from, to)
    }
}

impl FactSource for Instance {
    fn element(&mut self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    fn neighbors(&mut self, id: usize, sym: &RelationSymbol) -> Vec<usize> {
        self.adjacency
            .get(&(id, sym.clone()))
            .cloned()
            .unwrap_or_default()
    }

    fn element_ids(&mut self) -> Vec<usize> {
        (0..self.names.len()).collect()
    }
}

/// Answers of `query` on `source`, by backtracking over atoms ordered so
/// that each one shares a bound term with an earlier one.
pub fn evaluate<S: FactSource>(source: &mut S, query: &ConjunctiveQuery) -> BTreeSet<String> {
    let atoms = join_order(query.atoms());
    let mut binding: HashMap<&str, usize> = HashMap::new();
    let mut answers = BTreeSet::new();
    // constants absent from the instance match nothing
    for a in &atoms {
        for t in [&a.subject, &a.object] {
            if let Term::Const(c) = t {
                if source.element(c).is_none() {
                    return answers;
                }
            }
        }
    }
    let mut found = Vec::new();
    search(source, &atoms, 0, &mut binding, query.output(), &mut found);
    for id in found {
        answers.insert(source.name(id).to_string());
    }
    answers
}

fn join_order(atoms: &[Atom]) -> Vec<&Atom> {
    let mut bound: HashSet<&Term> = HashSet::new();
    let mut left: Vec<&Atom> = atoms.iter().collect();
    let mut out = Vec::with_capacity(atoms.len());
    while !left.is_empty() {
        let pick = left
            .iter()
            .position(|a| {
                matches!(a.subject, Term::Const(_))
                    || matches!(a.object, Term::Const(_))
                    || bound.contains(&a.subject)
                    || bound.contains(&a.object)
            })
            .unwrap_or(0);
        let a = left.remove(pick);
        bound.insert(&a.subject);
        bound.insert(&a.object);
        out.push(a);
    }
    out
}

fn resolve<S: FactSource>(
    source: &mut S,
    t: &Term,
    binding: &HashMap<&str, usize>,
) -> Option<usize> {
    match t {
        Term::Const(c) => source.element(c),
        Term::Var(v) => binding.get(v.as_str()).copied(),
    }
}

fn search<'q, S: FactSource>(
    source: &mut S,
    atoms: &[&'q Atom],
    k: usize,
    binding: &mut HashMap<&'q str, usize>,
    output: &str,
    found: &mut Vec<usize>,
) {
    if k == atoms.len() {
        if let Some(&id) = binding.get(output) {
            if !found.contains(&id) {
                found.push(id);
            }
        }
        return;
    }
    let atom = atoms[k];
    let subject = resolve(source, &atom.subject, binding);
    let object = resolve(source, &atom.object, binding);
    let pairs: Vec<(usize, usize)> = match (subject, object) {
        (Some(s), _) => source
            .neighbors(s, &atom.relation)
            .into_iter()
            .map(|o| (s, o))
            .collect(),
        (None, Some(o)) => source
            .neighbors(o, &atom.relation.inverse())
            .into_iter()
            .map(|s| (s, o))
            .collect(),
        (None, None) => {
            let mut pairs = Vec::new();
            for s in source.element_ids() {
                for o in source.neighbors(s, &atom.relation) {
                    pairs.push((s, o));
                }
            }
            pairs
        }
    };
    for (s, o) in pairs {
        let mut added = Vec::new();
        let mut ok = true;
        for (t, val) in [(&atom.subject, s), (&atom.object, o)] {
            match t {
                Term::Const(_) => ok &= resolve(source, t, binding) == Some(val),
                Term::Var(v) => match binding.get(v.as_str()) {
                    Some(&b) => ok &= b == val,
                    None => {
                        binding.insert(v.as_str(), val);
                        added.push(v.as_str());
                    }
                },
            }
        }
        if ok {
            search(source, atoms, k + 1, binding, output, found);
        }
        for v in added {
            binding.remove(v);
        }
    }
}

/// Whether `word(from, to)` holds, following all matching facts.
pub fn holds_path<S: FactSource>(source: &mut S, word: &Word, from: &str, to: &str) -> bool {
    let (Some(start), Some(end)) = (source.element(from), source.element(to)) else {
        return false;
    };
    let mut current = BTreeSet::from([start]);
    for sym in word.symbols() {
        let mut next = BTreeSet::new();
        for &e in &current {
            next.extend(source.neighbors(e, sym));
        }
        if next.is_empty() {
            return false;
        }
        current = next;
    }
    current.contains(&end)
}

#[derive(Clone, Debug)]
struct ChaseElement {
    name: String,
    depth: usize,
    /// Symbols whose dependencies this element must satisfy.
    generator: RelationSymbol,
    edges: BTreeMap<RelationSymbol, usize>,
    expanded: bool,
}

/// The restricted chase of `seed(a, b)`, expanded on demand.
///
/// Elements of depth below `max_depth` receive their missing facts the first
/// time they are visited; `a` and `b` have depth 0 and each fresh element is
/// one deeper than its parent, so depth counts breadth-first rounds. Fresh elements are named `n1`,
/// `n2`, ... in creation order, skipping `a` and `b`.
#[derive(Clone, Debug)]
pub struct LazyChase<'u> {
    uids: &'u UidSet,
    elements: Vec<ChaseElement>,
    by_name: HashMap<String, usize>,
    max_depth: usize,
    counter: usize,
}

impl<'u> LazyChase<'u> {
    pub fn new(
        seed: &RelationSymbol,
        a: &str,
        b: &str,
        uids: &'u UidSet,
        max_depth: usize,
    ) -> Self {
        let mut chase = LazyChase {
            uids,
            elements: Vec::new(),
            by_name: HashMap::new(),
            max_depth,
            counter: 0,
        };
        let ia = chase.push(a.to_string(), 0, seed.clone());
        let ib = chase.push(b.to_string(), 0, seed.inverse());
        chase.elements[ia].edges.insert(seed.clone(), ib);
        chase.elements[ib].edges.insert(seed.inverse(), ia);
        chase
    }

    fn push(&mut self, name: String, depth: usize, generator: RelationSymbol) -> usize {
        self.by_name.insert(name.clone(), self.elements.len());
        self.elements.push(ChaseElement {
            name,
            depth,
            generator,
            edges: BTreeMap::new(),
            expanded: false,
        });
        self.elements.len() - 1
    }

    fn fresh_name(&mut self) -> String {
        loop {
            self.counter += 1;
            let name = format!("n{}", self.counter);
            if !self.by_name.contains_key(&name) {
                return name;
            }
        }
    }

    fn expand(&mut self, id: usize) {
        let e = &self.elements[id];
        if e.expanded || e.depth >= self.max_depth {
            return;
        }
        self.elements[id].expanded = true;
        let needed: Vec<RelationSymbol> = self
            .uids
            .implied_by(&self.elements[id].generator)
            .cloned()
            .collect();
        for t in needed {
            if self.elements[id].edges.contains_key(&t) {
                continue;
            }
            let name = self.fresh_name();
            let depth = self.elements[id].depth + 1;
            let child = self.push(name, depth, t.inverse());
            self.elements[id].edges.insert(t.clone(), child);
            self.elements[child].edges.insert(t.inverse(), id);
        }
    }

    /// Expands everything reachable within the depth bound and returns the
    /// resulting instance.
    pub fn materialize(mut self) -> Instance {
        let mut k = 0;
        while k < self.elements.len() {
            self.expand(k);
            k += 1;
        }
        let mut inst = Instance::new();
        for e in &self.elements {
            inst.intern(&e.name);
        }
        for e in &self.elements {
            for (sym, &t) in &e.edges {
                inst.add_fact(sym, &e.name, &self.elements[t].name);
            }
        }
        inst
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }
}

impl FactSource for LazyChase<'_> {
    fn element(&mut self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    fn name(&self, id: usize) -> &str {
        &self.elements[id].name
    }

    fn neighbors(&mut self, id: usize, sym: &RelationSymbol) -> Vec<usize> {
        self.expand(id);
        self.elements[id]
            .edges
            .get(sym)
            .into_iter()
            .copied()
            .collect()
    }

    fn element_ids(&mut self) -> Vec<usize> {
        (0..self.elements.len()).collect()
    }
}

/// Name for the second seed element, distinct from the constant.
pub fn other_constant(a: &str) -> String {
    let mut b = "b".to_string();
    while b == a {
        b.push('\'');
    }
    b
}

/// A materialized chase of `relation(a, b)`.
#[derive(Clone, Debug)]
pub struct ChaseInstance {
    pub instance: Instance,
    pub a: String,
    pub b: String,
    pub depth: usize,
}

impl std::ops::Deref for ChaseInstance {
    type Target = Instance;

    fn deref(&self) -> &Instance {
        &self.instance
    }
}

/// The chase of `relation(a, b)` after `depth` rounds.
pub fn chase(relation: &RelationSymbol, a: &str, uids: &UidSet, depth: usize) -> ChaseInstance {
    let b = other_constant(a);
    let instance = LazyChase::new(relation, a, &b, uids, depth).materialize();
    ChaseInstance {
        instance,
        a: a.to_string(),
        b,
        depth,
    }
}

/// The chase of the query atom `r(a, b)`.
pub fn chase_query(query: &AtomicQuery, uids: &UidSet, depth: usize) -> ChaseInstance {
    chase(&query.relation, &query.constant, uids, depth)
}

/// Whether the loop `w(a, a)` holds on the chase of `r(a, b)`.
pub fn loop_holds(query: &AtomicQuery, uids: &UidSet, word: &Word, depth: usize) -> bool {
    let b = other_constant(&query.constant);
    let mut lazy = LazyChase::new(&query.relation, &query.constant, &b, uids, depth);
    holds_path(&mut lazy, word, &query.constant, &query.constant)
}

/// Answers of `cq` on the chase of the query atom, expanding lazily.
pub fn answers_on_chase(
    cq: &ConjunctiveQuery,
    query: &AtomicQuery,
    uids: &UidSet,
    depth: usize,
) -> BTreeSet<String> {
    let b = other_constant(&query.constant);
    let mut lazy = LazyChase::new(&query.relation, &query.constant, &b, uids, depth);
    evaluate(&mut lazy, cq)
}

/// Equivalence of a well-filtering plan with the atomic query under `uids`.
///
/// Well-filtering plans are contained in the query, so the plan is
/// equivalent exactly when it returns `{b}` on the chase of `r(a, b)`.
/// `depth` must cover the plan semantics (its atom count plus one is
/// enough).
pub fn oracle_equivalent(
    plan: &ExecutionPlan,
    query: &AtomicQuery,
    uids: &UidSet,
    depth: usize,
) -> Result<bool> {
    if !plan.is_well_filtering(query) {
        return Err(Error::NotWellFiltering);
    }
    let b = other_constant(&query.constant);
    Ok(answers_on_chase(&plan.semantics(), query, uids, depth) == BTreeSet::from([b]))
}

/// Every chain plan of at most `max_calls` calls, unfiltered or with one
/// filterable position filtered to the constant; returns the first one
/// found equivalent by the chase.
pub fn brute_force_search(
    functions: &[Arc<PathFunction>],
    uids: &UidSet,
    query: &AtomicQuery,
    max_calls: usize,
) -> Option<ExecutionPlan> {
    let steps: Vec<(Arc<PathFunction>, usize)> = functions
        .iter()
        .flat_map(|f| f.outputs().iter().map(move |&p| (Arc::clone(f), p)))
        .collect();
    let mut chains: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_calls {
        let mut next = Vec::new();
        for chain in &chains {
            for k in 0..steps.len() {
                let mut c = chain.clone();
                c.push(k);
                if let Some(plan) = try_chain(&c, &steps, uids, query) {
                    return Some(plan);
                }
                next.push(c);
            }
        }
        chains = next;
    }
    None
}

fn try_chain(
    chain: &[usize],
    steps: &[(Arc<PathFunction>, usize)],
    uids: &UidSet,
    query: &AtomicQuery,
) -> Option<ExecutionPlan> {
    let picked: Vec<_> = chain.iter().map(|&k| steps[k].clone()).collect();
    let base = ExecutionPlan::chain(query.constant.clone(), &picked).ok()?;
    let depth = base.semantics().atoms().len() + 1;
    // Filters only shrink answers and keep well-filtering, so some filter
    // set works iff none or a single one does.
    let singles = base
        .filterable_positions()
        .into_iter()
        .filter_map(|at| base.with_filter(at, query.constant.clone()).ok());
    std::iter::once(base.clone()).chain(singles).find(|plan| {
        plan.is_well_filtering(query) && oracle_equivalent(plan, query, uids, depth) == Ok(true)
    })
}
