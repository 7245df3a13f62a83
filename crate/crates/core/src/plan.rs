//! Path functions, execution plans and their semantics.
//!
//! A path function `f(x0; outputs) <- r1(x0, x1), ..., rn(x_{n-1}, xn)` has
//! its input at position 0 and a non-empty set of output positions among
//! `1..=n`; the remaining positions are existential. A plan is a sequence of
//! calls: each call takes either the plan constant or an output of an
//! earlier call as input, and may pin some of its outputs to constants
//! (filters). One unfiltered output of one call is the plan output.
//!
//! The transformations here (minimal filtering, root paths, the path
//! transformation) turn plans into words over the relation alphabet, which is
//! where the grammar machinery takes over.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::schema::{AtomicQuery, RelationSymbol};

/// A view whose body is a chain of binary atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathFunction {
    name: String,
    body: Vec<RelationSymbol>,
    outputs: Vec<usize>,
}

impl PathFunction {
    /// `outputs` lists 1-based body positions; it is sorted and deduplicated
    /// before validation.
    pub fn new(
        name: impl Into<String>,
        body: Vec<RelationSymbol>,
        mut outputs: Vec<usize>,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidFunction {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if body.is_empty() {
            return Err(invalid("body must contain at least one atom"));
        }
        outputs.sort_unstable();
        outputs.dedup();
        if outputs.is_empty() {
            return Err(invalid("at least one output position is required"));
        }
        if outputs.iter().any(|&p| p == 0 || p > body.len()) {
            return Err(invalid("output positions must lie in 1..=body length"));
        }
        Ok(PathFunction {
            name,
            body,
            outputs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &[RelationSymbol] {
        &self.body
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn is_output(&self, position: usize) -> bool {
        self.outputs.binary_search(&position).is_ok()
    }
}

impl fmt::Display for PathFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let outs: Vec<_> = self.outputs.iter().map(|p| format!("x{p}")).collect();
        write!(f, "{}(x0; {}) <- ", self.name, outs.join(", "))?;
        for (i, r) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}(x{i}, x{})", i + 1)?;
        }
        Ok(())
    }
}

/// A word over the relation alphabet; the skeleton of a path query.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<RelationSymbol>);

impl Word {
    pub fn new(symbols: Vec<RelationSymbol>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn symbols(&self) -> &[RelationSymbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<&RelationSymbol> {
        self.0.last()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<_> = self.0.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Parses symbols separated by whitespace, `.` or `·`; `ε` or the empty
    /// string is the empty word.
    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .split(|c: char| c.is_whitespace() || c == '.' || c == '·')
            .filter(|t| !t.is_empty() && *t != "ε")
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Word(symbols))
    }
}

impl FromIterator<RelationSymbol> for Word {
    fn from_iter<T: IntoIterator<Item = RelationSymbol>>(iter: T) -> Self {
        Word(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn is_const(&self, c: &str) -> bool {
        matches!(self, Term::Const(x) if x == c)
    }

    pub fn is_var(&self, v: &str) -> bool {
        matches!(self, Term::Var(x) if x == v)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) | Term::Var(c) => f.write_str(c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: RelationSymbol,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn new(relation: RelationSymbol, subject: Term, object: Term) -> Self {
        Atom {
            relation,
            subject,
            object,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.relation, self.subject, self.object)
    }
}

/// A connected conjunctive query with a single output variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    atoms: Vec<Atom>,
    output: String,
}

impl ConjunctiveQuery {
    pub fn new(atoms: Vec<Atom>, output: impl Into<String>) -> Result<Self> {
        let output = output.into();
        let out = Term::Var(output.clone());
        if !atoms.iter().any(|a| a.subject == out || a.object == out) {
            return Err(Error::Structural(format!(
                "output variable `{output}` occurs in no atom"
            )));
        }
        if !is_connected(&atoms) {
            return Err(Error::Structural("query atoms are not connected".into()));
        }
        Ok(ConjunctiveQuery { atoms, output })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    /// The sequence of relation symbols, in atom order.
    pub fn skeleton(&self) -> Word {
        self.atoms.iter().map(|a| a.relation.clone()).collect()
    }

    /// True if some atom reads `r(c, x)` or `r-(x, c)` for the output `x`.
    pub fn has_answer_atom(&self, relation: &RelationSymbol, constant: &str) -> bool {
        let inv = relation.inverse();
        self.atoms.iter().any(|at| {
            (at.relation == *relation
                && at.subject.is_const(constant)
                && at.object.is_var(&self.output))
                || (at.relation == inv
                    && at.subject.is_var(&self.output)
                    && at.object.is_const(constant))
        })
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms: Vec<_> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "q({}) <- {}", self.output, atoms.join(", "))
    }
}

fn is_connected(atoms: &[Atom]) -> bool {
    if atoms.len() <= 1 {
        return true;
    }
    // atoms are linked by any shared term, the plan constant included
    let mut reached = vec![false; atoms.len()];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for j in 0..atoms.len() {
            if reached[j] {
                continue;
            }
            let shares = [&atoms[i].subject, &atoms[i].object]
                .iter()
                .any(|t| **t == atoms[j].subject || **t == atoms[j].object);
            if shares {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// An output variable of a call: `position` is a 1-based body position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutputRef {
    pub call: usize,
    pub position: usize,
}

impl OutputRef {
    pub fn new(call: usize, position: usize) -> Self {
        OutputRef { call, position }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CallInput {
    /// The plan constant.
    Constant,
    Output(OutputRef),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionCall {
    pub function: Arc<PathFunction>,
    pub input: CallInput,
    /// Output positions pinned to a constant.
    pub filters: BTreeMap<usize, String>,
}

impl FunctionCall {
    pub fn new(function: Arc<PathFunction>, input: CallInput) -> Self {
        FunctionCall {
            function,
            input,
            filters: BTreeMap::new(),
        }
    }

    pub fn with_filter(mut self, position: usize, constant: impl Into<String>) -> Self {
        self.filters.insert(position, constant.into());
        self
    }
}

/// A plan `π_a(x) = c_1, ..., c_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExecutionPlan {
    constant: String,
    calls: Vec<FunctionCall>,
    output: OutputRef,
}

impl ExecutionPlan {
    pub fn new(
        constant: impl Into<String>,
        calls: Vec<FunctionCall>,
        output: OutputRef,
    ) -> Result<Self> {
        let plan = ExecutionPlan {
            constant: constant.into(),
            calls,
            output,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Builds the chain `f_1(a, ...), f_2(y_1, ...), ...` where each step
    /// names the function and the output position it hands on; the last
    /// step's position is the plan output.
    pub fn chain(
        constant: impl Into<String>,
        steps: &[(Arc<PathFunction>, usize)],
    ) -> Result<Self> {
        let calls = steps
            .iter()
            .enumerate()
            .map(|(i, (f, _))| {
                let input = match i {
                    0 => CallInput::Constant,
                    _ => CallInput::Output(OutputRef::new(i - 1, steps[i - 1].1)),
                };
                FunctionCall::new(Arc::clone(f), input)
            })
            .collect();
        let output = match steps.last() {
            Some((_, pos)) => OutputRef::new(steps.len() - 1, *pos),
            None => OutputRef::new(0, 0),
        };
        ExecutionPlan::new(constant, calls, output)
    }

    fn validate(&self) -> Result<()> {
        if self.calls.is_empty() {
            return Err(Error::Structural("a plan needs at least one call".into()));
        }
        for (i, call) in self.calls.iter().enumerate() {
            let f = &call.function;
            for pos in call.filters.keys() {
                if !f.is_output(*pos) {
                    return Err(Error::Structural(format!(
                        "call {i} filters position {pos}, which is not an output of {}",
                        f.name()
                    )));
                }
            }
            if let CallInput::Output(src) = call.input {
                if src.call >= i {
                    return Err(Error::Structural(format!(
                        "call {i} takes its input from call {}, which is not earlier",
                        src.call
                    )));
                }
                self.check_free_output(src, "input")?;
            }
        }
        if self.output.call >= self.calls.len() {
            return Err(Error::Structural(format!(
                "output refers to missing call {}",
                self.output.call
            )));
        }
        self.check_free_output(self.output, "plan output")
    }

    fn check_free_output(&self, r: OutputRef, what: &str) -> Result<()> {
        let call = &self.calls[r.call];
        if !call.function.is_output(r.position) {
            return Err(Error::Structural(format!(
                "{what} refers to position {} of call {}, which is not an output of {}",
                r.position,
                r.call,
                call.function.name()
            )));
        }
        if call.filters.contains_key(&r.position) {
            return Err(Error::Structural(format!(
                "{what} refers to filtered position {} of call {}",
                r.position, r.call
            )));
        }
        Ok(())
    }

    pub fn constant(&self) -> &str {
        &self.constant
    }

    pub fn calls(&self) -> &[FunctionCall] {
        &self.calls
    }

    pub fn output(&self) -> OutputRef {
        self.output
    }

    /// Every filter of the plan, in call then position order.
    pub fn filters(&self) -> impl Iterator<Item = (OutputRef, &str)> + '_ {
        self.calls.iter().enumerate().flat_map(|(i, c)| {
            c.filters
                .iter()
                .map(move |(&p, k)| (OutputRef::new(i, p), k.as_str()))
        })
    }

    pub fn filter_count(&self) -> usize {
        self.calls.iter().map(|c| c.filters.len()).sum()
    }

    fn is_wired(&self, r: OutputRef) -> bool {
        self.calls.iter().any(|c| c.input == CallInput::Output(r))
    }

    /// Output positions that may receive a filter: neither the plan output
    /// nor consumed as the input of another call.
    pub fn filterable_positions(&self) -> Vec<OutputRef> {
        let mut out = Vec::new();
        for (i, c) in self.calls.iter().enumerate() {
            for &p in c.function.outputs() {
                let r = OutputRef::new(i, p);
                if r != self.output && !self.is_wired(r) {
                    out.push(r);
                }
            }
        }
        out
    }

    pub fn without_filters(&self) -> ExecutionPlan {
        let mut plan = self.clone();
        for c in &mut plan.calls {
            c.filters.clear();
        }
        plan
    }

    pub fn with_filter(&self, at: OutputRef, constant: impl Into<String>) -> Result<ExecutionPlan> {
        let mut plan = self.clone();
        let call = plan
            .calls
            .get_mut(at.call)
            .ok_or_else(|| Error::Structural(format!("no call {}", at.call)))?;
        call.filters.insert(at.position, constant.into());
        plan.validate()?;
        Ok(plan)
    }

    /// The conjunctive query the plan evaluates.
    ///
    /// Each call contributes its body with fresh variables; the input is the
    /// plan constant or the term of the wired output, filtered positions
    /// become constants. Variables are numbered `v1, v2, ...` in call order.
    pub fn semantics(&self) -> ConjunctiveQuery {
        let mut counter = 0usize;
        let mut terms: Vec<Vec<Term>> = Vec::with_capacity(self.calls.len());
        let mut atoms = Vec::new();
        for call in &self.calls {
            let f = &call.function;
            let mut t = Vec::with_capacity(f.len() + 1);
            t.push(match call.input {
                CallInput::Constant => Term::Const(self.constant.clone()),
                CallInput::Output(src) => terms[src.call][src.position].clone(),
            });
            for p in 1..=f.len() {
                t.push(match call.filters.get(&p) {
                    Some(c) => Term::Const(c.clone()),
                    None => {
                        counter += 1;
                        Term::Var(format!("v{counter}"))
                    }
                });
            }
            for (k, r) in f.body().iter().enumerate() {
                atoms.push(Atom::new(r.clone(), t[k].clone(), t[k + 1].clone()));
            }
            terms.push(t);
        }
        let output = match &terms[self.output.call][self.output.position] {
            Term::Var(v) => v.clone(),
            Term::Const(_) => unreachable!("validated: plan output is never filtered"),
        };
        ConjunctiveQuery { atoms, output }
    }

    /// Indices of the calls in chain order, if the plan is non-redundant.
    ///
    /// A plan is redundant when no call consumes the constant, or when some
    /// call has no output that is the plan output or the input of another
    /// call.
    pub fn chain_order(&self) -> Result<Vec<usize>> {
        let starts: Vec<_> = (0..self.calls.len())
            .filter(|&i| self.calls[i].input == CallInput::Constant)
            .collect();
        if starts.is_empty() {
            return Err(Error::Redundant(
                "no call takes the plan constant as input".into(),
            ));
        }
        for (i, c) in self.calls.iter().enumerate() {
            let contributes = self.output.call == i
                || self
                    .calls
                    .iter()
                    .any(|d| matches!(d.input, CallInput::Output(src) if src.call == i));
            if !contributes {
                return Err(Error::Redundant(format!(
                    "call {i} ({}) contributes nothing to the output",
                    c.function.name()
                )));
            }
        }
        let mut order = vec![starts[0]];
        let mut cur = starts[0];
        while cur != self.output.call {
            let consumers: Vec<_> = (0..self.calls.len())
                .filter(
                    |&j| matches!(self.calls[j].input, CallInput::Output(src) if src.call == cur),
                )
                .collect();
            match consumers.as_slice() {
                [next] => {
                    order.push(*next);
                    cur = *next;
                }
                _ => return Err(Error::Redundant("calls do not form a single chain".into())),
            }
        }
        if order.len() != self.calls.len() {
            return Err(Error::Redundant(
                "some calls are not on the chain to the output".into(),
            ));
        }
        Ok(order)
    }

    /// The calls of a non-redundant plan in chain order.
    pub fn sequence_calls(&self) -> Result<Vec<FunctionCall>> {
        Ok(self
            .chain_order()?
            .into_iter()
            .map(|i| self.calls[i].clone())
            .collect())
    }

    pub fn is_non_redundant(&self) -> bool {
        self.chain_order().is_ok()
    }

    /// Rewrites the plan so that its calls are stored in chain order.
    pub fn sequenced(&self) -> Result<ExecutionPlan> {
        let order = self.chain_order()?;
        self.reindexed(&order)
    }

    /// Keeps the calls listed in `order` (which must respect input
    /// dependencies), renumbering references.
    fn reindexed(&self, order: &[usize]) -> Result<ExecutionPlan> {
        let mut new_index = vec![usize::MAX; self.calls.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let remap = |r: OutputRef| OutputRef::new(new_index[r.call], r.position);
        let calls = order
            .iter()
            .map(|&old| {
                let mut c = self.calls[old].clone();
                if let CallInput::Output(src) = c.input {
                    c.input = CallInput::Output(remap(src));
                }
                c
            })
            .collect();
        ExecutionPlan::new(self.constant.clone(), calls, remap(self.output))
    }

    /// Position of the output of `call` that the chain uses: the input of
    /// the next call, or the plan output. Only meaningful on chain plans.
    fn used_output(&self, call: usize) -> Option<usize> {
        if self.output.call == call {
            return Some(self.output.position);
        }
        self.calls.iter().find_map(|c| match c.input {
            CallInput::Output(src) if src.call == call => Some(src.position),
            _ => None,
        })
    }

    /// Keeps the chain of calls leading from the constant to the plan output.
    pub fn extract_nonredundant(&self, query: &AtomicQuery) -> Result<ExecutionPlan> {
        if !self.is_well_filtering(query) {
            return Err(Error::NotWellFiltering);
        }
        let mut order = vec![self.output.call];
        let mut cur = self.output.call;
        while let CallInput::Output(src) = self.calls[cur].input {
            order.push(src.call);
            cur = src.call;
        }
        order.reverse();
        self.reindexed(&order)
    }

    /// All filters use the query constant, the plan starts from it, and the
    /// semantics contains `r(a, x)` or `r-(x, a)` for the plan output `x`.
    pub fn is_well_filtering(&self, query: &AtomicQuery) -> bool {
        self.constant == query.constant
            && self.filters().all(|(_, c)| c == query.constant)
            && self
                .semantics()
                .has_answer_atom(&query.relation, &query.constant)
    }

    /// The filter position that makes the unfiltered plan produce the query
    /// atom on the output variable, choosing the greatest one.
    ///
    /// With the output at position `j` of its call, only `j + 1` (turning
    /// `r-(x_j, x_{j+1})` into `r-(x, a)`) and `j - 1` (turning
    /// `r(x_{j-1}, x_j)` into `r(a, x)`) can create that atom; the former is
    /// greater and wins when both apply.
    fn minimal_filter_position(&self, query: &AtomicQuery) -> Option<OutputRef> {
        let out = self.output;
        let f = &self.calls[out.call].function;
        let j = out.position;
        let free = self.filterable_positions();
        let r = &query.relation;
        let after = OutputRef::new(out.call, j + 1);
        if j < f.len() && f.body()[j] == r.inverse() && free.contains(&after) {
            return Some(after);
        }
        if j >= 2 {
            let before = OutputRef::new(out.call, j - 1);
            if f.body()[j - 1] == *r && free.contains(&before) {
                return Some(before);
            }
        }
        None
    }

    /// Strips every filter and adds the single minimal one, if any; no
    /// precondition on the input plan.
    pub fn with_minimal_filter(&self, query: &AtomicQuery) -> ExecutionPlan {
        let stripped = self.without_filters();
        match stripped.minimal_filter_position(query) {
            Some(at) => stripped
                .with_filter(at, query.constant.clone())
                .expect("filterable position"),
            None => stripped,
        }
    }

    /// The minimal filtering plan associated with a well-filtering plan.
    pub fn minimal_filtering_plan(&self, query: &AtomicQuery) -> Result<ExecutionPlan> {
        if !self.is_well_filtering(query) {
            return Err(Error::NotWellFiltering);
        }
        Ok(self.with_minimal_filter(query))
    }

    /// Word from the plan constant to the variable at `filter`: along the
    /// chain, each call contributes its body prefix up to the output it
    /// hands on.
    pub fn root_path(&self, filter: OutputRef) -> Result<Word> {
        let call = self
            .calls
            .get(filter.call)
            .ok_or_else(|| Error::Structural(format!("no call {}", filter.call)))?;
        if filter.position == 0 || filter.position > call.function.len() {
            return Err(Error::Structural(format!(
                "position {} of call {} is not an output variable",
                filter.position, filter.call
            )));
        }
        let mut pieces = vec![&call.function.body()[..filter.position]];
        let mut cur = filter.call;
        while let CallInput::Output(src) = self.calls[cur].input {
            pieces.push(&self.calls[src.call].function.body()[..src.position]);
            cur = src.call;
        }
        Ok(pieces.into_iter().rev().flatten().cloned().collect())
    }

    fn check_transformable(&self, query: &AtomicQuery) -> Result<ExecutionPlan> {
        let chain = self.sequenced()?;
        if chain.minimal_filtering_plan(query)? != chain {
            return Err(Error::NotMinimalFiltering);
        }
        Ok(chain)
    }

    /// Rewrites a non-redundant minimal filtering plan into a path query.
    ///
    /// Every call walks its whole body and back to the output it hands on;
    /// the end of the path is then adjusted so that the last atom is
    /// `r-(x, a)` (appended when the plan holds `r(a, x)`) or `r(a, x)` (when
    /// the plan's filter produced `r-(x, a)`).
    pub fn path_transform(&self, query: &AtomicQuery) -> Result<ConjunctiveQuery> {
        let chain = self.check_transformable(query)?;
        let mut atoms: Vec<Atom> = Vec::new();
        let mut current = Term::Const(chain.constant.clone());
        for (i, call) in chain.calls.iter().enumerate() {
            let f = &call.function;
            let m = f.len();
            let j = chain.used_output(i).expect("chain plan");
            // forward walk: y_j..y_{m-1} are primed, the walk back reuses the
            // plain names
            let name = |k: usize, primed: bool| {
                Term::Var(format!("c{i}y{k}{}", if primed { "'" } else { "" }))
            };
            let mut prev = current.clone();
            for k in 1..=m {
                let next = name(k, k >= j && k < m);
                atoms.push(Atom::new(f.body()[k - 1].clone(), prev, next.clone()));
                prev = next;
            }
            for k in (j..m).rev() {
                let next = name(k, false);
                atoms.push(Atom::new(f.body()[k].inverse(), prev, next.clone()));
                prev = next;
            }
            current = prev;
        }
        let output = match &current {
            Term::Var(v) => v.clone(),
            Term::Const(_) => unreachable!("paths always end on a variable"),
        };
        let a = Term::Const(chain.constant.clone());
        match chain.answer_case() {
            AnswerCase::Forward => {
                atoms.push(Atom::new(query.relation.inverse(), current, a));
            }
            AnswerCase::Backward => {
                // the last atom is r(y, x) where y was filtered to a
                let n = atoms.len();
                let replaced = atoms[n - 1].subject.clone();
                atoms[n - 1].subject = a.clone();
                if n >= 2 && atoms[n - 2].object == replaced {
                    atoms[n - 2].object = a;
                }
            }
        }
        ConjunctiveQuery::new(atoms, output)
    }

    /// Skeleton of [`ExecutionPlan::path_transform`].
    pub fn full_path_transform(&self, query: &AtomicQuery) -> Result<Word> {
        let chain = self.check_transformable(query)?;
        let mut word = Vec::new();
        for (i, call) in chain.calls.iter().enumerate() {
            let j = chain.used_output(i).expect("chain plan");
            word.extend(forward_backward_segment(&call.function, j).0);
        }
        if chain.answer_case() == AnswerCase::Forward {
            word.push(query.relation.inverse());
        }
        Ok(Word(word))
    }

    /// Which atom carries the answer in a minimal filtering chain plan: the
    /// one its filter creates, or the first atom `r(a, x)` when unfiltered.
    fn answer_case(&self) -> AnswerCase {
        let out = self.output;
        match self.filters().next() {
            Some((at, _)) if at.call == out.call && at.position == out.position + 1 => {
                AnswerCase::Backward
            }
            _ => AnswerCase::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AnswerCase {
    /// The plan holds `r(a, x)`.
    Forward,
    /// The plan holds `r-(x, a)`.
    Backward,
}

/// `r_1..r_n` when `i = n`, otherwise `r_1..r_n r_n-..r_{i+1}-`.
pub fn forward_backward_segment(f: &PathFunction, i: usize) -> Word {
    let body = f.body();
    let mut w: Vec<_> = body.to_vec();
    w.extend(body[i..].iter().rev().map(RelationSymbol::inverse));
    Word(w)
}

/// The path query with skeleton `w` that starts at `a` and whose last atom
/// is `r(a, x)` or `r-(x, a)`. `w` must end with the query relation or its
/// inverse.
pub fn minimal_filtering_path_query(w: &Word, query: &AtomicQuery) -> Result<ConjunctiveQuery> {
    let last = w.last().ok_or_else(|| {
        Error::Structural("empty word has no minimal filtering path query".into())
    })?;
    let n = w.len();
    let a = || Term::Const(query.constant.clone());
    let var = |k: usize| Term::Var(format!("y{k}"));
    // terms t_0..t_n
    let mut terms: Vec<Term> = (0..=n).map(|k| if k == 0 { a() } else { var(k) }).collect();
    let output = if *last == query.relation {
        terms[n - 1] = a();
        format!("y{n}")
    } else if *last == query.relation.inverse() {
        terms[n] = a();
        if n < 2 {
            return Err(Error::Structural(
                "output would coincide with the constant".into(),
            ));
        }
        format!("y{}", n - 1)
    } else {
        return Err(Error::Structural(format!(
            "word `{w}` does not end with {}",
            query.relation
        )));
    };
    let atoms = w
        .symbols()
        .iter()
        .enumerate()
        .map(|(k, r)| Atom::new(r.clone(), terms[k].clone(), terms[k + 1].clone()))
        .collect();
    ConjunctiveQuery::new(atoms, output)
}

impl fmt::Display for ExecutionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<Vec<String>> = Vec::new();
        let mut counter = 0;
        for (i, call) in self.calls.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let input = match call.input {
                CallInput::Constant => self.constant.clone(),
                CallInput::Output(src) => names[src.call][src.position].clone(),
            };
            let mut t = vec![input.clone()];
            let mut shown = Vec::new();
            for p in 1..=call.function.len() {
                let name = if let Some(c) = call.filters.get(&p) {
                    c.clone()
                } else if OutputRef::new(i, p) == self.output {
                    "x".to_string()
                } else {
                    counter += 1;
                    format!("y{counter}")
                };
                if call.function.is_output(p) {
                    shown.push(name.clone());
                }
                t.push(name);
            }
            write!(
                f,
                "{}({}; {})",
                call.function.name(),
                input,
                shown.join(", ")
            )?;
            names.push(t);
        }
        Ok(())
    }
}

/// Relation symbols mentioned anywhere in a function list.
pub fn mentioned_symbols<'a, I>(functions: I) -> BTreeSet<RelationSymbol>
where
    I: IntoIterator<Item = &'a PathFunction>,
{
    functions
        .into_iter()
        .flat_map(|f| f.body().iter().cloned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> RelationSymbol {
        s.parse().unwrap()
    }

    fn func(name: &str, body: &str, outputs: &[usize]) -> Arc<PathFunction> {
        let body: Word = body.parse().unwrap();
        Arc::new(PathFunction::new(name, body.0, outputs.to_vec()).unwrap())
    }

    fn music() -> (Arc<PathFunction>, Arc<PathFunction>, Arc<PathFunction>) {
        (
            func("getAlbum", "onAlbum", &[1]),
            func("getAlbumDetails", "onAlbum- sang-", &[1, 2]),
            func("getRelAlbum", "relAlbum", &[1]),
        )
    }

    fn sang_query() -> AtomicQuery {
        AtomicQuery::new(sym("sang-"), "Jailhouse")
    }

    /// getAlbum(Jailhouse, a), getAlbumDetails(a, Jailhouse, m)
    fn blue_plan() -> ExecutionPlan {
        let (get_album, details, _) = music();
        ExecutionPlan::new(
            "Jailhouse",
            vec![
                FunctionCall::new(get_album, CallInput::Constant),
                FunctionCall::new(details, CallInput::Output(OutputRef::new(0, 1)))
                    .with_filter(1, "Jailhouse"),
            ],
            OutputRef::new(1, 2),
        )
        .unwrap()
    }

    fn two_call_plan() -> (ExecutionPlan, AtomicQuery) {
        let f1 = func("f1", "s t", &[1]);
        let f2 = func("f2", "s- r u", &[1, 2]);
        let plan = ExecutionPlan::new(
            "a",
            vec![
                FunctionCall::new(f1, CallInput::Constant),
                FunctionCall::new(f2, CallInput::Output(OutputRef::new(0, 1))).with_filter(1, "a"),
            ],
            OutputRef::new(1, 2),
        )
        .unwrap();
        (plan, AtomicQuery::new(sym("r"), "a"))
    }

    fn atom(r: &str, s: Term, o: Term) -> Atom {
        Atom::new(sym(r), s, o)
    }

    fn c(s: &str) -> Term {
        Term::Const(s.into())
    }

    fn v(s: &str) -> Term {
        Term::Var(s.into())
    }

    #[test]
    fn function_validation() {
        assert!(PathFunction::new("f", vec![], vec![1]).is_err());
        assert!(PathFunction::new("f", vec![sym("r")], vec![]).is_err());
        assert!(PathFunction::new("f", vec![sym("r")], vec![2]).is_err());
        assert!(PathFunction::new("f", vec![sym("r")], vec![0]).is_err());
        let f = PathFunction::new("f", vec![sym("r"), sym("s")], vec![2, 1, 2]).unwrap();
        assert_eq!(f.outputs(), &[1, 2]);
    }

    #[test]
    fn plan_validation() {
        let (get_album, details, _) = music();
        assert!(ExecutionPlan::new("a", vec![], OutputRef::new(0, 1)).is_err());
        // input from a later call
        let bad = ExecutionPlan::new(
            "a",
            vec![
                FunctionCall::new(get_album.clone(), CallInput::Output(OutputRef::new(1, 1))),
                FunctionCall::new(details.clone(), CallInput::Constant),
            ],
            OutputRef::new(0, 1),
        );
        assert!(bad.is_err());
        // filter on a non-output position is impossible for getAlbum(1 output)
        let bad = ExecutionPlan::new(
            "a",
            vec![FunctionCall::new(get_album.clone(), CallInput::Constant).with_filter(1, "a")],
            OutputRef::new(0, 1),
        );
        assert!(bad.is_err(), "plan output may not be filtered");
        let bad = ExecutionPlan::new(
            "a",
            vec![FunctionCall::new(details, CallInput::Constant)],
            OutputRef::new(0, 3),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn blue_plan_semantics() {
        let q = blue_plan().semantics();
        assert_eq!(
            q.atoms(),
            &[
                atom("onAlbum", c("Jailhouse"), v("v1")),
                atom("onAlbum-", v("v1"), c("Jailhouse")),
                atom("sang-", c("Jailhouse"), v("v2")),
            ]
        );
        assert_eq!(q.output(), "v2");
    }

    #[test]
    fn single_call_semantics() {
        let f = func("f", "r", &[1]);
        let plan = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        let q = plan.semantics();
        assert_eq!(q.atoms(), &[atom("r", c("a"), v("v1"))]);
        assert_eq!(q.output(), "v1");
    }

    #[test]
    fn two_call_plan_semantics() {
        let (plan, _) = two_call_plan();
        let q = plan.semantics();
        assert_eq!(
            q.atoms(),
            &[
                atom("s", c("a"), v("v1")),
                atom("t", v("v1"), v("v2")),
                atom("s-", v("v1"), c("a")),
                atom("r", c("a"), v("v3")),
                atom("u", v("v3"), v("v4")),
            ]
        );
        assert_eq!(q.output(), "v3");
        let total: usize = plan.calls().iter().map(|c| c.function.len()).sum();
        assert_eq!(q.atoms().len(), total);
    }

    #[test]
    fn sequencing() {
        let plan = blue_plan();
        let seq = plan.sequence_calls().unwrap();
        assert_eq!(seq[0].function.name(), "getAlbum");
        assert_eq!(seq[1].function.name(), "getAlbumDetails");

        let f = func("f", "r", &[1]);
        let single = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        assert_eq!(single.sequence_calls().unwrap().len(), 1);

        // appending getAlbum(m, a') is redundant
        let (get_album, _, _) = music();
        let mut calls = plan.calls().to_vec();
        calls.push(FunctionCall::new(
            get_album,
            CallInput::Output(OutputRef::new(1, 2)),
        ));
        let redundant = ExecutionPlan::new("Jailhouse", calls, OutputRef::new(1, 2)).unwrap();
        assert!(matches!(
            redundant.sequence_calls(),
            Err(Error::Redundant(_))
        ));
    }

    #[test]
    fn extraction() {
        let q = sang_query();
        let blue = blue_plan();
        assert_eq!(blue.extract_nonredundant(&q).unwrap(), blue);

        let (get_album, _, _) = music();
        let mut calls = blue.calls().to_vec();
        calls.push(FunctionCall::new(
            get_album,
            CallInput::Output(OutputRef::new(1, 2)),
        ));
        let redundant = ExecutionPlan::new("Jailhouse", calls, OutputRef::new(1, 2)).unwrap();
        assert_eq!(redundant.extract_nonredundant(&q).unwrap(), blue);

        let off = blue
            .without_filters()
            .with_filter(OutputRef::new(1, 1), "Elvis")
            .unwrap();
        assert_eq!(off.extract_nonredundant(&q), Err(Error::NotWellFiltering));
    }

    #[test]
    fn well_filtering() {
        let q = sang_query();
        assert!(blue_plan().is_well_filtering(&q));
        let other = blue_plan()
            .without_filters()
            .with_filter(OutputRef::new(1, 1), "Other")
            .unwrap();
        assert!(!other.is_well_filtering(&q));
        let f = func("f", "s", &[1]);
        let plan = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        assert!(!plan.is_well_filtering(&AtomicQuery::new(sym("r"), "a")));
    }

    #[test]
    fn minimal_filtering() {
        let f = func("f", "r", &[1]);
        let plan = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        let q = AtomicQuery::new(sym("r"), "a");
        assert_eq!(plan.minimal_filtering_plan(&q).unwrap(), plan);

        let blue = blue_plan();
        assert_eq!(blue.minimal_filtering_plan(&sang_query()).unwrap(), blue);

        // g(x0; x1, x2, x3) <- r(x0,x1), r(x1,x2), r-(x2,x3), output x2:
        // filters at x1 and x3 both give well-filtering plans, x3 is kept
        let g = func("g", "s r r-", &[1, 2, 3]);
        let both = ExecutionPlan::chain("a", &[(g, 2)])
            .unwrap()
            .with_filter(OutputRef::new(0, 1), "a")
            .unwrap()
            .with_filter(OutputRef::new(0, 3), "a")
            .unwrap();
        let min = both.minimal_filtering_plan(&q).unwrap();
        assert_eq!(
            min.filters().map(|(r, _)| r).collect::<Vec<_>>(),
            vec![OutputRef::new(0, 3)]
        );

        let not_wf = blue.without_filters();
        assert_eq!(
            not_wf.minimal_filtering_plan(&sang_query()),
            Err(Error::NotWellFiltering)
        );
    }

    #[test]
    fn minimal_filter_never_lands_on_unrelated_positions() {
        // first atom r(a, x) already answers; x2 must stay unfiltered
        let f = func("f", "r s", &[1, 2]);
        let plan = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        let q = AtomicQuery::new(sym("r"), "a");
        assert_eq!(plan.with_minimal_filter(&q), plan);
    }

    #[test]
    fn root_paths() {
        let f = func("f", "r s", &[1, 2]);
        let plan = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        assert_eq!(
            plan.root_path(OutputRef::new(0, 2)).unwrap(),
            "r s".parse().unwrap()
        );
        assert!(plan.root_path(OutputRef::new(0, 0)).is_err());
        assert!(plan.root_path(OutputRef::new(3, 1)).is_err());

        let blue = blue_plan();
        assert_eq!(
            blue.root_path(OutputRef::new(1, 1)).unwrap(),
            "onAlbum onAlbum-".parse().unwrap()
        );
    }

    #[test]
    fn two_call_path_transformation() {
        let (plan, q) = two_call_plan();
        assert_eq!(
            plan.full_path_transform(&q).unwrap(),
            "s t t- s- r u u- r-".parse().unwrap()
        );
        let pq = plan.path_transform(&q).unwrap();
        let shown: Vec<_> = pq.atoms().iter().map(|a| a.to_string()).collect();
        assert_eq!(
            shown,
            [
                "s(a, c0y1')",
                "t(c0y1', c0y2)",
                "t-(c0y2, c0y1)",
                "s-(c0y1, c1y1)",
                "r(c1y1, c1y2')",
                "u(c1y2', c1y3)",
                "u-(c1y3, c1y2)",
                "r-(c1y2, a)",
            ]
        );
        assert_eq!(pq.output(), "c1y2");
    }

    #[test]
    fn single_call_path_transformation() {
        let f = func("f", "r", &[1]);
        let plan = ExecutionPlan::chain("a", &[(f, 1)]).unwrap();
        let q = AtomicQuery::new(sym("r"), "a");
        assert_eq!(
            plan.full_path_transform(&q).unwrap(),
            "r r-".parse().unwrap()
        );
    }

    #[test]
    fn blue_plan_path_transformation() {
        // the filter produces sang-(Jailhouse, m) = r(a, x), so r- = sang is appended
        let w = blue_plan().full_path_transform(&sang_query()).unwrap();
        assert_eq!(w, "onAlbum onAlbum- sang- sang".parse().unwrap());
        assert_eq!(w.last(), Some(&sym("sang")));
    }

    #[test]
    fn backward_case_rebinds_final_variable() {
        // f(x0; x1, x2) <- s(x0,x1), r-(x1,x2): output x1, filter x2 gives r-(x, a)
        let f = func("f", "s r-", &[1, 2]);
        let q = AtomicQuery::new(sym("r"), "a");
        let plan = ExecutionPlan::chain("a", &[(f, 1)])
            .unwrap()
            .with_minimal_filter(&q);
        assert_eq!(plan.filter_count(), 1);
        let pq = plan.path_transform(&q).unwrap();
        assert_eq!(pq.skeleton(), "s r- r".parse().unwrap());
        let last = pq.atoms().last().unwrap();
        assert!(last.subject.is_const("a"));
        assert!(last.object.is_var(pq.output()));
    }

    #[test]
    fn path_transform_requires_minimal_filtering() {
        let (plan, q) = two_call_plan();
        let extra = plan.with_filter(OutputRef::new(0, 1), "a");
        // x1 of f1 is wired, so filtering it is structurally invalid
        assert!(extra.is_err());
        let unfiltered = plan.without_filters();
        assert_eq!(
            unfiltered.full_path_transform(&q),
            Err(Error::NotWellFiltering)
        );
    }

    #[test]
    fn minimal_filtering_path_queries() {
        let q = sang_query();
        let w: Word = "onAlbum onAlbum- sang-".parse().unwrap();
        let pq = minimal_filtering_path_query(&w, &q).unwrap();
        assert_eq!(
            pq.to_string(),
            "q(y3) <- onAlbum(Jailhouse, y1), onAlbum-(y1, Jailhouse), sang-(Jailhouse, y3)"
        );
        let w: Word = "onAlbum onAlbum- sang- sang".parse().unwrap();
        let pq = minimal_filtering_path_query(&w, &q).unwrap();
        assert_eq!(pq.output(), "y3");
        assert!(pq.atoms()[3].object.is_const("Jailhouse"));
        assert!(minimal_filtering_path_query(&"onAlbum".parse().unwrap(), &q).is_err());
    }

    #[test]
    fn segments_have_expected_lengths() {
        let f = func("f", "a b c", &[1, 2, 3]);
        for i in 0..=3 {
            let w = forward_backward_segment(&f, i);
            assert_eq!(w.len(), if i == 3 { 3 } else { 3 + (3 - i) });
        }
    }

    #[test]
    fn display_forms() {
        assert_eq!(
            blue_plan().to_string(),
            "getAlbum(Jailhouse; y1), getAlbumDetails(y1; Jailhouse, x)"
        );
        let (_, details, _) = music();
        assert_eq!(
            details.to_string(),
            "getAlbumDetails(x0; x1, x2) <- onAlbum-(x0, x1), sang-(x1, x2)"
        );
    }
}
