//! Checking whether a given plan is an equivalent rewriting.

use std::fmt;

use crate::error::{Error, Result};
use crate::plan::{ExecutionPlan, Word};
use crate::rewriter::{Rewriter, RewritingProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    NotWellFiltering,
    FilterNotDerivable,
    WordNotInLq,
}

impl Reason {
    pub fn code(self) -> &'static str {
        match self {
            Reason::NotWellFiltering => "NOT_WELL_FILTERING",
            Reason::FilterNotDerivable => "FILTER_NOT_DERIVABLE",
            Reason::WordNotInLq => "WORD_NOT_IN_LQ",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Equivalent,
    NotEquivalent(Reason),
}

impl Verdict {
    pub fn code(self) -> &'static str {
        match self {
            Verdict::Equivalent => "EQUIVALENT",
            Verdict::NotEquivalent(r) => r.code(),
        }
    }

    pub fn is_equivalent(self) -> bool {
        self == Verdict::Equivalent
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    pub verdict: Verdict,
    /// The plan actually checked: the input, or its non-redundant core.
    pub checked: ExecutionPlan,
    pub extracted: bool,
    /// Full path transformation of the minimal filtering plan, when reached.
    pub word: Option<Word>,
}

/// Decides equivalence in three steps: well-filtering, filters whose root
/// paths are forced loops, and membership of the minimal filtering plan's
/// word in the forward-backward language. Redundant plans are reduced to
/// their chain first.
pub fn verify_with(rewriter: &Rewriter, plan: &ExecutionPlan) -> Result<Verification> {
    let problem = rewriter.problem();
    for call in plan.calls() {
        let known = problem.function(call.function.name())?;
        if **known != *call.function {
            return Err(Error::UnknownFunction(call.function.name().to_string()));
        }
    }
    let query = &problem.query;
    let stop = |checked: &ExecutionPlan, extracted, reason, word| Verification {
        verdict: Verdict::NotEquivalent(reason),
        checked: checked.clone(),
        extracted,
        word,
    };
    if !plan.is_well_filtering(query) {
        return Ok(stop(plan, false, Reason::NotWellFiltering, None));
    }
    let (checked, extracted) = if plan.is_non_redundant() {
        (plan.clone(), false)
    } else {
        (plan.extract_nonredundant(query)?, true)
    };
    let checked = checked.sequenced()?;
    let min = checked.minimal_filtering_plan(query)?;
    if !rewriter.filters_preserve_equivalence(&checked)? {
        return Ok(stop(&checked, extracted, Reason::FilterNotDerivable, None));
    }
    let word = min.full_path_transform(query)?;
    let verdict = if rewriter.grammar().derives("S", &word)? {
        Verdict::Equivalent
    } else {
        Verdict::NotEquivalent(Reason::WordNotInLq)
    };
    Ok(Verification {
        verdict,
        checked,
        extracted,
        word: Some(word),
    })
}

pub fn verify_plan(plan: &ExecutionPlan, problem: &RewritingProblem) -> Result<Verification> {
    verify_with(&Rewriter::new(problem.clone())?, plan)
}
