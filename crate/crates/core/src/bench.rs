//! Random instances and the answered-query sweeps.
//!
//! Every random choice goes through [`SplitRng`], a SplitMix64 stream with
//! fixed conversions to integers and probabilities, so a `(parameters,
//! seed)` pair always produces the same instance on every platform.

use std::io::Write;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::plan::PathFunction;
use crate::rewriter::{Rewriter, RewritingProblem};
use crate::schema::{close_uids, derive_uids_from_functions, Alphabet, AtomicQuery, UidSet};

/// SplitMix64 with explicit conversions.
pub struct SplitRng(SplitMix64);

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        SplitRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// Seed of the `index`-th instance of a run; independent of the sweep point
/// so that all points see the same random stream.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    SplitRng::new(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorParams {
    pub relations: usize,
    pub functions: usize,
    pub p_existential: f64,
    pub max_body: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            relations: 7,
            functions: 15,
            p_existential: 0.2,
            max_body: 4,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.relations == 0 {
            return Err(Error::InvalidParameter(
                "at least one relation is required".into(),
            ));
        }
        if self.max_body == 0 {
            return Err(Error::InvalidParameter(
                "max body length must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_existential) {
            return Err(Error::InvalidParameter(
                "existential probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub alphabet: Alphabet,
    pub functions: Vec<PathFunction>,
    pub uids: UidSet,
}

impl GeneratedInstance {
    pub fn problem(&self, query: AtomicQuery) -> Result<RewritingProblem> {
        RewritingProblem::new(
            self.alphabet.clone(),
            self.functions.clone(),
            self.uids.clone(),
            query,
        )
    }
}

/// Relations `r1..rn`; function bodies of uniform length in
/// `1..=max_body` over all symbols, inverses included; each position is
/// existential with probability `p_existential`, and the last position is
/// made an output when none is left. Dependencies are those implied by the
/// bodies, closed.
pub fn generate_instance(params: &GeneratorParams, seed: u64) -> Result<GeneratedInstance> {
    params.validate()?;
    let mut rng = SplitRng::new(seed);
    let alphabet = Alphabet::from_relations((1..=params.relations).map(|i| format!("r{i}")))?;
    let symbols = alphabet.symbols();
    let mut functions = Vec::with_capacity(params.functions);
    for k in 1..=params.functions {
        let len = 1 + rng.below(params.max_body);
        let body: Vec<_> = (0..len)
            .map(|_| symbols[rng.below(symbols.len())].clone())
            .collect();
        let mut outputs: Vec<usize> = (1..=len)
            .filter(|_| !rng.chance(params.p_existential))
            .collect();
        if outputs.is_empty() {
            outputs.push(len);
        }
        functions.push(PathFunction::new(format!("f{k}"), body, outputs)?);
    }
    let uids = close_uids(&derive_uids_from_functions(&functions), &alphabet)?;
    Ok(GeneratedInstance {
        alphabet,
        functions,
        uids,
    })
}

/// Share of queries `r(c, x)` with an equivalent rewriting, over the
/// forward relations (and their inverses when asked).
pub fn answered_fraction(instance: &GeneratedInstance, inverse_queries: bool) -> f64 {
    let queries: Vec<_> = instance
        .alphabet
        .symbols()
        .iter()
        .filter(|s| inverse_queries || !s.is_inverted())
        .collect();
    if queries.is_empty() || instance.functions.is_empty() {
        return 0.0;
    }
    let answered = queries
        .iter()
        .filter(|r| {
            let problem = instance
                .problem(AtomicQuery::new((**r).clone(), "c"))
                .expect("generated symbols belong to the alphabet");
            Rewriter::new(problem).is_ok_and(|rw| rw.exists_rewriting())
        })
        .count();
    answered as f64 / queries.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Relations,
    Functions,
    P,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Relations => "relations",
            SweepParam::Functions => "functions",
            SweepParam::P => "p",
        }
    }

    /// Sweep points used when none are given.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::Relations => vec![5.0, 7.0, 9.0, 11.0, 13.0],
            SweepParam::Functions => vec![5.0, 10.0, 15.0, 20.0, 25.0],
            SweepParam::P => vec![0.0, 0.2, 0.4, 0.6, 0.8],
        }
    }

    fn apply(self, base: &GeneratorParams, value: f64) -> GeneratorParams {
        let mut p = *base;
        match self {
            SweepParam::Relations => p.relations = value as usize,
            SweepParam::Functions => p.functions = value as usize,
            SweepParam::P => p.p_existential = value,
        }
        p
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relations" => Ok(SweepParam::Relations),
            "functions" => Ok(SweepParam::Functions),
            "p" => Ok(SweepParam::P),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sweep parameter `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: GeneratorParams,
    pub instances: usize,
    pub seed: u64,
    pub inverse_queries: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub param: &'static str,
    pub value: f64,
    pub instances: usize,
    pub answered_fraction: f64,
}

/// Mean answered fraction per sweep point. Instances are evaluated in
/// parallel and averaged in index order.
pub fn run_experiment(sweep: &Sweep) -> Result<Vec<Row>> {
    if sweep.instances == 0 {
        return Err(Error::InvalidParameter(
            "at least one instance per point is required".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let params = sweep.param.apply(&sweep.base, value);
        params.validate()?;
        let fractions: Vec<f64> = (0..sweep.instances as u64)
            .into_par_iter()
            .map(|i| {
                let inst = generate_instance(&params, instance_seed(sweep.seed, i))?;
                Ok(answered_fraction(&inst, sweep.inverse_queries))
            })
            .collect::<Result<_>>()?;
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        rows.push(Row {
            param: sweep.param.name(),
            value,
            instances: sweep.instances,
            answered_fraction: mean,
        });
    }
    Ok(rows)
}

/// CSV with header `param,value,instances,answered_fraction`.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidParameter(format!("cannot write CSV: {e}"));
    w.write_record(["param", "value", "instances", "answered_fraction"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.param.to_string(),
            r.value.to_string(),
            r.instances.to_string(),
            format!("{:.6}", r.answered_fraction),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("cannot write CSV: {e}")))?;
    Ok(())
}

/// Generator settings recorded next to a CSV.
pub fn metadata(sweep: &Sweep) -> serde_json::Value {
    serde_json::json!({
        "sweep": sweep,
        "rng": "splitmix64",
        "body_length": format!("uniform in 1..={}", sweep.base.max_body),
        "body_symbols": "uniform over relations and their inverses",
        "outputs": "each position existential with probability p; last position forced to output if none",
        "dependencies": "closure of those implied by consecutive body atoms",
        "queries": if sweep.inverse_queries { "r(c, x) and r-(c, x)" } else { "r(c, x)" },
    })
}
