use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pathplan::bench::{self, GeneratorParams, Sweep, SweepParam};
use pathplan::chase::chase_query;
use pathplan::instance::{parse_plan, parse_problem, plan_to_json};
use pathplan::plan_language::build_plan_regex;
use pathplan::rewriter::{RewriteOptions, Rewriter, RewritingProblem};
use pathplan::verifier::verify_with;

/// Equivalent rewritings of atomic queries with path-shaped access methods.
#[derive(Parser)]
#[command(name = "pathplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the query has an equivalent rewriting.
    Rewrite {
        instance: PathBuf,
        /// Also print equivalent plans, one JSON document per line.
        #[arg(long)]
        enumerate: bool,
        #[arg(long, default_value_t = 10)]
        max_plans: usize,
        /// Longest word searched; defaults to eight times the longest body.
        #[arg(long)]
        max_word_length: Option<usize>,
        #[arg(long, default_value_t = 3)]
        max_extra_filters: usize,
    },
    /// Check whether a plan is an equivalent rewriting.
    Verify { instance: PathBuf, plan: PathBuf },
    /// Print the forward-backward grammar of the query.
    Grammar { instance: PathBuf },
    /// Print the plan language: segments, expression and short words.
    Planlang {
        instance: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_length: usize,
    },
    /// Print the chase of the query fact, one fact per line.
    Chase {
        instance: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Answered-query rate over random instances, as CSV.
    Bench {
        #[arg(long, default_value = "relations")]
        sweep: String,
        /// Comma-separated sweep points; defaults depend on the parameter.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 7)]
        relations: usize,
        #[arg(long, default_value_t = 15)]
        functions: usize,
        #[arg(long, default_value_t = 0.2)]
        p_exist: f64,
        #[arg(long, default_value_t = 4)]
        max_body: usize,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also ask the inverse query of every relation.
        #[arg(long)]
        inverse_queries: bool,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write generator settings as JSON here.
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
}

/// A command's outcome: a decision, or success without one.
enum Outcome {
    Positive,
    Negative,
}

fn load(path: &Path) -> Result<RewritingProblem> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_problem(&text).with_context(|| format!("invalid instance {}", path.display()))
}

fn run(command: Command) -> Result<Outcome> {
    let mut out = io::stdout().lock();
    match command {
        Command::Rewrite {
            instance,
            enumerate,
            max_plans,
            max_word_length,
            max_extra_filters,
        } => {
            let rw = Rewriter::new(load(&instance)?)?;
            if !rw.exists_rewriting() {
                writeln!(out, "NONE")?;
                return Ok(Outcome::Negative);
            }
            writeln!(out, "EXISTS")?;
            if enumerate {
                let options = RewriteOptions {
                    max_word_length,
                    max_plans,
                    max_filter_subset: max_extra_filters,
                };
                for plan in rw.enumerate_rewritings(&options) {
                    writeln!(out, "{}", plan_to_json(&plan))?;
                }
            }
            Ok(Outcome::Positive)
        }
        Command::Verify { instance, plan } => {
            let problem = load(&instance)?;
            let text = fs::read_to_string(&plan)
                .with_context(|| format!("cannot read {}", plan.display()))?;
            let plan = parse_plan(&text, &problem)
                .with_context(|| format!("invalid plan {}", plan.display()))?;
            let rw = Rewriter::new(problem)?;
            let v = verify_with(&rw, &plan)?;
            writeln!(out, "{}", v.verdict)?;
            if v.extracted {
                writeln!(out, "checked: {}", v.checked)?;
            }
            if let Some(w) = &v.word {
                writeln!(out, "word: {w}")?;
            }
            Ok(if v.verdict.is_equivalent() {
                Outcome::Positive
            } else {
                Outcome::Negative
            })
        }
        Command::Grammar { instance } => {
            let rw = Rewriter::new(load(&instance)?)?;
            write!(out, "{}", rw.grammar())?;
            Ok(Outcome::Positive)
        }
        Command::Planlang {
            instance,
            max_length,
        } => {
            let rw = Rewriter::new(load(&instance)?)?;
            for s in rw.segments() {
                writeln!(out, "{s}")?;
            }
            writeln!(out, "expression: {}", build_plan_regex(rw.segments()))?;
            let alphabet = rw.problem().alphabet.symbols();
            for w in rw.plan_automaton().words_up_to(alphabet, max_length) {
                writeln!(out, "word: {w}")?;
            }
            Ok(Outcome::Positive)
        }
        Command::Chase { instance, depth } => {
            let problem = load(&instance)?;
            let inst = chase_query(&problem.query, &problem.uids, depth);
            for (r, s, o) in inst.facts() {
                writeln!(out, "{r}({s},{o})")?;
            }
            Ok(Outcome::Positive)
        }
        Command::Bench {
            sweep,
            values,
            relations,
            functions,
            p_exist,
            max_body,
            instances,
            seed,
            inverse_queries,
            output,
            metadata,
        } => {
            let param: SweepParam = sweep.parse()?;
            let base = GeneratorParams {
                relations,
                functions,
                p_existential: p_exist,
                max_body,
            };
            base.validate()?;
            if instances == 0 {
                bail!("--instances must be positive");
            }
            let values = values.unwrap_or_else(|| param.default_values());
            for &v in &values {
                let ok = match param {
                    SweepParam::P => (0.0..=1.0).contains(&v),
                    _ => v >= 1.0 && v.fract() == 0.0,
                };
                if !ok {
                    bail!("invalid {} value {v}", param.name());
                }
            }
            let sweep = Sweep {
                param,
                values,
                base,
                instances,
                seed,
                inverse_queries,
            };
            let rows = bench::run_experiment(&sweep)?;
            match output {
                Some(path) => bench::write_csv(&rows, fs::File::create(&path)?)?,
                None => bench::write_csv(&rows, &mut out)?,
            }
            if let Some(path) = metadata {
                fs::write(
                    &path,
                    serde_json::to_string_pretty(&bench::metadata(&sweep))?,
                )?;
            }
            Ok(Outcome::Positive)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Positive) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
