//! JSON documents for problems and plans.
//!
//! A problem:
//!
//! ```json
//! {"relations": ["onAlbum", "sang", "relAlbum"],
//!  "functions": [{"name": "getAlbumDetails", "path": ["onAlbum-", "sang-"], "outputs": [1, 2]}],
//!  "uids": [["sang-", "onAlbum"]],
//!  "derive_uids": true,
//!  "query": {"relation": "sang-", "constant": "Jailhouse"}}
//! ```
//!
//! A plan refers to functions by name; an input is `"CONST"` or a
//! `[call, position]` pair with 0-based calls and 1-based positions:
//!
//! ```json
//! {"calls": [{"function": "getAlbum", "input": "CONST"},
//!            {"function": "getAlbumDetails", "input": [0, 1], "filters": {"1": "Jailhouse"}}],
//!  "output": [1, 2]}
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{CallInput, ExecutionPlan, FunctionCall, OutputRef, PathFunction};
use crate::rewriter::RewritingProblem;
use crate::schema::{
    close_uids, derive_uids_from_functions, Alphabet, AtomicQuery, RelationSymbol,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDoc {
    pub name: String,
    pub path: Vec<String>,
    pub outputs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDoc {
    pub relation: String,
    pub constant: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub relations: Vec<String>,
    pub functions: Vec<FunctionDoc>,
    #[serde(default)]
    pub uids: Vec<(String, String)>,
    #[serde(default)]
    pub derive_uids: bool,
    pub query: QueryDoc,
}

fn symbol(s: &str) -> Result<RelationSymbol> {
    s.parse()
}

impl ProblemDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Builds the problem; declared dependencies are merged with the
    /// derived ones when `derive_uids` is set, then closed.
    pub fn to_problem(&self) -> Result<RewritingProblem> {
        let alphabet = Alphabet::from_relations(&self.relations)?;
        let mut functions = Vec::with_capacity(self.functions.len());
        for f in &self.functions {
            let body = f
                .path
                .iter()
                .map(|s| symbol(s))
                .collect::<Result<Vec<_>>>()?;
            functions.push(PathFunction::new(&f.name, body, f.outputs.clone())?);
        }
        let mut declared = self
            .uids
            .iter()
            .map(|(a, b)| Ok((symbol(a)?, symbol(b)?)))
            .collect::<Result<std::collections::BTreeSet<_>>>()?;
        if self.derive_uids {
            declared.extend(derive_uids_from_functions(&functions));
        }
        let uids = close_uids(&declared, &alphabet)?;
        let query = AtomicQuery::new(symbol(&self.query.relation)?, &self.query.constant);
        RewritingProblem::new(alphabet, functions, uids, query)
    }

    /// The document of a problem, listing its closed dependencies.
    pub fn from_problem(problem: &RewritingProblem) -> Self {
        ProblemDoc {
            relations: problem
                .alphabet
                .relations()
                .map(|r| r.to_string())
                .collect(),
            functions: problem
                .functions
                .iter()
                .map(|f| FunctionDoc {
                    name: f.name().to_string(),
                    path: f.body().iter().map(|s| s.to_string()).collect(),
                    outputs: f.outputs().to_vec(),
                })
                .collect(),
            uids: problem
                .uids
                .iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            derive_uids: false,
            query: QueryDoc {
                relation: problem.query.relation.to_string(),
                constant: problem.query.constant.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputDoc {
    Constant(String),
    Output(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallDoc {
    pub function: String,
    pub input: InputDoc,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub filters: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    /// Defaults to the query constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<String>,
    pub calls: Vec<CallDoc>,
    pub output: (usize, usize),
}

impl PlanDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn to_plan(&self, problem: &RewritingProblem) -> Result<ExecutionPlan> {
        let mut calls = Vec::with_capacity(self.calls.len());
        for c in &self.calls {
            let function = Arc::clone(problem.function(&c.function)?);
            let input = match &c.input {
                InputDoc::Constant(s) if s == "CONST" => CallInput::Constant,
                InputDoc::Constant(s) => {
                    return Err(Error::Parse(format!(
                        "call input must be \"CONST\" or [call, position], got `{s}`"
                    )))
                }
                InputDoc::Output(i, p) => CallInput::Output(OutputRef::new(*i, *p)),
            };
            let mut call = FunctionCall::new(function, input);
            for (pos, constant) in &c.filters {
                let pos = pos.parse().map_err(|_| {
                    Error::Parse(format!("filter position `{pos}` is not a number"))
                })?;
                call = call.with_filter(pos, constant);
            }
            calls.push(call);
        }
        let constant = self
            .constant
            .clone()
            .unwrap_or_else(|| problem.query.constant.clone());
        ExecutionPlan::new(
            constant,
            calls,
            OutputRef::new(self.output.0, self.output.1),
        )
    }

    pub fn from_plan(plan: &ExecutionPlan) -> Self {
        PlanDoc {
            constant: Some(plan.constant().to_string()),
            calls: plan
                .calls()
                .iter()
                .map(|c| CallDoc {
                    function: c.function.name().to_string(),
                    input: match c.input {
                        CallInput::Constant => InputDoc::Constant("CONST".into()),
                        CallInput::Output(r) => InputDoc::Output(r.call, r.position),
                    },
                    filters: c
                        .filters
                        .iter()
                        .map(|(p, v)| (p.to_string(), v.clone()))
                        .collect(),
                })
                .collect(),
            output: (plan.output().call, plan.output().position),
        }
    }
}

pub fn parse_problem(text: &str) -> Result<RewritingProblem> {
    ProblemDoc::parse(text)?.to_problem()
}

pub fn parse_plan(text: &str, problem: &RewritingProblem) -> Result<ExecutionPlan> {
    PlanDoc::parse(text)?.to_plan(problem)
}

pub fn plan_to_json(plan: &ExecutionPlan) -> String {
    PlanDoc::from_plan(plan).to_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MUSIC: &str = r#"{
        "relations": ["onAlbum", "sang", "relAlbum"],
        "functions": [
            {"name": "getAlbum", "path": ["onAlbum"], "outputs": [1]},
            {"name": "getAlbumDetails", "path": ["onAlbum-", "sang-"], "outputs": [1, 2]},
            {"name": "getRelAlbum", "path": ["relAlbum"], "outputs": [1]}
        ],
        "uids": [["sang-", "onAlbum"]],
        "derive_uids": true,
        "query": {"relation": "sang-", "constant": "Jailhouse"}
    }"#;

    const BLUE: &str = r#"{"calls": [
        {"function": "getAlbum", "input": "CONST"},
        {"function": "getAlbumDetails", "input": [0, 1], "filters": {"1": "Jailhouse"}}],
        "output": [1, 2]}"#;

    #[test]
    fn parse_music() {
        let p = parse_problem(MUSIC).unwrap();
        assert_eq!(p.functions.len(), 3);
        assert!(p
            .uids
            .contains(&"sang-".parse().unwrap(), &"onAlbum".parse().unwrap()));
        // derived from getAlbumDetails
        assert!(p
            .uids
            .contains(&"onAlbum".parse().unwrap(), &"sang-".parse().unwrap()));
        let plan = parse_plan(BLUE, &p).unwrap();
        assert_eq!(
            plan.to_string(),
            "getAlbum(Jailhouse; y1), getAlbumDetails(y1; Jailhouse, x)"
        );
    }

    #[test]
    fn round_trips() {
        let p = parse_problem(MUSIC).unwrap();
        let doc = ProblemDoc::from_problem(&p);
        let again = parse_problem(&doc.to_json()).unwrap();
        assert_eq!(again.uids, p.uids);
        assert_eq!(again.functions, p.functions);
        assert_eq!(again.query, p.query);
        let plan = parse_plan(BLUE, &p).unwrap();
        let json = plan_to_json(&plan);
        assert_eq!(parse_plan(&json, &p).unwrap(), plan);
        assert_eq!(PlanDoc::parse(&json).unwrap(), PlanDoc::from_plan(&plan));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_problem("{\"relations\": ["),
            Err(Error::Parse(_))
        ));
        let bad = MUSIC.replace("\"sang-\", \"onAlbum\"", "\"sung\", \"onAlbum\"");
        assert!(matches!(
            parse_problem(&bad),
            Err(Error::UnknownRelation(_))
        ));
        let p = parse_problem(MUSIC).unwrap();
        let unknown = BLUE.replace("getAlbum\"", "getSong\"");
        assert!(matches!(
            parse_plan(&unknown, &p),
            Err(Error::UnknownFunction(_))
        ));
        let dangling = BLUE.replace("[0, 1]", "[5, 1]");
        assert!(parse_plan(&dangling, &p).is_err());
        let input = BLUE.replace("\"CONST\"", "\"a\"");
        assert!(matches!(parse_plan(&input, &p), Err(Error::Parse(_))));
    }
}
