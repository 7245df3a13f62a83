pub mod bench;
pub mod chase;
pub mod error;
pub mod forward_backward;
pub mod instance;
pub mod lang;
pub mod plan;
pub mod plan_language;
pub mod rewriter;
pub mod schema;
pub mod verifier;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/schema.md")]
    mod schema {}
    #[doc = include_str!("../../../book/src/plans.md")]
    mod plans {}
    #[doc = include_str!("../../../book/src/grammar.md")]
    mod grammar {}
    #[doc = include_str!("../../../book/src/plan-language.md")]
    mod plan_language {}
    #[doc = include_str!("../../../book/src/rewriting.md")]
    mod rewriting {}
    #[doc = include_str!("../../../book/src/chase.md")]
    mod chase {}
    #[doc = include_str!("../../../book/src/bench.md")]
    mod bench {}
}
