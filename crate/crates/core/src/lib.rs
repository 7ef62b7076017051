//! Evaluation and inference harness for competitive-programming language
//! model agents.

pub mod agent;
pub mod config;
pub mod corpus;
pub mod experiments;
pub mod judge;
pub mod retrieval;
pub mod testsynth;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/judge.md")]
    mod judge {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/agent.md")]
    mod agent {}
    #[doc = include_str!("../../../book/src/test-synthesis.md")]
    mod test_synthesis {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
