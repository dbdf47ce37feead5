//! Reference-based phishing detection.
//!
//! A page is condensed into brand evidence, a budget-limited tool-calling
//! agent names the brand it imitates, and the domain checker compares the
//! page's registrable domain with the brand's official domains found by
//! search.

pub mod agent;
pub mod checker;
pub mod clients;
pub mod condense;
pub mod domain;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod psl;
pub mod similarity;

pub use checker::{classify, CheckOutcome, CheckerConfig};
pub use condense::{condense, estimate_tokens, CondensedPage, TokenBudget};
pub use domain::{build_domain_list, domains_match, registrable_domain, DomainList, RegistrableDomain};
pub use model::{
    validate_sample, Basis, Brand, BrandVerdict, Classification, ConfusionCounts, GroundTruth, Label,
    RawSample, Verdict, WebSample, TOOL_BUDGET,
};
pub use pipeline::{analyze, BrandMode, PipelineConfig, PipelineOutput};
