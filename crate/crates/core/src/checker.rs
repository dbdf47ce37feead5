//! Domain checker: a named brand is searched for, and the page is benign
//! only if its registrable domain is among the brand's top result domains.

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_one_shot, AgentError, ModelGateway};
use crate::clients::{ClientError, RedirectResolver, SearchClient, MAX_RESULTS};
use crate::condense::{condense, TokenBudget};
use crate::domain::{build_domain_list, registrable_domain, DomainError, DomainList, RegistrableDomain};
use crate::model::{Basis, Brand, BrandVerdict, Classification, WebSample};

pub const LIST_SIZES: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("list size must be one of 1, 5 or 10, got {0}")]
pub struct InvalidListSize(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CheckerConfigRepr")]
pub struct CheckerConfig {
    list_size: usize,
    pub redirection_check: bool,
}

#[derive(Deserialize)]
struct CheckerConfigRepr {
    list_size: usize,
    #[serde(default)]
    redirection_check: bool,
}

impl TryFrom<CheckerConfigRepr> for CheckerConfig {
    type Error = InvalidListSize;
    fn try_from(r: CheckerConfigRepr) -> Result<Self, Self::Error> {
        Ok(Self::new(r.list_size)?.with_redirection_check(r.redirection_check))
    }
}

impl Default for CheckerConfig {
    fn default() -> Self {
        Self {
            list_size: 10,
            redirection_check: false,
        }
    }
}

impl CheckerConfig {
    pub fn new(list_size: usize) -> Result<Self, InvalidListSize> {
        if !LIST_SIZES.contains(&list_size) {
            return Err(InvalidListSize(list_size));
        }
        Ok(Self {
            list_size,
            redirection_check: false,
        })
    }

    pub fn with_redirection_check(mut self, on: bool) -> Self {
        self.redirection_check = on;
        self
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("search unavailable: {0}")]
    SearchUnavailable(ClientError),
    #[error("redirect lookup failed: {0}")]
    Redirect(ClientError),
}

/// Everything the checker looked at, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub classification: Classification,
    /// The quoted search query, absent for `NoBrand`.
    pub query: Option<String>,
    pub domains_checked: DomainList,
    /// The sample's own registrable domain, if it has one.
    pub sample_domain: Option<RegistrableDomain>,
    /// Final URL after redirects, when the redirection check ran.
    pub redirected_to: Option<String>,
}

impl CheckOutcome {
    fn no_brand() -> Self {
        Self {
            classification: Classification::from_basis(Basis::NoBrandDefault),
            query: None,
            domains_checked: DomainList::default(),
            sample_domain: None,
            redirected_to: None,
        }
    }
}

pub fn brand_query(brand: &str) -> String {
    format!("\"{brand}\"")
}

fn own_domain(url: &url::Url) -> Option<RegistrableDomain> {
    match registrable_domain(url) {
        Ok(d) => Some(d),
        Err(DomainError::IpHost(ip)) => {
            debug!("sample host {ip} is an ip literal; it cannot match");
            None
        }
        Err(e) => {
            debug!("sample url {url} has no registrable domain: {e}");
            None
        }
    }
}

/// Classifies a sample given the agent's brand verdict. Issues at most one
/// search, plus one redirect lookup when enabled and the first test misses.
pub fn classify(
    sample: &WebSample,
    verdict: &BrandVerdict,
    cfg: &CheckerConfig,
    search: &dyn SearchClient,
    redirects: Option<&dyn RedirectResolver>,
) -> Result<CheckOutcome, CheckError> {
    let Brand::Named(name) = &verdict.brand else {
        return Ok(CheckOutcome::no_brand());
    };
    let query = brand_query(name);
    let results = search
        .web_search(&query, MAX_RESULTS)
        .map_err(CheckError::SearchUnavailable)?;
    let domains = build_domain_list(results.iter().map(|r| r.display_link.as_str()), cfg.list_size);
    let sample_domain = own_domain(&sample.url);
    let hit = |d: &Option<RegistrableDomain>| d.as_ref().is_some_and(|d| domains.contains_match(d));

    let mut basis = if hit(&sample_domain) {
        Basis::DomainMatch
    } else {
        Basis::DomainMismatch
    };
    let mut redirected_to = None;
    if basis == Basis::DomainMismatch && cfg.redirection_check {
        if let Some(resolver) = redirects {
            match resolver.resolve_redirect(&sample.url) {
                Ok(final_url) => {
                    if hit(&own_domain(&final_url)) {
                        basis = Basis::DomainMatch;
                    }
                    redirected_to = Some(final_url.to_string());
                }
                Err(e) if e.is_cassette_miss() => return Err(CheckError::Redirect(e)),
                Err(e) => debug!("redirect lookup for {} failed, keeping mismatch: {e}", sample.url),
            }
        }
    }
    Ok(CheckOutcome {
        classification: Classification::from_basis(basis),
        query: Some(query),
        domains_checked: domains,
        sample_domain,
        redirected_to,
    })
}

/// Baseline brand guess from condensed HTML alone, one prompt, no tools.
pub fn one_shot_brand(
    sample: &WebSample,
    gateway: &dyn ModelGateway,
    budget: TokenBudget,
) -> Result<BrandVerdict, AgentError> {
    let page = condense(&sample.html, budget);
    run_one_shot(&page, gateway).map(|(v, _)| v)
}
