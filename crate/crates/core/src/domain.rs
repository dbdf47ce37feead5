//! Registrable-domain extraction and the domain matching rule.
//!
//! Two domains match when both their public suffix and the label directly
//! below it are equal (eTLD+1 equality): `shop.nike.com` matches `nike.com`,
//! `nike.evil.com` does not.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::{Host, Url};

use crate::psl::SuffixList;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("url {0:?} does not parse")]
    Unparseable(String),
    #[error("url has no host")]
    NoHost,
    #[error("host {0} is an ip literal")]
    IpHost(String),
    #[error("host {host} is itself a public suffix")]
    NotRegistrable { host: String },
    /// No suffix rule matched; `fallback` uses the last label as suffix.
    #[error("no public suffix matches {}", fallback)]
    UnknownSuffix { fallback: RegistrableDomain },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegistrableDomain {
    sld: String,
    suffix: String,
}

impl RegistrableDomain {
    /// Builds a domain from parts, lowercasing both. Returns `None` if the
    /// label is empty or contains dots, or the suffix is not listed.
    pub fn new(sld: &str, suffix: &str) -> Option<Self> {
        let sld = sld.to_ascii_lowercase();
        let suffix = suffix.to_ascii_lowercase();
        if sld.is_empty() || sld.contains('.') || !SuffixList::bundled().is_suffix(&suffix) {
            return None;
        }
        Some(Self { sld, suffix })
    }

    pub fn sld(&self) -> &str {
        &self.sld
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }
}

impl fmt::Display for RegistrableDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.sld, self.suffix)
    }
}

pub fn registrable_domain(url: &Url) -> Result<RegistrableDomain, DomainError> {
    registrable_domain_with(url, SuffixList::bundled())
}

pub fn registrable_domain_with(url: &Url, list: &SuffixList) -> Result<RegistrableDomain, DomainError> {
    match url.host() {
        None => Err(DomainError::NoHost),
        Some(Host::Ipv4(ip)) => Err(DomainError::IpHost(ip.to_string())),
        Some(Host::Ipv6(ip)) => Err(DomainError::IpHost(ip.to_string())),
        Some(Host::Domain(d)) => domain_of_host(d, list),
    }
}

/// Accepts either an absolute URL or a bare host (search APIs return
/// display links such as `www.nike.com`).
pub fn registrable_domain_of_link(link: &str) -> Result<RegistrableDomain, DomainError> {
    let link = link.trim();
    let parsed = if link.contains("://") {
        Url::parse(link)
    } else {
        Url::parse(&format!("http://{link}"))
    };
    let url = parsed.map_err(|_| DomainError::Unparseable(link.to_string()))?;
    registrable_domain(&url)
}

fn domain_of_host(host: &str, list: &SuffixList) -> Result<RegistrableDomain, DomainError> {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.is_empty() {
        return Err(DomainError::NoHost);
    }
    let host = match host.strip_prefix("www.") {
        // keep "www" when it is the registrable label (www.gov.uk, www.ck)
        Some(rest) if list.public_suffix(rest).suffix.len() < rest.len() => rest.to_string(),
        _ => host,
    };
    let m = list.public_suffix(&host);
    if m.suffix.len() >= host.len() {
        return Err(DomainError::NotRegistrable { host: host.clone() });
    }
    let head = &host[..host.len() - m.suffix.len() - 1];
    let sld = head.rsplit('.').next().unwrap_or(head);
    if sld.is_empty() {
        return Err(DomainError::NotRegistrable { host: host.clone() });
    }
    let domain = RegistrableDomain {
        sld: sld.to_string(),
        suffix: m.suffix.to_string(),
    };
    if m.listed {
        Ok(domain)
    } else {
        Err(DomainError::UnknownSuffix { fallback: domain })
    }
}

/// eTLD+1 equality.
pub fn domains_match(a: &RegistrableDomain, b: &RegistrableDomain) -> bool {
    a.sld.eq_ignore_ascii_case(&b.sld) && a.suffix.eq_ignore_ascii_case(&b.suffix)
}

/// Ordered, deduplicated official-domain candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainList {
    entries: Vec<RegistrableDomain>,
}

impl DomainList {
    pub fn entries(&self) -> &[RegistrableDomain] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_match(&self, d: &RegistrableDomain) -> bool {
        self.entries.iter().any(|e| domains_match(e, d))
    }
}

/// Maps display links to registrable domains, skipping IP hosts and
/// unparseable or unlisted links, deduplicating in rank order and keeping
/// at most `limit` entries.
pub fn build_domain_list<'a, I>(display_links: I, limit: usize) -> DomainList
where
    I: IntoIterator<Item = &'a str>,
{
    let mut entries: Vec<RegistrableDomain> = Vec::new();
    for link in display_links {
        if entries.len() >= limit {
            break;
        }
        let Ok(d) = registrable_domain_of_link(link) else {
            continue;
        };
        if !entries.iter().any(|e| domains_match(e, &d)) {
            entries.push(d);
        }
    }
    DomainList { entries }
}
