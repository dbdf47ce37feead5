//! Public-suffix list parsing and lookup.
//!
//! Reads the standard `public_suffix_list.dat` text format (one rule per
//! line, `//` comments, `*.` wildcards and `!` exceptions). A snapshot of the
//! list ships with the crate and is used by [`SuffixList::bundled`].

use std::collections::HashSet;
use std::sync::OnceLock;

const BUNDLED: &str = include_str!("../data/public_suffix_list.dat");

#[derive(Debug, Default)]
pub struct SuffixList {
    exact: HashSet<String>,
    wildcard: HashSet<String>,
    exception: HashSet<String>,
}

/// Outcome of a suffix lookup on a lowercase ASCII hostname.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuffixMatch<'a> {
    pub suffix: &'a str,
    /// False when no rule matched and the implicit `*` rule was applied.
    pub listed: bool,
}

fn to_ascii(rule: &str) -> Option<String> {
    if rule.is_ascii() {
        Some(rule.to_ascii_lowercase())
    } else {
        idna::domain_to_ascii(rule).ok()
    }
}

impl SuffixList {
    pub fn parse(text: &str) -> Self {
        let mut list = SuffixList::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            if let Some(rest) = rule.strip_prefix('!') {
                if let Some(r) = to_ascii(rest) {
                    list.exception.insert(r);
                }
            } else if let Some(rest) = rule.strip_prefix("*.") {
                if let Some(r) = to_ascii(rest) {
                    list.wildcard.insert(r);
                }
            } else if let Some(r) = to_ascii(rule) {
                list.exact.insert(r);
            }
        }
        list
    }

    pub fn bundled() -> &'static SuffixList {
        static LIST: OnceLock<SuffixList> = OnceLock::new();
        LIST.get_or_init(|| SuffixList::parse(BUNDLED))
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.wildcard.len() + self.exception.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True if `suffix` is itself a public suffix under some rule.
    pub fn is_suffix(&self, suffix: &str) -> bool {
        if self.exception.contains(suffix) {
            return false;
        }
        if self.exact.contains(suffix) {
            return true;
        }
        suffix
            .split_once('.')
            .is_some_and(|(_, parent)| self.wildcard.contains(parent))
    }

    /// Longest matching public suffix of `host` (lowercase, punycode).
    pub fn public_suffix<'a>(&self, host: &'a str) -> SuffixMatch<'a> {
        let host = host.trim_end_matches('.');
        // Candidate suffixes from longest to shortest.
        let mut starts = vec![0usize];
        starts.extend(host.match_indices('.').map(|(i, _)| i + 1));

        for (idx, &start) in starts.iter().enumerate() {
            let candidate = &host[start..];
            if self.exception.contains(candidate) {
                // The exception's parent is the suffix.
                let parent_start = starts.get(idx + 1).copied().unwrap_or(host.len());
                return SuffixMatch {
                    suffix: &host[parent_start..],
                    listed: true,
                };
            }
            if self.exact.contains(candidate) {
                return SuffixMatch {
                    suffix: candidate,
                    listed: true,
                };
            }
            if let Some((_, parent)) = candidate.split_once('.') {
                if self.wildcard.contains(parent) {
                    return SuffixMatch {
                        suffix: candidate,
                        listed: true,
                    };
                }
            }
        }
        let last = starts.last().copied().unwrap_or(0);
        SuffixMatch {
            suffix: &host[last..],
            listed: false,
        }
    }
}
