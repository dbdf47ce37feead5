use serde_json::{json, Value};
use thiserror::Error;

use crate::model::{Brand, BrandVerdict};

/// Spellings of "no brand" used by the prompt.
const NO_BRAND_SENTINELS: [&str; 2] = ["no brand found", "no brand name"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed model output: {0}")]
pub struct MalformedOutput(pub String);

pub fn is_no_brand_sentinel(s: &str) -> bool {
    let s = s.trim();
    NO_BRAND_SENTINELS.iter().any(|n| s.eq_ignore_ascii_case(n))
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    // drop the info string (```json)
    let body = match rest.find('\n') {
        Some(i) => &rest[i + 1..],
        None => rest,
    };
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Parses the agent's final JSON answer. `rounds_used` is left at zero for
/// the caller to fill in.
pub fn parse_verdict(text: &str) -> Result<BrandVerdict, MalformedOutput> {
    let body = strip_fences(text);
    let value: Value =
        serde_json::from_str(body).map_err(|e| MalformedOutput(format!("not json: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| MalformedOutput("expected a json object".into()))?;
    let field = |k: &str| -> Result<&str, MalformedOutput> {
        match obj.get(k) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(MalformedOutput(format!("{k} is not a string"))),
            None => Err(MalformedOutput(format!("missing key {k}"))),
        }
    };
    let brand_name = field("brand_name")?;
    let reason = field("reason")?;
    let brand = if is_no_brand_sentinel(brand_name) {
        Brand::NoBrand
    } else {
        Brand::named(brand_name)
    };
    Ok(BrandVerdict::new(brand, reason, 0))
}

/// Inverse of [`parse_verdict`] for well-formed verdicts.
pub fn render_verdict(v: &BrandVerdict) -> String {
    let name = match &v.brand {
        Brand::Named(n) => n.as_str(),
        Brand::NoBrand => "no brand name",
    };
    json!({"brand_name": name, "reason": v.reason}).to_string()
}
