//! HTML condensation.
//!
//! Reduces raw markup to the parts that carry brand or intent signal: the
//! document title, form inputs, button labels and the static text content.
//! The result is sized against a token budget using [`estimate_tokens`] over
//! the exact rendering that is later placed in the agent prompt.

use std::fmt::Write as _;

use scraper::{Html, Node};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default condenser budget, in estimated tokens.
pub const DEFAULT_TOKEN_BUDGET: usize = 3000;
pub const MIN_TOKEN_BUDGET: usize = 64;

/// Bytes per estimated token.
const BYTES_PER_TOKEN: usize = 4;

/// Fragments shorter than this after clipping are dropped instead.
const MIN_CLIPPED_FRAGMENT: usize = 8;

const SKIPPED_ELEMENTS: &[&str] = &["script", "style", "noscript", "template"];

/// Approximate subword token count: `ceil(byte_length / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(BYTES_PER_TOKEN)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("token budget {0} is below the minimum of {MIN_TOKEN_BUDGET}")]
pub struct BudgetTooSmall(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct TokenBudget(usize);

impl TryFrom<usize> for TokenBudget {
    type Error = BudgetTooSmall;
    fn try_from(n: usize) -> Result<Self, Self::Error> {
        Self::new(n)
    }
}

impl From<TokenBudget> for usize {
    fn from(b: TokenBudget) -> usize {
        b.0
    }
}

impl TokenBudget {
    pub fn new(tokens: usize) -> Result<Self, BudgetTooSmall> {
        if tokens < MIN_TOKEN_BUDGET {
            Err(BudgetTooSmall(tokens))
        } else {
            Ok(Self(tokens))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self(DEFAULT_TOKEN_BUDGET)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputField {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub placeholder: String,
    #[serde(rename = "type")]
    pub kind: String,
}

impl InputField {
    fn render(&self) -> String {
        let mut line = format!("input: type={}", self.kind);
        if !self.name.is_empty() {
            let _ = write!(line, " name={}", self.name);
        }
        if !self.placeholder.is_empty() {
            let _ = write!(line, " placeholder={}", self.placeholder);
        }
        line
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondensedPage {
    pub title: Option<String>,
    pub inputs: Vec<InputField>,
    pub buttons: Vec<String>,
    pub visible_text: Vec<String>,
    pub token_estimate: usize,
}

impl CondensedPage {
    fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.title
            .iter()
            .map(|t| title_line(t))
            .chain(self.inputs.iter().map(InputField::render))
            .chain(self.buttons.iter().map(|b| button_line(b)))
            .chain(self.visible_text.iter().map(|t| text_line(t)))
    }

    /// One element per line, newline-terminated. This is the text the token
    /// estimate is computed over.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.title.is_none()
            && self.inputs.is_empty()
            && self.buttons.is_empty()
            && self.visible_text.is_empty()
    }
}

fn title_line(t: &str) -> String {
    format!("title: {t}")
}

fn button_line(b: &str) -> String {
    format!("button: {b}")
}

fn text_line(t: &str) -> String {
    format!("text: {t}")
}

/// Rendered size of a line including its trailing newline.
fn line_cost(line: &str) -> usize {
    line.len() + 1
}

/// Collapse whitespace runs and neutralise anything that looks like a tag
/// opener, so no fragment can be mistaken for markup.
fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    if !out.contains('<') {
        return out;
    }
    let mut cleaned = String::with_capacity(out.len());
    let mut chars = out.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '<' && chars.peek().is_some_and(|n| n.is_ascii_alphabetic() || *n == '!' || *n == '/') {
            cleaned.push('\u{2039}');
        } else {
            cleaned.push(c);
        }
    }
    cleaned
}

fn clip_to_bytes(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

fn extract(html: &str) -> CondensedPage {
    let doc = Html::parse_document(html);
    let mut page = CondensedPage::default();
    let mut stack = vec![doc.tree.root()];

    while let Some(node) = stack.pop() {
        match node.value() {
            Node::Text(t) => {
                let text = clean_text(t);
                if !text.is_empty() {
                    page.visible_text.push(text);
                }
                continue;
            }
            Node::Element(el) => {
                let name = el.name();
                if SKIPPED_ELEMENTS.contains(&name) {
                    continue;
                }
                match name {
                    "title" => {
                        if page.title.is_none() {
                            let text = clean_text(&descendant_text(node));
                            if !text.is_empty() {
                                page.title = Some(text);
                            }
                        }
                        continue;
                    }
                    "button" => {
                        let text = clean_text(&descendant_text(node));
                        let label = if text.is_empty() {
                            clean_text(el.attr("aria-label").or(el.attr("value")).unwrap_or(""))
                        } else {
                            text
                        };
                        if !label.is_empty() {
                            page.buttons.push(label);
                        }
                        continue;
                    }
                    "input" => {
                        let kind = el.attr("type").unwrap_or("text").trim().to_ascii_lowercase();
                        match kind.as_str() {
                            "hidden" => {}
                            "submit" | "button" | "reset" | "image" => {
                                let label = el
                                    .attr("value")
                                    .or(el.attr("alt"))
                                    .or(el.attr("aria-label"))
                                    .map(clean_text)
                                    .filter(|l| !l.is_empty())
                                    .unwrap_or_else(|| kind.clone());
                                page.buttons.push(label);
                            }
                            _ => page.inputs.push(InputField {
                                name: clean_text(el.attr("name").or(el.attr("id")).unwrap_or("")),
                                placeholder: clean_text(
                                    el.attr("placeholder").or(el.attr("aria-label")).unwrap_or(""),
                                ),
                                kind: clean_text(&kind),
                            }),
                        }
                        continue;
                    }
                    "textarea" | "select" => {
                        page.inputs.push(InputField {
                            name: clean_text(el.attr("name").or(el.attr("id")).unwrap_or("")),
                            placeholder: clean_text(el.attr("placeholder").unwrap_or("")),
                            kind: name.to_string(),
                        });
                        // option labels are still useful text
                        if name == "textarea" {
                            continue;
                        }
                    }
                    _ => {}
                }
            }
            Node::Document | Node::Fragment => {}
            _ => continue,
        }
        let children: Vec<_> = node.children().collect();
        stack.extend(children.into_iter().rev());
    }
    page
}

fn descendant_text(node: ego_tree::NodeRef<'_, Node>) -> String {
    let mut out = String::new();
    for d in node.descendants() {
        if let Node::Text(t) = d.value() {
            if d.ancestors().any(|a| {
                a.value()
                    .as_element()
                    .is_some_and(|e| SKIPPED_ELEMENTS.contains(&e.name()))
            }) {
                continue;
            }
            out.push(' ');
            out.push_str(t);
        }
    }
    out
}

/// Condense raw markup into a [`CondensedPage`] that fits `budget`.
///
/// When over budget, visible text is removed from the tail first, then
/// inputs, then buttons. The title is only clipped if it alone exceeds the
/// budget.
pub fn condense(html: &str, budget: TokenBudget) -> CondensedPage {
    let mut page = extract(html);
    let max_bytes = budget.get() * BYTES_PER_TOKEN;
    let mut total: usize = page.lines().map(|l| line_cost(&l)).sum();

    while total > max_bytes {
        if let Some(last) = page.visible_text.pop() {
            let cost = line_cost(&text_line(&last));
            total -= cost;
            let room = max_bytes.saturating_sub(total);
            let overhead = line_cost(&text_line(""));
            if total <= max_bytes && room >= overhead + MIN_CLIPPED_FRAGMENT {
                let clipped = clip_to_bytes(&last, room - overhead).trim_end().to_string();
                if !clipped.is_empty() {
                    total += line_cost(&text_line(&clipped));
                    page.visible_text.push(clipped);
                }
            }
        } else if let Some(last) = page.inputs.pop() {
            total -= line_cost(&last.render());
        } else if let Some(last) = page.buttons.pop() {
            total -= line_cost(&button_line(&last));
        } else if let Some(title) = page.title.take() {
            total -= line_cost(&title_line(&title));
            let overhead = line_cost(&title_line(""));
            let room = max_bytes.saturating_sub(total);
            if room > overhead {
                let clipped = clip_to_bytes(&title, room - overhead).trim_end().to_string();
                if !clipped.is_empty() {
                    total += line_cost(&title_line(&clipped));
                    page.title = Some(clipped);
                }
            }
        } else {
            break;
        }
    }

    page.token_estimate = estimate_tokens(&page.render());
    debug_assert_eq!(page.render().len(), total);
    page
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(n: usize) -> TokenBudget {
        TokenBudget::new(n).unwrap()
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
    }

    #[test]
    fn budget_minimum() {
        assert_eq!(TokenBudget::new(63), Err(BudgetTooSmall(63)));
        assert!(TokenBudget::new(64).is_ok());
        assert_eq!(TokenBudget::default().get(), 3000);
    }

    #[test]
    fn tiny_document() {
        let p = condense("<title>Pay Portal</title><button>Login</button>", budget(512));
        assert_eq!(p.title.as_deref(), Some("Pay Portal"));
        assert_eq!(p.buttons, vec!["Login"]);
        assert!(p.visible_text.is_empty());
        assert!(p.token_estimate <= 512);
        assert_eq!(p.token_estimate, estimate_tokens(&p.render()));
    }

    #[test]
    fn empty_input() {
        let p = condense("", budget(512));
        assert!(p.is_empty());
        assert_eq!(p.token_estimate, 0);
        assert_eq!(p.render(), "");
    }

    #[test]
    fn drops_script_style_and_comments() {
        let html = r#"<html><head><title>T</title><style>body{color:red}</style>
            <script>var secret = "<b>x</b>";</script></head>
            <body><!-- hidden note --><p>Hello   world</p><noscript>enable js</noscript></body></html>"#;
        let p = condense(html, budget(512));
        assert_eq!(p.visible_text, vec!["Hello world"]);
    }

    #[test]
    fn extracts_inputs_and_buttons() {
        let html = r#"<form>
            <input type="email" name="email" placeholder="Email address">
            <input type="password" name="pw">
            <input type="hidden" name="csrf" value="x">
            <input type="submit" value="Sign in">
            <textarea name="msg"></textarea>
            <button type="button"><span>Next</span></button>
        </form>"#;
        let p = condense(html, budget(512));
        assert_eq!(
            p.inputs,
            vec![
                InputField { name: "email".into(), placeholder: "Email address".into(), kind: "email".into() },
                InputField { name: "pw".into(), placeholder: String::new(), kind: "password".into() },
                InputField { name: "msg".into(), placeholder: String::new(), kind: "textarea".into() },
            ]
        );
        assert_eq!(p.buttons, vec!["Sign in", "Next"]);
    }

    #[test]
    fn escaped_markup_is_neutralised() {
        let p = condense("<p>&lt;script&gt;alert(1)&lt;/script&gt; a &lt; b</p>", budget(512));
        assert_eq!(p.visible_text.len(), 1);
        let frag = &p.visible_text[0];
        assert!(!frag.contains("<s") && !frag.contains("</"), "{frag}");
        assert!(frag.contains("a < b"));
    }

    #[test]
    fn malformed_markup_is_lenient() {
        let p = condense("<div><p>unclosed <b>bold<title>Late</title", budget(512));
        assert!(p.visible_text.iter().any(|t| t == "unclosed"));
    }

    #[test]
    fn document_order_preserved() {
        let html = "<div>one</div><section><p>two</p><p>three</p></section><footer>four</footer>";
        assert_eq!(condense(html, budget(512)).visible_text, vec!["one", "two", "three", "four"]);
    }

    #[test]
    fn truncates_text_before_inputs_and_buttons() {
        let mut html = String::from("<title>Bank Login</title><input name=user><button>Go</button>");
        for i in 0..200 {
            let _ = write!(html, "<p>paragraph number {i} with some filler words</p>");
        }
        let p = condense(&html, budget(64));
        assert!(p.token_estimate <= 64);
        assert_eq!(p.title.as_deref(), Some("Bank Login"));
        assert_eq!(p.buttons, vec!["Go"]);
        assert_eq!(p.inputs.len(), 1);
        assert!(p.visible_text.len() < 200);
        assert!(p.visible_text[0].starts_with("paragraph number 0"));
    }

    #[test]
    fn huge_title_is_clipped_last() {
        let title = "T".repeat(2000);
        let p = condense(&format!("<title>{title}</title><button>b</button><p>x</p>"), budget(64));
        assert!(p.token_estimate <= 64);
        assert!(p.buttons.is_empty() && p.visible_text.is_empty());
        assert!(p.title.unwrap().len() > 200);
    }

    #[test]
    fn long_single_paragraph_is_clipped_not_dropped() {
        let text = "word ".repeat(1000);
        let p = condense(&format!("<p>{text}</p>"), budget(64));
        assert_eq!(p.visible_text.len(), 1);
        assert!(p.token_estimate <= 64);
    }
}
