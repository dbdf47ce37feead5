//! The tool-calling brand agent.
//!
//! [`run_agent`] sends the system prompt, dispatches tool requests until the
//! budget is spent, then demands a final JSON answer. Malformed answers get
//! up to [`MAX_REPAIRS`] re-prompts before the run degrades to `NoBrand`.

pub mod gateway;
pub mod prompt;
pub mod tools;
pub mod verdict;

use log::debug;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::clients::ClientError;
use crate::model::{BrandVerdict, TOOL_BUDGET};

pub use gateway::{
    load_scenario, ChatMessage, GatewayError, LiveGateway, LiveGatewayConfig, ModelGateway,
    ModelReply, ScenarioStep, ScriptedGateway, ToolSpec,
};
pub use prompt::{build_one_shot_prompt, build_prompt, PromptContext};
pub use tools::{ToolFailure, ToolRegistry, IMAGE_SEARCH_TOOL, WEB_SEARCH_TOOL};
pub use verdict::{parse_verdict, render_verdict, MalformedOutput};

/// Re-prompts allowed after a malformed final answer.
pub const MAX_REPAIRS: u32 = 2;
/// Finalization demands allowed after the budget is spent.
pub const MAX_FINALIZE_PROMPTS: u32 = 2;

pub const UNPARSEABLE_REASON: &str = "unparseable agent output";
pub const BUDGET_EXHAUSTED_REASON: &str = "tool budget exhausted without a final answer";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("tool budget must be between 1 and {TOOL_BUDGET}, got {0}")]
    InvalidBudget(u32),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("tool failure: {0}")]
    Tool(ClientError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTurn {
    Text(String),
    RejectedToolRequest(ToolInvocation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutcome {
    pub name: String,
    pub ok: bool,
    pub content: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", content = "payload")]
pub enum Turn {
    System(String),
    Model(ModelTurn),
    ToolCall(ToolInvocation),
    ToolResult(ToolOutcome),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentTranscript {
    pub turns: Vec<Turn>,
    pub tool_calls_used: u32,
}

impl AgentTranscript {
    /// Checks that every tool call is followed by exactly one result and
    /// that the call counter agrees with the turns.
    pub fn is_well_formed(&self) -> bool {
        let calls = self.turns.iter().filter(|t| matches!(t, Turn::ToolCall(_))).count();
        let paired = self.turns.iter().enumerate().all(|(i, t)| match t {
            Turn::ToolCall(_) => matches!(self.turns.get(i + 1), Some(Turn::ToolResult(_))),
            Turn::ToolResult(_) => i > 0 && matches!(self.turns[i - 1], Turn::ToolCall(_)),
            _ => true,
        });
        paired && calls == self.tool_calls_used as usize
    }

    /// Model responses in order, as a scenario that reproduces this run.
    pub fn to_scenario(&self) -> Vec<ScenarioStep> {
        self.turns
            .iter()
            .filter_map(|t| match t {
                Turn::ToolCall(c) | Turn::Model(ModelTurn::RejectedToolRequest(c)) => Some(ScenarioStep::Tool {
                    name: c.name.clone(),
                    arguments: c.arguments.clone(),
                }),
                Turn::Model(ModelTurn::Text(text)) => Some(ScenarioStep::Final { text: text.clone() }),
                _ => None,
            })
            .collect()
    }
}

struct Session<'g> {
    gateway: &'g dyn ModelGateway,
    conversation: Vec<ChatMessage>,
    transcript: AgentTranscript,
}

impl Session<'_> {
    fn instruct(&mut self, text: &str) {
        self.conversation.push(ChatMessage::User { content: text.to_string() });
        self.transcript.turns.push(Turn::System(text.to_string()));
    }
}

/// Core loop shared by the agent and the one-shot baseline. With
/// `tools == None` no tool is ever offered or dispatched.
fn converse(
    gateway: &dyn ModelGateway,
    system_prompt: String,
    tools: Option<&ToolRegistry<'_>>,
    budget: u32,
) -> Result<(BrandVerdict, AgentTranscript), AgentError> {
    if !(1..=TOOL_BUDGET).contains(&budget) {
        return Err(AgentError::InvalidBudget(budget));
    }
    let mut s = Session {
        gateway,
        conversation: vec![ChatMessage::System { content: system_prompt.clone() }],
        transcript: AgentTranscript::default(),
    };
    s.transcript.turns.push(Turn::System(system_prompt));
    let specs = tools.map(ToolRegistry::specs).unwrap_or_default();
    let mut repairs = 0;
    let mut refusals = 0;

    loop {
        let used = s.transcript.tool_calls_used;
        let can_call = tools.is_some() && used < budget;
        let offered: &[ToolSpec] = if can_call { &specs } else { &[] };
        let reply = s.gateway.send(&s.conversation, offered)?;

        match reply {
            ModelReply::ToolRequest { name, arguments } if can_call => {
                let registry = tools.expect("can_call implies tools");
                let id = format!("call_{}", used + 1);
                s.transcript.tool_calls_used += 1;
                s.transcript.turns.push(Turn::ToolCall(ToolInvocation {
                    name: name.clone(),
                    arguments: arguments.clone(),
                }));
                s.conversation.push(ChatMessage::ToolCall {
                    id: id.clone(),
                    name: name.clone(),
                    arguments: arguments.clone(),
                });
                let (ok, content) = match registry.dispatch(&name, &arguments) {
                    Ok(v) => (true, v),
                    Err(ToolFailure::Recoverable(msg)) => (false, json!({"error": msg})),
                    Err(ToolFailure::Fatal(e)) => return Err(AgentError::Tool(e)),
                };
                debug!("tool {name} dispatched (ok={ok}), {} of {budget} used", used + 1);
                s.conversation.push(ChatMessage::ToolResult {
                    id,
                    name: name.clone(),
                    content: content.to_string(),
                });
                s.transcript.turns.push(Turn::ToolResult(ToolOutcome { name, ok, content }));
            }
            ModelReply::ToolRequest { name, arguments } => {
                refusals += 1;
                s.transcript
                    .turns
                    .push(Turn::Model(ModelTurn::RejectedToolRequest(ToolInvocation {
                        name: name.clone(),
                        arguments: arguments.clone(),
                    })));
                if refusals > MAX_FINALIZE_PROMPTS {
                    return Ok((BrandVerdict::no_brand(BUDGET_EXHAUSTED_REASON, used), s.transcript));
                }
                s.conversation.push(ChatMessage::Assistant {
                    content: json!({"requested_tool": name, "arguments": arguments}).to_string(),
                });
                s.instruct(prompt::FINALIZE_INSTRUCTION);
            }
            ModelReply::FinalText(text) => {
                s.transcript.turns.push(Turn::Model(ModelTurn::Text(text.clone())));
                match parse_verdict(&text) {
                    Ok(v) => {
                        let verdict = BrandVerdict::new(v.brand, v.reason, used);
                        return Ok((verdict, s.transcript));
                    }
                    Err(e) => {
                        repairs += 1;
                        debug!("malformed final answer ({e}); repair attempt {repairs}");
                        if repairs > MAX_REPAIRS {
                            return Ok((BrandVerdict::no_brand(UNPARSEABLE_REASON, used), s.transcript));
                        }
                        s.conversation.push(ChatMessage::Assistant { content: text });
                        s.instruct(prompt::REPAIR_INSTRUCTION);
                    }
                }
            }
        }
    }
}

/// Runs the budget-limited agent over a prepared prompt context.
pub fn run_agent(
    ctx: &PromptContext,
    gateway: &dyn ModelGateway,
    tools: &ToolRegistry<'_>,
    budget: u32,
) -> Result<(BrandVerdict, AgentTranscript), AgentError> {
    converse(gateway, build_prompt(ctx), Some(tools), budget)
}

/// Single prompt, no tools. Repairs still apply.
pub fn run_one_shot(
    page: &crate::condense::CondensedPage,
    gateway: &dyn ModelGateway,
) -> Result<(BrandVerdict, AgentTranscript), AgentError> {
    let (v, t) = converse(gateway, build_one_shot_prompt(page), None, 1)?;
    Ok((BrandVerdict::new(v.brand, v.reason, 0), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::{ClientError, ImageResult, SearchClient, SearchResult, ThumbnailFetcher, ToolName};
    use crate::condense::CondensedPage;
    use crate::model::Brand;
    use crate::similarity::Scorer;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[derive(Default)]
    struct CountingSearch {
        calls: AtomicUsize,
    }

    impl SearchClient for CountingSearch {
        fn web_search(&self, query: &str, _: usize) -> Result<Vec<SearchResult>, ClientError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if query == "miss" {
                return Err(ClientError::CassetteMiss { tool: ToolName::WebSearch, key: query.into() });
            }
            Ok(vec![SearchResult {
                title: format!("{query} official"),
                snippet: String::new(),
                link: "https://www.nike.com/".into(),
                display_link: "www.nike.com".into(),
                rank: 1,
            }])
        }
        fn image_search(&self, _: &str, _: usize) -> Result<Vec<ImageResult>, ClientError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(vec![])
        }
    }

    struct NoFetch;
    impl ThumbnailFetcher for NoFetch {
        fn fetch_thumbnail(&self, _: &str) -> Result<Vec<u8>, ClientError> {
            Err(ClientError::HttpStatus { tool: ToolName::FetchThumbnail, status: 404 })
        }
    }

    fn search_step(q: &str) -> ScenarioStep {
        ScenarioStep::Tool { name: WEB_SEARCH_TOOL.into(), arguments: json!({"query": q}) }
    }

    fn final_step(text: &str) -> ScenarioStep {
        ScenarioStep::Final { text: text.into() }
    }

    fn ctx() -> PromptContext {
        PromptContext::new(&CondensedPage::default(), false, false, None, None)
    }

    fn run(steps: Vec<ScenarioStep>, search: &CountingSearch) -> Result<(BrandVerdict, AgentTranscript), AgentError> {
        let scorer = Scorer::default();
        let tools = ToolRegistry::standard(search, &NoFetch, &scorer, None);
        run_agent(&ctx(), &ScriptedGateway::new(steps), &tools, TOOL_BUDGET)
    }

    #[test]
    fn happy_path() {
        let search = CountingSearch::default();
        let (v, t) = run(
            vec![search_step("Nike"), final_step(r#"{"brand_name":"Nike","reason":"logo match"}"#)],
            &search,
        )
        .unwrap();
        assert_eq!(v.brand, Brand::Named("Nike".into()));
        assert_eq!(v.rounds_used, 1);
        assert_eq!(t.tool_calls_used, 1);
        assert!(t.is_well_formed());
        assert_eq!(search.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn seven_requests_dispatch_five_then_finalize() {
        let search = CountingSearch::default();
        let mut steps: Vec<_> = (0..7).map(|i| search_step(&format!("q{i}"))).collect();
        steps.push(final_step(r#"{"brand_name":"Nike","reason":"r"}"#));
        let (v, t) = run(steps, &search).unwrap();
        assert_eq!(search.calls.load(Ordering::SeqCst), 5);
        assert_eq!(t.tool_calls_used, 5);
        assert_eq!(v.rounds_used, 5);
        assert_eq!(v.brand, Brand::Named("Nike".into()));
        let finalize = t
            .turns
            .iter()
            .filter(|x| matches!(x, Turn::System(s) if s == prompt::FINALIZE_INSTRUCTION))
            .count();
        assert_eq!(finalize, 2);
        assert!(t.is_well_formed());
    }

    #[test]
    fn endless_tool_requests_terminate() {
        let search = CountingSearch::default();
        let steps: Vec<_> = (0..20).map(|i| search_step(&format!("q{i}"))).collect();
        let (v, t) = run(steps, &search).unwrap();
        assert_eq!(v.brand, Brand::NoBrand);
        assert_eq!(v.reason, BUDGET_EXHAUSTED_REASON);
        assert_eq!(t.tool_calls_used, 5);
    }

    #[test]
    fn no_brand_found_answer() {
        let search = CountingSearch::default();
        let (v, _) = run(vec![final_step(r#"{"brand_name":"no brand found","reason":"blank page"}"#)], &search).unwrap();
        assert_eq!(v.brand, Brand::NoBrand);
        assert_eq!(v.rounds_used, 0);
    }

    #[test]
    fn repairs_then_gives_up() {
        let search = CountingSearch::default();
        let (v, t) = run(vec![final_step("Nike"), final_step("still not json"), final_step("nope")], &search).unwrap();
        assert_eq!(v.brand, Brand::NoBrand);
        assert_eq!(v.reason, UNPARSEABLE_REASON);
        assert_eq!(t.turns.iter().filter(|x| matches!(x, Turn::Model(_))).count(), 3);

        let (v, _) = run(
            vec![final_step("Nike"), final_step(r#"{"brand_name":"Nike","reason":"r"}"#)],
            &search,
        )
        .unwrap();
        assert_eq!(v.brand, Brand::Named("Nike".into()));
    }

    #[test]
    fn unknown_tool_and_bad_arguments_count_against_budget() {
        let search = CountingSearch::default();
        let steps = vec![
            ScenarioStep::Tool { name: "get_weather".into(), arguments: json!({}) },
            ScenarioStep::Tool { name: WEB_SEARCH_TOOL.into(), arguments: json!({"q": 1}) },
            final_step(r#"{"brand_name":"x","reason":"y"}"#),
        ];
        let (v, t) = run(steps, &search).unwrap();
        assert_eq!(v.rounds_used, 2);
        assert_eq!(search.calls.load(Ordering::SeqCst), 0);
        let oks: Vec<bool> = t
            .turns
            .iter()
            .filter_map(|x| match x {
                Turn::ToolResult(r) => Some(r.ok),
                _ => None,
            })
            .collect();
        assert_eq!(oks, [false, false]);
    }

    #[test]
    fn cassette_miss_aborts() {
        let search = CountingSearch::default();
        let err = run(vec![search_step("miss")], &search).unwrap_err();
        assert!(matches!(err, AgentError::Tool(ClientError::CassetteMiss { .. })));
    }

    #[test]
    fn gateway_failure_surfaces() {
        let search = CountingSearch::default();
        assert!(matches!(run(vec![], &search), Err(AgentError::Gateway(_))));
    }

    #[test]
    fn budget_bounds() {
        let search = CountingSearch::default();
        let scorer = Scorer::default();
        let tools = ToolRegistry::standard(&search, &NoFetch, &scorer, None);
        let gw = ScriptedGateway::new(vec![]);
        assert!(matches!(run_agent(&ctx(), &gw, &tools, 0), Err(AgentError::InvalidBudget(0))));
        assert!(matches!(run_agent(&ctx(), &gw, &tools, 6), Err(AgentError::InvalidBudget(6))));
    }

    #[test]
    fn smaller_budget_is_respected() {
        let search = CountingSearch::default();
        let scorer = Scorer::default();
        let tools = ToolRegistry::standard(&search, &NoFetch, &scorer, None);
        let mut steps: Vec<_> = (0..4).map(|i| search_step(&format!("q{i}"))).collect();
        steps.push(final_step(r#"{"brand_name":"Nike","reason":"r"}"#));
        let (v, _) = run_agent(&ctx(), &ScriptedGateway::new(steps), &tools, 2).unwrap();
        assert_eq!(v.rounds_used, 2);
        assert_eq!(search.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn transcript_regenerates_scenario() {
        let search = CountingSearch::default();
        let steps = vec![search_step("Nike"), final_step("bad"), final_step(r#"{"brand_name":"Nike","reason":"r"}"#)];
        let (_, t) = run(steps.clone(), &search).unwrap();
        assert_eq!(t.to_scenario(), steps);
    }

    #[test]
    fn one_shot_uses_no_tools() {
        let gw = ScriptedGateway::new(vec![final_step(r#"{"brand_name":"Nike","reason":"title"}"#)]);
        let (v, t) = run_one_shot(&CondensedPage::default(), &gw).unwrap();
        assert_eq!(v.rounds_used, 0);
        assert_eq!(v.brand, Brand::Named("Nike".into()));
        assert_eq!(t.tool_calls_used, 0);
    }

    #[test]
    fn transcript_serialization_shape() {
        let t = AgentTranscript {
            turns: vec![
                Turn::System("p".into()),
                Turn::ToolCall(ToolInvocation { name: "t".into(), arguments: json!({"query": "q"}) }),
                Turn::ToolResult(ToolOutcome { name: "t".into(), ok: true, content: json!([]) }),
            ],
            tool_calls_used: 1,
        };
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["turns"][0], json!({"role": "System", "payload": "p"}));
        assert_eq!(v["turns"][1]["role"], "ToolCall");
        assert!(t.is_well_formed());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn step() -> impl Strategy<Value = ScenarioStep> {
            prop_oneof![
                "[a-z]{1,8}".prop_map(|q| search_step(&q)),
                Just(ScenarioStep::Tool { name: IMAGE_SEARCH_TOOL.into(), arguments: json!({"query": "logo"}) }),
                Just(ScenarioStep::Tool { name: "bogus".into(), arguments: json!(null) }),
                Just(final_step("not json")),
                Just(final_step(r#"{"brand":"x"}"#)),
                Just(final_step(r#"{"brand_name":"Nike","reason":"r"}"#)),
            ]
        }

        proptest! {
            #[test]
            fn never_exceeds_budget(steps in proptest::collection::vec(step(), 12..30), budget in 1u32..=5) {
                let search = CountingSearch::default();
                let scorer = Scorer::default();
                let tools = ToolRegistry::standard(&search, &NoFetch, &scorer, None);
                let (v, t) = run_agent(&ctx(), &ScriptedGateway::new(steps), &tools, budget).unwrap();
                prop_assert!(t.tool_calls_used <= budget);
                prop_assert!(v.rounds_used <= budget);
                prop_assert!(search.calls.load(Ordering::SeqCst) as u32 <= budget);
                prop_assert!(t.is_well_formed());
            }
        }
    }
}
