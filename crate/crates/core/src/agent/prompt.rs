//! Prompt construction for the brand agent and the one-shot baseline.

use serde::{Deserialize, Serialize};

use crate::clients::{LogoDetection, VisionDescription};
use crate::condense::CondensedPage;
use crate::similarity::DEFAULT_THRESHOLD;

/// Marker used for every input that was not supplied.
pub const NOT_AVAILABLE: &str = "not available";

/// Everything gathered during preprocessing, rendered into prompt slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub processed_html: String,
    pub logo_present: bool,
    pub screenshot_present: bool,
    pub logo_detector_output: String,
    pub vision_output: String,
    pub similarity_threshold: f64,
}

impl PromptContext {
    pub fn new(
        page: &CondensedPage,
        logo_present: bool,
        screenshot_present: bool,
        detection: Option<&LogoDetection>,
        vision: Option<&VisionDescription>,
    ) -> Self {
        Self {
            processed_html: render_page(page),
            logo_present,
            screenshot_present,
            logo_detector_output: render_detection(detection),
            vision_output: render_vision(vision),
            similarity_threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.similarity_threshold = threshold;
        self
    }
}

pub fn render_page(page: &CondensedPage) -> String {
    if page.is_empty() {
        return NOT_AVAILABLE.to_string();
    }
    page.render().trim_end().replace('\n', "; ")
}

fn render_detection(d: Option<&LogoDetection>) -> String {
    match d {
        None => NOT_AVAILABLE.to_string(),
        Some(LogoDetection {
            brand_guess: Some(b),
            confidence,
        }) => format!("{b} (confidence {confidence:.2})"),
        Some(_) => "no logo recognised".to_string(),
    }
}

fn render_vision(v: Option<&VisionDescription>) -> String {
    match v.map(|v| v.text.trim()) {
        Some(t) if !t.is_empty() => t.to_string(),
        Some(_) => format!("{NOT_AVAILABLE} (empty description)"),
        None => NOT_AVAILABLE.to_string(),
    }
}

fn presence(present: bool, what: &str) -> String {
    if present {
        format!("provided ({what})")
    } else {
        NOT_AVAILABLE.to_string()
    }
}

fn render_threshold(t: f64) -> String {
    let s = format!("{t}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

/// System prompt for the tool-calling agent.
pub fn build_prompt(ctx: &PromptContext) -> String {
    let mut p = String::with_capacity(4096 + ctx.processed_html.len());
    p.push_str(ROLE);
    p.push_str(
        "Given some text fragments and logo images from a webpage, your final goal is to determine the brand \
from the Google Search and Google Image Search that matches this webpage, or report that no known brand can be \
found. Please provide the brand name that matches the given text fragments and logo images, or type 'no brand \
found' if no brand can be found, and provide reasons for every decision you make. In some cases, if the given \
tools do not provide enough information, you can change the query to get more information. Try to identify which \
parts of the input are most likely to be brand-related.",
    );
    p.push_str(
        "You can call any available functions, but only five times in total, and once you make decision, you can \
give output of brand name with reason in json format and terminate. ",
    );
    p.push_str("INPUT: you will be given: Text fragments from the webpage html, possibly brand-related: ");
    p.push_str(&format!("processed_html: {}, ", ctx.processed_html));
    p.push_str("Any possible logo image from the webpage: ");
    p.push_str(&format!(
        "logo: {}, screen_shot: {}, Output of Google Logo Search ",
        presence(ctx.logo_present, "cropped logo image"),
        presence(ctx.screenshot_present, "webpage screenshot"),
    ));
    p.push_str(&format!(
        "on the logo image (e.g., a brand name): {}, this is an important information to identify.",
        ctx.logo_detector_output
    ));
    p.push_str(&format!(
        "Output of ChatGPT-4 Vision on the screenshot and logo: {}, the brand of the website as the result is \
reliable for more than 60 percent of the cases. ",
        ctx.vision_output
    ));
    p.push_str(&format!(
        "TOOLS: To search for information about the text fragments and logo images, select from the following \
tools to query: Google Search (get_google_search_results). Input: text query; Output: search results, you can use \
this function to gather more information of text fragment as well as google logo detector result. Google Image \
Search (get_google_img_search_res): Input: text query; Output: image URLs, basic info, snippets, titles and \
whether they visually match the current webpage's logo image with similarity score. A score that greater than {} \
is considered to be similar. You can use it to understand the logo images from the webpage. ",
        render_threshold(ctx.similarity_threshold)
    ));
    p.push_str(FINAL_OUTPUT);
    p
}

const ROLE: &str = "You are an expert assistant with strong reasoning and brand understanding skills. You're able \
to identify the brands regardless they are commercial, famous, valuable or not. Be truthful and only make claims \
that are grounded with the provided information. Do not fabricate any fact or make up non-existent content.";

const FINAL_OUTPUT: &str = "FINAL OUTPUT FROM YOU: if you decide to stop, you should only have your output in JSON \
format for your decision based on your evaluation. There should have two keys: brand_name and reason. Find as much \
information as possible and specify your decision in 'reason'.If you cannot decide for the brand name, specify 'no \
brand name' in 'brand_name' and state why you cannot decide in 'reason'. No markdown and indention.Some samples of \
final output from you is provided below:SAMPLE FINAL OUTPUT FROM YOU: {\"brand_name\": \"Nike\", \"reason\": \
\"Based on the google search result and google image result, the logo from the webpage is highly similar to Nike's \
logo.\"}";

/// Single prompt over condensed HTML only, used by the one-shot baseline.
pub fn build_one_shot_prompt(page: &CondensedPage) -> String {
    format!(
        "{ROLE}Given some text fragments from a webpage, determine the brand this webpage represents, or report \
that no known brand can be found. No tools are available; decide from the text alone. INPUT: Text fragments from \
the webpage html, possibly brand-related: processed_html: {}. {FINAL_OUTPUT}",
        render_page(page)
    )
}

pub const FINALIZE_INSTRUCTION: &str = "You have used all available function calls. Do not request any more \
functions. Respond now with your final decision as a single JSON object with the keys brand_name and reason.";

pub const REPAIR_INSTRUCTION: &str = "Your previous reply was not a valid final answer. Reply with only a JSON \
object with two string keys, brand_name and reason, and nothing else. If you cannot decide, use 'no brand name' \
as brand_name.";
