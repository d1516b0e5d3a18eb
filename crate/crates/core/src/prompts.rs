//! Versioned prompt templates and their rendering.
//!
//! Templates live under `templates/` as plain text resources; placeholders
//! are `<question>`, `<ground_truth>`, `<N>`, `<candidate_answer>`,
//! `<candidate_1>`, `<candidate_2>` and `<candidate>`. `TEMPLATE_VERSION`
//! participates in cache keys so edited templates never hit stale entries.

use crate::gateway::{ChatMessage, LlmRequest};

/// Bumped whenever any template text changes.
pub const TEMPLATE_VERSION: &str = "v1";

pub const LISTWISE_WITH_GOLD: &str = include_str!("../templates/listwise_with_gold.txt");
pub const LISTWISE_NO_GOLD: &str = include_str!("../templates/listwise_no_gold.txt");
pub const POINTWISE: &str = include_str!("../templates/pointwise.txt");
pub const PAIRWISE: &str = include_str!("../templates/pairwise.txt");
pub const QA_SYSTEM: &str = include_str!("../templates/qa_system.txt");
pub const QA_USER: &str = include_str!("../templates/qa_user.txt");
pub const GPT_EVAL: &str = include_str!("../templates/gpt_eval.txt");
pub const PROMPT_DIFFICULTY: &str = include_str!("../templates/prompt_difficulty.txt");

/// Few-shot examples for the QA prompt: (question, answer) pairs rendered
/// as alternating user/assistant turns.
pub const QA_SHOTS: [(&str, &str); 5] = [
    ("Who won the Nobel Peace Prize in 2009?", "Barack Obama"),
    (
        "Edouard Daladier became Prime Minister of which country in 1933?",
        "France",
    ),
    ("What is the capital of Australia?", "Canberra"),
    ("Which planet is known as the Red Planet?", "Mars"),
    ("Who wrote the play Romeo and Juliet?", "William Shakespeare"),
];

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.trim_end().to_string();
    for (placeholder, value) in pairs {
        out = out.replace(placeholder, value);
    }
    out
}

pub fn render_listwise_with_gold(question: &str, gold: &str, n: usize) -> String {
    fill(
        LISTWISE_WITH_GOLD,
        &[
            ("<question>", question),
            ("<ground_truth>", gold),
            ("<N>", &n.to_string()),
        ],
    )
}

pub fn render_listwise_no_gold(question: &str, n: usize) -> String {
    fill(
        LISTWISE_NO_GOLD,
        &[("<question>", question), ("<N>", &n.to_string())],
    )
}

pub fn render_pointwise(question: &str, gold: &str, candidate: &str) -> String {
    // The schema block's <candidate_answer> placeholders must survive, so
    // only the first occurrence (the one naming the candidate under
    // consideration) is substituted.
    let mut out = POINTWISE.trim_end().to_string();
    if let Some(pos) = out.find("<candidate_answer>") {
        out.replace_range(pos..pos + "<candidate_answer>".len(), candidate);
    }
    fill(&out, &[("<question>", question), ("<ground_truth>", gold)])
}

pub fn render_pairwise(question: &str, gold: &str, first: &str, second: &str) -> String {
    fill(
        PAIRWISE,
        &[
            ("<question>", question),
            ("<ground_truth>", gold),
            ("<candidate_1>", first),
            ("<candidate_2>", second),
        ],
    )
}

pub fn render_gpt_eval(question: &str, gold: &str, candidate: &str) -> String {
    fill(
        GPT_EVAL,
        &[
            ("<question>", question),
            ("<ground_truth>", gold),
            ("<candidate>", candidate),
        ],
    )
}

pub fn render_prompt_difficulty(question: &str) -> String {
    fill(PROMPT_DIFFICULTY, &[("<question>", question)])
}

/// Build the 5-shot QA request for a question at temperature 0.
pub fn qa_request(model_id: &str, question: &str) -> LlmRequest {
    let mut messages = Vec::with_capacity(QA_SHOTS.len() * 2 + 1);
    for (shot_q, shot_a) in QA_SHOTS {
        messages.push(ChatMessage::user(fill(QA_USER, &[("<question>", shot_q)])));
        messages.push(ChatMessage::assistant(shot_a));
    }
    messages.push(ChatMessage::user(fill(
        QA_USER,
        &[("<question>", question)],
    )));
    LlmRequest {
        model_id: model_id.to_string(),
        system: Some(QA_SYSTEM.trim_end().to_string()),
        messages,
        temperature: 0.0,
        max_tokens: 256,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listwise_with_gold_substitutes_all_slots() {
        let p = render_listwise_with_gold("What is the capital of China?", "Beijing", 20);
        assert!(p.contains("the answer to What is the capital of China? is Beijing"));
        assert!(p.contains("Generate a list of 20 unique candidate answers, excluding Beijing."));
        assert!(p.contains("The output must contain the JSON list only."));
        assert!(!p.contains("<N>"));
    }

    #[test]
    fn no_gold_prompt_never_mentions_gold() {
        let p = render_listwise_no_gold("What is the capital of China?", 20);
        assert!(!p.contains("Beijing"));
        assert!(!p.contains("<ground_truth>"));
        assert!(p.contains("Generate a list of 20 unique candidate answers."));
        assert!(p.contains("Question: What is the capital of China?"));
    }

    #[test]
    fn pointwise_keeps_schema_placeholder() {
        let p = render_pointwise("Q?", "Gold", "Shanghai");
        assert!(p.contains("For the candidate answer Shanghai, provide:"));
        // The JSON schema example must keep its placeholder.
        assert!(p.contains("\"Candidate Answer\": \"<candidate_answer>\""));
    }

    #[test]
    fn pairwise_orders_candidates() {
        let p = render_pairwise("Q?", "Gold", "Alpha", "Beta");
        assert!(p.contains("Candidate Answer 1: Alpha"));
        assert!(p.contains("Candidate Answer 2: Beta"));
        assert!(p.contains("a single character: \"1\" or \"2\"."));
    }

    #[test]
    fn qa_request_is_five_shot_at_temperature_zero() {
        let req = qa_request("m", "Which is the most powerful chess piece?");
        assert_eq!(req.temperature, 0.0);
        assert_eq!(req.messages.len(), 11);
        assert!(req.system.as_deref().unwrap().starts_with("You are an assistant"));
        assert!(req.messages[1].content.contains("Barack Obama"));
        assert!(req.messages[10]
            .content
            .contains("Question: Which is the most powerful chess piece?"));
    }

    #[test]
    fn gpt_eval_prompt_shape() {
        let p = render_gpt_eval("Q?", "Sylvester", "Sylvester the Cat");
        assert_eq!(
            p,
            "Question: Q?\nAnswer: Sylvester\nCandidate: Sylvester the Cat\nIs the candidate correct? Choose between \"Yes\" or \"No\""
        );
    }
}
