//! Prompt construction for the text-model pipeline. Each prompt kind
//! opens with a fixed marker phrase so that offline backends can
//! dispatch on it deterministically.

pub const ANALYSIS_MARKER: &str = "You are an experienced curriculum designer.";
pub const EVALUATION_MARKER: &str = "Evaluation Instruction:";
pub const REFINEMENT_MARKER: &str = "Revise the analysis";
pub const EXTRACTION_MARKER: &str = "Extract the knowledge concepts";
pub const SUMMARY_MARKER: &str = "Summarize how the following";
pub const EXPLAIN_MARKER: &str = "Explain why";

pub fn analysis(kc_name: &str) -> String {
    format!(
        "{ANALYSIS_MARKER} Write a precise explanation of the knowledge concept \"{kc_name}\" \
         for students: what it is, which concepts it builds on, and which concepts it is \
         commonly confused with."
    )
}

pub fn evaluation(kc_name: &str, analysis: &str) -> String {
    format!(
        "{EVALUATION_MARKER} Review the following analysis of \"{kc_name}\" for accuracy, \
         completeness and reliability. Reply with the single word APPROVED if it needs no \
         further work, otherwise describe what must be improved.\n\nAnalysis:\n{analysis}"
    )
}

pub fn refinement(kc_name: &str, analysis: &str, critique: &str) -> String {
    format!(
        "{REFINEMENT_MARKER} of \"{kc_name}\" so it addresses the critique.\n\n\
         Previous analysis:\n{analysis}\n\nCritique:\n{critique}"
    )
}

pub fn extraction(chunk: &str, kc_names: &[String]) -> String {
    format!(
        "{EXTRACTION_MARKER} and their relationships mentioned in the text below. \
         Known concepts: {}. Respond with one item per line using the forms \
         (entity|NAME), (prereq|A|B) meaning A must be learned before B, or \
         (similar|A|B|WEIGHT) for commonly confused concepts.\n\nText:\n{chunk}",
        kc_names.join(", ")
    )
}

pub fn summary(member_names: &[&str]) -> String {
    format!(
        "{SUMMARY_MARKER} related concepts fit together as a study topic, mentioning each \
         by name: {}.",
        member_names.join(", ")
    )
}

#[allow(clippy::too_many_arguments)]
pub fn explain_step(
    kc_name: &str,
    parents_in_path: &[&str],
    children_in_path: &[&str],
    neighbors: &[&str],
    community_summary: Option<&str>,
) -> String {
    let mut prompt = format!(
        "{EXPLAIN_MARKER} \"{kc_name}\" is recommended at this point of the learning path."
    );
    if !parents_in_path.is_empty() {
        prompt.push_str(&format!(
            " Prerequisites already in the path: {}.",
            parents_in_path.join(", ")
        ));
    }
    if !children_in_path.is_empty() {
        prompt.push_str(&format!(
            " It prepares for: {}.",
            children_in_path.join(", ")
        ));
    }
    if !neighbors.is_empty() {
        prompt.push_str(&format!(
            " Commonly confused with: {}.",
            neighbors.join(", ")
        ));
    }
    if let Some(summary) = community_summary {
        prompt.push_str(&format!(" Community context: {summary}"));
    }
    prompt
}

/// First double-quoted span in a prompt; how offline backends recover
/// the concept name.
pub fn quoted_name(prompt: &str) -> Option<&str> {
    let start = prompt.find('"')? + 1;
    let end = prompt[start..].find('"')? + start;
    Some(&prompt[start..end])
}
