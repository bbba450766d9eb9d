//! Text-model backends: the pluggable completion interface, the
//! deterministic stub driven by a planted ontology, and an HTTP client
//! for a live completion service.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ontology::PlantedOntology;
use super::prompts;

/// Completion interface. Implementations must be safe to call from
/// several extraction workers at once.
pub trait TextModelBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Issues every prompt through the backend with at most `max_in_flight`
/// concurrent requests and returns completions in prompt order, so the
/// merged result is independent of completion timing.
pub fn complete_all(
    backend: &dyn TextModelBackend,
    prompts: &[String],
    max_in_flight: usize,
) -> Result<Vec<String>> {
    let workers = max_in_flight.max(1).min(prompts.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<String>>>> =
        Mutex::new((0..prompts.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= prompts.len() {
                    break;
                }
                let outcome = backend.complete(&prompts[i]);
                slots.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every prompt slot is filled"))
        .collect()
}

/// Deterministic offline backend. All responses are pure functions of
/// the prompt text and the planted ontology: identical prompts always
/// produce identical completions.
pub struct StubBackend {
    ontology: PlantedOntology,
}

const REVISION_MARKER: &str = "Refinement note";

impl StubBackend {
    pub fn new(ontology: PlantedOntology) -> Result<Self> {
        ontology.validate()?;
        Ok(StubBackend { ontology })
    }

    pub fn ontology(&self) -> &PlantedOntology {
        &self.ontology
    }

    /// Sentence planted in the downstream concept's explanation for a
    /// prerequisite relation.
    pub fn prereq_sentence(before: &str, after: &str) -> String {
        format!("Understanding {after} builds directly on {before}.")
    }

    /// Sentence planted once per similarity pair, in the explanation of
    /// the endpoint that comes first in the ontology's concept order.
    pub fn sim_sentence(a: &str, b: &str) -> String {
        format!("Students often confuse {a} with {b}.")
    }

    fn explanation_text(&self, name: &str, revision: u32) -> String {
        let mut text = format!(
            "{name} is a distinct unit of study that students are expected to master. "
        );
        for (before, after) in &self.ontology.true_prereqs {
            if after == name {
                text.push_str(&Self::prereq_sentence(before, after));
                text.push(' ');
            }
        }
        for (a, b, _) in &self.ontology.true_sims {
            let (first, second) = self.ordered_pair(a, b);
            if first == name {
                text.push_str(&Self::sim_sentence(first, second));
                text.push(' ');
            }
        }
        text.push_str(&format!(
            "Typical coursework assesses {name} through graded exercises."
        ));
        for k in 2..=revision {
            text.push_str(&format!(
                " {REVISION_MARKER} {k}: additional distinguishing detail documented."
            ));
        }
        text
    }

    fn ordered_pair<'a>(&self, a: &'a str, b: &'a str) -> (&'a str, &'a str) {
        let ia = self.ontology.concept_index(a).unwrap_or(usize::MAX);
        let ib = self.ontology.concept_index(b).unwrap_or(usize::MAX);
        if ia <= ib {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn revision_of(text: &str) -> u32 {
        text.matches(REVISION_MARKER).count() as u32 + 1
    }

    fn respond_analysis(&self, prompt: &str) -> String {
        let name = prompts::quoted_name(prompt).unwrap_or_default();
        self.explanation_text(name, 1)
    }

    fn respond_evaluation(&self, prompt: &str) -> String {
        let name = prompts::quoted_name(prompt).unwrap_or_default();
        let revision = Self::revision_of(prompt);
        let needed = self.ontology.approve_after.get(name).copied().unwrap_or(1);
        if revision >= needed {
            "APPROVED".to_string()
        } else {
            format!(
                "The explanation of \"{name}\" does not yet distinguish it from nearby \
                 concepts; add more distinguishing detail."
            )
        }
    }

    fn respond_refinement(&self, prompt: &str) -> String {
        let name = prompts::quoted_name(prompt).unwrap_or_default();
        let next_revision = Self::revision_of(prompt) + 1;
        self.explanation_text(name, next_revision)
    }

    fn respond_extraction(&self, prompt: &str) -> String {
        let chunk = match prompt.split_once("\n\nText:\n") {
            Some((_, chunk)) => chunk,
            None => return String::new(),
        };
        let mut lines = Vec::new();
        for name in &self.ontology.concepts {
            if chunk.contains(name.as_str()) {
                lines.push(format!("(entity|{name})"));
            }
        }
        for (before, after) in &self.ontology.true_prereqs {
            if chunk.contains(&Self::prereq_sentence(before, after)) {
                lines.push(format!("(prereq|{before}|{after})"));
            }
        }
        for (a, b, w) in &self.ontology.true_sims {
            let (first, second) = self.ordered_pair(a, b);
            if chunk.contains(&Self::sim_sentence(first, second)) {
                lines.push(format!("(similar|{a}|{b}|{w})"));
            }
        }
        lines.join("\n")
    }

    fn respond_summary(prompt: &str) -> String {
        let names = prompt
            .split_once(": ")
            .map(|(_, tail)| tail.trim_end_matches('.'))
            .unwrap_or_default();
        format!("This study topic groups {names}; later concepts build on earlier ones and confusable pairs deserve contrastive practice.")
    }

    fn respond_explain(prompt: &str) -> String {
        let name = prompts::quoted_name(prompt).unwrap_or_default();
        format!(
            "{name} is scheduled here because its prerequisites in the path are already \
             covered and practicing it now, alongside its confusable neighbors, keeps \
             progress toward the goal steady."
        )
    }
}

impl TextModelBackend for StubBackend {
    fn complete(&self, prompt: &str) -> Result<String> {
        let response = if prompt.starts_with(prompts::ANALYSIS_MARKER) {
            self.respond_analysis(prompt)
        } else if prompt.starts_with(prompts::EVALUATION_MARKER) {
            self.respond_evaluation(prompt)
        } else if prompt.starts_with(prompts::REFINEMENT_MARKER) {
            self.respond_refinement(prompt)
        } else if prompt.starts_with(prompts::EXTRACTION_MARKER) {
            self.respond_extraction(prompt)
        } else if prompt.starts_with(prompts::SUMMARY_MARKER) {
            Self::respond_summary(prompt)
        } else if prompt.starts_with(prompts::EXPLAIN_MARKER) {
            Self::respond_explain(prompt)
        } else {
            return Err(Error::MalformedResponse(format!(
                "stub backend cannot dispatch prompt: {:.60}",
                prompt
            )));
        };
        Ok(response)
    }
}

/// Connection settings for a live completion service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            base_url: "http://localhost:8000/v1".to_string(),
            model: "default".to_string(),
            api_key_env: "TEXT_MODEL_API_KEY".to_string(),
            timeout_secs: 60,
            retries: 2,
        }
    }
}

/// Blocking HTTP client against a completions endpoint.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Backend {
                attempts: 0,
                message: format!("client construction: {e}"),
            })?;
        let api_key = std::env::var(&config.api_key_env).ok();
        Ok(HttpBackend {
            config,
            client,
            api_key,
        })
    }
}

impl TextModelBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String> {
        let url = format!("{}/completions", self.config.base_url.trim_end_matches('/'));
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens: 1024,
        };
        let mut last_error = String::new();
        let attempts = self.config.retries + 1;
        for _ in 0..attempts {
            let mut request = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) if response.status().is_success() => {
                    let parsed: CompletionResponse =
                        response.json().map_err(|e| Error::MalformedResponse(
                            format!("completion JSON: {e}"),
                        ))?;
                    let text = parsed
                        .choices
                        .first()
                        .map(|c| c.text.clone())
                        .unwrap_or_default();
                    if text.is_empty() {
                        return Err(Error::MalformedResponse(
                            "completion carried no text".to_string(),
                        ));
                    }
                    return Ok(text);
                }
                Ok(response) => {
                    last_error = format!("HTTP status {}", response.status());
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(Error::Backend {
            attempts,
            message: last_error,
        })
    }
}
