use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::llm::{rule_parse, Menu};

use super::{build_prompts, ParsedTask, PromptPair, Registry, SkillFailure};

pub const APOLOGY: &str = "I'm sorry, I could not prepare a reply, but I will take care of your request.";

pub struct UnderstandRequest<'a> {
    pub prompts: &'a PromptPair,
    pub utterance: &'a str,
    pub registry: &'a Registry,
    pub menu: &'a Menu,
}

/// Everything the respond call may look at. In parallel mode `understood`
/// is always `None`: the request is built before understanding starts.
pub struct RespondRequest<'a> {
    pub prompt: &'a str,
    pub utterance: &'a str,
    pub registry: &'a Registry,
    pub menu: &'a Menu,
    pub understood: Option<&'a ParsedTask>,
}

/// A task parser plus response generator.
pub trait Backend: Sync {
    fn understand(&self, req: &UnderstandRequest<'_>) -> Result<ParsedTask>;

    fn respond(&self, req: &RespondRequest<'_>) -> Result<String>;

    /// Optional generated help request for a failed skill.
    fn bypass(&self, _failure: &SkillFailure) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    /// Understanding and response generation run concurrently.
    #[default]
    Parallel,
    /// The response is generated from the understood task.
    Sequential,
}

impl std::str::FromStr for PipelineMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "parallel" => Ok(Self::Parallel),
            "sequential" => Ok(Self::Sequential),
            other => Err(format!("unknown mode {other:?} (expected parallel or sequential)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handled {
    pub task: ParsedTask,
    pub response: String,
    /// Understanding failed and the rule parser answered instead.
    pub understand_fallback: bool,
    /// Response generation failed and the apology line was used.
    pub respond_fallback: bool,
}

/// Shared context for turning utterances into tasks and replies.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub registry: Registry,
    pub menu: Menu,
    pub prompts: PromptPair,
}

impl Pipeline {
    pub fn new(environment: &str, registry: Registry, menu: Menu) -> Result<Self> {
        let prompts = build_prompts(environment, &registry, &menu)?;
        Ok(Self {
            registry,
            menu,
            prompts,
        })
    }

    fn understand(&self, backend: &dyn Backend, utterance: &str) -> (ParsedTask, bool) {
        let req = UnderstandRequest {
            prompts: &self.prompts,
            utterance,
            registry: &self.registry,
            menu: &self.menu,
        };
        match backend.understand(&req) {
            Ok(t) if self.registry.check(&t).is_ok() => (t, false),
            Ok(t) => {
                log::warn!("backend returned invalid task {:?}, using rules", t.name);
                (rule_parse(utterance, &self.menu, &self.registry), true)
            }
            Err(e) => {
                log::warn!("understand failed ({e}), using rules");
                (rule_parse(utterance, &self.menu, &self.registry), true)
            }
        }
    }

    fn respond(&self, backend: &dyn Backend, req: RespondRequest<'_>) -> (String, bool) {
        match backend.respond(&req) {
            Ok(text) if !text.trim().is_empty() => (text, false),
            Ok(_) => (APOLOGY.to_string(), true),
            Err(e) => {
                log::warn!("respond failed ({e}), apologizing");
                (APOLOGY.to_string(), true)
            }
        }
    }

    /// Parses the utterance into exactly one task and produces a reply.
    pub fn handle(&self, utterance: &str, backend: &dyn Backend, mode: PipelineMode) -> Handled {
        match mode {
            PipelineMode::Parallel => {
                let req = RespondRequest {
                    prompt: &self.prompts.respond_prompt,
                    utterance,
                    registry: &self.registry,
                    menu: &self.menu,
                    understood: None,
                };
                let ((task, uf), (response, rf)) = std::thread::scope(|s| {
                    let understanding = s.spawn(|| self.understand(backend, utterance));
                    let reply = self.respond(backend, req);
                    (understanding.join().expect("understand thread panicked"), reply)
                });
                Handled {
                    task,
                    response,
                    understand_fallback: uf,
                    respond_fallback: rf,
                }
            }
            PipelineMode::Sequential => {
                let (task, uf) = self.understand(backend, utterance);
                let req = RespondRequest {
                    prompt: &self.prompts.respond_prompt,
                    utterance,
                    registry: &self.registry,
                    menu: &self.menu,
                    understood: Some(&task),
                };
                let (response, rf) = self.respond(backend, req);
                Handled {
                    task,
                    response,
                    understand_fallback: uf,
                    respond_fallback: rf,
                }
            }
        }
    }
}
