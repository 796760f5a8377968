//! Task representations, the understand/respond pipeline and the skill
//! executor with help-request recovery.

mod executor;
mod pipeline;
mod prompt;
mod registry;

pub use executor::{
    bypass_help, execute, BackendHelp, HelpSource, OutcomeState, SkillFailure, SkillResult, SkillRunner,
    TaskOutcome, TemplateHelp, TraceEntry,
};
pub use pipeline::{
    Backend, Handled, Pipeline, PipelineMode, RespondRequest, UnderstandRequest, APOLOGY,
};
pub use prompt::{build_prompts, PromptPair, FORMAT_MARKER};
pub use registry::{
    default_registry, ParsedTask, Registry, SkillInvocation, SkillKind, SkillSpec, TaskRepresentation,
    FALLBACK_TASK,
};
