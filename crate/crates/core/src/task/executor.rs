use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::{Backend, ParsedTask, Registry, SkillInvocation, SkillKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SkillResult {
    Ok,
    Failed(String),
}

impl SkillResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, SkillResult::Ok)
    }
}

impl fmt::Display for SkillResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkillResult::Ok => f.write_str("OK"),
            SkillResult::Failed(r) => write!(f, "FAILED({r})"),
        }
    }
}

/// Runs one bound skill against the robot (or a simulation of it).
pub trait SkillRunner {
    fn run(&mut self, invocation: &SkillInvocation) -> SkillResult;
}

impl<F: FnMut(&SkillInvocation) -> SkillResult> SkillRunner for F {
    fn run(&mut self, invocation: &SkillInvocation) -> SkillResult {
        self(invocation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillFailure {
    pub invocation: SkillInvocation,
    pub reason: String,
}

/// Offline help request for a failed skill.
pub fn bypass_help(failure: &SkillFailure) -> String {
    const GENERIC: &str = "I need a little help to continue. Could someone assist me, please?";
    if failure.reason.trim().is_empty() {
        return GENERIC.into();
    }
    let arg = failure.invocation.arg.trim();
    if arg.is_empty() && failure.invocation.kind != SkillKind::FindPlacement {
        return GENERIC.into();
    }
    match failure.invocation.kind {
        SkillKind::Detect => format!("I could not find the {arg}. Could you place it in my hand?"),
        SkillKind::Grasp => format!("I could not pick up the {arg}. Could you hand it to me?"),
        SkillKind::Place => format!("I could not put down the {arg}. Could you take it from my hand?"),
        SkillKind::Navigate => format!("I cannot get to {arg}. Could you clear the way for me?"),
        SkillKind::FindPlacement => {
            "I cannot find a free spot on the table. Could you make a little room?".into()
        }
        SkillKind::HandOver => format!("I could not receive the {arg}. Could you try handing it to me again?"),
        SkillKind::Speak => GENERIC.into(),
    }
}

/// Produces the help sentence spoken when a skill fails.
pub trait HelpSource {
    fn help_message(&self, failure: &SkillFailure) -> String;
}

/// Fixed templates only.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateHelp;

impl HelpSource for TemplateHelp {
    fn help_message(&self, failure: &SkillFailure) -> String {
        bypass_help(failure)
    }
}

/// Asks a backend first and falls back to the templates.
pub struct BackendHelp<'a>(pub &'a dyn Backend);

impl HelpSource for BackendHelp<'_> {
    fn help_message(&self, failure: &SkillFailure) -> String {
        self.0.bypass(failure).unwrap_or_else(|| bypass_help(failure))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeState {
    Completed,
    CompletedWithAssist,
    Failed,
}

impl fmt::Display for OutcomeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeState::Completed => "COMPLETED",
            OutcomeState::CompletedWithAssist => "COMPLETED_WITH_ASSIST",
            OutcomeState::Failed => "FAILED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub invocation: SkillInvocation,
    pub result: SkillResult,
    /// Spliced in by a recovery rather than part of the task definition.
    pub recovery: bool,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.invocation, self.result)?;
        if self.recovery {
            f.write_str(" [recovery]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: String,
    pub state: OutcomeState,
    pub trace: Vec<TraceEntry>,
    pub help_messages: Vec<String>,
}

impl TaskOutcome {
    /// One line per executed skill followed by the final state.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.trace {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        for h in &self.help_messages {
            s.push_str("help: ");
            s.push_str(h);
            s.push('\n');
        }
        s.push_str(&format!("{} {}\n", self.task, self.state));
        s
    }
}

/// Runs the task's skills in order.
///
/// `context` supplies placeholder values beyond the task's slots (tables,
/// canned sentences). A failed skill with a recovery entry triggers a help
/// message, bound as `{help}`, and the recovery skills run in its place;
/// any other failure ends the task.
pub fn execute(
    task: &ParsedTask,
    registry: &Registry,
    context: &BTreeMap<String, String>,
    runner: &mut dyn SkillRunner,
    help: &dyn HelpSource,
) -> Result<TaskOutcome> {
    let rep = registry.check(task)?;
    let mut values = context.clone();
    values.extend(task.slots.iter().map(|(k, v)| (k.clone(), v.clone())));
    let steps = rep
        .skills
        .iter()
        .map(|s| s.bind(&values))
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = TaskOutcome {
        task: rep.name.clone(),
        state: OutcomeState::Completed,
        trace: Vec::new(),
        help_messages: Vec::new(),
    };
    for inv in steps {
        let result = runner.run(&inv);
        let failed = match &result {
            SkillResult::Ok => None,
            SkillResult::Failed(reason) => Some(reason.clone()),
        };
        outcome.trace.push(TraceEntry {
            invocation: inv.clone(),
            result,
            recovery: false,
        });
        let Some(reason) = failed else { continue };
        let Some(recovery) = rep.recovery.get(&inv.kind) else {
            outcome.state = OutcomeState::Failed;
            return Ok(outcome);
        };
        let message = help.help_message(&SkillFailure {
            invocation: inv,
            reason,
        });
        outcome.help_messages.push(message.clone());
        let mut with_help = values.clone();
        with_help.insert("help".into(), message);
        for spec in recovery {
            let rinv = spec.bind(&with_help)?;
            let result = runner.run(&rinv);
            let ok = result.is_ok();
            outcome.trace.push(TraceEntry {
                invocation: rinv,
                result,
                recovery: true,
            });
            if !ok {
                outcome.state = OutcomeState::Failed;
                return Ok(outcome);
            }
        }
        outcome.state = OutcomeState::CompletedWithAssist;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::default_registry;

    fn ctx() -> BTreeMap<String, String> {
        [
            ("kitchen_table", "table_0"),
            ("caller_table", "table_3"),
            ("confirmation", "Here is your orange juice."),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    fn order() -> ParsedTask {
        ParsedTask::new("serve_order", 1.0).with_slot("item", "orange juice")
    }

    #[test]
    fn all_ok_completes_in_definition_order() {
        let reg = default_registry();
        let mut runner = |_: &SkillInvocation| SkillResult::Ok;
        let out = execute(&order(), &reg, &ctx(), &mut runner, &TemplateHelp).unwrap();
        assert_eq!(out.state, OutcomeState::Completed);
        let kinds: Vec<SkillKind> = out.trace.iter().map(|e| e.invocation.kind).collect();
        let want: Vec<SkillKind> = reg.get("serve_order").unwrap().skills.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, want);
        assert!(out.help_messages.is_empty());
    }

    #[test]
    fn detect_failure_splices_hand_over() {
        let reg = default_registry();
        let mut failed_once = false;
        let mut runner = |inv: &SkillInvocation| {
            if inv.kind == SkillKind::Detect && !failed_once {
                failed_once = true;
                SkillResult::Failed("not found".into())
            } else {
                SkillResult::Ok
            }
        };
        let out = execute(&order(), &reg, &ctx(), &mut runner, &TemplateHelp).unwrap();
        assert_eq!(out.state, OutcomeState::CompletedWithAssist);
        assert_eq!(
            out.help_messages,
            ["I could not find the orange juice. Could you place it in my hand?"]
        );
        assert_eq!(out.trace[2].invocation.kind, SkillKind::Speak);
        assert_eq!(out.trace[2].invocation.arg, out.help_messages[0]);
        assert_eq!(out.trace[3].invocation.to_string(), "hand_over(orange juice)");
        assert!(out.trace[3].recovery);
        assert_eq!(out.trace.len(), 9);
    }

    #[test]
    fn failure_without_recovery_aborts() {
        let reg = default_registry();
        let mut runner = |inv: &SkillInvocation| {
            if inv.kind == SkillKind::Navigate {
                SkillResult::Failed("blocked".into())
            } else {
                SkillResult::Ok
            }
        };
        let out = execute(&order(), &reg, &ctx(), &mut runner, &TemplateHelp).unwrap();
        assert_eq!(out.state, OutcomeState::Failed);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn missing_context_is_an_error() {
        let reg = default_registry();
        let mut runner = |_: &SkillInvocation| SkillResult::Ok;
        assert!(execute(&order(), &reg, &BTreeMap::new(), &mut runner, &TemplateHelp).is_err());
    }

    #[test]
    fn help_templates() {
        let f = |kind, arg: &str, reason: &str| SkillFailure {
            invocation: SkillInvocation { kind, arg: arg.into() },
            reason: reason.into(),
        };
        assert_eq!(
            bypass_help(&f(SkillKind::Detect, "orange juice", "not found")),
            "I could not find the orange juice. Could you place it in my hand?"
        );
        assert_eq!(
            bypass_help(&f(SkillKind::Grasp, "cola", "slipped")),
            "I could not pick up the cola. Could you hand it to me?"
        );
        let generic = bypass_help(&f(SkillKind::Detect, "cola", ""));
        assert!(!generic.is_empty());
        assert!(!generic.contains('{'));
    }
}
