use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::llm::Menu;

use super::Registry;

/// Separates the shared base from the per-call output instructions.
pub const FORMAT_MARKER: &str = "\n\n### Output format\n";

const UNDERSTAND_SUFFIX: &str = "Reply with exactly one line of the form \
`task=<name>; slots=<key:value,...>` naming one of the task representations above \
and filling its slots. Use casual_chat when no other task fits. Do not add any other text.";

const RESPOND_SUFFIX: &str = "Reply to the customer with one short, friendly conversational \
sentence that tells them what you will do next. Do not output task names or slots.";

/// Understand and respond prompts built on one shared base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPair {
    pub base: String,
    pub understand_prompt: String,
    pub respond_prompt: String,
}

impl PromptPair {
    /// Length of the common prefix, marker included.
    pub fn shared_len(&self) -> usize {
        self.base.len() + FORMAT_MARKER.len()
    }
}

/// Base context: environment, numbered task representations with their
/// slots and skills, and the menu.
pub fn build_prompts(environment: &str, registry: &Registry, menu: &Menu) -> Result<PromptPair> {
    if environment.trim().is_empty() {
        return Err(Error::Parameter("environment description must not be empty".into()));
    }
    if registry.is_empty() {
        return Err(Error::Parameter("registry must not be empty".into()));
    }
    let mut base = String::new();
    let _ = writeln!(base, "You are a service robot working as a waiter.");
    let _ = writeln!(base, "Environment: {}", environment.trim());
    let _ = writeln!(base);
    let _ = writeln!(base, "Task representations:");
    for (i, rep) in registry.representations.iter().enumerate() {
        if rep.description.is_empty() {
            let _ = writeln!(base, "{}. {}", i + 1, rep.signature());
        } else {
            let _ = writeln!(base, "{}. {} -- {}", i + 1, rep.signature(), rep.description);
        }
    }
    let _ = writeln!(base);
    let _ = writeln!(base, "Menu:");
    for item in &menu.items {
        if item.description.is_empty() {
            let _ = writeln!(base, "- {}", item.name);
        } else {
            let _ = writeln!(base, "- {}: {}", item.name, item.description);
        }
    }
    let base = base.trim_end().to_string();
    Ok(PromptPair {
        understand_prompt: format!("{base}{FORMAT_MARKER}{UNDERSTAND_SUFFIX}"),
        respond_prompt: format!("{base}{FORMAT_MARKER}{RESPOND_SUFFIX}"),
        base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::default_registry;

    #[test]
    fn prompts_share_prefix() {
        let p = build_prompts("a small cafe with six tables", &default_registry(), &Menu::default()).unwrap();
        let n = p.shared_len();
        assert_eq!(p.understand_prompt.as_bytes()[..n], p.respond_prompt.as_bytes()[..n]);
        assert!(p.understand_prompt[..n].ends_with(FORMAT_MARKER));
        assert_ne!(p.understand_prompt[n..], p.respond_prompt[n..]);
    }

    #[test]
    fn base_enumerates_representations() {
        let p = build_prompts("cafe", &default_registry(), &Menu::default()).unwrap();
        for i in 1..=4 {
            assert!(p.base.contains(&format!("\n{i}. ")), "missing entry {i}");
        }
        assert!(!p.base.contains("\n5. "));
        assert!(p.base.contains("serve_order(item): navigate -> detect -> grasp"));
        assert!(p.base.contains("- orange juice: "));
    }

    #[test]
    fn empty_environment_rejected() {
        assert!(matches!(
            build_prompts("  ", &default_registry(), &Menu::default()),
            Err(Error::Parameter(_))
        ));
    }
}
