use super::{normalize, Menu};
use crate::error::Result;
use crate::task::{Backend, ParsedTask, Registry, RespondRequest, UnderstandRequest, FALLBACK_TASK};

const ORDER_CUES: &[&str] = &[
    "bring", "serve", "can i have", "could i have", "can i get", "could i get", "i'd like", "i would like",
    "i'll have", "i want", "get me", "give me", "order",
];
const CLEAN_CUES: &[&str] = &["clean", "clear", "take away", "tidy"];
const MENU_CUES: &[&str] = &[
    "menu", "what do you have", "what do you serve", "what is available", "what's available", "recommend",
];

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(|c| c.is_alphanumeric() || c == '\'')
}

/// Positions where `needle` starts on a word boundary.
fn word_starts<'a>(hay: &'a str, needle: &'a str) -> impl Iterator<Item = usize> + 'a {
    hay.match_indices(needle)
        .map(|(i, _)| i)
        .filter(move |&i| !is_word_char(hay[..i].chars().next_back()))
}

fn has_cue(hay: &str, cues: &[&str]) -> bool {
    cues.iter().any(|c| word_starts(hay, c).next().is_some())
}

/// Whole-word (optionally plural) occurrence.
fn mentions(hay: &str, item: &str) -> bool {
    word_starts(hay, item).any(|i| {
        let tail = &hay[i + item.len()..];
        let tail = tail.strip_prefix("es").or_else(|| tail.strip_prefix('s')).filter(|t| {
            !is_word_char(t.chars().next())
        }).unwrap_or(tail);
        !is_word_char(tail.chars().next())
    })
}

/// Longest menu item named in the utterance; earlier menu entries win ties.
fn find_item<'m>(text: &str, menu: &'m Menu) -> Option<&'m str> {
    let mut best: Option<(usize, &str)> = None;
    for name in menu.names() {
        let key = normalize(name);
        if mentions(text, &key) && best.is_none_or(|(len, _)| key.len() > len) {
            best = Some((key.len(), name));
        }
    }
    best.map(|(_, n)| n)
}

fn resolve(registry: &Registry, task: ParsedTask) -> ParsedTask {
    if registry.check(&task).is_ok() {
        task
    } else {
        ParsedTask::fallback(0.5)
    }
}

/// Pattern-table parser: orders naming a menu item, cleaning requests,
/// menu questions, and everything else as small talk.
pub fn rule_parse(utterance: &str, menu: &Menu, registry: &Registry) -> ParsedTask {
    let text = normalize(utterance);
    if has_cue(&text, ORDER_CUES) {
        if let Some(item) = find_item(&text, menu) {
            return resolve(registry, ParsedTask::new("serve_order", 1.0).with_slot("item", item));
        }
    }
    if has_cue(&text, CLEAN_CUES) {
        return resolve(registry, ParsedTask::new("clean_table", 1.0));
    }
    if has_cue(&text, MENU_CUES) {
        return resolve(registry, ParsedTask::new("describe_menu", 1.0));
    }
    ParsedTask::new(FALLBACK_TASK, 0.5)
}

/// Spoken reply for a task, used by the rule backend.
pub(crate) fn reply_for(task: &ParsedTask, menu: &Menu) -> String {
    match (task.name.as_str(), task.slot("item")) {
        ("serve_order", Some(item)) => format!("Certainly! I will bring your {item} right away."),
        ("clean_table", _) => "Sure, I will clear your table now.".into(),
        ("describe_menu", _) => menu.description(),
        _ => "Thank you for talking with me! Please call me whenever you would like to order.".into(),
    }
}

/// Deterministic offline backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl Backend for RuleBackend {
    fn understand(&self, req: &UnderstandRequest<'_>) -> Result<ParsedTask> {
        Ok(rule_parse(req.utterance, req.menu, req.registry))
    }

    fn respond(&self, req: &RespondRequest<'_>) -> Result<String> {
        let task = match req.understood {
            Some(t) => t.clone(),
            None => rule_parse(req.utterance, req.menu, req.registry),
        };
        Ok(reply_for(&task, req.menu))
    }
}
