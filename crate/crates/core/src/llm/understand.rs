use crate::task::{ParsedTask, Registry};

/// Renders `task=<name>; slots=<k:v,...>`.
pub fn format_understand_line(task: &ParsedTask) -> String {
    let slots: Vec<String> = task.slots.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    format!("task={}; slots={}", task.name, slots.join(","))
}

fn parse_strict(text: &str, registry: &Registry) -> Option<ParsedTask> {
    let line = text
        .lines()
        .map(|l| l.trim().trim_matches('`').trim())
        .find(|l| l.starts_with("task="))?;
    let mut parts = line.splitn(2, ';');
    let name = parts.next()?.trim().strip_prefix("task=")?.trim();
    let mut task = ParsedTask::new(name, 1.0);
    if let Some(rest) = parts.next() {
        let slots = rest.trim().strip_prefix("slots=")?.trim();
        for pair in slots.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once(':')?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return None;
            }
            task.slots.insert(k.to_string(), v.to_string());
        }
    }
    registry.check(&task).ok()?;
    Some(task)
}

/// Decodes an understand reply. Anything that is not a well-formed line
/// naming a registered task with its slots becomes the fallback task with
/// confidence 0.
pub fn parse_understand_line(text: &str, registry: &Registry) -> ParsedTask {
    parse_strict(text, registry).unwrap_or_else(|| ParsedTask::fallback(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::default_registry;

    #[test]
    fn well_formed_line() {
        let reg = default_registry();
        let t = parse_understand_line("task=serve_order; slots=item:cola", &reg);
        assert_eq!(t, ParsedTask::new("serve_order", 1.0).with_slot("item", "cola"));
        assert_eq!(format_understand_line(&t), "task=serve_order; slots=item:cola");
        let t = parse_understand_line("Sure.\n`task=describe_menu; slots=`\n", &reg);
        assert_eq!(t.name, "describe_menu");
    }

    #[test]
    fn unknown_or_garbage_falls_back() {
        let reg = default_registry();
        for text in [
            "task=fly_to_moon; slots=",
            "I would love to help!",
            "",
            "task=serve_order; slots=",
            "task=serve_order; items=cola",
            "task=serve_order; slots=item",
        ] {
            let t = parse_understand_line(text, &reg);
            assert_eq!(t, ParsedTask::fallback(0.0), "{text:?}");
        }
    }
}
