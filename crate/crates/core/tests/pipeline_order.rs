mod common;

use common::{released, LatchedBackend};
use waiter_core::llm::Menu;
use waiter_core::task::{default_registry, Pipeline, PipelineMode};

fn pipeline() -> Pipeline {
    let menu = Menu::from_names(&["coffee", "cola", "cookies", "sandwich"]).unwrap();
    Pipeline::new("A small restaurant with six tables.", default_registry(), menu).unwrap()
}

fn position(events: &[String], prefix: &str) -> usize {
    events
        .iter()
        .position(|e| e.starts_with(prefix))
        .unwrap_or_else(|| panic!("no {prefix} in {events:?}"))
}

#[test]
fn parallel_reply_precedes_understanding() {
    let p = pipeline();
    for run in 0..100 {
        let backend = LatchedBackend::default();
        let out = p.handle("Could I have a coffee, please?", &backend, PipelineMode::Parallel);
        let ev = backend.events();
        assert!(!ev.iter().any(|e| e == "understand:timeout"), "run {run}: {ev:?}");
        let respond = position(&ev, "respond:");
        assert_eq!(ev[respond], "respond:latch_held=true:understood=-", "run {run}");
        assert!(respond < position(&ev, "understand:done"), "run {run}: {ev:?}");
        assert_eq!(out.task.name, "serve_order");
        assert_eq!(out.task.slot("item"), Some("coffee"));
        assert_eq!(out.response, "reply (-)");
    }
}

#[test]
fn sequential_reply_follows_understanding() {
    let p = pipeline();
    for run in 0..100 {
        let backend = released();
        let out = p.handle("Could I have a coffee, please?", &backend, PipelineMode::Sequential);
        let ev = backend.events();
        assert_eq!(
            ev,
            [
                "understand:start",
                "understand:done",
                "respond:latch_held=false:understood=serve_order"
            ],
            "run {run}"
        );
        assert_eq!(out.response, "reply (serve_order)");
    }
}

#[test]
fn both_modes_agree_on_the_task() {
    let p = pipeline();
    for u in [
        "Bring me some cookies",
        "Could you clear the table?",
        "What is on the menu?",
        "Nice weather today",
        "I would like a cola",
    ] {
        let a = p.handle(u, &LatchedBackend::default(), PipelineMode::Parallel);
        let b = p.handle(u, &released(), PipelineMode::Sequential);
        assert_eq!(a.task, b.task, "{u}");
        assert!(!a.understand_fallback && !b.understand_fallback);
    }
}
