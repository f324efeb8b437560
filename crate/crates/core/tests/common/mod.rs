#![allow(dead_code)]

use ferrovia_core::acts::ActKind;
use ferrovia_core::engine::{DialogueEvent, Engine, EngineConfig, TurnTrace};
use ferrovia_core::{SemanticFrame, Slot, SystemSpeechAct, Value};

pub fn frame(pairs: &[(Slot, &str)]) -> SemanticFrame {
    pairs.iter().map(|(s, v)| (*s, Value::new(v))).collect()
}

/// A scripted exchange: recognized user frames (`None` = nothing recognized).
pub struct Script {
    pub name: &'static str,
    pub turns: Vec<Option<SemanticFrame>>,
}

pub struct Replay {
    pub opening: SystemSpeechAct,
    pub acts: Vec<SystemSpeechAct>,
    pub traces: Vec<TurnTrace>,
}

impl Replay {
    pub fn events(&self) -> Vec<&DialogueEvent> {
        self.traces.iter().map(|t| &t.classification.event).collect()
    }

    pub fn texts(&self) -> Vec<String> {
        self.acts.iter().map(SystemSpeechAct::render).collect()
    }
}

pub fn replay(engine: &Engine, script: &Script) -> Replay {
    let (mut state, opening) = engine.start();
    let mut acts = Vec::new();
    let mut traces = Vec::new();
    for turn in &script.turns {
        let (next, act, trace) = engine
            .run_turn(&state, turn.as_ref())
            .unwrap_or_else(|e| panic!("{}: {e}", script.name));
        state = next;
        acts.push(act);
        traces.push(trace);
    }
    Replay {
        opening,
        acts,
        traces,
    }
}

pub fn default_engine() -> Engine {
    Engine::builtin(EngineConfig::default())
}

pub fn non_understanding() -> Script {
    Script {
        name: "non-understanding",
        turns: vec![
            None,
            Some(frame(&[
                (Slot::Confirmation, "NO"),
                (Slot::DepartureCity, "MILANO"),
                (Slot::ArrivalCity, "ROMA"),
                (Slot::DepartureTime, "EVENING"),
            ])),
            Some(frame(&[(Slot::Confirmation, "YES"), (Slot::Hour, "EIGHT")])),
        ],
    }
}

pub fn substitution() -> Script {
    Script {
        name: "substitution",
        turns: vec![
            Some(frame(&[(Slot::ArrivalCity, "ARONA")])),
            Some(frame(&[(Slot::ArrivalCity, "ROMA")])),
        ],
    }
}

pub fn repetition() -> Script {
    Script {
        name: "repetition",
        turns: vec![
            Some(frame(&[(Slot::DepartureCity, "MILANO"), (Slot::ArrivalCity, "ARONA")])),
            Some(frame(&[(Slot::DepartureCity, "MILANO"), (Slot::ArrivalCity, "ROMA")])),
        ],
    }
}

pub fn later_repair() -> Script {
    Script {
        name: "later-repair",
        turns: vec![
            Some(frame(&[
                (Slot::DepartureCity, "PISA-AEROPORTO"),
                (Slot::DepartureTime, "MORNING"),
                (Slot::Date, "TODAY"),
            ])),
            Some(frame(&[(Slot::ArrivalCity, "FIRENZE")])),
            Some(frame(&[
                (Slot::DepartureCity, "PISA"),
                (Slot::DepartureStation, "CENTRALE"),
                (Slot::ArrivalCity, "FIRENZE"),
            ])),
            Some(frame(&[(Slot::Confirmation, "YES")])),
        ],
    }
}

pub fn is_yes_no_over(act: &SystemSpeechAct, expected: &SemanticFrame) -> bool {
    matches!(&act.kind, ActKind::YesNoConfirm { focus } if focus == expected)
}
