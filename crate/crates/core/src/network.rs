//! Declarative transition network driving the dialogue controller.
//!
//! States, arcs, condition names and action names are read from TOML and bound to
//! the built-in [`Condition`] and [`Action`] libraries at load time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LoadError;

const BUILTIN_NETWORK: &str = include_str!("../data/network.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    NonUnderstoodLimit,
    NonUnderstood,
    Implicature,
    Clarify,
    Denied,
    TaskReady,
    Directive,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::NonUnderstoodLimit,
        Condition::NonUnderstood,
        Condition::Implicature,
        Condition::Clarify,
        Condition::Denied,
        Condition::TaskReady,
        Condition::Directive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::NonUnderstoodLimit => "nonunderstood_limit",
            Condition::NonUnderstood => "nonunderstood",
            Condition::Implicature => "implicature",
            Condition::Clarify => "clarify",
            Condition::Denied => "denied",
            Condition::TaskReady => "task_ready",
            Condition::Directive => "directive",
        }
    }

    pub fn from_name(name: &str) -> Option<Condition> {
        Condition::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Greet,
    Advance,
    AdvanceDirective,
    RepromptNotUnderstood,
    ConfirmCorrection,
    ClarifyFocus,
    Rerequest,
    Present,
    Close,
}

impl Action {
    pub const ALL: [Action; 9] = [
        Action::Greet,
        Action::Advance,
        Action::AdvanceDirective,
        Action::RepromptNotUnderstood,
        Action::ConfirmCorrection,
        Action::ClarifyFocus,
        Action::Rerequest,
        Action::Present,
        Action::Close,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Greet => "greet",
            Action::Advance => "advance",
            Action::AdvanceDirective => "advance_directive",
            Action::RepromptNotUnderstood => "reprompt_not_understood",
            Action::ConfirmCorrection => "confirm_correction",
            Action::ClarifyFocus => "clarify_focus",
            Action::Rerequest => "rerequest",
            Action::Present => "present",
            Action::Close => "close",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub when: Option<Condition>,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TnState {
    pub name: String,
    pub action: Action,
    pub arcs: Vec<Arc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionNetwork {
    states: Vec<TnState>,
    initial: StateId,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    initial: String,
    state: Vec<RawState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    name: String,
    action: String,
    arcs: Vec<RawArc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    when: Option<String>,
    to: String,
}

impl TransitionNetwork {
    pub fn from_toml(text: &str) -> Result<TransitionNetwork, LoadError> {
        let raw: RawNetwork = toml::from_str(text)?;
        let mut ids = BTreeMap::new();
        for (i, s) in raw.state.iter().enumerate() {
            if ids.insert(s.name.as_str(), StateId(i)).is_some() {
                return Err(invalid(format!("duplicate state {}", s.name)));
            }
        }
        let lookup = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| invalid(format!("unknown target state {name}")))
        };
        let mut states = Vec::with_capacity(raw.state.len());
        for s in &raw.state {
            let action = Action::from_name(&s.action)
                .ok_or_else(|| invalid(format!("state {}: unknown action {}", s.name, s.action)))?;
            let mut arcs = Vec::with_capacity(s.arcs.len());
            for a in &s.arcs {
                let when = match &a.when {
                    Some(c) => Some(
                        Condition::from_name(c)
                            .ok_or_else(|| invalid(format!("state {}: unknown condition {c}", s.name)))?,
                    ),
                    None => None,
                };
                arcs.push(Arc {
                    when,
                    to: lookup(&a.to)?,
                });
            }
            let defaults = arcs.iter().filter(|a| a.when.is_none()).count();
            if defaults != 1 {
                return Err(invalid(format!("state {} has {defaults} default arcs", s.name)));
            }
            if arcs.last().is_some_and(|a| a.when.is_some()) {
                return Err(invalid(format!("state {}: default arc must come last", s.name)));
            }
            states.push(TnState {
                name: s.name.clone(),
                action,
                arcs,
            });
        }
        Ok(TransitionNetwork {
            initial: lookup(&raw.initial)?,
            states,
        })
    }

    pub fn load(path: &Path) -> Result<TransitionNetwork, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
        TransitionNetwork::from_toml(&text)
    }

    pub fn builtin() -> TransitionNetwork {
        TransitionNetwork::from_toml(BUILTIN_NETWORK).expect("builtin network is valid")
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state(&self, id: StateId) -> &TnState {
        &self.states[id.0]
    }

    pub fn states(&self) -> &[TnState] {
        &self.states
    }

    pub fn find(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name).map(StateId)
    }

    /// Follow the first arc of `from` whose condition holds, else the default arc.
    pub fn next(&self, from: StateId, mut holds: impl FnMut(Condition) -> bool) -> StateId {
        let state = self.state(from);
        state
            .arcs
            .iter()
            .find(|a| a.when.is_none_or(&mut holds))
            .map(|a| a.to)
            .expect("validated network has a default arc")
    }
}

fn invalid(msg: String) -> LoadError {
    LoadError::Invalid(msg)
}
