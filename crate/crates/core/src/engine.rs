//! Dialogue controller.
//!
//! Each user turn is classified into a [`DialogueEvent`] against the expectations and
//! the focus tree, its slot effects are applied, the transition network picks the next
//! state, and that state's action selects the next system act.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{ActKind, ClosingReason, SystemSpeechAct, TemplateId};
use crate::context::{ContextError, ContextHierarchy, CycleId, FocusMode, LinguisticHistory, NodeId};
use crate::expectations::{
    generate_expectations, match_frame, ExpectationKind, ExpectationSet, MatchOutcome, MatchResult,
};
use crate::frames::{FrameError, MergeMode, SemanticFrame, Slot, SlotChange, SlotStatus, SlotStore, Value};
use crate::network::{Action, Condition, StateId, TransitionNetwork};
use crate::timetable::{Timetable, TimetableError, TimetableQuery, TrainSolution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Consecutive non-understandings that switch to isolated-word requests.
    pub nonunderstanding_limit: u32,
    pub max_turns: u32,
    /// Date assumed when the caller never mentions one.
    pub default_date: Option<Value>,
    /// Match implicature-bearing corrections.
    pub implicature: bool,
    /// Climb the focus tree when an utterance does not fit the active focus.
    pub climb: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            nonunderstanding_limit: 2,
            max_turns: 30,
            default_date: Some(Value::new("TODAY")),
            implicature: true,
            climb: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitiativeMode {
    Suggestive,
    /// Isolated-word requests after repeated non-understanding.
    Directive,
    /// Database browsing; never entered by the railway network.
    Declarative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DialogueEvent {
    NonUnderstanding,
    Confirmation { slots: Vec<Slot> },
    Denial { slots: Vec<Slot> },
    NewInfo,
    ImplicatureRepair { slots: Vec<Slot>, target_cycle: CycleId },
    DeviationClarify,
}

impl DialogueEvent {
    pub fn name(&self) -> &'static str {
        match self {
            DialogueEvent::NonUnderstanding => "NonUnderstanding",
            DialogueEvent::Confirmation { .. } => "Confirmation",
            DialogueEvent::Denial { .. } => "Denial",
            DialogueEvent::NewInfo => "NewInfo",
            DialogueEvent::ImplicatureRepair { .. } => "ImplicatureRepair",
            DialogueEvent::DeviationClarify => "DeviationClarify",
        }
    }

    pub fn is_repair(&self) -> bool {
        matches!(
            self,
            DialogueEvent::NonUnderstanding
                | DialogueEvent::Denial { .. }
                | DialogueEvent::ImplicatureRepair { .. }
                | DialogueEvent::DeviationClarify
        )
    }
}

/// Output of [`Engine::classify`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub event: DialogueEvent,
    /// The frame actually interpreted, after dropping meaningless bindings.
    pub frame: Option<SemanticFrame>,
    pub matched: Option<MatchResult>,
    /// Interpretation context chosen for the turn.
    pub context: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnTrace {
    pub turn: u32,
    pub cycle: CycleId,
    pub recognized: Option<SemanticFrame>,
    pub classification: Classification,
    pub changes: Vec<SlotChange>,
    pub from_state: String,
    pub to_state: String,
    pub act: SystemSpeechAct,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("turn limit of {limit} user turns exceeded")]
    MaxTurnsExceeded { limit: u32 },
    #[error("dialogue is closed")]
    Closed,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Timetable(#[from] TimetableError),
}

/// Per-dialogue mutable state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub tn_state: StateId,
    pub nonunderstood: u32,
    pub turn: u32,
    pub store: SlotStore,
    pub hierarchy: ContextHierarchy,
    pub history: LinguisticHistory,
    pub mode: InitiativeMode,
    pub pending: SystemSpeechAct,
    pub expectations: ExpectationSet,
    /// Cycle in which each hypothesized value entered the store.
    pub introduced: BTreeMap<Slot, CycleId>,
    /// Extras volunteered together with a confirmation; used without re-confirmation.
    pub accepted: BTreeSet<Slot>,
    pub confirmation_acts: u32,
    pub presented: Option<(TimetableQuery, Vec<TrainSolution>)>,
    pub closed: Option<ClosingReason>,
    pub last_event: Option<DialogueEvent>,
}

impl DialogueState {
    pub fn is_closed(&self) -> bool {
        self.closed.is_some()
    }

    /// Hypothesized slots still awaiting confirmation.
    pub fn pending_slots(&self) -> Vec<Slot> {
        self.store
            .hypothesized()
            .into_iter()
            .filter(|s| !self.accepted.contains(s))
            .collect()
    }

    fn settled(&self, slot: Slot) -> bool {
        match self.store.status(slot) {
            SlotStatus::Confirmed(_) => true,
            SlotStatus::Hypothesized(_) => self.accepted.contains(&slot),
            _ => false,
        }
    }
}

#[derive(Default)]
struct Effects {
    changes: Vec<SlotChange>,
    corrected: Vec<Slot>,
    denied: Vec<Slot>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    network: Arc<TransitionNetwork>,
    timetable: Arc<Timetable>,
}

impl Engine {
    pub fn new(config: EngineConfig, network: Arc<TransitionNetwork>, timetable: Arc<Timetable>) -> Engine {
        Engine {
            config,
            network,
            timetable,
        }
    }

    pub fn builtin(config: EngineConfig) -> Engine {
        Engine::new(config, Arc::new(TransitionNetwork::builtin()), Arc::new(Timetable::builtin()))
    }

    /// Same network and timetable under another configuration.
    pub fn with_config(&self, config: EngineConfig) -> Engine {
        Engine {
            config,
            network: Arc::clone(&self.network),
            timetable: Arc::clone(&self.timetable),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn network(&self) -> &TransitionNetwork {
        &self.network
    }

    pub fn timetable(&self) -> &Timetable {
        &self.timetable
    }

    /// Fresh dialogue, with the initial state's act already issued.
    pub fn start(&self) -> (DialogueState, SystemSpeechAct) {
        let initial = self.network.initial();
        let placeholder = SystemSpeechAct::open_prompt();
        let mut state = DialogueState {
            tn_state: initial,
            nonunderstood: 0,
            turn: 0,
            store: SlotStore::new(),
            hierarchy: ContextHierarchy::new(),
            history: LinguisticHistory::new(),
            mode: InitiativeMode::Suggestive,
            expectations: generate_expectations(&placeholder, CycleId(0)),
            pending: placeholder,
            introduced: BTreeMap::new(),
            accepted: BTreeSet::new(),
            confirmation_acts: 0,
            presented: None,
            closed: None,
            last_event: None,
        };
        let classification = Classification {
            event: DialogueEvent::NewInfo,
            frame: None,
            matched: None,
            context: ContextHierarchy::ROOT,
        };
        let act = self
            .perform(&mut state, self.network.state(initial).action, &classification, &Effects::default(), CycleId(0))
            .expect("opening action cannot fail");
        self.install(&mut state, act.clone(), CycleId(0))
            .expect("root focus exists");
        (state, act)
    }

    /// Interpret one recognized frame (`None` when recognition failed entirely).
    pub fn classify(&self, state: &DialogueState, recognized: Option<&SemanticFrame>) -> Classification {
        let active = state.hierarchy.active();
        let frame = recognized.map(|f| self.normalize(state, f));
        let Some(frame) = frame.filter(|f| !f.is_empty()) else {
            return Classification {
                event: DialogueEvent::NonUnderstanding,
                frame: None,
                matched: None,
                context: active,
            };
        };
        let store = &state.store;
        let matched = match_frame(&state.expectations, &frame, store);
        let conflicts = matched.conflicting_slots.clone();
        let resolve = || {
            if self.config.climb {
                state.hierarchy.resolve_context(&frame, store)
            } else {
                active
            }
        };
        let (event, context) = match &matched.outcome {
            MatchOutcome::Matched { .. } if matched.implicature => {
                let node = resolve();
                let fits = state
                    .hierarchy
                    .node(node)
                    .map(|n| n.is_consistent(&frame, store))
                    .unwrap_or(false);
                if fits {
                    (self.repair_event(state, &frame, &conflicts, node), node)
                } else {
                    (DialogueEvent::DeviationClarify, node)
                }
            }
            MatchOutcome::Matched { expectation, roles } => {
                use ExpectationKind::*;
                let event = match expectation.kind {
                    BareYes | ExplicitConfirmFocused => DialogueEvent::Confirmation {
                        slots: expectation.focused.clone(),
                    },
                    RepeatAsConfirm => DialogueEvent::Confirmation {
                        slots: roles.focused.clone(),
                    },
                    BareNo | ExplicitDenyFocused | ExplicitDenyFocusedWithRequest => DialogueEvent::Denial {
                        slots: expectation.focused.clone(),
                    },
                    ProvideRequested | ProvideRequestedPlusExtras => DialogueEvent::NewInfo,
                    CorrectFocused | CorrectFocusedPlusProvideRequested => unreachable!("implicature handled above"),
                };
                (event, active)
            }
            MatchOutcome::Deviation => {
                let node = resolve();
                if node == active {
                    (DialogueEvent::DeviationClarify, node)
                } else if conflicts.is_empty() {
                    (DialogueEvent::NewInfo, node)
                } else if self.config.implicature {
                    (self.repair_event(state, &frame, &conflicts, node), node)
                } else {
                    (DialogueEvent::DeviationClarify, node)
                }
            }
        };
        Classification {
            event,
            frame: Some(frame),
            matched: Some(matched),
            context,
        }
    }

    fn repair_event(&self, state: &DialogueState, frame: &SemanticFrame, conflicts: &[Slot], node: NodeId) -> DialogueEvent {
        let mut slots: Vec<Slot> = conflicts.to_vec();
        for (slot, _) in frame.task_bindings() {
            let refines_conflict = slot.refines().is_some_and(|city| conflicts.contains(&city));
            if refines_conflict && state.store.value(slot) != frame.get(slot) && !slots.contains(&slot) {
                slots.push(slot);
            }
        }
        slots.sort();
        let origin = state.hierarchy.node(node).map(|n| n.origin).unwrap_or(CycleId(0));
        let target_cycle = if node == ContextHierarchy::ROOT || origin == CycleId(0) {
            conflicts
                .iter()
                .find_map(|s| state.introduced.get(s).copied())
                .unwrap_or(origin)
        } else {
            origin
        };
        DialogueEvent::ImplicatureRepair { slots, target_cycle }
    }

    /// Drop bindings that cannot mean anything in the current exchange.
    fn normalize(&self, state: &DialogueState, frame: &SemanticFrame) -> SemanticFrame {
        let mut frame = frame.clone();
        let confirmable = match &state.pending.kind {
            ActKind::OpenPrompt | ActKind::RequestParam { .. } => false,
            ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => {
                !matches!(reprompt.kind, ActKind::OpenPrompt | ActKind::RequestParam { .. })
            }
            _ => true,
        };
        if !confirmable {
            frame.remove(Slot::Confirmation);
        }
        if frame.binds(Slot::DepartureStation)
            && !frame.binds(Slot::DepartureCity)
            && state.store.value(Slot::DepartureCity).is_none()
        {
            frame.remove(Slot::DepartureStation);
        }
        frame
    }

    /// Apply a classified event: slot effects, network transition, then the state's action.
    pub fn apply_event(
        &self,
        state: &DialogueState,
        classification: &Classification,
    ) -> Result<(DialogueState, SystemSpeechAct, Vec<SlotChange>), EngineError> {
        if state.is_closed() {
            return Err(EngineError::Closed);
        }
        let mut next = state.clone();
        let cycle = next.history.next_id();
        let effects = self.effects(&mut next, classification, cycle)?;
        let event = &classification.event;
        let to = self.network.next(next.tn_state, |c| match c {
            Condition::NonUnderstoodLimit => {
                *event == DialogueEvent::NonUnderstanding && next.nonunderstood >= self.config.nonunderstanding_limit
            }
            Condition::NonUnderstood => *event == DialogueEvent::NonUnderstanding,
            Condition::Implicature => matches!(event, DialogueEvent::ImplicatureRepair { .. }),
            Condition::Clarify => *event == DialogueEvent::DeviationClarify,
            Condition::Denied => matches!(event, DialogueEvent::Denial { .. }),
            Condition::TaskReady => self.ready(&next),
            Condition::Directive => next.mode == InitiativeMode::Directive,
        });
        next.tn_state = to;
        let act = self.perform(&mut next, self.network.state(to).action, classification, &effects, cycle)?;
        self.install(&mut next, act.clone(), cycle)?;
        next.last_event = Some(event.clone());
        Ok((next, act, effects.changes))
    }

    /// Classify, apply, and record one user turn.
    pub fn run_turn(
        &self,
        state: &DialogueState,
        recognized: Option<&SemanticFrame>,
    ) -> Result<(DialogueState, SystemSpeechAct, TurnTrace), EngineError> {
        if state.is_closed() {
            return Err(EngineError::Closed);
        }
        if state.turn >= self.config.max_turns {
            return Err(EngineError::MaxTurnsExceeded {
                limit: self.config.max_turns,
            });
        }
        let classification = self.classify(state, recognized);
        let (mut next, act, changes) = self.apply_event(state, &classification)?;
        next.turn = state.turn + 1;
        let cycle = next.history.record_cycle(
            &next.hierarchy,
            next.turn,
            recognized.cloned(),
            state.pending.clone(),
            state.expectations.clone(),
            classification.matched.clone(),
            classification.context,
        )?;
        let trace = TurnTrace {
            turn: next.turn,
            cycle,
            recognized: recognized.cloned(),
            classification,
            changes,
            from_state: self.network.state(state.tn_state).name.clone(),
            to_state: self.network.state(next.tn_state).name.clone(),
            act: act.clone(),
        };
        Ok((next, act, trace))
    }

    /// End the dialogue from outside (caller hung up, turn cap reached).
    pub fn terminate(&self, state: &DialogueState, reason: ClosingReason) -> (DialogueState, SystemSpeechAct) {
        let mut next = state.clone();
        let act = SystemSpeechAct::closing(reason);
        next.closed = Some(reason);
        next.expectations = generate_expectations(&act, next.history.next_id());
        next.pending = act.clone();
        (next, act)
    }

    /// Every required parameter is settled and nothing awaits confirmation.
    pub fn ready(&self, state: &DialogueState) -> bool {
        self.missing(state).is_empty() && state.pending_slots().is_empty()
    }

    /// Required parameters not yet settled, in request order.
    pub fn missing(&self, state: &DialogueState) -> Vec<Slot> {
        let mut missing = Vec::new();
        for slot in [Slot::DepartureCity, Slot::ArrivalCity] {
            if !state.settled(slot) {
                missing.push(slot);
            }
        }
        if !state.settled(Slot::DepartureTime) && !state.settled(Slot::Hour) {
            missing.push(Slot::DepartureTime);
        }
        let date_defaulted = self.config.default_date.is_some() && *state.store.status(Slot::Date) == SlotStatus::Unknown;
        if !state.settled(Slot::Date) && !date_defaulted {
            missing.push(Slot::Date);
        }
        missing
    }

    fn effects(&self, s: &mut DialogueState, c: &Classification, cycle: CycleId) -> Result<Effects, EngineError> {
        let mut fx = Effects::default();
        if c.event == DialogueEvent::NonUnderstanding {
            s.nonunderstood += 1;
            return Ok(fx);
        }
        s.nonunderstood = 0;
        let frame = c.frame.clone().unwrap_or_default();
        let roles = match c.matched.as_ref().map(|m| &m.outcome) {
            Some(MatchOutcome::Matched { roles, .. }) => Some(roles.clone()),
            _ => None,
        };
        let active = s.hierarchy.active();
        if c.event != DialogueEvent::DeviationClarify
            && s.hierarchy.node(active).is_ok_and(|n| n.mode == FocusMode::Act)
        {
            s.hierarchy.close(active)?;
        }
        match &c.event {
            DialogueEvent::NonUnderstanding | DialogueEvent::DeviationClarify => {}
            DialogueEvent::Confirmation { slots } => {
                let echo: SemanticFrame = s
                    .pending
                    .echoed()
                    .iter()
                    .filter(|(slot, _)| slots.contains(slot))
                    .map(|(slot, v)| (slot, v.clone()))
                    .collect();
                if !echo.is_empty() {
                    let (store, changes) = s.store.merge_frame(&echo, MergeMode::Confirmation)?;
                    s.store = store;
                    fx.changes.extend(changes);
                }
                let extras: Vec<Slot> = roles.as_ref().map(|r| r.extras.clone()).unwrap_or_default();
                let fresh = restrict(&frame, |slot| !echo.binds(slot));
                let introduced = self.merge_new(s, &fresh, cycle, &mut fx)?;
                for slot in introduced.slots() {
                    if extras.contains(&slot) {
                        s.accepted.insert(slot);
                    }
                }
                self.open_interpretation(s, active, introduced, cycle, FocusMode::Shift)?;
            }
            DialogueEvent::Denial { slots } => {
                let mut targets = slots.clone();
                if targets.contains(&Slot::DepartureCity) && !targets.contains(&Slot::DepartureStation) {
                    targets.push(Slot::DepartureStation);
                }
                for slot in targets {
                    if s.store.status(slot).is_hypothesized() {
                        let (store, change) = s.store.deny(slot)?;
                        s.store = store;
                        s.accepted.remove(&slot);
                        s.introduced.remove(&slot);
                        fx.changes.push(change);
                        fx.denied.push(slot);
                    }
                }
                if s.store.value(Slot::DepartureCity).is_none() {
                    let (store, change) = s.store.clear(Slot::DepartureStation);
                    s.store = store;
                    fx.changes.extend(change);
                }
                let fresh = restrict(&frame, |slot| !slots.contains(&slot) && slot.refines().is_none_or(|c| !slots.contains(&c)));
                let introduced = self.merge_new(s, &fresh, cycle, &mut fx)?;
                self.open_interpretation(s, active, introduced, cycle, FocusMode::Shift)?;
            }
            DialogueEvent::NewInfo => {
                let introduced = self.merge_new(s, &frame, cycle, &mut fx)?;
                self.open_interpretation(s, c.context, introduced, cycle, FocusMode::Shift)?;
            }
            DialogueEvent::ImplicatureRepair { slots, .. } => {
                let task = restrict(&frame, |_| true);
                let (store, changes) = s.store.merge_frame(&task, MergeMode::Correction)?;
                s.store = store;
                for ch in &changes {
                    if ch.to.is_hypothesized() {
                        s.introduced.insert(ch.slot, cycle);
                        s.accepted.remove(&ch.slot);
                    }
                }
                fx.changes.extend(changes);
                fx.corrected = slots.clone();
                let corrected: SemanticFrame = slots
                    .iter()
                    .filter_map(|slot| s.store.value(*slot).map(|v| (*slot, v.clone())))
                    .collect();
                self.open_interpretation(s, c.context, corrected, cycle, FocusMode::Restriction)?;
            }
        }
        Ok(fx)
    }

    /// Merge the task bindings of `frame` as new information; returns what changed.
    fn merge_new(&self, s: &mut DialogueState, frame: &SemanticFrame, cycle: CycleId, fx: &mut Effects) -> Result<SemanticFrame, EngineError> {
        let task = restrict(frame, |_| true);
        if task.is_empty() {
            return Ok(SemanticFrame::new());
        }
        let (store, changes) = s.store.merge_frame(&task, MergeMode::NewInfo)?;
        s.store = store;
        let mut introduced = SemanticFrame::new();
        for ch in &changes {
            if let Some(v) = ch.to.value() {
                introduced.bind(ch.slot, v.clone());
                s.introduced.insert(ch.slot, cycle);
            }
        }
        fx.changes.extend(changes);
        Ok(introduced)
    }

    fn open_interpretation(
        &self,
        s: &mut DialogueState,
        parent: NodeId,
        values: SemanticFrame,
        cycle: CycleId,
        mode: FocusMode,
    ) -> Result<(), EngineError> {
        if values.is_empty() {
            s.hierarchy.set_active(parent)?;
        } else {
            s.hierarchy.open_focus(parent, values, BTreeSet::new(), cycle, mode)?;
        }
        Ok(())
    }

    fn perform(
        &self,
        s: &mut DialogueState,
        action: Action,
        c: &Classification,
        fx: &Effects,
        cycle: CycleId,
    ) -> Result<SystemSpeechAct, EngineError> {
        let act = match action {
            Action::Greet => SystemSpeechAct::open_prompt(),
            Action::Advance => self.advance(s, cycle)?,
            Action::AdvanceDirective => {
                s.mode = InitiativeMode::Directive;
                self.advance(s, cycle)?
            }
            Action::RepromptNotUnderstood => SystemSpeechAct::not_understood(base_act(&s.pending).clone()),
            Action::ConfirmCorrection => {
                let focus: SemanticFrame = fx
                    .corrected
                    .iter()
                    .filter_map(|slot| s.store.value(*slot).map(|v| (*slot, v.clone())))
                    .collect();
                let restated_others = c
                    .frame
                    .as_ref()
                    .is_some_and(|f| f.task_slots().iter().any(|slot| *slot != Slot::ArrivalCity));
                let template = if focus.task_slots() == [Slot::ArrivalCity] {
                    if restated_others {
                        TemplateId::ArriveQuestion
                    } else {
                        TemplateId::GoingQuestion
                    }
                } else {
                    TemplateId::Elliptic
                };
                SystemSpeechAct::yes_no(focus, template)
            }
            Action::ClarifyFocus => match s.hierarchy.nearest_pending(c.context, &s.store) {
                Some((_, focus)) => self.yes_no(s, focus),
                None => base_act(&s.pending).clone(),
            },
            Action::Rerequest => {
                let required = [Slot::DepartureCity, Slot::ArrivalCity, Slot::DepartureTime, Slot::Hour, Slot::Date];
                match required.into_iter().find(|slot| fx.denied.contains(slot)) {
                    Some(slot) => SystemSpeechAct::request(slot, s.mode == InitiativeMode::Directive),
                    None => self.advance(s, cycle)?,
                }
            }
            Action::Present => self.present(s)?,
            Action::Close => {
                s.closed = Some(ClosingReason::Served);
                SystemSpeechAct::closing(ClosingReason::Served)
            }
        };
        if matches!(act.kind, ActKind::ConfirmPlusInitiative { .. } | ActKind::YesNoConfirm { .. }) {
            s.confirmation_acts += 1;
        }
        Ok(act)
    }

    fn advance(&self, s: &mut DialogueState, cycle: CycleId) -> Result<SystemSpeechAct, EngineError> {
        if self.ready(s) {
            return self.present(s);
        }
        let directive = s.mode == InitiativeMode::Directive;
        let pending = s.pending_slots();
        let open_city = [Slot::DepartureCity, Slot::ArrivalCity]
            .into_iter()
            .find(|slot| s.store.status(*slot).is_open());
        if !directive {
            if let Some(city) = open_city {
                let newest = pending
                    .iter()
                    .copied()
                    .max_by(|a, b| s.introduced.get(a).cmp(&s.introduced.get(b)).then(b.cmp(a)));
                return Ok(match newest {
                    Some(focused) => {
                        let value = s.store.value(focused).cloned().expect("pending slot has a value");
                        SystemSpeechAct::confirm_plus_initiative(focused, value, city)
                    }
                    None => SystemSpeechAct::request(city, false),
                });
            }
        }
        if !pending.is_empty() {
            let latest: Vec<Slot> = pending
                .iter()
                .copied()
                .filter(|slot| s.introduced.get(slot) == Some(&cycle) || slot.is_place())
                .collect();
            let echo = if latest.is_empty() { pending } else { latest };
            let focus: SemanticFrame = echo
                .into_iter()
                .filter_map(|slot| s.store.value(slot).map(|v| (slot, v.clone())))
                .collect();
            return Ok(self.yes_no(s, focus));
        }
        let slot = open_city
            .or_else(|| self.missing(s).into_iter().find(|slot| !s.store.status(*slot).is_hypothesized()))
            .expect("not ready implies a missing or pending slot");
        Ok(SystemSpeechAct::request(slot, directive))
    }

    fn yes_no(&self, s: &DialogueState, focus: SemanticFrame) -> SystemSpeechAct {
        let first = s.confirmation_acts == 0;
        let template = if first && focus.slots().any(Slot::is_place) {
            TemplateId::TravelQuestion
        } else {
            TemplateId::Elliptic
        };
        SystemSpeechAct::yes_no(focus, template)
    }

    fn present(&self, s: &mut DialogueState) -> Result<SystemSpeechAct, EngineError> {
        let value = |slot| s.store.value(slot).cloned();
        let query = TimetableQuery {
            departure: value(Slot::DepartureCity).expect("ready implies departure"),
            station: value(Slot::DepartureStation),
            arrival: value(Slot::ArrivalCity).expect("ready implies arrival"),
            date: value(Slot::Date)
                .or_else(|| self.config.default_date.clone())
                .expect("ready implies a date"),
            period: value(Slot::DepartureTime),
            hour: value(Slot::Hour),
        };
        let solutions = self.timetable.query(&query)?;
        s.presented = Some((query.clone(), solutions.clone()));
        Ok(SystemSpeechAct::present(query, solutions))
    }

    /// Make `act` the pending act: new expectations, and a local focus for it.
    fn install(&self, s: &mut DialogueState, act: SystemSpeechAct, cycle: CycleId) -> Result<(), EngineError> {
        let mut set = generate_expectations(&act, cycle);
        if !self.config.implicature {
            set = set.without_implicature();
        }
        let opens_focus = !matches!(
            act.kind,
            ActKind::OpenPrompt | ActKind::InformNonUnderstandingAndRequest { .. } | ActKind::Closing { .. }
        );
        if opens_focus {
            let requested: BTreeSet<Slot> = act.requested_slots().into_iter().collect();
            let parent = s.hierarchy.active();
            s.hierarchy
                .open_focus(parent, SemanticFrame::new(), requested, cycle, FocusMode::Act)?;
        }
        s.expectations = set;
        s.pending = act;
        Ok(())
    }
}

fn base_act(act: &SystemSpeechAct) -> &SystemSpeechAct {
    match &act.kind {
        ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => reprompt,
        _ => act,
    }
}

fn restrict(frame: &SemanticFrame, keep: impl Fn(Slot) -> bool) -> SemanticFrame {
    frame
        .task_bindings()
        .filter(|(slot, _)| keep(*slot))
        .map(|(slot, v)| (slot, v.clone()))
        .collect()
}
