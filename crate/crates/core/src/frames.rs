//! Railway task vocabulary: slots, values, utterance frames and the slot-status lattice.
//!
//! A [`SemanticFrame`] is what one user turn means after recognition and parsing.
//! The [`SlotStore`] accumulates the task parameters across turns and records, for
//! each slot, whether its value is only hypothesized or has been confirmed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lexical class of a value, used for word-class predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordClass {
    PlaceName,
    DateExpr,
    TimeExpr,
    YesNoAdverb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slot {
    DepartureCity,
    ArrivalCity,
    DepartureStation,
    Date,
    DepartureTime,
    Hour,
    Confirmation,
}

impl Slot {
    pub const ALL: [Slot; 7] = [
        Slot::DepartureCity,
        Slot::ArrivalCity,
        Slot::DepartureStation,
        Slot::Date,
        Slot::DepartureTime,
        Slot::Hour,
        Slot::Confirmation,
    ];

    /// Slots that carry task parameters (everything but `Confirmation`).
    pub const TASK: [Slot; 6] = [
        Slot::DepartureCity,
        Slot::ArrivalCity,
        Slot::DepartureStation,
        Slot::Date,
        Slot::DepartureTime,
        Slot::Hour,
    ];

    pub fn word_class(self) -> WordClass {
        match self {
            Slot::DepartureCity | Slot::ArrivalCity | Slot::DepartureStation => WordClass::PlaceName,
            Slot::Date => WordClass::DateExpr,
            Slot::DepartureTime | Slot::Hour => WordClass::TimeExpr,
            Slot::Confirmation => WordClass::YesNoAdverb,
        }
    }

    /// Frame label, e.g. `arrival-city`.
    pub fn label(self) -> &'static str {
        match self {
            Slot::DepartureCity => "departure-city",
            Slot::ArrivalCity => "arrival-city",
            Slot::DepartureStation => "departure-station",
            Slot::Date => "date",
            Slot::DepartureTime => "departure-time",
            Slot::Hour => "hour",
            Slot::Confirmation => "confirmation",
        }
    }

    pub fn from_label(label: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.label() == label)
    }

    /// The slot this one refines. A station only makes sense with a departure city.
    pub fn refines(self) -> Option<Slot> {
        match self {
            Slot::DepartureStation => Some(Slot::DepartureCity),
            _ => None,
        }
    }

    /// Whether binding `self` answers a request for `requested`.
    ///
    /// Departure time may be given either as a period of the day or as an hour.
    pub fn answers(self, requested: Slot) -> bool {
        self == requested
            || matches!(
                (self, requested),
                (Slot::Hour, Slot::DepartureTime) | (Slot::DepartureTime, Slot::Hour)
            )
    }

    pub fn is_place(self) -> bool {
        self.word_class() == WordClass::PlaceName
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A normalized value token: uppercase, words joined with `-`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(String);

impl Value {
    pub fn new(raw: &str) -> Value {
        let token = raw
            .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
            .filter(|w| !w.is_empty())
            .map(|w| w.to_uppercase())
            .collect::<Vec<_>>()
            .join("-");
        Value(token)
    }

    pub fn yes() -> Value {
        Value("YES".to_string())
    }

    pub fn no() -> Value {
        Value("NO".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `PISA-AEROPORTO` -> `Pisa Aeroporto`.
    pub fn display_name(&self) -> String {
        self.0
            .split('-')
            .map(|w| {
                let mut chars = w.chars();
                match chars.next() {
                    Some(first) => first.to_string() + &chars.as_str().to_lowercase(),
                    None => String::new(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Value {
    fn from(raw: &str) -> Value {
        Value::new(raw)
    }
}

/// Parameter-value content of one utterance. At most one value per slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticFrame {
    bindings: BTreeMap<Slot, Value>,
}

impl SemanticFrame {
    pub fn new() -> SemanticFrame {
        SemanticFrame::default()
    }

    pub fn with(mut self, slot: Slot, value: impl Into<Value>) -> SemanticFrame {
        self.bind(slot, value.into());
        self
    }

    pub fn bind(&mut self, slot: Slot, value: Value) -> Option<Value> {
        self.bindings.insert(slot, value)
    }

    pub fn remove(&mut self, slot: Slot) -> Option<Value> {
        self.bindings.remove(&slot)
    }

    pub fn get(&self, slot: Slot) -> Option<&Value> {
        self.bindings.get(&slot)
    }

    pub fn binds(&self, slot: Slot) -> bool {
        self.bindings.contains_key(&slot)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Slot, &Value)> {
        self.bindings.iter().map(|(s, v)| (*s, v))
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.bindings.keys().copied()
    }

    /// Bindings other than `Confirmation`.
    pub fn task_bindings(&self) -> impl Iterator<Item = (Slot, &Value)> {
        self.iter().filter(|(s, _)| *s != Slot::Confirmation)
    }

    pub fn task_slots(&self) -> Vec<Slot> {
        self.task_bindings().map(|(s, _)| s).collect()
    }

    /// `Some(true)` for a yes, `Some(false)` for a no.
    pub fn confirmation(&self) -> Option<bool> {
        self.get(Slot::Confirmation).map(|v| v.as_str() == "YES")
    }

    pub fn without(&self, slot: Slot) -> SemanticFrame {
        let mut copy = self.clone();
        copy.remove(slot);
        copy
    }
}

impl fmt::Display for SemanticFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self
            .iter()
            .map(|(s, v)| format!("{}={}", s.label(), v))
            .collect::<Vec<_>>()
            .join(" ");
        write!(f, "<{inner}>")
    }
}

impl FromIterator<(Slot, Value)> for SemanticFrame {
    fn from_iter<I: IntoIterator<Item = (Slot, Value)>>(iter: I) -> Self {
        SemanticFrame {
            bindings: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum SlotStatus {
    #[default]
    Unknown,
    Hypothesized(Value),
    Confirmed(Value),
    Denied,
}

impl SlotStatus {
    pub fn value(&self) -> Option<&Value> {
        match self {
            SlotStatus::Hypothesized(v) | SlotStatus::Confirmed(v) => Some(v),
            SlotStatus::Unknown | SlotStatus::Denied => None,
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, SlotStatus::Unknown | SlotStatus::Denied)
    }

    pub fn is_confirmed(&self) -> bool {
        matches!(self, SlotStatus::Confirmed(_))
    }

    pub fn is_hypothesized(&self) -> bool {
        matches!(self, SlotStatus::Hypothesized(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    NewInfo,
    Confirmation,
    Correction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotChange {
    pub slot: Slot,
    pub from: SlotStatus,
    pub to: SlotStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("cannot merge an empty frame")]
    EmptyFrame,
    #[error("illegal {mode:?} transition on {slot} from {from:?} with value {value}")]
    IllegalTransition {
        slot: Slot,
        from: SlotStatus,
        value: Value,
        mode: MergeMode,
    },
    #[error("cannot deny {slot} in status {from:?}")]
    IllegalDenial { slot: Slot, from: SlotStatus },
    #[error("departure station bound without a departure city")]
    StationWithoutCity,
}

/// Per-slot status for every task slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotStore {
    slots: BTreeMap<Slot, SlotStatus>,
}

impl SlotStore {
    pub fn new() -> SlotStore {
        SlotStore::default()
    }

    pub fn status(&self, slot: Slot) -> &SlotStatus {
        const UNKNOWN: SlotStatus = SlotStatus::Unknown;
        self.slots.get(&slot).unwrap_or(&UNKNOWN)
    }

    pub fn value(&self, slot: Slot) -> Option<&Value> {
        self.status(slot).value()
    }

    /// Builder used by tests and fixtures; bypasses the lattice.
    pub fn with_status(mut self, slot: Slot, status: SlotStatus) -> SlotStore {
        self.slots.insert(slot, status);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (Slot, &SlotStatus)> {
        Slot::TASK.into_iter().map(move |s| (s, self.status(s)))
    }

    pub fn hypothesized(&self) -> Vec<Slot> {
        Slot::TASK
            .into_iter()
            .filter(|s| self.status(*s).is_hypothesized())
            .collect()
    }

    fn time_confirmed(&self) -> bool {
        self.status(Slot::DepartureTime).is_confirmed() || self.status(Slot::Hour).is_confirmed()
    }

    /// Required parameters not yet confirmed, in request order.
    pub fn missing_required(&self) -> Vec<Slot> {
        let mut missing = Vec::new();
        for slot in [Slot::DepartureCity, Slot::ArrivalCity] {
            if !self.status(slot).is_confirmed() {
                missing.push(slot);
            }
        }
        if !self.time_confirmed() {
            missing.push(Slot::DepartureTime);
        }
        if !self.status(Slot::Date).is_confirmed() {
            missing.push(Slot::Date);
        }
        missing
    }

    /// Every required slot confirmed: both cities, the date, and a departure time or hour.
    pub fn is_complete(&self) -> bool {
        self.missing_required().is_empty()
    }

    /// Apply the bindings of `frame` under `mode`. `Confirmation` bindings are ignored.
    pub fn merge_frame(
        &self,
        frame: &SemanticFrame,
        mode: MergeMode,
    ) -> Result<(SlotStore, Vec<SlotChange>), FrameError> {
        if frame.is_empty() {
            return Err(FrameError::EmptyFrame);
        }
        let mut next = self.clone();
        let mut changes = Vec::new();
        for (slot, value) in frame.task_bindings() {
            let from = self.status(slot).clone();
            let to = transition(&from, value, mode).ok_or_else(|| FrameError::IllegalTransition {
                slot,
                from: from.clone(),
                value: value.clone(),
                mode,
            })?;
            if to != from {
                changes.push(SlotChange {
                    slot,
                    from,
                    to: to.clone(),
                });
                next.slots.insert(slot, to);
            }
        }
        next.check_station()?;
        Ok((next, changes))
    }

    /// Hypothesized -> Denied after a bare or explicit denial.
    pub fn deny(&self, slot: Slot) -> Result<(SlotStore, SlotChange), FrameError> {
        let from = self.status(slot).clone();
        if !from.is_hypothesized() {
            return Err(FrameError::IllegalDenial { slot, from });
        }
        let mut next = self.clone();
        next.slots.insert(slot, SlotStatus::Denied);
        Ok((
            next,
            SlotChange {
                slot,
                from,
                to: SlotStatus::Denied,
            },
        ))
    }

    /// Forget a value outright, whatever its status.
    pub fn clear(&self, slot: Slot) -> (SlotStore, Option<SlotChange>) {
        let from = self.status(slot).clone();
        if from == SlotStatus::Unknown {
            return (self.clone(), None);
        }
        let mut next = self.clone();
        next.slots.remove(&slot);
        let change = SlotChange {
            slot,
            from,
            to: SlotStatus::Unknown,
        };
        (next, Some(change))
    }

    fn check_station(&self) -> Result<(), FrameError> {
        if self.value(Slot::DepartureStation).is_some() && self.value(Slot::DepartureCity).is_none() {
            return Err(FrameError::StationWithoutCity);
        }
        Ok(())
    }
}

fn transition(from: &SlotStatus, value: &Value, mode: MergeMode) -> Option<SlotStatus> {
    use SlotStatus::*;
    match (mode, from) {
        (MergeMode::NewInfo, Unknown | Denied) => Some(Hypothesized(value.clone())),
        (MergeMode::NewInfo, Hypothesized(v) | Confirmed(v)) if v == value => Some(from.clone()),
        (MergeMode::NewInfo, _) => None,

        (MergeMode::Confirmation, Hypothesized(v)) if v == value => Some(Confirmed(v.clone())),
        (MergeMode::Confirmation, Confirmed(v)) if v == value => Some(from.clone()),
        (MergeMode::Confirmation, _) => None,

        (MergeMode::Correction, Unknown | Denied) => Some(Hypothesized(value.clone())),
        (MergeMode::Correction, Hypothesized(v)) if v == value => Some(Confirmed(v.clone())),
        (MergeMode::Correction, Confirmed(v)) if v == value => Some(from.clone()),
        (MergeMode::Correction, Hypothesized(_) | Confirmed(_)) => Some(Hypothesized(value.clone())),
    }
}

/// Slots where `frame` carries a value different from a hypothesized or confirmed one.
pub fn frame_conflicts(store: &SlotStore, frame: &SemanticFrame) -> Vec<Slot> {
    frame
        .task_bindings()
        .filter(|(slot, value)| store.value(*slot).is_some_and(|held| held != *value))
        .map(|(slot, _)| slot)
        .collect()
}
