//! Expectations about the next user turn.
//!
//! Every system act installs an [`ExpectationSet`]: predictions of what the caller
//! will talk about (which also yield word-class predictions for the recognizer) and
//! pragmatic expectations about how the turn relates to earlier ones. Two of the
//! pragmatic expectations are affirmative corrections of a value the system has just
//! echoed; matching one of them means the caller is signalling a misunderstanding by
//! implicature rather than by an explicit "no".

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::acts::{ActKind, SystemSpeechAct};
use crate::context::CycleId;
use crate::frames::{frame_conflicts, SemanticFrame, Slot, SlotStore, WordClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationKind {
    BareYes,
    BareNo,
    ExplicitConfirmFocused,
    ExplicitDenyFocusedWithRequest,
    ExplicitDenyFocused,
    CorrectFocusedPlusProvideRequested,
    CorrectFocused,
    RepeatAsConfirm,
    ProvideRequestedPlusExtras,
    ProvideRequested,
}

impl ExpectationKind {
    /// Lower is tried first. Yes/no adverbs are unambiguous; corrections outrank plain
    /// provision so that a conflicting value is never merged silently.
    pub fn priority(self) -> u8 {
        match self {
            ExpectationKind::BareYes | ExpectationKind::BareNo => 0,
            ExpectationKind::ExplicitConfirmFocused => 1,
            ExpectationKind::ExplicitDenyFocusedWithRequest => 2,
            ExpectationKind::ExplicitDenyFocused => 3,
            ExpectationKind::CorrectFocusedPlusProvideRequested => 4,
            ExpectationKind::CorrectFocused => 5,
            ExpectationKind::RepeatAsConfirm => 6,
            ExpectationKind::ProvideRequestedPlusExtras => 7,
            ExpectationKind::ProvideRequested => 8,
        }
    }

    pub fn carries_implicature(self) -> bool {
        matches!(
            self,
            ExpectationKind::CorrectFocusedPlusProvideRequested | ExpectationKind::CorrectFocused
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expectation {
    pub kind: ExpectationKind,
    /// Slots whose echoed values are under confirmation.
    pub focused: Vec<Slot>,
    pub requested: Option<Slot>,
    pub implicature: bool,
}

impl Expectation {
    pub fn new(kind: ExpectationKind, focused: Vec<Slot>, requested: Option<Slot>) -> Expectation {
        Expectation {
            kind,
            focused,
            requested,
            implicature: kind.carries_implicature(),
        }
    }

    fn covers_focus(&self, slot: Slot) -> bool {
        self.focused
            .iter()
            .any(|f| *f == slot || slot.refines() == Some(*f))
    }

    fn answers_request(&self, slot: Slot) -> bool {
        self.requested.is_some_and(|r| slot.answers(r))
    }

    fn refines_request(&self, slot: Slot) -> bool {
        self.requested.is_some_and(|r| slot.refines() == Some(r))
    }

    /// Whether `frame` realizes this expectation given the current `store`.
    pub fn satisfied_by(&self, frame: &SemanticFrame, store: &SlotStore) -> bool {
        use ExpectationKind::*;
        let bound = frame.task_slots();
        let conflicts = frame_conflicts(store, frame);
        let yes_no = frame.confirmation();
        let conflicts_in_focus =
            !conflicts.is_empty() && conflicts.iter().all(|s| self.covers_focus(*s));
        match self.kind {
            BareYes => yes_no == Some(true) && bound.is_empty(),
            BareNo => yes_no == Some(false) && bound.is_empty(),
            ExplicitConfirmFocused => yes_no == Some(true) && conflicts.is_empty(),
            ExplicitDenyFocusedWithRequest => {
                yes_no == Some(false)
                    && conflicts.is_empty()
                    && !bound.is_empty()
                    && bound.iter().all(|s| !self.covers_focus(*s))
            }
            ExplicitDenyFocused => yes_no == Some(false) && conflicts.is_empty(),
            CorrectFocusedPlusProvideRequested => {
                yes_no != Some(true)
                    && conflicts_in_focus
                    && bound
                        .iter()
                        .any(|s| self.answers_request(*s) && !self.covers_focus(*s))
            }
            CorrectFocused => yes_no != Some(true) && conflicts_in_focus,
            RepeatAsConfirm => {
                yes_no.is_none() && conflicts.is_empty() && bound.iter().any(|s| self.covers_focus(*s))
            }
            ProvideRequestedPlusExtras => {
                yes_no.is_none()
                    && conflicts.is_empty()
                    && bound.iter().any(|s| self.answers_request(*s))
                    && bound
                        .iter()
                        .any(|s| !self.answers_request(*s) && !self.refines_request(*s))
            }
            ProvideRequested => {
                yes_no.is_none()
                    && conflicts.is_empty()
                    && bound.iter().any(|s| self.answers_request(*s))
                    && bound
                        .iter()
                        .all(|s| self.answers_request(*s) || self.refines_request(*s))
            }
        }
    }

    fn word_classes(&self) -> BTreeSet<WordClass> {
        use ExpectationKind::*;
        let focused = self.focused.iter().map(|s| s.word_class());
        let requested = self.requested.map(Slot::word_class);
        let mut classes = BTreeSet::new();
        match self.kind {
            BareYes | BareNo | ExplicitDenyFocused => {
                classes.insert(WordClass::YesNoAdverb);
            }
            ExplicitConfirmFocused | ExplicitDenyFocusedWithRequest => {
                classes.insert(WordClass::YesNoAdverb);
                classes.extend(focused);
                classes.extend(requested);
            }
            CorrectFocusedPlusProvideRequested => {
                classes.extend(focused);
                classes.extend(requested);
            }
            CorrectFocused | RepeatAsConfirm => classes.extend(focused),
            ProvideRequestedPlusExtras => {
                classes.extend(requested);
                classes.extend([WordClass::PlaceName, WordClass::DateExpr, WordClass::TimeExpr]);
            }
            ProvideRequested => classes.extend(requested),
        }
        classes
    }
}

/// Priority-ordered expectations installed by one system act.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationSet {
    pub expectations: Vec<Expectation>,
    pub act: SystemSpeechAct,
    pub cycle: CycleId,
}

impl ExpectationSet {
    pub fn new(mut expectations: Vec<Expectation>, act: SystemSpeechAct, cycle: CycleId) -> ExpectationSet {
        expectations.sort_by_key(|e| e.kind.priority());
        ExpectationSet {
            expectations,
            act,
            cycle,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.expectations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.expectations.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Expectation> {
        self.expectations.iter()
    }

    /// Drops the implicature-bearing expectations (ablation).
    pub fn without_implicature(mut self) -> ExpectationSet {
        self.expectations.retain(|e| !e.implicature);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRoles {
    pub focused: Vec<Slot>,
    pub requested: Vec<Slot>,
    pub extras: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MatchOutcome {
    Matched { expectation: Expectation, roles: FrameRoles },
    Deviation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    #[serde(flatten)]
    pub outcome: MatchOutcome,
    pub implicature: bool,
    pub conflicting_slots: Vec<Slot>,
}

impl MatchResult {
    pub fn expectation(&self) -> Option<&Expectation> {
        match &self.outcome {
            MatchOutcome::Matched { expectation, .. } => Some(expectation),
            MatchOutcome::Deviation => None,
        }
    }

    pub fn kind(&self) -> Option<ExpectationKind> {
        self.expectation().map(|e| e.kind)
    }

    pub fn is_deviation(&self) -> bool {
        matches!(self.outcome, MatchOutcome::Deviation)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordClassPrediction(pub BTreeSet<WordClass>);

impl WordClassPrediction {
    pub fn contains(&self, class: WordClass) -> bool {
        self.0.contains(&class)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<WordClass> for WordClassPrediction {
    fn from_iter<I: IntoIterator<Item = WordClass>>(iter: I) -> Self {
        WordClassPrediction(iter.into_iter().collect())
    }
}

/// The expectations a system act gives rise to.
pub fn generate_expectations(act: &SystemSpeechAct, cycle: CycleId) -> ExpectationSet {
    use ExpectationKind::*;
    let expectations = match &act.kind {
        ActKind::OpenPrompt => {
            let (dep, arr) = (Some(Slot::DepartureCity), Some(Slot::ArrivalCity));
            vec![
                Expectation::new(ProvideRequestedPlusExtras, vec![], dep),
                Expectation::new(ProvideRequestedPlusExtras, vec![], arr),
                Expectation::new(ProvideRequested, vec![], dep),
                Expectation::new(ProvideRequested, vec![], arr),
            ]
        }
        ActKind::ConfirmPlusInitiative {
            focused, requested, ..
        } => {
            let (f, r) = (vec![*focused], Some(*requested));
            vec![
                Expectation::new(BareYes, f.clone(), None),
                Expectation::new(BareNo, f.clone(), None),
                Expectation::new(ExplicitConfirmFocused, f.clone(), r),
                Expectation::new(ExplicitDenyFocusedWithRequest, f.clone(), r),
                Expectation::new(ExplicitDenyFocused, f.clone(), None),
                Expectation::new(CorrectFocusedPlusProvideRequested, f.clone(), r),
                Expectation::new(CorrectFocused, f.clone(), None),
                Expectation::new(ProvideRequestedPlusExtras, vec![], r),
                Expectation::new(ProvideRequested, vec![], r),
            ]
        }
        ActKind::YesNoConfirm { focus } => {
            let f: Vec<Slot> = focus.task_slots();
            vec![
                Expectation::new(BareYes, f.clone(), None),
                Expectation::new(BareNo, f.clone(), None),
                Expectation::new(ExplicitConfirmFocused, f.clone(), None),
                Expectation::new(ExplicitDenyFocused, f.clone(), None),
                Expectation::new(CorrectFocusedPlusProvideRequested, f.clone(), None),
                Expectation::new(CorrectFocused, f.clone(), None),
                Expectation::new(RepeatAsConfirm, f, None),
            ]
        }
        ActKind::RequestParam { slot, .. } => {
            vec![Expectation::new(ProvideRequested, vec![], Some(*slot))]
        }
        ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => {
            return ExpectationSet {
                act: act.clone(),
                ..generate_expectations(reprompt, cycle)
            };
        }
        ActKind::PresentInfo { .. } => vec![
            Expectation::new(BareYes, vec![], None),
            Expectation::new(BareNo, vec![], None),
        ],
        ActKind::Closing { .. } => Vec::new(),
    };
    ExpectationSet::new(expectations, act.clone(), cycle)
}

/// Union of the lexical classes implied by each expectation.
pub fn lexical_predictions(set: &ExpectationSet) -> WordClassPrediction {
    set.iter().flat_map(Expectation::word_classes).collect()
}

/// The first expectation, in priority order, that `frame` realizes.
pub fn match_frame(set: &ExpectationSet, frame: &SemanticFrame, store: &SlotStore) -> MatchResult {
    let conflicting_slots = frame_conflicts(store, frame);
    match set.iter().find(|e| e.satisfied_by(frame, store)) {
        Some(expectation) => {
            let mut roles = FrameRoles {
                focused: Vec::new(),
                requested: Vec::new(),
                extras: Vec::new(),
            };
            for slot in frame.task_slots() {
                if expectation.covers_focus(slot) {
                    roles.focused.push(slot);
                } else if expectation.answers_request(slot) || expectation.refines_request(slot) {
                    roles.requested.push(slot);
                } else {
                    roles.extras.push(slot);
                }
            }
            MatchResult {
                implicature: expectation.implicature,
                outcome: MatchOutcome::Matched {
                    expectation: expectation.clone(),
                    roles,
                },
                conflicting_slots,
            }
        }
        None => MatchResult {
            outcome: MatchOutcome::Deviation,
            implicature: false,
            conflicting_slots,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::TemplateId;
    use crate::frames::{SlotStatus, Value};

    fn hyp(v: &str) -> SlotStatus {
        SlotStatus::Hypothesized(Value::new(v))
    }

    fn cpi(focused: Slot, value: &str, requested: Slot) -> ExpectationSet {
        generate_expectations(
            &SystemSpeechAct::confirm_plus_initiative(focused, Value::new(value), requested),
            CycleId(1),
        )
    }

    fn yes_no(focus: SemanticFrame) -> ExpectationSet {
        generate_expectations(&SystemSpeechAct::yes_no(focus, TemplateId::Elliptic), CycleId(1))
    }

    #[test]
    fn confirmation_plus_initiative_has_all_items() {
        let set = cpi(Slot::ArrivalCity, "ARONA", Slot::DepartureCity);
        assert_eq!(set.len(), 9);
        let kinds: Vec<_> = set.iter().map(|e| e.kind).collect();
        use ExpectationKind::*;
        for k in [
            BareYes,
            BareNo,
            ProvideRequested,
            ProvideRequestedPlusExtras,
            ExplicitConfirmFocused,
            ExplicitDenyFocusedWithRequest,
            ExplicitDenyFocused,
            CorrectFocusedPlusProvideRequested,
            CorrectFocused,
        ] {
            assert!(kinds.contains(&k), "{k:?}");
        }
        for e in set.iter() {
            assert_eq!(e.implicature, matches!(e.kind, CorrectFocused | CorrectFocusedPlusProvideRequested));
            if e.focused.is_empty() {
                assert_eq!(e.requested, Some(Slot::DepartureCity));
            } else {
                assert_eq!(e.focused, vec![Slot::ArrivalCity]);
            }
        }
        // Roles swap when the departure is under confirmation.
        let swapped = cpi(Slot::DepartureCity, "PISA-AEROPORTO", Slot::ArrivalCity);
        assert_eq!(swapped.len(), 9);
        assert!(swapped
            .iter()
            .all(|e| e.focused.iter().all(|s| *s == Slot::DepartureCity)
                && e.requested.is_none_or(|r| r == Slot::ArrivalCity)));
    }

    #[test]
    fn isolated_request_expects_one_thing() {
        let set = generate_expectations(&SystemSpeechAct::request(Slot::DepartureCity, true), CycleId(3));
        assert_eq!(set.len(), 1);
        assert_eq!(set.expectations[0].kind, ExpectationKind::ProvideRequested);
        assert_eq!(set.expectations[0].requested, Some(Slot::DepartureCity));
    }

    #[test]
    fn lexical_prediction_examples() {
        use WordClass::*;
        let set = cpi(Slot::ArrivalCity, "ARONA", Slot::DepartureCity);
        assert_eq!(
            lexical_predictions(&set).0,
            BTreeSet::from([PlaceName, YesNoAdverb, DateExpr, TimeExpr])
        );
        let set = generate_expectations(&SystemSpeechAct::request(Slot::Hour, false), CycleId(1));
        assert_eq!(lexical_predictions(&set).0, BTreeSet::from([TimeExpr]));
        let set = yes_no(SemanticFrame::new().with(Slot::ArrivalCity, "ROMA"));
        assert_eq!(lexical_predictions(&set).0, BTreeSet::from([YesNoAdverb, PlaceName]));
    }

    #[test]
    fn affirmative_restatement_is_an_implicature() {
        let set = cpi(Slot::ArrivalCity, "ARONA", Slot::DepartureCity);
        let store = SlotStore::new().with_status(Slot::ArrivalCity, hyp("ARONA"));
        let frame = SemanticFrame::new().with(Slot::ArrivalCity, "ROMA");
        let m = match_frame(&set, &frame, &store);
        assert_eq!(m.kind(), Some(ExpectationKind::CorrectFocused));
        assert!(m.implicature);
        assert_eq!(m.conflicting_slots, vec![Slot::ArrivalCity]);
    }

    #[test]
    fn repetition_with_changed_value_is_a_correction() {
        let focus = SemanticFrame::new()
            .with(Slot::DepartureCity, "MILANO")
            .with(Slot::ArrivalCity, "ARONA");
        let set = yes_no(focus);
        let store = SlotStore::new()
            .with_status(Slot::DepartureCity, hyp("MILANO"))
            .with_status(Slot::ArrivalCity, hyp("ARONA"));
        let frame = SemanticFrame::new()
            .with(Slot::DepartureCity, "MILANO")
            .with(Slot::ArrivalCity, "ROMA");
        let m = match_frame(&set, &frame, &store);
        assert_eq!(m.kind(), Some(ExpectationKind::CorrectFocused));
        assert!(m.implicature);
        assert_eq!(m.conflicting_slots, vec![Slot::ArrivalCity]);

        let same = SemanticFrame::new()
            .with(Slot::DepartureCity, "MILANO")
            .with(Slot::ArrivalCity, "ARONA");
        assert_eq!(match_frame(&set, &same, &store).kind(), Some(ExpectationKind::RepeatAsConfirm));
    }

    #[test]
    fn explicit_confirmation_with_extra_hour() {
        let set = yes_no(SemanticFrame::new().with(Slot::ArrivalCity, "ROMA"));
        let store = SlotStore::new().with_status(Slot::ArrivalCity, hyp("ROMA"));
        let frame = SemanticFrame::new()
            .with(Slot::Confirmation, "YES")
            .with(Slot::Hour, "EIGHT");
        let m = match_frame(&set, &frame, &store);
        assert_eq!(m.kind(), Some(ExpectationKind::ExplicitConfirmFocused));
        match m.outcome {
            MatchOutcome::Matched { roles, .. } => assert_eq!(roles.extras, vec![Slot::Hour]),
            MatchOutcome::Deviation => panic!("deviation"),
        }
    }

    #[test]
    fn unsolicited_date_is_a_deviation() {
        let set = cpi(Slot::ArrivalCity, "ARONA", Slot::DepartureCity);
        let store = SlotStore::new().with_status(Slot::ArrivalCity, hyp("ARONA"));
        let frame = SemanticFrame::new().with(Slot::Date, "TODAY");
        let m = match_frame(&set, &frame, &store);
        assert!(m.is_deviation());
        assert!(!m.implicature);
    }

    #[test]
    fn ablation_drops_implicature_items() {
        let set = cpi(Slot::ArrivalCity, "ARONA", Slot::DepartureCity).without_implicature();
        assert_eq!(set.len(), 7);
        assert!(set.iter().all(|e| !e.implicature));
    }
}
