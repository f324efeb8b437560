//! Scripted cooperative callers.
//!
//! A simulated caller knows its trip (the scenario goal), answers what it is asked,
//! checks every value the system echoes, and repairs mismatches either by restating
//! the right values or with an explicit "no". It never states anything outside its goal.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{ActKind, SystemSpeechAct};
use crate::error::LoadError;
use crate::frames::{SemanticFrame, Slot, Value};
use crate::lexicon::Lexicon;
use crate::timetable::{Timetable, TimetableQuery, TrainSolution};

const BUILTIN_SCENARIOS: &str = include_str!("../data/scenarios.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub goal: SemanticFrame,
    #[serde(default = "Scenario::default_repeat")]
    pub p_repeat_without_no: f64,
    #[serde(default = "Scenario::default_overinform")]
    pub p_overinform: f64,
    #[serde(default = "Scenario::default_verbosity")]
    pub verbosity: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Vec<Scenario>,
}

impl Scenario {
    fn default_repeat() -> f64 {
        0.7
    }

    fn default_overinform() -> f64 {
        0.3
    }

    fn default_verbosity() -> f64 {
        0.5
    }

    pub fn new(name: &str, goal: SemanticFrame) -> Scenario {
        Scenario {
            name: name.to_string(),
            goal,
            p_repeat_without_no: Self::default_repeat(),
            p_overinform: Self::default_overinform(),
            verbosity: Self::default_verbosity(),
        }
    }

    pub fn validate(&self, lexicon: &Lexicon) -> Result<(), LoadError> {
        let bad = |m: String| Err(LoadError::Invalid(format!("scenario {}: {m}", self.name)));
        for slot in [Slot::DepartureCity, Slot::ArrivalCity, Slot::Date] {
            if !self.goal.binds(slot) {
                return bad(format!("goal lacks {slot}"));
            }
        }
        if !self.goal.binds(Slot::DepartureTime) && !self.goal.binds(Slot::Hour) {
            return bad("goal lacks a departure time".into());
        }
        if self.goal.binds(Slot::Confirmation) {
            return bad("goal cannot bind confirmation".into());
        }
        for (slot, value) in self.goal.iter() {
            if lexicon.class_of(value) != Some(slot.word_class()) {
                return bad(format!("{value} is not a valid {slot}"));
            }
        }
        for p in [self.p_repeat_without_no, self.p_overinform, self.verbosity] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str, lexicon: &Lexicon) -> Result<Vec<Scenario>, LoadError> {
        let file: ScenarioFile = toml::from_str(text)?;
        if file.scenario.is_empty() {
            return Err(LoadError::Invalid("no scenarios".into()));
        }
        for s in &file.scenario {
            s.validate(lexicon)?;
        }
        Ok(file.scenario)
    }

    pub fn load(path: &Path, lexicon: &Lexicon) -> Result<Vec<Scenario>, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
        Scenario::from_toml(&text, lexicon)
    }

    pub fn builtin() -> Vec<Scenario> {
        Scenario::from_toml(BUILTIN_SCENARIOS, &Lexicon::builtin()).expect("builtin scenarios are valid")
    }

    /// The caller got what it asked for: a non-empty answer to a query that agrees
    /// with the goal on every parameter the query binds.
    pub fn is_satisfied_by(&self, query: &TimetableQuery, solutions: &[TrainSolution]) -> bool {
        let goal = |slot| self.goal.get(slot);
        !solutions.is_empty()
            && goal(Slot::DepartureCity) == Some(&query.departure)
            && goal(Slot::ArrivalCity) == Some(&query.arrival)
            && goal(Slot::Date) == Some(&query.date)
            && query.station.as_ref().is_none_or(|s| goal(Slot::DepartureStation) == Some(s))
            && query.period.as_ref().is_none_or(|p| goal(Slot::DepartureTime) == Some(p))
            && query.hour.as_ref().is_none_or(|h| goal(Slot::Hour) == Some(h))
    }

    /// The timetable query a perfect exchange would produce.
    pub fn ideal_query(&self) -> TimetableQuery {
        let v = |slot| self.goal.get(slot).cloned();
        TimetableQuery {
            departure: v(Slot::DepartureCity).expect("validated"),
            station: v(Slot::DepartureStation),
            arrival: v(Slot::ArrivalCity).expect("validated"),
            date: v(Slot::Date).expect("validated"),
            period: v(Slot::DepartureTime),
            hour: v(Slot::Hour),
        }
    }

    pub fn has_answer(&self, timetable: &Timetable) -> bool {
        timetable.query(&self.ideal_query()).is_ok_and(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStyle {
    Answer,
    Confirm,
    Deny,
    Repeat,
    Correct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTurn {
    pub frame: SemanticFrame,
    pub style: TurnStyle,
}

#[derive(Debug, Clone)]
pub struct UserSim {
    scenario: Scenario,
    said: BTreeSet<Slot>,
}

impl UserSim {
    pub fn new(scenario: Scenario) -> UserSim {
        UserSim {
            scenario,
            said: BTreeSet::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// The caller's next turn, or `None` once the system has closed.
    pub fn respond<R: Rng + ?Sized>(&mut self, act: &SystemSpeechAct, rng: &mut R) -> Option<UserTurn> {
        let turn = match &act.kind {
            ActKind::Closing { .. } => return None,
            ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => return self.respond(reprompt, rng),
            ActKind::OpenPrompt => {
                let mut frame = self.answer(Slot::DepartureCity, false);
                self.add(&mut frame, Slot::ArrivalCity);
                if self.goal(Slot::Date).is_some_and(|d| d.as_str() != "TODAY") {
                    self.add(&mut frame, Slot::Date);
                }
                if rng.random::<f64>() < self.scenario.p_overinform {
                    self.add(&mut frame, Slot::DepartureTime);
                    self.add(&mut frame, Slot::Hour);
                }
                UserTurn {
                    frame,
                    style: TurnStyle::Answer,
                }
            }
            ActKind::RequestParam { slot, isolated_word } => UserTurn {
                frame: self.answer(*slot, *isolated_word),
                style: TurnStyle::Answer,
            },
            ActKind::ConfirmPlusInitiative {
                focused,
                value,
                requested,
            } => {
                if self.goal(*focused) == Some(value) {
                    let mut frame = self.answer(*requested, false);
                    if rng.random::<f64>() < self.scenario.verbosity {
                        frame.bind(Slot::Confirmation, Value::yes());
                    }
                    UserTurn {
                        frame,
                        style: TurnStyle::Confirm,
                    }
                } else {
                    let restate = rng.random::<f64>() < self.scenario.p_repeat_without_no;
                    let overinform = rng.random::<f64>() < self.scenario.p_overinform;
                    let mut frame = self.restatement(&[*focused]);
                    if frame.is_empty() {
                        return Some(self.bare_no());
                    }
                    if restate {
                        if overinform {
                            let extra = self.answer(*requested, false);
                            for (s, v) in extra.iter() {
                                frame.bind(s, v.clone());
                            }
                        }
                        UserTurn {
                            frame,
                            style: TurnStyle::Correct,
                        }
                    } else {
                        frame.bind(Slot::Confirmation, Value::no());
                        UserTurn {
                            frame,
                            style: TurnStyle::Deny,
                        }
                    }
                }
            }
            ActKind::YesNoConfirm { focus } => {
                let wrong: Vec<Slot> = focus
                    .iter()
                    .filter(|(s, v)| self.goal(*s) != Some(*v))
                    .map(|(s, _)| s)
                    .collect();
                if wrong.is_empty() {
                    let mut frame = SemanticFrame::new().with(Slot::Confirmation, Value::yes());
                    if rng.random::<f64>() < self.scenario.p_overinform {
                        let unsaid = [Slot::DepartureTime, Slot::Hour, Slot::Date]
                            .into_iter()
                            .find(|s| !self.said.contains(s) && self.goal(*s).is_some());
                        if let Some(s) = unsaid {
                            self.add(&mut frame, s);
                        }
                    }
                    UserTurn {
                        frame,
                        style: TurnStyle::Confirm,
                    }
                } else if wrong.iter().all(|s| self.goal(*s).is_none()) {
                    self.bare_no()
                } else if rng.random::<f64>() < self.scenario.p_repeat_without_no {
                    let echoed: Vec<Slot> = focus.slots().collect();
                    UserTurn {
                        frame: self.restatement(&echoed),
                        style: TurnStyle::Repeat,
                    }
                } else {
                    let mut frame = self.restatement(&wrong);
                    frame.bind(Slot::Confirmation, Value::no());
                    UserTurn {
                        frame,
                        style: TurnStyle::Deny,
                    }
                }
            }
            ActKind::PresentInfo { .. } => UserTurn {
                frame: SemanticFrame::new().with(Slot::Confirmation, Value::yes()),
                style: TurnStyle::Confirm,
            },
        };
        Some(turn)
    }

    fn goal(&self, slot: Slot) -> Option<&Value> {
        self.scenario.goal.get(slot)
    }

    fn add(&mut self, frame: &mut SemanticFrame, slot: Slot) {
        if let Some(v) = self.goal(slot).cloned() {
            frame.bind(slot, v);
            self.said.insert(slot);
        }
    }

    fn bare_no(&self) -> UserTurn {
        UserTurn {
            frame: SemanticFrame::new().with(Slot::Confirmation, Value::no()),
            style: TurnStyle::Deny,
        }
    }

    /// The goal values of `slots`, with the station alongside the departure city.
    fn restatement(&mut self, slots: &[Slot]) -> SemanticFrame {
        let mut frame = SemanticFrame::new();
        for slot in slots {
            self.add(&mut frame, *slot);
            if *slot == Slot::DepartureCity {
                self.add(&mut frame, Slot::DepartureStation);
            }
        }
        frame
    }

    fn answer(&mut self, slot: Slot, isolated: bool) -> SemanticFrame {
        let mut frame = SemanticFrame::new();
        match slot {
            Slot::DepartureCity | Slot::DepartureStation => {
                self.add(&mut frame, Slot::DepartureCity);
                if !isolated {
                    self.add(&mut frame, Slot::DepartureStation);
                }
            }
            Slot::DepartureTime | Slot::Hour => {
                if isolated {
                    let one = if self.goal(Slot::DepartureTime).is_some() {
                        Slot::DepartureTime
                    } else {
                        Slot::Hour
                    };
                    self.add(&mut frame, one);
                } else {
                    self.add(&mut frame, Slot::DepartureTime);
                    self.add(&mut frame, Slot::Hour);
                }
            }
            Slot::ArrivalCity | Slot::Date => self.add(&mut frame, slot),
            Slot::Confirmation => {
                frame.bind(Slot::Confirmation, Value::yes());
            }
        }
        frame
    }
}
