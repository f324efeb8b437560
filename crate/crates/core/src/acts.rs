//! System speech acts and their surface realization.
//!
//! Rendering is template based: each act carries the id of the template the
//! engine selected, and [`SystemSpeechAct::render`] interpolates slot values into it.

use serde::{Deserialize, Serialize};

use crate::frames::{SemanticFrame, Slot, Value};
use crate::timetable::{TimetableQuery, TrainSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Greeting,
    NotUnderstood,
    EchoAndAsk,
    Ask,
    AskIsolated,
    /// "Do you want to travel from X to Y ...?"
    TravelQuestion,
    /// "From X to Y?"
    Elliptic,
    /// "Do you want to arrive in X?"
    ArriveQuestion,
    /// "Are you going to X?"
    GoingQuestion,
    Solutions,
    Goodbye,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosingReason {
    /// Information was presented and acknowledged.
    Served,
    /// The caller hung up before any information was presented.
    HungUp,
    /// The turn cap was exceeded.
    TurnLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActKind {
    OpenPrompt,
    ConfirmPlusInitiative {
        focused: Slot,
        value: Value,
        requested: Slot,
    },
    YesNoConfirm {
        focus: SemanticFrame,
    },
    RequestParam {
        slot: Slot,
        isolated_word: bool,
    },
    InformNonUnderstandingAndRequest {
        slots: Vec<Slot>,
        reprompt: Box<SystemSpeechAct>,
    },
    PresentInfo {
        query: TimetableQuery,
        solutions: Vec<TrainSolution>,
    },
    Closing {
        reason: ClosingReason,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpeechAct {
    #[serde(flatten)]
    pub kind: ActKind,
    pub template: TemplateId,
}

impl SystemSpeechAct {
    pub fn open_prompt() -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::OpenPrompt,
            template: TemplateId::Greeting,
        }
    }

    pub fn confirm_plus_initiative(focused: Slot, value: Value, requested: Slot) -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::ConfirmPlusInitiative {
                focused,
                value,
                requested,
            },
            template: TemplateId::EchoAndAsk,
        }
    }

    pub fn yes_no(focus: SemanticFrame, template: TemplateId) -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::YesNoConfirm { focus },
            template,
        }
    }

    pub fn request(slot: Slot, isolated_word: bool) -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::RequestParam { slot, isolated_word },
            template: if isolated_word {
                TemplateId::AskIsolated
            } else {
                TemplateId::Ask
            },
        }
    }

    pub fn not_understood(reprompt: SystemSpeechAct) -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::InformNonUnderstandingAndRequest {
                slots: reprompt.requested_slots(),
                reprompt: Box::new(reprompt),
            },
            template: TemplateId::NotUnderstood,
        }
    }

    pub fn present(query: TimetableQuery, solutions: Vec<TrainSolution>) -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::PresentInfo { query, solutions },
            template: TemplateId::Solutions,
        }
    }

    pub fn closing(reason: ClosingReason) -> SystemSpeechAct {
        SystemSpeechAct {
            kind: ActKind::Closing { reason },
            template: TemplateId::Goodbye,
        }
    }

    /// Short kind name used in transcripts and the state dump.
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            ActKind::OpenPrompt => "OpenPrompt",
            ActKind::ConfirmPlusInitiative { .. } => "ConfirmPlusInitiative",
            ActKind::YesNoConfirm { .. } => "YesNoConfirm",
            ActKind::RequestParam { .. } => "RequestParam",
            ActKind::InformNonUnderstandingAndRequest { .. } => "InformNonUnderstandingAndRequest",
            ActKind::PresentInfo { .. } => "PresentInfo",
            ActKind::Closing { .. } => "Closing",
        }
    }

    /// Slots the act asks the caller to supply (including `Confirmation`).
    pub fn requested_slots(&self) -> Vec<Slot> {
        match &self.kind {
            ActKind::OpenPrompt => vec![Slot::DepartureCity, Slot::ArrivalCity],
            ActKind::ConfirmPlusInitiative { requested, .. } => vec![Slot::Confirmation, *requested],
            ActKind::YesNoConfirm { .. } => vec![Slot::Confirmation],
            ActKind::RequestParam { slot, .. } => vec![*slot],
            ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => reprompt.requested_slots(),
            ActKind::PresentInfo { .. } | ActKind::Closing { .. } => Vec::new(),
        }
    }

    /// Values the act echoes back for confirmation.
    pub fn echoed(&self) -> SemanticFrame {
        match &self.kind {
            ActKind::ConfirmPlusInitiative { focused, value, .. } => {
                SemanticFrame::new().with(*focused, value.clone())
            }
            ActKind::YesNoConfirm { focus } => focus.clone(),
            ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => reprompt.echoed(),
            _ => SemanticFrame::new(),
        }
    }

    /// Whether a yes/no from the caller is meaningful after this act.
    pub fn seeks_confirmation(&self) -> bool {
        !self.echoed().is_empty()
    }

    pub fn is_isolated_word(&self) -> bool {
        match &self.kind {
            ActKind::RequestParam { isolated_word, .. } => *isolated_word,
            ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => reprompt.is_isolated_word(),
            _ => false,
        }
    }

    pub fn render(&self) -> String {
        match (&self.kind, self.template) {
            (ActKind::OpenPrompt, _) => format!(
                "Automatic Railway Information System. Please speak after the tone. {}",
                OPEN_REQUEST
            ),
            (ActKind::InformNonUnderstandingAndRequest { reprompt, .. }, _) => {
                let again = match reprompt.kind {
                    ActKind::OpenPrompt => OPEN_REQUEST.to_string(),
                    _ => reprompt.render(),
                };
                format!("Sorry, I did not understand. {again}")
            }
            (ActKind::ConfirmPlusInitiative { focused, value, requested }, _) => {
                let focus = SemanticFrame::new().with(*focused, value.clone());
                format!("{}. {}", capitalize(&phrases(&focus)), question(*requested))
            }
            (ActKind::YesNoConfirm { focus }, template) => match template {
                TemplateId::TravelQuestion => format!("Do you want to travel {}?", phrases(focus)),
                TemplateId::ArriveQuestion => format!("Do you want to arrive in {}?", names(focus, Slot::ArrivalCity)),
                TemplateId::GoingQuestion => format!("Are you going to {}?", names(focus, Slot::ArrivalCity)),
                _ => format!("{}?", capitalize(&phrases(focus))),
            },
            (ActKind::RequestParam { slot, isolated_word }, _) => {
                if *isolated_word {
                    isolated_question(*slot).to_string()
                } else {
                    question(*slot).to_string()
                }
            }
            (ActKind::PresentInfo { solutions, .. }, _) => {
                if solutions.is_empty() {
                    "I am sorry, there are no trains matching your request.".to_string()
                } else {
                    solutions.iter().map(describe_solution).collect::<Vec<_>>().join(" ")
                }
            }
            (ActKind::Closing { reason }, _) => match reason {
                ClosingReason::Served => "Thank you for calling. Goodbye.".to_string(),
                ClosingReason::HungUp | ClosingReason::TurnLimit => {
                    "I am sorry I could not help you. Goodbye.".to_string()
                }
            },
        }
    }
}

const OPEN_REQUEST: &str = "Please give your point of departure and your destination.";

fn question(slot: Slot) -> &'static str {
    match slot {
        Slot::DepartureCity => "What is your point of departure?",
        Slot::ArrivalCity => "Where are you going to?",
        Slot::DepartureStation => "From which station do you want to leave?",
        Slot::Date => "On which day do you want to travel?",
        Slot::DepartureTime | Slot::Hour => "At what time do you want to leave?",
        Slot::Confirmation => "Is that correct?",
    }
}

fn isolated_question(slot: Slot) -> &'static str {
    match slot {
        Slot::DepartureCity => "Please say only the name of the departure city.",
        Slot::ArrivalCity => "Please say only the name of the arrival city.",
        Slot::DepartureStation => "Please say only the name of the departure station.",
        Slot::Date => "Please say only the day of travel.",
        Slot::DepartureTime | Slot::Hour => "Please say only the departure time.",
        Slot::Confirmation => "Please answer yes or no.",
    }
}

fn names(focus: &SemanticFrame, slot: Slot) -> String {
    focus.get(slot).map(Value::display_name).unwrap_or_default()
}

/// "from Pisa Centrale to Firenze leaving in the morning today"
fn phrases(focus: &SemanticFrame) -> String {
    let mut parts = Vec::new();
    if let Some(dep) = focus.get(Slot::DepartureCity) {
        let mut p = format!("from {}", dep.display_name());
        if let Some(st) = focus.get(Slot::DepartureStation) {
            p.push(' ');
            p.push_str(&st.display_name());
        }
        parts.push(p);
    } else if let Some(st) = focus.get(Slot::DepartureStation) {
        parts.push(format!("from {} station", st.display_name()));
    }
    if let Some(arr) = focus.get(Slot::ArrivalCity) {
        parts.push(format!("to {}", arr.display_name()));
    }
    if let Some(period) = focus.get(Slot::DepartureTime) {
        parts.push(match period.as_str() {
            "NIGHT" => "leaving at night".to_string(),
            p => format!("leaving in the {}", p.to_lowercase()),
        });
    }
    if let Some(hour) = focus.get(Slot::Hour) {
        parts.push(format!("around {}", hour.as_str().to_lowercase()));
    }
    if let Some(date) = focus.get(Slot::Date) {
        parts.push(match date.as_str() {
            "TODAY" | "TOMORROW" => date.as_str().to_lowercase(),
            d => format!("on {}", Value::new(d).display_name()),
        });
    }
    if parts.is_empty() && focus.confirmation().is_some() {
        parts.push("is that right".to_string());
    }
    parts.join(" ")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn describe_solution(s: &TrainSolution) -> String {
    format!(
        "{} leaves from {} {} at {}; it arrives at {} {} at {}.",
        s.train_id(),
        s.dep_city.display_name(),
        s.dep_station.display_name(),
        s.dep_time,
        s.arr_city.display_name(),
        s.arr_station.display_name(),
        s.arr_time
    )
}
