//! Rigid keyword grammar turning typed caller input into semantic frames, and back.
//!
//! The rule list lives in `data/grammar.toml`.

use std::collections::BTreeSet;

use serde::Deserialize;
use thiserror::Error;

use crate::error::LoadError;
use crate::frames::{SemanticFrame, Slot, Value, WordClass};
use crate::lexicon::{Lexicon, DATE_TOKENS, DAY_PERIODS, TIME_TOKENS};

const BUILTIN_GRAMMAR: &str = include_str!("../data/grammar.toml");

const DIGITS: [(&str, &str); 12] = [
    ("1", "ONE"),
    ("2", "TWO"),
    ("3", "THREE"),
    ("4", "FOUR"),
    ("5", "FIVE"),
    ("6", "SIX"),
    ("7", "SEVEN"),
    ("8", "EIGHT"),
    ("9", "NINE"),
    ("10", "TEN"),
    ("11", "ELEVEN"),
    ("12", "TWELVE"),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no keywords recognized")]
    Empty,
    #[error("unrecognized word {0:?}")]
    UnknownWord(String),
    #[error("{slot} given twice ({first} and {second})")]
    Conflict { slot: Slot, first: Value, second: Value },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarFile {
    yes: Vec<String>,
    no: Vec<String>,
    departure_markers: Vec<String>,
    arrival_markers: Vec<String>,
    correction_markers: Vec<String>,
    stations: Vec<String>,
    fillers: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Grammar {
    yes: BTreeSet<String>,
    no: BTreeSet<String>,
    departure_markers: BTreeSet<String>,
    arrival_markers: BTreeSet<String>,
    correction_markers: BTreeSet<String>,
    stations: BTreeSet<Value>,
    fillers: BTreeSet<String>,
    /// Place names as word sequences, longest first.
    places: Vec<(Vec<String>, Value)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Marker {
    Departure,
    Arrival,
    Correction,
}

/// Which place slot a city named without a direction marker fills.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlaceHints {
    /// The place the system asked for.
    pub requested: Option<Slot>,
    /// The place the system echoed for confirmation.
    pub focused: Option<Slot>,
}

impl Grammar {
    pub fn from_toml(text: &str, lexicon: &Lexicon) -> Result<Grammar, LoadError> {
        let file: GrammarFile = toml::from_str(text)?;
        let words = |v: Vec<String>| v.into_iter().map(|w| w.to_lowercase()).collect::<BTreeSet<_>>();
        let stations: BTreeSet<Value> = file.stations.iter().map(|s| Value::new(s)).collect();
        for s in &stations {
            if !lexicon.is_place(s) {
                return Err(LoadError::Invalid(format!("station {s} is not in the gazetteer")));
            }
        }
        let mut places: Vec<(Vec<String>, Value)> = lexicon
            .places()
            .map(|p| (p.as_str().split('-').map(str::to_lowercase).collect(), p.clone()))
            .collect();
        places.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        let grammar = Grammar {
            yes: words(file.yes),
            no: words(file.no),
            departure_markers: words(file.departure_markers),
            arrival_markers: words(file.arrival_markers),
            correction_markers: words(file.correction_markers),
            stations,
            fillers: words(file.fillers),
            places,
        };
        let keyword_sets = [
            &grammar.yes,
            &grammar.no,
            &grammar.departure_markers,
            &grammar.arrival_markers,
            &grammar.correction_markers,
            &grammar.fillers,
        ];
        let mut seen = BTreeSet::new();
        for word in keyword_sets.iter().flat_map(|s| s.iter()) {
            let class = lexicon.class_of(&Value::new(word));
            if !seen.insert(word.clone()) || class.is_some_and(|c| c != WordClass::YesNoAdverb) {
                return Err(LoadError::Invalid(format!("grammar word {word:?} is ambiguous")));
            }
        }
        Ok(grammar)
    }

    pub fn builtin() -> Grammar {
        Grammar::from_toml(BUILTIN_GRAMMAR, &Lexicon::builtin()).expect("builtin grammar is valid")
    }

    pub fn is_station(&self, value: &Value) -> bool {
        self.stations.contains(value)
    }

    pub fn parse(&self, text: &str, hints: PlaceHints) -> Result<SemanticFrame, ParseError> {
        let tokens: Vec<String> = text
            .split(|c: char| c.is_whitespace() || matches!(c, ',' | '.' | '?' | '!' | ';' | ':'))
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut frame = SemanticFrame::new();
        let bind = |frame: &mut SemanticFrame, slot: Slot, value: Value| match frame.get(slot) {
            Some(first) if *first != value => Err(ParseError::Conflict {
                slot,
                first: first.clone(),
                second: value,
            }),
            _ => {
                frame.bind(slot, value);
                Ok(())
            }
        };
        let mut marker: Option<Marker> = None;
        let mut last_place: Option<Slot> = None;
        let mut i = 0;
        while i < tokens.len() {
            let word = tokens[i].as_str();
            if let Some((len, place)) = self.place_at(&tokens[i..]) {
                i += len;
                if self.is_station(&place) {
                    if last_place != Some(Slot::ArrivalCity) {
                        bind(&mut frame, Slot::DepartureStation, place)?;
                    }
                    continue;
                }
                let free = |s: &Slot| matches!(s, Slot::DepartureCity | Slot::ArrivalCity) && !frame.binds(*s);
                let slot = match marker.take() {
                    Some(Marker::Departure) => Slot::DepartureCity,
                    Some(Marker::Arrival) => Slot::ArrivalCity,
                    m => {
                        let focused = hints.focused.filter(|_| m == Some(Marker::Correction));
                        match focused.filter(free).or(hints.requested.filter(free)) {
                            Some(s) => s,
                            None if !frame.binds(Slot::DepartureCity) => Slot::DepartureCity,
                            None => Slot::ArrivalCity,
                        }
                    }
                };
                bind(&mut frame, slot, place)?;
                last_place = Some(slot);
                continue;
            }
            i += 1;
            if self.yes.contains(word) {
                bind(&mut frame, Slot::Confirmation, Value::yes())?;
            } else if self.no.contains(word) {
                bind(&mut frame, Slot::Confirmation, Value::no())?;
            } else if self.departure_markers.contains(word) {
                marker = Some(Marker::Departure);
            } else if self.arrival_markers.contains(word) {
                marker = Some(Marker::Arrival);
            } else if self.correction_markers.contains(word) {
                marker = Some(Marker::Correction);
            } else if self.fillers.contains(word) {
            } else if let Some((slot, value)) = closed_token(word) {
                bind(&mut frame, slot, value)?;
            } else {
                return Err(ParseError::UnknownWord(word.to_string()));
            }
        }
        if frame.is_empty() {
            return Err(ParseError::Empty);
        }
        Ok(frame)
    }

    fn place_at(&self, tokens: &[String]) -> Option<(usize, Value)> {
        self.places
            .iter()
            .find(|(words, _)| tokens.len() >= words.len() && tokens[..words.len()] == words[..])
            .map(|(words, v)| (words.len(), v.clone()))
    }

    /// A sentence that parses back to `frame` under any hints.
    pub fn render(&self, frame: &SemanticFrame) -> String {
        let mut parts: Vec<String> = Vec::new();
        let lower = |v: &Value| v.as_str().replace('-', " ").to_lowercase();
        match frame.confirmation() {
            Some(true) => parts.push("yes".into()),
            Some(false) => parts.push("no".into()),
            None => {}
        }
        match (frame.get(Slot::DepartureCity), frame.get(Slot::DepartureStation)) {
            (Some(city), Some(station)) => parts.push(format!("from {} {}", lower(city), lower(station))),
            (Some(city), None) => parts.push(format!("from {}", lower(city))),
            (None, Some(station)) => parts.push(lower(station)),
            (None, None) => {}
        }
        if let Some(arr) = frame.get(Slot::ArrivalCity) {
            parts.push(format!("to {}", lower(arr)));
        }
        if let Some(date) = frame.get(Slot::Date) {
            parts.push(lower(date));
        }
        if let Some(period) = frame.get(Slot::DepartureTime) {
            parts.push(format!("in the {}", lower(period)));
        }
        if let Some(hour) = frame.get(Slot::Hour) {
            parts.push(format!("at {}", lower(hour)));
        }
        parts.join(" ")
    }
}

fn closed_token(word: &str) -> Option<(Slot, Value)> {
    let upper = DIGITS
        .iter()
        .find(|(d, _)| *d == word)
        .map(|(_, w)| w.to_string())
        .unwrap_or_else(|| word.to_uppercase());
    let slot = if DATE_TOKENS.contains(&upper.as_str()) {
        Slot::Date
    } else if DAY_PERIODS.contains(&upper.as_str()) {
        Slot::DepartureTime
    } else if TIME_TOKENS.contains(&upper.as_str()) {
        Slot::Hour
    } else {
        return None;
    };
    debug_assert!(matches!(slot.word_class(), WordClass::DateExpr | WordClass::TimeExpr));
    Some((slot, Value::new(&upper)))
}
