//! Place-name gazetteer plus the closed date, time and yes/no vocabularies.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::LoadError;
use crate::frames::{Value, WordClass};

const BUILTIN_GAZETTEER: &str = include_str!("../data/gazetteer.txt");

pub const DATE_TOKENS: &[&str] = &[
    "TODAY", "TOMORROW", "MONDAY", "TUESDAY", "WEDNESDAY", "THURSDAY", "FRIDAY", "SATURDAY",
    "SUNDAY",
];

pub const TIME_TOKENS: &[&str] = &[
    "MORNING", "AFTERNOON", "EVENING", "NIGHT", "ONE", "TWO", "THREE", "FOUR", "FIVE", "SIX",
    "SEVEN", "EIGHT", "NINE", "TEN", "ELEVEN", "TWELVE",
];

pub const DAY_PERIODS: &[&str] = &["MORNING", "AFTERNOON", "EVENING", "NIGHT"];

pub const YES_NO_TOKENS: &[&str] = &["YES", "NO"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    places: BTreeSet<Value>,
}

impl Lexicon {
    /// Parse a gazetteer: one place name per line, blank lines and `#` comments skipped.
    pub fn from_gazetteer(text: &str) -> Result<Lexicon, LoadError> {
        let places: BTreeSet<Value> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Value::new)
            .collect();
        if places.is_empty() {
            return Err(LoadError::Invalid("gazetteer has no place names".into()));
        }
        for place in &places {
            if class_of_closed(place.as_str()).is_some() {
                return Err(LoadError::Invalid(format!(
                    "place name {place} collides with a date/time/yes-no token"
                )));
            }
        }
        Ok(Lexicon { places })
    }

    pub fn load(path: &Path) -> Result<Lexicon, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
        Lexicon::from_gazetteer(&text)
    }

    pub fn builtin() -> Lexicon {
        Lexicon::from_gazetteer(BUILTIN_GAZETTEER).expect("builtin gazetteer is valid")
    }

    pub fn is_place(&self, value: &Value) -> bool {
        self.places.contains(value)
    }

    pub fn places(&self) -> impl Iterator<Item = &Value> {
        self.places.iter()
    }

    pub fn class_of(&self, value: &Value) -> Option<WordClass> {
        if self.is_place(value) {
            Some(WordClass::PlaceName)
        } else {
            class_of_closed(value.as_str())
        }
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::builtin()
    }
}

fn class_of_closed(token: &str) -> Option<WordClass> {
    if DATE_TOKENS.contains(&token) {
        Some(WordClass::DateExpr)
    } else if TIME_TOKENS.contains(&token) {
        Some(WordClass::TimeExpr)
    } else if YES_NO_TOKENS.contains(&token) {
        Some(WordClass::YesNoAdverb)
    } else {
        None
    }
}
