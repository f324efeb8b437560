//! Mock railway information system backed by a flat CSV fixture.
//!
//! Columns: `class,number,days,period,hour,dep_city,dep_station,dep_time,arr_city,arr_station,arr_time,overnight`.
//! `days` is `DAILY` or a date token, `period` a part of the day, `hour` an hour word.
//! Times are `HH:MM` display strings; `overnight` marks arrivals on the following day.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::LoadError;
use crate::frames::Value;
use crate::lexicon::{Lexicon, DATE_TOKENS, DAY_PERIODS, TIME_TOKENS};

const BUILTIN_TIMETABLE: &str = include_str!("../data/timetable.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSolution {
    pub class: String,
    pub number: u32,
    pub dep_city: Value,
    pub dep_station: Value,
    pub dep_time: String,
    pub arr_city: Value,
    pub arr_station: Value,
    pub arr_time: String,
}

impl TrainSolution {
    pub fn train_id(&self) -> String {
        format!("{} {}", self.class, self.number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Row {
    class: String,
    number: u32,
    days: Value,
    period: Value,
    hour: Value,
    dep_city: Value,
    dep_station: Value,
    dep_time: String,
    arr_city: Value,
    arr_station: Value,
    arr_time: String,
    overnight: bool,
}

impl Row {
    fn solution(&self) -> TrainSolution {
        TrainSolution {
            class: self.class.clone(),
            number: self.number,
            dep_city: self.dep_city.clone(),
            dep_station: self.dep_station.clone(),
            dep_time: self.dep_time.clone(),
            arr_city: self.arr_city.clone(),
            arr_station: self.arr_station.clone(),
            arr_time: self.arr_time.clone(),
        }
    }

    fn matches(&self, q: &TimetableQuery) -> bool {
        self.dep_city == q.departure
            && q.station.as_ref().is_none_or(|s| *s == self.dep_station)
            && self.arr_city == q.arrival
            && (self.days.as_str() == "DAILY" || self.days == q.date)
            && q.period.as_ref().is_none_or(|p| *p == self.period)
            && q.hour.as_ref().is_none_or(|h| *h == self.hour)
    }
}

/// A parameter-complete timetable request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimetableQuery {
    pub departure: Value,
    pub station: Option<Value>,
    pub arrival: Value,
    pub date: Value,
    pub period: Option<Value>,
    pub hour: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimetableError {
    #[error("unknown place {0}")]
    UnknownPlace(Value),
}

#[derive(Debug, Clone)]
pub struct Timetable {
    rows: Vec<Row>,
    lexicon: Lexicon,
}

impl Timetable {
    pub fn from_csv(text: &str, lexicon: &Lexicon) -> Result<Timetable, LoadError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, record) in reader.deserialize::<Row>().enumerate() {
            let row = record?;
            validate_row(&row, lexicon).map_err(|m| LoadError::Invalid(format!("row {}: {m}", line + 1)))?;
            rows.push(row);
        }
        Ok(Timetable {
            rows,
            lexicon: lexicon.clone(),
        })
    }

    pub fn load(path: &Path, lexicon: &Lexicon) -> Result<Timetable, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
        Timetable::from_csv(&text, lexicon)
    }

    pub fn builtin() -> Timetable {
        Timetable::from_csv(BUILTIN_TIMETABLE, &Lexicon::builtin()).expect("builtin timetable is valid")
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row).expect("in-memory csv write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn query(&self, q: &TimetableQuery) -> Result<Vec<TrainSolution>, TimetableError> {
        for place in [Some(&q.departure), Some(&q.arrival), q.station.as_ref()].into_iter().flatten() {
            if !self.lexicon.is_place(place) {
                return Err(TimetableError::UnknownPlace(place.clone()));
            }
        }
        Ok(self.rows.iter().filter(|r| r.matches(q)).map(Row::solution).collect())
    }
}

fn validate_row(row: &Row, lexicon: &Lexicon) -> Result<(), String> {
    for place in [&row.dep_city, &row.dep_station, &row.arr_city, &row.arr_station] {
        if !lexicon.is_place(place) {
            return Err(format!("{place} is not in the gazetteer"));
        }
    }
    if row.days.as_str() != "DAILY" && !DATE_TOKENS.contains(&row.days.as_str()) {
        return Err(format!("bad days token {}", row.days));
    }
    if !DAY_PERIODS.contains(&row.period.as_str()) {
        return Err(format!("bad period {}", row.period));
    }
    if !TIME_TOKENS.contains(&row.hour.as_str()) || DAY_PERIODS.contains(&row.hour.as_str()) {
        return Err(format!("bad hour {}", row.hour));
    }
    let dep = clock(&row.dep_time).ok_or_else(|| format!("bad time {}", row.dep_time))?;
    let arr = clock(&row.arr_time).ok_or_else(|| format!("bad time {}", row.arr_time))?;
    if !row.overnight && arr <= dep {
        return Err(format!("{} {} arrives before it leaves", row.class, row.number));
    }
    Ok(())
}

fn clock(s: &str) -> Option<(u8, u8)> {
    let (h, m) = s.split_once(':')?;
    if h.len() != 2 || m.len() != 2 {
        return None;
    }
    let (h, m) = (h.parse::<u8>().ok()?, m.parse::<u8>().ok()?);
    (h < 24 && m < 60).then_some((h, m))
}
