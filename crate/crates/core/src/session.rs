//! Live dialogue sessions driven by typed input or explicit frames.
//!
//! A session owns one dialogue, its channel and the transcript so far. Every call
//! returns a [`SessionEnvelope`] describing the state after the last completed turn.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{ActKind, ClosingReason, SystemSpeechAct};
use crate::channel::{constrain, corrupt, force, ChannelConfig, ChannelOutcome, Corruption, ForcedCorruption};
use crate::context::FocusTreeSnapshot;
use crate::engine::{DialogueEvent, DialogueState, Engine, EngineConfig, EngineError, InitiativeMode, TurnTrace};
use crate::error::LoadError;
use crate::expectations::{lexical_predictions, ExpectationSet, WordClassPrediction};
use crate::frames::{SemanticFrame, Slot, SlotStatus};
use crate::grammar::{Grammar, PlaceHints};
use crate::lexicon::Lexicon;
use crate::timetable::{TimetableQuery, TrainSolution};
use crate::transcript::{Transcript, TranscriptLine};
use crate::user::Scenario;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is closed")]
    Closed,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("unknown channel config {0:?}")]
    UnknownChannel(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    Config(#[from] LoadError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Options accepted when a session is created. Everything is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    /// A shipped channel config by name; `noiseless` when absent.
    pub channel: Option<String>,
    /// A complete channel config, taking precedence over `channel`.
    pub channel_config: Option<ChannelConfig>,
    /// Failure probability in every mode, isolated-word requests included.
    pub p_fail: Option<f64>,
    pub seed: Option<u64>,
    /// Name of a shipped scenario, recorded for the caller's benefit.
    pub scenario: Option<String>,
    pub engine: Option<EngineConfig>,
}

impl SessionOptions {
    pub fn channel_config(&self, lexicon: &Lexicon) -> Result<ChannelConfig, SessionError> {
        let mut cfg = match (&self.channel_config, &self.channel) {
            (Some(cfg), _) => cfg.clone(),
            (None, Some(name)) => ChannelConfig::named(name).ok_or_else(|| SessionError::UnknownChannel(name.clone()))?,
            (None, None) => ChannelConfig::noiseless(),
        };
        if let Some(p) = self.p_fail {
            cfg.p_fail = p;
            cfg.p_fail_isolated = Some(p);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate(lexicon)?;
        Ok(cfg)
    }
}

/// One caller turn: typed text or an explicit frame, with an optional imposed corruption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<SemanticFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt: Option<ForcedCorruption>,
}

impl UserInput {
    pub fn text(text: &str) -> UserInput {
        UserInput {
            text: Some(text.to_string()),
            frame: None,
            corrupt: None,
        }
    }

    pub fn frame(frame: SemanticFrame) -> UserInput {
        UserInput {
            text: None,
            frame: Some(frame),
            corrupt: None,
        }
    }

    pub fn corrupted(mut self, forced: ForcedCorruption) -> UserInput {
        self.corrupt = Some(forced);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRow {
    pub slot: Slot,
    #[serde(flatten)]
    pub status: SlotStatus,
}

/// What happened to the last input on its way to the dialogue manager.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEcho {
    pub text: String,
    pub intended: Option<SemanticFrame>,
    pub recognized: Option<SemanticFrame>,
    pub corruptions: Vec<Corruption>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub tn_state: String,
    pub mode: InitiativeMode,
    pub nonunderstood: u32,
    pub slots: Vec<SlotRow>,
    pub expectations: ExpectationSet,
    pub predictions: WordClassPrediction,
    pub focus_tree: FocusTreeSnapshot,
    pub last_event: Option<DialogueEvent>,
    pub last_trace: Option<TurnTrace>,
    pub last_input: Option<InputEcho>,
    pub presented: Option<(TimetableQuery, Vec<TrainSolution>)>,
    pub channel: ChannelConfig,
    pub scenario: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub schema_version: String,
    pub session_id: String,
    pub turn: u32,
    pub closed: Option<ClosingReason>,
    pub act: SystemSpeechAct,
    pub text: String,
    pub state: StateDump,
}

/// Reply of the service health check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub schema_version: String,
    pub sessions: usize,
}

/// Error body of every failed service call: `{"error": "<code>", "message": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    engine: Arc<Engine>,
    lexicon: Arc<Lexicon>,
    grammar: Arc<Grammar>,
    channel: ChannelConfig,
    rng: ChaCha8Rng,
    state: DialogueState,
    act: SystemSpeechAct,
    transcript: Transcript,
    last_trace: Option<TurnTrace>,
    last_input: Option<InputEcho>,
    scenario: Option<String>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        engine: Arc<Engine>,
        lexicon: Arc<Lexicon>,
        grammar: Arc<Grammar>,
        options: &SessionOptions,
    ) -> Result<Session, SessionError> {
        let channel = options.channel_config(&lexicon)?;
        if let Some(name) = &options.scenario {
            if !Scenario::builtin().iter().any(|s| &s.name == name) {
                return Err(SessionError::UnknownScenario(name.clone()));
            }
        }
        let engine = match &options.engine {
            Some(cfg) => Arc::new(engine.with_config(cfg.clone())),
            None => engine,
        };
        let (state, act) = engine.start();
        let mut transcript = Transcript::default();
        transcript.push(TranscriptLine::system(0, &act));
        Ok(Session {
            id: id.into(),
            rng: ChaCha8Rng::seed_from_u64(channel.seed),
            engine,
            lexicon,
            grammar,
            channel,
            state,
            act,
            transcript,
            last_trace: None,
            last_input: None,
            scenario: options.scenario.clone(),
        })
    }

    /// A session over the shipped data files.
    pub fn builtin(id: impl Into<String>, options: &SessionOptions) -> Result<Session, SessionError> {
        Session::new(
            id,
            Arc::new(Engine::builtin(EngineConfig::default())),
            Arc::new(Lexicon::builtin()),
            Arc::new(Grammar::builtin()),
            options,
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_closed(&self) -> bool {
        self.state.is_closed()
    }

    pub fn state(&self) -> &DialogueState {
        &self.state
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Which place slots a city named without a direction fills, given what the system just said.
    pub fn place_hints(act: &SystemSpeechAct) -> PlaceHints {
        let place = |s: Slot| (s == Slot::DepartureCity || s == Slot::ArrivalCity).then_some(s);
        match &act.kind {
            ActKind::RequestParam { slot, .. } => PlaceHints {
                requested: place(*slot),
                focused: None,
            },
            ActKind::ConfirmPlusInitiative { focused, requested, .. } => PlaceHints {
                requested: place(*requested),
                focused: place(*focused),
            },
            ActKind::YesNoConfirm { focus } => {
                let places: Vec<Slot> = focus.slots().filter_map(place).collect();
                let only = (places.len() == 1).then(|| places[0]);
                PlaceHints {
                    requested: only,
                    focused: only,
                }
            }
            ActKind::InformNonUnderstandingAndRequest { reprompt, .. } => Session::place_hints(reprompt),
            _ => PlaceHints::default(),
        }
    }

    fn validate_frame(&self, frame: &SemanticFrame) -> Result<(), SessionError> {
        for (slot, value) in frame.iter() {
            if self.lexicon.class_of(value) != Some(slot.word_class()) {
                return Err(SessionError::InvalidFrame(format!("{value} is not a valid {slot}")));
            }
            if slot == Slot::Confirmation && !matches!(value.as_str(), "YES" | "NO") {
                return Err(SessionError::InvalidFrame(format!("confirmation must be YES or NO, not {value}")));
            }
        }
        if frame.is_empty() {
            return Err(SessionError::InvalidFrame("empty frame".into()));
        }
        Ok(())
    }

    /// Run one caller turn.
    pub fn post(&mut self, input: &UserInput) -> Result<SessionEnvelope, SessionError> {
        if self.is_closed() {
            return Err(SessionError::Closed);
        }
        let (text, intended, parse_error) = match (&input.frame, &input.text) {
            (Some(frame), _) => {
                self.validate_frame(frame)?;
                (self.grammar.render(frame), Some(frame.clone()), None)
            }
            (None, Some(text)) => match self.grammar.parse(text, Session::place_hints(&self.act)) {
                Ok(frame) => (text.clone(), Some(frame), None),
                Err(e) => (text.clone(), None, Some(e.to_string())),
            },
            (None, None) => return Err(SessionError::InvalidFrame("input needs text or a frame".into())),
        };

        let outcome = match (&intended, &input.corrupt) {
            (None, _) => ChannelOutcome {
                recognized: None,
                corruptions: Vec::new(),
            },
            (Some(frame), Some(forced)) => force(frame, forced, &self.lexicon),
            (Some(frame), None) => {
                let raw = corrupt(frame, &self.channel, &self.lexicon, self.act.is_isolated_word(), &mut self.rng);
                constrain(&raw, &lexical_predictions(&self.state.expectations))
            }
        };

        if self.state.turn >= self.engine.config().max_turns {
            let (state, act) = self.engine.terminate(&self.state, ClosingReason::TurnLimit);
            self.transcript.push(TranscriptLine::system(self.state.turn, &act));
            self.state = state;
            self.act = act;
            return Ok(self.envelope());
        }
        let (state, act, trace) = self.engine.run_turn(&self.state, outcome.recognized.as_ref())?;
        self.transcript.push(TranscriptLine::user(text.clone(), intended.clone(), &trace));
        self.transcript.push(TranscriptLine::system(trace.turn, &act));
        self.last_input = Some(InputEcho {
            text,
            intended,
            recognized: outcome.recognized,
            corruptions: outcome.corruptions,
            parse_error,
        });
        self.last_trace = Some(trace);
        self.state = state;
        self.act = act;
        Ok(self.envelope())
    }

    /// The caller hangs up.
    pub fn close(&mut self) -> SessionEnvelope {
        if !self.is_closed() {
            let (state, act) = self.engine.terminate(&self.state, ClosingReason::HungUp);
            self.transcript.push(TranscriptLine::system(self.state.turn, &act));
            self.state = state;
            self.act = act;
        }
        self.envelope()
    }

    pub fn envelope(&self) -> SessionEnvelope {
        let s = &self.state;
        SessionEnvelope {
            schema_version: SCHEMA_VERSION.to_string(),
            session_id: self.id.clone(),
            turn: s.turn,
            closed: s.closed,
            act: self.act.clone(),
            text: self.act.render(),
            state: StateDump {
                tn_state: self.engine.network().state(s.tn_state).name.clone(),
                mode: s.mode,
                nonunderstood: s.nonunderstood,
                slots: Slot::TASK
                    .iter()
                    .map(|slot| SlotRow {
                        slot: *slot,
                        status: s.store.status(*slot).clone(),
                    })
                    .collect(),
                expectations: s.expectations.clone(),
                predictions: lexical_predictions(&s.expectations),
                focus_tree: s.hierarchy.snapshot(),
                last_event: s.last_event.clone(),
                last_trace: self.last_trace.clone(),
                last_input: self.last_input.clone(),
                presented: s.presented.clone(),
                channel: self.channel.clone(),
                scenario: self.scenario.clone(),
            },
        }
    }
}
