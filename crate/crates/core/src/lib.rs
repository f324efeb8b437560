//! Spoken-dialogue management for a railway timetable task, with miscommunication
//! repair driven by expectations and a focus tree, plus a simulation harness.

pub mod acts;
pub mod channel;
pub mod context;
pub mod engine;
pub mod error;
pub mod expectations;
pub mod frames;
pub mod grammar;
pub mod lexicon;
pub mod network;
pub mod session;
pub mod timetable;
pub mod transcript;
pub mod trial;
pub mod user;

pub use acts::{ActKind, ClosingReason, SystemSpeechAct, TemplateId};
pub use context::{ContextHierarchy, CycleId, FocusNode, LinguisticHistory, NodeId};
pub use engine::{Classification, DialogueEvent, DialogueState, Engine, EngineConfig, EngineError, InitiativeMode, TurnTrace};
pub use error::LoadError;
pub use expectations::{ExpectationKind, ExpectationSet, MatchResult, WordClassPrediction};
pub use frames::{SemanticFrame, Slot, SlotStatus, SlotStore, Value, WordClass};
pub use lexicon::Lexicon;
pub use timetable::{Timetable, TimetableQuery, TrainSolution};
pub use grammar::Grammar;
pub use trial::{run_trial, Ablation, MetricsReport, TrialConfig, TrialRequest};
pub use user::{Scenario, UserSim, UserTurn};
pub use session::{Session, SessionEnvelope, SessionError, SessionOptions, UserInput};
