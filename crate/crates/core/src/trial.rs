//! Batch trials: simulated callers talking to the engine through the noisy channel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::acts::{ActKind, ClosingReason};
use crate::channel::{constrain, corrupt, ChannelConfig};
use crate::engine::{Engine, EngineConfig, EngineError};
use crate::error::LoadError;
use crate::expectations::lexical_predictions;
use crate::grammar::Grammar;
use crate::lexicon::Lexicon;
use crate::network::TransitionNetwork;
use crate::timetable::Timetable;
use crate::transcript::{Transcript, TranscriptLine};
use crate::user::{Scenario, UserSim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Implicature,
    Climb,
    Predictions,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Implicature, Ablation::Climb, Ablation::Predictions];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Implicature => "implicature",
            Ablation::Climb => "climb",
            Ablation::Predictions => "predictions",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown ablation {s:?} (expected implicature, climb or predictions)"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: usize,
    /// Overrides the channel config's seed.
    #[serde(default)]
    pub seed: Option<u64>,
    pub channel: ChannelConfig,
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub ablate: BTreeSet<Ablation>,
    #[serde(default)]
    pub transcripts_dir: Option<PathBuf>,
}

impl TrialConfig {
    pub fn new(n: usize, channel: ChannelConfig) -> TrialConfig {
        TrialConfig {
            n,
            seed: None,
            channel,
            scenarios: Scenario::builtin(),
            engine: EngineConfig::default(),
            ablate: BTreeSet::new(),
            transcripts_dir: None,
        }
    }

    pub fn ablating(mut self, ablation: Ablation) -> TrialConfig {
        self.ablate.insert(ablation);
        self
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(self.channel.seed)
    }

    pub fn engine_config(&self) -> EngineConfig {
        let mut cfg = self.engine.clone();
        cfg.implicature &= !self.ablate.contains(&Ablation::Implicature);
        cfg.climb &= !self.ablate.contains(&Ablation::Climb);
        cfg
    }
}

/// A trial as requested over the wire: shipped data by name, or inline configs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialRequest {
    pub n: usize,
    pub seed: Option<u64>,
    /// A shipped channel config by name; `calibrated` when neither this nor
    /// `channel_config` is given.
    pub channel: Option<String>,
    pub channel_config: Option<ChannelConfig>,
    pub scenarios: Option<Vec<Scenario>>,
    pub ablate: BTreeSet<Ablation>,
    pub engine: Option<EngineConfig>,
}

impl TrialRequest {
    pub fn into_config(self) -> Result<TrialConfig, LoadError> {
        let lexicon = Lexicon::builtin();
        let channel = match (self.channel_config, self.channel.as_deref()) {
            (Some(cfg), _) => {
                cfg.validate(&lexicon)?;
                cfg
            }
            (None, name) => {
                let name = name.unwrap_or("calibrated");
                ChannelConfig::named(name).ok_or_else(|| LoadError::Invalid(format!("unknown channel config {name:?}")))?
            }
        };
        let scenarios = match self.scenarios {
            Some(list) => {
                for s in &list {
                    s.validate(&lexicon)?;
                }
                list
            }
            None => Scenario::builtin(),
        };
        Ok(TrialConfig {
            n: self.n,
            seed: self.seed,
            channel,
            scenarios,
            engine: self.engine.unwrap_or_default(),
            ablate: self.ablate,
            transcripts_dir: None,
        })
    }
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("a trial needs at least one dialogue and one scenario")]
    Empty,
    #[error("dialogue {index}: {source}")]
    Engine {
        index: usize,
        #[source]
        source: EngineError,
    },
    #[error("writing transcripts: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub index: usize,
    pub scenario: String,
    pub success: bool,
    pub user_turns: u32,
    /// User turns up to and including the one answered with the timetable.
    pub turns_to_info: Option<u32>,
    pub continuous: u32,
    pub isolated: u32,
    pub closing: Option<ClosingReason>,
    pub repairs: BTreeMap<String, u32>,
    pub corrupted_turns: u32,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub seed: u64,
    pub ablate: BTreeSet<Ablation>,
    pub successes: usize,
    pub success_rate: f64,
    pub continuous_total: u64,
    pub mean_continuous: f64,
    pub isolated_total: u64,
    pub mean_user_turns: f64,
    pub repairs: BTreeMap<String, u64>,
    pub records: Vec<DialogueRecord>,
    pub hash: String,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn success_pp(&self) -> f64 {
        100.0 * self.success_rate
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ablate = if self.ablate.is_empty() {
            "none".to_string()
        } else {
            self.ablate.iter().map(|a| a.name()).collect::<Vec<_>>().join(",")
        };
        writeln!(f, "dialogues              {:>10}", self.n)?;
        writeln!(f, "seed                   {:>10}", self.seed)?;
        writeln!(f, "ablated                {ablate:>10}")?;
        writeln!(f, "transaction success    {:>9.1}%", self.success_pp())?;
        writeln!(f, "continuous utterances  {:>10}", self.continuous_total)?;
        writeln!(f, "isolated-word utt.     {:>10}", self.isolated_total)?;
        writeln!(f, "utterances/dialogue    {:>10.2}", self.mean_continuous)?;
        for (kind, count) in &self.repairs {
            writeln!(f, "repair {kind:<16}{count:>10}")?;
        }
        write!(f, "hash                   {}", &self.hash[..16])
    }
}

/// One RNG stream per dialogue and role, independent of scheduling.
pub fn dialogue_rng(base: u64, index: usize, role: u8) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base.to_le_bytes());
    seed[8..16].copy_from_slice(&(index as u64).to_le_bytes());
    seed[16] = role;
    ChaCha8Rng::from_seed(seed)
}

const CHANNEL_ROLE: u8 = 0;
const USER_ROLE: u8 = 1;

pub struct Simulation {
    engine: Engine,
    lexicon: Lexicon,
    grammar: Grammar,
    cfg: TrialConfig,
}

impl Simulation {
    pub fn new(cfg: TrialConfig) -> Result<Simulation, TrialError> {
        Simulation::with_parts(cfg, Arc::new(TransitionNetwork::builtin()), Arc::new(Timetable::builtin()))
    }

    pub fn with_parts(
        cfg: TrialConfig,
        network: Arc<TransitionNetwork>,
        timetable: Arc<Timetable>,
    ) -> Result<Simulation, TrialError> {
        if cfg.n == 0 || cfg.scenarios.is_empty() {
            return Err(TrialError::Empty);
        }
        Ok(Simulation {
            engine: Engine::new(cfg.engine_config(), network, timetable),
            lexicon: Lexicon::builtin(),
            grammar: Grammar::builtin(),
            cfg,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Play dialogue `index` to the end.
    pub fn dialogue(&self, index: usize) -> Result<(DialogueRecord, Transcript), TrialError> {
        let cfg = &self.cfg;
        let scenario = &cfg.scenarios[index % cfg.scenarios.len()];
        let mut user = UserSim::new(scenario.clone());
        let base = cfg.base_seed();
        let mut channel_rng = dialogue_rng(base, index, CHANNEL_ROLE);
        let mut user_rng = dialogue_rng(base, index, USER_ROLE);
        let use_predictions = !cfg.ablate.contains(&Ablation::Predictions);
        let err = |source| TrialError::Engine { index, source };

        let (mut state, mut act) = self.engine.start();
        let mut transcript = Transcript::default();
        transcript.push(TranscriptLine::system(0, &act));
        let mut record = DialogueRecord {
            index,
            scenario: scenario.name.clone(),
            success: false,
            user_turns: 0,
            turns_to_info: None,
            continuous: 0,
            isolated: 0,
            closing: None,
            repairs: BTreeMap::new(),
            corrupted_turns: 0,
            hash: String::new(),
        };

        while let Some(turn) = user.respond(&act, &mut user_rng) {
            if state.turn >= self.engine.config().max_turns {
                let (next, closing) = self.engine.terminate(&state, ClosingReason::TurnLimit);
                transcript.push(TranscriptLine::system(state.turn, &closing));
                state = next;
                break;
            }
            let isolated = act.is_isolated_word();
            let mut outcome = corrupt(&turn.frame, &cfg.channel, &self.lexicon, isolated, &mut channel_rng);
            if use_predictions {
                outcome = constrain(&outcome, &lexical_predictions(&state.expectations));
            }
            if !outcome.corruptions.is_empty() {
                record.corrupted_turns += 1;
            }
            let (next, next_act, trace) = self.engine.run_turn(&state, outcome.recognized.as_ref()).map_err(err)?;
            record.user_turns += 1;
            if isolated {
                record.isolated += 1;
            } else {
                record.continuous += 1;
            }
            let event = &trace.classification.event;
            if event.is_repair() {
                *record.repairs.entry(event.name().to_string()).or_default() += 1;
            }
            if matches!(next_act.kind, ActKind::PresentInfo { .. }) && record.turns_to_info.is_none() {
                record.turns_to_info = Some(record.user_turns);
            }
            transcript.push(TranscriptLine::user(self.grammar.render(&turn.frame), Some(turn.frame), &trace));
            transcript.push(TranscriptLine::system(trace.turn, &next_act));
            state = next;
            act = next_act;
        }

        record.closing = state.closed;
        record.success = state
            .presented
            .as_ref()
            .is_some_and(|(query, solutions)| scenario.is_satisfied_by(query, solutions));
        record.hash = hex::encode(Sha256::digest(transcript.to_jsonl().as_bytes()));
        Ok((record, transcript))
    }

    pub fn run(&self) -> Result<MetricsReport, TrialError> {
        let cfg = &self.cfg;
        if let Some(dir) = &cfg.transcripts_dir {
            std::fs::create_dir_all(dir)?;
        }
        let records = (0..cfg.n)
            .into_par_iter()
            .map(|index| {
                let (record, transcript) = self.dialogue(index)?;
                if let Some(dir) = &cfg.transcripts_dir {
                    let path = dir.join(format!("{index:05}-{}.jsonl", record.scenario));
                    std::fs::write(path, transcript.to_jsonl())?;
                }
                Ok(record)
            })
            .collect::<Result<Vec<_>, TrialError>>()?;
        Ok(aggregate(cfg, records))
    }
}

fn aggregate(cfg: &TrialConfig, mut records: Vec<DialogueRecord>) -> MetricsReport {
    records.sort_by_key(|r| r.index);
    let n = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let continuous_total: u64 = records.iter().map(|r| u64::from(r.continuous)).sum();
    let isolated_total: u64 = records.iter().map(|r| u64::from(r.isolated)).sum();
    let turns: u64 = records.iter().map(|r| u64::from(r.user_turns)).sum();
    let mut repairs = BTreeMap::new();
    for r in &records {
        for (kind, count) in &r.repairs {
            *repairs.entry(kind.clone()).or_default() += u64::from(*count);
        }
    }
    let mut hasher = Sha256::new();
    for r in &records {
        hasher.update(r.hash.as_bytes());
    }
    MetricsReport {
        n,
        seed: cfg.base_seed(),
        ablate: cfg.ablate.clone(),
        successes,
        success_rate: successes as f64 / n as f64,
        continuous_total,
        mean_continuous: continuous_total as f64 / n as f64,
        isolated_total,
        mean_user_turns: turns as f64 / n as f64,
        repairs,
        records,
        hash: hex::encode(hasher.finalize()),
    }
}

pub fn run_trial(cfg: TrialConfig) -> Result<MetricsReport, TrialError> {
    Simulation::new(cfg)?.run()
}
