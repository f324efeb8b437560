//! Stochastic recognition channel over semantic frames.
//!
//! Stands in for the speech recognizer and parser: an intended frame goes in, a
//! possibly corrupted frame (or nothing at all) comes out. Corruptions are drawn in a
//! fixed order (failure, deletion, substitution, misparse) and every call consumes the
//! same number of random draws for a given frame, so traces replay exactly.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::LoadError;
use crate::expectations::WordClassPrediction;
use crate::frames::{SemanticFrame, Slot, Value, WordClass};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Substitution {
    pub from: Value,
    pub to: Value,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisparseRule {
    /// Bindings that must all be present for the rule to fire.
    pub when: SemanticFrame,
    /// Bindings written over the frame.
    #[serde(default)]
    pub set: SemanticFrame,
    /// Slots removed from the frame.
    #[serde(default)]
    pub drop: Vec<Slot>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub seed: u64,
    pub p_fail: f64,
    pub p_del: BTreeMap<Slot, f64>,
    #[serde(rename = "substitution")]
    pub substitutions: Vec<Substitution>,
    #[serde(rename = "misparse")]
    pub misparses: Vec<MisparseRule>,
    /// Multiplier on every probability while isolated-word requests are in force.
    pub isolated_factor: f64,
    /// Failure probability in isolated-word mode, instead of the scaled `p_fail`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_fail_isolated: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            seed: 0,
            p_fail: 0.0,
            p_del: BTreeMap::new(),
            substitutions: Vec::new(),
            misparses: Vec::new(),
            isolated_factor: 0.1,
            p_fail_isolated: None,
        }
    }
}

const NAMED_CONFIGS: &[(&str, &str)] = &[
    ("default", include_str!("../data/channel/default.toml")),
    ("noiseless", include_str!("../data/channel/noiseless.toml")),
    ("ablation", include_str!("../data/channel/ablation.toml")),
    ("calibrated", include_str!("../data/channel/calibrated.toml")),
];

impl ChannelConfig {
    pub fn noiseless() -> ChannelConfig {
        ChannelConfig::default()
    }

    pub fn from_toml(text: &str, lexicon: &Lexicon) -> Result<ChannelConfig, LoadError> {
        let cfg: ChannelConfig = toml::from_str(text)?;
        cfg.validate(lexicon)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, lexicon: &Lexicon) -> Result<ChannelConfig, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
        ChannelConfig::from_toml(&text, lexicon)
    }

    /// One of the shipped configs: `default`, `noiseless`, `ablation`, `calibrated`.
    pub fn named(name: &str) -> Option<ChannelConfig> {
        NAMED_CONFIGS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| ChannelConfig::from_toml(text, &Lexicon::builtin()).expect("shipped channel config is valid"))
    }

    pub fn named_configs() -> impl Iterator<Item = &'static str> {
        NAMED_CONFIGS.iter().map(|(n, _)| *n)
    }

    pub fn validate(&self, lexicon: &Lexicon) -> Result<(), LoadError> {
        let bad = |what: String| Err(LoadError::Invalid(what));
        let mut probs = vec![("p_fail".to_string(), self.p_fail), ("isolated_factor".into(), self.isolated_factor)];
        probs.extend(self.p_fail_isolated.map(|p| ("p_fail_isolated".to_string(), p)));
        probs.extend(self.p_del.iter().map(|(s, p)| (format!("p_del.{s}"), *p)));
        probs.extend(self.substitutions.iter().map(|s| (format!("{}->{}", s.from, s.to), s.p)));
        probs.extend(self.misparses.iter().enumerate().map(|(i, m)| (format!("misparse {i}"), m.p)));
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {name} = {p} outside [0, 1]"));
            }
        }
        let mut outgoing: BTreeMap<&Value, f64> = BTreeMap::new();
        for s in &self.substitutions {
            let (from, to) = (lexicon.class_of(&s.from), lexicon.class_of(&s.to));
            if from.is_none() || from != to || s.from == s.to {
                return bad(format!("substitution {} -> {} must join two distinct words of one class", s.from, s.to));
            }
            *outgoing.entry(&s.from).or_default() += s.p;
        }
        if let Some((v, total)) = outgoing.into_iter().find(|(_, total)| *total > 1.0 + 1e-9) {
            return bad(format!("substitutions out of {v} sum to {total}"));
        }
        for (i, m) in self.misparses.iter().enumerate() {
            if m.when.is_empty() {
                return bad(format!("misparse {i} has an empty pattern"));
            }
        }
        Ok(())
    }

    /// Every substitution probability multiplied by `scale` (clamped to 1).
    pub fn with_substitution_scale(mut self, scale: f64) -> ChannelConfig {
        for s in &mut self.substitutions {
            s.p = (s.p * scale).min(1.0);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    Failure,
    Deletion { slot: Slot, value: Value },
    Substitution { slot: Slot, from: Value, to: Value, class: WordClass },
    Misparse { rule: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelOutcome {
    /// `None` when the whole utterance failed.
    pub recognized: Option<SemanticFrame>,
    pub corruptions: Vec<Corruption>,
}

impl ChannelOutcome {
    pub fn clean(frame: SemanticFrame) -> ChannelOutcome {
        ChannelOutcome {
            recognized: Some(frame),
            corruptions: Vec::new(),
        }
    }

    /// Slots whose recognized value differs from the intended one (missing counts).
    pub fn corrupted_slots(&self, intended: &SemanticFrame) -> usize {
        match &self.recognized {
            None => intended.len(),
            Some(rec) => {
                let mut slots: Vec<Slot> = intended.slots().chain(rec.slots()).collect();
                slots.sort();
                slots.dedup();
                slots.into_iter().filter(|s| intended.get(*s) != rec.get(*s)).count()
            }
        }
    }
}

/// Run `intended` through the channel. `isolated` applies the isolated-word factor.
pub fn corrupt<R: Rng + ?Sized>(
    intended: &SemanticFrame,
    cfg: &ChannelConfig,
    lexicon: &Lexicon,
    isolated: bool,
    rng: &mut R,
) -> ChannelOutcome {
    let scale = if isolated { cfg.isolated_factor } else { 1.0 };
    let hit = |rng: &mut R, p: f64| rng.random::<f64>() < p * scale;
    let mut corruptions = Vec::new();

    let failed = match (isolated, cfg.p_fail_isolated) {
        (true, Some(p)) => rng.random::<f64>() < p,
        _ => hit(rng, cfg.p_fail),
    };

    let mut frame = intended.clone();
    for (slot, value) in intended.iter() {
        let p = cfg.p_del.get(&slot).copied().unwrap_or(0.0);
        if hit(rng, p) {
            frame.remove(slot);
            corruptions.push(Corruption::Deletion {
                slot,
                value: value.clone(),
            });
        }
    }

    for (slot, value) in intended.iter() {
        let u: f64 = rng.random();
        if !frame.binds(slot) {
            continue;
        }
        let mut acc = 0.0;
        for s in cfg.substitutions.iter().filter(|s| s.from == *value) {
            acc += s.p * scale;
            if u < acc {
                frame.bind(slot, s.to.clone());
                corruptions.push(Corruption::Substitution {
                    slot,
                    from: value.clone(),
                    to: s.to.clone(),
                    class: lexicon.class_of(&s.to).unwrap_or(slot.word_class()),
                });
                break;
            }
        }
    }

    for (i, rule) in cfg.misparses.iter().enumerate() {
        let fire = hit(rng, rule.p);
        let applies = rule.when.iter().all(|(s, v)| frame.get(s) == Some(v));
        if fire && applies {
            for slot in &rule.drop {
                frame.remove(*slot);
            }
            for (s, v) in rule.set.iter() {
                frame.bind(s, v.clone());
            }
            corruptions.push(Corruption::Misparse { rule: i });
        }
    }

    if failed {
        return ChannelOutcome {
            recognized: None,
            corruptions: vec![Corruption::Failure],
        };
    }
    ChannelOutcome {
        recognized: Some(frame),
        corruptions,
    }
}

/// Suppress substitutions into word classes the dialogue does not predict.
pub fn constrain(outcome: &ChannelOutcome, predictions: &WordClassPrediction) -> ChannelOutcome {
    let Some(mut frame) = outcome.recognized.clone() else {
        return outcome.clone();
    };
    let mut kept = Vec::new();
    for c in &outcome.corruptions {
        match c {
            Corruption::Substitution { slot, from, to, class }
                if !predictions.contains(*class) && frame.get(*slot) == Some(to) =>
            {
                frame.bind(*slot, from.clone());
            }
            other => kept.push(other.clone()),
        }
    }
    ChannelOutcome {
        recognized: Some(frame),
        corruptions: kept,
    }
}

/// A corruption imposed on one turn instead of sampling the channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcedCorruption {
    Substitute { from: Value, to: Value },
    Fail,
    Delete { slot: Slot },
}

pub fn force(intended: &SemanticFrame, forced: &ForcedCorruption, lexicon: &Lexicon) -> ChannelOutcome {
    match forced {
        ForcedCorruption::Fail => ChannelOutcome {
            recognized: None,
            corruptions: vec![Corruption::Failure],
        },
        ForcedCorruption::Delete { slot } => {
            let mut frame = intended.clone();
            let corruptions = frame
                .remove(*slot)
                .map(|value| vec![Corruption::Deletion { slot: *slot, value }])
                .unwrap_or_default();
            ChannelOutcome {
                recognized: Some(frame),
                corruptions,
            }
        }
        ForcedCorruption::Substitute { from, to } => {
            let mut frame = intended.clone();
            let mut corruptions = Vec::new();
            for (slot, value) in intended.iter() {
                if value == from {
                    frame.bind(slot, to.clone());
                    corruptions.push(Corruption::Substitution {
                        slot,
                        from: from.clone(),
                        to: to.clone(),
                        class: lexicon.class_of(to).unwrap_or(slot.word_class()),
                    });
                }
            }
            ChannelOutcome {
                recognized: Some(frame),
                corruptions,
            }
        }
    }
}
