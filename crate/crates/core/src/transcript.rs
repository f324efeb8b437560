//! Turn-by-turn dialogue transcripts, one JSON object per line.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::acts::SystemSpeechAct;
use crate::context::NodeId;
use crate::engine::{DialogueEvent, TurnTrace};
use crate::frames::SemanticFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub turn: u32,
    pub speaker: Speaker,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub act: Option<String>,
    /// What the caller meant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<SemanticFrame>,
    /// What reached the dialogue manager; absent on a recognition failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recognized: Option<SemanticFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<DialogueEvent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<NodeId>,
}

impl TranscriptLine {
    pub fn system(turn: u32, act: &SystemSpeechAct) -> TranscriptLine {
        TranscriptLine {
            turn,
            speaker: Speaker::System,
            text: act.render(),
            act: Some(act.kind_name().to_string()),
            frame: None,
            recognized: None,
            event: None,
            context: None,
        }
    }

    pub fn user(text: String, intended: Option<SemanticFrame>, trace: &TurnTrace) -> TranscriptLine {
        TranscriptLine {
            turn: trace.turn,
            speaker: Speaker::User,
            text,
            act: None,
            frame: intended,
            recognized: trace.recognized.clone(),
            event: Some(trace.classification.event.clone()),
            context: Some(trace.classification.context),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
}

impl Transcript {
    pub fn push(&mut self, line: TranscriptLine) {
        self.lines.push(line);
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in &self.lines {
            serde_json::to_writer(&mut out, line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Transcript, serde_json::Error> {
        let lines = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Transcript { lines })
    }

    /// Human-readable `S:`/`U:` rendering.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let who = match line.speaker {
                Speaker::System => "S",
                Speaker::User => "U",
            };
            out.push_str(&format!("{who}{}: {}", line.turn, line.text));
            if let Some(event) = &line.event {
                out.push_str(&format!("   [{}]", event.name()));
            }
            out.push('\n');
        }
        out
    }
}
