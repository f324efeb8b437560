use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ferrovia_client::{Client, ClientError, DEFAULT_SERVER};
use ferrovia_core::channel::{ChannelConfig, ForcedCorruption};
use ferrovia_core::session::{SessionEnvelope, SessionOptions, UserInput};
use ferrovia_core::transcript::{Speaker, Transcript};
use ferrovia_core::trial::{run_trial, Ablation, MetricsReport, TrialConfig, TrialRequest};
use ferrovia_core::{Engine, EngineConfig, Lexicon, Scenario, SemanticFrame, Slot, Value};
use tokio::io::{AsyncBufReadExt, BufReader};

/// Talk to the railway dialogue service, run simulated trials, replay transcripts.
#[derive(Debug, Parser)]
#[command(name = "ferrovia", version)]
struct Cli {
    /// Service base URL.
    #[arg(long, global = true, env = "FERROVIA_SERVER", default_value = DEFAULT_SERVER)]
    server: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interactive session: type what the caller says.
    Chat(ChatArgs),
    /// Run simulated callers against the engine and print metrics.
    Trial(TrialArgs),
    /// Feed a transcript's recognized frames to a fresh dialogue and compare system turns.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ChatArgs {
    /// Shipped channel config for the session.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    p_fail: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the state dump after every turn.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct TrialArgs {
    #[arg(long, default_value_t = 923)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Shipped config name or a path to a channel TOML file.
    #[arg(long, default_value = "calibrated")]
    channel_config: String,
    /// Scenario TOML file; the shipped scenarios when absent.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Disable a mechanism: implicature, climb or predictions.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<Ablation>,
    /// Write one JSON-lines transcript per dialogue here (needs --local).
    #[arg(long)]
    transcripts_dir: Option<PathBuf>,
    /// Run in-process instead of on the service.
    #[arg(long)]
    local: bool,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    transcript: PathBuf,
    /// Replay in-process instead of on the service.
    #[arg(long)]
    local: bool,
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let client = Client::new(&cli.server);
    let result = match cli.command {
        Command::Chat(args) => chat(&client, args).await,
        Command::Trial(args) => trial(&client, args).await,
        Command::Replay(args) => replay(&client, args).await,
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn print_turn(env: &SessionEnvelope, verbose: bool) {
    if let Some(event) = &env.state.last_event {
        if env.turn > 0 {
            println!("   [{}]", event.name());
        }
    }
    println!("S{}: {}", env.turn, env.text);
    if verbose {
        for row in &env.state.slots {
            println!("     {:<18} {:?}", row.slot.label(), row.status);
        }
        print!("{}", env.state.focus_tree.outline());
    }
}

const CHAT_HELP: &str = "commands: /sub FROM TO, /fail, /drop SLOT (corrupt the next utterance), /state, /transcript, /quit";

async fn chat(client: &Client, args: ChatArgs) -> CliResult {
    let options = SessionOptions {
        channel: args.channel,
        p_fail: args.p_fail,
        seed: args.seed,
        ..Default::default()
    };
    let mut env = client.create_session(&options).await?;
    let id = env.session_id.clone();
    println!("session {id}\n{CHAT_HELP}");
    print_turn(&env, args.verbose);
    let mut forced: Option<ForcedCorruption> = None;
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    while env.closed.is_none() {
        let Some(line) = lines.next_line().await? else { break };
        let line = line.trim();
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] => continue,
            ["/quit"] => break,
            ["/help"] => println!("{CHAT_HELP}"),
            ["/state"] => print_turn(&client.get(&id).await?, true),
            ["/transcript"] => print!("{}", Transcript::from_jsonl(&client.transcript(&id).await?)?.pretty()),
            ["/fail"] => forced = Some(ForcedCorruption::Fail),
            ["/sub", from, to] => {
                forced = Some(ForcedCorruption::Substitute {
                    from: Value::new(from),
                    to: Value::new(to),
                })
            }
            ["/drop", slot] => match Slot::from_label(slot) {
                Some(slot) => forced = Some(ForcedCorruption::Delete { slot }),
                None => println!("unknown slot {slot}"),
            },
            [cmd, ..] if cmd.starts_with('/') => println!("{CHAT_HELP}"),
            _ => {
                let input = if line.starts_with('{') {
                    UserInput::frame(serde_json::from_str::<SemanticFrame>(line)?)
                } else {
                    UserInput::text(line)
                };
                let input = match forced.take() {
                    Some(f) => input.corrupted(f),
                    None => input,
                };
                match client.post(&id, &input).await {
                    Ok(next) => {
                        env = next;
                        print_turn(&env, args.verbose);
                    }
                    Err(e @ ClientError::Api { .. }) => println!("! {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    if env.closed.is_none() {
        client.close(&id).await?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_channel(name_or_path: &str) -> Result<ChannelConfig, Box<dyn std::error::Error>> {
    if let Some(cfg) = ChannelConfig::named(name_or_path) {
        return Ok(cfg);
    }
    Ok(ChannelConfig::load(Path::new(name_or_path), &Lexicon::builtin())?)
}

async fn trial(client: &Client, args: TrialArgs) -> CliResult {
    let channel = load_channel(&args.channel_config)?;
    let scenarios = match &args.scenarios {
        Some(path) => Scenario::load(path, &Lexicon::builtin())?,
        None => Scenario::builtin(),
    };
    let ablate: BTreeSet<Ablation> = args.ablate.iter().copied().collect();
    let report: MetricsReport = if args.local {
        let cfg = TrialConfig {
            n: args.n,
            seed: args.seed,
            channel,
            scenarios,
            engine: EngineConfig::default(),
            ablate,
            transcripts_dir: args.transcripts_dir,
        };
        tokio::task::spawn_blocking(move || run_trial(cfg)).await??
    } else {
        if args.transcripts_dir.is_some() {
            return Err("--transcripts-dir needs --local".into());
        }
        let request = TrialRequest {
            n: args.n,
            seed: args.seed,
            channel: None,
            channel_config: Some(channel),
            scenarios: args.scenarios.is_some().then_some(scenarios),
            ablate,
            engine: None,
        };
        client.trial(&request).await?
    };
    if args.json {
        println!("{}", report.to_json());
    } else {
        println!("{report}");
    }
    Ok(ExitCode::SUCCESS)
}

/// System texts of a transcript, and the recognized frame of each user turn.
fn split_transcript(t: &Transcript) -> (Vec<String>, Vec<(String, Option<SemanticFrame>)>) {
    let mut system = Vec::new();
    let mut user = Vec::new();
    for line in &t.lines {
        match line.speaker {
            Speaker::System => system.push(line.text.clone()),
            Speaker::User => user.push((line.text.clone(), line.recognized.clone().filter(|f| !f.is_empty()))),
        }
    }
    (system, user)
}

async fn replay(client: &Client, args: ReplayArgs) -> CliResult {
    let transcript = Transcript::from_jsonl(&std::fs::read_to_string(&args.transcript)?)?;
    let (expected, turns) = split_transcript(&transcript);
    let mut produced = Vec::new();
    if args.local {
        let engine = Engine::builtin(EngineConfig::default());
        let (mut state, act) = engine.start();
        produced.push(act.render());
        for (_, recognized) in &turns {
            let (next, act, _) = engine.run_turn(&state, recognized.as_ref())?;
            produced.push(act.render());
            state = next;
        }
    } else {
        let env = client.create_session(&SessionOptions::default()).await?;
        let id = env.session_id.clone();
        produced.push(env.text);
        for (text, recognized) in &turns {
            let input = match recognized {
                Some(frame) => UserInput::frame(frame.clone()),
                None => UserInput::text(text).corrupted(ForcedCorruption::Fail),
            };
            produced.push(client.post(&id, &input).await?.text);
        }
        let _ = client.close(&id).await;
    }
    let mut mismatches = 0;
    for (i, (want, got)) in expected.iter().zip(&produced).enumerate() {
        if want == got {
            println!("S{i}: {got}");
        } else {
            mismatches += 1;
            println!("S{i}: MISMATCH\n   transcript: {want}\n   replayed:   {got}");
        }
    }
    if expected.len() > produced.len() {
        println!("({} trailing system turns not driven by the caller)", expected.len() - produced.len());
    }
    if mismatches == 0 {
        println!("replay matches ({} system turns)", produced.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{mismatches} mismatching system turns");
        Ok(ExitCode::FAILURE)
    }
}
