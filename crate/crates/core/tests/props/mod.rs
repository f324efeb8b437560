//! Property suites shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Debug;

use ferrovia_core::acts::ActKind;
use ferrovia_core::channel::{constrain, corrupt, ChannelConfig, Corruption, Substitution};
use ferrovia_core::context::FocusMode;
use ferrovia_core::expectations::{generate_expectations, lexical_predictions, match_frame, Expectation, ExpectationKind};
use ferrovia_core::frames::{frame_conflicts, MergeMode, SlotChange};
use ferrovia_core::grammar::PlaceHints;
use ferrovia_core::session::{Session, SessionOptions, UserInput};
use ferrovia_core::trial::dialogue_rng;
use ferrovia_core::{
    run_trial, ContextHierarchy, CycleId, DialogueEvent, Engine, EngineConfig, FocusNode, Grammar, Lexicon, NodeId,
    Scenario, SemanticFrame, Slot, SlotStatus, SlotStore, SystemSpeechAct, TemplateId, TrialConfig, UserSim, Value,
    WordClass, WordClassPrediction,
};
use proptest::prelude::*;
use proptest::sample::select;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<(), String>;

fn check<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome
where
    S: Strategy,
    S::Value: Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config).run(&strategy, test).map_err(|e| e.to_string())
}

// Small vocabularies: five place names, two dates, two periods, two hours.
const PLACES: [&str; 5] = ["ROMA", "ARONA", "MILANO", "PISA", "PISA-AEROPORTO"];
const STATIONS: [&str; 2] = ["CENTRALE", "TERMINI"];
const DATES: [&str; 2] = ["TODAY", "TOMORROW"];
const PERIODS: [&str; 2] = ["MORNING", "EVENING"];
const HOURS: [&str; 2] = ["EIGHT", "NINE"];

fn value_for(slot: Slot) -> BoxedStrategy<Value> {
    let pool: Vec<&'static str> = match slot {
        Slot::DepartureCity | Slot::ArrivalCity => PLACES.to_vec(),
        Slot::DepartureStation => STATIONS.to_vec(),
        Slot::Date => DATES.to_vec(),
        Slot::DepartureTime => PERIODS.to_vec(),
        Slot::Hour => HOURS.to_vec(),
        Slot::Confirmation => vec!["YES", "NO"],
    };
    select(pool).prop_map(Value::new).boxed()
}

/// A frame over `slots`, each slot bound with probability one half.
fn frame_over(slots: Vec<Slot>) -> BoxedStrategy<SemanticFrame> {
    let parts: Vec<BoxedStrategy<Option<(Slot, Value)>>> = slots
        .into_iter()
        .map(|s| proptest::option::of(value_for(s).prop_map(move |v| (s, v))).boxed())
        .collect();
    parts.prop_map(|bindings| bindings.into_iter().flatten().collect()).boxed()
}

fn any_frame() -> BoxedStrategy<SemanticFrame> {
    frame_over(Slot::ALL.to_vec())
}

fn task_frame() -> BoxedStrategy<SemanticFrame> {
    frame_over(Slot::TASK.to_vec())
}

fn status_for(slot: Slot) -> BoxedStrategy<SlotStatus> {
    prop_oneof![
        Just(SlotStatus::Unknown),
        Just(SlotStatus::Denied),
        value_for(slot).prop_map(SlotStatus::Hypothesized),
        value_for(slot).prop_map(SlotStatus::Confirmed),
    ]
    .boxed()
}

fn any_store() -> BoxedStrategy<SlotStore> {
    let parts: Vec<BoxedStrategy<(Slot, SlotStatus)>> = Slot::TASK
        .into_iter()
        .map(|s| status_for(s).prop_map(move |st| (s, st)).boxed())
        .collect();
    parts
        .prop_map(|rows| {
            rows.into_iter()
                .fold(SlotStore::new(), |store, (slot, status)| store.with_status(slot, status))
        })
        .boxed()
}

// ---------------------------------------------------------------------------
// Slot-status lattice

#[derive(Debug, Clone)]
enum StoreOp {
    Merge(SemanticFrame, MergeMode),
    Deny(Slot),
}

fn store_op() -> impl Strategy<Value = StoreOp> {
    prop_oneof![
        3 => (task_frame(), select(vec![MergeMode::NewInfo, MergeMode::Confirmation, MergeMode::Correction]))
            .prop_map(|(f, m)| StoreOp::Merge(f, m)),
        1 => select(Slot::TASK.to_vec()).prop_map(StoreOp::Deny),
    ]
}

fn edge_is_legal(from: &SlotStatus, to: &SlotStatus, mode: Option<MergeMode>) -> bool {
    use SlotStatus::*;
    match (from, to) {
        (Unknown, Hypothesized(_)) | (Denied, Hypothesized(_)) => true,
        (Hypothesized(a), Confirmed(b)) => a == b,
        (Hypothesized(a), Hypothesized(b)) => a != b,
        (Hypothesized(_), Denied) => mode.is_none(),
        (Confirmed(a), Hypothesized(b)) => a != b && mode == Some(MergeMode::Correction),
        _ => false,
    }
}

/// Expected per-slot outcome of merging one value, straight from the lattice rules.
fn expected_merge(from: &SlotStatus, v: &Value, mode: MergeMode) -> Option<SlotStatus> {
    use SlotStatus::*;
    let same = from.value() == Some(v);
    match mode {
        MergeMode::NewInfo if from.is_open() => Some(Hypothesized(v.clone())),
        MergeMode::NewInfo if same => Some(from.clone()),
        MergeMode::NewInfo => None,
        MergeMode::Confirmation if same => Some(Confirmed(v.clone())),
        MergeMode::Confirmation => None,
        MergeMode::Correction if from.is_open() => Some(Hypothesized(v.clone())),
        MergeMode::Correction if same => Some(Confirmed(v.clone())),
        MergeMode::Correction => Some(Hypothesized(v.clone())),
    }
}

fn check_changes(
    before: &SlotStore,
    after: &SlotStore,
    changes: &[SlotChange],
    mode: Option<MergeMode>,
) -> Result<(), TestCaseError> {
    for slot in Slot::TASK {
        let (a, b) = (before.status(slot), after.status(slot));
        let reported = changes.iter().find(|c| c.slot == slot);
        if a == b {
            prop_assert!(reported.is_none(), "{} unchanged but reported", slot);
            continue;
        }
        let Some(c) = reported else {
            return Err(TestCaseError::fail(format!("{slot} changed silently")));
        };
        prop_assert_eq!((&c.from, &c.to), (a, b));
        prop_assert!(edge_is_legal(a, b, mode), "illegal {}: {:?} -> {:?} under {:?}", slot, a, b, mode);
    }
    Ok(())
}

fn is_complete_oracle(store: &SlotStore) -> bool {
    [Slot::DepartureCity, Slot::ArrivalCity, Slot::Date]
        .into_iter()
        .all(|s| store.status(s).is_confirmed())
        && (store.status(Slot::DepartureTime).is_confirmed() || store.status(Slot::Hour).is_confirmed())
}

pub fn lattice_fuzz(cases: u32) -> Outcome {
    check(cases, proptest::collection::vec(store_op(), 1..10), |ops| {
        let mut store = SlotStore::new();
        for op in ops {
            match op {
                StoreOp::Merge(frame, mode) => {
                    let result = store.merge_frame(&frame, mode);
                    prop_assert_eq!(&result, &store.merge_frame(&frame, mode));
                    if frame.is_empty() {
                        prop_assert!(result.is_err());
                        continue;
                    }
                    let mut probe = store.clone();
                    let mut illegal = false;
                    for (slot, v) in frame.task_bindings() {
                        match expected_merge(store.status(slot), v, mode) {
                            Some(st) => probe = probe.with_status(slot, st),
                            None => illegal = true,
                        }
                    }
                    let orphan = probe.value(Slot::DepartureStation).is_some() && probe.value(Slot::DepartureCity).is_none();
                    match result {
                        Ok((next, changes)) => {
                            prop_assert!(!illegal && !orphan);
                            prop_assert_eq!(&next, &probe);
                            check_changes(&store, &next, &changes, Some(mode))?;
                            store = next;
                        }
                        Err(_) => prop_assert!(illegal || orphan),
                    }
                }
                StoreOp::Deny(slot) => match store.deny(slot) {
                    Ok((next, change)) => {
                        prop_assert!(store.status(slot).is_hypothesized());
                        check_changes(&store, &next, std::slice::from_ref(&change), None)?;
                        store = next;
                    }
                    Err(_) => prop_assert!(!store.status(slot).is_hypothesized()),
                },
            }
            prop_assert_eq!(store.is_complete(), is_complete_oracle(&store));
        }
        Ok(())
    })
}

pub fn conflicts_on_mentioned_slots(cases: u32) -> Outcome {
    check(cases, (any_store(), any_frame()), |(store, frame)| {
        let conflicts = frame_conflicts(&store, &frame);
        for slot in &conflicts {
            prop_assert!(frame.binds(*slot));
        }
        let expected: Vec<Slot> = Slot::TASK
            .into_iter()
            .filter(|s| matches!((store.value(*s), frame.get(*s)), (Some(a), Some(b)) if a != b))
            .collect();
        prop_assert_eq!(conflicts, expected);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Focus tree

#[derive(Debug, Clone)]
enum TreeOp {
    Open {
        parent: usize,
        under_conf: SemanticFrame,
        requested: BTreeSet<Slot>,
        restriction: bool,
    },
    Activate(usize),
    Close(usize),
}

fn tree_op() -> impl Strategy<Value = TreeOp> {
    let slot_set = proptest::collection::btree_set(select(Slot::ALL.to_vec()), 0..3);
    prop_oneof![
        4 => (any::<usize>(), task_frame(), slot_set, any::<bool>())
            .prop_map(|(parent, under_conf, requested, restriction)| TreeOp::Open { parent, under_conf, requested, restriction }),
        1 => any::<usize>().prop_map(TreeOp::Activate),
        1 => any::<usize>().prop_map(TreeOp::Close),
    ]
}

fn build_tree(ops: &[TreeOp]) -> ContextHierarchy {
    let mut tree = ContextHierarchy::new();
    for (i, op) in ops.iter().enumerate() {
        let pick = |k: usize| NodeId((k % tree.len()) as u32);
        match op {
            TreeOp::Open {
                parent,
                under_conf,
                requested,
                restriction,
            } => {
                let mode = if *restriction { FocusMode::Restriction } else { FocusMode::Shift };
                tree.open_focus(pick(*parent), under_conf.clone(), requested.clone(), CycleId(i as u32 + 1), mode)
                    .unwrap();
            }
            TreeOp::Activate(k) => tree.set_active(pick(*k)).unwrap(),
            TreeOp::Close(k) => tree.close(pick(*k)).unwrap(),
        }
    }
    tree
}

fn check_shape(tree: &ContextHierarchy) -> Result<(), TestCaseError> {
    let nodes = tree.nodes();
    prop_assert_eq!(nodes[0].parent, None);
    prop_assert_eq!(nodes.iter().filter(|n| n.parent.is_none()).count(), 1);
    for (i, node) in nodes.iter().enumerate() {
        prop_assert_eq!(node.id, NodeId(i as u32));
        if let Some(p) = node.parent {
            prop_assert!(p.0 < node.id.0, "parent after child");
        }
        let path = tree.path_to_root(node.id);
        prop_assert_eq!(*path.last().unwrap(), ContextHierarchy::ROOT);
        prop_assert_eq!(path.len(), path.iter().collect::<BTreeSet<_>>().len(), "cycle");
    }
    prop_assert!(tree.contains(tree.active()));
    Ok(())
}

/// Consistency written out from the three clauses, independently of the library.
fn consistent_oracle(node: &FocusNode, frame: &SemanticFrame, store: &SlotStore) -> bool {
    if node.parent.is_none() {
        return true;
    }
    let time = [Slot::DepartureTime, Slot::Hour];
    frame.iter().all(|(slot, value)| {
        if slot == Slot::Confirmation {
            return node.requested.contains(&Slot::Confirmation);
        }
        let requested = node.requested.contains(&slot)
            || (time.contains(&slot) && node.requested.iter().any(|r| time.contains(r)))
            || (slot == Slot::DepartureStation && node.requested.contains(&Slot::DepartureCity));
        let repeated = store.value(slot) == Some(value);
        let revisited = node.under_conf.binds(slot)
            || (slot == Slot::DepartureStation && node.under_conf.binds(Slot::DepartureCity));
        requested || repeated || revisited
    })
}

pub fn focus_tree_shape(cases: u32) -> Outcome {
    check(cases, proptest::collection::vec(tree_op(), 0..30), |ops| {
        let tree = build_tree(&ops);
        check_shape(&tree)?;
        let opened = ops.iter().filter(|op| matches!(op, TreeOp::Open { .. })).count();
        prop_assert_eq!(tree.len(), opened + 1);
        Ok(())
    })
}

pub fn climb_minimality(cases: u32) -> Outcome {
    let strategy = (proptest::collection::vec(tree_op(), 0..20), any_store(), any_frame());
    check(cases, strategy, |(ops, store, frame)| {
        if frame.is_empty() {
            return Ok(());
        }
        let tree = build_tree(&ops);
        for node in tree.nodes() {
            prop_assert_eq!(node.is_consistent(&frame, &store), consistent_oracle(node, &frame, &store));
        }
        let expected = tree
            .path_to_root(tree.active())
            .into_iter()
            .find(|n| consistent_oracle(&tree.nodes()[n.0 as usize], &frame, &store))
            .unwrap();
        let got = tree.resolve_context(&frame, &store);
        prop_assert_eq!(got, expected);
        if consistent_oracle(tree.active_node(), &frame, &store) {
            prop_assert_eq!(got, tree.active());
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Expectation matching

fn any_act() -> BoxedStrategy<SystemSpeechAct> {
    prop_oneof![
        Just(SystemSpeechAct::open_prompt()),
        (select(Slot::TASK.to_vec()), select(Slot::TASK.to_vec()))
            .prop_filter("distinct", |(f, r)| f != r)
            .prop_flat_map(|(f, r)| value_for(f).prop_map(move |v| SystemSpeechAct::confirm_plus_initiative(f, v, r))),
        task_frame()
            .prop_filter("non-empty", |f| !f.is_empty())
            .prop_map(|f| SystemSpeechAct::yes_no(f, TemplateId::Elliptic)),
        (select(Slot::TASK.to_vec()), any::<bool>()).prop_map(|(s, iso)| SystemSpeechAct::request(s, iso)),
        select(vec![Slot::DepartureCity, Slot::ArrivalCity])
            .prop_map(|s| SystemSpeechAct::not_understood(SystemSpeechAct::request(s, false))),
    ]
    .boxed()
}

/// Every pattern evaluated on its own, from the pattern definitions.
fn pattern_holds(e: &Expectation, frame: &SemanticFrame, store: &SlotStore) -> bool {
    use ExpectationKind::*;
    let bound: Vec<Slot> = frame.iter().map(|(s, _)| s).filter(|s| *s != Slot::Confirmation).collect();
    let conflicts: Vec<Slot> = bound
        .iter()
        .copied()
        .filter(|s| matches!(store.status(*s), SlotStatus::Hypothesized(v) | SlotStatus::Confirmed(v) if Some(v) != frame.get(*s)))
        .collect();
    let yn = frame.get(Slot::Confirmation).map(|v| v.as_str() == "YES");
    let focus = |s: &Slot| e.focused.contains(s) || (*s == Slot::DepartureStation && e.focused.contains(&Slot::DepartureCity));
    let time = [Slot::DepartureTime, Slot::Hour];
    let answers = |s: &Slot| match e.requested {
        Some(r) => *s == r || (time.contains(s) && time.contains(&r)),
        None => false,
    };
    let refines = |s: &Slot| *s == Slot::DepartureStation && e.requested == Some(Slot::DepartureCity);
    let correction = !conflicts.is_empty() && conflicts.iter().all(focus);
    match e.kind {
        BareYes => yn == Some(true) && bound.is_empty(),
        BareNo => yn == Some(false) && bound.is_empty(),
        ExplicitConfirmFocused => yn == Some(true) && conflicts.is_empty(),
        ExplicitDenyFocusedWithRequest => {
            yn == Some(false) && conflicts.is_empty() && !bound.is_empty() && !bound.iter().any(focus)
        }
        ExplicitDenyFocused => yn == Some(false) && conflicts.is_empty(),
        CorrectFocusedPlusProvideRequested => yn != Some(true) && correction && bound.iter().any(|s| answers(s) && !focus(s)),
        CorrectFocused => yn != Some(true) && correction,
        RepeatAsConfirm => yn.is_none() && conflicts.is_empty() && bound.iter().any(focus),
        ProvideRequestedPlusExtras => {
            yn.is_none() && conflicts.is_empty() && bound.iter().any(answers) && bound.iter().any(|s| !answers(s) && !refines(s))
        }
        ProvideRequested => {
            yn.is_none() && conflicts.is_empty() && bound.iter().any(answers) && bound.iter().all(|s| answers(s) || refines(s))
        }
    }
}

pub fn expectation_match(cases: u32) -> Outcome {
    check(cases, (any_act(), any_store(), any_frame()), |(act, store, frame)| {
        let set = generate_expectations(&act, CycleId(1));
        let best = set
            .iter()
            .filter(|e| pattern_holds(e, &frame, &store))
            .min_by_key(|e| e.kind.priority())
            .map(|e| e.kind);
        let result = match_frame(&set, &frame, &store);
        prop_assert_eq!(result.kind(), best);
        if let Some(e) = result.expectation() {
            prop_assert!(pattern_holds(e, &frame, &store));
        }
        prop_assert_eq!(&result, &match_frame(&set, &frame, &store));
        if result.implicature {
            let e = result.expectation().unwrap();
            prop_assert!(!result.conflicting_slots.is_empty());
            prop_assert!(result.conflicting_slots.iter().all(|s| e.focused.contains(s)
                || (*s == Slot::DepartureStation && e.focused.contains(&Slot::DepartureCity))));
        }
        if !set.is_empty() {
            prop_assert!(!lexical_predictions(&set).is_empty());
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Error channel

fn noisy_channel() -> ChannelConfig {
    let mut cfg = ChannelConfig::named("ablation").unwrap();
    cfg.p_fail = 0.1;
    cfg.p_del.insert(Slot::ArrivalCity, 0.2);
    cfg
}

pub fn channel_determinism(cases: u32) -> Outcome {
    let strategy = (any::<u64>(), proptest::collection::vec(task_frame(), 1..12), any::<bool>());
    let cfg = noisy_channel();
    let lexicon = Lexicon::builtin();
    check(cases, strategy, |(seed, frames, isolated)| {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            frames
                .iter()
                .map(|f| corrupt(f, &cfg, &lexicon, isolated, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = run();
        prop_assert_eq!(&a, &run());
        for (outcome, frame) in a.iter().zip(&frames) {
            prop_assert_eq!(outcome.recognized.is_none(), outcome.corruptions.contains(&Corruption::Failure));
            if outcome.corruptions.is_empty() {
                prop_assert_eq!(outcome.recognized.as_ref(), Some(frame));
            }
        }
        Ok(())
    })
}

/// Measured corruption rates over `draws` calls, each within 2% (relative) of its setting.
pub fn channel_frequencies(draws: usize) -> Outcome {
    let cfg = ChannelConfig {
        p_fail: 0.1,
        p_del: [(Slot::Date, 0.25)].into_iter().collect(),
        substitutions: vec![
            Substitution {
                from: Value::new("ROMA"),
                to: Value::new("ARONA"),
                p: 0.3,
            },
            Substitution {
                from: Value::new("ROMA"),
                to: Value::new("TORINO"),
                p: 0.1,
            },
        ],
        ..ChannelConfig::default()
    };
    let lexicon = Lexicon::builtin();
    let frame = SemanticFrame::new().with(Slot::ArrivalCity, "ROMA").with(Slot::Date, "TODAY");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut fail, mut del, mut arona, mut torino) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..draws {
        for c in corrupt(&frame, &cfg, &lexicon, false, &mut rng).corruptions {
            match c {
                Corruption::Failure => fail += 1,
                Corruption::Deletion { .. } => del += 1,
                Corruption::Substitution { to, .. } if to.as_str() == "ARONA" => arona += 1,
                Corruption::Substitution { .. } => torino += 1,
                Corruption::Misparse { .. } => {}
            }
        }
    }
    // A failed draw reports only the failure, so the other rates are taken over survivors.
    let survivors = draws - fail;
    for (name, count, total, p) in [
        ("failure", fail, draws, 0.1),
        ("deletion", del, survivors, 0.25),
        ("ROMA->ARONA", arona, survivors, 0.3),
        ("ROMA->TORINO", torino, survivors, 0.1),
    ] {
        let measured = count as f64 / total as f64;
        if (measured - p).abs() > 0.02 * p {
            return Err(format!("{name}: measured {measured:.4}, configured {p}"));
        }
    }
    Ok(())
}

pub fn constrain_monotone(cases: u32) -> Outcome {
    let classes = proptest::collection::btree_set(
        select(vec![WordClass::PlaceName, WordClass::DateExpr, WordClass::TimeExpr, WordClass::YesNoAdverb]),
        0..4,
    );
    let cfg = noisy_channel();
    let lexicon = Lexicon::builtin();
    check(cases, (any::<u64>(), any_frame(), classes), |(seed, frame, classes)| {
        let predictions: WordClassPrediction = classes.into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = corrupt(&frame, &cfg, &lexicon, false, &mut rng);
        let kept = constrain(&raw, &predictions);
        prop_assert!(kept.corrupted_slots(&frame) <= raw.corrupted_slots(&frame));
        prop_assert_eq!(kept.recognized.is_none(), raw.recognized.is_none());
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Engine invariants over random recognized frames

pub fn engine_invariants(cases: u32) -> Outcome {
    let turn = prop_oneof![1 => Just(None), 6 => any_frame().prop_map(Some)];
    let strategy = (proptest::collection::vec(turn, 1..16), any::<bool>(), any::<bool>());
    check(cases, strategy, |(turns, climb, implicature)| {
        let engine = Engine::builtin(EngineConfig {
            climb,
            implicature,
            ..EngineConfig::default()
        });
        let (mut state, _) = engine.start();
        for turn in &turns {
            if state.is_closed() {
                break;
            }
            let cycles = state.history.len();
            let (next, act, trace) = engine.run_turn(&state, turn.as_ref()).unwrap();
            prop_assert_eq!(next.history.len(), cycles + 1);
            prop_assert_eq!(&next.history.cycles()[..cycles], state.history.cycles());
            prop_assert_eq!(next.turn, state.turn + 1);
            check_shape(&next.hierarchy)?;
            let event = &trace.classification.event;
            for change in &trace.changes {
                if change.from.value().is_some() && change.from.value() != change.to.value() {
                    prop_assert!(
                        matches!(event, DialogueEvent::ImplicatureRepair { .. } | DialogueEvent::Denial { .. }),
                        "{:?} overwritten under {:?}",
                        change,
                        event
                    );
                }
            }
            if let DialogueEvent::ImplicatureRepair { slots, target_cycle } = event {
                prop_assert!(!slots.is_empty());
                prop_assert!(target_cycle.0 >= 1 && (target_cycle.0 as usize) <= cycles);
                match &act.kind {
                    ActKind::YesNoConfirm { focus } => {
                        prop_assert!(focus.task_slots().iter().all(|s| slots.contains(s)));
                    }
                    other => return Err(TestCaseError::fail(format!("repair answered with {other:?}"))),
                }
            }
            state = next;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Simulated caller, grammar and replay

pub fn cooperative_user(cases: u32) -> Outcome {
    let scenarios = Scenario::builtin();
    let engine = Engine::builtin(EngineConfig::default());
    let cfg = ChannelConfig::named("calibrated").unwrap();
    let lexicon = Lexicon::builtin();
    check(cases, (0usize..64, any::<u64>()), |(index, seed)| {
        let scenario = scenarios[index % scenarios.len()].clone();
        let goal = scenario.goal.clone();
        let mut user = UserSim::new(scenario);
        let mut user_rng = dialogue_rng(seed, index, 1);
        let mut channel_rng = dialogue_rng(seed, index, 0);
        let (mut state, mut act) = engine.start();
        while let Some(turn) = user.respond(&act, &mut user_rng) {
            for (slot, value) in turn.frame.task_bindings() {
                prop_assert_eq!(goal.get(slot), Some(value), "{} in {:?}", slot, turn);
            }
            if state.turn >= engine.config().max_turns {
                break;
            }
            let out = corrupt(&turn.frame, &cfg, &lexicon, act.is_isolated_word(), &mut channel_rng);
            let (next, next_act, _) = engine.run_turn(&state, out.recognized.as_ref()).unwrap();
            state = next;
            act = next_act;
        }
        Ok(())
    })
}

pub fn grammar_round_trip(cases: u32) -> Outcome {
    let places = vec![Slot::DepartureCity, Slot::ArrivalCity];
    let strategy = (
        frame_over(vec![
            Slot::DepartureCity,
            Slot::ArrivalCity,
            Slot::Date,
            Slot::DepartureTime,
            Slot::Hour,
            Slot::Confirmation,
        ]),
        proptest::option::of(select(vec!["CENTRALE", "TERMINI", "TIBURTINA", "PORTA-GARIBALDI", "SANTA-MARIA-NOVELLA"])),
        proptest::option::of(select(places.clone())),
        proptest::option::of(select(places)),
    );
    let grammar = Grammar::builtin();
    check(cases, strategy, |(mut frame, station, requested, focused)| {
        if frame.is_empty() {
            return Ok(());
        }
        if let (Some(st), true) = (station, frame.binds(Slot::DepartureCity)) {
            frame.bind(Slot::DepartureStation, Value::new(st));
        }
        let text = grammar.render(&frame);
        prop_assert_eq!(grammar.parse(&text, PlaceHints { requested, focused }), Ok(frame), "{}", text);
        Ok(())
    })
}

pub fn replay_determinism(cases: u32) -> Outcome {
    check(cases, (any::<u64>(), 4usize..24), |(seed, n)| {
        let cfg = TrialConfig {
            seed: Some(seed),
            ..TrialConfig::new(n, ChannelConfig::named("calibrated").unwrap())
        };
        let a = run_trial(cfg.clone()).unwrap();
        let b = run_trial(cfg).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Sessions

fn session_input() -> impl Strategy<Value = UserInput> {
    prop_oneof![
        select(vec![
            "from Milano to Roma",
            "to Roma",
            "yes",
            "no",
            "I said Roma",
            "from Pisa Aeroporto",
            "in the evening at eight",
            "today",
            "blah",
        ])
        .prop_map(UserInput::text),
        task_frame()
            .prop_filter("non-empty", |f| !f.is_empty())
            .prop_map(UserInput::frame),
    ]
}

/// Sessions posted to in an arbitrary interleaving answer exactly as when run alone.
pub fn session_isolation(cases: u32) -> Outcome {
    let strategy = (
        proptest::collection::vec(proptest::collection::vec(session_input(), 1..8), 2..4),
        proptest::collection::vec(any::<usize>(), 0..40),
        select(vec![None, Some(0.3)]),
    );
    check(cases, strategy, |(scripts, schedule, p_fail)| {
        let options = SessionOptions {
            p_fail,
            seed: Some(7),
            channel: Some("calibrated".into()),
            ..Default::default()
        };
        let open = |i: usize| Session::builtin(format!("s{i}"), &options).unwrap();
        let drive = |session: &mut Session, input: &UserInput| {
            if session.is_closed() {
                None
            } else {
                Some(session.post(input).map_err(|e| e.to_string()))
            }
        };

        let solo: Vec<Vec<_>> = scripts
            .iter()
            .enumerate()
            .map(|(i, script)| {
                let mut s = open(i);
                script.iter().map(|input| drive(&mut s, input)).collect()
            })
            .collect();

        let mut sessions: Vec<Session> = (0..scripts.len()).map(open).collect();
        let mut cursor = vec![0usize; scripts.len()];
        let mut seen: Vec<Vec<_>> = vec![Vec::new(); scripts.len()];
        let order = schedule
            .iter()
            .map(|k| k % scripts.len())
            .chain((0..scripts.len()).flat_map(|i| std::iter::repeat_n(i, scripts[i].len())));
        for i in order {
            if cursor[i] < scripts[i].len() {
                seen[i].push(drive(&mut sessions[i], &scripts[i][cursor[i]]));
                cursor[i] += 1;
            }
        }
        prop_assert_eq!(seen, solo);
        Ok(())
    })
}
