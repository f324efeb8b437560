//! Linguistic history and the context hierarchy.
//!
//! Each user turn is stored as a [`CycleStructure`]. Interpretation contexts form a
//! tree of [`FocusNode`]s rooted in the global focus; the engine keeps one node
//! active and climbs toward the root when an utterance does not fit there.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::SystemSpeechAct;
use crate::expectations::{ExpectationSet, MatchResult};
use crate::frames::{SemanticFrame, Slot, SlotStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CycleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for CycleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("unknown focus node {0}")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusMode {
    Root,
    /// Move to a sibling topic (new information).
    Shift,
    /// Narrow onto a disputed sub-topic (repair).
    Restriction,
    /// The local focus set up by a system act.
    Act,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub mode: FocusMode,
    /// Slots the system asked for while this node was in focus.
    pub requested: BTreeSet<Slot>,
    /// Values this node placed under discussion.
    pub under_conf: SemanticFrame,
    pub origin: CycleId,
    pub open: bool,
}

impl FocusNode {
    /// Whether every binding of `frame` makes sense at this node.
    ///
    /// A binding fits if its slot is requested here, if it repeats the value already
    /// held, or if it revisits a slot this node put under confirmation.
    pub fn is_consistent(&self, frame: &SemanticFrame, store: &SlotStore) -> bool {
        if self.parent.is_none() {
            return true;
        }
        frame.iter().all(|(slot, value)| {
            if slot == Slot::Confirmation {
                return self.requested.contains(&Slot::Confirmation);
            }
            let requested = self
                .requested
                .iter()
                .any(|r| slot.answers(*r) || slot.refines() == Some(*r));
            let repeated = store.value(slot) == Some(value);
            let revisited = self.under_conf.binds(slot)
                || slot.refines().is_some_and(|city| self.under_conf.binds(city));
            requested || repeated || revisited
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextHierarchy {
    nodes: Vec<FocusNode>,
    active: NodeId,
}

impl Default for ContextHierarchy {
    fn default() -> Self {
        ContextHierarchy::new()
    }
}

impl ContextHierarchy {
    pub const ROOT: NodeId = NodeId(0);

    pub fn new() -> ContextHierarchy {
        ContextHierarchy {
            nodes: vec![FocusNode {
                id: Self::ROOT,
                parent: None,
                mode: FocusMode::Root,
                requested: BTreeSet::from([Slot::DepartureCity, Slot::ArrivalCity]),
                under_conf: SemanticFrame::new(),
                origin: CycleId(0),
                open: true,
            }],
            active: Self::ROOT,
        }
    }

    pub fn active(&self) -> NodeId {
        self.active
    }

    pub fn active_node(&self) -> &FocusNode {
        &self.nodes[self.active.0 as usize]
    }

    pub fn node(&self, id: NodeId) -> Result<&FocusNode, ContextError> {
        self.nodes.get(id.0 as usize).ok_or(ContextError::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (id.0 as usize) < self.nodes.len()
    }

    pub fn nodes(&self) -> &[FocusNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Append a child of `parent` and make it the active focus.
    pub fn open_focus(
        &mut self,
        parent: NodeId,
        under_conf: SemanticFrame,
        requested: BTreeSet<Slot>,
        cycle: CycleId,
        mode: FocusMode,
    ) -> Result<NodeId, ContextError> {
        self.node(parent)?;
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(FocusNode {
            id,
            parent: Some(parent),
            mode,
            requested,
            under_conf,
            origin: cycle,
            open: true,
        });
        self.active = id;
        Ok(id)
    }

    pub fn set_active(&mut self, id: NodeId) -> Result<(), ContextError> {
        self.node(id)?;
        self.active = id;
        Ok(())
    }

    pub fn close(&mut self, id: NodeId) -> Result<(), ContextError> {
        self.node(id)?;
        self.nodes[id.0 as usize].open = false;
        Ok(())
    }

    /// Node ids from `id` up to the root, inclusive.
    pub fn path_to_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut cursor = Some(id);
        while let Some(n) = cursor {
            path.push(n);
            cursor = self.nodes[n.0 as usize].parent;
        }
        path
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.path_to_root(id).len() - 1
    }

    /// First node, climbing from the active focus, that is consistent with `frame`.
    pub fn resolve_context(&self, frame: &SemanticFrame, store: &SlotStore) -> NodeId {
        self.path_to_root(self.active)
            .into_iter()
            .find(|n| self.nodes[n.0 as usize].is_consistent(frame, store))
            .unwrap_or(Self::ROOT)
    }

    /// Nearest node at or above `id` that still has hypothesized values under discussion.
    pub fn nearest_pending(&self, id: NodeId, store: &SlotStore) -> Option<(NodeId, SemanticFrame)> {
        self.path_to_root(id).into_iter().find_map(|n| {
            let pending: SemanticFrame = self.nodes[n.0 as usize]
                .under_conf
                .iter()
                .filter(|(s, v)| {
                    store.status(*s).is_hypothesized() && store.value(*s) == Some(*v)
                })
                .map(|(s, v)| (s, v.clone()))
                .collect();
            (!pending.is_empty()).then_some((n, pending))
        })
    }

    pub fn snapshot(&self) -> FocusTreeSnapshot {
        FocusTreeSnapshot {
            nodes: self.nodes.clone(),
            edges: self
                .nodes
                .iter()
                .filter_map(|n| n.parent.map(|p| (p, n.id)))
                .collect(),
            active: self.active,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusTreeSnapshot {
    pub nodes: Vec<FocusNode>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub active: NodeId,
}

impl FocusTreeSnapshot {
    /// Indented one-node-per-line rendering, active node marked with `*`.
    pub fn outline(&self) -> String {
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (p, c) in &self.edges {
            children.entry(*p).or_default().push(*c);
        }
        let mut out = String::new();
        let mut stack = vec![(ContextHierarchy::ROOT, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            let node = &self.nodes[id.0 as usize];
            let mark = if id == self.active { "*" } else { " " };
            let requested: Vec<&str> = node.requested.iter().map(|s| s.label()).collect();
            out.push_str(&format!(
                "{}{mark}{id} {:?} {} asks[{}] {}\n",
                "  ".repeat(depth),
                node.mode,
                node.origin,
                requested.join(","),
                node.under_conf
            ));
            if let Some(kids) = children.get(&id) {
                for kid in kids.iter().rev() {
                    stack.push((*kid, depth + 1));
                }
            }
        }
        out
    }
}

/// One user turn with everything needed to interpret it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStructure {
    pub id: CycleId,
    pub turn: u32,
    /// `None` when recognition produced no interpretation.
    pub frame: Option<SemanticFrame>,
    pub act: SystemSpeechAct,
    pub expectations: ExpectationSet,
    pub matched: Option<MatchResult>,
    pub context: NodeId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinguisticHistory {
    cycles: Vec<CycleStructure>,
}

impl LinguisticHistory {
    pub fn new() -> LinguisticHistory {
        LinguisticHistory::default()
    }

    pub fn next_id(&self) -> CycleId {
        CycleId(self.cycles.len() as u32 + 1)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record_cycle(
        &mut self,
        hierarchy: &ContextHierarchy,
        turn: u32,
        frame: Option<SemanticFrame>,
        act: SystemSpeechAct,
        expectations: ExpectationSet,
        matched: Option<MatchResult>,
        context: NodeId,
    ) -> Result<CycleId, ContextError> {
        hierarchy.node(context)?;
        let id = self.next_id();
        self.cycles.push(CycleStructure {
            id,
            turn,
            frame,
            act,
            expectations,
            matched,
            context,
        });
        Ok(id)
    }

    pub fn get(&self, id: CycleId) -> Option<&CycleStructure> {
        id.0.checked_sub(1).and_then(|i| self.cycles.get(i as usize))
    }

    pub fn cycles(&self) -> &[CycleStructure] {
        &self.cycles
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn last(&self) -> Option<&CycleStructure> {
        self.cycles.last()
    }
}
