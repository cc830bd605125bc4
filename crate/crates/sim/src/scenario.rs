//! Declarative description of what runs, at which level, on which queue.

use std::collections::HashMap;

use irqueue_core::{NodeId, QueueId, SharedMemory};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Layout token standing for a queue's own sentinel.
pub const SENTINEL: &str = "sentinel";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub name: String,
    #[serde(default)]
    pub self_sentinel: bool,
    /// Initial contents from head to tail. Must contain [`SENTINEL`] once.
    pub layout: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpSpecKind {
    /// Enqueue of a chain, head first. Usually a single node.
    Enqueue { nodes: Vec<String> },
    Dequeue,
    Peek { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpSpec {
    #[serde(flatten)]
    pub kind: OpSpecKind,
    pub level: usize,
    /// Index into [`Scenario::queues`].
    pub queue: usize,
}

/// Operations per level run in declaration order; operations on different
/// levels interleave as the schedule dictates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub levels: usize,
    pub queues: Vec<QueueSpec>,
    pub ops: Vec<OpSpec>,
    /// Dequeue everything once all operations have finished.
    pub drain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("level count must be at least 1")]
    NoLevels,
    #[error("at least one queue is required")]
    NoQueues,
    #[error("queue `{0}` declared twice")]
    DuplicateQueue(String),
    #[error("op {op}: level {level} out of range (scenario has {levels} levels)")]
    LevelOutOfRange { op: usize, level: usize, levels: usize },
    #[error("op {op}: P operations may only run at level 0, found level {level}")]
    DequeueLevel { op: usize, level: usize },
    #[error("op {op}: unknown queue index {queue}")]
    UnknownQueue { op: usize, queue: usize },
    #[error("op {op}: enqueue needs at least one node")]
    EmptyEnqueue { op: usize },
    #[error("op {op}: peek limit must be positive")]
    ZeroPeek { op: usize },
    #[error("node `{0}` is used more than once")]
    DuplicateNode(String),
    #[error("`{0}` is reserved for the sentinel")]
    ReservedName(String),
    #[error("invalid node name `{0}`")]
    BadName(String),
    #[error("layout of queue `{queue}` must contain the sentinel exactly once")]
    LayoutSentinel { queue: String },
}

impl Scenario {
    /// A scenario with one queue named `q` holding only its sentinel.
    pub fn new(levels: usize) -> Self {
        Scenario {
            levels,
            queues: vec![QueueSpec {
                name: "q".into(),
                self_sentinel: false,
                layout: vec![SENTINEL.into()],
            }],
            ops: Vec::new(),
            drain: true,
        }
    }

    pub fn with_layout(mut self, layout: &[&str]) -> Self {
        self.queues[0].layout = layout.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn enqueue(mut self, level: usize, nodes: &[&str]) -> Self {
        self.ops.push(OpSpec {
            kind: OpSpecKind::Enqueue {
                nodes: nodes.iter().map(|s| s.to_string()).collect(),
            },
            level,
            queue: 0,
        });
        self
    }

    pub fn dequeue(mut self) -> Self {
        self.ops.push(OpSpec {
            kind: OpSpecKind::Dequeue,
            level: 0,
            queue: 0,
        });
        self
    }

    pub fn peek(mut self, level: usize, limit: usize) -> Self {
        self.ops.push(OpSpec {
            kind: OpSpecKind::Peek { limit },
            level,
            queue: 0,
        });
        self
    }

    pub fn without_drain(mut self) -> Self {
        self.drain = false;
        self
    }

    /// Label given to a queue's sentinel in traces.
    pub fn sentinel_label(&self, queue: usize) -> String {
        if self.queues.len() == 1 {
            SENTINEL.to_string()
        } else {
            format!("{}.{SENTINEL}", self.queues[queue].name)
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.levels == 0 {
            return Err(ScenarioError::NoLevels);
        }
        if self.queues.is_empty() {
            return Err(ScenarioError::NoQueues);
        }
        let mut seen = HashMap::new();
        let mut claim = |name: &str| -> Result<(), ScenarioError> {
            if name == SENTINEL {
                return Err(ScenarioError::ReservedName(name.into()));
            }
            if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',') {
                return Err(ScenarioError::BadName(name.into()));
            }
            if seen.insert(name.to_string(), ()).is_some() {
                return Err(ScenarioError::DuplicateNode(name.into()));
            }
            Ok(())
        };
        for (i, queue) in self.queues.iter().enumerate() {
            if self.queues[..i].iter().any(|q| q.name == queue.name) {
                return Err(ScenarioError::DuplicateQueue(queue.name.clone()));
            }
            if queue.layout.iter().filter(|l| *l == SENTINEL).count() != 1 {
                return Err(ScenarioError::LayoutSentinel {
                    queue: queue.name.clone(),
                });
            }
            for label in queue.layout.iter().filter(|l| *l != SENTINEL) {
                claim(label)?;
            }
        }
        for (op, spec) in self.ops.iter().enumerate() {
            if spec.level >= self.levels {
                return Err(ScenarioError::LevelOutOfRange {
                    op,
                    level: spec.level,
                    levels: self.levels,
                });
            }
            if spec.queue >= self.queues.len() {
                return Err(ScenarioError::UnknownQueue {
                    op,
                    queue: spec.queue,
                });
            }
            match &spec.kind {
                OpSpecKind::Enqueue { nodes } => {
                    if nodes.is_empty() {
                        return Err(ScenarioError::EmptyEnqueue { op });
                    }
                    for label in nodes {
                        claim(label)?;
                    }
                }
                OpSpecKind::Dequeue if spec.level != 0 => {
                    return Err(ScenarioError::DequeueLevel {
                        op,
                        level: spec.level,
                    });
                }
                OpSpecKind::Dequeue => {}
                OpSpecKind::Peek { limit: 0 } => return Err(ScenarioError::ZeroPeek { op }),
                OpSpecKind::Peek { .. } => {}
            }
        }
        Ok(())
    }
}

/// A validated scenario resolved onto a concrete memory layout.
#[derive(Debug, Clone)]
pub struct Plan {
    scenario: Scenario,
    labels: Vec<String>,
    initial: SharedMemory,
    queue_ids: Vec<QueueId>,
    /// Op indices per level in declaration order.
    per_level: Vec<Vec<usize>>,
    /// Chain nodes of each enqueue op, head first; empty for other ops.
    op_nodes: Vec<Vec<NodeId>>,
    /// Non-sentinel nodes initially in each queue, head first.
    layout_nodes: Vec<Vec<NodeId>>,
    node_op: Vec<Option<usize>>,
}

impl Plan {
    pub fn new(scenario: &Scenario) -> Result<Plan, ScenarioError> {
        scenario.validate()?;
        let arena_sentinels = scenario.queues.iter().filter(|q| !q.self_sentinel).count();
        let names: usize = scenario
            .queues
            .iter()
            .map(|q| q.layout.len() - 1)
            .chain(scenario.ops.iter().map(|op| match &op.kind {
                OpSpecKind::Enqueue { nodes } => nodes.len(),
                _ => 0,
            }))
            .sum();
        let mut mem = SharedMemory::new(scenario.levels, arena_sentinels + names);
        let mut labels = Vec::new();
        let mut by_label = HashMap::new();
        let mut queue_ids = Vec::new();
        for (i, spec) in scenario.queues.iter().enumerate() {
            let q = mem
                .init_queue(spec.self_sentinel)
                .expect("arena sized for every sentinel");
            let s = mem.queue(q).sentinel;
            debug_assert_eq!(s.index(), labels.len());
            labels.push(scenario.sentinel_label(i));
            queue_ids.push(q);
        }
        let mut alloc = |mem: &mut SharedMemory, labels: &mut Vec<String>, name: &str| {
            let n = mem.alloc_node().expect("arena sized for every node");
            debug_assert_eq!(n.index(), labels.len());
            labels.push(name.to_string());
            by_label.insert(name.to_string(), n);
            n
        };

        let mut layout_nodes = Vec::new();
        for (i, spec) in scenario.queues.iter().enumerate() {
            let q = queue_ids[i];
            let sentinel = mem.queue(q).sentinel;
            let chain: Vec<NodeId> = spec
                .layout
                .iter()
                .map(|l| {
                    if l == SENTINEL {
                        sentinel
                    } else {
                        alloc(&mut mem, &mut labels, l)
                    }
                })
                .collect();
            link(&mut mem, &chain);
            mem.poke(irqueue_core::Cell::Head(q), irqueue_core::Word::Node(chain[0]));
            mem.poke(
                irqueue_core::Cell::Tail(q),
                irqueue_core::Word::Node(*chain.last().expect("layout has the sentinel")),
            );
            layout_nodes.push(chain.into_iter().filter(|&n| n != sentinel).collect());
        }

        let mut per_level = vec![Vec::new(); scenario.levels];
        let mut op_nodes = Vec::new();
        for (i, op) in scenario.ops.iter().enumerate() {
            per_level[op.level].push(i);
            let chain: Vec<NodeId> = match &op.kind {
                OpSpecKind::Enqueue { nodes } => {
                    nodes.iter().map(|l| alloc(&mut mem, &mut labels, l)).collect()
                }
                _ => Vec::new(),
            };
            link(&mut mem, &chain);
            op_nodes.push(chain);
        }
        let mut node_op = vec![None; mem.node_count()];
        for (op, chain) in op_nodes.iter().enumerate() {
            for n in chain {
                node_op[n.index()] = Some(op);
            }
        }
        Ok(Plan {
            scenario: scenario.clone(),
            labels,
            initial: mem,
            queue_ids,
            per_level,
            op_nodes,
            layout_nodes,
            node_op,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn initial(&self) -> &SharedMemory {
        &self.initial
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node.index()]
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| NodeId(i as u32))
    }

    pub fn queue_id(&self, index: usize) -> QueueId {
        self.queue_ids[index]
    }

    pub fn queue_ids(&self) -> &[QueueId] {
        &self.queue_ids
    }

    pub fn queue_name(&self, queue: QueueId) -> &str {
        &self.scenario.queues[queue.index()].name
    }

    pub fn per_level(&self) -> &[Vec<usize>] {
        &self.per_level
    }

    pub fn op_nodes(&self, op: usize) -> &[NodeId] {
        &self.op_nodes[op]
    }

    pub fn layout_nodes(&self, queue: QueueId) -> &[NodeId] {
        &self.layout_nodes[queue.index()]
    }

    /// The op that enqueues `node`, or `None` for sentinels and layout nodes.
    pub fn enqueuing_op(&self, node: NodeId) -> Option<usize> {
        self.node_op[node.index()]
    }

    /// Every node that enters `queue` over the scenario, excluding its
    /// sentinel.
    pub fn enqueued(&self, queue: QueueId) -> Vec<NodeId> {
        let mut all = self.layout_nodes[queue.index()].clone();
        for (op, spec) in self.scenario.ops.iter().enumerate() {
            if spec.queue == queue.index() {
                all.extend(&self.op_nodes[op]);
            }
        }
        all
    }
}

fn link(mem: &mut SharedMemory, chain: &[NodeId]) {
    for pair in chain.windows(2) {
        mem.set_next(pair[0], Some(pair[1]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dequeue_above_level_zero_is_rejected() {
        let mut s = Scenario::new(3).enqueue(1, &["A"]);
        s.ops.push(OpSpec {
            kind: OpSpecKind::Dequeue,
            level: 2,
            queue: 0,
        });
        assert_eq!(s.validate(), Err(ScenarioError::DequeueLevel { op: 1, level: 2 }));
    }

    #[test]
    fn duplicate_nodes_are_rejected() {
        let s = Scenario::new(2).enqueue(0, &["A"]).enqueue(1, &["A"]);
        assert_eq!(s.validate(), Err(ScenarioError::DuplicateNode("A".into())));
        let s = Scenario::new(2).with_layout(&["A", "sentinel"]).enqueue(1, &["A"]);
        assert_eq!(s.validate(), Err(ScenarioError::DuplicateNode("A".into())));
    }

    #[test]
    fn layout_needs_one_sentinel() {
        let s = Scenario::new(2).with_layout(&["A"]);
        assert!(matches!(s.validate(), Err(ScenarioError::LayoutSentinel { .. })));
    }

    #[test]
    fn plan_builds_layout_and_chains() {
        let s = Scenario::new(3)
            .with_layout(&["A", "sentinel"])
            .enqueue(1, &["X", "Y"]);
        let plan = Plan::new(&s).unwrap();
        let mem = plan.initial();
        let q = plan.queue_id(0);
        let a = plan.node("A").unwrap();
        let sentinel = mem.queue(q).sentinel;
        assert_eq!(mem.queue(q).head, Some(a));
        assert_eq!(mem.queue(q).tail, Some(sentinel));
        assert_eq!(mem.next(a), Some(sentinel));
        let (x, y) = (plan.node("X").unwrap(), plan.node("Y").unwrap());
        assert_eq!(mem.next(x), Some(y));
        assert_eq!(plan.enqueuing_op(y), Some(0));
        assert_eq!(plan.enqueued(q), vec![a, x, y]);
        assert_eq!(plan.label(sentinel), "sentinel");
    }
}
