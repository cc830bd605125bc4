//! How far each node moved between entering and leaving its queue.

use std::collections::BTreeMap;

use irqueue_core::{NodeId, OpKind, QueueId};
use serde::Serialize;

use crate::scenario::Plan;
use crate::world::{FrameRecord, Role};

/// Ordering a node's dequeue rank is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Order in which enqueue frames finished.
    Completion,
    /// Order in which enqueue frames started.
    Arrival,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Completion, Basis::Arrival];

    pub fn name(self) -> &'static str {
        match self {
            Basis::Completion => "completion",
            Basis::Arrival => "arrival",
        }
    }
}

/// Ranks of one delivered node within its queue. Nodes present before the
/// scenario started rank first, in queue order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub node: NodeId,
    pub queue: QueueId,
    pub arrival: usize,
    pub completion: usize,
    pub delivery: usize,
}

impl Placement {
    pub fn rank(&self, basis: Basis) -> usize {
        match basis {
            Basis::Completion => self.completion,
            Basis::Arrival => self.arrival,
        }
    }

    /// Dequeue rank minus the rank under `basis`.
    pub fn displacement(&self, basis: Basis) -> isize {
        self.delivery as isize - self.rank(basis) as isize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderReport {
    /// In delivery order.
    pub placements: Vec<Placement>,
}

impl ReorderReport {
    pub fn displacement(&self, node: NodeId, basis: Basis) -> Option<isize> {
        self.placements
            .iter()
            .find(|p| p.node == node)
            .map(|p| p.displacement(basis))
    }

    pub fn max_abs(&self, basis: Basis) -> usize {
        self.placements
            .iter()
            .map(|p| p.displacement(basis).unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Count of nodes per absolute displacement.
    pub fn histogram(&self, basis: Basis) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for p in &self.placements {
            *out.entry(p.displacement(basis).unsigned_abs()).or_default() += 1;
        }
        out
    }

    pub fn is_fifo(&self, basis: Basis) -> bool {
        self.max_abs(basis) == 0
    }
}

pub(crate) fn measure(
    plan: &Plan,
    records: &[FrameRecord],
    dequeued: &[(NodeId, QueueId)],
) -> ReorderReport {
    let mut placements = Vec::new();
    for &q in plan.queue_ids() {
        let enqueues: Vec<&FrameRecord> = records
            .iter()
            .filter(|r| r.role == Role::Op && r.kind == OpKind::Enqueue && r.queue == q)
            .collect();
        let order = |key: fn(&FrameRecord) -> usize| -> Vec<NodeId> {
            let mut frames = enqueues.clone();
            frames.sort_by_key(|r| key(r));
            let mut nodes = plan.layout_nodes(q).to_vec();
            nodes.extend(frames.iter().flat_map(|r| r.nodes.iter().copied()));
            nodes
        };
        let by_arrival = order(|r| r.start);
        let by_completion = order(|r| r.finish.unwrap_or(usize::MAX));
        let rank = |nodes: &[NodeId], n: NodeId| nodes.iter().position(|&m| m == n);
        let delivered = dequeued.iter().filter(|(_, dq)| *dq == q).map(|(n, _)| *n);
        for (delivery, node) in delivered.enumerate() {
            if let (Some(arrival), Some(completion)) =
                (rank(&by_arrival, node), rank(&by_completion, node))
            {
                placements.push(Placement {
                    node,
                    queue: q,
                    arrival,
                    completion,
                    delivery,
                });
            }
        }
    }
    ReorderReport { placements }
}

/// Reorder statistics accumulated over many runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReorderSummary {
    pub runs: u64,
    /// Runs where some node left out of completion order.
    pub reordered_runs: u64,
    pub max_abs_completion: usize,
    pub max_abs_arrival: usize,
    pub histogram_completion: BTreeMap<usize, u64>,
    pub histogram_arrival: BTreeMap<usize, u64>,
}

impl ReorderSummary {
    pub fn absorb(&mut self, report: &ReorderReport) {
        self.runs += 1;
        if !report.is_fifo(Basis::Completion) {
            self.reordered_runs += 1;
        }
        self.max_abs_completion = self.max_abs_completion.max(report.max_abs(Basis::Completion));
        self.max_abs_arrival = self.max_abs_arrival.max(report.max_abs(Basis::Arrival));
        for (k, v) in report.histogram(Basis::Completion) {
            *self.histogram_completion.entry(k).or_default() += v as u64;
        }
        for (k, v) in report.histogram(Basis::Arrival) {
            *self.histogram_arrival.entry(k).or_default() += v as u64;
        }
    }
}
