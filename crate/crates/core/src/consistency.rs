//! Structural consistency checks, including detection of the five fatal
//! queue states.
//!
//! Authoritative only at quiescence. Mid-flight, enqueues legitimately
//! detach segments and the table holds live entries, so every violation is
//! reported as advisory.

use std::fmt;

use crate::memory::{NodeId, QueueId, SharedMemory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quiescent,
    Diagnostic,
}

/// What the checker needs to know about in-flight work.
#[derive(Debug, Clone, Copy)]
pub struct CheckContext<'a> {
    pub mode: Mode,
    /// Queues whose sentinel is currently being recycled by a dequeue.
    pub recycling: &'a [QueueId],
}

impl CheckContext<'static> {
    pub fn quiescent() -> Self {
        CheckContext {
            mode: Mode::Quiescent,
            recycling: &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The sentinel's `next` points at itself.
    SentinelSelfLoop { queue: QueueId },
    /// A loop is reachable from the head.
    Cycle { queue: QueueId, at: NodeId },
    /// The sentinel is not reachable from the head and is not being recycled.
    LostSentinel { queue: QueueId },
    /// Head or tail is none.
    NilHeadOrTail { queue: QueueId },
    /// A table level names a queue but no node.
    TableQueueWithoutNode { level: usize },
    /// A node is reachable from the heads of two queues.
    NodeInTwoQueues { node: NodeId, queues: [QueueId; 2] },
    /// More than one `next` cell references the node.
    SharedSuccessor { node: NodeId, predecessors: Vec<NodeId> },
    TailUnreachable { queue: QueueId },
    TailNotLast { queue: QueueId },
    /// Table entry left behind with no operation in flight.
    StaleTableEntry { level: usize },
}

impl ViolationKind {
    /// Number (1-5) of the fatal state this violation witnesses, if any.
    pub fn fatal_state(&self) -> Option<u8> {
        match self {
            ViolationKind::SentinelSelfLoop { .. } => Some(1),
            ViolationKind::Cycle { .. } => Some(2),
            ViolationKind::LostSentinel { .. } => Some(3),
            ViolationKind::NilHeadOrTail { .. } => Some(4),
            ViolationKind::TableQueueWithoutNode { .. } => Some(5),
            _ => None,
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::SentinelSelfLoop { queue } => {
                write!(f, "sentinel of {queue} points to itself")
            }
            ViolationKind::Cycle { queue, at } => {
                write!(f, "cycle reachable from head of {queue} at {at}")
            }
            ViolationKind::LostSentinel { queue } => write!(f, "sentinel of {queue} lost"),
            ViolationKind::NilHeadOrTail { queue } => write!(f, "{queue} has a none head or tail"),
            ViolationKind::TableQueueWithoutNode { level } => {
                write!(f, "table level {level} has a queue entry but no node entry")
            }
            ViolationKind::NodeInTwoQueues { node, queues } => {
                write!(f, "{node} is in both {} and {}", queues[0], queues[1])
            }
            ViolationKind::SharedSuccessor { node, predecessors } => {
                write!(f, "{node} is the successor of {} nodes", predecessors.len())
            }
            ViolationKind::TailUnreachable { queue } => {
                write!(f, "tail of {queue} is not reachable from its head")
            }
            ViolationKind::TailNotLast { queue } => write!(f, "tail of {queue} has a successor"),
            ViolationKind::StaleTableEntry { level } => {
                write!(f, "table level {level} still occupied")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Set for checks made while operations were in flight.
    pub advisory: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.advisory {
            write!(f, "(advisory) ")?;
        }
        self.kind.fmt(f)
    }
}

pub fn check_consistency(mem: &SharedMemory, ctx: &CheckContext<'_>) -> Vec<Violation> {
    let mut found = Vec::new();
    let mut owner: Vec<Option<QueueId>> = vec![None; mem.node_count()];

    for queue in mem.queue_ids() {
        let state = *mem.queue(queue);
        let sentinel = state.sentinel;
        if state.head.is_none() || state.tail.is_none() {
            found.push(ViolationKind::NilHeadOrTail { queue });
        }
        let self_loop = mem.next(sentinel) == Some(sentinel);
        if self_loop {
            found.push(ViolationKind::SentinelSelfLoop { queue });
        }
        let Some(head) = state.head else { continue };

        let chain = mem.chain(Some(head));
        if let Some(at) = chain.cycle_at {
            if !(self_loop && at == sentinel) {
                found.push(ViolationKind::Cycle { queue, at });
            }
        }
        if !chain.nodes.contains(&sentinel) && !ctx.recycling.contains(&queue) {
            found.push(ViolationKind::LostSentinel { queue });
        }
        if let Some(tail) = state.tail {
            if !chain.nodes.contains(&tail) {
                found.push(ViolationKind::TailUnreachable { queue });
            }
            if mem.next(tail).is_some() {
                found.push(ViolationKind::TailNotLast { queue });
            }
        }
        for &node in &chain.nodes {
            match owner[node.index()] {
                Some(other) if other != queue => found.push(ViolationKind::NodeInTwoQueues {
                    node,
                    queues: [other, queue],
                }),
                _ => owner[node.index()] = Some(queue),
            }
        }
    }

    let mut predecessors: Vec<Vec<NodeId>> = vec![Vec::new(); mem.node_count()];
    for node in mem.nodes() {
        if let Some(next) = mem.next(node) {
            predecessors[next.index()].push(node);
        }
    }
    for (i, preds) in predecessors.into_iter().enumerate() {
        if preds.len() > 1 {
            found.push(ViolationKind::SharedSuccessor {
                node: NodeId(i as u32),
                predecessors: preds,
            });
        }
    }

    let table = mem.table();
    for level in 0..table.levels() {
        let (q, n) = (table.queue(level), table.node(level));
        if q.is_some() && n.is_none() {
            found.push(ViolationKind::TableQueueWithoutNode { level });
        } else if ctx.mode == Mode::Quiescent && (q.is_some() || n.is_some()) {
            found.push(ViolationKind::StaleTableEntry { level });
        }
    }

    let advisory = ctx.mode == Mode::Diagnostic;
    found
        .into_iter()
        .map(|kind| Violation { kind, advisory })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{Cell, Word};

    fn queue_with(n: usize) -> (SharedMemory, QueueId, Vec<NodeId>) {
        let mut mem = SharedMemory::new(4, n + 1);
        let q = mem.init_queue(false).unwrap();
        let nodes = (0..n).map(|_| mem.alloc_node().unwrap()).collect();
        (mem, q, nodes)
    }

    fn kinds(mem: &SharedMemory) -> Vec<ViolationKind> {
        check_consistency(mem, &CheckContext::quiescent())
            .into_iter()
            .map(|v| v.kind)
            .collect()
    }

    #[test]
    fn healthy_queue_is_clean() {
        let (mut mem, q, nodes) = queue_with(1);
        let s = mem.queue(q).sentinel;
        mem.set_next(s, Some(nodes[0]));
        mem.poke(Cell::Tail(q), Word::Node(nodes[0]));
        assert!(kinds(&mem).is_empty());
    }

    #[test]
    fn sentinel_self_loop() {
        let (mut mem, q, _) = queue_with(0);
        let s = mem.queue(q).sentinel;
        mem.set_next(s, Some(s));
        let found = kinds(&mem);
        assert!(found.contains(&ViolationKind::SentinelSelfLoop { queue: q }));
        assert!(!found.iter().any(|k| matches!(k, ViolationKind::Cycle { .. })));
    }

    #[test]
    fn table_queue_without_node() {
        let (mut mem, q, _) = queue_with(0);
        mem.poke(Cell::TableQueue(3), Word::Queue(q));
        assert_eq!(kinds(&mem), vec![ViolationKind::TableQueueWithoutNode { level: 3 }]);
    }

    #[test]
    fn lost_sentinel_is_excused_while_recycling() {
        let (mut mem, q, nodes) = queue_with(1);
        mem.poke(Cell::Head(q), Word::Node(nodes[0]));
        mem.poke(Cell::Tail(q), Word::Node(nodes[0]));
        assert!(kinds(&mem).contains(&ViolationKind::LostSentinel { queue: q }));
        let ctx = CheckContext {
            mode: Mode::Diagnostic,
            recycling: &[q],
        };
        let found = check_consistency(&mem, &ctx);
        assert!(found.is_empty(), "{found:?}");
    }

    #[test]
    fn diagnostic_mode_flags_advisory() {
        let (mut mem, q, _) = queue_with(0);
        mem.poke(Cell::Head(q), Word::Nil);
        let ctx = CheckContext {
            mode: Mode::Diagnostic,
            recycling: &[],
        };
        let found = check_consistency(&mem, &ctx);
        assert!(!found.is_empty());
        assert!(found.iter().all(|v| v.advisory));
    }
}
