//! A multiwriter, single-reader FIFO queue that is reentrant to interrupts
//! and needs no compare-and-swap, modelled as resumable state machines over
//! an explicit shared memory.
//!
//! Every load or store of a shared cell (a node's `next`, a queue's head or
//! tail, a level table entry) is one [`OpFrame::step`]. A driver that
//! advances one frame at a time, and lets a frame at level `k` be
//! interrupted only by frames at levels above `k` that run to completion,
//! reproduces the single-CPU interrupt model the algorithm is designed for.
//!
//! This crate is not safe for true parallel execution across CPUs, and
//! that is intentional: the algorithm relies on nested interrupts running
//! to completion on one processor that does not reorder writes. State can
//! be moved between host threads between steps.
//!
//! ```
//! use irqueue_core::{dequeue, enqueue, SharedMemory};
//!
//! let mut mem = SharedMemory::new(4, 3);
//! let q = mem.init_queue(false).unwrap();
//! let a = mem.alloc_node().unwrap();
//! let b = mem.alloc_node().unwrap();
//! enqueue(&mut mem, q, 0, a).unwrap();
//! enqueue(&mut mem, q, 2, b).unwrap();
//! assert_eq!(dequeue(&mut mem, q).unwrap(), Some(a));
//! assert_eq!(dequeue(&mut mem, q).unwrap(), Some(b));
//! assert_eq!(dequeue(&mut mem, q).unwrap(), None);
//! ```

pub mod consistency;
pub mod dequeue;
pub mod enqueue;
pub mod frame;
pub mod memory;
pub mod peek;
pub mod procedures;

use thiserror::Error;

pub use consistency::{check_consistency, CheckContext, Mode, Violation, ViolationKind};
pub use enqueue::Branch;
pub use frame::{FrameError, OpFrame, OpKind, Outcome, StepError, Stepped};
pub use memory::{
    Access, AccessKind, AllocError, Cell, NodeId, Procedure, QueueId, SharedMemory, Site, Word,
    DEFAULT_LEVELS,
};
pub use procedures::{Fault, FindAnchor, Follow, Poll, PrevLevel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
}

/// Enqueues the chain headed by `node` without preemption.
pub fn enqueue(mem: &mut SharedMemory, queue: QueueId, level: usize, node: NodeId) -> Result<(), Error> {
    OpFrame::enqueue(mem, queue, level, node)?.run(mem)?;
    Ok(())
}

/// Dequeues without preemption. `None` means nothing is available.
pub fn dequeue(mem: &mut SharedMemory, queue: QueueId) -> Result<Option<NodeId>, Error> {
    match OpFrame::dequeue(mem, queue)?.run(mem)?.0 {
        Outcome::Dequeued(node) => Ok(node),
        other => unreachable!("dequeue frame produced {other:?}"),
    }
}

/// Counts up to `limit` available non-sentinel nodes. Never writes.
pub fn peek_n(mem: &mut SharedMemory, queue: QueueId, limit: usize) -> Result<usize, Error> {
    match OpFrame::peek(mem, queue, 0, limit)?.run(mem)?.0 {
        Outcome::Peeked(n) => Ok(n),
        other => unreachable!("peek frame produced {other:?}"),
    }
}

/// Last node of the chain starting at `start`.
pub fn follow(mem: &mut SharedMemory, start: NodeId) -> Result<NodeId, Fault> {
    let mut machine = Follow::new(Some(start));
    procedures::run_atomically(mem, |bus| machine.resume(bus), |_| {})
}

/// Greatest level below `level` whose table entry names `queue`.
pub fn previous_interrupt_level(mem: &mut SharedMemory, level: usize, queue: QueueId) -> Option<usize> {
    let mut machine = PrevLevel::new(level, queue);
    procedures::run_atomically(mem, |bus| machine.resume(bus), |_| {})
        .expect("the level scan never dereferences")
}

/// The node referencing `node`, searched for from the table chains below
/// `level` and then from the tail.
pub fn find_anchor(
    mem: &mut SharedMemory,
    level: usize,
    node: NodeId,
    queue: QueueId,
) -> Result<Option<NodeId>, Fault> {
    let mut machine = FindAnchor::new(level, Some(node), queue);
    procedures::run_atomically(mem, |bus| machine.resume(bus), |_| {})
}
