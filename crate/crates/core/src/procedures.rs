//! The three helper procedures used by enqueue, as resumable machines.
//!
//! Every machine follows the same protocol: a call to `resume` performs at
//! most one shared access through the [`Bus`] and returns
//! [`Poll::Ready`] as soon as the result is known, possibly without any
//! access at all. A caller that receives `Ready` after its bus is already
//! busy must stop before issuing another access.

use thiserror::Error;

use crate::memory::{Bus, Cell, NodeId, QueueId, Site};

/// Result of resuming a procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Poll<T> {
    Pending,
    Ready(T),
}

/// A procedure dereferenced a none pointer. Only reachable from corrupted
/// (fatal) queue states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("none pointer dereferenced at {}", .0.name())]
    NilDeref(Site),
}

pub type Resume<T> = Result<Poll<T>, Fault>;

/// Returns `Ok(Poll::Pending)` if this resumption already used its access.
macro_rules! access {
    ($bus:expr) => {
        if $bus.busy() {
            return Ok($crate::procedures::Poll::Pending);
        }
    };
}
pub(crate) use access;

/// Walks a chain to its last node, which may be the start itself.
///
/// Each loop iteration reads the current node's `next` twice: once for the
/// test and once for the advance, as the loop is written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Follow {
    cursor: Option<NodeId>,
    advancing: bool,
}

impl Follow {
    pub fn new(start: Option<NodeId>) -> Self {
        Follow {
            cursor: start,
            advancing: false,
        }
    }

    pub fn resume(&mut self, bus: &mut Bus<'_>) -> Resume<NodeId> {
        access!(bus);
        if self.advancing {
            let at = self.cursor.ok_or(Fault::NilDeref(Site::FollowStep))?;
            self.cursor = bus.load_node(Site::FollowStep, Cell::Next(at));
            self.advancing = false;
            Ok(Poll::Pending)
        } else {
            let at = self.cursor.ok_or(Fault::NilDeref(Site::FollowTest))?;
            if bus.load_node(Site::FollowTest, Cell::Next(at)).is_none() {
                return Ok(Poll::Ready(at));
            }
            self.advancing = true;
            Ok(Poll::Pending)
        }
    }
}

/// Finds the greatest level below a starting level whose table queue entry
/// names this queue, reading the table downward one level per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrevLevel {
    queue: QueueId,
    remaining: usize,
}

impl PrevLevel {
    pub fn new(level: usize, queue: QueueId) -> Self {
        PrevLevel {
            queue,
            remaining: level,
        }
    }

    pub fn resume(&mut self, bus: &mut Bus<'_>) -> Resume<Option<usize>> {
        if self.remaining == 0 {
            return Ok(Poll::Ready(None));
        }
        access!(bus);
        self.remaining -= 1;
        let level = self.remaining;
        if bus.load(Site::ScanLevel, Cell::TableQueue(level)).queue() == Some(self.queue) {
            return Ok(Poll::Ready(Some(level)));
        }
        if self.remaining == 0 {
            Ok(Poll::Ready(None))
        } else {
            Ok(Poll::Pending)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum AnchorPhase {
    Scan(PrevLevel),
    Start { level: Option<usize> },
    Test { level: Option<usize>, at: Option<NodeId> },
    Step { level: Option<usize>, at: NodeId },
}

/// Looks for the node whose `next` references `target`, scanning the table
/// chains of successively lower levels and finally the chain at the tail.
/// `None` means the target is not linked anywhere yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FindAnchor {
    queue: QueueId,
    target: Option<NodeId>,
    phase: AnchorPhase,
}

impl FindAnchor {
    pub fn new(level: usize, target: Option<NodeId>, queue: QueueId) -> Self {
        FindAnchor {
            queue,
            target,
            phase: AnchorPhase::Scan(PrevLevel::new(level, queue)),
        }
    }

    pub fn resume(&mut self, bus: &mut Bus<'_>) -> Resume<Option<NodeId>> {
        loop {
            match &mut self.phase {
                AnchorPhase::Scan(scan) => match scan.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(level) => self.phase = AnchorPhase::Start { level },
                },
                AnchorPhase::Start { level } => {
                    access!(bus);
                    let level = *level;
                    let cell = level.map_or(Cell::Tail(self.queue), Cell::TableNode);
                    let at = bus.load_node(Site::AnchorStart, cell);
                    self.phase = AnchorPhase::Test { level, at };
                }
                AnchorPhase::Test { level, at: None } => match *level {
                    None => return Ok(Poll::Ready(None)),
                    Some(l) => self.phase = AnchorPhase::Scan(PrevLevel::new(l, self.queue)),
                },
                AnchorPhase::Test {
                    level,
                    at: Some(at),
                } => {
                    access!(bus);
                    let (level, at) = (*level, *at);
                    if bus.load_node(Site::AnchorTest, Cell::Next(at)) == self.target {
                        return Ok(Poll::Ready(Some(at)));
                    }
                    self.phase = AnchorPhase::Step { level, at };
                }
                AnchorPhase::Step { level, at } => {
                    access!(bus);
                    let level = *level;
                    let at = bus.load_node(Site::AnchorStep, Cell::Next(*at));
                    self.phase = AnchorPhase::Test { level, at };
                }
            }
        }
    }
}

/// Drives a machine to completion with no preemption, returning the result
/// and the accesses it made.
pub(crate) fn run_atomically<T>(
    mem: &mut crate::memory::SharedMemory,
    mut resume: impl FnMut(&mut Bus<'_>) -> Resume<T>,
    mut log: impl FnMut(crate::memory::Access),
) -> Result<T, Fault> {
    loop {
        let mut bus = Bus::new(mem);
        let poll = resume(&mut bus)?;
        if let Some(access) = bus.into_access() {
            log(access);
        }
        if let Poll::Ready(value) = poll {
            return Ok(value);
        }
    }
}
