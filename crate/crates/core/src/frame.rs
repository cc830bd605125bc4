//! Uniform handle over the resumable operations.

use thiserror::Error;

use crate::dequeue::Dequeue;
use crate::enqueue::Enqueue;
use crate::memory::{Access, Bus, NodeId, QueueId, SharedMemory};
use crate::peek::Peek;
use crate::procedures::{Fault, Poll};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Enqueue,
    Dequeue,
    Peek,
}

/// What a completed frame produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Enqueued,
    Dequeued(Option<NodeId>),
    Peeked(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("level {level} out of range (domain has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("unknown queue {0}")]
    UnknownQueue(QueueId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("peek limit must be positive")]
    ZeroPeek,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("frame already complete")]
    Complete,
    #[error(transparent)]
    Fault(#[from] Fault),
}

/// Result of one step: the single access made, and whether the frame
/// finished with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stepped {
    pub access: Access,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Enqueue(Enqueue),
    Dequeue(Dequeue),
    Peek(Peek),
}

/// A suspended operation. The single-CPU driver advances exactly one frame
/// at a time; a frame only ever yields to frames at a higher level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpFrame {
    level: usize,
    queue: QueueId,
    body: Body,
    steps: usize,
    outcome: Option<Outcome>,
}

fn check_level(mem: &SharedMemory, level: usize) -> Result<(), FrameError> {
    if level >= mem.levels() {
        return Err(FrameError::LevelOutOfRange {
            level,
            levels: mem.levels(),
        });
    }
    Ok(())
}

fn check_queue(mem: &SharedMemory, queue: QueueId) -> Result<(), FrameError> {
    if queue.index() >= mem.queue_count() {
        return Err(FrameError::UnknownQueue(queue));
    }
    Ok(())
}

impl OpFrame {
    /// Enqueue of the chain headed by `node` at interrupt level `level`.
    ///
    /// The chain must be finite and unreachable from any queue; this is not
    /// checked.
    pub fn enqueue(
        mem: &SharedMemory,
        queue: QueueId,
        level: usize,
        node: NodeId,
    ) -> Result<Self, FrameError> {
        check_level(mem, level)?;
        check_queue(mem, queue)?;
        if node.index() >= mem.node_count() {
            return Err(FrameError::UnknownNode(node));
        }
        Ok(Self::new(level, queue, Body::Enqueue(Enqueue::new(queue, level, node))))
    }

    /// Dequeue. The reader always runs at level 0.
    pub fn dequeue(mem: &SharedMemory, queue: QueueId) -> Result<Self, FrameError> {
        check_queue(mem, queue)?;
        check_level(mem, 0)?;
        let sentinel = mem.queue(queue).sentinel;
        Ok(Self::new(0, queue, Body::Dequeue(Dequeue::new(queue, 0, sentinel))))
    }

    pub fn peek(
        mem: &SharedMemory,
        queue: QueueId,
        level: usize,
        limit: usize,
    ) -> Result<Self, FrameError> {
        check_level(mem, level)?;
        check_queue(mem, queue)?;
        if limit == 0 {
            return Err(FrameError::ZeroPeek);
        }
        let sentinel = mem.queue(queue).sentinel;
        Ok(Self::new(level, queue, Body::Peek(Peek::new(queue, sentinel, limit))))
    }

    fn new(level: usize, queue: QueueId, body: Body) -> Self {
        OpFrame {
            level,
            queue,
            body,
            steps: 0,
            outcome: None,
        }
    }

    pub fn kind(&self) -> OpKind {
        match self.body {
            Body::Enqueue(_) => OpKind::Enqueue,
            Body::Dequeue(_) => OpKind::Dequeue,
            Body::Peek(_) => OpKind::Peek,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn queue(&self) -> QueueId {
        self.queue
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    /// Steps executed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_complete(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    /// Performs exactly one shared-memory access.
    pub fn step(&mut self, mem: &mut SharedMemory) -> Result<Stepped, StepError> {
        if self.outcome.is_some() {
            return Err(StepError::Complete);
        }
        let mut bus = Bus::new(mem);
        let ready = match &mut self.body {
            Body::Enqueue(v) => match v.resume(&mut bus)? {
                Poll::Ready(()) => Some(Outcome::Enqueued),
                Poll::Pending => None,
            },
            Body::Dequeue(p) => match p.resume(&mut bus)? {
                Poll::Ready(r) => Some(Outcome::Dequeued(r)),
                Poll::Pending => None,
            },
            Body::Peek(k) => match k.resume(&mut bus)? {
                Poll::Ready(n) => Some(Outcome::Peeked(n)),
                Poll::Pending => None,
            },
        };
        let access = bus
            .into_access()
            .expect("every step of an incomplete frame makes one access");
        self.steps += 1;
        self.outcome = ready;
        Ok(Stepped {
            access,
            complete: ready.is_some(),
        })
    }

    /// Runs the frame to completion with no preemption, returning the
    /// outcome and every access made.
    pub fn run(mut self, mem: &mut SharedMemory) -> Result<(Outcome, Vec<Access>), StepError> {
        let mut log = Vec::new();
        loop {
            let stepped = self.step(mem)?;
            log.push(stepped.access);
            if stepped.complete {
                return Ok((self.outcome.expect("complete"), log));
            }
        }
    }
}
