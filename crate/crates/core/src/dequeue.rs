//! Dequeue (`P`): the single, synchronized reader.
//!
//! Refuses to remove the last entry, so the queue never becomes
//! structurally empty. When the sentinel reaches the head it is taken out
//! and enqueued again at the caller's level ("sentinel recycling") before
//! the loop retries.

use crate::enqueue::Enqueue;
use crate::memory::{Bus, Cell, NodeId, QueueId, Site, Word};
use crate::procedures::{access, Fault, Poll, Resume};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pc {
    CheckHead,
    CheckTail,
    NextHead,
    NextCheck,
    SentinelHead,
    RecycleHead,
    RecycleNext,
    RecycleAdvance,
    RecycleClear,
    Recycle(Box<Enqueue>),
    TakeHead,
    TakeNext,
    TakeAdvance,
    TakeClear,
    Done(Option<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dequeue {
    queue: QueueId,
    level: usize,
    sentinel: NodeId,
    pc: Pc,
    head: Option<NodeId>,
    observed_tail: Option<NodeId>,
    next: Option<NodeId>,
    recycles: usize,
}

impl Dequeue {
    pub fn new(queue: QueueId, level: usize, sentinel: NodeId) -> Self {
        Dequeue {
            queue,
            level,
            sentinel,
            pc: Pc::CheckHead,
            head: None,
            observed_tail: None,
            next: None,
            recycles: 0,
        }
    }

    pub fn queue(&self) -> QueueId {
        self.queue
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// The tail value read by the most recent emptiness check.
    pub fn observed_tail(&self) -> Option<NodeId> {
        self.observed_tail
    }

    /// The in-flight enqueue re-queueing the sentinel, if any.
    pub fn recycling(&self) -> Option<&Enqueue> {
        match &self.pc {
            Pc::Recycle(v) => Some(v),
            _ => None,
        }
    }

    pub fn recycles(&self) -> usize {
        self.recycles
    }

    pub fn result(&self) -> Option<Option<NodeId>> {
        match self.pc {
            Pc::Done(r) => Some(r),
            _ => None,
        }
    }

    pub fn resume(&mut self, bus: &mut Bus<'_>) -> Resume<Option<NodeId>> {
        let queue = self.queue;
        loop {
            match &mut self.pc {
                Pc::CheckHead => {
                    access!(bus);
                    self.head = bus.load_node(Site::CheckHead, Cell::Head(queue));
                    self.pc = Pc::CheckTail;
                }
                Pc::CheckTail => {
                    access!(bus);
                    let tail = bus.load_node(Site::CheckTail, Cell::Tail(queue));
                    self.observed_tail = tail;
                    // the last entry can't be removed
                    self.pc = if self.head == tail {
                        Pc::Done(None)
                    } else {
                        Pc::NextHead
                    };
                }
                Pc::NextHead => {
                    access!(bus);
                    self.head = bus.load_node(Site::NextHead, Cell::Head(queue));
                    self.pc = Pc::NextCheck;
                }
                Pc::NextCheck => {
                    access!(bus);
                    let head = self.head.ok_or(Fault::NilDeref(Site::NextCheck))?;
                    let next = bus.load_node(Site::NextCheck, Cell::Next(head));
                    self.pc = if next.is_none() {
                        Pc::Done(None)
                    } else {
                        Pc::SentinelHead
                    };
                }
                Pc::SentinelHead => {
                    access!(bus);
                    self.head = bus.load_node(Site::SentinelHead, Cell::Head(queue));
                    self.pc = if self.head == Some(self.sentinel) {
                        Pc::RecycleHead
                    } else {
                        Pc::TakeHead
                    };
                }

                Pc::RecycleHead => {
                    access!(bus);
                    self.head = bus.load_node(Site::RecycleHead, Cell::Head(queue));
                    self.pc = Pc::RecycleNext;
                }
                Pc::RecycleNext => {
                    access!(bus);
                    let head = self.head.ok_or(Fault::NilDeref(Site::RecycleNext))?;
                    self.next = bus.load_node(Site::RecycleNext, Cell::Next(head));
                    self.pc = Pc::RecycleAdvance;
                }
                Pc::RecycleAdvance => {
                    access!(bus);
                    bus.store(Site::RecycleAdvance, Cell::Head(queue), self.next.into());
                    self.pc = Pc::RecycleClear;
                }
                Pc::RecycleClear => {
                    access!(bus);
                    bus.store(Site::RecycleClear, Cell::Next(self.sentinel), Word::Nil);
                    self.pc = Pc::Recycle(Box::new(Enqueue::new(queue, self.level, self.sentinel)));
                }
                Pc::Recycle(enqueue) => match enqueue.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(()) => {
                        self.recycles += 1;
                        self.pc = Pc::CheckHead;
                    }
                },

                Pc::TakeHead => {
                    access!(bus);
                    self.head = bus.load_node(Site::TakeHead, Cell::Head(queue));
                    self.pc = Pc::TakeNext;
                }
                Pc::TakeNext => {
                    access!(bus);
                    let node = self.head.ok_or(Fault::NilDeref(Site::TakeNext))?;
                    self.next = bus.load_node(Site::TakeNext, Cell::Next(node));
                    self.pc = Pc::TakeAdvance;
                }
                Pc::TakeAdvance => {
                    access!(bus);
                    bus.store(Site::TakeAdvance, Cell::Head(queue), self.next.into());
                    self.pc = Pc::TakeClear;
                }
                Pc::TakeClear => {
                    access!(bus);
                    let node = self.head.expect("checked in TakeNext");
                    bus.store(Site::TakeClear, Cell::Next(node), Word::Nil);
                    self.pc = Pc::Done(Some(node));
                }
                Pc::Done(result) => return Ok(Poll::Ready(*result)),
            }
        }
    }
}
