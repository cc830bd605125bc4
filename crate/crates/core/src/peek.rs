//! Wait-free `Peek(n)`: counts available nodes without modifying anything.

use crate::memory::{Bus, Cell, NodeId, QueueId, Site};
use crate::procedures::{access, Poll, Resume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pc {
    ReadHead,
    ReadTail,
    Visit,
    ReadNext,
    Done,
}

/// Walks from the head toward the tail it observed, skipping the sentinel
/// rather than recycling it, and stops once `limit` nodes are counted.
/// Only ever reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peek {
    queue: QueueId,
    sentinel: NodeId,
    limit: usize,
    pc: Pc,
    cursor: Option<NodeId>,
    tail: Option<NodeId>,
    count: usize,
}

impl Peek {
    pub fn new(queue: QueueId, sentinel: NodeId, limit: usize) -> Self {
        Peek {
            queue,
            sentinel,
            limit,
            pc: Pc::ReadHead,
            cursor: None,
            tail: None,
            count: 0,
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn resume(&mut self, bus: &mut Bus<'_>) -> Resume<usize> {
        loop {
            match self.pc {
                Pc::ReadHead => {
                    access!(bus);
                    self.cursor = bus.load_node(Site::PeekHead, Cell::Head(self.queue));
                    self.pc = Pc::ReadTail;
                }
                Pc::ReadTail => {
                    access!(bus);
                    self.tail = bus.load_node(Site::PeekTail, Cell::Tail(self.queue));
                    self.pc = Pc::Visit;
                }
                Pc::Visit => {
                    let Some(at) = self.cursor else {
                        self.pc = Pc::Done;
                        continue;
                    };
                    if at != self.sentinel {
                        self.count += 1;
                    }
                    self.pc = if self.count >= self.limit || Some(at) == self.tail {
                        Pc::Done
                    } else {
                        Pc::ReadNext
                    };
                }
                Pc::ReadNext => {
                    access!(bus);
                    let at = self.cursor.expect("Visit stops on none");
                    self.cursor = bus.load_node(Site::PeekNext, Cell::Next(at));
                    self.pc = Pc::Visit;
                }
                Pc::Done => return Ok(Poll::Ready(self.count)),
            }
        }
    }
}
