//! Enqueue (`V`): the interrupt-reentrant write side.
//!
//! On entry the frame publishes `(node, queue)` in the level table for its
//! own level. Higher levels that interrupt it from then on will find the
//! entry and cooperate instead of racing. The frame then inspects the
//! lower levels still working on the same queue and picks one of three
//! insertion strategies:
//!
//! * simple: no lower level is active, so append behind the tail and move
//!   the tail;
//! * stalled: the lower level's node is not linked anywhere yet, so splice
//!   our chain directly behind that node and let the lower level carry it in;
//! * anchored: the lower level's node is already linked behind some anchor,
//!   so insert our chain between the anchor and that node, moving the tail
//!   early if the anchor was the tail.

use crate::memory::{Bus, Cell, NodeId, QueueId, Site, Word};
use crate::procedures::{access, Fault, FindAnchor, Follow, Poll, PrevLevel, Resume};

/// Which insertion strategy an enqueue committed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Simple,
    Stalled,
    Anchored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pc {
    PublishNode,
    PublishQueue,
    ScanLower(PrevLevel),
    ReadPrevNode,
    CompareTail,
    RetirePrevQueue,
    ReadTail,
    FollowTail(Follow),
    AppendNode,
    FollowNode(Follow),
    PublishLast,
    WriteTail,
    FindAnchor(FindAnchor),
    StallReadChain,
    StallLink,
    StallFollow(Follow),
    StallLinkChain,
    AnchoredReadChain,
    AnchoredLink,
    AnchoredFollow(Follow),
    AnchoredLinkChain,
    AnchoredReadTail,
    AnchoredPublishLast,
    AnchoredWriteTail,
    RetireQueue,
    RetireNode,
    Done,
}

/// A suspended enqueue. Locals are private to the frame; only the cells it
/// touches through the bus are visible to other frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enqueue {
    queue: QueueId,
    level: usize,
    node: NodeId,
    pc: Pc,
    prev_level: Option<usize>,
    prev: Option<NodeId>,
    anchor: Option<NodeId>,
    chain: Option<NodeId>,
    last: Option<NodeId>,
    append_at: Option<NodeId>,
    branch: Option<Branch>,
}

impl Enqueue {
    /// `node` heads the chain to enqueue; it may be a single node or a
    /// pre-linked chain that is not reachable from any queue.
    pub fn new(queue: QueueId, level: usize, node: NodeId) -> Self {
        Enqueue {
            queue,
            level,
            node,
            pc: Pc::PublishNode,
            prev_level: None,
            prev: None,
            anchor: None,
            chain: None,
            last: None,
            append_at: None,
            branch: None,
        }
    }

    pub fn queue(&self) -> QueueId {
        self.queue
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn branch(&self) -> Option<Branch> {
        self.branch
    }

    pub fn is_done(&self) -> bool {
        self.pc == Pc::Done
    }

    fn prev_level(&self) -> usize {
        self.prev_level
            .expect("prev_level is set before the lower-level loop body runs")
    }

    pub fn resume(&mut self, bus: &mut Bus<'_>) -> Resume<()> {
        let queue = self.queue;
        let level = self.level;
        loop {
            match &mut self.pc {
                Pc::PublishNode => {
                    access!(bus);
                    bus.store(Site::PublishNode, Cell::TableNode(level), Word::Node(self.node));
                    self.pc = Pc::PublishQueue;
                }
                Pc::PublishQueue => {
                    access!(bus);
                    bus.store(Site::PublishQueue, Cell::TableQueue(level), Word::Queue(queue));
                    self.pc = Pc::ScanLower(PrevLevel::new(level, queue));
                }
                Pc::ScanLower(scan) => match scan.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(found) => {
                        self.prev_level = found;
                        self.pc = if found.is_some() {
                            Pc::ReadPrevNode
                        } else {
                            Pc::ReadTail
                        };
                    }
                },
                Pc::ReadPrevNode => {
                    access!(bus);
                    let pl = self.prev_level();
                    self.prev = bus.load_node(Site::ReadPrevNode, Cell::TableNode(pl));
                    self.pc = Pc::CompareTail;
                }
                Pc::CompareTail => {
                    access!(bus);
                    let tail = bus.load_node(Site::CompareTail, Cell::Tail(queue));
                    self.pc = if tail == self.prev {
                        Pc::RetirePrevQueue
                    } else {
                        Pc::FindAnchor(FindAnchor::new(self.prev_level(), self.prev, queue))
                    };
                }
                Pc::RetirePrevQueue => {
                    access!(bus);
                    let pl = self.prev_level();
                    bus.store(Site::RetirePrevQueue, Cell::TableQueue(pl), Word::Nil);
                    self.pc = Pc::ScanLower(PrevLevel::new(pl, queue));
                }

                // no lower level active: append at the tail
                Pc::ReadTail => {
                    access!(bus);
                    self.branch = Some(Branch::Simple);
                    let tail = bus.load_node(Site::ReadTail, Cell::Tail(queue));
                    self.pc = Pc::FollowTail(Follow::new(tail));
                }
                Pc::FollowTail(follow) => match follow.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(end) => {
                        self.append_at = Some(end);
                        self.pc = Pc::AppendNode;
                    }
                },
                Pc::AppendNode => {
                    access!(bus);
                    let end = self.append_at.expect("set by FollowTail");
                    bus.store(Site::AppendNode, Cell::Next(end), Word::Node(self.node));
                    self.pc = Pc::FollowNode(Follow::new(Some(self.node)));
                }
                Pc::FollowNode(follow) => match follow.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(last) => {
                        self.last = Some(last);
                        self.pc = Pc::PublishLast;
                    }
                },
                Pc::PublishLast => {
                    access!(bus);
                    bus.store(Site::PublishLast, Cell::TableNode(level), self.last.into());
                    self.pc = Pc::WriteTail;
                }
                Pc::WriteTail => {
                    access!(bus);
                    bus.store(Site::WriteTail, Cell::Tail(queue), self.last.into());
                    self.pc = Pc::RetireQueue;
                }

                Pc::FindAnchor(search) => match search.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(anchor) => {
                        self.anchor = anchor;
                        if anchor.is_some() {
                            self.branch = Some(Branch::Anchored);
                            self.pc = Pc::AnchoredReadChain;
                        } else {
                            self.branch = Some(Branch::Stalled);
                            self.pc = Pc::StallReadChain;
                        }
                    }
                },

                // lower level not linked yet: take over its chain
                Pc::StallReadChain => {
                    access!(bus);
                    let prev = self.prev.ok_or(Fault::NilDeref(Site::StallReadChain))?;
                    self.chain = bus.load_node(Site::StallReadChain, Cell::Next(prev));
                    self.pc = Pc::StallLink;
                }
                Pc::StallLink => {
                    access!(bus);
                    let prev = self.prev.expect("checked in StallReadChain");
                    bus.store(Site::StallLink, Cell::Next(prev), Word::Node(self.node));
                    self.pc = Pc::StallFollow(Follow::new(Some(self.node)));
                }
                Pc::StallFollow(follow) => match follow.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(last) => {
                        self.last = Some(last);
                        self.pc = Pc::StallLinkChain;
                    }
                },
                Pc::StallLinkChain => {
                    access!(bus);
                    let last = self.last.expect("set by StallFollow");
                    bus.store(Site::StallLinkChain, Cell::Next(last), self.chain.into());
                    self.pc = Pc::RetireQueue;
                }

                // lower level already linked: insert in front of it
                Pc::AnchoredReadChain => {
                    access!(bus);
                    let anchor = self.anchor.expect("set by FindAnchor");
                    self.chain = bus.load_node(Site::AnchoredReadChain, Cell::Next(anchor));
                    self.pc = Pc::AnchoredLink;
                }
                Pc::AnchoredLink => {
                    access!(bus);
                    let anchor = self.anchor.expect("set by FindAnchor");
                    bus.store(Site::AnchoredLink, Cell::Next(anchor), Word::Node(self.node));
                    self.pc = Pc::AnchoredFollow(Follow::new(Some(self.node)));
                }
                Pc::AnchoredFollow(follow) => match follow.resume(bus)? {
                    Poll::Pending => return Ok(Poll::Pending),
                    Poll::Ready(last) => {
                        self.last = Some(last);
                        self.pc = Pc::AnchoredLinkChain;
                    }
                },
                Pc::AnchoredLinkChain => {
                    access!(bus);
                    let last = self.last.expect("set by AnchoredFollow");
                    bus.store(Site::AnchoredLinkChain, Cell::Next(last), self.chain.into());
                    self.pc = Pc::AnchoredReadTail;
                }
                Pc::AnchoredReadTail => {
                    access!(bus);
                    let tail = bus.load_node(Site::AnchoredReadTail, Cell::Tail(queue));
                    self.pc = if tail == self.anchor {
                        Pc::AnchoredPublishLast
                    } else {
                        Pc::RetireQueue
                    };
                }
                Pc::AnchoredPublishLast => {
                    access!(bus);
                    bus.store(Site::AnchoredPublishLast, Cell::TableNode(level), self.last.into());
                    self.pc = Pc::AnchoredWriteTail;
                }
                Pc::AnchoredWriteTail => {
                    access!(bus);
                    bus.store(Site::AnchoredWriteTail, Cell::Tail(queue), self.last.into());
                    self.pc = Pc::RetireQueue;
                }

                Pc::RetireQueue => {
                    access!(bus);
                    bus.store(Site::RetireQueue, Cell::TableQueue(level), Word::Nil);
                    self.pc = Pc::RetireNode;
                }
                Pc::RetireNode => {
                    access!(bus);
                    bus.store(Site::RetireNode, Cell::TableNode(level), Word::Nil);
                    self.pc = Pc::Done;
                }
                Pc::Done => return Ok(Poll::Ready(())),
            }
        }
    }
}
