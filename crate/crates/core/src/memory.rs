//! Explicit shared-memory model.
//!
//! Every preemptible cell lives here: the `next` link of each node, the
//! head and tail of each queue, and both columns of the interrupt level
//! table. A procedure touches memory only through a [`Bus`], which admits
//! exactly one load or store per resumption. That is what makes every
//! access a separate, preemptible step.

use std::fmt;

use thiserror::Error;

/// Index of a node in the arena.
///
/// The "none" pointer is modelled as `Option<NodeId>::None` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Opaque queue identity, as stored in the level table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueueId(pub u32);

impl QueueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Number of interrupt levels when none is configured.
pub const DEFAULT_LEVELS: usize = 16;

/// A single preemptible memory cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Next(NodeId),
    Head(QueueId),
    Tail(QueueId),
    TableQueue(usize),
    TableNode(usize),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Next(n) => write!(f, "next[{n}]"),
            Cell::Head(q) => write!(f, "head[{q}]"),
            Cell::Tail(q) => write!(f, "tail[{q}]"),
            Cell::TableQueue(l) => write!(f, "table.queue[{l}]"),
            Cell::TableNode(l) => write!(f, "table.node[{l}]"),
        }
    }
}

/// Contents of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Word {
    Nil,
    Node(NodeId),
    Queue(QueueId),
}

impl From<Option<NodeId>> for Word {
    fn from(n: Option<NodeId>) -> Self {
        n.map_or(Word::Nil, Word::Node)
    }
}

impl From<Option<QueueId>> for Word {
    fn from(q: Option<QueueId>) -> Self {
        q.map_or(Word::Nil, Word::Queue)
    }
}

impl Word {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Word::Node(n) => Some(n),
            _ => None,
        }
    }

    pub fn queue(self) -> Option<QueueId> {
        match self {
            Word::Queue(q) => Some(q),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

/// One indivisible shared-memory access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub site: Site,
    pub cell: Cell,
    pub kind: AccessKind,
    /// The value read, or the value written.
    pub value: Word,
    /// The cell's contents before the access.
    pub prior: Word,
}

/// Which procedure an access belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Procedure {
    Enqueue,
    Dequeue,
    Peek,
}

macro_rules! sites {
    ($($proc:ident { $($site:ident => $name:literal),* $(,)? })*) => {
        /// Program location that issued an access.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Site {
            $($($site,)*)*
        }

        impl Site {
            pub const ALL: &'static [Site] = &[$($(Site::$site,)*)*];

            pub fn name(self) -> &'static str {
                match self {
                    $($(Site::$site => $name,)*)*
                }
            }

            pub fn procedure(self) -> Procedure {
                match self {
                    $($(Site::$site => Procedure::$proc,)*)*
                }
            }

            pub fn from_name(name: &str) -> Option<Site> {
                Site::ALL.iter().copied().find(|s| s.name() == name)
            }
        }
    };
}

sites! {
    Enqueue {
        PublishNode => "v.publish_node",
        PublishQueue => "v.publish_queue",
        ReadPrevNode => "v.read_prev_node",
        CompareTail => "v.compare_tail",
        RetirePrevQueue => "v.retire_prev_queue",
        ReadTail => "v.read_tail",
        AppendNode => "v.append_node",
        PublishLast => "v.publish_last",
        WriteTail => "v.write_tail",
        StallReadChain => "v.stall_read_chain",
        StallLink => "v.stall_link",
        StallLinkChain => "v.stall_link_chain",
        AnchoredReadChain => "v.anchored_read_chain",
        AnchoredLink => "v.anchored_link",
        AnchoredLinkChain => "v.anchored_link_chain",
        AnchoredReadTail => "v.anchored_read_tail",
        AnchoredPublishLast => "v.anchored_publish_last",
        AnchoredWriteTail => "v.anchored_write_tail",
        RetireQueue => "v.retire_queue",
        RetireNode => "v.retire_node",
        FollowTest => "follow.test_next",
        FollowStep => "follow.step_next",
        ScanLevel => "prev_level.read_queue",
        AnchorStart => "find_anchor.read_start",
        AnchorTest => "find_anchor.test_next",
        AnchorStep => "find_anchor.step_next",
    }
    Dequeue {
        CheckHead => "p.check_head",
        CheckTail => "p.check_tail",
        NextHead => "p.next_head",
        NextCheck => "p.next_check",
        SentinelHead => "p.sentinel_head",
        RecycleHead => "p.recycle_head",
        RecycleNext => "p.recycle_next",
        RecycleAdvance => "p.recycle_advance",
        RecycleClear => "p.recycle_clear",
        TakeHead => "p.take_head",
        TakeNext => "p.take_next",
        TakeAdvance => "p.take_advance",
        TakeClear => "p.take_clear",
    }
    Peek {
        PeekHead => "peek.read_head",
        PeekTail => "peek.read_tail",
        PeekNext => "peek.read_next",
    }
}

/// Where a node's storage comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrigin {
    Arena,
    /// The node embedded in a queue object that serves as its own sentinel.
    Embedded(QueueId),
}

/// The head/tail pair of one queue plus its fixed sentinel.
///
/// `sentinel` never changes after construction and is not a shared cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueState {
    pub head: Option<NodeId>,
    pub tail: Option<NodeId>,
    pub sentinel: NodeId,
}

/// The per-level `(queue, node)` registry shared by every queue in one
/// interrupt domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelTable {
    queue: Vec<Option<QueueId>>,
    node: Vec<Option<NodeId>>,
}

impl LevelTable {
    pub fn new(levels: usize) -> Self {
        LevelTable {
            queue: vec![None; levels],
            node: vec![None; levels],
        }
    }

    pub fn levels(&self) -> usize {
        self.queue.len()
    }

    pub fn queue(&self, level: usize) -> Option<QueueId> {
        self.queue[level]
    }

    pub fn node(&self, level: usize) -> Option<NodeId> {
        self.node[level]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("node arena exhausted (capacity {capacity})")]
    ArenaExhausted { capacity: usize },
}

/// Every preemptible cell of one interrupt domain.
///
/// Not safe for use from more than one CPU. The whole structure may be moved
/// between host threads between steps, but the algorithm it models assumes a
/// single processor that does not reorder memory writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedMemory {
    next: Vec<Option<NodeId>>,
    origin: Vec<NodeOrigin>,
    arena_capacity: usize,
    arena_used: usize,
    queues: Vec<QueueState>,
    table: LevelTable,
}

impl SharedMemory {
    /// Creates a domain with `levels` interrupt levels and room for
    /// `capacity` arena nodes.
    pub fn new(levels: usize, capacity: usize) -> Self {
        SharedMemory {
            next: Vec::with_capacity(capacity),
            origin: Vec::with_capacity(capacity),
            arena_capacity: capacity,
            arena_used: 0,
            queues: Vec::new(),
            table: LevelTable::new(levels),
        }
    }

    pub fn levels(&self) -> usize {
        self.table.levels()
    }

    pub fn table(&self) -> &LevelTable {
        &self.table
    }

    pub fn node_count(&self) -> usize {
        self.next.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.next.len() as u32).map(NodeId)
    }

    pub fn origin(&self, node: NodeId) -> NodeOrigin {
        self.origin[node.index()]
    }

    pub fn arena_remaining(&self) -> usize {
        self.arena_capacity - self.arena_used
    }

    /// Hands out a fresh arena node with `next = none`.
    pub fn alloc_node(&mut self) -> Result<NodeId, AllocError> {
        if self.arena_used == self.arena_capacity {
            return Err(AllocError::ArenaExhausted {
                capacity: self.arena_capacity,
            });
        }
        self.arena_used += 1;
        Ok(self.push_node(NodeOrigin::Arena))
    }

    fn push_node(&mut self, origin: NodeOrigin) -> NodeId {
        let id = NodeId(self.next.len() as u32);
        self.next.push(None);
        self.origin.push(origin);
        id
    }

    /// Creates a queue with `head = tail = sentinel` and `sentinel.next = none`.
    ///
    /// With `self_sentinel` the queue object's own embedded node is the
    /// sentinel and no arena node is consumed.
    pub fn init_queue(&mut self, self_sentinel: bool) -> Result<QueueId, AllocError> {
        let id = QueueId(self.queues.len() as u32);
        let sentinel = if self_sentinel {
            self.push_node(NodeOrigin::Embedded(id))
        } else {
            self.alloc_node()?
        };
        self.queues.push(QueueState {
            head: Some(sentinel),
            tail: Some(sentinel),
            sentinel,
        });
        Ok(id)
    }

    pub fn queue_count(&self) -> usize {
        self.queues.len()
    }

    pub fn queue_ids(&self) -> impl Iterator<Item = QueueId> + '_ {
        (0..self.queues.len() as u32).map(QueueId)
    }

    pub fn queue(&self, queue: QueueId) -> &QueueState {
        &self.queues[queue.index()]
    }

    pub fn next(&self, node: NodeId) -> Option<NodeId> {
        self.next[node.index()]
    }

    /// Current contents of a cell, outside of any procedure.
    pub fn peek_cell(&self, cell: Cell) -> Word {
        match cell {
            Cell::Next(n) => self.next[n.index()].into(),
            Cell::Head(q) => self.queues[q.index()].head.into(),
            Cell::Tail(q) => self.queues[q.index()].tail.into(),
            Cell::TableQueue(l) => self.table.queue[l].into(),
            Cell::TableNode(l) => self.table.node[l].into(),
        }
    }

    /// Overwrites a cell directly, bypassing the step discipline. Used to set
    /// up initial layouts and to construct states for tests.
    ///
    /// Panics if the word's type does not match the cell.
    pub fn poke(&mut self, cell: Cell, word: Word) {
        match (cell, word) {
            (Cell::TableQueue(l), Word::Nil) => self.table.queue[l] = None,
            (Cell::TableQueue(l), Word::Queue(q)) => self.table.queue[l] = Some(q),
            (Cell::TableQueue(_), Word::Node(_)) => panic!("table.queue holds queue ids"),
            (_, Word::Queue(_)) => panic!("{cell} holds node ids"),
            (cell, word) => {
                let n = word.node();
                match cell {
                    Cell::Next(x) => self.next[x.index()] = n,
                    Cell::Head(q) => self.queues[q.index()].head = n,
                    Cell::Tail(q) => self.queues[q.index()].tail = n,
                    Cell::TableNode(l) => self.table.node[l] = n,
                    Cell::TableQueue(_) => unreachable!(),
                }
            }
        }
    }

    pub fn set_next(&mut self, node: NodeId, next: Option<NodeId>) {
        self.next[node.index()] = next;
    }

    /// Nodes reachable from `start` by following `next`, in order, stopping at
    /// the first repeated node.
    pub fn chain(&self, start: Option<NodeId>) -> Chain {
        let mut nodes = Vec::new();
        let mut seen = vec![false; self.next.len()];
        let mut cursor = start;
        while let Some(n) = cursor {
            if seen[n.index()] {
                return Chain {
                    nodes,
                    cycle_at: Some(n),
                };
            }
            seen[n.index()] = true;
            nodes.push(n);
            cursor = self.next[n.index()];
        }
        Chain {
            nodes,
            cycle_at: None,
        }
    }

    /// Whether `target` is `from` or is reachable from it via `next`.
    pub fn reaches(&self, from: Option<NodeId>, target: NodeId) -> bool {
        let mut cursor = from;
        for _ in 0..=self.next.len() {
            match cursor {
                Some(n) if n == target => return true,
                Some(n) => cursor = self.next[n.index()],
                None => return false,
            }
        }
        false
    }
}

/// A walk along `next` links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub nodes: Vec<NodeId>,
    /// First node visited twice, if the walk entered a cycle.
    pub cycle_at: Option<NodeId>,
}

/// Procedure handle onto shared memory that admits at most one access per
/// resumption.
pub struct Bus<'m> {
    mem: &'m mut SharedMemory,
    access: Option<Access>,
}

impl<'m> Bus<'m> {
    pub fn new(mem: &'m mut SharedMemory) -> Self {
        Bus { mem, access: None }
    }

    /// True once this resumption has used its access.
    pub fn busy(&self) -> bool {
        self.access.is_some()
    }

    pub fn into_access(self) -> Option<Access> {
        self.access
    }

    pub fn levels(&self) -> usize {
        self.mem.levels()
    }

    pub fn sentinel(&self, queue: QueueId) -> NodeId {
        self.mem.queue(queue).sentinel
    }

    fn record(&mut self, access: Access) {
        assert!(
            self.access.is_none(),
            "second shared access in one step at {}",
            access.site.name()
        );
        self.access = Some(access);
    }

    pub fn load(&mut self, site: Site, cell: Cell) -> Word {
        let value = self.mem.peek_cell(cell);
        self.record(Access {
            site,
            cell,
            kind: AccessKind::Read,
            value,
            prior: value,
        });
        value
    }

    pub fn load_node(&mut self, site: Site, cell: Cell) -> Option<NodeId> {
        self.load(site, cell).node()
    }

    pub fn store(&mut self, site: Site, cell: Cell, value: Word) {
        let prior = self.mem.peek_cell(cell);
        self.mem.poke(cell, value);
        self.record(Access {
            site,
            cell,
            kind: AccessKind::Write,
            value,
            prior,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_queue_points_head_and_tail_at_sentinel() {
        let mut mem = SharedMemory::new(4, 1);
        let q = mem.init_queue(false).unwrap();
        let state = *mem.queue(q);
        assert_eq!(state.head, Some(state.sentinel));
        assert_eq!(state.tail, Some(state.sentinel));
        assert_eq!(mem.next(state.sentinel), None);
        assert_eq!(mem.origin(state.sentinel), NodeOrigin::Arena);
    }

    #[test]
    fn self_sentinel_consumes_no_arena_node() {
        let mut mem = SharedMemory::new(4, 0);
        let q = mem.init_queue(true).unwrap();
        let s = mem.queue(q).sentinel;
        assert_eq!(mem.origin(s), NodeOrigin::Embedded(q));
        assert_eq!(mem.arena_remaining(), 0);
        assert_eq!(mem.queue(q).head, Some(s));
    }

    #[test]
    fn queues_get_fresh_ids_and_disjoint_sentinels() {
        let mut mem = SharedMemory::new(4, 2);
        let a = mem.init_queue(false).unwrap();
        let b = mem.init_queue(false).unwrap();
        assert_ne!(a, b);
        assert_ne!(mem.queue(a).sentinel, mem.queue(b).sentinel);
    }

    #[test]
    fn exhausted_arena_is_an_error() {
        let mut mem = SharedMemory::new(4, 0);
        assert_eq!(
            mem.init_queue(false),
            Err(AllocError::ArenaExhausted { capacity: 0 })
        );
    }

    #[test]
    fn chain_stops_at_cycles() {
        let mut mem = SharedMemory::new(1, 3);
        let a = mem.alloc_node().unwrap();
        let b = mem.alloc_node().unwrap();
        mem.set_next(a, Some(b));
        mem.set_next(b, Some(a));
        let chain = mem.chain(Some(a));
        assert_eq!(chain.nodes, vec![a, b]);
        assert_eq!(chain.cycle_at, Some(a));
        assert!(mem.reaches(Some(b), a));
    }

    #[test]
    #[should_panic(expected = "second shared access")]
    fn bus_rejects_two_accesses() {
        let mut mem = SharedMemory::new(1, 1);
        let q = mem.init_queue(false).unwrap();
        let mut bus = Bus::new(&mut mem);
        bus.load(Site::CheckHead, Cell::Head(q));
        bus.load(Site::CheckTail, Cell::Tail(q));
    }

    #[test]
    fn site_names_are_unique() {
        for (i, a) in Site::ALL.iter().enumerate() {
            for b in &Site::ALL[i + 1..] {
                assert_ne!(a.name(), b.name());
            }
            assert_eq!(Site::from_name(a.name()), Some(*a));
        }
    }
}
