//! Single-CPU execution of a scenario under an explicit schedule, with the
//! queue's correctness conditions checked as it runs.

use std::fmt;

use irqueue_core::frame::Body;
use irqueue_core::{
    check_consistency, Access, AccessKind, Branch, Cell, CheckContext, Mode, NodeId, OpFrame,
    OpKind, Outcome, Procedure, QueueId, SharedMemory, Site, Word,
};
use thiserror::Error;

use crate::reorder::{self, ReorderReport};
use crate::scenario::{OpSpecKind, Plan};
use crate::schedule::Choice;

/// Step budget per run before the run is reported as a livelock suspect.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// A correctness condition the simulator checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Invariant {
    /// Every enqueued node is either delivered or still in the queue.
    Conservation,
    /// Draining a quiescent queue delivers everything and ends at the sentinel.
    EventualDelivery,
    /// A node is only returned after its enqueue finished and left the table.
    CompletedBeforeVisible,
    /// The tail only moves forward along the chain.
    TailMonotonic,
    /// Advancing the head never skips past the tail.
    HeadBounded,
    /// No table level names a queue without a node.
    TableOrdering,
    /// Enqueue never touches the head and dequeue never writes the tail.
    HeadTailOwnership,
    PeekReadOnly,
    /// Dequeue reports empty only when it saw head equal tail or no successor.
    EmptyContract,
    /// An enqueue that overlapped no other enqueue on its queue is delivered
    /// after everything that completed before it.
    IsolatedFifo,
    /// Structural consistency of the quiescent memory, and absence of the
    /// fatal states after every step.
    Consistency,
    /// A procedure dereferenced none.
    Fault,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::Conservation => "conservation",
            Invariant::EventualDelivery => "eventual_delivery",
            Invariant::CompletedBeforeVisible => "completed_before_visible",
            Invariant::TailMonotonic => "tail_monotonic",
            Invariant::HeadBounded => "head_bounded",
            Invariant::TableOrdering => "table_ordering",
            Invariant::HeadTailOwnership => "head_tail_ownership",
            Invariant::PeekReadOnly => "peek_read_only",
            Invariant::EmptyContract => "empty_contract",
            Invariant::IsolatedFifo => "isolated_fifo",
            Invariant::Consistency => "consistency",
            Invariant::Fault => "fault",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub invariant: Invariant,
    /// Global step count when the failure was detected.
    pub step: usize,
    pub detail: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at step {}: {}", self.invariant, self.step, self.detail)
    }
}

/// Why a frame exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// An op from the scenario.
    Op,
    /// The enqueue a dequeue runs to put the sentinel back.
    Recycle,
    /// A dequeue issued while draining.
    Drain,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Op => "op",
            Role::Recycle => "recycle",
            Role::Drain => "drain",
        }
    }
}

/// Lifetime of one frame. Step indices are global and inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub op: Option<usize>,
    pub role: Role,
    pub kind: OpKind,
    pub level: usize,
    pub queue: QueueId,
    pub nodes: Vec<NodeId>,
    pub start: usize,
    pub finish: Option<usize>,
    pub steps: usize,
    pub outcome: Option<Outcome>,
    pub branch: Option<Branch>,
    /// For a recycle, the dequeue running it.
    pub parent: Option<usize>,
}

impl FrameRecord {
    fn overlaps(&self, other: &FrameRecord) -> bool {
        let end = |r: &FrameRecord| r.finish.unwrap_or(usize::MAX);
        self.start <= end(other) && other.start <= end(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Start(usize),
    Step {
        index: usize,
        record: usize,
        access: Access,
    },
    Finish(usize),
    /// Every scenario op has finished; draining may follow.
    Quiescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Halt {
    Fault,
    /// The step budget ran out before the scenario finished.
    Livelock,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("there is no op {0}")]
    UnknownOp(usize),
    #[error("op {op} is not the next op at level {level}")]
    OutOfOrder { op: usize, level: usize },
    #[error("op {op} at level {level} cannot preempt the running frame at level {running}")]
    CannotPreempt { op: usize, level: usize, running: usize },
    #[error("advance with no frame in flight")]
    Idle,
    #[error("execution has already ended")]
    Ended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DrainError {
    #[error("drain requires quiescence but a frame is in flight")]
    NotQuiescent,
    #[error("execution halted while draining")]
    Halted,
}

#[derive(Debug, Clone)]
struct Active {
    frame: OpFrame,
    record: usize,
    /// Open recycle record while the dequeue is putting its sentinel back.
    recycle: Option<usize>,
}

/// What the running dequeue has observed in its current attempt.
#[derive(Debug, Clone, Copy, Default)]
struct Watch {
    head: Option<Word>,
    /// Set when an observation obliges the dequeue to report empty.
    empty_due: bool,
}

/// Deterministic interpreter for one scenario. Cloning a world forks the
/// execution, which is how the explorer branches.
#[derive(Debug, Clone)]
pub struct World<'p> {
    plan: &'p Plan,
    mem: SharedMemory,
    cursor: Vec<usize>,
    stack: Vec<Active>,
    records: Vec<FrameRecord>,
    op_record: Vec<Option<usize>>,
    completed_enqueues: Vec<usize>,
    steps: usize,
    max_steps: usize,
    dequeued: Vec<(NodeId, QueueId)>,
    delivered: Vec<bool>,
    failures: Vec<Failure>,
    events: Option<Vec<Event>>,
    halt: Option<Halt>,
    watch: Watch,
    /// Queues whose sentinel a dequeue has unlinked and not yet put back.
    recycling: Vec<QueueId>,
    fatal_reported: bool,
    max_v_steps: usize,
    stalled: Vec<NodeId>,
    isolated_checked: usize,
    quiescent: Option<SharedMemory>,
    finished: bool,
    drained: bool,
}

fn log(events: &mut Option<Vec<Event>>, event: Event) {
    if let Some(events) = events {
        events.push(event);
    }
}

impl<'p> World<'p> {
    pub fn new(plan: &'p Plan, max_steps: usize) -> Self {
        let mem = plan.initial().clone();
        let nodes = mem.node_count();
        World {
            plan,
            cursor: vec![0; plan.per_level().len()],
            stack: Vec::new(),
            records: Vec::new(),
            op_record: vec![None; plan.scenario().ops.len()],
            completed_enqueues: Vec::new(),
            steps: 0,
            max_steps,
            dequeued: Vec::new(),
            delivered: vec![false; nodes],
            failures: Vec::new(),
            events: None,
            halt: None,
            watch: Watch::default(),
            recycling: Vec::new(),
            fatal_reported: false,
            max_v_steps: 0,
            stalled: Vec::new(),
            isolated_checked: 0,
            quiescent: None,
            finished: false,
            drained: false,
            mem,
        }
    }

    /// Keeps a full event log for trace output.
    pub fn recording(mut self) -> Self {
        self.events = Some(Vec::new());
        self
    }

    pub fn plan(&self) -> &'p Plan {
        self.plan
    }

    pub fn memory(&self) -> &SharedMemory {
        &self.mem
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn events(&self) -> Option<&[Event]> {
        self.events.as_deref()
    }

    pub fn failures(&self) -> &[Failure] {
        &self.failures
    }

    pub fn halt(&self) -> Option<Halt> {
        self.halt
    }

    /// Nodes in the order they were dequeued, with their queue.
    pub fn dequeued(&self) -> &[(NodeId, QueueId)] {
        &self.dequeued
    }

    /// Largest number of steps any enqueue frame took, recycles included.
    pub fn max_v_steps(&self) -> usize {
        self.max_v_steps
    }

    /// Nodes seen stranded behind a suspended lower-level enqueue after
    /// their own enqueue had completed.
    pub fn stalled_nodes(&self) -> &[NodeId] {
        &self.stalled
    }

    pub fn isolated_checked(&self) -> usize {
        self.isolated_checked
    }

    pub fn quiescent_memory(&self) -> Option<&SharedMemory> {
        self.quiescent.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn is_drained(&self) -> bool {
        self.drained
    }

    /// Overwrites a cell outside of any operation. This exists to check
    /// that corruption is caught; a correct run never needs it.
    pub fn inject(&mut self, cell: Cell, word: Word) {
        self.mem.poke(cell, word);
    }

    /// No frame in flight.
    pub fn is_quiescent(&self) -> bool {
        self.stack.is_empty()
    }

    /// Every scenario op has run to completion.
    pub fn ops_done(&self) -> bool {
        self.stack.is_empty()
            && self
                .cursor
                .iter()
                .zip(self.plan.per_level())
                .all(|(c, ops)| *c == ops.len())
    }

    fn running_level(&self) -> Option<usize> {
        self.stack.last().map(|a| a.frame.level())
    }

    /// Choices the scheduler may make now: advancing the running frame
    /// first, then starting the next op of each higher level, lowest level
    /// first.
    pub fn legal_choices(&self) -> Vec<Choice> {
        let mut out = Vec::new();
        if self.halt.is_some() || self.finished {
            return out;
        }
        let from = match self.running_level() {
            Some(level) => {
                out.push(Choice::Advance);
                level + 1
            }
            None => 0,
        };
        for level in from..self.cursor.len() {
            if let Some(&op) = self.plan.per_level()[level].get(self.cursor[level]) {
                out.push(Choice::Start(op));
            }
        }
        out
    }

    /// The serial completion policy: keep running the current frame, and
    /// when idle start the pending op with the lowest index.
    pub fn default_choice(&self) -> Option<Choice> {
        if self.halt.is_some() || self.finished {
            return None;
        }
        if !self.stack.is_empty() {
            return Some(Choice::Advance);
        }
        self.cursor
            .iter()
            .zip(self.plan.per_level())
            .filter_map(|(c, ops)| ops.get(*c).copied())
            .min()
            .map(Choice::Start)
    }

    pub fn apply(&mut self, choice: Choice) -> Result<(), ScheduleError> {
        if self.halt.is_some() || self.finished {
            return Err(ScheduleError::Ended);
        }
        match choice {
            Choice::Advance => {
                if self.stack.is_empty() {
                    return Err(ScheduleError::Idle);
                }
            }
            Choice::Start(op) => {
                let spec = self
                    .plan
                    .scenario()
                    .ops
                    .get(op)
                    .ok_or(ScheduleError::UnknownOp(op))?;
                let level = spec.level;
                if self.plan.per_level()[level].get(self.cursor[level]) != Some(&op) {
                    return Err(ScheduleError::OutOfOrder { op, level });
                }
                if let Some(running) = self.running_level() {
                    if running >= level {
                        return Err(ScheduleError::CannotPreempt { op, level, running });
                    }
                }
                let q = self.plan.queue_id(spec.queue);
                let frame = match &spec.kind {
                    OpSpecKind::Enqueue { .. } => {
                        OpFrame::enqueue(&self.mem, q, level, self.plan.op_nodes(op)[0])
                    }
                    OpSpecKind::Dequeue => OpFrame::dequeue(&self.mem, q),
                    OpSpecKind::Peek { limit } => OpFrame::peek(&self.mem, q, level, *limit),
                }
                .expect("validated scenario yields valid frames");
                self.cursor[level] += 1;
                let record = self.push_frame(frame, Some(op), Role::Op);
                self.op_record[op] = Some(record);
            }
        }
        self.step_top();
        Ok(())
    }

    fn push_frame(&mut self, frame: OpFrame, op: Option<usize>, role: Role) -> usize {
        let nodes = op.map(|op| self.plan.op_nodes(op).to_vec()).unwrap_or_default();
        self.records.push(FrameRecord {
            op,
            role,
            kind: frame.kind(),
            level: frame.level(),
            queue: frame.queue(),
            nodes,
            start: self.steps,
            finish: None,
            steps: 0,
            outcome: None,
            branch: None,
            parent: None,
        });
        let record = self.records.len() - 1;
        if frame.kind() == OpKind::Dequeue {
            self.watch = Watch::default();
        }
        log(&mut self.events, Event::Start(record));
        self.stack.push(Active {
            frame,
            record,
            recycle: None,
        });
        record
    }

    fn fail(&mut self, invariant: Invariant, detail: String) {
        self.failures.push(Failure {
            invariant,
            step: self.steps,
            detail,
        });
    }

    fn step_top(&mut self) {
        let top = self.stack.len() - 1;
        let index = self.steps;
        let stepped = match self.stack[top].frame.step(&mut self.mem) {
            Ok(stepped) => stepped,
            Err(err) => {
                self.fail(Invariant::Fault, err.to_string());
                self.halt = Some(Halt::Fault);
                return;
            }
        };
        self.steps += 1;
        let access = stepped.access;

        let active = &mut self.stack[top];
        let mut owner = active.record;
        if active.frame.kind() == OpKind::Dequeue && access.site.procedure() == Procedure::Enqueue {
            let recycle = match active.recycle {
                Some(r) => r,
                None => {
                    let parent = &self.records[active.record];
                    let sentinel = self.mem.queue(parent.queue).sentinel;
                    let record = FrameRecord {
                        op: None,
                        role: Role::Recycle,
                        kind: OpKind::Enqueue,
                        level: parent.level,
                        queue: parent.queue,
                        nodes: vec![sentinel],
                        start: index,
                        finish: None,
                        steps: 0,
                        outcome: None,
                        branch: None,
                        parent: Some(active.record),
                    };
                    self.records.push(record);
                    let r = self.records.len() - 1;
                    log(&mut self.events, Event::Start(r));
                    active.recycle = Some(r);
                    r
                }
            };
            self.records[active.record].steps += 1;
            owner = recycle;
        }
        self.records[owner].steps += 1;
        log(
            &mut self.events,
            Event::Step {
                index,
                record: owner,
                access,
            },
        );

        self.check_step(top, &access, stepped.complete);

        let active = &mut self.stack[top];
        if let (Some(r), Body::Dequeue(p)) = (active.recycle, active.frame.body()) {
            if let Some(v) = p.recycling() {
                self.records[r].branch = v.branch();
            } else {
                active.recycle = None;
                let queue = self.records[r].queue;
                self.recycling.retain(|&q| q != queue);
                let rec = &mut self.records[r];
                rec.finish = Some(index);
                rec.outcome = Some(Outcome::Enqueued);
                self.max_v_steps = self.max_v_steps.max(rec.steps);
                log(&mut self.events, Event::Finish(r));
            }
        }

        if stepped.complete {
            self.complete_top(index);
        }
        if self.steps >= self.max_steps && !(self.stack.is_empty() && self.ops_done()) {
            self.halt = Some(Halt::Livelock);
        }
    }

    fn complete_top(&mut self, index: usize) {
        let active = self.stack.pop().expect("a frame is running");
        let outcome = active.frame.outcome().expect("frame reported completion");
        let rec = &mut self.records[active.record];
        rec.finish = Some(index);
        rec.outcome = Some(outcome);
        if let Body::Enqueue(v) = active.frame.body() {
            rec.branch = v.branch();
            self.max_v_steps = self.max_v_steps.max(rec.steps);
            if rec.role == Role::Op {
                self.completed_enqueues.push(active.record);
            }
        }
        let queue = rec.queue;
        log(&mut self.events, Event::Finish(active.record));
        match outcome {
            Outcome::Dequeued(Some(node)) => self.check_delivered(node, queue),
            Outcome::Dequeued(None) if !self.watch.empty_due => self.fail(
                Invariant::EmptyContract,
                "dequeue reported empty without seeing head equal tail or a missing successor"
                    .into(),
            ),
            _ => {}
        }
    }

    fn check_delivered(&mut self, node: NodeId, queue: QueueId) {
        let label = self.plan.label(node).to_string();
        if self.plan.queue_ids().iter().any(|&q| self.mem.queue(q).sentinel == node) {
            self.fail(
                Invariant::CompletedBeforeVisible,
                format!("dequeue returned sentinel {label}"),
            );
        }
        if let Some(op) = self.plan.enqueuing_op(node) {
            let done = self.op_record[op].is_some_and(|r| self.records[r].finish.is_some());
            if !done {
                self.fail(
                    Invariant::CompletedBeforeVisible,
                    format!("{label} returned before its enqueue (op {op}) completed"),
                );
            }
        }
        let table = self.mem.table();
        if let Some(level) = (0..table.levels()).find(|&l| table.node(l) == Some(node)) {
            self.fail(
                Invariant::CompletedBeforeVisible,
                format!("{label} returned while still named at table level {level}"),
            );
        }
        if self.delivered[node.index()] {
            self.fail(Invariant::Conservation, format!("{label} delivered twice"));
        }
        self.delivered[node.index()] = true;
        self.dequeued.push((node, queue));
    }

    fn check_step(&mut self, top: usize, access: &Access, complete: bool) {
        let procedure = access.site.procedure();
        let write = access.kind == AccessKind::Write;

        if write && matches!(access.cell, Cell::TableQueue(_) | Cell::TableNode(_)) {
            let table = self.mem.table();
            let bad: Vec<usize> = (0..table.levels())
                .filter(|&l| table.queue(l).is_some() && table.node(l).is_none())
                .collect();
            for level in bad {
                self.fail(
                    Invariant::TableOrdering,
                    format!("table level {level} names a queue but no node"),
                );
            }
        }

        match (procedure, access.cell) {
            (Procedure::Enqueue, Cell::Head(_)) => self.fail(
                Invariant::HeadTailOwnership,
                format!("enqueue accessed the head at {}", access.site.name()),
            ),
            (Procedure::Dequeue, Cell::Tail(_)) if write => self.fail(
                Invariant::HeadTailOwnership,
                format!("dequeue wrote the tail at {}", access.site.name()),
            ),
            (Procedure::Peek, _) if write => self.fail(
                Invariant::PeekReadOnly,
                format!("peek wrote {}", access.cell),
            ),
            _ => {}
        }

        if write {
            if let Cell::Tail(q) = access.cell {
                match access.value.node() {
                    None => self.fail(Invariant::TailMonotonic, format!("tail of {q} cleared")),
                    Some(new) if !self.mem.reaches(access.prior.node(), new) => {
                        let from = access.prior.node().map_or("none", |n| self.plan.label(n));
                        let detail = format!(
                            "tail moved from {from} to {}, which it does not reach",
                            self.plan.label(new)
                        );
                        self.fail(Invariant::TailMonotonic, detail);
                    }
                    Some(_) => {}
                }
            }
            if let (Cell::Head(q), Procedure::Dequeue) = (access.cell, procedure) {
                let observed = match self.stack[top].frame.body() {
                    Body::Dequeue(p) => p.observed_tail(),
                    _ => None,
                };
                let new = access.value.node();
                let tail = self.mem.queue(q).tail;
                let ok = new.is_some()
                    && observed.is_none_or(|t| self.mem.reaches(new, t))
                    && tail.is_none_or(|t| self.mem.reaches(new, t));
                if !ok {
                    let new = new.map_or("none", |n| self.plan.label(n));
                    self.fail(
                        Invariant::HeadBounded,
                        format!("head of {q} advanced to {new}, past the tail"),
                    );
                }
            }
        }

        if procedure == Procedure::Dequeue {
            let obliged = match access.site {
                Site::CheckHead => {
                    self.watch.head = Some(access.value);
                    false
                }
                Site::CheckTail => self.watch.head == Some(access.value),
                Site::NextCheck => access.value == Word::Nil,
                _ => false,
            };
            if obliged {
                self.watch.empty_due = true;
                let empty = self.stack[top].frame.outcome() == Some(Outcome::Dequeued(None));
                if !(complete && empty) {
                    self.fail(
                        Invariant::EmptyContract,
                        format!("dequeue continued after {}", access.site.name()),
                    );
                }
            }
        }

        if let (Site::RecycleAdvance, Cell::Head(q)) = (access.site, access.cell) {
            self.recycling.push(q);
        }
        self.check_fatal_states();
        self.observe_stall();
    }

    /// Transient states may break the quiescent rules, but never reach one
    /// of the fatal states. A sentinel a dequeue is recycling counts as
    /// accounted for.
    fn check_fatal_states(&mut self) {
        if self.fatal_reported {
            return;
        }
        let ctx = CheckContext {
            mode: Mode::Diagnostic,
            recycling: &self.recycling,
        };
        let fatal: Vec<String> = check_consistency(&self.mem, &ctx)
            .into_iter()
            .filter_map(|v| {
                let n = v.kind.fatal_state()?;
                Some(format!("fatal state {n} mid-flight: {}", v.kind))
            })
            .collect();
        if !fatal.is_empty() {
            self.fatal_reported = true;
        }
        for detail in fatal {
            self.fail(Invariant::Consistency, detail);
        }
    }

    fn observe_stall(&mut self) {
        if self.stack.is_empty() {
            return;
        }
        for &r in &self.completed_enqueues {
            let rec = &self.records[r];
            let suspended_below = self.stack.iter().any(|a| {
                a.frame.queue() == rec.queue
                    && a.frame.level() < rec.level
                    && (a.frame.kind() == OpKind::Enqueue || a.recycle.is_some())
            });
            if !suspended_below {
                continue;
            }
            let head = self.mem.queue(rec.queue).head;
            for &n in &rec.nodes {
                if !self.delivered[n.index()]
                    && !self.mem.reaches(head, n)
                    && !self.stalled.contains(&n)
                {
                    self.stalled.push(n);
                }
            }
        }
    }

    /// Dequeues from `queue` until two consecutive attempts find nothing.
    pub fn drain(&mut self, queue: QueueId) -> Result<Vec<NodeId>, DrainError> {
        if !self.stack.is_empty() {
            return Err(DrainError::NotQuiescent);
        }
        let cap = 2 * self.mem.node_count() + 4;
        let mut out = Vec::new();
        let mut empty_in_a_row = 0;
        for _ in 0..cap {
            let frame = OpFrame::dequeue(&self.mem, queue).expect("queue exists");
            let record = self.push_frame(frame, None, Role::Drain);
            while !self.stack.is_empty() {
                if self.halt.is_some() {
                    return Err(DrainError::Halted);
                }
                self.step_top();
            }
            match self.records[record].outcome {
                Some(Outcome::Dequeued(Some(n))) => {
                    out.push(n);
                    empty_in_a_row = 0;
                }
                _ => {
                    empty_in_a_row += 1;
                    if empty_in_a_row == 2 {
                        return Ok(out);
                    }
                }
            }
        }
        self.fail(
            Invariant::EventualDelivery,
            format!("draining {queue} did not settle within {cap} dequeues"),
        );
        Ok(out)
    }

    /// Runs the end-of-scenario checks and, if the scenario asks for it,
    /// the drain. Does nothing unless every op has completed.
    pub fn finish(&mut self) {
        if self.finished || self.halt.is_some() || !self.ops_done() {
            return;
        }
        self.check_quiescent_consistency();
        self.check_conservation();
        self.quiescent = Some(self.mem.clone());
        log(&mut self.events, Event::Quiescent);
        if self.plan.scenario().drain {
            for &q in self.plan.queue_ids() {
                if self.drain(q).is_err() {
                    break;
                }
            }
            if self.halt.is_none() {
                self.drained = true;
                self.check_after_drain();
            }
        }
        self.check_isolated_fifo();
        self.finished = true;
    }

    fn check_quiescent_consistency(&mut self) {
        for v in check_consistency(&self.mem, &CheckContext::quiescent()) {
            self.fail(Invariant::Consistency, v.to_string());
        }
    }

    fn check_conservation(&mut self) {
        for &q in self.plan.queue_ids() {
            let sentinel = self.mem.queue(q).sentinel;
            let mut expected = self.plan.enqueued(q);
            let mut actual: Vec<NodeId> = self
                .dequeued
                .iter()
                .filter(|(_, dq)| *dq == q)
                .map(|(n, _)| *n)
                .collect();
            let chain = self.mem.chain(self.mem.queue(q).head);
            actual.extend(chain.nodes.iter().filter(|&&n| n != sentinel));
            expected.sort();
            actual.sort();
            if expected != actual {
                let detail = format!(
                    "{}: expected {} but found {}",
                    self.plan.queue_name(q),
                    self.labels(&expected),
                    self.labels(&actual)
                );
                self.fail(Invariant::Conservation, detail);
            }
        }
    }

    fn check_after_drain(&mut self) {
        for &q in self.plan.queue_ids() {
            let state = *self.mem.queue(q);
            let s = state.sentinel;
            if state.head != Some(s) || state.tail != Some(s) || self.mem.next(s).is_some() {
                let detail = format!("{} did not settle on its sentinel", self.plan.queue_name(q));
                self.fail(Invariant::EventualDelivery, detail);
            }
            let missing: Vec<NodeId> = self
                .plan
                .enqueued(q)
                .into_iter()
                .filter(|n| !self.delivered[n.index()])
                .collect();
            if !missing.is_empty() {
                let detail = format!("never delivered: {}", self.labels(&missing));
                self.fail(Invariant::EventualDelivery, detail);
            }
        }
        self.check_quiescent_consistency();
    }

    fn check_isolated_fifo(&mut self) {
        let mut rank = vec![usize::MAX; self.mem.node_count()];
        for (i, (n, _)) in self.dequeued.iter().enumerate() {
            rank[n.index()] = i;
        }
        let mut found = Vec::new();
        for (fi, f) in self.records.iter().enumerate() {
            if f.role != Role::Op || f.kind != OpKind::Enqueue || f.finish.is_none() {
                continue;
            }
            let isolated = !self.records.iter().enumerate().any(|(gi, g)| {
                gi != fi
                    && g.kind == OpKind::Enqueue
                    && g.role != Role::Drain
                    && g.queue == f.queue
                    && g.overlaps(f)
            });
            if !isolated {
                continue;
            }
            self.isolated_checked += 1;
            let finished = f.finish.expect("checked above");
            let earlier = self.plan.layout_nodes(f.queue).iter().chain(
                self.records
                    .iter()
                    .filter(|g| {
                        g.role == Role::Op
                            && g.kind == OpKind::Enqueue
                            && g.queue == f.queue
                            && g.finish.is_some_and(|e| e < finished)
                    })
                    .flat_map(|g| g.nodes.iter()),
            );
            for &g in earlier {
                for &n in &f.nodes {
                    if rank[n.index()] != usize::MAX && rank[g.index()] > rank[n.index()] {
                        found.push(format!(
                            "{} overtook {}, which completed first",
                            self.plan.label(n),
                            self.plan.label(g)
                        ));
                    }
                }
            }
        }
        for detail in found {
            self.fail(Invariant::IsolatedFifo, detail);
        }
    }

    /// Displacement of every delivered node, once the queue has been
    /// drained.
    pub fn reorder(&self) -> Option<ReorderReport> {
        if !self.drained {
            return None;
        }
        Some(reorder::measure(self.plan, &self.records, &self.dequeued))
    }

    fn labels(&self, nodes: &[NodeId]) -> String {
        let names: Vec<&str> = nodes.iter().map(|&n| self.plan.label(n)).collect();
        format!("[{}]", names.join(", "))
    }
}
