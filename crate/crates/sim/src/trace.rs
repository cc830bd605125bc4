//! Recorded executions and their line-delimited JSON form.
//!
//! A trace file holds one JSON object per line, each tagged by a `record`
//! field:
//!
//! * `header`: `version`, `scenario`, `schedule` (full effective schedule).
//! * `snapshot`: `phase` (`initial`, `quiescent` or `final`) and `cells`, a
//!   map from cell name to label holding every non-nil cell.
//! * `start`: `frame`, `role` (`op`, `recycle`, `drain`), `kind` (`V`, `P`,
//!   `peek`), `level`, `queue`, `op`, `nodes`, `step` (index of the frame's
//!   first step).
//! * `step`: `index`, `frame`, `level`, `site`, `cell`, `access` (`read` or
//!   `write`), `value`, `prior`.
//! * `finish`: `frame`, `step`, `outcome`, `branch`.
//! * `summary`: `steps`, `delivered`, `max_v_steps`, `stalled`,
//!   `failures`, `halt`.
//!
//! Cells are named `next[A]`, `head[q]`, `tail[q]`, `table.queue[2]` and
//! `table.node[2]`. Nodes are written by label and queues by name; a
//! queue's sentinel is labelled `sentinel`, or `<queue>.sentinel` when the
//! scenario has several queues.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use irqueue_core::{AccessKind, Branch, Cell, NodeId, OpKind, Outcome, QueueId, SharedMemory, Word};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reorder::ReorderReport;
use crate::run::{run_schedule_with, RunError};
use crate::scenario::{Plan, Scenario};
use crate::schedule::Schedule;
use crate::world::{Event, Failure, FrameRecord, Halt, World, DEFAULT_MAX_STEPS};

pub const TRACE_VERSION: u32 = 1;

/// Everything observed while running one schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub scenario: Scenario,
    pub schedule: Schedule,
    pub labels: Vec<String>,
    pub steps: usize,
    pub records: Vec<FrameRecord>,
    pub events: Vec<Event>,
    pub initial: SharedMemory,
    pub quiescent: Option<SharedMemory>,
    pub final_memory: SharedMemory,
    pub dequeued: Vec<(NodeId, QueueId)>,
    pub drained: bool,
    pub failures: Vec<Failure>,
    pub halt: Option<Halt>,
    pub max_v_steps: usize,
    pub stalled: Vec<NodeId>,
    pub reorder: Option<ReorderReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("the trace was not drained, so not every node has a dequeue rank")]
pub struct UndrainedError;

impl Trace {
    pub(crate) fn from_world(world: &World<'_>, schedule: Schedule) -> Trace {
        let plan = world.plan();
        let labels = (0..world.memory().node_count())
            .map(|i| plan.label(NodeId(i as u32)).to_string())
            .collect();
        Trace {
            scenario: plan.scenario().clone(),
            schedule,
            labels,
            steps: world.steps(),
            records: world.records().to_vec(),
            events: world.events().map(<[Event]>::to_vec).unwrap_or_default(),
            initial: plan.initial().clone(),
            quiescent: world.quiescent_memory().cloned(),
            final_memory: world.memory().clone(),
            dequeued: world.dequeued().to_vec(),
            drained: world.is_drained(),
            failures: world.failures().to_vec(),
            halt: world.halt(),
            max_v_steps: world.max_v_steps(),
            stalled: world.stalled_nodes().to_vec(),
            reorder: world.reorder(),
        }
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node.index()]
    }

    pub fn queue_name(&self, queue: QueueId) -> &str {
        &self.scenario.queues[queue.index()].name
    }

    /// Labels of dequeued nodes in dequeue order.
    pub fn delivered(&self) -> Vec<&str> {
        self.dequeued.iter().map(|(n, _)| self.label(*n)).collect()
    }

    /// Node labels from the queue's head, following `next` links.
    pub fn chain(&self, mem: &SharedMemory, queue: usize) -> Vec<&str> {
        let head = mem.queue(QueueId(queue as u32)).head;
        mem.chain(head).nodes.iter().map(|&n| self.label(n)).collect()
    }

    /// The initial memory with every recorded write applied in order.
    pub fn replay_writes(&self) -> SharedMemory {
        let mut mem = self.initial.clone();
        for event in &self.events {
            if let Event::Step { access, .. } = event {
                if access.kind == AccessKind::Write {
                    mem.poke(access.cell, access.value);
                }
            }
        }
        mem
    }

    /// Ranks of every delivered node under both orderings.
    pub fn measure_reorder(&self) -> Result<ReorderReport, UndrainedError> {
        self.reorder.clone().ok_or(UndrainedError)
    }

    pub fn word_label(&self, word: Word) -> Option<String> {
        match word {
            Word::Nil => None,
            Word::Node(n) => Some(self.label(n).to_string()),
            Word::Queue(q) => Some(self.queue_name(q).to_string()),
        }
    }

    pub fn cell_name(&self, cell: Cell) -> String {
        match cell {
            Cell::Next(n) => format!("next[{}]", self.label(n)),
            Cell::Head(q) => format!("head[{}]", self.queue_name(q)),
            Cell::Tail(q) => format!("tail[{}]", self.queue_name(q)),
            Cell::TableQueue(l) => format!("table.queue[{l}]"),
            Cell::TableNode(l) => format!("table.node[{l}]"),
        }
    }

    /// Every non-nil cell, keyed by cell name.
    pub fn cells(&self, mem: &SharedMemory) -> BTreeMap<String, String> {
        let mut cells = Vec::new();
        for n in mem.nodes() {
            cells.push(Cell::Next(n));
        }
        for q in mem.queue_ids() {
            cells.push(Cell::Head(q));
            cells.push(Cell::Tail(q));
        }
        for l in 0..mem.levels() {
            cells.push(Cell::TableQueue(l));
            cells.push(Cell::TableNode(l));
        }
        cells
            .into_iter()
            .filter_map(|c| Some((self.cell_name(c), self.word_label(mem.peek_cell(c))?)))
            .collect()
    }

    fn snapshot(&self, phase: &str, mem: &SharedMemory) -> TraceLine {
        TraceLine::Snapshot {
            phase: phase.to_string(),
            cells: self.cells(mem),
        }
    }

    pub fn to_lines(&self) -> Vec<TraceLine> {
        let mut out = vec![
            TraceLine::Header {
                version: TRACE_VERSION,
                scenario: self.scenario.clone(),
                schedule: self.schedule.to_string(),
            },
            self.snapshot("initial", &self.initial),
        ];
        for event in &self.events {
            out.push(match *event {
                Event::Start(r) => {
                    let rec = &self.records[r];
                    TraceLine::Start {
                        frame: r,
                        role: rec.role.name().to_string(),
                        kind: kind_name(rec.kind).to_string(),
                        level: rec.level,
                        queue: self.queue_name(rec.queue).to_string(),
                        op: rec.op,
                        nodes: rec.nodes.iter().map(|&n| self.label(n).to_string()).collect(),
                        step: rec.start,
                    }
                }
                Event::Step {
                    index,
                    record,
                    access,
                } => TraceLine::Step {
                    index,
                    frame: record,
                    level: self.records[record].level,
                    site: access.site.name().to_string(),
                    cell: self.cell_name(access.cell),
                    access: match access.kind {
                        AccessKind::Read => "read",
                        AccessKind::Write => "write",
                    }
                    .to_string(),
                    value: self.word_label(access.value),
                    prior: self.word_label(access.prior),
                },
                Event::Finish(r) => {
                    let rec = &self.records[r];
                    TraceLine::Finish {
                        frame: r,
                        step: rec.finish.unwrap_or(0),
                        outcome: rec.outcome.map(|o| self.outcome_text(o)).unwrap_or_default(),
                        branch: rec.branch.map(|b| branch_name(b).to_string()),
                    }
                }
                Event::Quiescent => match &self.quiescent {
                    Some(mem) => self.snapshot("quiescent", mem),
                    None => continue,
                },
            });
        }
        out.push(self.snapshot("final", &self.final_memory));
        out.push(TraceLine::Summary {
            steps: self.steps,
            delivered: self.delivered().iter().map(|s| s.to_string()).collect(),
            max_v_steps: self.max_v_steps,
            stalled: self.stalled.iter().map(|&n| self.label(n).to_string()).collect(),
            failures: self.failures.iter().map(|f| f.to_string()).collect(),
            halt: self.halt.map(|h| halt_name(h).to_string()),
        });
        out
    }

    pub fn outcome_text(&self, outcome: Outcome) -> String {
        match outcome {
            Outcome::Enqueued => "enqueued".into(),
            Outcome::Dequeued(Some(n)) => format!("dequeued {}", self.label(n)),
            Outcome::Dequeued(None) => "empty".into(),
            Outcome::Peeked(n) => format!("peeked {n}"),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in self.to_lines() {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

fn kind_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Enqueue => "V",
        OpKind::Dequeue => "P",
        OpKind::Peek => "peek",
    }
}

fn branch_name(branch: Branch) -> &'static str {
    match branch {
        Branch::Simple => "simple",
        Branch::Stalled => "stalled",
        Branch::Anchored => "anchored",
    }
}

fn halt_name(halt: Halt) -> &'static str {
    match halt {
        Halt::Fault => "fault",
        Halt::Livelock => "livelock",
    }
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceLine {
    Header {
        version: u32,
        scenario: Scenario,
        schedule: String,
    },
    Snapshot {
        phase: String,
        cells: BTreeMap<String, String>,
    },
    Start {
        frame: usize,
        role: String,
        kind: String,
        level: usize,
        queue: String,
        op: Option<usize>,
        nodes: Vec<String>,
        step: usize,
    },
    Step {
        index: usize,
        frame: usize,
        level: usize,
        site: String,
        cell: String,
        access: String,
        value: Option<String>,
        prior: Option<String>,
    },
    Finish {
        frame: usize,
        step: usize,
        outcome: String,
        branch: Option<String>,
    },
    Summary {
        steps: usize,
        delivered: Vec<String>,
        max_v_steps: usize,
        stalled: Vec<String>,
        failures: Vec<String>,
        halt: Option<String>,
    },
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace does not begin with a header record")]
    MissingHeader,
    #[error("unsupported trace version {0}")]
    Version(u32),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {phase} snapshot differs from the replayed writes")]
    Snapshot { line: usize, phase: String },
    #[error("line {line}: re-execution diverges from the recorded trace")]
    Diverged { line: usize },
    #[error("recorded trace has {recorded} lines but re-execution produced {replayed}")]
    Length { recorded: usize, replayed: usize },
    #[error("re-execution failed: {0}")]
    Run(#[from] RunError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Result of re-verifying a trace file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub steps: usize,
    pub delivered: Vec<String>,
    pub final_cells: BTreeMap<String, String>,
    /// Invariant failures found by re-execution.
    pub failures: Vec<String>,
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceLine>, CheckError> {
    let mut lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(&line).map_err(|e| CheckError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        lines.push(parsed);
    }
    Ok(lines)
}

/// Re-verifies a recorded trace: snapshots must match the recorded writes
/// replayed at the label level, step indices must be contiguous, and
/// re-running the recorded scenario and schedule must reproduce every
/// line and pass every invariant check.
pub fn check_trace(lines: &[TraceLine]) -> Result<CheckReport, CheckError> {
    let Some(TraceLine::Header {
        version,
        scenario,
        schedule,
    }) = lines.first()
    else {
        return Err(CheckError::MissingHeader);
    };
    if *version != TRACE_VERSION {
        return Err(CheckError::Version(*version));
    }

    let mut cells: Option<BTreeMap<String, String>> = None;
    let mut next_step = 0;
    for (i, line) in lines.iter().enumerate().skip(1) {
        let line_no = i + 1;
        match line {
            TraceLine::Header { .. } => {
                return Err(CheckError::Malformed {
                    line: line_no,
                    message: "second header".into(),
                })
            }
            TraceLine::Snapshot { phase, cells: snap } => match &cells {
                None if phase == "initial" => cells = Some(snap.clone()),
                None => {
                    return Err(CheckError::Malformed {
                        line: line_no,
                        message: "first snapshot must be the initial one".into(),
                    })
                }
                Some(current) if current != snap => {
                    return Err(CheckError::Snapshot {
                        line: line_no,
                        phase: phase.clone(),
                    })
                }
                Some(_) => {}
            },
            TraceLine::Step {
                index,
                cell,
                access,
                value,
                ..
            } => {
                if *index != next_step {
                    return Err(CheckError::Malformed {
                        line: line_no,
                        message: format!("expected step {next_step}, found {index}"),
                    });
                }
                next_step += 1;
                let Some(state) = cells.as_mut() else {
                    return Err(CheckError::Malformed {
                        line: line_no,
                        message: "step before the initial snapshot".into(),
                    });
                };
                if access == "write" {
                    match value {
                        Some(v) => state.insert(cell.clone(), v.clone()),
                        None => state.remove(cell),
                    };
                }
            }
            TraceLine::Summary { steps, .. } if *steps != next_step => {
                return Err(CheckError::Malformed {
                    line: line_no,
                    message: format!("summary claims {steps} steps but {next_step} were recorded"),
                });
            }
            _ => {}
        }
    }

    let schedule: Schedule = schedule.parse().map_err(|e: crate::schedule::ParseScheduleError| {
        CheckError::Malformed {
            line: 1,
            message: e.to_string(),
        }
    })?;
    Plan::new(scenario).map_err(RunError::from)?;
    let trace = run_schedule_with(scenario, &schedule, DEFAULT_MAX_STEPS)?;
    let replayed = trace.to_lines();
    if let Some(i) = lines.iter().zip(&replayed).position(|(a, b)| a != b) {
        return Err(CheckError::Diverged { line: i + 1 });
    }
    if lines.len() != replayed.len() {
        return Err(CheckError::Length {
            recorded: lines.len(),
            replayed: replayed.len(),
        });
    }
    Ok(CheckReport {
        steps: trace.steps,
        delivered: trace.delivered().iter().map(|s| s.to_string()).collect(),
        final_cells: trace.cells(&trace.final_memory),
        failures: trace.failures.iter().map(|f| f.to_string()).collect(),
    })
}
