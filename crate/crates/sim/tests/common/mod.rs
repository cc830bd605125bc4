#![allow(dead_code)]

use irqueue_core::{AccessKind, QueueId, SharedMemory, Site};
use irqueue_sim::{Choice, Event, Plan, Scenario, Schedule, Trace, World, DEFAULT_MAX_STEPS};

/// Renders a queue the way the algorithm's state diagrams do, e.g.
/// `H := sentinel - nodeA - T := nodeB`.
pub fn diagram(trace: &Trace, mem: &SharedMemory) -> String {
    let q = mem.queue(QueueId(0));
    let name = |n| {
        let label = trace.label(n);
        if label == "sentinel" {
            label.to_string()
        } else {
            format!("node{label}")
        }
    };
    if q.head == q.tail {
        return format!("H := T := {}", name(q.head.unwrap()));
    }
    let chain = mem.chain(q.head).nodes;
    let parts: Vec<String> = chain
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut s = String::new();
            if i == 0 {
                s.push_str("H := ");
            }
            if Some(n) == q.tail {
                s.push_str("T := ");
            }
            s + &name(n)
        })
        .collect();
    parts.join(" - ")
}

/// Memory after each event selected by `pick`, rebuilt from the trace's
/// writes.
pub fn states_where(trace: &Trace, mut pick: impl FnMut(&Event, &Trace) -> bool) -> Vec<String> {
    let mut mem = trace.initial.clone();
    let mut out = Vec::new();
    for event in &trace.events {
        if let Event::Step { access, .. } = event {
            if access.kind == AccessKind::Write {
                mem.poke(access.cell, access.value);
            }
        }
        if pick(event, trace) {
            out.push(diagram(trace, &mem));
        }
    }
    out
}

/// Reorder example: A is queued ahead of the sentinel, B at
/// level 1 links itself behind the sentinel and is interrupted before it
/// moves the tail, and C at level 2 runs to completion.
pub fn reorder_scenario() -> Scenario {
    Scenario::new(3)
        .with_layout(&["A", "sentinel"])
        .enqueue(1, &["B"])
        .enqueue(2, &["C"])
}

pub fn reorder_schedule() -> Schedule {
    let scenario = reorder_scenario();
    let plan = Plan::new(&scenario).unwrap();
    let mut world = World::new(&plan, DEFAULT_MAX_STEPS).recording();
    let mut path = vec![Choice::Start(0)];
    world.apply(Choice::Start(0)).unwrap();
    loop {
        let last = world.events().unwrap().iter().rev().find_map(|e| match e {
            Event::Step { access, .. } => Some(access.site),
            _ => None,
        });
        if last == Some(Site::AppendNode) {
            break;
        }
        world.apply(Choice::Advance).unwrap();
        path.push(Choice::Advance);
    }
    path.push(Choice::Start(1));
    Schedule(path)
}
