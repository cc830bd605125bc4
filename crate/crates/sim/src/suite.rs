//! The shipped scenario suite explored exhaustively by the acceptance
//! tests.
//!
//! The grid covers 2 and 3 interrupt levels, 2 to 4 enqueues and 0 to 2
//! dequeues. Every enqueue placement that uses level 0 and the top level is
//! included. Dequeues sit at level 0 between enqueues so that higher levels
//! can preempt them mid-recycle. Extra entries add chain enqueues, queues
//! that start with the sentinel away from the head, and two queues sharing
//! one level table.

use crate::scenario::{OpSpec, OpSpecKind, QueueSpec, Scenario, SENTINEL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteEntry {
    pub name: String,
    pub scenario: Scenario,
}

const NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

/// Non-decreasing level sequences of length `n` that start at 0 and reach
/// `top`.
fn placements(n: usize, top: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, top: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            if prefix.last() == Some(&top) {
                out.push(prefix.clone());
            }
            return;
        }
        let from = prefix.last().copied().unwrap_or(0);
        let to = if prefix.is_empty() { 0 } else { top };
        for level in from..=to {
            prefix.push(level);
            grow(prefix, n, top, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, top, &mut out);
    out
}

fn v(level: usize, nodes: &[&str]) -> OpSpec {
    OpSpec {
        kind: OpSpecKind::Enqueue {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
        },
        level,
        queue: 0,
    }
}

fn p() -> OpSpec {
    OpSpec {
        kind: OpSpecKind::Dequeue,
        level: 0,
        queue: 0,
    }
}

/// Level-0 enqueues, then dequeues spliced in: the first after the first
/// level-0 enqueue, the second at the end of level 0.
fn grid_scenario(levels: usize, shape: &[usize], dequeues: usize) -> Scenario {
    let mut ops = Vec::new();
    for (i, &level) in shape.iter().enumerate() {
        ops.push(v(level, &[NAMES[i]]));
        if i == 0 && dequeues >= 1 {
            ops.push(p());
        }
    }
    if dequeues >= 2 {
        ops.push(p());
    }
    Scenario {
        ops,
        ..Scenario::new(levels)
    }
}

pub fn standard_suite() -> Vec<SuiteEntry> {
    let mut suite = Vec::new();
    let mut add = |name: String, scenario: Scenario| {
        debug_assert!(scenario.validate().is_ok(), "{name}");
        suite.push(SuiteEntry { name, scenario });
    };

    for levels in 2..=3 {
        for n in 2..=4 {
            for shape in placements(n, levels - 1) {
                for dequeues in 0..=2 {
                    let levels_tag: String = shape.iter().map(|l| l.to_string()).collect();
                    add(
                        format!("grid-l{levels}-v{levels_tag}-p{dequeues}"),
                        grid_scenario(levels, &shape, dequeues),
                    );
                }
            }
        }
    }

    // Chain enqueues at every position of the level ladder.
    for (name, ops) in [
        ("chain-high", vec![v(0, &["A"]), v(1, &["B"]), v(2, &["C", "D"])]),
        ("chain-mid", vec![v(0, &["A"]), v(1, &["B", "C"]), v(2, &["D"])]),
        ("chain-low", vec![v(0, &["A", "B"]), v(1, &["C"]), v(2, &["D"])]),
        ("chain-dequeue", vec![v(0, &["A", "B"]), p(), v(1, &["C", "D"])]),
    ] {
        add(
            name.to_string(),
            Scenario {
                ops,
                ..Scenario::new(3)
            },
        );
    }

    // The sentinel starts behind a node, so the first dequeue recycles it
    // while higher levels may interrupt.
    for (name, layout, ops) in [
        (
            "recycle-l2",
            vec![SENTINEL, "Z"],
            vec![p(), v(1, &["A"]), v(1, &["B"])],
        ),
        (
            "recycle-l3",
            vec![SENTINEL, "Z"],
            vec![p(), v(1, &["A"]), v(2, &["B"])],
        ),
        (
            "recycle-twice",
            vec![SENTINEL, "Z"],
            vec![p(), p(), v(1, &["A"]), v(2, &["B"])],
        ),
        (
            "recycle-middle",
            vec!["Y", SENTINEL, "Z"],
            vec![p(), p(), v(1, &["A"]), v(2, &["B"])],
        ),
        (
            "recycle-busy",
            vec![SENTINEL, "Z"],
            vec![v(0, &["A"]), p(), v(1, &["B"]), v(2, &["C"])],
        ),
    ] {
        let mut scenario = Scenario {
            ops,
            ..Scenario::new(3)
        };
        scenario.queues[0].layout = layout.iter().map(|s| s.to_string()).collect();
        add(name.to_string(), scenario);
    }

    // Self-sentinel storage behaves like an arena sentinel.
    let mut embedded = grid_scenario(3, &[0, 1, 2], 1);
    embedded.queues[0].self_sentinel = true;
    add("self-sentinel".into(), embedded);

    // Two queues share the level table; the table scan must skip entries
    // that belong to the other queue.
    let mut shared = Scenario::new(3);
    shared.queues.push(QueueSpec {
        name: "r".into(),
        self_sentinel: false,
        layout: vec![SENTINEL.into()],
    });
    shared.ops = vec![
        v(0, &["A"]),
        OpSpec {
            queue: 1,
            ..v(1, &["B"])
        },
        v(2, &["C"]),
        OpSpec {
            queue: 1,
            ..v(2, &["D"])
        },
    ];
    add("two-queues".into(), shared);

    // Peeks interleaved with a stalled pipeline.
    add(
        "peek-stall".into(),
        Scenario::new(3)
            .enqueue(0, &["A"])
            .enqueue(1, &["B"])
            .enqueue(2, &["C"])
            .peek(2, 4)
            .dequeue(),
    );

    suite
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placements_start_low_and_reach_top() {
        assert_eq!(placements(2, 1), vec![vec![0, 1]]);
        assert_eq!(placements(3, 2), vec![vec![0, 0, 2], vec![0, 1, 2], vec![0, 2, 2]]);
    }

    #[test]
    fn names_are_unique_and_scenarios_valid() {
        let suite = standard_suite();
        for (i, e) in suite.iter().enumerate() {
            assert!(e.scenario.validate().is_ok(), "{}", e.name);
            assert!(suite[..i].iter().all(|o| o.name != e.name), "{}", e.name);
        }
    }
}
