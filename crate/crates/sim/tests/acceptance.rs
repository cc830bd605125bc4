//! Acceptance gate. Prints one line per criterion and exits non-zero if any
//! fails. Set `IRQUEUE_BLESS=1` to rewrite the suite golden after an
//! intentional change to step counts.

mod common;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{diagram, reorder_scenario, reorder_schedule, states_where};
use irqueue_core::{
    check_consistency, Cell, CheckContext, NodeId, Outcome, SharedMemory, Word,
};
use irqueue_sim::suite::{standard_suite, SuiteEntry};
use irqueue_sim::{
    explore_with, fuzz, run_schedule, Event, ExploreConfig, FuzzConfig, Invariant, Role,
    RunTally, Scenario, Schedule,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// What a pass over the whole suite observed.
struct SuiteRun {
    elapsed: Duration,
    per_scenario: Vec<(String, u64, usize)>,
    tally: RunTally,
    stall_leaves: u64,
    stalled_undelivered: u64,
    empty_returns: u64,
    stall_example: Option<(Scenario, Schedule)>,
}

fn explore_suite(suite: &[SuiteEntry]) -> SuiteRun {
    let start = Instant::now();
    let mut run = SuiteRun {
        elapsed: Duration::ZERO,
        per_scenario: Vec::new(),
        tally: RunTally::default(),
        stall_leaves: 0,
        stalled_undelivered: 0,
        empty_returns: 0,
        stall_example: None,
    };
    for entry in suite {
        let mut stall_leaves = 0;
        let mut stalled_undelivered = 0;
        let mut empty_returns = 0;
        let mut example = None;
        let report = explore_with(&entry.scenario, ExploreConfig::default(), |world, path| {
            empty_returns += world
                .records()
                .iter()
                .filter(|r| r.outcome == Some(Outcome::Dequeued(None)))
                .count() as u64;
            if world.stalled_nodes().is_empty() {
                return;
            }
            stall_leaves += 1;
            let delivered: Vec<NodeId> = world.dequeued().iter().map(|(n, _)| *n).collect();
            stalled_undelivered += world
                .stalled_nodes()
                .iter()
                .filter(|n| !delivered.contains(n))
                .count() as u64;
            if example.is_none() {
                example = Some(Schedule(path.to_vec()));
            }
        })
        .expect("suite scenarios are valid");
        run.per_scenario.push((
            entry.name.clone(),
            report.schedules_visited,
            report.max_v_steps(),
        ));
        let t = &report.tally;
        run.tally.runs += t.runs;
        run.tally.failing_runs += t.failing_runs;
        for (k, v) in &t.by_invariant {
            *run.tally.by_invariant.entry(*k).or_default() += v;
        }
        run.tally.failures.extend(t.failures.iter().take(3).cloned());
        run.tally.livelocks += t.livelocks;
        run.tally.max_v_steps = run.tally.max_v_steps.max(t.max_v_steps);
        run.tally.isolated_checked += t.isolated_checked;
        run.stall_leaves += stall_leaves;
        run.stalled_undelivered += stalled_undelivered;
        run.empty_returns += empty_returns;
        if run.stall_example.is_none() {
            run.stall_example = example.map(|s| (entry.scenario.clone(), s));
        }
    }
    run.elapsed = start.elapsed();
    run
}

fn count(tally: &RunTally, invariant: Invariant) -> u64 {
    tally.by_invariant.get(&invariant).copied().unwrap_or(0)
}

fn serial_fifo() -> Verdict {
    let start = Instant::now();
    let scenario = Scenario::new(3)
        .enqueue(0, &["A"])
        .enqueue(0, &["B"])
        .enqueue(0, &["C"]);
    let trace = run_schedule(&scenario, &Schedule::new()).unwrap();
    let enqueued = states_where(&trace, |e, t| {
        matches!(e, Event::Finish(r) if t.records[*r].role == Role::Op)
    });
    let ok = trace.failures.is_empty()
        && enqueued
            == [
                "H := sentinel - T := nodeA",
                "H := sentinel - nodeA - T := nodeB",
                "H := sentinel - nodeA - nodeB - T := nodeC",
            ]
        && trace.delivered() == ["A", "B", "C"]
        && diagram(&trace, &trace.final_memory) == "H := T := sentinel";
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(1),
        format!(
            "drain {:?}, final `{}`, {elapsed:.2?}",
            trace.delivered(),
            diagram(&trace, &trace.final_memory)
        ),
    )
}

fn reorder_golden() -> Verdict {
    let start = Instant::now();
    let trace = run_schedule(&reorder_scenario(), &reorder_schedule()).unwrap();
    let chain = trace.chain(trace.quiescent.as_ref().unwrap(), 0);
    let ok = trace.failures.is_empty()
        && chain == ["A", "sentinel", "C", "B"]
        && trace.delivered() == ["A", "C", "B"];
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(1),
        format!(
            "chain {}, drain {:?}, {elapsed:.2?}",
            chain.join("->"),
            trace.delivered()
        ),
    )
}

fn exhaustive_safety(run: &SuiteRun) -> Verdict {
    let safety = [
        Invariant::Conservation,
        Invariant::EventualDelivery,
        Invariant::CompletedBeforeVisible,
        Invariant::TailMonotonic,
        Invariant::HeadBounded,
        Invariant::TableOrdering,
        Invariant::Consistency,
    ];
    let violations: u64 = safety.iter().map(|&i| count(&run.tally, i)).sum();
    let mut detail = format!(
        "{} scenarios, {} schedules, {} safety violations, {} failures overall, {} livelocks, {:.1?}",
        run.per_scenario.len(),
        run.tally.runs,
        violations,
        run.tally.failure_count(),
        run.tally.livelocks,
        run.elapsed
    );
    if let Some(f) = run.tally.failures.first() {
        let _ = write!(detail, "; first: {} [{}]", f.failure, f.schedule);
    }
    verdict(
        violations == 0
            && run.tally.failing_runs == 0
            && run.tally.livelocks == 0
            && run.elapsed < Duration::from_secs(300),
        detail,
    )
}

fn stall_exhibition(run: &SuiteRun) -> Verdict {
    let Some((scenario, schedule)) = &run.stall_example else {
        return verdict(false, "no stalled schedule found");
    };
    let trace = run_schedule(scenario, schedule).unwrap();
    let replayed = !trace.stalled.is_empty()
        && trace
            .stalled
            .iter()
            .all(|n| trace.dequeued.iter().any(|(d, _)| d == n));
    verdict(
        run.stall_leaves > 0 && run.stalled_undelivered == 0 && replayed,
        format!(
            "{} schedules strand a completed node, {} of those nodes undelivered after quiescence; e.g. [{}]",
            run.stall_leaves, run.stalled_undelivered, trace.schedule
        ),
    )
}

fn empty_contract(run: &SuiteRun) -> Verdict {
    let violations = count(&run.tally, Invariant::EmptyContract);
    verdict(
        violations == 0 && run.empty_returns > 0,
        format!(
            "{} empty returns checked, {violations} violations",
            run.empty_returns
        ),
    )
}

fn isolated_fifo(run: &SuiteRun) -> Verdict {
    let violations = count(&run.tally, Invariant::IsolatedFifo);
    verdict(
        violations == 0 && run.tally.isolated_checked > 0,
        format!(
            "{} isolated frames checked, {violations} counterexamples",
            run.tally.isolated_checked
        ),
    )
}

fn fuzz_template() -> Scenario {
    Scenario::new(4)
        .enqueue(0, &["A"])
        .dequeue()
        .enqueue(0, &["B"])
        .dequeue()
        .enqueue(1, &["C"])
        .enqueue(1, &["D"])
        .enqueue(2, &["E"])
        .enqueue(2, &["F"])
        .enqueue(3, &["G"])
        .enqueue(3, &["H"])
        .dequeue()
}

fn fuzz_endurance() -> Verdict {
    let start = Instant::now();
    let config = FuzzConfig::new(0x5eed, 100_000);
    let first = fuzz(&fuzz_template(), config).unwrap();
    let second = fuzz(&fuzz_template(), config).unwrap();
    let elapsed = start.elapsed();
    verdict(
        first.is_clean() && first == second && elapsed < Duration::from_secs(120),
        format!(
            "{} runs x2, {} failures, fingerprint {:016x} both times: {}, {elapsed:.1?}",
            first.iterations,
            first.tally.failure_count(),
            first.fingerprint,
            first == second
        ),
    )
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/goldens/suite.txt")
}

fn render_golden(run: &SuiteRun) -> String {
    let mut out = String::from("# scenario schedules_visited max_v_steps\n");
    for (name, visited, max_v) in &run.per_scenario {
        let _ = writeln!(out, "{name} {visited} {max_v}");
    }
    let _ = writeln!(out, "suite {} {}", run.tally.runs, run.tally.max_v_steps);
    out
}

fn determinism(first: &SuiteRun, suite: &[SuiteEntry]) -> Verdict {
    let second = explore_suite(suite);
    let repeatable = first.per_scenario == second.per_scenario;
    let rendered = render_golden(first);
    let path = golden_path();
    if std::env::var_os("IRQUEUE_BLESS").is_some() {
        std::fs::write(&path, &rendered).expect("write golden");
    }
    let golden = std::fs::read_to_string(&path).unwrap_or_default();
    verdict(
        repeatable && golden == rendered,
        format!(
            "repeat identical: {repeatable}, matches committed golden: {}, suite max_V_steps {}",
            golden == rendered,
            first.tally.max_v_steps
        ),
    )
}

fn fatal_states(run: &SuiteRun) -> Verdict {
    let base = || {
        let mut mem = SharedMemory::new(4, 3);
        let q = mem.init_queue(false).unwrap();
        let a = mem.alloc_node().unwrap();
        let b = mem.alloc_node().unwrap();
        (mem, q, a, b)
    };
    let mut instances: Vec<(u8, SharedMemory)> = Vec::new();

    let (mut mem, q, _, _) = base();
    let s = mem.queue(q).sentinel;
    mem.poke(Cell::Next(s), Word::Node(s));
    instances.push((1, mem));

    let (mut mem, q, a, b) = base();
    let s = mem.queue(q).sentinel;
    mem.set_next(s, Some(a));
    mem.set_next(a, Some(b));
    mem.set_next(b, Some(a));
    mem.poke(Cell::Tail(q), Word::Node(b));
    instances.push((2, mem));

    let (mut mem, q, a, _) = base();
    mem.poke(Cell::Head(q), Word::Node(a));
    mem.poke(Cell::Tail(q), Word::Node(a));
    instances.push((3, mem));

    let (mut mem, q, _, _) = base();
    mem.poke(Cell::Head(q), Word::Nil);
    instances.push((4, mem));

    let (mut mem, q, _, _) = base();
    mem.poke(Cell::TableQueue(2), Word::Queue(q));
    instances.push((5, mem));

    let mut flagged = Vec::new();
    for (expected, mem) in &instances {
        let found = check_consistency(mem, &CheckContext::quiescent());
        if found.iter().any(|v| v.kind.fatal_state() == Some(*expected)) {
            flagged.push(*expected);
        }
    }
    let reachable = count(&run.tally, Invariant::Consistency) + count(&run.tally, Invariant::TableOrdering);
    verdict(
        flagged == [1, 2, 3, 4, 5] && reachable == 0,
        format!("flagged {flagged:?} of [1, 2, 3, 4, 5]; fatal states reached in exploration: {reachable}"),
    )
}

fn main() -> ExitCode {
    let suite = standard_suite();
    let run = explore_suite(&suite);
    let mut results: BTreeMap<u8, (&str, Verdict)> = BTreeMap::new();
    results.insert(1, ("serial FIFO golden", serial_fifo()));
    results.insert(2, ("reorder golden", reorder_golden()));
    results.insert(3, ("exhaustive safety", exhaustive_safety(&run)));
    results.insert(4, ("stall exhibition", stall_exhibition(&run)));
    results.insert(5, ("empty-queue contract", empty_contract(&run)));
    results.insert(6, ("isolated-enqueue FIFO", isolated_fifo(&run)));
    results.insert(7, ("fuzz endurance", fuzz_endurance()));
    results.insert(8, ("determinism and step bounds", determinism(&run, &suite)));
    results.insert(9, ("fatal-state detector", fatal_states(&run)));

    let mut all = true;
    for (n, (name, v)) in &results {
        all &= v.pass;
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("acceptance {n} {status} {name}: {}", v.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
