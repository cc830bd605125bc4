//! Exhaustive depth-first enumeration of legal schedules.

use std::collections::BTreeMap;

use crate::reorder::ReorderSummary;
use crate::scenario::{Plan, Scenario, ScenarioError};
use crate::schedule::{Choice, Schedule};
use crate::world::{Failure, Halt, Invariant, World, DEFAULT_MAX_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    pub max_steps: usize,
    /// How many failing and livelocked schedules to keep for reporting.
    pub keep: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            max_steps: DEFAULT_MAX_STEPS,
            keep: 16,
        }
    }
}

/// A failure together with the schedule that reproduces it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundFailure {
    pub failure: Failure,
    pub schedule: Schedule,
}

/// Tallies shared by exploration and fuzzing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunTally {
    pub runs: u64,
    pub failing_runs: u64,
    /// Failure count per invariant across all runs.
    pub by_invariant: BTreeMap<Invariant, u64>,
    pub failures: Vec<FoundFailure>,
    pub livelocks: u64,
    pub livelock_suspects: Vec<Schedule>,
    pub max_v_steps: usize,
    pub total_steps: u64,
    /// Runs that stranded a completed node behind a suspended enqueue.
    pub stall_runs: u64,
    pub stall_example: Option<Schedule>,
    pub isolated_checked: u64,
    pub reorder: ReorderSummary,
}

impl RunTally {
    pub(crate) fn absorb(&mut self, world: &World<'_>, path: &[Choice], keep: usize) {
        self.runs += 1;
        self.total_steps += world.steps() as u64;
        self.max_v_steps = self.max_v_steps.max(world.max_v_steps());
        self.isolated_checked += world.isolated_checked() as u64;
        if !world.failures().is_empty() {
            self.failing_runs += 1;
            for f in world.failures() {
                *self.by_invariant.entry(f.invariant).or_default() += 1;
            }
            if self.failures.len() < keep {
                self.failures.push(FoundFailure {
                    failure: world.failures()[0].clone(),
                    schedule: Schedule(path.to_vec()),
                });
            }
        }
        if world.halt() == Some(Halt::Livelock) {
            self.livelocks += 1;
            if self.livelock_suspects.len() < keep {
                self.livelock_suspects.push(Schedule(path.to_vec()));
            }
        }
        if !world.stalled_nodes().is_empty() {
            self.stall_runs += 1;
            if self.stall_example.is_none() {
                self.stall_example = Some(Schedule(path.to_vec()));
            }
        }
        if let Some(report) = world.reorder() {
            self.reorder.absorb(&report);
        }
    }

    pub fn failure_count(&self) -> u64 {
        self.by_invariant.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationReport {
    pub schedules_visited: u64,
    pub tally: RunTally,
}

impl ExplorationReport {
    pub fn max_v_steps(&self) -> usize {
        self.tally.max_v_steps
    }

    pub fn is_clean(&self) -> bool {
        self.tally.failing_runs == 0 && self.tally.livelocks == 0
    }
}

/// Visits every legal schedule of `scenario`: at each step boundary the
/// running frame may advance and the next op of every higher level may
/// start. Each leaf runs the end-of-scenario checks.
pub fn explore(scenario: &Scenario, config: ExploreConfig) -> Result<ExplorationReport, ScenarioError> {
    explore_with(scenario, config, |_, _| {})
}

/// Like [`explore()`], also handing every finished leaf and its schedule to
/// `on_leaf`.
pub fn explore_with<F>(
    scenario: &Scenario,
    config: ExploreConfig,
    mut on_leaf: F,
) -> Result<ExplorationReport, ScenarioError>
where
    F: FnMut(&World<'_>, &[Choice]),
{
    let plan = Plan::new(scenario)?;
    let mut tally = RunTally::default();
    let mut path = Vec::new();
    let mut leaf = |world: &World<'_>, path: &[Choice]| {
        tally.absorb(world, path, config.keep);
        on_leaf(world, path);
    };
    visit(World::new(&plan, config.max_steps), &mut path, &mut leaf);
    Ok(ExplorationReport {
        schedules_visited: tally.runs,
        tally,
    })
}

/// Depth-first, in the order [`World::legal_choices`] lists choices. The
/// first choice continues in place and the others are forked onto an
/// explicit stack, so deep (livelocking) branches cannot overflow the call
/// stack and a world is cloned only where there is a real choice.
fn visit<F>(root: World<'_>, path: &mut Vec<Choice>, leaf: &mut F)
where
    F: FnMut(&World<'_>, &[Choice]),
{
    let mut pending = vec![(root, 0, None)];
    while let Some((mut world, depth, choice)) = pending.pop() {
        path.truncate(depth);
        path.extend(choice);
        loop {
            let choices = world.legal_choices();
            let Some((&first, rest)) = choices.split_first() else {
                world.finish();
                leaf(&world, path);
                break;
            };
            for &choice in rest.iter().rev() {
                let mut fork = world.clone();
                fork.apply(choice).expect("legal choice");
                pending.push((fork, path.len(), Some(choice)));
            }
            world.apply(first).expect("legal choice");
            path.push(first);
        }
    }
}
