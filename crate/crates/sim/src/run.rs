//! Executing one scenario under one schedule.

use thiserror::Error;

use crate::scenario::{Plan, Scenario, ScenarioError};
use crate::schedule::{Choice, Schedule};
use crate::trace::Trace;
use crate::world::{ScheduleError, World, DEFAULT_MAX_STEPS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("schedule step {index} ({choice}): {source}")]
    Schedule {
        index: usize,
        choice: Choice,
        source: ScheduleError,
    },
}

/// Runs `schedule`, completes whatever it leaves unfinished with the serial
/// policy (see [`World::default_choice`]), then runs the end-of-scenario
/// checks and drain. The trace records the full effective schedule.
pub fn run_schedule(scenario: &Scenario, schedule: &Schedule) -> Result<Trace, RunError> {
    run_schedule_with(scenario, schedule, DEFAULT_MAX_STEPS)
}

pub fn run_schedule_with(
    scenario: &Scenario,
    schedule: &Schedule,
    max_steps: usize,
) -> Result<Trace, RunError> {
    let plan = Plan::new(scenario)?;
    let mut world = World::new(&plan, max_steps).recording();
    let mut effective = Vec::with_capacity(schedule.len());
    for (index, &choice) in schedule.choices().iter().enumerate() {
        world
            .apply(choice)
            .map_err(|source| RunError::Schedule {
                index,
                choice,
                source,
            })?;
        effective.push(choice);
    }
    while let Some(choice) = world.default_choice() {
        world.apply(choice).expect("the serial policy only makes legal choices");
        effective.push(choice);
    }
    world.finish();
    Ok(Trace::from_world(&world, Schedule(effective)))
}
