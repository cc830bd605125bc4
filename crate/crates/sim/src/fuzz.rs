//! Seeded random schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::explore::RunTally;
use crate::scenario::{Plan, Scenario, ScenarioError};
use crate::schedule::{Choice, Schedule};
use crate::world::{World, DEFAULT_MAX_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzConfig {
    pub seed: u64,
    pub iterations: u64,
    pub max_steps: usize,
    pub keep: usize,
}

impl FuzzConfig {
    pub fn new(seed: u64, iterations: u64) -> Self {
        FuzzConfig {
            seed,
            iterations,
            max_steps: DEFAULT_MAX_STEPS,
            keep: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub seed: u64,
    pub iterations: u64,
    /// Iteration index of each kept failure, parallel to `tally.failures`.
    pub failure_iterations: Vec<u64>,
    pub tally: RunTally,
    /// FNV-1a hash over every choice made and every node delivered.
    pub fingerprint: u64,
}

impl FuzzReport {
    pub fn is_clean(&self) -> bool {
        self.tally.failing_runs == 0 && self.tally.livelocks == 0
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(hash: u64, value: u64) -> u64 {
    value
        .to_le_bytes()
        .iter()
        .fold(hash, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Runs `iterations` schedules. Iteration `i` draws from a ChaCha8 stream
/// keyed by `(seed, i)`, so any single run can be reproduced on its own.
/// At every step boundary the choice is uniform over the legal choices.
pub fn fuzz(scenario: &Scenario, config: FuzzConfig) -> Result<FuzzReport, ScenarioError> {
    let plan = Plan::new(scenario)?;
    let mut tally = RunTally::default();
    let mut failure_iterations = Vec::new();
    let mut fingerprint = FNV_OFFSET;
    for index in 0..config.iterations {
        let (world, path) = random_run(&plan, config.seed, index, config.max_steps, &mut fingerprint);
        for (n, _) in world.dequeued() {
            fingerprint = fnv(fingerprint, n.0 as u64);
        }
        let kept = tally.failures.len();
        tally.absorb(&world, &path, config.keep);
        if tally.failures.len() > kept {
            failure_iterations.push(index);
        }
    }
    Ok(FuzzReport {
        seed: config.seed,
        iterations: config.iterations,
        failure_iterations,
        tally,
        fingerprint,
    })
}

/// The schedule fuzz iteration `index` of `seed` runs, for reproduction.
pub fn fuzz_schedule(
    scenario: &Scenario,
    seed: u64,
    index: u64,
    max_steps: usize,
) -> Result<Schedule, ScenarioError> {
    let plan = Plan::new(scenario)?;
    Ok(Schedule(random_run(&plan, seed, index, max_steps, &mut 0).1))
}

fn random_run<'p>(
    plan: &'p Plan,
    seed: u64,
    index: u64,
    max_steps: usize,
    fingerprint: &mut u64,
) -> (World<'p>, Vec<Choice>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut world = World::new(plan, max_steps);
    let mut path = Vec::new();
    loop {
        let choices = world.legal_choices();
        if choices.is_empty() {
            break;
        }
        let pick = rng.random_range(0..choices.len());
        *fingerprint = fnv(*fingerprint, pick as u64);
        world.apply(choices[pick]).expect("legal choice");
        path.push(choices[pick]);
    }
    world.finish();
    (world, path)
}
