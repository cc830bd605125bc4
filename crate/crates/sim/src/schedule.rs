//! Scheduler choices and their textual form.
//!
//! A schedule is a whitespace-separated list of tokens: `start:<op>` starts
//! the op with that index and executes its first step, `advance` executes
//! one step of the running (highest-level) frame, and `advance*<n>` repeats
//! `advance` n times.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Advance,
    Start(usize),
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Advance => f.write_str("advance"),
            Choice::Start(op) => write!(f, "start:{op}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Schedule(pub Vec<Choice>);

impl Schedule {
    pub fn new() -> Self {
        Schedule(Vec::new())
    }

    pub fn choices(&self) -> &[Choice] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn start(mut self, op: usize) -> Self {
        self.0.push(Choice::Start(op));
        self
    }

    pub fn advance(mut self, n: usize) -> Self {
        self.0.extend(std::iter::repeat_n(Choice::Advance, n));
        self
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            match self.0[i] {
                Choice::Start(op) => {
                    write!(f, "start:{op}")?;
                    i += 1;
                }
                Choice::Advance => {
                    let run = self.0[i..]
                        .iter()
                        .take_while(|c| **c == Choice::Advance)
                        .count();
                    if run == 1 {
                        f.write_str("advance")?;
                    } else {
                        write!(f, "advance*{run}")?;
                    }
                    i += run;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad schedule token `{0}`")]
pub struct ParseScheduleError(pub String);

impl FromStr for Schedule {
    type Err = ParseScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut choices = Vec::new();
        for token in s.split_whitespace() {
            let bad = || ParseScheduleError(token.to_string());
            if let Some(op) = token.strip_prefix("start:") {
                choices.push(Choice::Start(op.parse().map_err(|_| bad())?));
            } else if token == "advance" {
                choices.push(Choice::Advance);
            } else if let Some(n) = token.strip_prefix("advance*") {
                let n: usize = n.parse().map_err(|_| bad())?;
                choices.extend(std::iter::repeat_n(Choice::Advance, n));
            } else {
                return Err(bad());
            }
        }
        Ok(Schedule(choices))
    }
}
