//! Line-oriented scenario files.
//!
//! ```text
//! # comments run to the end of the line
//! levels 3
//! queue q                    # optional; a queue named `q` exists by default
//! queue r self_sentinel
//! layout q A sentinel        # initial contents, head first
//! v level=1 nodes=B,C        # enqueue a chain; queue=<name> defaults to the first queue
//! p                          # dequeue (level=0 implied)
//! peek level=2 n=4
//! drain false                # default true
//! schedule start:0 advance*3 start:1
//! ```
//!
//! `schedule` may appear on several lines; the tokens are concatenated.

use std::collections::HashMap;

use irqueue_sim::{OpSpec, OpSpecKind, QueueSpec, Scenario, Schedule, SENTINEL};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    /// Embedded schedule, if the file has `schedule` lines.
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

struct Fields<'a> {
    line: usize,
    map: HashMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, words: &[&'a str], allowed: &[&str]) -> Result<Self, ParseError> {
        let mut map = HashMap::new();
        for word in words {
            let (k, v) = word
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key=value, found `{word}`")))?;
            if !allowed.contains(&k) {
                return Err(err(line, format!("unknown key `{k}`")));
            }
            if map.insert(k, v).is_some() {
                return Err(err(line, format!("key `{k}` given twice")));
            }
        }
        Ok(Fields { line, map })
    }

    fn number(&self, key: &str, default: Option<usize>) -> Result<usize, ParseError> {
        match self.map.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| err(self.line, format!("`{key}` must be a number, found `{v}`"))),
            None => default.ok_or_else(|| err(self.line, format!("missing `{key}=`"))),
        }
    }
}

pub fn parse(text: &str) -> Result<ScenarioFile, ParseError> {
    let mut levels = None;
    let mut queues: Vec<QueueSpec> = Vec::new();
    let mut layouts: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut ops: Vec<(usize, OpSpecKind, usize, Option<String>)> = Vec::new();
    let mut drain = true;
    let mut schedule: Option<String> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some((&keyword, rest)) = words.split_first() else {
            continue;
        };
        match keyword {
            "levels" => {
                let [n] = rest else {
                    return Err(err(line, "usage: levels <count>"));
                };
                let n = n
                    .parse()
                    .map_err(|_| err(line, format!("bad level count `{n}`")))?;
                if levels.replace(n).is_some() {
                    return Err(err(line, "levels given twice"));
                }
            }
            "queue" => {
                let (name, self_sentinel) = match rest {
                    [name] => (name, false),
                    [name, "self_sentinel"] => (name, true),
                    _ => return Err(err(line, "usage: queue <name> [self_sentinel]")),
                };
                queues.push(QueueSpec {
                    name: name.to_string(),
                    self_sentinel,
                    layout: vec![SENTINEL.into()],
                });
            }
            "layout" => {
                let [queue, nodes @ ..] = rest else {
                    return Err(err(line, "usage: layout <queue> <node>..."));
                };
                layouts.push((
                    line,
                    queue.to_string(),
                    nodes.iter().map(|s| s.to_string()).collect(),
                ));
            }
            "v" => {
                let f = Fields::parse(line, rest, &["level", "nodes", "queue"])?;
                let nodes = f
                    .map
                    .get("nodes")
                    .ok_or_else(|| err(line, "missing `nodes=`"))?;
                let nodes = nodes.split(',').map(str::to_string).collect();
                ops.push((
                    line,
                    OpSpecKind::Enqueue { nodes },
                    f.number("level", None)?,
                    f.map.get("queue").map(|s| s.to_string()),
                ));
            }
            "p" => {
                let f = Fields::parse(line, rest, &["level", "queue"])?;
                ops.push((
                    line,
                    OpSpecKind::Dequeue,
                    f.number("level", Some(0))?,
                    f.map.get("queue").map(|s| s.to_string()),
                ));
            }
            "peek" => {
                let f = Fields::parse(line, rest, &["level", "n", "queue"])?;
                ops.push((
                    line,
                    OpSpecKind::Peek {
                        limit: f.number("n", None)?,
                    },
                    f.number("level", None)?,
                    f.map.get("queue").map(|s| s.to_string()),
                ));
            }
            "drain" => {
                drain = match rest {
                    ["true"] => true,
                    ["false"] => false,
                    _ => return Err(err(line, "usage: drain true|false")),
                };
            }
            "schedule" => {
                let tokens = rest.join(" ");
                tokens
                    .parse::<Schedule>()
                    .map_err(|e| err(line, e.to_string()))?;
                let s = schedule.get_or_insert_with(String::new);
                s.push(' ');
                s.push_str(&tokens);
            }
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }

    let levels = levels.ok_or_else(|| err(0, "missing `levels` line"))?;
    if queues.is_empty() {
        queues = Scenario::new(levels).queues;
    }
    let find = |line: usize, name: &str| {
        queues
            .iter()
            .position(|q| q.name == name)
            .ok_or_else(|| err(line, format!("unknown queue `{name}`")))
    };
    let mut with_layout = queues.clone();
    for (line, queue, nodes) in layouts {
        with_layout[find(line, &queue)?].layout = nodes;
    }
    let mut specs = Vec::new();
    for (line, kind, level, queue) in ops {
        let queue = match queue {
            Some(name) => find(line, &name)?,
            None => 0,
        };
        specs.push(OpSpec { kind, level, queue });
    }
    Ok(ScenarioFile {
        scenario: Scenario {
            levels,
            queues: with_layout,
            ops: specs,
            drain,
        },
        schedule: schedule.map(|s| s.parse().expect("tokens checked per line")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_directive() {
        let file = parse(
            "levels 3\nqueue q\nqueue r self_sentinel\nlayout q A sentinel\n\
             v level=1 nodes=B,C\np\npeek level=2 n=4 queue=r\ndrain false\n\
             schedule start:0 advance*2\nschedule start:1 # tail\n",
        )
        .unwrap();
        let s = &file.scenario;
        assert_eq!(s.levels, 3);
        assert_eq!(s.queues[0].layout, ["A", "sentinel"]);
        assert!(s.queues[1].self_sentinel);
        assert_eq!(
            s.ops[0].kind,
            OpSpecKind::Enqueue {
                nodes: vec!["B".into(), "C".into()]
            }
        );
        assert_eq!(s.ops[1].kind, OpSpecKind::Dequeue);
        assert_eq!(s.ops[2].queue, 1);
        assert!(!s.drain);
        assert_eq!(file.schedule.unwrap().to_string(), "start:0 advance*2 start:1");
    }

    #[test]
    fn default_queue_is_q() {
        let file = parse("levels 2\nv level=0 nodes=A\n").unwrap();
        assert_eq!(file.scenario, Scenario::new(2).enqueue(0, &["A"]));
    }

    #[test]
    fn reports_the_offending_line() {
        let e = parse("levels 2\nv level=x nodes=A\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse("levels 2\nfrobnicate\n").unwrap_err();
        assert!(e.message.contains("frobnicate"));
        let e = parse("levels 2\nv level=0 nodes=A queue=nope\n").unwrap_err();
        assert!(e.message.contains("nope"));
        assert!(parse("v level=0 nodes=A\n").is_err());
    }
}
