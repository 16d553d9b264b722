//! Line-oriented dataset persistence.
//!
//! One header line, then one transition per line, all fields separated by
//! single spaces, reals in shortest round-trip decimal:
//!
//! ```text
//! pars-dataset v1 <env_id> <state_dim> <action_dim> <low..> <high..>
//! <s..> <a..> <r> <s_next..> <0|1>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Transition, TransitionDataset};
use crate::error::{Error, Result};

const MAGIC: &str = "pars-dataset";
const VERSION: &str = "v1";

pub fn save_dataset(ds: &TransitionDataset, path: &Path) -> Result<()> {
    ds.validate()?;
    fs::write(path, render_dataset(ds))?;
    Ok(())
}

pub fn render_dataset(ds: &TransitionDataset) -> String {
    let mut s = String::new();
    let _ = write!(s, "{MAGIC} {VERSION} {} {} {}", ds.env_id, ds.state_dim, ds.action_dim);
    for v in ds.feasible_low.iter().chain(&ds.feasible_high) {
        let _ = write!(s, " {v}");
    }
    s.push('\n');
    for t in &ds.transitions {
        let mut first = true;
        for v in t.s.iter().chain(&t.a) {
            if !first {
                s.push(' ');
            }
            let _ = write!(s, "{v}");
            first = false;
        }
        let _ = write!(s, " {}", t.r);
        for v in &t.s_next {
            let _ = write!(s, " {v}");
        }
        let _ = writeln!(s, " {}", if t.done { 1 } else { 0 });
    }
    s
}

pub fn load_dataset(path: &Path) -> Result<TransitionDataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<TransitionDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let mut parts = header.split(' ');
    let magic = parts.next().unwrap_or("");
    let version = parts.next().unwrap_or("");
    if magic != MAGIC || version != VERSION {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected `{MAGIC} {VERSION}` header"),
        });
    }
    let env_id = parts
        .next()
        .ok_or(Error::Parse {
            line: 1,
            message: "missing env_id".into(),
        })?
        .to_string();
    let state_dim = parse_field::<usize>(parts.next(), 1, "state_dim")?;
    let action_dim = parse_field::<usize>(parts.next(), 1, "action_dim")?;
    let mut bounds = Vec::with_capacity(2 * action_dim);
    for _ in 0..2 * action_dim {
        bounds.push(parse_field::<f64>(parts.next(), 1, "feasible bound")?);
    }
    if parts.next().is_some() {
        return Err(Error::Parse {
            line: 1,
            message: "trailing fields in header".into(),
        });
    }
    let feasible_low = bounds[..action_dim].to_vec();
    let feasible_high = bounds[action_dim..].to_vec();

    let fields_per_line = 2 * state_dim + action_dim + 2;
    let mut transitions = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(' ').collect();
        if vals.len() != fields_per_line {
            return Err(Error::Schema {
                line: line_no,
                message: format!(
                    "expected {fields_per_line} fields for dims ({state_dim}, {action_dim}), got {}",
                    vals.len()
                ),
            });
        }
        let mut floats = Vec::with_capacity(fields_per_line - 1);
        for v in &vals[..fields_per_line - 1] {
            floats.push(v.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad float `{v}`"),
            })?);
        }
        let done = match vals[fields_per_line - 1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("bad done flag `{other}` (expected 0 or 1)"),
                })
            }
        };
        let s = floats[..state_dim].to_vec();
        let a = floats[state_dim..state_dim + action_dim].to_vec();
        let r = floats[state_dim + action_dim];
        let s_next = floats[state_dim + action_dim + 1..].to_vec();
        transitions.push(Transition { s, a, r, s_next, done });
    }

    let ds = TransitionDataset {
        env_id,
        state_dim,
        action_dim,
        feasible_low,
        feasible_high,
        transitions,
    };
    ds.validate()?;
    Ok(ds)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    field
        .ok_or(Error::Parse {
            line,
            message: format!("missing {what}"),
        })?
        .parse::<T>()
        .map_err(|_| Error::Parse {
            line,
            message: format!("bad {what}"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> TransitionDataset {
        TransitionDataset {
            env_id: "line_walk_1d".into(),
            state_dim: 1,
            action_dim: 1,
            feasible_low: vec![-1.0],
            feasible_high: vec![1.0],
            transitions: vec![
                Transition {
                    s: vec![0.25],
                    a: vec![0.6],
                    r: -0.1499999999999999,
                    s_next: vec![0.85],
                    done: false,
                },
                Transition {
                    s: vec![0.85],
                    a: vec![-0.05],
                    r: 0.0,
                    s_next: vec![0.8],
                    done: true,
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let ds = sample_dataset();
        let text = render_dataset(&ds);
        let back = parse_dataset(&text).unwrap();
        assert_eq!(ds, back);
        // and idempotent at the byte level
        assert_eq!(render_dataset(&back), text);
    }

    #[test]
    fn empty_transition_file_is_valid() {
        let text = "pars-dataset v1 point_maze_2d 2 2 -1 -1 1 1\n";
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.state_dim, 2);
        assert_eq!(ds.env_id, "point_maze_2d");
    }

    #[test]
    fn wrong_field_count_cites_the_line() {
        let mut text = String::from("pars-dataset v1 line_walk_1d 1 1 -1 1\n");
        text.push_str("0.1 0.2 0 0.3 0\n"); // line 2, valid (5 fields)
        text.push_str("0.1 0.2 0 0.3 0.4 0\n"); // line 3, one field too many
        let err = parse_dataset(&text).unwrap_err();
        match err {
            Error::Schema { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn malformed_float_names_line() {
        let mut text = String::from("pars-dataset v1 line_walk_1d 1 1 -1 1\n");
        text.push_str("0.1 oops 0 0.3 0\n");
        let err = parse_dataset(&text).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        let ds = sample_dataset();
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}
