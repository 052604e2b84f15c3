//! Plain-text readers for discrete joints and topic-model specs.
//!
//! Joint file: a header `x1_size x2_size y_size` followed by the
//! `x1_size·x2_size·max(y_size,1)` probabilities in `(x1, x2, y)` row-major
//! order, whitespace separated. `#` starts a comment.
//!
//! Topic spec file: `key = value` lines with keys `a` (row-major `V × k`),
//! `topics`, `vocab`, `tau_weights` + `tau_atoms` (row-major `k × m`) or
//! `tau_dirichlet`, `doc_len`, `w`, `noise_sigma`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::generators::DiscreteJoint;
use crate::harness::config::parse_kv;
use crate::linalg::{matrix_from_rows, DenseVector};
use crate::topic::{Tau, TopicModelSpec};

const NORMALIZE_TOL: f64 = 1e-6;

fn strip_comments(text: &str) -> impl Iterator<Item = &str> {
    text.lines().flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace())
}

pub fn parse_joint(text: &str) -> Result<DiscreteJoint> {
    let mut tokens = strip_comments(text);
    let mut size = |name: &str| -> Result<usize> {
        let t = tokens.next().ok_or_else(|| Error::Config(format!("joint file: missing {name}")))?;
        t.parse().map_err(|_| Error::Config(format!("joint file: bad {name} '{t}'")))
    };
    let (n1, n2, ny) = (size("x1_size")?, size("x2_size")?, size("y_size")?.max(1));
    let p: Vec<f64> = tokens
        .map(|t| t.parse().map_err(|_| Error::Config(format!("joint file: bad probability '{t}'"))))
        .collect::<Result<_>>()?;
    if p.len() != n1 * n2 * ny {
        return Err(Error::Config(format!("joint file: expected {} probabilities, found {}", n1 * n2 * ny, p.len())));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZE_TOL {
        return Err(Error::Config(format!("joint file: probabilities sum to {total}")));
    }
    DiscreteJoint::from_weights(n1, n2, ny, p)
}

pub fn read_joint(path: &Path) -> Result<DiscreteJoint> {
    parse_joint(&std::fs::read_to_string(path)?)
}

/// Inverse of [`parse_joint`].
pub fn format_joint(joint: &DiscreteJoint) -> String {
    let mut s = format!("{} {} {}\n", joint.n1, joint.n2, joint.ny);
    for chunk in joint.p.chunks(joint.ny) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

fn floats(map: &BTreeMap<String, String>, key: &str) -> Result<Vec<f64>> {
    let v = map.get(key).ok_or_else(|| Error::Config(format!("topic spec: missing '{key}'")))?;
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("topic spec: bad number '{s}' in '{key}'"))))
        .collect()
}

fn usize_key(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    let v = map.get(key).ok_or_else(|| Error::Config(format!("topic spec: missing '{key}'")))?;
    v.parse().map_err(|_| Error::Config(format!("topic spec: bad value '{v}' for '{key}'")))
}

pub fn parse_topic_spec(text: &str) -> Result<TopicModelSpec> {
    let map = parse_kv(text)?;
    const KNOWN: [&str; 9] = ["topics", "vocab", "a", "tau_weights", "tau_atoms", "tau_dirichlet", "doc_len", "w", "noise_sigma"];
    if let Some(k) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(Error::Config(format!("topic spec: unknown key '{k}'")));
    }
    let topics = usize_key(&map, "topics")?;
    let vocab = usize_key(&map, "vocab")?;
    let a = matrix_from_rows(vocab, topics, &floats(&map, "a")?)?;
    let tau = match (map.contains_key("tau_weights"), map.contains_key("tau_dirichlet")) {
        (true, false) => {
            let weights = floats(&map, "tau_weights")?;
            let atoms = matrix_from_rows(topics, weights.len(), &floats(&map, "tau_atoms")?)?;
            Tau::Finite { weights, atoms }
        }
        (false, true) => Tau::Dirichlet {
            alpha: floats(&map, "tau_dirichlet")?,
        },
        _ => return Err(Error::Config("topic spec: give exactly one of tau_weights or tau_dirichlet".into())),
    };
    let noise = match map.get("noise_sigma") {
        Some(v) => v.parse().map_err(|_| Error::Config(format!("topic spec: bad noise_sigma '{v}'")))?,
        None => 0.0,
    };
    TopicModelSpec::new(a, tau, usize_key(&map, "doc_len")?, DenseVector::from_vec(floats(&map, "w")?), noise)
}

pub fn read_topic_spec(path: &Path) -> Result<TopicModelSpec> {
    parse_topic_spec(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::discrete_joint_random;

    #[test]
    fn joint_round_trip() {
        let j = discrete_joint_random((3, 4, 2), 5, false).unwrap();
        let back = parse_joint(&format_joint(&j)).unwrap();
        for (a, b) in j.p.iter().zip(&back.p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_without_y_and_comments() {
        let j = parse_joint("# pair\n2 2 0\n0.25 0.25\n0.25 0.25 # tail\n").unwrap();
        assert_eq!((j.n1, j.n2, j.ny), (2, 2, 1));
    }

    #[test]
    fn rejects_bad_joints() {
        assert!(parse_joint("2 2 1\n0.5 0.5 0.5 0.5").is_err());
        assert!(parse_joint("2 2 1\n0.5 0.5").is_err());
        assert!(parse_joint("2 x 1\n").is_err());
    }

    #[test]
    fn topic_spec_parses() {
        let text = "topics = 2\nvocab = 3\na = 0.5,0.1, 0.3,0.2, 0.2,0.7\n\
                    tau_weights = 0.5,0.5\ntau_atoms = 1,0.3, 0,0.7\ndoc_len = 4\nw = 1,-1\n";
        let spec = parse_topic_spec(text).unwrap();
        assert_eq!((spec.vocab, spec.topics), (3, 2));
        assert!(parse_topic_spec(&format!("{text}bogus = 1\n")).is_err());
        assert!(parse_topic_spec(&text.replace("tau_weights = 0.5,0.5\ntau_atoms = 1,0.3, 0,0.7\n", "")).is_err());
    }
}
