//! Plain-text instance format.
//!
//! ```text
//! emarl-instance v1 n_agents=2 n_states=3 action_sizes=2,2 n_features=2 gamma=9.0000000000000002e-1
//! TRANSITION
//! <one line per (s, a) in s-major order: |S| values of P(s'|s,a)>
//! REWARDS
//! <one line per (agent, s): |A| values of r^i(s,a), joint actions in mixed-radix order>
//! FEATURES
//! <one line per s: K values>
//! END
//! ```
//!
//! Numbers are written with 17 significant digits so that any reader that
//! parses IEEE doubles recovers the instance bit for bit.

use std::fmt::Write as _;

use super::Mdp;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const MAGIC: &str = "emarl-instance";

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_row(out: &mut String, row: &[f64]) {
    let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

pub fn write_instance(mdp: &Mdp) -> String {
    let mut out = String::new();
    let sizes: Vec<String> = mdp.action_sizes().iter().map(|s| s.to_string()).collect();
    writeln!(
        out,
        "{MAGIC} v1 n_agents={} n_states={} action_sizes={} n_features={} gamma={}",
        mdp.n_agents(),
        mdp.n_states(),
        sizes.join(","),
        mdp.n_features(),
        fmt_f64(mdp.gamma())
    )
    .unwrap();
    out.push_str("TRANSITION\n");
    for row in mdp.raw_transition().chunks(mdp.n_states()) {
        write_row(&mut out, row);
    }
    out.push_str("REWARDS\n");
    for row in mdp.raw_rewards().chunks(mdp.n_joint_actions()) {
        write_row(&mut out, row);
    }
    out.push_str("FEATURES\n");
    for s in 0..mdp.n_states() {
        write_row(&mut out, mdp.features().row(s));
    }
    out.push_str("END\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(Error::parse(0, "unexpected end of input"))
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        let (n, line) = self.next_line()?;
        if line != tag {
            return Err(Error::parse(n, format!("expected '{tag}', found '{line}'")));
        }
        Ok(())
    }

    fn numbers(&mut self, count: usize, into: &mut Vec<f64>) -> Result<()> {
        let (n, line) = self.next_line()?;
        let before = into.len();
        for tok in line.split_whitespace() {
            into.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(n, format!("bad number '{tok}'")))?,
            );
        }
        if into.len() - before != count {
            return Err(Error::parse(
                n,
                format!("expected {count} values, found {}", into.len() - before),
            ));
        }
        Ok(())
    }
}

fn header_field<'a>(fields: &[(&'a str, &'a str)], key: &str, line: usize) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::parse(line, format!("header missing '{key}'")))
}

fn parse_usize(v: &str, line: usize) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::parse(line, format!("bad count '{v}'")))
}

pub fn read_instance(text: &str) -> Result<Mdp> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (hn, header) = lines.next_line()?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some(MAGIC) || toks.next() != Some("v1") {
        return Err(Error::parse(hn, "not an emarl-instance v1 file"));
    }
    let fields: Vec<(&str, &str)> = toks
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| Error::parse(hn, format!("bad header field '{t}'")))
        })
        .collect::<Result<_>>()?;
    let n_agents = parse_usize(header_field(&fields, "n_agents", hn)?, hn)?;
    let n_states = parse_usize(header_field(&fields, "n_states", hn)?, hn)?;
    let n_features = parse_usize(header_field(&fields, "n_features", hn)?, hn)?;
    let sizes: Vec<usize> = header_field(&fields, "action_sizes", hn)?
        .split(',')
        .map(|v| parse_usize(v, hn))
        .collect::<Result<_>>()?;
    if sizes.len() != n_agents {
        return Err(Error::parse(
            hn,
            "action_sizes length differs from n_agents",
        ));
    }
    let gamma: f64 = header_field(&fields, "gamma", hn)?
        .parse()
        .map_err(|_| Error::parse(hn, "bad gamma"))?;
    let n_joint: usize = sizes.iter().product();

    lines.expect("TRANSITION")?;
    let mut transition = Vec::with_capacity(n_states * n_joint * n_states);
    for _ in 0..n_states * n_joint {
        lines.numbers(n_states, &mut transition)?;
    }
    lines.expect("REWARDS")?;
    let mut rewards = Vec::with_capacity(n_agents * n_states * n_joint);
    for _ in 0..n_agents * n_states {
        lines.numbers(n_joint, &mut rewards)?;
    }
    lines.expect("FEATURES")?;
    let mut features = Vec::with_capacity(n_states * n_features);
    for _ in 0..n_states {
        lines.numbers(n_features, &mut features)?;
    }
    lines.expect("END")?;
    let phi = DenseMatrix::from_vec(n_states, n_features, features)?;
    Mdp::new(n_states, &sizes, transition, rewards, gamma, phi)
}
