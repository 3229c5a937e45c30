//! Text instance files.
//!
//! ```text
//! n m k
//! u v        (m lines, 1-based)
//! c1 ... cn
//! s1 ... sk  (only when k > 0)
//! ```
//!
//! Parsing is whitespace-tolerant: any whitespace separates tokens, line
//! structure is not enforced.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Configuration, Graph, GraphError, SandpileInstance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected {0}, found end of input")]
    UnexpectedEnd(&'static str),
    #[error("bad {what} token {token:?}")]
    BadToken { what: &'static str, token: String },
    #[error("trailing tokens after a complete instance")]
    TrailingTokens,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &'static str) -> Result<&'a str, ParseError> {
        self.iter.next().ok_or(ParseError::UnexpectedEnd(what))
    }

    fn usize(&mut self, what: &'static str) -> Result<usize, ParseError> {
        let tok = self.next(what)?;
        tok.parse().map_err(|_| ParseError::BadToken {
            what,
            token: tok.to_string(),
        })
    }

    fn chips(&mut self) -> Result<u64, ParseError> {
        let tok = self.next("chip count")?;
        if tok.starts_with('-') && tok[1..].parse::<u64>().is_ok() {
            return Err(GraphError::NegativeChips.into());
        }
        tok.parse().map_err(|_| ParseError::BadToken {
            what: "chip count",
            token: tok.to_string(),
        })
    }
}

/// Parses an instance file. The instance is structurally validated (graph
/// simplicity, index ranges) but `validate()` is left to the caller.
pub fn parse_instance(text: &str) -> Result<SandpileInstance, ParseError> {
    let mut toks = Tokens {
        iter: text.split_whitespace(),
    };
    let n = toks.usize("vertex count")?;
    let m = toks.usize("edge count")?;
    let k = toks.usize("sink count")?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let u = toks.usize("edge endpoint")?;
        let v = toks.usize("edge endpoint")?;
        edges.push((u, v));
    }
    let graph = Graph::build(n, &edges)?;
    let mut chips = Vec::with_capacity(n);
    for _ in 0..n {
        chips.push(toks.chips()?);
    }
    let mut sinks = Vec::with_capacity(k);
    for _ in 0..k {
        let s = toks.usize("sink id")?;
        if s < 1 || s > n {
            return Err(GraphError::BadSink(s).into());
        }
        sinks.push(s - 1);
    }
    if toks.iter.next().is_some() {
        return Err(ParseError::TrailingTokens);
    }
    Ok(SandpileInstance::new(graph, Configuration::new(chips), sinks))
}

/// Writes an instance in the same format (1-based ids).
pub fn write_instance(instance: &SandpileInstance) -> String {
    let g = &instance.graph;
    let n = g.vertex_count();
    let mut out = String::new();
    writeln!(out, "{} {} {}", n, g.edge_count(), instance.sinks.len()).unwrap();
    for u in 0..n {
        for &v in g.neighbors(u) {
            if u < v as usize {
                writeln!(out, "{} {}", u + 1, v as usize + 1).unwrap();
            }
        }
    }
    let chips: Vec<String> = (0..n).map(|u| instance.config.chips(u).to_string()).collect();
    writeln!(out, "{}", chips.join(" ")).unwrap();
    if !instance.sinks.is_empty() {
        let sinks: Vec<String> = instance.sinks.iter().map(|s| (s + 1).to_string()).collect();
        writeln!(out, "{}", sinks.join(" ")).unwrap();
    }
    out
}
