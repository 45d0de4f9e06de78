//! Line-oriented MDP text format.
//!
//! ```text
//! mdp <n_states> <n_actions> <initial> <gamma> <r_max>
//! t <s> <a> <s'> <prob>
//! r <s> <a> <reward>
//! g <s> <gamma_s>
//! ```
//! Fields are whitespace separated; `#` starts a comment.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{MdpBuilder, TabularMdp};
use crate::error::{Error, Result};

impl TabularMdp {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "mdp {} {} {} {} {}",
            self.n_states, self.n_actions, self.initial_state, self.default_discount, self.r_max
        )
        .unwrap();
        for s in 0..self.n_states {
            for a in self.enabled_actions(s) {
                for &(t, p) in self.successors(s, a).unwrap() {
                    writeln!(out, "t {s} {a} {t} {p}").unwrap();
                }
            }
        }
        for s in 0..self.n_states {
            for a in self.enabled_actions(s) {
                let r = self.reward(s, a);
                if r != 0.0 {
                    writeln!(out, "r {s} {a} {r}").unwrap();
                }
            }
        }
        for (s, &g) in self.discount.iter().enumerate() {
            if g != self.default_discount {
                writeln!(out, "g {s} {g}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut builder: Option<MdpBuilder> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: String| Error::Parse { line: lineno, msg };
            let field = |k: usize| -> Result<&str> {
                fields
                    .get(k)
                    .copied()
                    .ok_or_else(|| err(format!("missing field {k}")))
            };
            fn num<T: FromStr>(s: &str, lineno: usize) -> Result<T> {
                s.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("cannot parse `{s}`"),
                })
            }
            let expect_len = |n: usize| -> Result<()> {
                if fields.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("expected {n} fields, found {}", fields.len())))
                }
            };

            match (fields[0], builder.as_mut()) {
                ("mdp", None) => {
                    expect_len(6)?;
                    builder = Some(MdpBuilder::new(
                        num(field(1)?, lineno)?,
                        num(field(2)?, lineno)?,
                        num(field(3)?, lineno)?,
                        num(field(4)?, lineno)?,
                        num(field(5)?, lineno)?,
                    ));
                }
                ("mdp", Some(_)) => return Err(err("duplicate header".into())),
                (_, None) => return Err(err("missing `mdp` header".into())),
                ("t", Some(b)) => {
                    expect_len(5)?;
                    b.transition(
                        num(field(1)?, lineno)?,
                        num(field(2)?, lineno)?,
                        num(field(3)?, lineno)?,
                        num(field(4)?, lineno)?,
                    );
                }
                ("r", Some(b)) => {
                    expect_len(4)?;
                    b.reward(
                        num(field(1)?, lineno)?,
                        num(field(2)?, lineno)?,
                        num(field(3)?, lineno)?,
                    );
                }
                ("g", Some(b)) => {
                    expect_len(3)?;
                    b.discount(num(field(1)?, lineno)?, num(field(2)?, lineno)?);
                }
                (tag, Some(_)) => return Err(err(format!("unknown record `{tag}`"))),
            }
        }
        builder
            .ok_or(Error::Parse {
                line: 0,
                msg: "empty MDP file".into(),
            })?
            .build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two-state example
mdp 2 2 0 0.9 1
t 0 0 0 0.25
t 0 0 1 0.75   # stochastic move
t 0 1 1 1
t 1 0 1 1
r 0 0 0.5
r 0 1 -1
g 1 0.5
";

    #[test]
    fn parses_and_round_trips() {
        let m = TabularMdp::from_text(SAMPLE).unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(m.prob(0, 0, 1), 0.75);
        assert_eq!(m.reward(0, 1), -1.0);
        assert!(!m.is_enabled(1, 1));
        assert_eq!(m.discount(1), 0.5);
        let again = TabularMdp::from_text(&m.to_text()).unwrap();
        assert_eq!(m, again);
        assert_eq!(m.to_text(), again.to_text());
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "mdp 1 1 0 0.9 1\nt 0 0 x 1\n";
        match TabularMdp::from_text(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(TabularMdp::from_text("t 0 0 0 1").is_err());
        assert!(TabularMdp::from_text("").is_err());
        assert!(TabularMdp::from_text("mdp 1 1 0 0.9 1\nq 0\n").is_err());
    }
}
