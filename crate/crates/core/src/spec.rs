//! Model-spec expression grammar.
//!
//! ```text
//! mixture := term ("+" term)*
//! term    := weight "*" model
//! model   := "RAND" | "BA" | "DP(" real ")" | "TRI" | "RP(" real ")"
//! ```
//!
//! Whitespace is ignored between tokens and keywords are case-insensitive.
//! Columns in error messages are 1-based character positions.

use crate::error::{Error, Result};
use crate::model::{Component, MixtureInterval};

/// Tolerance on Σβ for user-supplied specs.
pub const SPEC_WEIGHT_TOLERANCE: f64 = 1e-9;

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::ModelSpec {
            column: self.column(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.error(format!("expected '{want}', found '{c}'")),
            None => self.error(format!("expected '{want}', found end of input")),
        }
    }

    fn real(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let is = |c: Option<&char>, f: fn(&char) -> bool| c.is_some_and(f);
        if is(self.chars.get(self.pos), |c| *c == '-' || *c == '+') {
            self.pos += 1;
        }
        while is(self.chars.get(self.pos), |c| c.is_ascii_digit() || *c == '.') {
            self.pos += 1;
        }
        if is(self.chars.get(self.pos), |c| *c == 'e' || *c == 'E') {
            self.pos += 1;
            if is(self.chars.get(self.pos), |c| *c == '-' || *c == '+') {
                self.pos += 1;
            }
            while is(self.chars.get(self.pos), char::is_ascii_digit) {
                self.pos += 1;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                if text.is_empty() {
                    self.error("expected a number")
                } else {
                    self.error(format!("malformed number '{text}'"))
                }
            }
        }
    }

    fn keyword(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.error("expected a model name");
        }
        Ok(self.chars[start..self.pos]
            .iter()
            .collect::<String>()
            .to_ascii_uppercase())
    }

    fn component(&mut self) -> Result<Component> {
        let column = {
            self.skip_ws();
            self.column()
        };
        let name = self.keyword()?;
        let c = match name.as_str() {
            "RAND" => Component::Random,
            "BA" => Component::BA,
            "TRI" => Component::TriangleClosure,
            "DP" | "RP" => {
                self.expect('(')?;
                let alpha_col = {
                    self.skip_ws();
                    self.column()
                };
                let alpha = self.real()?;
                self.expect(')')?;
                if name == "DP" {
                    Component::DegreePower(alpha)
                } else {
                    if alpha <= 0.0 {
                        return Err(Error::ModelSpec {
                            column: alpha_col,
                            message: format!("RP exponent must be > 0, got {alpha}"),
                        });
                    }
                    Component::RankPreference(alpha)
                }
            }
            other => {
                return Err(Error::ModelSpec {
                    column,
                    message: format!("unknown model '{other}'"),
                })
            }
        };
        Ok(c)
    }
}

/// Parses a mixture such as `"0.3*BA+0.7*RAND"`.
pub fn parse_model_spec(text: &str) -> Result<MixtureInterval> {
    let mut cur = Cursor::new(text);
    let mut weights = Vec::new();
    let mut components = Vec::new();
    loop {
        let col = {
            cur.skip_ws();
            cur.column()
        };
        let w = cur.real()?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::ModelSpec {
                column: col,
                message: format!("weight {w} outside [0,1]"),
            });
        }
        cur.expect('*')?;
        components.push(cur.component()?);
        weights.push(w);
        match cur.peek() {
            None => break,
            Some('+') => cur.pos += 1,
            Some(c) => return cur.error(format!("expected '+' or end of input, found '{c}'")),
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SPEC_WEIGHT_TOLERANCE {
        return Err(Error::ModelSpec {
            column: 1,
            message: format!("weights sum to {sum}, not 1"),
        });
    }
    MixtureInterval::with_tolerance(weights, components, SPEC_WEIGHT_TOLERANCE)
}

/// Parses a single model token such as `"DP(1.5)"`.
pub fn parse_component(text: &str) -> Result<Component> {
    let mut cur = Cursor::new(text);
    let c = cur.component()?;
    if let Some(ch) = cur.peek() {
        return cur.error(format!("unexpected '{ch}' after model"));
    }
    Ok(c)
}

/// Parses a comma-separated component list such as `"BA,TRI,RAND"`.
pub fn parse_component_list(text: &str) -> Result<Vec<Component>> {
    let mut cur = Cursor::new(text);
    let mut out = Vec::new();
    loop {
        out.push(cur.component()?);
        match cur.peek() {
            None => break,
            Some(',') => cur.pos += 1,
            Some(c) => return cur.error(format!("expected ',' or end of input, found '{c}'")),
        }
    }
    Ok(out)
}
