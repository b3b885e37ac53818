//! Textual formula format: s-expressions with named predicate bindings.
//!
//! Grammar (operators are case-sensitive):
//!
//! ```text
//! formula := true
//!          | NAME                          named predicate from the bindings
//!          | (pred C1 ... Ck OFFSET)      inline predicate, h(x) = C.x - OFFSET
//!          | (not F)
//!          | (and F1 F2 ...)              two or more children
//!          | (or F1 F2 ...)               two or more children
//!          | (G LO HI F)                  always over steps [LO, HI]
//!          | (F LO HI F)                  eventually over steps [LO, HI]
//!          | (U LO HI F1 F2)              F1 until F2 within [LO, HI]
//! ```
//!
//! Example: `(and (G 0 15 (not obs)) (F 2 6 g1))` with `obs` and `g1` bound.
//! [`format_formula`] is the inverse; parse/print round-trips exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{LinearPredicate, StlError, StlFormula, TimeInterval};

/// Named predicates referenced by formulas in the textual format.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PredicateBindings {
    map: BTreeMap<String, LinearPredicate>,
}

impl PredicateBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, pred: LinearPredicate) {
        self.map.insert(name.into(), pred);
    }

    pub fn get(&self, name: &str) -> Option<&LinearPredicate> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LinearPredicate)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(input: &str) -> Result<Vec<(usize, Token)>, StlError> {
    let mut toks = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            '(' => {
                toks.push((pos, Token::Open));
                chars.next();
            }
            ')' => {
                toks.push((pos, Token::Close));
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                toks.push((pos, Token::Atom(atom)));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(usize, Token)>,
    at: usize,
    bindings: &'a PredicateBindings,
    input_len: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, pos: usize, msg: impl Into<String>) -> StlError {
        StlError::Parse {
            pos,
            msg: msg.into(),
        }
    }

    fn peek_pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.input_len, |(p, _)| *p)
    }

    fn next(&mut self) -> Result<(usize, Token), StlError> {
        let item = self
            .toks
            .get(self.at)
            .cloned()
            .ok_or_else(|| self.err(self.input_len, "unexpected end of input"))?;
        self.at += 1;
        Ok(item)
    }

    fn expect_close(&mut self) -> Result<(), StlError> {
        match self.next()? {
            (_, Token::Close) => Ok(()),
            (pos, tok) => Err(self.err(pos, format!("expected ')', found {tok:?}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, StlError> {
        match self.next()? {
            (pos, Token::Atom(a)) => a
                .parse::<f64>()
                .map_err(|_| self.err(pos, format!("expected {what}, found '{a}'"))),
            (pos, tok) => Err(self.err(pos, format!("expected {what}, found {tok:?}"))),
        }
    }

    fn step_index(&mut self, what: &str) -> Result<usize, StlError> {
        match self.next()? {
            (pos, Token::Atom(a)) => a
                .parse::<usize>()
                .map_err(|_| self.err(pos, format!("expected {what} (non-negative integer), found '{a}'"))),
            (pos, tok) => Err(self.err(pos, format!("expected {what}, found {tok:?}"))),
        }
    }

    fn interval(&mut self, head_pos: usize) -> Result<TimeInterval, StlError> {
        let lo = self.step_index("interval lower bound")?;
        let hi = self.step_index("interval upper bound")?;
        TimeInterval::new(lo, hi)
            .map_err(|e| self.err(head_pos, e.to_string()))
    }

    fn formula(&mut self) -> Result<StlFormula, StlError> {
        match self.next()? {
            (pos, Token::Atom(a)) => match a.as_str() {
                "true" => Ok(StlFormula::True),
                name => {
                    let pred = self.bindings.get(name).ok_or_else(|| {
                        self.err(pos, format!("unbound predicate name '{name}'"))
                    })?;
                    Ok(StlFormula::Pred {
                        name: Some(name.to_string()),
                        pred: pred.clone(),
                    })
                }
            },
            (_, Token::Open) => {
                let (head_pos, head) = self.next()?;
                let head = match head {
                    Token::Atom(a) => a,
                    tok => return Err(self.err(head_pos, format!("expected operator, found {tok:?}"))),
                };
                let f = match head.as_str() {
                    "pred" => {
                        let mut nums = Vec::new();
                        while !matches!(self.toks.get(self.at), Some((_, Token::Close))) {
                            nums.push(self.number("predicate coefficient or offset")?);
                        }
                        if nums.len() < 2 {
                            return Err(self.err(
                                head_pos,
                                "pred needs at least one coefficient and an offset",
                            ));
                        }
                        let offset = nums.pop().unwrap();
                        let pred = LinearPredicate::new(nums, offset)
                            .map_err(|e| self.err(head_pos, e.to_string()))?;
                        StlFormula::Pred { name: None, pred }
                    }
                    "not" => StlFormula::Not(Box::new(self.formula()?)),
                    "and" | "or" => {
                        let mut children = Vec::new();
                        while !matches!(self.toks.get(self.at), Some((_, Token::Close))) {
                            children.push(self.formula()?);
                        }
                        if children.len() < 2 {
                            return Err(self.err(
                                head_pos,
                                format!("{head} needs at least two children, found {}", children.len()),
                            ));
                        }
                        if head == "and" {
                            StlFormula::And(children)
                        } else {
                            StlFormula::Or(children)
                        }
                    }
                    "G" => {
                        let iv = self.interval(head_pos)?;
                        StlFormula::Always(Box::new(self.formula()?), iv)
                    }
                    "F" => {
                        let iv = self.interval(head_pos)?;
                        StlFormula::Eventually(Box::new(self.formula()?), iv)
                    }
                    "U" => {
                        let iv = self.interval(head_pos)?;
                        let f1 = self.formula()?;
                        let f2 = self.formula()?;
                        StlFormula::Until(Box::new(f1), Box::new(f2), iv)
                    }
                    other => {
                        return Err(self.err(head_pos, format!("unknown operator '{other}'")))
                    }
                };
                self.expect_close()?;
                Ok(f)
            }
            (pos, Token::Close) => Err(self.err(pos, "unexpected ')'")),
        }
    }
}

/// Parse a formula from its textual form. Named predicates are resolved
/// against `bindings`; an unknown name is an error.
pub fn parse_formula(input: &str, bindings: &PredicateBindings) -> Result<StlFormula, StlError> {
    let toks = tokenize(input)?;
    let mut parser = Parser {
        toks,
        at: 0,
        bindings,
        input_len: input.len(),
    };
    let f = parser.formula()?;
    if parser.at != parser.toks.len() {
        let pos = parser.peek_pos();
        return Err(StlError::Parse {
            pos,
            msg: "trailing input after formula".into(),
        });
    }
    Ok(f)
}

/// Render a formula in the textual form accepted by [`parse_formula`].
/// Named predicates print as their name; unnamed ones inline as `(pred ...)`.
pub fn format_formula(f: &StlFormula) -> String {
    let mut out = String::new();
    write_formula(f, &mut out);
    out
}

fn write_formula(f: &StlFormula, out: &mut String) {
    match f {
        StlFormula::True => out.push_str("true"),
        StlFormula::Pred { name: Some(n), .. } => out.push_str(n),
        StlFormula::Pred { name: None, pred } => {
            out.push_str("(pred");
            for c in &pred.coefficients {
                let _ = write!(out, " {c}");
            }
            let _ = write!(out, " {})", pred.offset);
        }
        StlFormula::Not(inner) => {
            out.push_str("(not ");
            write_formula(inner, out);
            out.push(')');
        }
        StlFormula::And(fs) | StlFormula::Or(fs) => {
            out.push_str(if matches!(f, StlFormula::And(_)) {
                "(and"
            } else {
                "(or"
            });
            for child in fs {
                out.push(' ');
                write_formula(child, out);
            }
            out.push(')');
        }
        StlFormula::Always(inner, iv) => {
            let _ = write!(out, "(G {} {} ", iv.lo, iv.hi);
            write_formula(inner, out);
            out.push(')');
        }
        StlFormula::Eventually(inner, iv) => {
            let _ = write!(out, "(F {} {} ", iv.lo, iv.hi);
            write_formula(inner, out);
            out.push(')');
        }
        StlFormula::Until(f1, f2, iv) => {
            let _ = write!(out, "(U {} {} ", iv.lo, iv.hi);
            write_formula(f1, out);
            out.push(' ');
            write_formula(f2, out);
            out.push(')');
        }
    }
}
