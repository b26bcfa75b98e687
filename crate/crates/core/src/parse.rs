//! Text formats: equation systems, pPDA rules and back-button processes.
//!
//! ```text
//! system   := (equation ';')+
//! equation := VAR '=' poly
//! poly     := term ('+' term)*
//! term     := coeff ('*' VAR ('^' INT)?)*      (a leading VAR means coefficient 1)
//! coeff    := INT | INT '/' INT | DECIMAL
//!
//! rule STATE SYM -> coeff STATE SYM{0,2} ;
//! page ID back coeff ;
//! link ID ID coeff ;
//! ```
//!
//! `#` starts a comment running to the end of the line. Variables are
//! identifiers or bracketed names such as `[p.X.q]`.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::msp::{Monomial, Msp, Polynomial};
use crate::ppda::{BackButton, Ppda, Rule};
use crate::scalar::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Eq,
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    Semi,
    Arrow,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (lno, col) = (li + 1, i + 1);
            let push = |tok, out: &mut Vec<Spanned>| out.push(Spanned { tok, line: lno, column: col });
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '=' => {
                    push(Tok::Eq, &mut out);
                    i += 1;
                }
                '+' => {
                    push(Tok::Plus, &mut out);
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(Tok::Arrow, &mut out);
                    i += 2;
                }
                '-' => {
                    push(Tok::Minus, &mut out);
                    i += 1;
                }
                '*' => {
                    push(Tok::Star, &mut out);
                    i += 1;
                }
                '^' => {
                    push(Tok::Caret, &mut out);
                    i += 1;
                }
                '/' => {
                    push(Tok::Slash, &mut out);
                    i += 1;
                }
                ';' => {
                    push(Tok::Semi, &mut out);
                    i += 1;
                }
                '[' => {
                    let end = chars[i..]
                        .iter()
                        .position(|&c| c == ']')
                        .ok_or_else(|| syntax(lno, col, "unterminated bracketed name"))?;
                    let name: String = chars[i..=i + end].iter().collect();
                    push(Tok::Ident(name), &mut out);
                    i += end + 1;
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    let s: String = chars[start..i].iter().collect();
                    push(Tok::Number(s), &mut out);
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                        i += 1;
                    }
                    push(Tok::Ident(chars[start..i].iter().collect()), &mut out);
                }
                other => return Err(syntax(lno, col, format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Cursor {
    fn new(text: &str) -> Result<Self> {
        let toks = lex(text)?;
        let lines = text.lines().count().max(1);
        let last_len = text.lines().last().map(|l| l.chars().count()).unwrap_or(0);
        Ok(Cursor {
            toks,
            pos: 0,
            end: (lines, last_len + 1),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn location(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.location();
        syntax(l, c, message)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let s = self.next().unwrap();
                match s.tok {
                    Tok::Ident(name) => Ok((name, s.line, s.column)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{kw}`"))),
        }
    }

    /// `INT | INT '/' INT | DECIMAL`, rejecting a leading minus.
    fn coeff(&mut self) -> Result<Rational> {
        let (line, column) = self.location();
        if self.peek() == Some(&Tok::Minus) {
            return Err(Error::NegativeCoefficient { line, column });
        }
        let first = match self.peek() {
            Some(Tok::Number(s)) => s.clone(),
            _ => return Err(self.error("expected a coefficient")),
        };
        self.pos += 1;
        let text = if self.peek() == Some(&Tok::Slash) {
            self.pos += 1;
            match self.next() {
                Some(Spanned { tok: Tok::Number(d), .. }) => format!("{first}/{d}"),
                _ => return Err(syntax(line, column, "expected a denominator after `/`")),
            }
        } else {
            first
        };
        let value = parse_rational(&text).ok_or_else(|| syntax(line, column, format!("malformed number `{text}`")))?;
        if value.is_negative() {
            return Err(Error::NegativeCoefficient { line, column });
        }
        Ok(value)
    }

    fn int(&mut self) -> Result<u32> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Number(s),
                line,
                column,
            }) => s
                .parse()
                .map_err(|_| syntax(line, column, format!("expected an integer exponent, got `{s}`"))),
            _ => {
                self.pos -= 1;
                Err(self.error("expected an integer exponent"))
            }
        }
    }
}

struct RawTerm {
    coeff: Rational,
    factors: Vec<(String, u32, usize, usize)>,
}

/// Parse an MSPE. Variables are numbered in the order of their defining
/// equations; right-hand sides may refer forward.
pub fn parse_mspe(text: &str) -> Result<Msp> {
    let mut cur = Cursor::new(text)?;
    let mut lhs: Vec<String> = Vec::new();
    let mut bodies: Vec<Vec<RawTerm>> = Vec::new();
    while !cur.at_end() {
        let (name, _, _) = cur.ident("a variable name")?;
        cur.expect(Tok::Eq, "`=`")?;
        let mut terms = vec![parse_term(&mut cur)?];
        while cur.peek() == Some(&Tok::Plus) {
            cur.pos += 1;
            terms.push(parse_term(&mut cur)?);
        }
        cur.expect(Tok::Semi, "`;` or `+`")?;
        if lhs.contains(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        lhs.push(name);
        bodies.push(terms);
    }
    if lhs.is_empty() {
        return Err(Error::EmptySystem);
    }
    let index: HashMap<&str, usize> = lhs.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut equations = Vec::with_capacity(lhs.len());
    for body in bodies {
        let mut monomials = Vec::new();
        for t in body {
            let mut exps = Vec::new();
            for (name, e, line, column) in t.factors {
                let v = *index.get(name.as_str()).ok_or(Error::UndefinedVariable {
                    name: name.clone(),
                    line,
                    column,
                })?;
                exps.push((v, e));
            }
            if !t.coeff.is_zero() {
                monomials.push(Monomial::new(t.coeff, exps));
            }
        }
        equations.push(Polynomial::new(monomials));
    }
    Msp::new(lhs, equations)
}

fn parse_term(cur: &mut Cursor) -> Result<RawTerm> {
    let mut factors = Vec::new();
    let coeff = match cur.peek() {
        Some(Tok::Ident(_)) => {
            let (name, l, c) = cur.ident("a variable")?;
            factors.push((name, exponent(cur)?, l, c));
            Rational::from_integer(1.into())
        }
        _ => cur.coeff()?,
    };
    while cur.peek() == Some(&Tok::Star) {
        cur.pos += 1;
        if let Some(Tok::Number(_)) = cur.peek() {
            return Err(cur.error("coefficient must come first in a term"));
        }
        let (name, l, c) = cur.ident("a variable after `*`")?;
        factors.push((name, exponent(cur)?, l, c));
    }
    Ok(RawTerm { coeff, factors })
}

fn exponent(cur: &mut Cursor) -> Result<u32> {
    if cur.peek() == Some(&Tok::Caret) {
        cur.pos += 1;
        cur.int()
    } else {
        Ok(1)
    }
}

/// Parse `rule` lines into a validated pPDA.
pub fn parse_ppda(text: &str) -> Result<Ppda> {
    let mut cur = Cursor::new(text)?;
    let mut rules = Vec::new();
    while !cur.at_end() {
        cur.keyword("rule")?;
        let (from, _, _) = cur.ident("a control state")?;
        let (symbol, _, _) = cur.ident("a stack symbol")?;
        cur.expect(Tok::Arrow, "`->`")?;
        let prob = cur.coeff()?;
        let (to, _, _) = cur.ident("a target control state")?;
        let mut push = Vec::new();
        while let Some(Tok::Ident(_)) = cur.peek() {
            push.push(cur.ident("a stack symbol")?.0);
        }
        cur.expect(Tok::Semi, "`;`")?;
        rules.push(Rule {
            from,
            symbol,
            prob,
            to,
            push,
        });
    }
    Ppda::new(rules)
}

/// Parse `page` / `link` lines into a validated back-button process.
pub fn parse_backbutton(text: &str) -> Result<BackButton> {
    let mut cur = Cursor::new(text)?;
    let mut pages: Vec<(String, Rational)> = Vec::new();
    let mut links: Vec<(String, String, Rational)> = Vec::new();
    while !cur.at_end() {
        match cur.peek() {
            Some(Tok::Ident(k)) if k == "page" => {
                cur.pos += 1;
                let (id, _, _) = cur.ident("a page id")?;
                cur.keyword("back")?;
                let b = cur.coeff()?;
                cur.expect(Tok::Semi, "`;`")?;
                pages.push((id, b));
            }
            Some(Tok::Ident(k)) if k == "link" => {
                cur.pos += 1;
                let (a, _, _) = cur.ident("a page id")?;
                let (b, _, _) = cur.ident("a page id")?;
                let l = cur.coeff()?;
                cur.expect(Tok::Semi, "`;`")?;
                links.push((a, b, l));
            }
            _ => return Err(cur.error("expected `page` or `link`")),
        }
    }
    BackButton::new(pages, links)
}

/// Which of the three formats a text is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Mspe,
    Ppda,
    BackButton,
}

/// Guess the format from the first statement.
pub fn detect_format(text: &str) -> InputFormat {
    let Ok(toks) = lex(text) else {
        return InputFormat::Mspe;
    };
    match (toks.first().map(|t| &t.tok), toks.get(1).map(|t| &t.tok)) {
        (Some(Tok::Ident(k)), Some(Tok::Ident(_))) if k == "rule" => InputFormat::Ppda,
        (Some(Tok::Ident(k)), Some(Tok::Ident(_))) if k == "page" || k == "link" => InputFormat::BackButton,
        _ => InputFormat::Mspe,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn scalar_quadratic() {
        let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
        assert_eq!(f.dim(), 1);
        let terms = f.equations()[0].terms();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0], Monomial::new(q(1, 2), [(0, 2)]));
        assert_eq!(terms[1], Monomial::constant(q(1, 2)));
    }

    #[test]
    fn decimals_and_powers() {
        let f = parse_mspe("# comment\nA = 0.25*A^2 + 0.75; # trailing\n").unwrap();
        assert_eq!(f.equations()[0].terms()[0], Monomial::new(q(1, 4), [(0, 2)]));
    }

    #[test]
    fn forward_references_and_bare_variables() {
        let f = parse_mspe("X1 = X2 + 1/3; X2 = 1/2;").unwrap();
        assert_eq!(f.names(), ["X1", "X2"]);
        assert_eq!(f.equations()[0].linear_coeff(1), q(1, 1));
    }

    #[test]
    fn negative_coefficient_rejected() {
        assert_eq!(
            parse_mspe("X = -1*X;").unwrap_err(),
            Error::NegativeCoefficient { line: 1, column: 5 }
        );
    }

    #[test]
    fn undefined_variable_rejected() {
        assert_eq!(
            parse_mspe("X = 1/2*Y + 1/2;").unwrap_err(),
            Error::UndefinedVariable {
                name: "Y".into(),
                line: 1,
                column: 9
            }
        );
    }

    #[test]
    fn syntax_errors_carry_location() {
        match parse_mspe("X = 1/2*X\nY = 1;").unwrap_err() {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (2, 1)),
            e => panic!("unexpected {e:?}"),
        }
        match parse_mspe("X = 1/2 ** X;").unwrap_err() {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (1, 10)),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(parse_mspe("X = 1 $ 2;"), Err(Error::Syntax { .. })));
        assert_eq!(parse_mspe("  # nothing\n"), Err(Error::EmptySystem));
        assert_eq!(parse_mspe("X = 1; X = 2;"), Err(Error::DuplicateVariable("X".into())));
    }

    #[test]
    fn bracketed_names() {
        let f = parse_mspe("[p.X.q] = 1/2*[p.X.q]^2 + 1/2;").unwrap();
        assert_eq!(f.names(), ["[p.X.q]"]);
    }

    #[test]
    fn detects_formats() {
        assert_eq!(detect_format("rule p X -> 1 p;"), InputFormat::Ppda);
        assert_eq!(detect_format("# c\npage A back 1;"), InputFormat::BackButton);
        assert_eq!(detect_format("X = 1;"), InputFormat::Mspe);
        assert_eq!(detect_format("rule = 1;"), InputFormat::Mspe);
    }
}
