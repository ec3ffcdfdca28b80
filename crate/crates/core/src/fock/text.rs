//! Text form of operator expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := [coeff ['*']] factor*        (coeff defaults to 1; a term needs coeff or a factor)
//! factor  := ("A'" | "A") '[' node ',' bin ']' ['^' power]
//! coeff   := integer | decimal | integer '/' integer
//! ```
//!
//! `A'` is a creation operator, `A` an annihilation operator, indices are
//! one-based. Rendering always emits an explicit coefficient.

use std::fmt;

use super::expr::{FactorKind, OperatorExpr, OperatorFactor, OperatorMonomial};
use super::site::SiteIndex;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

impl fmt::Display for OperatorFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            FactorKind::Create => "A'",
            FactorKind::Annihilate => "A",
        };
        write!(f, "{tag}{}", self.site)?;
        if self.power != 1 {
            write!(f, "^{}", self.power)?;
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for OperatorExpr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (factors, c)) in self.terms().enumerate() {
            let negative = c.is_negative();
            let magnitude = c.abs();
            match (i, negative) {
                (0, false) => {}
                (0, true) => write!(f, "-")?,
                (_, false) => write!(f, " + ")?,
                (_, true) => write!(f, " - ")?,
            }
            write!(f, "{magnitude}")?;
            if !factors.is_empty() {
                write!(f, " *")?;
                for factor in factors {
                    write!(f, " {factor}")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(String),
    Create,
    Annihilate,
    LBracket,
    RBracket,
    Comma,
    Caret,
    Star,
    Plus,
    Minus,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            'A' => {
                if chars.get(i + 1) == Some(&'\'') {
                    tokens.push(Token::Create);
                    i += 2;
                } else {
                    tokens.push(Token::Annihilate);
                    i += 1;
                }
            }
            '[' => {
                tokens.push(Token::LBracket);
                i += 1;
            }
            ']' => {
                tokens.push(Token::RBracket);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '+' || d == '-') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == '/' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Number(chars[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Parse(format!("unexpected character `{other}` at offset {i}")));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Parse(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn integer(&mut self, what: &str) -> Result<usize> {
        match self.next() {
            Some(Token::Number(s)) => {
                s.parse::<usize>().map_err(|_| Error::Parse(format!("{what} must be a positive integer, got `{s}`")))
            }
            other => Err(Error::Parse(format!("expected {what}, found {other:?}"))),
        }
    }

    fn factor(&mut self, kind: FactorKind) -> Result<OperatorFactor> {
        self.expect(Token::LBracket)?;
        let node = self.integer("node index")?;
        self.expect(Token::Comma)?;
        let bin = self.integer("bin index")?;
        self.expect(Token::RBracket)?;
        let site = SiteIndex::one_based(node, bin)
            .ok_or_else(|| Error::Parse(format!("indices are one-based, got [{node},{bin}]")))?;
        let mut power = 1;
        if self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            power = self.integer("power")?;
            if power == 0 {
                return Err(Error::Parse("operator power must be at least 1".into()));
            }
        }
        Ok(OperatorFactor { kind, site, power: power as u32 })
    }

    fn term<T: Scalar>(&mut self, negative: bool) -> Result<OperatorMonomial<T>> {
        let mut coefficient = T::one();
        let mut seen = false;
        if let Some(Token::Number(s)) = self.peek().cloned() {
            self.pos += 1;
            coefficient = T::parse_scalar(&s).ok_or_else(|| Error::Parse(format!("bad coefficient `{s}`")))?;
            seen = true;
            if self.peek() == Some(&Token::Star) {
                self.pos += 1;
            }
        }
        let mut factors = Vec::new();
        loop {
            match self.peek() {
                Some(Token::Create) => {
                    self.pos += 1;
                    factors.push(self.factor(FactorKind::Create)?);
                }
                Some(Token::Annihilate) => {
                    self.pos += 1;
                    factors.push(self.factor(FactorKind::Annihilate)?);
                }
                _ => break,
            }
        }
        if !seen && factors.is_empty() {
            return Err(Error::Parse(format!("empty term at token {}", self.pos)));
        }
        if negative {
            coefficient = -coefficient;
        }
        Ok(OperatorMonomial::new(coefficient, factors))
    }
}

/// Parses an operator expression from its text form.
pub fn parse_expr<T: Scalar>(text: &str) -> Result<OperatorExpr<T>> {
    let mut parser = Parser { tokens: tokenize(text)?, pos: 0 };
    if parser.tokens.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    let mut monomials = Vec::new();
    let mut negative = false;
    if parser.peek() == Some(&Token::Minus) {
        parser.pos += 1;
        negative = true;
    }
    monomials.push(parser.term::<T>(negative)?);
    while let Some(tok) = parser.next() {
        let negative = match tok {
            Token::Plus => false,
            Token::Minus => true,
            other => return Err(Error::Parse(format!("expected `+` or `-`, found {other:?}"))),
        };
        monomials.push(parser.term::<T>(negative)?);
    }
    Ok(OperatorExpr::from_monomials(monomials))
}

impl<T: Scalar> std::str::FromStr for OperatorExpr<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}
