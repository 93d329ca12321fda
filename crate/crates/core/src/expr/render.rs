//! Prefix rendering (`OP_XOR(SYMB(k), SYMB(m))`) and its parser.

use std::fmt::{self, Write};

use thiserror::Error;

use super::{Expr, ExprKind, Op};
use crate::bitvec::BitVec;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self, f)
    }
}

fn render(e: &Expr, out: &mut impl Write) -> fmt::Result {
    match e.kind() {
        ExprKind::Const(c) => write!(out, "CST({c})"),
        ExprKind::Symbol(s) => write!(out, "SYMB({s})"),
        ExprKind::Op { op, args } => {
            out.write_str(op.name())?;
            out.write_char('(')?;
            if let Op::Array(t) = op {
                write!(out, "{}, ", t.name)?;
            }
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.write_str(", ")?;
                }
                render(a, out)?;
            }
            match op {
                Op::Extract { hi, lo } => write!(out, ", {hi}, {lo}")?,
                Op::Zext { width } | Op::Sext { width } => write!(out, ", {width}")?,
                _ => {}
            }
            out.write_char(')')
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected end of expression")]
    Eof,
    #[error("unexpected `{found}` at offset {at}")]
    Unexpected { at: usize, found: String },
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("{0}")]
    Invalid(String),
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    width_of: &'a dyn Fn(&str) -> Option<u32>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.text[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        match self.text[self.pos..].chars().next() {
            Some(found) if found == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(found) => Err(ParseError::Unexpected {
                at: self.pos,
                found: found.to_string(),
            }),
            None => Err(ParseError::Eof),
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return match rest.chars().next() {
                Some(c) => Err(ParseError::Unexpected {
                    at: self.pos,
                    found: c.to_string(),
                }),
                None => Err(ParseError::Eof),
            };
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    /// Raw text up to the closing parenthesis (symbol names may contain `'`).
    fn raw_until_close(&mut self) -> Result<&'a str, ParseError> {
        let rest = &self.text[self.pos..];
        let end = rest.find(')').ok_or(ParseError::Eof)?;
        self.pos += end;
        Ok(rest[..end].trim())
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        let tok = self.ident()?;
        tok.parse()
            .map_err(|_| ParseError::Invalid(format!("expected integer, found `{tok}`")))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let head = self.ident()?;
        self.expect('(')?;
        let e = match head {
            "CST" => {
                let lit = self.raw_until_close()?;
                Expr::constant(
                    BitVec::parse_literal(lit).map_err(|e| ParseError::Invalid(e.to_string()))?,
                )
            }
            "SYMB" => {
                let name = self.raw_until_close()?;
                let width =
                    (self.width_of)(name).ok_or_else(|| ParseError::UnknownSymbol(name.into()))?;
                Expr::symbol(name, width)
            }
            "OP_EXTRACT" => {
                let x = self.expr()?;
                self.expect(',')?;
                let hi = self.number()?;
                self.expect(',')?;
                let lo = self.number()?;
                self.finish(Op::Extract { hi, lo }, vec![x])?
            }
            "OP_ZEXT" | "OP_SEXT" => {
                let x = self.expr()?;
                self.expect(',')?;
                let width = self.number()?;
                let op = if head == "OP_ZEXT" {
                    Op::Zext { width }
                } else {
                    Op::Sext { width }
                };
                self.finish(op, vec![x])?
            }
            _ => {
                let op = match head {
                    "OP_XOR" => Op::Xor,
                    "OP_AND" => Op::And,
                    "OP_OR" => Op::Or,
                    "OP_NOT" => Op::Not,
                    "OP_ADD" => Op::Add,
                    "OP_MUL" => Op::Mul,
                    "OP_POW" => Op::Pow,
                    "OP_SUB" => Op::Sub,
                    "OP_LSL" => Op::Lsl,
                    "OP_LSR" => Op::Lsr,
                    "OP_ASR" => Op::Asr,
                    "OP_CONCAT" => Op::Concat,
                    other => return Err(ParseError::UnknownOperator(other.to_string())),
                };
                let mut args = vec![self.expr()?];
                while self.peek() == Some(',') {
                    self.expect(',')?;
                    args.push(self.expr()?);
                }
                self.finish(op, args)?
            }
        };
        if matches!(head, "CST" | "SYMB") {
            self.expect(')')?;
        }
        Ok(e)
    }

    fn finish(&mut self, op: Op, args: Vec<Expr>) -> Result<Expr, ParseError> {
        self.expect(')')?;
        Expr::build(op, args).map_err(|e| ParseError::Invalid(e.to_string()))
    }
}

/// Parses the prefix rendering back into a (simplified) term.
///
/// Symbol widths come from `width_of`; `ARRAY` terms are not accepted since
/// their table contents are not part of the rendering.
pub fn parse_expr(text: &str, width_of: &dyn Fn(&str) -> Option<u32>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        text,
        pos: 0,
        width_of,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(ParseError::Unexpected {
            at: p.pos,
            found: text[p.pos..].to_string(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn widths(name: &str) -> Option<u32> {
        match name {
            "k" | "m" | "m'" => Some(1),
            "w" => Some(4),
            _ => None,
        }
    }

    #[test]
    fn renders_prefix_form() {
        let k = Expr::symbol("k", 1);
        let m = Expr::symbol("m", 1);
        assert_eq!(Expr::xor(&m, &k).to_string(), "OP_XOR(SYMB(k), SYMB(m))");
        assert_eq!(Expr::const_bits(2, 1).to_string(), "CST(0b01)");
        let cat = Expr::concat(vec![m.clone(), Expr::xor(&k, &m)]);
        assert_eq!(cat.to_string(), "OP_CONCAT(SYMB(m), OP_XOR(SYMB(k), SYMB(m)))");
    }

    #[test]
    fn parse_inverts_render() {
        let w = Expr::symbol("w", 4);
        let k = Expr::symbol("k", 1);
        let samples = [
            Expr::xor(&Expr::symbol("m'", 1), &k),
            Expr::concat(vec![w.extract(3, 2), Expr::zero(1), k.clone()]),
            Expr::add(&w, &Expr::const_bits(4, 3)).bit_at(2),
            k.sext(3),
        ];
        for e in samples {
            let text = e.to_string();
            assert_eq!(parse_expr(&text, &widths).unwrap(), e, "{text}");
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_expr("SYMB(zz)", &widths),
            Err(ParseError::UnknownSymbol(_))
        ));
        assert!(matches!(
            parse_expr("OP_FOO(SYMB(k))", &widths),
            Err(ParseError::UnknownOperator(_))
        ));
        assert!(parse_expr("OP_XOR(SYMB(k), SYMB(w))", &widths).is_err());
    }
}
