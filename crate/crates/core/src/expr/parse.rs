use super::{Expr, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                return Ok((Tok::Ident(name.to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character {:?}", self.char_at(start)),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn char_at(&self, at: usize) -> char {
        std::str::from_utf8(&self.src[at..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or('?')
    }

    fn digits(&mut self) -> usize {
        let from = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        self.pos - from
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let mut count = self.digits();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += self.digits();
        }
        if count == 0 {
            return Err(Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mut look = self.pos + 1;
            if matches!(self.src.get(look), Some(b'+' | b'-')) {
                look += 1;
            }
            if self.src.get(look).is_some_and(u8::is_ascii_digit) {
                self.pos = look;
                self.digits();
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    /// Token after the current one, without consuming anything.
    fn peek(&self) -> Result<Tok> {
        let mut probe = Lexer {
            src: self.lexer.src,
            pos: self.lexer.pos,
        };
        Ok(probe.next()?.0)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.at,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    acc = Expr::add(&acc, &self.term()?);
                }
                Tok::Minus => {
                    self.bump()?;
                    acc = Expr::sub(&acc, &self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    acc = Expr::mul(&acc, &self.unary()?);
                }
                Tok::Slash => {
                    self.bump()?;
                    acc = Expr::div(&acc, &self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok != Tok::Minus {
            return self.power();
        }
        self.bump()?;
        if let Tok::Num(v) = self.tok {
            if self.peek()? != Tok::Caret {
                self.bump()?;
                return Ok(Expr::num(-v));
            }
        }
        Ok(Expr::neg(&self.unary()?))
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let negative = match self.tok {
            Tok::Minus => {
                self.bump()?;
                true
            }
            Tok::Plus => {
                self.bump()?;
                false
            }
            _ => false,
        };
        let Tok::Num(k) = self.tok else {
            return self.fail("exponent must be an integer literal");
        };
        if k.fract() != 0.0 || k > i32::MAX as f64 {
            return self.fail("exponent must be an integer literal");
        }
        self.bump()?;
        let k = if negative { -(k as i32) } else { k as i32 };
        Ok(Expr::powi(&base, k))
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail("expected `)`");
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name),
            Tok::End => self.fail("unexpected end of input"),
            other => self.fail(format!("unexpected token {other:?}")),
        }
    }

    fn identifier(&mut self, name: String) -> Result<Expr> {
        let at = self.at;
        if let Some(func) = Func::from_name(&name) {
            self.bump()?;
            if self.tok != Tok::LParen {
                return self.fail(format!("expected `(` after `{name}`"));
            }
            self.bump()?;
            let arg = self.expr()?;
            if self.tok != Tok::RParen {
                return self.fail("expected `)`");
            }
            self.bump()?;
            return Ok(Expr::call(func, &arg));
        }
        let value = match name.as_str() {
            "pi" => Expr::pi(),
            "e" => Expr::e(),
            _ => {
                let index = name
                    .strip_prefix('x')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok());
                match index {
                    Some(i) if i >= 1 && i <= self.dim => Expr::var(i - 1),
                    Some(i) => return Err(Error::VariableOutOfRange { index: i, dim: self.dim }),
                    None => return Err(Error::UnknownIdentifier { name, offset: at }),
                }
            }
        };
        self.bump()?;
        Ok(value)
    }
}

/// Parses `text` as an expression in the coordinates `x1 .. x{dim}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr> {
    let mut parser = Parser {
        lexer: Lexer {
            src: text.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
        dim,
    };
    parser.bump()?;
    let e = parser.expr()?;
    if parser.tok != Tok::End {
        return parser.fail("unexpected trailing input");
    }
    Ok(e)
}
