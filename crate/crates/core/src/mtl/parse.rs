use super::{Formula, Interval, MtlError, PredicateTable};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Not,
    And,
    Or,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(text: &'a str) -> Result<Vec<(Tok, usize)>, MtlError> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        while let Some(t) = lx.next()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next(&mut self) -> Result<Option<(Tok, usize)>, MtlError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok(None);
        };
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBrack),
            b']' => Some(Tok::RBrack),
            b',' => Some(Tok::Comma),
            b'!' | b'~' => Some(Tok::Not),
            b'&' => Some(Tok::And),
            b'|' => Some(Tok::Or),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            // accept && and || as well
            if matches!(t, Tok::And | Tok::Or) && self.src.get(self.pos) == Some(&c) {
                self.pos += 1;
            }
            return Ok(Some((t, start)));
        }
        if c.is_ascii_digit() || c == b'-' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let v = s.parse().map_err(|_| MtlError::Syntax {
                pos: start,
                msg: format!("bad integer `{s}`"),
            })?;
            return Ok(Some((Tok::Int(v), start)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok(Some((Tok::Ident(s.to_string()), start)));
        }
        Err(MtlError::Syntax {
            pos: start,
            msg: format!("unexpected character `{}`", c as char),
        })
    }
}

struct Parser<'p> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    end: usize,
    preds: &'p PredicateTable,
}

/// Parses the surface syntax:
///
/// ```text
/// or    := and ('|' and)*
/// and   := until ('&' until)*
/// until := unary ('U' interval unary)?
/// unary := '!' unary | 'F' interval unary | 'G' interval unary | atom
/// atom  := 'true' | ident | '(' or ')'
/// interval := '[' int ',' int (']' | ')')
/// ```
///
/// A half-open `[a,b)` is stored as the closed `[a,b-1]`.
pub fn parse(text: &str, preds: &PredicateTable) -> Result<Formula, MtlError> {
    if preds.is_empty() {
        return Err(MtlError::NoPredicates);
    }
    let mut p = Parser {
        toks: Lexer::tokens(text)?,
        i: 0,
        end: text.len(),
        preds,
    };
    let f = p.or()?;
    if let Some((t, pos)) = p.toks.get(p.i) {
        return Err(MtlError::Syntax {
            pos: *pos,
            msg: format!("trailing input {t:?}"),
        });
    }
    Ok(f)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |(_, p)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, MtlError> {
        Err(MtlError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok) -> Result<(), MtlError> {
        if self.peek() == Some(&t) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected {t:?}"))
        }
    }

    fn is_op(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == name)
            && matches!(self.toks.get(self.i + 1), Some((Tok::LBrack, _)))
    }

    fn or(&mut self) -> Result<Formula, MtlError> {
        let mut f = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.i += 1;
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, MtlError> {
        let mut f = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.i += 1;
            f = Formula::and(f, self.until()?);
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Formula, MtlError> {
        let l = self.unary()?;
        if self.is_op("U") {
            self.i += 1;
            let iv = self.interval()?;
            let r = self.unary()?;
            return Ok(Formula::Until(iv, Box::new(l), Box::new(r)));
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Formula, MtlError> {
        if self.peek() == Some(&Tok::Not) {
            self.i += 1;
            return Ok(Formula::not(self.unary()?));
        }
        for op in ["F", "G"] {
            if self.is_op(op) {
                self.i += 1;
                let iv = self.interval()?;
                let c = Box::new(self.unary()?);
                return Ok(if op == "F" {
                    Formula::Eventually(iv, c)
                } else {
                    Formula::Globally(iv, c)
                });
            }
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, MtlError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.i += 1;
                let f = self.or()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Ident(name)) => {
                self.i += 1;
                if name == "true" {
                    return Ok(Formula::True);
                }
                if !self.preds.contains(&name) {
                    return Err(MtlError::UnknownPredicate(name));
                }
                Ok(Formula::Atom(name))
            }
            Some(t) => self.err(format!("unexpected {t:?}")),
            None => self.err("unexpected end of input"),
        }
    }

    fn int(&mut self) -> Result<i64, MtlError> {
        match self.peek() {
            Some(&Tok::Int(v)) => {
                self.i += 1;
                Ok(v)
            }
            _ => self.err("expected integer"),
        }
    }

    fn interval(&mut self) -> Result<Interval, MtlError> {
        self.expect(Tok::LBrack)?;
        let a = self.int()?;
        self.expect(Tok::Comma)?;
        let mut b = self.int()?;
        match self.peek() {
            Some(Tok::RBrack) => {}
            Some(Tok::RParen) => b -= 1,
            _ => return self.err("expected `]` or `)`"),
        }
        self.i += 1;
        if a < 0 || b < a {
            return Err(MtlError::BadInterval { a, b });
        }
        Ok(Interval {
            a: a as usize,
            b: b as usize,
        })
    }
}
