use thiserror::Error;

use super::{Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("exponent at byte {offset} is not an integer constant")]
    NonIntegerExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonIntegerExponent { offset } => *offset,
        }
    }
}

pub(super) fn parse(text: &str, dim: Option<usize>) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: Option<usize>,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.term()?);
            } else if self.eat(b'-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat(b'/') {
                acc = acc.div(&self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let offset = self.pos;
        let exponent = self.unary()?;
        let Some(c) = exponent.as_constant() else {
            return Err(ParseError::NonIntegerExponent { offset });
        };
        if let Some(k) = c.as_integer().and_then(|k| i32::try_from(k).ok()) {
            return Ok(base.powi(k));
        }
        match base.as_constant() {
            Some(b) if b.value() > 0.0 => Ok(Expr::constant(b.value().powf(c.value()))),
            _ => Err(ParseError::NonIntegerExponent { offset }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("expected a number, identifier or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        let int_end = self.pos;
        let mut frac = "";
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            digits(self);
            frac = std::str::from_utf8(&self.src[fs..self.pos]).unwrap_or("");
        }
        let mut has_exp = false;
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let es = self.pos;
            digits(self);
            if self.pos == es {
                self.pos = save;
            } else {
                has_exp = true;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if text == "." || text.is_empty() {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        // Short decimals are kept exact.
        if !has_exp && frac.len() <= 12 && int_end - start <= 6 {
            let int_part: i64 = std::str::from_utf8(&self.src[start..int_end])
                .ok()
                .filter(|s| !s.is_empty())
                .map_or(Ok(0), str::parse)
                .map_err(|_| self.syntax("malformed number"))?;
            let scale = 10i64.pow(frac.len() as u32);
            let frac_part: i64 = if frac.is_empty() { 0 } else { frac.parse().unwrap_or(0) };
            return Ok(Expr::rational(int_part * scale + frac_part, scale));
        }
        let value: f64 = text.parse().map_err(|_| {
            ParseError::Syntax { offset: start, message: "malformed number".into() }
        })?;
        Ok(Expr::constant(value))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(Expr::apply(func, &arg));
        }
        if name == "pi" {
            return Ok(Expr::constant(std::f64::consts::PI));
        }
        let unknown = || ParseError::UnknownIdentifier { offset: start, name: name.to_string() };
        let index = name
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(unknown)?;
        if self.dim.is_some_and(|n| index >= n) {
            return Err(unknown());
        }
        Ok(Expr::var(index))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Constant, Node};
    use super::*;

    #[test]
    fn power_of_variable() {
        let e = Expr::parse("x1^2").unwrap();
        match e.node() {
            Node::Pow(base, 2) => assert!(matches!(base.node(), Node::Var(1))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn product_of_functions() {
        let e = Expr::parse("sin(x0)*cos(x0)").unwrap();
        match e.node() {
            Node::Mul(a, b) => {
                assert!(matches!(a.node(), Node::Func(Func::Sin, _)));
                assert!(matches!(b.node(), Node::Func(Func::Cos, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaussian_at_origin_is_one() {
        let e = Expr::parse("exp(-(x2^2+x3^2)/2)").unwrap();
        assert_eq!(e.evaluate(&[0.7, -1.2, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(Expr::parse("x0 + * x1").unwrap_err().offset(), 5);
        assert!(matches!(
            Expr::parse("x0 + y").unwrap_err(),
            ParseError::UnknownIdentifier { offset: 5, .. }
        ));
        assert!(matches!(
            Expr::parse_with_dim("x0 + x4", 4).unwrap_err(),
            ParseError::UnknownIdentifier { offset: 5, .. }
        ));
        assert!(matches!(
            Expr::parse("x0^0.5").unwrap_err(),
            ParseError::NonIntegerExponent { offset: 3 }
        ));
        assert!(matches!(Expr::parse("x0^x1").unwrap_err(), ParseError::NonIntegerExponent { .. }));
        assert!(Expr::parse("sin x0").is_err());
        assert!(Expr::parse("(x0").is_err());
    }

    #[test]
    fn positive_constant_base_allows_real_exponent() {
        let e = Expr::parse("2^0.5*x0").unwrap();
        let v = e.evaluate(&[1.0]).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn negative_integer_exponent() {
        let e = Expr::parse("x0^-2").unwrap();
        assert_eq!(e.evaluate(&[2.0]).unwrap(), 0.25);
    }

    #[test]
    fn decimals_are_exact() {
        let e = Expr::parse("0.05").unwrap();
        assert_eq!(e.as_constant(), Some(Constant::Rational(num_rational::Rational64::new(1, 20))));
        let big = Expr::parse("1.5e-3").unwrap();
        assert_eq!(big.as_constant(), Some(Constant::Real(1.5e-3)));
    }
}
