//! Arithmetic expressions used by derived columns and metric formulas.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | identifier | '(' expr ')'
//! ```

use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Int(i64),
    Float(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(Number),
    Ref(String),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    /// Identifiers in left-to-right order, duplicates kept.
    pub fn refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Number(_) => {}
            Expr::Ref(name) => out.push(name),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
        }
    }

    /// Replace every identifier using `f`; identifiers mapped to `None` stay as they are.
    pub fn substitute(&self, f: &mut dyn FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Number(n) => Expr::Number(*n),
            Expr::Ref(name) => f(name).unwrap_or_else(|| Expr::Ref(name.clone())),
            Expr::Binary { op, lhs, rhs } => Expr::binary(*op, lhs.substitute(f), rhs.substitute(f)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            _ => 3,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(Number::Int(i)) => write!(f, "{i}"),
            Expr::Number(Number::Float(x)) => {
                let s = format!("{x}");
                if s.contains('.') {
                    f.write_str(&s)
                } else {
                    write!(f, "{s}.0")
                }
            }
            Expr::Ref(name) => f.write_str(name),
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // Left associativity: an equal-precedence right operand needs parentheses.
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Number),
    Ident(String),
    Op(BinOp),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let tok = match c {
            b'+' => Tok::Op(BinOp::Add),
            b'-' => Tok::Op(BinOp::Sub),
            b'*' => Tok::Op(BinOp::Mul),
            b'/' => Tok::Op(BinOp::Div),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                let mut end = start;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                let mut is_float = false;
                if end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit() {
                    is_float = true;
                    end += 1;
                    while end < bytes.len() && bytes[end].is_ascii_digit() {
                        end += 1;
                    }
                }
                let text = &self.src[start..end];
                self.pos = end;
                let n = if is_float {
                    Number::Float(text.parse().expect("digits"))
                } else {
                    match text.parse::<i64>() {
                        Ok(i) => Number::Int(i),
                        Err(_) => Number::Float(text.parse().expect("digits")),
                    }
                };
                return Ok((start, Tok::Num(n)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                return Ok((start, Tok::Ident(self.src[start..end].to_string())));
            }
            _ => {
                return Err(ParseError::at(self.src, start, "operator, number, identifier, or parenthesis"))
            }
        };
        self.pos += 1;
        Ok((start, tok))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: (usize, Tok),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let peeked = lexer.next()?;
        Ok(Parser { lexer, peeked })
    }

    fn bump(&mut self) -> Result<(usize, Tok), ParseError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ (BinOp::Add | BinOp::Sub)) = self.peeked.1 {
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Tok::Op(op @ (BinOp::Mul | BinOp::Div)) = self.peeked.1 {
            self.bump()?;
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let (pos, tok) = self.bump()?;
        match tok {
            Tok::Num(n) => Ok(Expr::Number(n)),
            Tok::Ident(name) => Ok(Expr::Ref(name)),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.bump()? {
                    (_, Tok::RParen) => Ok(inner),
                    (p, _) => Err(ParseError::at(self.lexer.src, p, "')'")),
                }
            }
            _ => Err(ParseError::at(self.lexer.src, pos, "number, identifier, or '('")),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser::new(text)?;
    let expr = parser.expr()?;
    match parser.peeked {
        (_, Tok::End) => Ok(expr),
        (p, _) => Err(ParseError::at(text, p, "operator or end of input")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(name: &str) -> Expr {
        Expr::Ref(name.into())
    }

    #[test]
    fn division_of_refs() {
        assert_eq!(
            parse_expr("revenue / cost").unwrap(),
            Expr::binary(BinOp::Div, r("revenue"), r("cost"))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("1+2*3").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Add,
                Expr::Number(Number::Int(1)),
                Expr::binary(BinOp::Mul, Expr::Number(Number::Int(2)), Expr::Number(Number::Int(3)))
            )
        );
        let e = parse_expr("a - b - c").unwrap();
        assert_eq!(e, Expr::binary(BinOp::Sub, Expr::binary(BinOp::Sub, r("a"), r("b")), r("c")));
    }

    #[test]
    fn unbalanced_parens() {
        let err = parse_expr("((x)").unwrap_err();
        assert_eq!(err.position, 4);
        assert!(parse_expr("x)").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("a +").is_err());
        assert!(parse_expr("a $ b").is_err());
    }

    #[test]
    fn display_reparses_identically() {
        for src in ["a - (b - c)", "(a + b) * c", "a / b / c", "a / (b / c)", "1.5 * x", "2 + 3.0"] {
            let e = parse_expr(src).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{src}");
        }
        assert_eq!(parse_expr("(a+b)*c").unwrap().to_string(), "(a + b) * c");
    }
}
