//! Parser and evaluator for user-defined symbol expressions.
//!
//! The grammar is a small arithmetic language over the wavenumber variable
//! `xi`: operators `+ - * / ^`, functions `exp` and `sqrt`, numeric literals
//! and parentheses. Expressions are evaluated pointwise and, for the moment
//! calculus, expanded as truncated Taylor series about the origin.

use crate::error::{Error, Result};
use crate::series::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::ExprParse(format!(
                "unexpected trailing input near token {}",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, xi: f64) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Var => xi,
            Expr::Neg(a) => -a.eval(xi),
            Expr::Add(a, b) => a.eval(xi) + b.eval(xi),
            Expr::Sub(a, b) => a.eval(xi) - b.eval(xi),
            Expr::Mul(a, b) => a.eval(xi) * b.eval(xi),
            Expr::Div(a, b) => a.eval(xi) / b.eval(xi),
            Expr::Pow(a, b) => {
                let base = a.eval(xi);
                let e = b.eval(xi);
                if e.fract() == 0.0 && e.abs() < 2_147_483_647.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Exp(a) => a.eval(xi).exp(),
            Expr::Sqrt(a) => a.eval(xi).sqrt(),
        }
    }

    /// Taylor expansion about xi = 0 with `len` coefficients.
    pub fn jet(&self, len: usize) -> Result<Jet> {
        match self {
            Expr::Number(v) => Ok(Jet::constant(*v, len)),
            Expr::Var => Ok(Jet::variable(len)),
            Expr::Neg(a) => Ok(a.jet(len)?.neg()),
            Expr::Add(a, b) => Ok(a.jet(len)?.add(&b.jet(len)?)),
            Expr::Sub(a, b) => Ok(a.jet(len)?.sub(&b.jet(len)?)),
            Expr::Mul(a, b) => Ok(a.jet(len)?.mul(&b.jet(len)?)),
            Expr::Div(a, b) => a.jet(len)?.div(&b.jet(len)?),
            Expr::Pow(a, b) => {
                let e = match **b {
                    Expr::Number(v) => v,
                    Expr::Neg(ref inner) => match **inner {
                        Expr::Number(v) => -v,
                        _ => {
                            return Err(Error::ExprParse(
                                "exponent must be a numeric constant".into(),
                            ))
                        }
                    },
                    _ => {
                        return Err(Error::ExprParse(
                            "exponent must be a numeric constant".into(),
                        ))
                    }
                };
                a.jet(len)?.powf(e)
            }
            Expr::Exp(a) => Ok(a.jet(len)?.exp()),
            Expr::Sqrt(a) => a.jet(len)?.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] == b'+'
                            || bytes[i + 1] == b'-')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::ExprParse(format!("bad number literal '{text}'")))?;
                out.push(Token::Number(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Token::Ident(src[start..i].to_string()));
            }
            other => {
                return Err(Error::ExprParse(format!("unexpected character '{other}'")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // Unary minus binds looser than `^`, so -xi^2 is -(xi^2).
    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Minus) = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // `^` is right-associative and admits a signed exponent.
    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if let Some(Token::Caret) = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expr::Number(v)),
            Some(Token::Ident(name)) => match name.as_str() {
                "xi" => Ok(Expr::Var),
                "exp" | "sqrt" => {
                    match self.bump() {
                        Some(Token::LParen) => {}
                        _ => {
                            return Err(Error::ExprParse(format!(
                                "expected '(' after function '{name}'"
                            )))
                        }
                    }
                    let arg = self.expr()?;
                    match self.bump() {
                        Some(Token::RParen) => {}
                        _ => return Err(Error::ExprParse("missing closing ')'".into())),
                    }
                    Ok(match name.as_str() {
                        "exp" => Expr::Exp(Box::new(arg)),
                        _ => Expr::Sqrt(Box::new(arg)),
                    })
                }
                other => Err(Error::ExprParse(format!("unknown identifier '{other}'"))),
            },
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(Error::ExprParse("missing closing ')'".into())),
                }
            }
            other => Err(Error::ExprParse(format!("unexpected token {other:?}"))),
        }
    }
}
