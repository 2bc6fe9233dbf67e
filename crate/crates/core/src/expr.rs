//! A small arithmetic expression language compiled to a postfix tape.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, named parameters, variables, and the functions
//! `sin cos tan exp log ln sqrt sinh cosh tanh atan`. Every construct is
//! smooth on its domain so dual-number evaluation always yields derivatives.

use std::collections::BTreeMap;

use crate::dual::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Atan => v.atan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowI(i32),
    Pow,
    Call(Func),
}

/// A compiled expression over a fixed, ordered list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    tape: Vec<Op>,
    arity: usize,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                column: start + 1,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(v), start + 1));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start + 1));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), i + 1));
            i += 1;
        } else {
            return Err(Error::Parse {
                column: i + 1,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
    params: &'a BTreeMap<String, f64>,
    tape: Vec<Op>,
    end_col: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end_col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            column: self.col(),
            message: message.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<()> {
        self.term()?;
        loop {
            if self.eat('+') {
                self.term()?;
                self.tape.push(Op::Add);
            } else if self.eat('-') {
                self.term()?;
                self.tape.push(Op::Sub);
            } else {
                return Ok(());
            }
        }
    }

    fn term(&mut self) -> Result<()> {
        self.unary()?;
        loop {
            if self.eat('*') {
                self.unary()?;
                self.tape.push(Op::Mul);
            } else if self.eat('/') {
                self.unary()?;
                self.tape.push(Op::Div);
            } else {
                return Ok(());
            }
        }
    }

    fn unary(&mut self) -> Result<()> {
        if self.eat('-') {
            self.unary()?;
            self.tape.push(Op::Neg);
            Ok(())
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<()> {
        self.atom()?;
        if self.eat('^') {
            let mark = self.tape.len();
            self.unary()?;
            let exponent = &self.tape[mark..];
            if exponent.iter().any(|op| matches!(op, Op::Var(_))) {
                self.tape.push(Op::Pow);
                return Ok(());
            }
            let sub = Expr {
                tape: exponent.to_vec(),
                arity: 0,
                source: String::new(),
            };
            let k = sub.eval::<f64>(&[]);
            self.tape.truncate(mark);
            if k.fract() == 0.0 && k.abs() <= 64.0 {
                self.tape.push(Op::PowI(k as i32));
            } else {
                self.tape.push(Op::Const(k));
                self.tape.push(Op::Pow);
            }
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<()> {
        let col = self.col();
        match self.toks.get(self.pos).map(|t| t.0.clone()) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                self.tape.push(Op::Const(v));
                Ok(())
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(())
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let Some(f) = Func::lookup(&name) else {
                        return Err(Error::Parse {
                            column: col,
                            message: format!("unknown function `{name}`"),
                        });
                    };
                    self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected `)` after function argument");
                    }
                    self.tape.push(Op::Call(f));
                    return Ok(());
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    self.tape.push(Op::Var(i));
                } else if let Some(v) = self.params.get(&name) {
                    self.tape.push(Op::Const(*v));
                } else if name == "pi" {
                    self.tape.push(Op::Const(std::f64::consts::PI));
                } else if name == "e" {
                    self.tape.push(Op::Const(std::f64::consts::E));
                } else {
                    return Err(Error::Parse {
                        column: col,
                        message: format!("unknown identifier `{name}`"),
                    });
                }
                Ok(())
            }
            Some(Tok::Sym(c)) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of expression"),
        }
    }
}

impl Expr {
    /// Compiles `src` with the given ordered variable names and named constants.
    pub fn parse(src: &str, vars: &[String], params: &BTreeMap<String, f64>) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            vars,
            params,
            tape: Vec::new(),
            end_col: src.chars().count() + 1,
        };
        p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        let mut e = Expr {
            tape: p.tape,
            arity: vars.len(),
            source: src.to_string(),
        };
        if e.is_constant() {
            let v = e.eval::<f64>(&vec![0.0; e.arity]);
            e.tape = vec![Op::Const(v)];
        }
        Ok(e)
    }

    /// Convenience wrapper taking `&str` variable names and no parameters.
    pub fn parse_vars(src: &str, vars: &[&str]) -> Result<Expr> {
        let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        Expr::parse(src, &names, &BTreeMap::new())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_constant(&self) -> bool {
        !self.tape.iter().any(|op| matches!(op, Op::Var(_)))
    }

    /// The value if the expression has no variables.
    pub fn constant_value(&self) -> Option<f64> {
        match self.tape.as_slice() {
            [Op::Const(v)] => Some(*v),
            _ => None,
        }
    }

    /// Evaluates over any scalar type; `x.len()` must equal the arity.
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        let mut stack: Vec<T> = Vec::with_capacity(self.tape.len());
        for op in &self.tape {
            match op {
                Op::Const(v) => stack.push(T::cst(*v)),
                Op::Var(i) => stack.push(x[*i]),
                Op::Neg => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(-a);
                }
                Op::PowI(k) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.powi(*k));
                }
                Op::Call(f) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(f.apply(a));
                }
                binary => {
                    let b = stack.pop().expect("tape underflow");
                    let a = stack.pop().expect("tape underflow");
                    stack.push(match binary {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        Op::Pow => (b * a.ln()).exp(),
                        _ => unreachable!(),
                    });
                }
            }
        }
        stack.pop().expect("empty tape")
    }
}
