//! Scalar functions of the base coordinates with first derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::dual::Dual;
use crate::error::{check_len, Result};
use crate::expr::Expr;

/// Relative step of the central-difference fallback for callback fields.
pub const FD_STEP: f64 = 1e-6;

trait Eval: Send + Sync {
    fn arity(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient into `grad` and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    fn constant(&self) -> Option<f64> {
        None
    }
    fn describe(&self) -> String;
}

struct Const {
    arity: usize,
    v: f64,
}

impl Eval for Const {
    fn arity(&self) -> usize {
        self.arity
    }
    fn value(&self, _: &[f64]) -> f64 {
        self.v
    }
    fn value_grad(&self, _: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        self.v
    }
    fn constant(&self) -> Option<f64> {
        Some(self.v)
    }
    fn describe(&self) -> String {
        format!("{}", self.v)
    }
}

struct ExprField(Expr);

impl Eval for ExprField {
    fn arity(&self) -> usize {
        self.0.arity()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.eval(x)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut seeded: Vec<Dual<f64>> = x.iter().map(|&v| Dual::new(v, 0.0)).collect();
        let mut value = 0.0;
        for k in 0..x.len() {
            seeded[k].eps = 1.0;
            let d = self.0.eval(&seeded);
            seeded[k].eps = 0.0;
            grad[k] = d.eps;
            value = d.re;
        }
        if x.is_empty() {
            value = self.0.eval(x);
        }
        value
    }
    fn describe(&self) -> String {
        self.0.source().to_string()
    }
}

type Callback = dyn Fn(&[f64]) -> f64 + Send + Sync;

struct FnField {
    arity: usize,
    f: Arc<Callback>,
}

impl Eval for FnField {
    fn arity(&self) -> usize {
        self.arity
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut probe = x.to_vec();
        for k in 0..x.len() {
            let h = FD_STEP * x[k].abs().max(1.0);
            probe[k] = x[k] + h;
            let fp = (self.f)(&probe);
            probe[k] = x[k] - h;
            let fm = (self.f)(&probe);
            probe[k] = x[k];
            grad[k] = (fp - fm) / (2.0 * h);
        }
        (self.f)(x)
    }
    fn describe(&self) -> String {
        "<callback>".to_string()
    }
}

enum Combine {
    Sum,
    Product,
}

struct Binary {
    op: Combine,
    a: ScalarField,
    b: ScalarField,
}

impl Eval for Binary {
    fn arity(&self) -> usize {
        self.a.arity()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let (a, b) = (self.a.value(x), self.b.value(x));
        match self.op {
            Combine::Sum => a + b,
            Combine::Product => a * b,
        }
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (a, ga) = self.a.value_grad(x);
        let (b, gb) = self.b.value_grad(x);
        match self.op {
            Combine::Sum => {
                for k in 0..grad.len() {
                    grad[k] = ga[k] + gb[k];
                }
                a + b
            }
            Combine::Product => {
                for k in 0..grad.len() {
                    grad[k] = ga[k] * b + a * gb[k];
                }
                a * b
            }
        }
    }
    fn describe(&self) -> String {
        match self.op {
            Combine::Sum => format!("({}) + ({})", self.a, self.b),
            Combine::Product => format!("({}) * ({})", self.a, self.b),
        }
    }
}

struct Pullback {
    inner: ScalarField,
    slots: Vec<usize>,
    arity: usize,
}

impl Eval for Pullback {
    fn arity(&self) -> usize {
        self.arity
    }
    fn value(&self, x: &[f64]) -> f64 {
        let sub: Vec<f64> = self.slots.iter().map(|&i| x[i]).collect();
        self.inner.value(&sub)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let sub: Vec<f64> = self.slots.iter().map(|&i| x[i]).collect();
        let (v, g) = self.inner.value_grad(&sub);
        grad.fill(0.0);
        for (k, &i) in self.slots.iter().enumerate() {
            grad[i] += g[k];
        }
        v
    }
    fn describe(&self) -> String {
        format!("{}∘{:?}", self.inner, self.slots)
    }
}

/// A smooth real function of `arity` coordinates.
#[derive(Clone)]
pub struct ScalarField(Arc<dyn Eval>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.0.describe())
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.describe())
    }
}

impl ScalarField {
    pub fn constant(arity: usize, v: f64) -> Self {
        ScalarField(Arc::new(Const { arity, v }))
    }

    pub fn zero(arity: usize) -> Self {
        Self::constant(arity, 0.0)
    }

    /// Wraps a compiled expression; constant expressions become constant fields.
    pub fn from_expr(e: Expr) -> Self {
        match e.constant_value() {
            Some(v) => Self::constant(e.arity(), v),
            None => ScalarField(Arc::new(ExprField(e))),
        }
    }

    pub fn parse(src: &str, vars: &[String], params: &BTreeMap<String, f64>) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse(src, vars, params)?))
    }

    /// Parses with `&str` variable names and no parameters.
    pub fn parse_vars(src: &str, vars: &[&str]) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse_vars(src, vars)?))
    }

    /// A callback field whose gradient comes from central differences.
    pub fn from_fn(arity: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField(Arc::new(FnField {
            arity,
            f: Arc::new(f),
        }))
    }

    pub fn arity(&self) -> usize {
        self.0.arity()
    }

    /// `Some(v)` when the field is structurally constant.
    pub fn constant_value(&self) -> Option<f64> {
        self.0.constant()
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.arity());
        self.0.value(x)
    }

    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(x.len(), self.arity());
        let mut g = vec![0.0; x.len()];
        let v = self.0.value_grad(x, &mut g);
        (v, g)
    }

    /// Checked evaluation of value and gradient.
    pub fn try_value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("scalar field argument", self.arity(), x.len())?;
        Ok(self.value_grad(x))
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        match (self.constant_value(), other.constant_value()) {
            (Some(a), Some(b)) => Self::constant(self.arity(), a + b),
            (Some(0.0), _) => other.clone(),
            (_, Some(0.0)) => self.clone(),
            _ => ScalarField(Arc::new(Binary {
                op: Combine::Sum,
                a: self.clone(),
                b: other.clone(),
            })),
        }
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        match (self.constant_value(), other.constant_value()) {
            (Some(a), Some(b)) => Self::constant(self.arity(), a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Self::zero(self.arity()),
            (Some(1.0), _) => other.clone(),
            (_, Some(1.0)) => self.clone(),
            _ => ScalarField(Arc::new(Binary {
                op: Combine::Product,
                a: self.clone(),
                b: other.clone(),
            })),
        }
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.mul(&Self::constant(self.arity(), c))
    }

    /// Reads `self`'s arguments from positions `slots` of a longer coordinate list.
    pub fn pullback(&self, slots: Vec<usize>, arity: usize) -> ScalarField {
        assert_eq!(slots.len(), self.arity(), "pullback slot count");
        assert!(slots.iter().all(|&i| i < arity), "pullback slot out of range");
        if let Some(v) = self.constant_value() {
            return Self::constant(arity, v);
        }
        ScalarField(Arc::new(Pullback {
            inner: self.clone(),
            slots,
            arity,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &ScalarField, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut p = x.to_vec();
        for k in 0..x.len() {
            let h = 1e-5 * x[k].abs().max(1.0);
            p[k] = x[k] + h;
            let a = f.value(&p);
            p[k] = x[k] - h;
            let b = f.value(&p);
            p[k] = x[k];
            out[k] = (a - b) / (2.0 * h);
        }
        out
    }

    #[test]
    fn expression_gradient_agrees_with_differences() {
        let f = ScalarField::parse_vars("sin(t)*y + x^2", &["t", "x", "y"]).unwrap();
        let x = [0.4, 1.1, -0.6];
        let (_, g) = f.value_grad(&x);
        for (a, b) in g.iter().zip(fd_grad(&f, &x)) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn callback_fallback_gradient() {
        let f = ScalarField::from_fn(2, |x| x[0].exp() * x[1]);
        let (v, g) = f.value_grad(&[0.5, 2.0]);
        assert_eq!(v, 0.5f64.exp() * 2.0);
        assert!((g[0] - 0.5f64.exp() * 2.0).abs() < 1e-8);
        assert!((g[1] - 0.5f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn combinators_and_pullback() {
        let omega = ScalarField::parse_vars("1 + 0.5*sin(t)", &["t"]).unwrap();
        let y = ScalarField::parse_vars("y", &["t", "x", "y"]).unwrap();
        let f = omega.pullback(vec![0], 3).mul(&y);
        let x = [0.3, 9.0, 2.0];
        let (v, g) = f.value_grad(&x);
        assert_eq!(v, (1.0 + 0.5 * 0.3f64.sin()) * 2.0);
        assert!((g[0] - 0.5 * 0.3f64.cos() * 2.0).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], 1.0 + 0.5 * 0.3f64.sin());
        assert!(ScalarField::zero(3).mul(&y).is_zero());
        assert_eq!(ScalarField::constant(3, 2.0).add(&ScalarField::constant(3, 1.5)).constant_value(), Some(3.5));
    }

    #[test]
    fn determinism() {
        let f = ScalarField::parse_vars("exp(x)*cos(y)/(1+x^2)", &["x", "y"]).unwrap();
        let a = f.value_grad(&[0.123, -4.5]);
        let b = f.value_grad(&[0.123, -4.5]);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
