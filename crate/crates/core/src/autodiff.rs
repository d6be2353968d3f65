//! Forward-mode truncated Taylor arithmetic.
//!
//! A [`Jet`] carries the value of a scalar together with its gradient and
//! Hessian (and, at order 3, the symmetric third-derivative array) with
//! respect to `v` seeded variables. Every elementary function propagates
//! these parts by the exact chain rule, so derivatives of composed maps are
//! correct to rounding.
//!
//! Jets of width zero act as constants and broadcast against any width.
//! Combining jets of different orders truncates to the smaller order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::{tri_index, CompensatedSum, SymTensor2};

pub const MAX_ORDER: u8 = 3;

#[inline]
fn tri3_index(i: usize, j: usize, k: usize) -> usize {
    // sort descending
    let (mut a, mut b, mut c) = (i, j, k);
    if a < b {
        core::mem::swap(&mut a, &mut b);
    }
    if b < c {
        core::mem::swap(&mut b, &mut c);
    }
    if a < b {
        core::mem::swap(&mut a, &mut b);
    }
    a * (a + 1) * (a + 2) / 6 + b * (b + 1) / 2 + c
}

#[inline]
fn tri_len(v: usize) -> usize {
    v * (v + 1) / 2
}

#[inline]
fn tri3_len(v: usize) -> usize {
    v * (v + 1) * (v + 2) / 6
}

/// Truncated multivariate Taylor value.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    value: f64,
    order: u8,
    grad: Vec<f64>,
    /// packed lower triangle, empty below order 2
    hess: Vec<f64>,
    /// packed `i ≥ j ≥ k`, empty below order 3
    third: Vec<f64>,
}

impl Jet {
    /// A constant that broadcasts against jets of any width.
    pub fn constant(value: f64) -> Self {
        Self { value, order: MAX_ORDER, grad: Vec::new(), hess: Vec::new(), third: Vec::new() }
    }

    /// The constant `value` expanded to an explicit width and order.
    pub fn constant_with(value: f64, nvars: usize, order: u8) -> Self {
        Self {
            value,
            order,
            grad: vec![0.0; nvars],
            hess: if order >= 2 { vec![0.0; tri_len(nvars)] } else { Vec::new() },
            third: if order >= 3 { vec![0.0; tri3_len(nvars)] } else { Vec::new() },
        }
    }

    /// The `index`-th of `nvars` independent variables.
    pub fn variable(value: f64, index: usize, nvars: usize, order: u8) -> Self {
        let mut j = Self::constant_with(value, nvars, order);
        j.grad[index] = 1.0;
        j
    }

    /// Seeds one variable per entry of `values`.
    pub fn seed(values: &[f64], order: u8) -> Result<Vec<Jet>> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidArgument(format!("jet order must be 1, 2 or 3, got {order}")));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "seed value {bad} is not finite ({})",
                values[bad]
            )));
        }
        let v = values.len();
        Ok(values.iter().enumerate().map(|(i, &x)| Self::variable(x, i, v, order)).collect())
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Number of seeded variables; zero for broadcast constants.
    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// `∂²f/∂x_i∂x_j`; zero for constants and order-1 jets.
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        if self.hess.is_empty() {
            0.0
        } else {
            self.hess[tri_index(i, j)]
        }
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.third.is_empty() {
            0.0
        } else {
            self.third[tri3_index(i, j, k)]
        }
    }

    pub fn hessian(&self) -> SymTensor2 {
        let v = self.nvars();
        if self.hess.is_empty() {
            SymTensor2::zeros(v)
        } else {
            SymTensor2::from_packed(v, self.hess.clone())
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|x| x.is_finite())
            && self.hess.iter().all(|x| x.is_finite())
            && self.third.iter().all(|x| x.is_finite())
    }

    /// Drops derivative parts above `order`.
    pub fn truncate(&self, order: u8) -> Jet {
        let order = order.min(self.order);
        if self.nvars() == 0 {
            return Jet { order, ..self.clone() };
        }
        Jet {
            value: self.value,
            order,
            grad: self.grad.clone(),
            hess: if order >= 2 { self.hess.clone() } else { Vec::new() },
            third: if order >= 3 { self.third.clone() } else { Vec::new() },
        }
    }

    /// The jet of `∂f/∂x_index`, one order lower.
    pub fn derivative(&self, index: usize) -> Result<Jet> {
        let v = self.nvars();
        if v == 0 {
            return Ok(Jet::constant(0.0));
        }
        if index >= v {
            return Err(Error::IndexOutOfRange { index, len: v });
        }
        if self.order < 2 {
            return Err(Error::InvalidArgument(
                "derivative of an order-1 jet would have order 0".into(),
            ));
        }
        let order = self.order - 1;
        let mut out = Jet::constant_with(self.grad[index], v, order);
        for i in 0..v {
            out.grad[i] = self.hess[tri_index(index, i)];
        }
        if order >= 2 {
            for i in 0..v {
                for j in 0..=i {
                    out.hess[tri_index(i, j)] = self.third[tri3_index(index, i, j)];
                }
            }
        }
        Ok(out)
    }

    fn broadcast_width(a: &Jet, b: &Jet) -> usize {
        match (a.nvars(), b.nvars()) {
            (0, w) | (w, 0) => w,
            (x, y) => {
                assert_eq!(x, y, "jet width mismatch");
                x
            }
        }
    }

    fn widen(&self, v: usize, order: u8) -> Jet {
        if self.nvars() == v {
            self.truncate(order)
        } else {
            Jet::constant_with(self.value, v, order)
        }
    }

    /// Applies a scalar function with derivatives `d = [f, f', f'', f''']`
    /// at `self.value()`.
    pub fn compose(&self, d: [f64; 4]) -> Jet {
        let v = self.nvars();
        let [f0, f1, f2, f3] = d;
        let mut out = Jet {
            value: f0,
            order: self.order,
            grad: self.grad.iter().map(|g| f1 * g).collect(),
            hess: Vec::new(),
            third: Vec::new(),
        };
        if v == 0 {
            return out;
        }
        if self.order >= 2 {
            out.hess = vec![0.0; tri_len(v)];
            for i in 0..v {
                for j in 0..=i {
                    let k = tri_index(i, j);
                    out.hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
                }
            }
        }
        if self.order >= 3 {
            out.third = vec![0.0; tri3_len(v)];
            let g = &self.grad;
            for i in 0..v {
                for j in 0..=i {
                    for k in 0..=j {
                        let idx = tri3_index(i, j, k);
                        let h = |a, b| self.hess[tri_index(a, b)];
                        out.third[idx] = f1 * self.third[idx]
                            + f2 * (h(i, j) * g[k] + h(i, k) * g[j] + h(j, k) * g[i])
                            + f3 * g[i] * g[j] * g[k];
                    }
                }
            }
        }
        out
    }

    fn add_jet(&self, other: &Jet, sign: f64) -> Jet {
        let v = Self::broadcast_width(self, other);
        let order = self.order.min(other.order);
        let a = self.widen(v, order);
        let b = other.widen(v, order);
        Jet {
            value: a.value + sign * b.value,
            order,
            grad: a.grad.iter().zip(&b.grad).map(|(x, y)| x + sign * y).collect(),
            hess: a.hess.iter().zip(&b.hess).map(|(x, y)| x + sign * y).collect(),
            third: a.third.iter().zip(&b.third).map(|(x, y)| x + sign * y).collect(),
        }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let v = Self::broadcast_width(self, other);
        let order = self.order.min(other.order);
        if self.nvars() == 0 {
            return other.truncate(order).scale(self.value);
        }
        if other.nvars() == 0 {
            return self.truncate(order).scale(other.value);
        }
        let (u, w) = (self, other);
        let mut out = Jet::constant_with(u.value * w.value, v, order);
        for i in 0..v {
            out.grad[i] = u.grad[i] * w.value + u.value * w.grad[i];
        }
        if order >= 2 {
            for i in 0..v {
                for j in 0..=i {
                    let k = tri_index(i, j);
                    out.hess[k] = u.hess[k] * w.value
                        + u.grad[i] * w.grad[j]
                        + u.grad[j] * w.grad[i]
                        + u.value * w.hess[k];
                }
            }
        }
        if order >= 3 {
            let uh = |a, b| u.hess[tri_index(a, b)];
            let wh = |a, b| w.hess[tri_index(a, b)];
            for i in 0..v {
                for j in 0..=i {
                    for k in 0..=j {
                        let idx = tri3_index(i, j, k);
                        out.third[idx] = u.third[idx] * w.value
                            + uh(i, j) * w.grad[k]
                            + uh(i, k) * w.grad[j]
                            + uh(j, k) * w.grad[i]
                            + u.grad[i] * wh(j, k)
                            + u.grad[j] * wh(i, k)
                            + u.grad[k] * wh(i, j)
                            + u.value * w.third[idx];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            value: self.value * c,
            order: self.order,
            grad: self.grad.iter().map(|x| x * c).collect(),
            hess: self.hess.iter().map(|x| x * c).collect(),
            third: self.third.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        Jet { value: self.value + c, ..self.clone() }
    }

    pub fn exp(&self) -> Jet {
        let e = libm::exp(self.value);
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Result<Jet> {
        let x = self.value;
        if !(x > 0.0) {
            return Err(Error::Domain { func: "ln", detail: format!("argument {x} is not positive") });
        }
        let r = 1.0 / x;
        Ok(self.compose([libm::log(x), r, -r * r, 2.0 * r * r * r]))
    }

    pub fn tanh(&self) -> Jet {
        let t = libm::tanh(self.value);
        let s = 1.0 - t * t;
        self.compose([t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)])
    }

    pub fn recip(&self) -> Result<Jet> {
        let x = self.value;
        if x == 0.0 || !x.is_finite() {
            return Err(Error::Domain { func: "div", detail: format!("denominator {x}") });
        }
        let r = 1.0 / x;
        Ok(self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self * &other.recip()?)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let x = self.value;
        if !(x > 0.0) {
            return Err(Error::Domain { func: "sqrt", detail: format!("argument {x} is not positive") });
        }
        let s = libm::sqrt(x);
        Ok(self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)]))
    }

    /// `self^p` for a constant exponent. Non-integer exponents need a
    /// positive base.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let x = self.value;
        let integral = p == libm::trunc(p) && p.abs() < 1e9;
        if !integral && !(x > 0.0) {
            return Err(Error::Domain { func: "pow", detail: format!("base {x} with exponent {p}") });
        }
        if integral && p < 0.0 && x == 0.0 {
            return Err(Error::Domain { func: "pow", detail: format!("zero base with exponent {p}") });
        }
        let pw = |e: f64| if e == 0.0 { 1.0 } else { libm::pow(x, e) };
        Ok(self.compose([
            pw(p),
            p * pw(p - 1.0),
            p * (p - 1.0) * pw(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * pw(p - 3.0),
        ]))
    }

    pub fn powi(&self, n: i32) -> Result<Jet> {
        self.powf(f64::from(n))
    }

    /// `self^exponent` with a jet exponent; reduces to [`Jet::powf`] when
    /// the exponent carries no derivative information.
    pub fn pow(&self, exponent: &Jet) -> Result<Jet> {
        let constant = exponent.grad.iter().all(|g| *g == 0.0)
            && exponent.hess.iter().all(|g| *g == 0.0)
            && exponent.third.iter().all(|g| *g == 0.0);
        if constant {
            self.powf(exponent.value)
        } else {
            Ok((exponent * &self.ln()?).exp())
        }
    }

    /// Overflow-safe `ln Σ exp(args)`.
    pub fn log_sum_exp(args: &[Jet]) -> Result<Jet> {
        let mut acc = LogSumExp::new();
        for a in args {
            acc.push(a)?;
        }
        acc.finish()
    }
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.add_jet(rhs, 1.0)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.add_jet(rhs, -1.0)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

/// Streaming log-sum-exp over jets.
///
/// Keeps the exponent-weighted raw moments of the argument derivatives
/// relative to the running maximum, rescaling whenever a larger exponent
/// arrives, so no weight ever exceeds one.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    max: f64,
    width: Option<usize>,
    order: u8,
    s0: CompensatedSum,
    s1: Vec<CompensatedSum>,
    s2: Vec<CompensatedSum>,
    s3: Vec<CompensatedSum>,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            width: None,
            order: MAX_ORDER,
            s0: CompensatedSum::ZERO,
            s1: Vec::new(),
            s2: Vec::new(),
            s3: Vec::new(),
        }
    }

    pub fn push(&mut self, a: &Jet) -> Result<()> {
        if !a.value.is_finite() {
            return Err(Error::Domain {
                func: "log_sum_exp",
                detail: format!("exponent {} is not finite", a.value),
            });
        }
        let v = a.nvars();
        match self.width {
            // broadcast constants carry no derivative parts
            Some(w) if w == v || v == 0 => {}
            Some(w) if w != 0 => return Err(Error::DimensionMismatch { expected: w, got: v }),
            _ => {
                self.width = Some(v);
                self.s1 = vec![CompensatedSum::ZERO; v];
                self.s2 = vec![CompensatedSum::ZERO; tri_len(v)];
                self.s3 = vec![CompensatedSum::ZERO; tri3_len(v)];
            }
        }
        if v == 0 {
            self.absorb(a.value);
            return Ok(());
        }
        self.order = self.order.min(a.order);
        let w = self.absorb(a.value);
        let g = &a.grad;
        for i in 0..v {
            self.s1[i].add(w * g[i]);
        }
        if self.order >= 2 {
            for i in 0..v {
                for j in 0..=i {
                    let k = tri_index(i, j);
                    self.s2[k].add(w * (a.hess(i, j) + g[i] * g[j]));
                }
            }
        }
        if self.order >= 3 {
            for i in 0..v {
                for j in 0..=i {
                    for k in 0..=j {
                        let m = a.third(i, j, k)
                            + a.hess(i, j) * g[k]
                            + a.hess(i, k) * g[j]
                            + a.hess(j, k) * g[i]
                            + g[i] * g[j] * g[k];
                        self.s3[tri3_index(i, j, k)].add(w * m);
                    }
                }
            }
        }
        Ok(())
    }

    /// Rescales to a new maximum if needed, adds the weight of `value` to
    /// the zeroth moment and returns that weight.
    fn absorb(&mut self, value: f64) -> f64 {
        if value > self.max {
            let r = libm::exp(self.max - value);
            if r != 1.0 {
                self.s0.scale(r);
                self.s1.iter_mut().for_each(|x| x.scale(r));
                self.s2.iter_mut().for_each(|x| x.scale(r));
                self.s3.iter_mut().for_each(|x| x.scale(r));
            }
            self.max = value;
        }
        let w = libm::exp(value - self.max);
        self.s0.add(w);
        w
    }

    pub fn finish(&self) -> Result<Jet> {
        let Some(v) = self.width else {
            return Err(Error::InvalidArgument("log_sum_exp of an empty set".into()));
        };
        let order = self.order;
        let s0 = self.s0.value();
        let mut out = Jet::constant_with(self.max + libm::log(s0), v, order);
        let inv = 1.0 / s0;
        let m1: Vec<f64> = self.s1.iter().map(|x| x.value() * inv).collect();
        out.grad.copy_from_slice(&m1);
        if order >= 2 {
            for i in 0..v {
                for j in 0..=i {
                    let k = tri_index(i, j);
                    out.hess[k] = self.s2[k].value() * inv - m1[i] * m1[j];
                }
            }
        }
        if order >= 3 {
            for i in 0..v {
                for j in 0..=i {
                    for k in 0..=j {
                        let idx = tri3_index(i, j, k);
                        let h = |a, b| out.hess[tri_index(a, b)];
                        out.third[idx] = self.s3[idx].value() * inv
                            - (h(i, j) * m1[k] + h(i, k) * m1[j] + h(j, k) * m1[i])
                            - m1[i] * m1[j] * m1[k];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Named elementary operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Add,
    Mul,
    Div,
    Exp,
    Ln,
    Tanh,
    /// `args[0]^args[1]`
    Pow,
    LogSumExp,
}

pub fn elementary(f: Elementary, args: &[Jet]) -> Result<Jet> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{f:?} takes {n} argument(s), got {}", args.len())))
        }
    };
    match f {
        Elementary::Add => Ok(args.iter().skip(1).fold(
            args.first().cloned().ok_or_else(|| Error::InvalidArgument("add of nothing".into()))?,
            |acc, x| &acc + x,
        )),
        Elementary::Mul => Ok(args.iter().skip(1).fold(
            args.first().cloned().ok_or_else(|| Error::InvalidArgument("mul of nothing".into()))?,
            |acc, x| &acc * x,
        )),
        Elementary::Div => {
            arity(2)?;
            args[0].div(&args[1])
        }
        Elementary::Exp => {
            arity(1)?;
            Ok(args[0].exp())
        }
        Elementary::Ln => {
            arity(1)?;
            args[0].ln()
        }
        Elementary::Tanh => {
            arity(1)?;
            Ok(args[0].tanh())
        }
        Elementary::Pow => {
            arity(2)?;
            args[0].pow(&args[1])
        }
        Elementary::LogSumExp => Jet::log_sum_exp(args),
    }
}

/// Value, gradient and Hessian of `f` at `at`.
pub fn hessian<F>(f: F, at: &[f64]) -> Result<(f64, Vec<f64>, SymTensor2)>
where
    F: Fn(&[Jet]) -> Result<Jet>,
{
    let x = Jet::seed(at, 2)?;
    let y = f(&x)?.widen(at.len(), 2);
    Ok((y.value, y.grad.clone(), y.hessian()))
}
