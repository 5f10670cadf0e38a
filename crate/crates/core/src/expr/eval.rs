use super::{BinOp, ExprError, Func, Node};

/// Arithmetic carrier for the tree walker: plain `f64` for values, [`Dual`]
/// for one directional derivative.
pub(super) trait Real: Copy {
    fn cst(v: f64) -> Self;
    fn val(self) -> f64;
    /// Derivative part; zero for plain values.
    fn der(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn cbrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn pow(self, o: Self) -> Self;
    /// Right directional derivative at the kink.
    fn abs(self) -> Self;
    fn min(self, o: Self) -> Self;
    fn max(self, o: Self) -> Self;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(self) -> f64 {
        self
    }
    fn der(self) -> f64 {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn cbrt(self) -> Self {
        f64::cbrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn pow(self, o: Self) -> Self {
        self.powf(o)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn min(self, o: Self) -> Self {
        if o < self {
            o
        } else {
            self
        }
    }
    fn max(self, o: Self) -> Self {
        if o > self {
            o
        } else {
            self
        }
    }
}

/// Forward-mode dual number `v + d·ε`, `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Dual {
    pub v: f64,
    pub d: f64,
}

// a·b with the convention 0·∞ = 0 for a structurally zero derivative seed.
fn scale(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Real for Dual {
    fn cst(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn val(self) -> f64 {
        self.v
    }
    fn der(self) -> f64 {
        self.d
    }
    fn add(self, o: Self) -> Self {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
    fn sub(self, o: Self) -> Self {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: scale(self.d, o.v) + scale(self.v, o.d),
        }
    }
    fn div(self, o: Self) -> Self {
        Dual {
            v: self.v / o.v,
            d: (scale(self.d, o.v) - scale(self.v, o.d)) / (o.v * o.v),
        }
    }
    fn neg(self) -> Self {
        Dual { v: -self.v, d: -self.d }
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual { v: e, d: scale(self.d, e) }
    }
    fn ln(self) -> Self {
        Dual { v: self.v.ln(), d: scale(self.d, 1.0 / self.v) }
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual { v: s, d: scale(self.d, 0.5 / s) }
    }
    fn cbrt(self) -> Self {
        let c = self.v.cbrt();
        Dual { v: c, d: scale(self.d, 1.0 / (3.0 * c * c)) }
    }
    fn sin(self) -> Self {
        Dual { v: self.v.sin(), d: scale(self.d, self.v.cos()) }
    }
    fn cos(self) -> Self {
        Dual { v: self.v.cos(), d: scale(self.d, -self.v.sin()) }
    }
    fn pow(self, o: Self) -> Self {
        let v = self.v.powf(o.v);
        let base_term = if self.d == 0.0 || o.v == 0.0 {
            0.0
        } else {
            scale(self.d, o.v * self.v.powf(o.v - 1.0))
        };
        let exp_term = if o.d == 0.0 { 0.0 } else { scale(o.d, v * self.v.ln()) };
        Dual { v, d: base_term + exp_term }
    }
    fn abs(self) -> Self {
        if self.v > 0.0 {
            self
        } else if self.v < 0.0 {
            self.neg()
        } else {
            Dual { v: 0.0, d: self.d.abs() }
        }
    }
    fn min(self, o: Self) -> Self {
        if self.v < o.v {
            self
        } else if o.v < self.v {
            o
        } else {
            Dual { v: self.v, d: self.d.min(o.d) }
        }
    }
    fn max(self, o: Self) -> Self {
        if self.v > o.v {
            self
        } else if o.v > self.v {
            o
        } else {
            Dual { v: self.v, d: self.d.max(o.d) }
        }
    }
}

pub(super) const NON_FINITE: &str = "non-finite value";

pub(super) struct Walker<'a> {
    pub vars: &'a [String],
    /// Set when evaluation passed exactly through an abs/min/max/ifpos kink.
    pub kink: bool,
}

impl Walker<'_> {
    fn domain(&self, node: &Node, message: &str) -> ExprError {
        ExprError::Domain {
            subexpression: super::print_node(node, self.vars),
            message: message.to_string(),
        }
    }

    fn check<T: Real>(&self, node: &Node, r: T) -> Result<T, ExprError> {
        if !r.val().is_finite() {
            return Err(self.domain(node, NON_FINITE));
        }
        if !r.der().is_finite() {
            return Err(self.domain(node, "non-finite derivative"));
        }
        Ok(r)
    }

    pub fn eval<T: Real>(&mut self, node: &Node, point: &[T]) -> Result<T, ExprError> {
        let r = match node {
            Node::Const(v) => T::cst(*v),
            Node::Var(i) => point[*i],
            Node::Neg(a) => self.eval(a, point)?.neg(),
            Node::Binary(op, a, b) => {
                let x = self.eval(a, point)?;
                let y = self.eval(b, point)?;
                match op {
                    BinOp::Add => x.add(y),
                    BinOp::Sub => x.sub(y),
                    BinOp::Mul => x.mul(y),
                    BinOp::Div => {
                        if y.val() == 0.0 {
                            return Err(self.domain(node, "division by zero"));
                        }
                        x.div(y)
                    }
                    BinOp::Pow => {
                        let (base, e) = (x.val(), y.val());
                        if base == 0.0 && e < 0.0 {
                            return Err(self.domain(node, "zero raised to a negative power"));
                        }
                        if base < 0.0 && e.fract() != 0.0 {
                            return Err(self.domain(
                                node,
                                "negative base with non-integer exponent (use cbrt for odd roots)",
                            ));
                        }
                        if y.der() != 0.0 && base <= 0.0 {
                            return Err(self.domain(
                                node,
                                "exponent depends on a variable but the base is not positive",
                            ));
                        }
                        x.pow(y)
                    }
                }
            }
            Node::Call(f, args) => self.call(node, *f, args, point)?,
        };
        self.check(node, r)
    }

    fn call<T: Real>(
        &mut self,
        node: &Node,
        f: Func,
        args: &[Node],
        point: &[T],
    ) -> Result<T, ExprError> {
        if f == Func::IfPos {
            let c = self.eval(&args[0], point)?;
            if c.val() == 0.0 {
                self.kink = true;
            }
            let branch = if c.val() > 0.0 { &args[1] } else { &args[2] };
            return self.eval(branch, point);
        }
        let a = self.eval(&args[0], point)?;
        Ok(match f {
            Func::Abs => {
                if a.val() == 0.0 {
                    self.kink = true;
                }
                a.abs()
            }
            Func::Exp => a.exp(),
            Func::Ln => {
                if a.val() <= 0.0 {
                    return Err(self.domain(node, "logarithm of a non-positive number"));
                }
                a.ln()
            }
            Func::Sqrt => {
                if a.val() < 0.0 {
                    return Err(self.domain(node, "square root of a negative number"));
                }
                a.sqrt()
            }
            Func::Cbrt => a.cbrt(),
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Min | Func::Max => {
                let mut acc = a;
                for arg in &args[1..] {
                    let b = self.eval(arg, point)?;
                    if b.val() == acc.val() {
                        self.kink = true;
                    }
                    acc = if f == Func::Min { acc.min(b) } else { acc.max(b) };
                }
                acc
            }
            Func::IfPos => unreachable!(),
        })
    }
}
