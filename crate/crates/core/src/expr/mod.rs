//! Scalar and vector expressions over named variables.
//!
//! Expressions are parsed once into an immutable tree and evaluated by a
//! tree walker. Gradients use forward-mode dual numbers, one pass per
//! variable, so they are exact up to floating-point rounding.
//!
//! Supported syntax: `+ - * / ^`, unary minus, parentheses, numeric literals
//! and the functions `abs exp ln sqrt cbrt sin cos min max ifpos`.
//! `ifpos(c, a, b)` evaluates `a` when `c > 0` and `b` otherwise; only the
//! selected branch is evaluated, which makes piecewise definitions such as
//! `ifpos(x, exp(-1/x), 0)` well defined at the seam.

mod eval;
mod parse;

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use eval::{Dual, Walker};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("domain error in `{subexpression}`: {message}")]
    Domain { subexpression: String, message: String },
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
}

impl ExprError {
    /// True for a non-finite intermediate value, as opposed to a genuine
    /// domain violation such as a logarithm of a negative number.
    pub fn is_overflow(&self) -> bool {
        matches!(self, ExprError::Domain { message, .. } if message == eval::NON_FINITE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Func {
    Abs,
    Exp,
    Ln,
    Sqrt,
    Cbrt,
    Sin,
    Cos,
    Min,
    Max,
    IfPos,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "cbrt" => Func::Cbrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            "ifpos" => Func::IfPos,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Cbrt => "cbrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Min => "min",
            Func::Max => "max",
            Func::IfPos => "ifpos",
        }
    }

    fn accepts(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 2,
            Func::IfPos => n == 3,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

fn write_node(out: &mut String, node: &Node, vars: &[String]) {
    match node {
        Node::Const(v) => {
            if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                out.push_str(&format!("(-{:?})", -v));
            } else {
                out.push_str(&format!("{v:?}"));
            }
        }
        Node::Var(i) => out.push_str(&vars[*i]),
        Node::Neg(a) => {
            out.push_str("(-");
            write_node(out, a, vars);
            out.push(')');
        }
        Node::Binary(op, a, b) => {
            let sym = match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => " * ",
                BinOp::Div => " / ",
                BinOp::Pow => "^",
            };
            out.push('(');
            write_node(out, a, vars);
            out.push_str(sym);
            write_node(out, b, vars);
            out.push(')');
        }
        Node::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_node(out, a, vars);
            }
            out.push(')');
        }
    }
}

pub(crate) fn print_node(node: &Node, vars: &[String]) -> String {
    let mut s = String::new();
    write_node(&mut s, node, vars);
    s
}

/// Gradient together with a flag telling whether a kink (abs at 0, tied
/// min/max arguments, `ifpos` at a zero condition) was crossed. At a kink
/// the components are right-sided directional derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub nondifferentiable: bool,
}

/// A parsed scalar expression with an ordered variable list.
#[derive(Clone, PartialEq)]
pub struct ExprFunction {
    source: String,
    variables: Vec<String>,
    ast: Node,
}

impl ExprFunction {
    pub fn parse<S: AsRef<str>>(source: &str, variables: &[S]) -> Result<Self, ExprError> {
        let variables: Vec<String> = variables.iter().map(|v| v.as_ref().to_string()).collect();
        let ast = parse::Parser::parse(source, &variables)?;
        Ok(ExprFunction {
            source: source.to_string(),
            variables,
            ast,
        })
    }

    /// A constant expression over the given variables.
    pub fn constant<S: AsRef<str>>(value: f64, variables: &[S]) -> Self {
        let variables: Vec<String> = variables.iter().map(|v| v.as_ref().to_string()).collect();
        let ast = Node::Const(value);
        ExprFunction {
            source: print_node(&ast, &variables),
            variables,
            ast,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Fully parenthesized canonical text; parses back to an equivalent tree.
    pub fn print(&self) -> String {
        print_node(&self.ast, &self.variables)
    }

    /// Indices of variables that actually occur in the expression.
    pub fn free_variables(&self) -> Vec<usize> {
        fn walk(n: &Node, seen: &mut Vec<bool>) {
            match n {
                Node::Const(_) => {}
                Node::Var(i) => seen[*i] = true,
                Node::Neg(a) => walk(a, seen),
                Node::Binary(_, a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, seen)),
            }
        }
        let mut seen = vec![false; self.variables.len()];
        walk(&self.ast, &mut seen);
        (0..seen.len()).filter(|&i| seen[i]).collect()
    }

    fn check_arity(&self, point: &[f64]) -> Result<(), ExprError> {
        if point.len() != self.variables.len() {
            return Err(ExprError::Arity {
                expected: self.variables.len(),
                got: point.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.check_arity(point)?;
        Walker { vars: &self.variables, kink: false }.eval(&self.ast, point)
    }

    /// Value and directional derivative along `direction`.
    pub fn eval_directional(
        &self,
        point: &[f64],
        direction: &[f64],
    ) -> Result<(f64, f64, bool), ExprError> {
        self.check_arity(point)?;
        self.check_arity(direction)?;
        let duals: Vec<Dual> = point
            .iter()
            .zip(direction)
            .map(|(&v, &d)| Dual { v, d })
            .collect();
        let mut w = Walker { vars: &self.variables, kink: false };
        let r = w.eval(&self.ast, &duals)?;
        Ok((r.v, r.d, w.kink))
    }

    pub fn grad(&self, point: &[f64]) -> Result<Gradient, ExprError> {
        self.value_and_grad(point).map(|(_, g)| g)
    }

    pub fn value_and_grad(&self, point: &[f64]) -> Result<(f64, Gradient), ExprError> {
        self.check_arity(point)?;
        let n = point.len();
        let mut values = Vec::with_capacity(n);
        let mut kink = false;
        let mut value = None;
        for i in 0..n {
            let duals: Vec<Dual> = point
                .iter()
                .enumerate()
                .map(|(j, &v)| Dual { v, d: if i == j { 1.0 } else { 0.0 } })
                .collect();
            let mut w = Walker { vars: &self.variables, kink: false };
            let r = w.eval(&self.ast, &duals)?;
            kink |= w.kink;
            value = Some(r.v);
            values.push(r.d);
        }
        let value = match value {
            Some(v) => v,
            None => self.eval(point)?,
        };
        Ok((value, Gradient { values, nondifferentiable: kink }))
    }
}

impl fmt::Debug for ExprFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExprFunction")
            .field("source", &self.source)
            .field("variables", &self.variables)
            .finish()
    }
}

impl fmt::Display for ExprFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for ExprFunction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

/// A vector or matrix of expressions sharing one variable list, stored
/// row-major with shape `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExprFunction {
    components: Vec<ExprFunction>,
    rows: usize,
    cols: usize,
}

impl VectorExprFunction {
    pub fn parse_vector<S: AsRef<str>, V: AsRef<str>>(
        sources: &[S],
        variables: &[V],
    ) -> Result<Self, ExprError> {
        let components = sources
            .iter()
            .map(|s| ExprFunction::parse(s.as_ref(), variables))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = components.len();
        Ok(VectorExprFunction { components, rows, cols: 1 })
    }

    /// Parses a matrix given as a list of rows.
    pub fn parse_matrix<S: AsRef<str>, V: AsRef<str>>(
        rows: &[Vec<S>],
        cols: usize,
        variables: &[V],
    ) -> Result<Self, ExprError> {
        let mut components = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(ExprError::Syntax {
                    position: 0,
                    message: format!("matrix row {r} has {} entries, expected {cols}", row.len()),
                });
            }
            for s in row {
                components.push(ExprFunction::parse(s.as_ref(), variables)?);
            }
        }
        Ok(VectorExprFunction { components, rows: rows.len(), cols })
    }

    pub fn from_components(components: Vec<ExprFunction>, rows: usize, cols: usize) -> Self {
        assert_eq!(components.len(), rows * cols, "component count must equal rows*cols");
        VectorExprFunction { components, rows, cols }
    }

    /// All-zero `rows × cols` function over the given variables.
    pub fn zeros<V: AsRef<str>>(rows: usize, cols: usize, variables: &[V]) -> Self {
        let components = (0..rows * cols)
            .map(|_| ExprFunction::constant(0.0, variables))
            .collect();
        VectorExprFunction { components, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn components(&self) -> &[ExprFunction] {
        &self.components
    }

    pub fn variables(&self) -> &[String] {
        self.components.first().map(|c| c.variables()).unwrap_or(&[])
    }

    /// Row-major values.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }

    /// Whether every component is the literal constant zero.
    pub fn is_identically_zero(&self) -> bool {
        self.components.iter().all(|c| c.ast == Node::Const(0.0))
    }
}

impl Serialize for VectorExprFunction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let sources: Vec<&str> = self.components.iter().map(|c| c.source()).collect();
        sources.serialize(s)
    }
}
