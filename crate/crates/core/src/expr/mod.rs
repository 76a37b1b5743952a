//! Arithmetic expressions used to define scenario fields.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | name '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-2^2 = -4` and `2^3^2 = 512`. Functions: `exp ln sin cos sqrt abs`
//! (one argument) and `min max` (two). Constants: `pi`, `e`.
//!
//! A parsed [`Expression`] is immutable. Evaluation runs a compiled stack
//! program and is reentrant.

mod parser;
mod program;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use program::Program;

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    pub(crate) fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Abstract syntax tree node. Variables refer to a slot in the declared
/// variable list of the owning [`Expression`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Number(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Syntax errors, with the byte offset into the source.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    BadNumber(String),
    UnknownVariable(String),
    UnknownFunction(String),
    WrongArity {
        function: String,
        expected: usize,
        found: usize,
    },
    TooDeep,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedChar(c) => {
                write!(f, "unexpected character '{c}' at {}", self.position)
            }
            ParseErrorKind::UnexpectedToken(tok) => {
                write!(f, "unexpected '{tok}' at {}", self.position)
            }
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number '{s}' at {}", self.position),
            ParseErrorKind::UnknownVariable(name) => {
                write!(f, "unknown variable '{name}' at {}", self.position)
            }
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function '{name}' at {}", self.position)
            }
            ParseErrorKind::WrongArity {
                function,
                expected,
                found,
            } => write!(
                f,
                "function '{function}' takes {expected} argument(s), got {found} (at {})",
                self.position
            ),
            ParseErrorKind::TooDeep => write!(f, "expression nested too deeply"),
        }
    }
}

impl core::error::Error for ParseError {}

/// Evaluation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// A declared variable has no value in the bindings.
    Unbound(String),
    DivisionByZero,
    /// A function was applied outside of its real domain.
    Domain { function: &'static str, argument: f64 },
    /// The result overflowed or is otherwise not a finite real.
    NonFinite,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(name) => write!(f, "variable '{name}' is not bound"),
            EvalError::DivisionByZero => write!(f, "division by zero"),
            EvalError::Domain { function, argument } => {
                write!(f, "{function} is undefined at {argument}")
            }
            EvalError::NonFinite => write!(f, "result is not finite"),
        }
    }
}

impl core::error::Error for EvalError {}

/// A parsed arithmetic expression over a declared set of variables.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    vars: Vec<String>,
    program: Program,
}

impl Expression {
    /// Parses `src`, accepting only the variables listed in `allowed_vars`.
    /// Variable slots follow the order of `allowed_vars`.
    pub fn parse(src: &str, allowed_vars: &[&str]) -> Result<Expression, ParseError> {
        let root = parser::parse(src, allowed_vars)?;
        let program = Program::compile(&root).ok_or(ParseError {
            position: 0,
            kind: ParseErrorKind::TooDeep,
        })?;
        Ok(Expression {
            root,
            vars: allowed_vars.iter().map(|v| v.to_string()).collect(),
            program,
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// The declared variables, in slot order.
    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// Variables that actually occur in the expression.
    pub fn free_variables(&self) -> Vec<&str> {
        let mut used = alloc::vec![false; self.vars.len()];
        mark_vars(&self.root, &mut used);
        self.vars
            .iter()
            .zip(used)
            .filter(|(_, u)| *u)
            .map(|(v, _)| v.as_str())
            .collect()
    }

    /// Evaluates with named bindings.
    pub fn evaluate(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        let mut used = alloc::vec![false; self.vars.len()];
        mark_vars(&self.root, &mut used);
        let mut slots = alloc::vec![0.0; self.vars.len()];
        for (i, name) in self.vars.iter().enumerate() {
            match bindings.iter().find(|(n, _)| *n == name) {
                Some((_, value)) => slots[i] = *value,
                None if used[i] => return Err(EvalError::Unbound(name.clone())),
                None => {}
            }
        }
        self.eval_slots(&slots)
    }

    /// Evaluates with values given in slot order. Missing trailing slots
    /// read as zero.
    #[inline]
    pub fn eval_slots(&self, values: &[f64]) -> Result<f64, EvalError> {
        self.program.run(values)
    }
}

fn mark_vars(node: &Node, used: &mut [bool]) {
    match node {
        Node::Number(_) => {}
        Node::Var(i) => used[*i] = true,
        Node::Neg(inner) => mark_vars(inner, used),
        Node::Binary(_, l, r) => {
            mark_vars(l, used);
            mark_vars(r, used);
        }
        Node::Call(_, args) => args.iter().for_each(|a| mark_vars(a, used)),
    }
}

/// Prints a fully parenthesised form that parses back to the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

fn write_node(node: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Number(v) => write!(f, "{v:?}"),
        Node::Var(i) => f.write_str(&vars[*i]),
        Node::Neg(inner) => {
            f.write_str("(-")?;
            write_node(inner, vars, f)?;
            f.write_str(")")
        }
        Node::Binary(op, l, r) => {
            f.write_str("(")?;
            write_node(l, vars, f)?;
            write!(f, " {} ", op.symbol())?;
            write_node(r, vars, f)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_node(a, vars, f)?;
            }
            f.write_str(")")
        }
    }
}
