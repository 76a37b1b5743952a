use alloc::vec::Vec;

use super::{BinOp, EvalError, Func, Node};

const STACK: usize = 64;

/// Stack size for the common shallow expressions.
const SHALLOW: usize = 16;

/// Flat instruction set. The top of the stack lives in an accumulator;
/// `*S` variants pop their left operand, `*C` take a constant and `*L` a
/// slot as right operand.
#[derive(Debug, Clone, Copy)]
enum Op {
    Push(f64),
    Load(u32),
    /// Pushes `c·slot`.
    Scaled(f64, u32),
    Neg,
    AddS,
    AddC(f64),
    AddL(u32),
    SubS,
    SubC(f64),
    SubL(u32),
    MulS,
    MulC(f64),
    MulL(u32),
    DivS,
    DivC(f64),
    DivL(u32),
    PowS,
    PowC(f64),
    PowL(u32),
    Min,
    Max,
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

/// Postfix form of an expression tree, run on a fixed-size stack.
#[derive(Debug, Clone)]
pub(super) struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    /// Returns `None` if the tree needs more than the fixed stack.
    pub(super) fn compile(root: &Node) -> Option<Program> {
        let mut ops = Vec::new();
        let depth = emit(root, &mut ops);
        (depth <= STACK).then(|| Program { ops: fuse(ops), depth })
    }

    pub(super) fn run(&self, slots: &[f64]) -> Result<f64, EvalError> {
        if self.depth <= SHALLOW {
            self.run_on::<SHALLOW>(slots)
        } else {
            self.run_on::<STACK>(slots)
        }
    }

    /// Every push spills the accumulator, so the bottom cell holds a dummy
    /// and `depth` cells suffice.
    fn run_on<const N: usize>(&self, slots: &[f64]) -> Result<f64, EvalError> {
        let mut stack = [0.0f64; N];
        let mut sp = 0usize;
        let mut acc = 0.0f64;
        let slot = |i: u32| slots.get(i as usize).copied().unwrap_or(0.0);
        macro_rules! push {
            ($v:expr) => {{
                let v = $v;
                stack[sp] = acc;
                sp += 1;
                acc = v;
            }};
        }
        macro_rules! pop {
            () => {{
                sp -= 1;
                stack[sp]
            }};
        }
        for op in &self.ops {
            match *op {
                Op::Push(v) => push!(v),
                Op::Load(i) => push!(slot(i)),
                Op::Scaled(c, i) => push!(c * slot(i)),
                Op::Neg => acc = -acc,
                Op::AddS => acc += pop!(),
                Op::AddC(c) => acc += c,
                Op::AddL(i) => acc += slot(i),
                Op::SubS => acc = pop!() - acc,
                Op::SubC(c) => acc -= c,
                Op::SubL(i) => acc -= slot(i),
                Op::MulS => acc *= pop!(),
                Op::MulC(c) => acc *= c,
                Op::MulL(i) => acc *= slot(i),
                Op::DivS => acc = div(pop!(), acc)?,
                Op::DivC(c) => acc = div(acc, c)?,
                Op::DivL(i) => acc = div(acc, slot(i))?,
                Op::PowS => acc = pow(pop!(), acc)?,
                Op::PowC(c) => acc = pow(acc, c)?,
                Op::PowL(i) => acc = pow(acc, slot(i))?,
                Op::Min => acc = pop!().min(acc),
                Op::Max => acc = pop!().max(acc),
                Op::Exp => acc = libm::exp(acc),
                Op::Ln => {
                    if acc <= 0.0 {
                        return Err(EvalError::Domain {
                            function: "ln",
                            argument: acc,
                        });
                    }
                    acc = libm::log(acc);
                }
                Op::Sin => acc = libm::sin(acc),
                Op::Cos => acc = libm::cos(acc),
                Op::Sqrt => {
                    if acc < 0.0 {
                        return Err(EvalError::Domain {
                            function: "sqrt",
                            argument: acc,
                        });
                    }
                    acc = libm::sqrt(acc);
                }
                Op::Abs => acc = libm::fabs(acc),
            }
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn div(l: f64, r: f64) -> Result<f64, EvalError> {
    if r == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(l / r)
}

fn pow(l: f64, r: f64) -> Result<f64, EvalError> {
    let v = libm::pow(l, r);
    if v.is_nan() {
        return Err(EvalError::Domain {
            function: "^",
            argument: l,
        });
    }
    Ok(v)
}

/// Operand of a binary operator as seen by the fuser.
#[derive(Clone, Copy)]
enum Rhs {
    Stack,
    Const(f64),
    Slot(u32),
}

fn arith(op: BinOp, r: Rhs) -> Op {
    match (op, r) {
        (BinOp::Add, Rhs::Stack) => Op::AddS,
        (BinOp::Add, Rhs::Const(c)) => Op::AddC(c),
        (BinOp::Add, Rhs::Slot(i)) => Op::AddL(i),
        (BinOp::Sub, Rhs::Stack) => Op::SubS,
        (BinOp::Sub, Rhs::Const(c)) => Op::SubC(c),
        (BinOp::Sub, Rhs::Slot(i)) => Op::SubL(i),
        (BinOp::Mul, Rhs::Stack) => Op::MulS,
        (BinOp::Mul, Rhs::Const(c)) => Op::MulC(c),
        (BinOp::Mul, Rhs::Slot(i)) => Op::MulL(i),
        (BinOp::Div, Rhs::Stack) => Op::DivS,
        (BinOp::Div, Rhs::Const(c)) => Op::DivC(c),
        (BinOp::Div, Rhs::Slot(i)) => Op::DivL(i),
        (BinOp::Pow, Rhs::Stack) => Op::PowS,
        (BinOp::Pow, Rhs::Const(c)) => Op::PowC(c),
        (BinOp::Pow, Rhs::Slot(i)) => Op::PowL(i),
    }
}

/// Folds an operand push directly followed by a binary operator into one
/// instruction, and `c·slot` into a single push. Depth can only shrink.
fn fuse(ops: Vec<(Op, Option<BinOp>)>) -> Vec<Op> {
    let mut out: Vec<Op> = Vec::with_capacity(ops.len());
    for (op, bin) in ops {
        let Some(b) = bin else {
            out.push(op);
            continue;
        };
        let rhs = match out.last().copied() {
            Some(Op::Push(c)) if out.len() >= 2 => Rhs::Const(c),
            Some(Op::Load(i)) if out.len() >= 2 => Rhs::Slot(i),
            _ => Rhs::Stack,
        };
        if matches!(rhs, Rhs::Stack) {
            out.push(arith(b, rhs));
            continue;
        }
        out.pop();
        // `Push(c); Mul(slot)` pushes `c·slot` directly.
        match (out.last().copied(), b, rhs) {
            (Some(Op::Push(c)), BinOp::Mul, Rhs::Slot(i)) => {
                out.pop();
                out.push(Op::Scaled(c, i));
            }
            _ => out.push(arith(b, rhs)),
        }
    }
    out
}

/// Emits postfix code and returns the stack depth the subtree needs.
/// Binary operators are emitted as placeholders tagged with their operator.
fn emit(node: &Node, ops: &mut Vec<(Op, Option<BinOp>)>) -> usize {
    match node {
        Node::Number(v) => {
            ops.push((Op::Push(*v), None));
            1
        }
        Node::Var(i) => {
            ops.push((Op::Load(*i as u32), None));
            1
        }
        Node::Neg(inner) => {
            let d = emit(inner, ops);
            ops.push((Op::Neg, None));
            d
        }
        Node::Binary(op, l, r) => {
            let dl = emit(l, ops);
            let dr = emit(r, ops);
            ops.push((Op::AddS, Some(*op)));
            dl.max(dr + 1)
        }
        Node::Call(func, args) => {
            let mut depth = 0;
            for (i, a) in args.iter().enumerate() {
                depth = depth.max(emit(a, ops) + i);
            }
            let op = match func {
                Func::Exp => Op::Exp,
                Func::Ln => Op::Ln,
                Func::Sin => Op::Sin,
                Func::Cos => Op::Cos,
                Func::Sqrt => Op::Sqrt,
                Func::Abs => Op::Abs,
                Func::Min => Op::Min,
                Func::Max => Op::Max,
            };
            ops.push((op, None));
            depth
        }
    }
}
