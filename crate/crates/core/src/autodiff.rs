// SPDX-License-Identifier: Apache-2.0

//! Scalar-node reverse-mode automatic differentiation.
//!
//! Every primitive appends one node to a [`Tape`], storing its forward value
//! and the local partial derivatives with respect to its operands. A single
//! reverse sweep ([`Tape::backward`]) then yields the adjoint of every node.
//!
//! Second derivatives are obtained tape-over-tape: [`Tape::grad_graph`]
//! records the adjoint computation itself as new nodes on the same tape, so
//! the resulting gradient nodes can be differentiated again.
//!
//! ```
//! use pinn_core::autodiff::Tape;
//!
//! let mut tape = Tape::new();
//! let x = tape.var(2.0);
//! let y = tape.powi(x, 3).unwrap();
//! let dy = tape.grad_graph(y, &[x]).unwrap()[0];
//! assert_eq!(tape.value(dy), 12.0);
//! let d2y = tape.backward(dy).unwrap().get(x);
//! assert_eq!(d2y, 12.0);
//! ```
//!
//! Conventions at non-differentiable points: `abs'(0) = 0`, and `max` at a
//! tie passes the whole adjoint to its first operand.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{PinnError, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Primitive operations understood by the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Tanh,
    Exp,
    Ln,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Sqrt,
    PowI(i32),
    Abs,
    Max,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Leaf | Op::Const => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Max => 2,
            _ => 1,
        }
    }
}

/// Reference to a node on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    args: [usize; 2],
    value: f64,
    partials: [f64; 2],
}

/// Append-only record of scalar operations.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Evaluate one primitive, returning its value and local partials.
fn eval_op(op: Op, a: f64, b: f64) -> Result<(f64, [f64; 2])> {
    let out = match op {
        Op::Leaf | Op::Const => (a, [0.0, 0.0]),
        Op::Add => (a + b, [1.0, 1.0]),
        Op::Sub => (a - b, [1.0, -1.0]),
        Op::Mul => (a * b, [b, a]),
        Op::Div => {
            if b == 0.0 {
                return Err(PinnError::Eval(format!("division by zero ({a} / 0)")));
            }
            let y = a / b;
            (y, [1.0 / b, -y / b])
        }
        Op::Neg => (-a, [-1.0, 0.0]),
        Op::Tanh => {
            let y = a.tanh();
            (y, [1.0 - y * y, 0.0])
        }
        Op::Exp => {
            let y = a.exp();
            (y, [y, 0.0])
        }
        Op::Ln => {
            if a <= 0.0 {
                return Err(PinnError::Eval(format!("ln of non-positive value {a}")));
            }
            (a.ln(), [1.0 / a, 0.0])
        }
        Op::Sin => (a.sin(), [a.cos(), 0.0]),
        Op::Cos => (a.cos(), [-a.sin(), 0.0]),
        Op::Sinh => (a.sinh(), [a.cosh(), 0.0]),
        Op::Cosh => (a.cosh(), [a.sinh(), 0.0]),
        Op::Sqrt => {
            if a < 0.0 {
                return Err(PinnError::Eval(format!("sqrt of negative value {a}")));
            }
            let y = a.sqrt();
            if y == 0.0 {
                return Err(PinnError::Eval("sqrt is not differentiable at 0".into()));
            }
            (y, [0.5 / y, 0.0])
        }
        Op::PowI(n) => {
            if n < 0 && a == 0.0 {
                return Err(PinnError::Eval(format!("0 raised to negative power {n}")));
            }
            let d = if n == 0 { 0.0 } else { f64::from(n) * a.powi(n - 1) };
            (a.powi(n), [d, 0.0])
        }
        Op::Abs => {
            let s = if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            };
            (a.abs(), [s, 0.0])
        }
        Op::Max => {
            if a >= b {
                (a, [1.0, 0.0])
            } else {
                (b, [0.0, 1.0])
            }
        }
    };
    if !out.0.is_finite() || !out.1[0].is_finite() || !out.1[1].is_finite() {
        return Err(PinnError::Eval(format!(
            "{op:?} produced a non-finite result from ({a}, {b})"
        )));
    }
    Ok(out)
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: fresh_id(),
            nodes: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            id: fresh_id(),
            nodes: Vec::with_capacity(n),
        }
    }

    /// Drop all nodes but keep the allocation. Vars issued before the clear
    /// are invalidated.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.id = fresh_id();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn owns(&self, v: Var) -> bool {
        v.tape == self.id && v.index < self.nodes.len()
    }

    fn check(&self, v: Var) -> Result<()> {
        if self.owns(v) {
            Ok(())
        } else {
            Err(PinnError::Usage(format!(
                "node {} does not belong to this tape",
                v.index
            )))
        }
    }

    fn push(&mut self, op: Op, args: [usize; 2], value: f64, partials: [f64; 2]) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node {
            op,
            args,
            value,
            partials,
        });
        Var {
            tape: self.id,
            index,
        }
    }

    /// New independent variable (a leaf gradients are taken with respect to).
    pub fn var(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, [0, 0], value, [0.0, 0.0])
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, [0, 0], value, [0.0, 0.0])
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index].value
    }

    pub fn op(&self, v: Var) -> Op {
        self.nodes[v.index].op
    }

    /// Record one primitive applied to operands already on the tape.
    pub fn record(&mut self, op: Op, operands: &[Var]) -> Result<Var> {
        if matches!(op, Op::Leaf | Op::Const) {
            return Err(PinnError::Usage(
                "leaves and constants are created with var()/constant()".into(),
            ));
        }
        if operands.len() != op.arity() {
            return Err(PinnError::Usage(format!(
                "{op:?} expects {} operands, got {}",
                op.arity(),
                operands.len()
            )));
        }
        for &v in operands {
            self.check(v)?;
        }
        let a = self.nodes[operands[0].index].value;
        let (b, bi) = match operands.get(1) {
            Some(v) => (self.nodes[v.index].value, v.index),
            None => (0.0, 0),
        };
        let (value, partials) = eval_op(op, a, b)?;
        Ok(self.push(op, [operands[0].index, bi], value, partials))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Div, &[a, b])
    }
    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Neg, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Tanh, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp, &[a])
    }
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Ln, &[a])
    }
    pub fn sin(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sin, &[a])
    }
    pub fn cos(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Cos, &[a])
    }
    pub fn sinh(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sinh, &[a])
    }
    pub fn cosh(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Cosh, &[a])
    }
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sqrt, &[a])
    }
    pub fn powi(&mut self, a: Var, n: i32) -> Result<Var> {
        self.record(Op::PowI(n), &[a])
    }
    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Abs, &[a])
    }
    pub fn max(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Max, &[a, b])
    }

    /// `c * a` for a plain constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let k = self.constant(c);
        self.mul(k, a)
    }

    /// `a + c` for a plain constant `c`.
    pub fn shift(&mut self, a: Var, c: f64) -> Result<Var> {
        let k = self.constant(c);
        self.add(a, k)
    }

    /// Sum of several nodes; the empty sum is the constant 0.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let Some((&first, rest)) = terms.split_first() else {
            return Ok(self.constant(0.0));
        };
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// One reverse sweep from `output`, returning the adjoint of every node
    /// recorded up to and including it.
    pub fn backward(&self, output: Var) -> Result<Gradient> {
        self.check(output)?;
        let mut adj = vec![0.0; output.index + 1];
        adj[output.index] = 1.0;
        for i in (0..=output.index).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            match node.op.arity() {
                0 => {}
                1 => adj[node.args[0]] += a * node.partials[0],
                _ => {
                    adj[node.args[0]] += a * node.partials[0];
                    adj[node.args[1]] += a * node.partials[1];
                }
            }
        }
        Ok(Gradient {
            tape: self.id,
            adjoints: adj,
        })
    }

    /// Gradient of `output` with respect to `wrt`, recorded as new nodes on
    /// this tape so it can be differentiated again.
    pub fn grad_graph(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.check(output)?;
        for &w in wrt {
            self.check(w)?;
        }
        let n = output.index + 1;
        let mut adj: Vec<Option<Var>> = vec![None; n];
        adj[output.index] = Some(self.constant(1.0));
        for i in (0..n).rev() {
            let Some(a) = adj[i] else { continue };
            let Node { op, args, .. } = self.nodes[i].clone();
            let this = Var {
                tape: self.id,
                index: i,
            };
            let x0 = Var {
                tape: self.id,
                index: args[0],
            };
            let x1 = Var {
                tape: self.id,
                index: args[1],
            };
            let mut contrib: [Option<Var>; 2] = [None, None];
            match op {
                Op::Leaf | Op::Const => {}
                Op::Add => contrib = [Some(a), Some(a)],
                Op::Sub => contrib = [Some(a), Some(self.neg(a)?)],
                Op::Mul => contrib = [Some(self.mul(a, x1)?), Some(self.mul(a, x0)?)],
                Op::Div => {
                    let da = self.div(a, x1)?;
                    let ay = self.mul(a, this)?;
                    let q = self.div(ay, x1)?;
                    contrib = [Some(da), Some(self.neg(q)?)];
                }
                Op::Neg => contrib[0] = Some(self.neg(a)?),
                Op::Tanh => {
                    let y2 = self.mul(this, this)?;
                    let one = self.constant(1.0);
                    let s = self.sub(one, y2)?;
                    contrib[0] = Some(self.mul(a, s)?);
                }
                Op::Exp => contrib[0] = Some(self.mul(a, this)?),
                Op::Ln => contrib[0] = Some(self.div(a, x0)?),
                Op::Sin => {
                    let c = self.cos(x0)?;
                    contrib[0] = Some(self.mul(a, c)?);
                }
                Op::Cos => {
                    let s = self.sin(x0)?;
                    let as_ = self.mul(a, s)?;
                    contrib[0] = Some(self.neg(as_)?);
                }
                Op::Sinh => {
                    let c = self.cosh(x0)?;
                    contrib[0] = Some(self.mul(a, c)?);
                }
                Op::Cosh => {
                    let s = self.sinh(x0)?;
                    contrib[0] = Some(self.mul(a, s)?);
                }
                Op::Sqrt => {
                    let two_y = self.scale(this, 2.0)?;
                    contrib[0] = Some(self.div(a, two_y)?);
                }
                Op::PowI(k) => {
                    contrib[0] = match k {
                        0 => None,
                        1 => Some(a),
                        _ => {
                            let p = self.powi(x0, k - 1)?;
                            let kp = self.scale(p, f64::from(k))?;
                            Some(self.mul(a, kp)?)
                        }
                    }
                }
                Op::Abs | Op::Max => {
                    // Piecewise-linear: the local partials are constants.
                    let p = self.nodes[i].partials;
                    for (slot, &pk) in contrib.iter_mut().zip(p.iter()).take(op.arity()) {
                        if pk != 0.0 {
                            *slot = Some(self.scale(a, pk)?);
                        }
                    }
                }
            }
            for (k, c) in contrib.into_iter().enumerate().take(op.arity()) {
                let Some(c) = c else { continue };
                let target = args[k];
                adj[target] = Some(match adj[target] {
                    Some(prev) => self.add(prev, c)?,
                    None => c,
                });
            }
        }
        Ok(wrt
            .iter()
            .map(|w| match adj.get(w.index).copied().flatten() {
                Some(v) => v,
                None => self.constant(0.0),
            })
            .collect())
    }

    /// Recompute every node's value from the recorded operations.
    pub fn replay(&self) -> Result<Vec<f64>> {
        let mut values: Vec<f64> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op.arity() {
                0 => node.value,
                1 => eval_op(node.op, values[node.args[0]], 0.0)?.0,
                _ => eval_op(node.op, values[node.args[0]], values[node.args[1]])?.0,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Structural check: every operand index precedes its node.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.args[..n.op.arity()].iter().all(|&a| a < i))
    }
}

/// Adjoints from one reverse sweep.
#[derive(Clone, Debug)]
pub struct Gradient {
    tape: u64,
    adjoints: Vec<f64>,
}

impl Gradient {
    /// Partial derivative of the swept output with respect to `v`. Nodes
    /// recorded after the output have zero adjoint.
    pub fn get(&self, v: Var) -> f64 {
        debug_assert_eq!(v.tape, self.tape, "var from a different tape");
        self.adjoints.get(v.index).copied().unwrap_or(0.0)
    }

    pub fn wrt(&self, vars: &[Var]) -> Vec<f64> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

/// Value and gradient of `f` at `x`.
pub fn value_and_gradient<F>(f: F, x: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = x.iter().map(|&xi| tape.var(xi)).collect();
    let y = f(&mut tape, &vars)?;
    let g = tape.backward(y)?;
    Ok((tape.value(y), g.wrt(&vars)))
}

/// `∂²f / ∂x_i ∂x_j` at `x`, by differentiating the recorded gradient.
pub fn derivative_of_gradient<F>(f: F, x: &[f64], i: usize, j: usize) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if i >= x.len() || j >= x.len() {
        return Err(PinnError::Usage(format!(
            "index ({i}, {j}) out of range for {} inputs",
            x.len()
        )));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = x.iter().map(|&xi| tape.var(xi)).collect();
    let y = f(&mut tape, &vars)?;
    let gi = tape.grad_graph(y, &[vars[i]])?[0];
    Ok(tape.backward(gi)?.get(vars[j]))
}
