//! Reverse-mode differentiation over whole-grid operations.
//!
//! A [`Tape`] records nodes in evaluation order; every operand refers to an
//! earlier node, so the node list is already topologically sorted. Forward
//! values are computed eagerly when a node is recorded. After designating a
//! scalar output, [`Tape::backward`] sweeps the list once in reverse.
//!
//! Pooling nodes remember which input pixel won each window and route the
//! whole adjoint there (first extremum in row-major window order on ties).
//! ReLU passes the adjoint iff its forward input was strictly positive.
//!
//! One tape per evaluation; a tape is not shared between threads.

use crate::error::{Error, Result};
use crate::grid::{GridDomain, ScalarGrid};
use crate::transforms::morphology::{max_pool3_routed, min_pool3_routed};
use crate::transforms::SoftMorphology;

/// Handle to a recorded node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(f64),
    Grid(Vec<f64>),
}

impl Value {
    fn is_scalar(&self) -> bool {
        matches!(self, Value::Scalar(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Input,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Affine,
    Relu,
    MinPool3,
    MaxPool3,
    Sum,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Affine { x: NodeId, scale: f64 },
    Relu(NodeId),
    Pool { x: NodeId, route: Vec<Option<u32>> },
    Sum(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    kind: OpKind,
    op: Op,
    value: Value,
    needs_grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    domain: GridDomain,
    nodes: Vec<Node>,
    output: Option<NodeId>,
}

impl Tape {
    pub fn new(domain: GridDomain) -> Self {
        Self {
            domain,
            nodes: Vec::new(),
            output: None,
        }
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, kind: OpKind, op: Op, value: Value, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            kind,
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    fn check_grid(&self, grid: &ScalarGrid) -> Result<()> {
        self.domain.ensure_same(&grid.domain())
    }

    /// A grid we want the gradient of.
    pub fn input(&mut self, grid: &ScalarGrid) -> Result<NodeId> {
        self.check_grid(grid)?;
        Ok(self.push(
            OpKind::Input,
            Op::Leaf,
            Value::Grid(grid.values().to_vec()),
            true,
        ))
    }

    /// A grid treated as a constant; no gradient flows into it.
    pub fn constant(&mut self, grid: &ScalarGrid) -> Result<NodeId> {
        self.check_grid(grid)?;
        Ok(self.push(
            OpKind::Constant,
            Op::Leaf,
            Value::Grid(grid.values().to_vec()),
            false,
        ))
    }

    pub fn scalar_input(&mut self, v: f64) -> NodeId {
        self.push(OpKind::Input, Op::Leaf, Value::Scalar(v), true)
    }

    pub fn scalar_constant(&mut self, v: f64) -> NodeId {
        self.push(OpKind::Constant, Op::Leaf, Value::Scalar(v), false)
    }

    fn binary(
        &mut self,
        kind: OpKind,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        let (na, nb) = (self.node(a), self.node(b));
        let value = match (&na.value, &nb.value) {
            (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(f(*x, *y)),
            (Value::Grid(x), Value::Grid(y)) => {
                Value::Grid(x.iter().zip(y).map(|(p, q)| f(*p, *q)).collect())
            }
            _ => {
                return Err(Error::param(format!(
                    "{kind:?} needs two scalars or two grids"
                )))
            }
        };
        let needs_grad = na.needs_grad || nb.needs_grad;
        let op = match kind {
            OpKind::Add => Op::Add(a, b),
            OpKind::Sub => Op::Sub(a, b),
            OpKind::Mul => Op::Mul(a, b),
            OpKind::Div => Op::Div(a, b),
            _ => unreachable!("not a binary op"),
        };
        Ok(self.push(kind, op, value, needs_grad))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(OpKind::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(OpKind::Sub, a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(OpKind::Mul, a, b, |x, y| x * y)
    }

    /// Pointwise quotient. Callers smooth denominators; a non-finite result
    /// is rejected.
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let id = self.binary(OpKind::Div, a, b, |x, y| x / y)?;
        let finite = match &self.node(id).value {
            Value::Scalar(v) => v.is_finite(),
            Value::Grid(g) => g.iter().all(|v| v.is_finite()),
        };
        if !finite {
            self.nodes.pop();
            return Err(Error::param("division produced a non-finite value"));
        }
        Ok(id)
    }

    /// `scale * x + offset`.
    pub fn affine(&mut self, x: NodeId, scale: f64, offset: f64) -> NodeId {
        let n = self.node(x);
        let value = match &n.value {
            Value::Scalar(v) => Value::Scalar(scale * v + offset),
            Value::Grid(g) => Value::Grid(g.iter().map(|v| scale * v + offset).collect()),
        };
        let needs_grad = n.needs_grad;
        self.push(OpKind::Affine, Op::Affine { x, scale }, value, needs_grad)
    }

    pub fn smul(&mut self, x: NodeId, scale: f64) -> NodeId {
        self.affine(x, scale, 0.0)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let n = self.node(x);
        let value = match &n.value {
            Value::Scalar(v) => Value::Scalar(v.max(0.0)),
            Value::Grid(g) => Value::Grid(g.iter().map(|v| v.max(0.0)).collect()),
        };
        let needs_grad = n.needs_grad;
        self.push(OpKind::Relu, Op::Relu(x), value, needs_grad)
    }

    fn pool(&mut self, kind: OpKind, x: NodeId) -> Result<NodeId> {
        let n = self.node(x);
        let Value::Grid(g) = &n.value else {
            return Err(Error::param("pooling needs a grid operand"));
        };
        let (out, route) = match kind {
            OpKind::MinPool3 => min_pool3_routed(g, self.domain),
            _ => max_pool3_routed(g, self.domain),
        };
        let needs_grad = n.needs_grad;
        Ok(self.push(kind, Op::Pool { x, route }, Value::Grid(out), needs_grad))
    }

    /// 3x3 min filter, zero padding.
    pub fn min_pool3(&mut self, x: NodeId) -> Result<NodeId> {
        self.pool(OpKind::MinPool3, x)
    }

    /// 3x3 max filter over in-grid pixels.
    pub fn max_pool3(&mut self, x: NodeId) -> Result<NodeId> {
        self.pool(OpKind::MaxPool3, x)
    }

    /// Sum of all pixels; a scalar passes through unchanged.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let n = self.node(x);
        let value = match &n.value {
            Value::Scalar(v) => Value::Scalar(*v),
            Value::Grid(g) => Value::Scalar(g.iter().sum()),
        };
        let needs_grad = n.needs_grad;
        self.push(OpKind::Sum, Op::Sum(x), value, needs_grad)
    }

    pub fn kind(&self, id: NodeId) -> OpKind {
        self.node(id).kind
    }

    pub fn value(&self, id: NodeId) -> &Value {
        &self.node(id).value
    }

    pub fn scalar(&self, id: NodeId) -> Option<f64> {
        match self.node(id).value {
            Value::Scalar(v) => Some(v),
            Value::Grid(_) => None,
        }
    }

    pub fn grid(&self, id: NodeId) -> Option<ScalarGrid> {
        match &self.node(id).value {
            Value::Grid(g) => ScalarGrid::new(self.domain, g.clone()).ok(),
            Value::Scalar(_) => None,
        }
    }

    /// Designates the scalar node that [`Tape::backward`] differentiates.
    pub fn set_output(&mut self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::TapeState(format!("unknown node {}", id.0)));
        }
        if !self.node(id).value.is_scalar() {
            return Err(Error::TapeState("the output node must be scalar".into()));
        }
        self.output = Some(id);
        Ok(())
    }

    pub fn output(&self) -> Option<NodeId> {
        self.output
    }

    /// Reverse sweep from the designated output.
    pub fn backward(&self) -> Result<Gradients> {
        let out = self.output.ok_or_else(|| {
            Error::TapeState("backward called before an output was designated".into())
        })?;
        let n = self.domain.len();
        let mut adj: Vec<Option<Value>> = vec![None; self.nodes.len()];
        adj[out.0] = Some(Value::Scalar(1.0));

        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            match &node.op {
                Op::Leaf => {
                    adj[i] = Some(g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, &self.nodes, *a, &g, |_| 1.0);
                    accumulate(&mut adj, &self.nodes, *b, &g, |_| 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, &self.nodes, *a, &g, |_| 1.0);
                    accumulate(&mut adj, &self.nodes, *b, &g, |_| -1.0);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate(&mut adj, &self.nodes, *a, &g, |k| at(vb, k));
                    accumulate(&mut adj, &self.nodes, *b, &g, |k| at(va, k));
                }
                Op::Div(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate(&mut adj, &self.nodes, *a, &g, |k| 1.0 / at(vb, k));
                    accumulate(&mut adj, &self.nodes, *b, &g, |k| {
                        let d = at(vb, k);
                        -at(va, k) / (d * d)
                    });
                }
                Op::Affine { x, scale } => {
                    let s = *scale;
                    accumulate(&mut adj, &self.nodes, *x, &g, |_| s);
                }
                Op::Relu(x) => {
                    let vx = &self.nodes[x.0].value;
                    accumulate(&mut adj, &self.nodes, *x, &g, |k| {
                        if at(vx, k) > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    });
                }
                Op::Pool { x, route } => {
                    if self.nodes[x.0].needs_grad {
                        let Value::Grid(gv) = &g else {
                            unreachable!("pool adjoint is a grid")
                        };
                        let slot = adj[x.0].get_or_insert_with(|| Value::Grid(vec![0.0; n]));
                        let Value::Grid(dst) = slot else {
                            unreachable!("pool operand is a grid")
                        };
                        for (k, r) in route.iter().enumerate() {
                            if let Some(j) = r {
                                dst[*j as usize] += gv[k];
                            }
                        }
                    }
                }
                Op::Sum(x) => {
                    let Value::Scalar(s) = g else {
                        unreachable!("sum adjoint is a scalar")
                    };
                    if self.nodes[x.0].needs_grad {
                        match &self.nodes[x.0].value {
                            Value::Scalar(_) => add_into(&mut adj[x.0], Value::Scalar(s)),
                            Value::Grid(_) => add_into(&mut adj[x.0], Value::Grid(vec![s; n])),
                        }
                    }
                }
            }
        }
        Ok(Gradients {
            domain: self.domain,
            adjoints: adj,
        })
    }
}

#[inline]
fn at(v: &Value, k: usize) -> f64 {
    match v {
        Value::Scalar(s) => *s,
        Value::Grid(g) => g[k],
    }
}

fn add_into(slot: &mut Option<Value>, v: Value) {
    match (slot.as_mut(), v) {
        (None, v) => *slot = Some(v),
        (Some(Value::Scalar(a)), Value::Scalar(b)) => *a += b,
        (Some(Value::Grid(a)), Value::Grid(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
        _ => unreachable!("adjoint shape matches its node"),
    }
}

/// `adj[target] += g * local(k)` elementwise.
fn accumulate(
    adj: &mut [Option<Value>],
    nodes: &[Node],
    target: NodeId,
    g: &Value,
    local: impl Fn(usize) -> f64,
) {
    if !nodes[target.0].needs_grad {
        return;
    }
    let contribution = match g {
        Value::Scalar(s) => Value::Scalar(s * local(0)),
        Value::Grid(gv) => Value::Grid(gv.iter().enumerate().map(|(k, x)| x * local(k)).collect()),
    };
    add_into(&mut adj[target.0], contribution);
}

/// Gradients of the designated output with respect to every input node.
#[derive(Debug)]
pub struct Gradients {
    domain: GridDomain,
    adjoints: Vec<Option<Value>>,
}

impl Gradients {
    /// Gradient with respect to a grid node. Nodes the output does not
    /// depend on get an all-zero grid.
    pub fn grid(&self, id: NodeId) -> ScalarGrid {
        match self.adjoints.get(id.0).and_then(|a| a.as_ref()) {
            Some(Value::Grid(g)) => ScalarGrid::from_vec_unchecked(self.domain, g.clone()),
            _ => ScalarGrid::zeros(self.domain),
        }
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        match self.adjoints.get(id.0).and_then(|a| a.as_ref()) {
            Some(Value::Scalar(s)) => *s,
            _ => 0.0,
        }
    }
}

/// Lets the soft-skeleton recurrence record itself onto a tape.
impl SoftMorphology for Tape {
    type Field = NodeId;

    fn erode(&mut self, x: &NodeId) -> NodeId {
        self.min_pool3(*x).expect("skeleton fields are grids")
    }

    fn dilate(&mut self, x: &NodeId) -> NodeId {
        self.max_pool3(*x).expect("skeleton fields are grids")
    }

    fn add(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        Tape::add(self, *a, *b).expect("skeleton fields are grids")
    }

    fn sub(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        Tape::sub(self, *a, *b).expect("skeleton fields are grids")
    }

    fn mul(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        Tape::mul(self, *a, *b).expect("skeleton fields are grids")
    }

    fn relu(&mut self, x: &NodeId) -> NodeId {
        Tape::relu(self, *x)
    }
}

impl Tape {
    /// Records the soft skeleton of `x` onto this tape.
    pub fn soft_skeleton(&mut self, x: NodeId, iterations: usize) -> Result<NodeId> {
        if iterations == 0 {
            return Err(Error::param("skeleton iterations must be at least 1"));
        }
        if self.node(x).value.is_scalar() {
            return Err(Error::param("skeleton needs a grid operand"));
        }
        Ok(crate::transforms::soft_skeleton_with(self, x, iterations))
    }
}
