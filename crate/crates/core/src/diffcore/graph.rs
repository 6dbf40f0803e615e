use std::cell::{Ref, RefCell};
use std::fmt;
use std::ops;
use std::rc::Rc;

use super::{EngineError, Tensor, LOG_FLOOR};

type CustomVjp = Rc<dyn Fn(&Tensor, &Tensor, &Tensor) -> Tensor>;

#[derive(Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Affine { x: usize, scale: f64 },
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Recip(usize),
    Sqrt(usize),
    Square(usize),
    Sum(usize),
    SumRows(usize),
    SumCols(usize),
    BroadcastScalar(usize),
    BroadcastRows(usize),
    BroadcastCols(usize),
    Transpose(usize),
    ConcatCols(usize, usize),
    SliceCols { x: usize, start: usize },
    PadCols { x: usize, start: usize },
    Clamp { x: usize, lo: f64, hi: f64 },
    /// First-order only: the vector-Jacobian product is an opaque closure
    /// over plain tensors, so its result is a constant in later passes.
    Custom { x: usize, name: Rc<str>, vjp: CustomVjp },
}

impl Op {
    fn name(&self) -> &str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Neg(_) => "neg",
            Op::Affine { .. } => "affine",
            Op::Tanh(_) => "tanh",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Recip(_) => "recip",
            Op::Sqrt(_) => "sqrt",
            Op::Square(_) => "square",
            Op::Sum(_) => "sum",
            Op::SumRows(_) => "sum_rows",
            Op::SumCols(_) => "sum_cols",
            Op::BroadcastScalar(_) => "broadcast_scalar",
            Op::BroadcastRows(_) => "broadcast_rows",
            Op::BroadcastCols(_) => "broadcast_cols",
            Op::Transpose(_) => "transpose",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::PadCols { .. } => "pad_cols",
            Op::Clamp { .. } => "clamp",
            Op::Custom { name, .. } => name,
        }
    }

    fn parents(&self) -> ([usize; 2], usize) {
        match *self {
            Op::Leaf => ([0, 0], 0),
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::ConcatCols(a, b) => ([a, b], 2),
            Op::Neg(x)
            | Op::Affine { x, .. }
            | Op::Tanh(x)
            | Op::Exp(x)
            | Op::Log(x)
            | Op::Recip(x)
            | Op::Sqrt(x)
            | Op::Square(x)
            | Op::Sum(x)
            | Op::SumRows(x)
            | Op::SumCols(x)
            | Op::BroadcastScalar(x)
            | Op::BroadcastRows(x)
            | Op::BroadcastCols(x)
            | Op::Transpose(x)
            | Op::SliceCols { x, .. }
            | Op::PadCols { x, .. }
            | Op::Clamp { x, .. }
            | Op::Custom { x, .. } => ([x, 0], 1),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// First non-finite operation at or upstream of this node.
    fault: Option<Rc<(String, String)>>,
}

/// Arena holding one computation graph.
///
/// Graphs are single-threaded (`!Sync`); separate graphs are fully independent.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?})", self.id, *self.value())
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A leaf that gradients are expected to be taken against.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true)
    }

    /// A leaf holding data.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(Tensor::scalar(v))
    }

    fn leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        let id = self.push(value, Op::Leaf);
        self.nodes.borrow_mut()[id].requires_grad = requires_grad;
        Var { graph: self, id }
    }

    fn push(&self, value: Tensor, op: Op) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        let (ps, n) = op.parents();
        let mut fault = ps[..n].iter().find_map(|&p| nodes[p].fault.clone());
        if fault.is_none() && !value.is_finite() {
            let bad = value.data().iter().position(|v| !v.is_finite()).unwrap_or(0);
            fault = Some(Rc::new((
                op.name().to_string(),
                format!("entry {bad} of output shape {:?} is {}", value.shape(), value.data()[bad]),
            )));
        }
        let requires_grad = ps[..n].iter().any(|&p| nodes[p].requires_grad);
        nodes.push(Node { value, op, requires_grad, fault });
        nodes.len() - 1
    }

    fn var(&self, id: usize) -> Var<'_> {
        Var { graph: self, id }
    }

    fn value_of(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn op_of(&self, id: usize) -> Op {
        self.nodes.borrow()[id].op.clone()
    }

    /// Forward value of `root`, or the first non-finite operation that fed it.
    pub fn evaluate(&self, root: Var<'_>) -> Result<Tensor, EngineError> {
        let nodes = self.nodes.borrow();
        let node = &nodes[root.id];
        match &node.fault {
            Some(f) => Err(EngineError::NonFinite { op: f.0.clone(), detail: f.1.clone() }),
            None => Ok(node.value.clone()),
        }
    }

    /// `d root / d leaf` for each leaf, as plain tensors.
    ///
    /// Leaves the root does not depend on get zeros of their own shape.
    pub fn gradient(&self, root: Var<'_>, leaves: &[Var<'_>]) -> Result<Vec<Tensor>, EngineError> {
        let grads = self.backward(root, leaves, false)?;
        grads
            .into_iter()
            .map(|id| self.evaluate(self.var(id)))
            .collect()
    }

    /// Like [`Graph::gradient`], but the returned gradients are graph nodes
    /// that can be differentiated again.
    pub fn gradient_nodes<'g>(
        &'g self,
        root: Var<'g>,
        leaves: &[Var<'g>],
    ) -> Result<Vec<Var<'g>>, EngineError> {
        Ok(self
            .backward(root, leaves, true)?
            .into_iter()
            .map(|id| self.var(id))
            .collect())
    }

    /// Per-row input gradient of `f` at `x`, kept differentiable.
    ///
    /// `f` maps a `[n, d]` batch to `[n, 1]` (or any shape whose rows depend
    /// only on the matching input row); the result is `[n, d]` with row `i`
    /// equal to the gradient of output row `i` w.r.t. input row `i`.
    pub fn input_gradient<'g>(
        &'g self,
        x: Var<'g>,
        f: impl FnOnce(Var<'g>) -> Var<'g>,
    ) -> Result<Var<'g>, EngineError> {
        let out = f(x);
        let total = out.sum();
        let mut grads = self.gradient_nodes(total, &[x])?;
        Ok(grads.remove(0))
    }

    fn backward(&self, root: Var<'_>, leaves: &[Var<'_>], create_graph: bool) -> Result<Vec<usize>, EngineError> {
        let root_id = root.id;
        {
            let nodes = self.nodes.borrow();
            let rv = &nodes[root_id];
            if !rv.value.is_scalar() {
                return Err(EngineError::NonScalarRoot { shape: rv.value.shape().to_vec() });
            }
            if let Some(f) = &rv.fault {
                return Err(EngineError::NonFinite { op: f.0.clone(), detail: f.1.clone() });
            }
        }

        // nodes that lie on some path leaf -> root
        let mut on_path = vec![false; root_id + 1];
        {
            let nodes = self.nodes.borrow();
            let mut depends = vec![false; root_id + 1];
            for l in leaves {
                if l.id <= root_id {
                    depends[l.id] = true;
                }
            }
            for id in 0..=root_id {
                if !depends[id] {
                    let (ps, n) = nodes[id].op.parents();
                    depends[id] = ps[..n].iter().any(|&p| depends[p]);
                }
            }
            let mut reached = vec![false; root_id + 1];
            reached[root_id] = true;
            for id in (0..=root_id).rev() {
                if reached[id] && depends[id] {
                    on_path[id] = true;
                    let (ps, n) = nodes[id].op.parents();
                    for &p in &ps[..n] {
                        reached[p] = true;
                    }
                }
            }
            if create_graph {
                let mut bad: Vec<String> = (0..=root_id)
                    .filter(|&id| on_path[id] && matches!(nodes[id].op, Op::Custom { .. }))
                    .map(|id| nodes[id].op.name().to_string())
                    .collect();
                bad.dedup();
                if !bad.is_empty() {
                    return Err(EngineError::SecondOrderUnsupported { ops: bad });
                }
            }
        }

        let mut adj: Vec<Option<usize>> = vec![None; root_id + 1];
        if on_path[root_id] {
            let shape = self.value_of(root_id).shape().to_vec();
            adj[root_id] = Some(self.constant(Tensor::ones(&shape)).id);
        }
        for id in (0..=root_id).rev() {
            let Some(g) = adj[id] else { continue };
            if !on_path[id] {
                continue;
            }
            let op = self.op_of(id);
            let (ps, n) = op.parents();
            if n == 0 {
                continue;
            }
            let contribs = self.vjp(&op, id, self.var(g));
            for (k, &p) in ps[..n].iter().enumerate() {
                if !on_path[p] {
                    continue;
                }
                let c = contribs[k].expect("vjp contribution for on-path parent").id;
                adj[p] = Some(match adj[p] {
                    None => c,
                    Some(prev) => (self.var(prev) + self.var(c)).id,
                });
            }
        }

        Ok(leaves
            .iter()
            .map(|l| match adj.get(l.id).copied().flatten() {
                Some(id) => id,
                None => {
                    let shape = self.value_of(l.id).shape().to_vec();
                    self.constant(Tensor::zeros(&shape)).id
                }
            })
            .collect())
    }

    /// Vector-Jacobian products for each parent of `id`, recorded as graph ops.
    fn vjp<'g>(&'g self, op: &Op, id: usize, g: Var<'g>) -> [Option<Var<'g>>; 2] {
        let y = self.var(id);
        let v = |i: usize| self.var(i);
        match *op {
            Op::Leaf => [None, None],
            Op::MatMul(a, b) => [Some(g.matmul(v(b).t())), Some(v(a).t().matmul(g))],
            Op::Add(..) => [Some(g), Some(g)],
            Op::Sub(..) => [Some(g), Some(-g)],
            Op::Mul(a, b) => [Some(g * v(b)), Some(g * v(a))],
            Op::Neg(_) => [Some(-g), None],
            Op::Affine { scale, .. } => [Some(g.scale(scale)), None],
            Op::Tanh(_) => [Some(g * y.square().affine(-1.0, 1.0)), None],
            Op::Exp(_) => [Some(g * y), None],
            Op::Log(x) => {
                let xv = v(x);
                let mut d = g * xv.clamp(LOG_FLOOR, f64::INFINITY).recip();
                let mask = xv.value().map(|t| if t > LOG_FLOOR { 1.0 } else { 0.0 });
                if mask.data().contains(&0.0) {
                    d = d * self.constant(mask);
                }
                [Some(d), None]
            }
            Op::Recip(_) => [Some(-(g * y.square())), None],
            Op::Sqrt(_) => [Some((g * y.clamp(LOG_FLOOR, f64::INFINITY).recip()).scale(0.5)), None],
            Op::Square(x) => [Some((g * v(x)).scale(2.0)), None],
            Op::Sum(x) => {
                let shape = v(x).value().shape().to_vec();
                [Some(g.broadcast_scalar(&shape)), None]
            }
            Op::SumRows(x) => {
                let n = v(x).value().rows();
                [Some(g.broadcast_rows(n)), None]
            }
            Op::SumCols(x) => {
                let m = v(x).value().cols();
                [Some(g.broadcast_cols(m)), None]
            }
            Op::BroadcastScalar(x) => {
                let shape = v(x).value().shape().to_vec();
                let s = g.sum();
                [Some(if shape.is_empty() { s } else { s.broadcast_scalar(&shape) }), None]
            }
            Op::BroadcastRows(_) => [Some(g.sum_rows()), None],
            Op::BroadcastCols(_) => [Some(g.sum_cols()), None],
            Op::Transpose(_) => [Some(g.t()), None],
            Op::ConcatCols(a, b) => {
                let ca = v(a).value().cols();
                let cb = v(b).value().cols();
                [Some(g.slice_cols(0, ca)), Some(g.slice_cols(ca, cb))]
            }
            Op::SliceCols { x, start } => {
                let total = v(x).value().cols();
                [Some(g.pad_cols(start, total)), None]
            }
            Op::PadCols { x, start } => {
                let width = v(x).value().cols();
                [Some(g.slice_cols(start, width)), None]
            }
            Op::Clamp { x, lo, hi } => {
                let mask = v(x).value().map(|t| if (lo..=hi).contains(&t) { 1.0 } else { 0.0 });
                if mask.data().iter().all(|&m| m == 1.0) {
                    [Some(g), None]
                } else {
                    [Some(g * self.constant(mask)), None]
                }
            }
            Op::Custom { x, ref vjp, .. } => {
                let grad = vjp(&v(x).value(), &y.value(), &g.value());
                [Some(self.constant(grad)), None]
            }
        }
    }
}

fn same_shape(op: &str, a: &Tensor, b: &Tensor) {
    assert!(
        a.shape() == b.shape(),
        "{op}: shape mismatch {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
}

fn matrix_dims(op: &str, t: &Tensor) -> (usize, usize) {
    assert!(t.shape().len() == 2, "{op}: expected a matrix, got shape {:?}", t.shape());
    (t.shape()[0], t.shape()[1])
}

impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Borrow of the forward value. Drop it before recording new ops.
    pub fn value(&self) -> Ref<'g, Tensor> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    /// Value of a one-element node.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    fn unary(self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'g> {
        let out = f(&self.value());
        let id = self.graph.push(out, op);
        self.graph.var(id)
    }

    fn binary(self, other: Var<'g>, op: Op, f: impl FnOnce(&Tensor, &Tensor) -> Tensor) -> Var<'g> {
        assert!(std::ptr::eq(self.graph, other.graph), "vars from different graphs");
        let out = f(&self.value(), &other.value());
        let id = self.graph.push(out, op);
        self.graph.var(id)
    }

    pub fn matmul(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, Op::MatMul(self.id, other.id), |a, b| {
            let (_, k) = matrix_dims("matmul", a);
            let (k2, _) = matrix_dims("matmul", b);
            assert_eq!(k, k2, "matmul: inner dimensions {:?} x {:?}", a.shape(), b.shape());
            a.matmul(b)
        })
    }

    pub fn add(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, Op::Add(self.id, other.id), |a, b| {
            same_shape("add", a, b);
            a.zip(b, |x, y| x + y)
        })
    }

    pub fn sub(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| {
            same_shape("sub", a, b);
            a.zip(b, |x, y| x - y)
        })
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| {
            same_shape("mul", a, b);
            a.zip(b, |x, y| x * y)
        })
    }

    pub fn neg(self) -> Var<'g> {
        self.unary(Op::Neg(self.id), |a| a.map(|x| -x))
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn affine(self, scale: f64, shift: f64) -> Var<'g> {
        self.unary(Op::Affine { x: self.id, scale }, |a| a.map(|x| scale * x + shift))
    }

    pub fn scale(self, c: f64) -> Var<'g> {
        self.affine(c, 0.0)
    }

    pub fn add_scalar(self, c: f64) -> Var<'g> {
        self.affine(1.0, c)
    }

    pub fn tanh(self) -> Var<'g> {
        self.unary(Op::Tanh(self.id), |a| a.map(f64::tanh))
    }

    pub fn exp(self) -> Var<'g> {
        self.unary(Op::Exp(self.id), |a| a.map(f64::exp))
    }

    /// Natural log of `max(x, 1e-12)`.
    pub fn log(self) -> Var<'g> {
        self.unary(Op::Log(self.id), |a| a.map(|x| x.max(LOG_FLOOR).ln()))
    }

    pub fn recip(self) -> Var<'g> {
        self.unary(Op::Recip(self.id), |a| a.map(|x| 1.0 / x))
    }

    pub fn sqrt(self) -> Var<'g> {
        self.unary(Op::Sqrt(self.id), |a| a.map(f64::sqrt))
    }

    pub fn square(self) -> Var<'g> {
        self.unary(Op::Square(self.id), |a| a.map(|x| x * x))
    }

    /// Sum of all entries, as a rank-0 scalar.
    pub fn sum(self) -> Var<'g> {
        self.unary(Op::Sum(self.id), |a| Tensor::scalar(a.sum()))
    }

    pub fn mean(self) -> Var<'g> {
        let n = self.value().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    /// `[n, m] -> [1, m]`
    pub fn sum_rows(self) -> Var<'g> {
        self.unary(Op::SumRows(self.id), |a| {
            let (r, c) = matrix_dims("sum_rows", a);
            let mut out = vec![0.0; c];
            for i in 0..r {
                for (o, v) in out.iter_mut().zip(a.row(i)) {
                    *o += v;
                }
            }
            Tensor::from_parts(vec![1, c], out)
        })
    }

    /// `[n, m] -> [n, 1]`
    pub fn sum_cols(self) -> Var<'g> {
        self.unary(Op::SumCols(self.id), |a| {
            let (r, _) = matrix_dims("sum_cols", a);
            Tensor::from_parts(vec![r, 1], (0..r).map(|i| a.row(i).iter().sum()).collect())
        })
    }

    pub fn broadcast_scalar(self, shape: &[usize]) -> Var<'g> {
        self.unary(Op::BroadcastScalar(self.id), |a| {
            assert!(a.is_scalar(), "broadcast_scalar: input shape {:?}", a.shape());
            Tensor::filled(shape, a.item())
        })
    }

    /// `[1, m] -> [n, m]`
    pub fn broadcast_rows(self, n: usize) -> Var<'g> {
        self.unary(Op::BroadcastRows(self.id), |a| {
            let (r, c) = matrix_dims("broadcast_rows", a);
            assert_eq!(r, 1, "broadcast_rows: expected a row vector, got {:?}", a.shape());
            let mut out = Vec::with_capacity(n * c);
            for _ in 0..n {
                out.extend_from_slice(a.data());
            }
            Tensor::from_parts(vec![n, c], out)
        })
    }

    /// `[n, 1] -> [n, m]`
    pub fn broadcast_cols(self, m: usize) -> Var<'g> {
        self.unary(Op::BroadcastCols(self.id), |a| {
            let (r, c) = matrix_dims("broadcast_cols", a);
            assert_eq!(c, 1, "broadcast_cols: expected a column vector, got {:?}", a.shape());
            let mut out = Vec::with_capacity(r * m);
            for &v in a.data() {
                out.extend(std::iter::repeat_n(v, m));
            }
            Tensor::from_parts(vec![r, m], out)
        })
    }

    /// Adds a `[1, m]` bias to every row of a `[n, m]` matrix.
    pub fn add_bias(self, bias: Var<'g>) -> Var<'g> {
        let n = self.value().rows();
        self.add(bias.broadcast_rows(n))
    }

    /// Multiplies every row of a `[n, m]` matrix by a `[1, m]` row.
    pub fn mul_row(self, row: Var<'g>) -> Var<'g> {
        let n = self.value().rows();
        self.mul(row.broadcast_rows(n))
    }

    pub fn t(self) -> Var<'g> {
        self.unary(Op::Transpose(self.id), |a| {
            matrix_dims("transpose", a);
            a.transpose()
        })
    }

    pub fn concat_cols(self, other: Var<'g>) -> Var<'g> {
        self.binary(other, Op::ConcatCols(self.id, other.id), |a, b| {
            let (r, ca) = matrix_dims("concat_cols", a);
            let (r2, cb) = matrix_dims("concat_cols", b);
            assert_eq!(r, r2, "concat_cols: row counts {r} vs {r2}");
            let mut out = Vec::with_capacity(r * (ca + cb));
            for i in 0..r {
                out.extend_from_slice(a.row(i));
                out.extend_from_slice(b.row(i));
            }
            Tensor::from_parts(vec![r, ca + cb], out)
        })
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(self, start: usize, len: usize) -> Var<'g> {
        self.unary(Op::SliceCols { x: self.id, start }, |a| {
            let (r, c) = matrix_dims("slice_cols", a);
            assert!(start + len <= c, "slice_cols: {start}+{len} exceeds {c} columns");
            let mut out = Vec::with_capacity(r * len);
            for i in 0..r {
                out.extend_from_slice(&a.row(i)[start..start + len]);
            }
            Tensor::from_parts(vec![r, len], out)
        })
    }

    /// Embeds the columns at offset `start` of a zero matrix `total` wide.
    pub fn pad_cols(self, start: usize, total: usize) -> Var<'g> {
        self.unary(Op::PadCols { x: self.id, start }, |a| {
            let (r, c) = matrix_dims("pad_cols", a);
            assert!(start + c <= total, "pad_cols: {start}+{c} exceeds {total}");
            let mut out = vec![0.0; r * total];
            for i in 0..r {
                out[i * total + start..i * total + start + c].copy_from_slice(a.row(i));
            }
            Tensor::from_parts(vec![r, total], out)
        })
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient passes where the input
    /// lies inside the closed interval and is zero elsewhere.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'g> {
        self.unary(Op::Clamp { x: self.id, lo, hi }, |a| a.map(|x| x.clamp(lo, hi)))
    }

    /// `[n, d] -> [n, 1]` Euclidean norm of each row.
    pub fn row_l2_norm(self) -> Var<'g> {
        self.square().sum_cols().sqrt()
    }

    /// Euclidean norm of all entries, as a scalar.
    pub fn l2_norm(self) -> Var<'g> {
        self.square().sum().sqrt()
    }

    /// Elementwise op with a hand-written first-order backward rule.
    ///
    /// `vjp(input, output, upstream)` returns the gradient w.r.t. the input.
    /// Such nodes cannot sit on a path that is differentiated twice.
    pub fn custom_unary(
        self,
        name: &str,
        forward: impl Fn(&Tensor) -> Tensor,
        vjp: impl Fn(&Tensor, &Tensor, &Tensor) -> Tensor + 'static,
    ) -> Var<'g> {
        let op = Op::Custom { x: self.id, name: Rc::from(name), vjp: Rc::new(vjp) };
        self.unary(op, forward)
    }
}

impl<'g> ops::Add for Var<'g> {
    type Output = Var<'g>;
    fn add(self, rhs: Var<'g>) -> Var<'g> {
        Var::add(self, rhs)
    }
}

impl<'g> ops::Sub for Var<'g> {
    type Output = Var<'g>;
    fn sub(self, rhs: Var<'g>) -> Var<'g> {
        Var::sub(self, rhs)
    }
}

impl<'g> ops::Mul for Var<'g> {
    type Output = Var<'g>;
    fn mul(self, rhs: Var<'g>) -> Var<'g> {
        Var::mul(self, rhs)
    }
}

impl<'g> ops::Neg for Var<'g> {
    type Output = Var<'g>;
    fn neg(self) -> Var<'g> {
        Var::neg(self)
    }
}
