//! Define-by-run reverse-mode differentiation over small dense tensors.
//!
//! A [`Tape`] borrows a [`ParamStore`] immutably and records every operation
//! in evaluation order, so the node list is already topologically sorted.
//! [`Tape::backward`] walks it once in reverse and returns the parameter
//! gradients as a [`GradBuffer`]; callers merge buffers into the store after
//! the tape is dropped.

use rand::Rng;

use super::ops;
use super::params::{GradBuffer, GradEntry, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    fn from_dims(dims: &[usize]) -> Result<Self> {
        match dims {
            [] => Ok(Shape::Scalar),
            [n] => Ok(Shape::Vector(*n)),
            [r, c] => Ok(Shape::Matrix(*r, *c)),
            _ => Err(Error::shape("param", format!("rank {} unsupported", dims.len()))),
        }
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Row(ParamId, usize),
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Dot(Var, Var),
    Sum(Var),
    LeakyRelu(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Element(Var, usize),
    WeightedSum {
        weights: Var,
        terms: Vec<(usize, Var)>,
    },
    Dropout(Var, Vec<f64>),
    SquaredError(Var, f64),
    LogLoss(Var, bool),
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Shape,
    value: Vec<f64>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(64),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.params.get(id).values(),
            Op::Row(id, r) => self.params.get(id).row(r),
            _ => &node.value,
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    fn push(&mut self, op: Op, shape: Shape, value: Vec<f64>) -> Var {
        debug_assert!(matches!(op, Op::Param(_) | Op::Row(..)) || value.len() == shape.len());
        self.nodes.push(Node { op, shape, value });
        Var(self.nodes.len() - 1)
    }

    // ---- leaves ----

    pub fn constant(&mut self, shape: Shape, values: Vec<f64>) -> Result<Var> {
        if shape.len() != values.len() {
            return Err(Error::shape(
                "constant",
                format!("{shape:?} needs {} values, got {}", shape.len(), values.len()),
            ));
        }
        Ok(self.push(Op::Constant, shape, values))
    }

    pub fn constant_vector(&mut self, values: Vec<f64>) -> Var {
        let shape = Shape::Vector(values.len());
        self.push(Op::Constant, shape, values)
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.push(Op::Constant, Shape::Scalar, vec![value])
    }

    /// Whole parameter as a leaf.
    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        let shape = Shape::from_dims(self.params.get(id).shape())?;
        Ok(self.push(Op::Param(id), shape, Vec::new()))
    }

    /// One row of a 2-D parameter table; its gradient is scattered back into
    /// that row only.
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let t = self.params.get(id);
        if t.shape().len() != 2 || row >= t.rows() {
            return Err(Error::shape(
                "row",
                format!(
                    "row {row} of `{}` with shape {:?}",
                    self.params.name(id),
                    t.shape()
                ),
            ));
        }
        let width = t.row_len();
        Ok(self.push(Op::Row(id, row), Shape::Vector(width), Vec::new()))
    }

    // ---- linear algebra ----

    /// Matrix product. A vector on the left acts as a row vector, a vector on
    /// the right as a column vector; the corresponding output extent is dropped.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka, a_vec) = match self.shape(a) {
            Shape::Matrix(r, c) => (r, c, false),
            Shape::Vector(n) => (1, n, true),
            Shape::Scalar => return Err(Error::shape("matmul", "scalar left operand")),
        };
        let (kb, n, b_vec) = match self.shape(b) {
            Shape::Matrix(r, c) => (r, c, false),
            Shape::Vector(len) => (len, 1, true),
            Shape::Scalar => return Err(Error::shape("matmul", "scalar right operand")),
        };
        if ka != kb {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}: inner extents {ka} != {kb}", self.shape(a), self.shape(b)),
            ));
        }
        let k = ka;
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &av[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            if n == 1 {
                orow[0] = ops::dot(arow, bv);
            } else {
                for (p, &x) in arow.iter().enumerate() {
                    if x != 0.0 {
                        let brow = &bv[p * n..(p + 1) * n];
                        for (o, y) in orow.iter_mut().zip(brow) {
                            *o += x * y;
                        }
                    }
                }
            }
        }
        let shape = match (a_vec, b_vec) {
            (true, true) => Shape::Scalar,
            (true, false) => Shape::Vector(n),
            (false, true) => Shape::Vector(m),
            (false, false) => Shape::Matrix(m, n),
        };
        Ok(self.push(Op::MatMul { a, b, m, k, n }, shape, out))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("add", a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), shape, v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("sub", a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), shape, v))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("mul", a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), shape, v))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).iter().map(|x| x * c).collect();
        let shape = self.shape(a);
        self.push(Op::Scale(a, c), shape, v)
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb || !matches!(self.shape(a), Shape::Vector(_)) || self.shape(a) != self.shape(b)
        {
            return Err(Error::shape(
                "inner_product",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let v = ops::dot(self.value(a), self.value(b));
        Ok(self.push(Op::Dot(a, b), Shape::Scalar, vec![v]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().sum();
        self.push(Op::Sum(a), Shape::Scalar, vec![v])
    }

    // ---- nonlinearities ----

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leaky relu slope {slope} outside (0, 1)"
            )));
        }
        let v = self
            .value(a)
            .iter()
            .map(|&x| ops::leaky_relu(x, slope))
            .collect();
        let shape = self.shape(a);
        Ok(self.push(Op::LeakyRelu(a, slope), shape, v))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| ops::relu(x)).collect();
        let shape = self.shape(a);
        self.push(Op::Relu(a), shape, v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| ops::sigmoid(x)).collect();
        let shape = self.shape(a);
        self.push(Op::Sigmoid(a), shape, v)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if !matches!(self.shape(a), Shape::Vector(_)) {
            return Err(Error::shape("softmax", format!("{:?}", self.shape(a))));
        }
        let v = ops::softmax(self.value(a))?;
        let shape = self.shape(a);
        Ok(self.push(Op::Softmax(a), shape, v))
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is 0.
    pub fn dropout(&mut self, a: Var, rate: f64, training: bool, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let v = zip_map(self.value(a), &mask, |x, m| x * m);
        let shape = self.shape(a);
        Ok(self.push(Op::Dropout(a, mask), shape, v))
    }

    // ---- structure ----

    /// Concatenates vectors and scalars into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut v = Vec::new();
        for &p in parts {
            if matches!(self.shape(p), Shape::Matrix(..)) {
                return Err(Error::shape("concat", "matrix operand"));
            }
            v.extend_from_slice(self.value(p));
        }
        let shape = Shape::Vector(v.len());
        Ok(self.push(Op::Concat(parts.to_vec()), shape, v))
    }

    pub fn element(&mut self, a: Var, i: usize) -> Result<Var> {
        let x = *self
            .value(a)
            .get(i)
            .ok_or_else(|| Error::shape("element", format!("index {i} of {:?}", self.shape(a))))?;
        Ok(self.push(Op::Element(a, i), Shape::Scalar, vec![x]))
    }

    /// `Σ weights[k] * v` over `(k, v)` terms; all `v` share one shape.
    /// An empty term list needs `width` to size the zero result.
    pub fn weighted_sum(&mut self, weights: Var, terms: &[(usize, Var)], width: usize) -> Result<Var> {
        let w = self.value(weights);
        let mut out = vec![0.0; width];
        for &(k, v) in terms {
            let x = self.value(v);
            if x.len() != width || k >= w.len() {
                return Err(Error::shape(
                    "weighted_sum",
                    format!("term of length {} with weight index {k}/{}", x.len(), w.len()),
                ));
            }
            let c = w[k];
            for (o, xi) in out.iter_mut().zip(x) {
                *o += c * xi;
            }
        }
        Ok(self.push(
            Op::WeightedSum {
                weights,
                terms: terms.to_vec(),
            },
            Shape::Vector(width),
            out,
        ))
    }

    // ---- losses ----

    pub fn squared_error(&mut self, prediction: Var, target: f64) -> Var {
        let d = self.scalar(prediction) - target;
        self.push(Op::SquaredError(prediction, target), Shape::Scalar, vec![d * d])
    }

    /// Pointwise log loss of a logit against a binary label.
    pub fn log_loss(&mut self, logit: Var, positive: bool) -> Var {
        let v = ops::log_loss(self.scalar(logit), positive);
        self.push(Op::LogLoss(logit, positive), Shape::Scalar, vec![v])
    }

    // ---- backward ----

    /// Reverse sweep from a scalar output. Every node reachable from `output`
    /// is visited once; gradients of shared inputs are summed.
    pub fn backward(&self, output: Var) -> Result<GradBuffer> {
        if self.shape(output) != Shape::Scalar {
            return Err(Error::shape(
                "backward",
                format!("output must be scalar, got {:?}", self.shape(output)),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(output.0 + 1);
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(vec![1.0]);
        let mut buf = GradBuffer::default();

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => buf.entries.push(GradEntry {
                    param: *id,
                    offset: 0,
                    values: g,
                }),
                Op::Row(id, r) => buf.entries.push(GradEntry {
                    param: *id,
                    offset: r * g.len(),
                    values: g,
                }),
                &Op::MatMul { a, b, m, k, n } => {
                    let av = self.value(a);
                    let bv = self.value(b);
                    let ga = slot(&mut grads, a, m * k);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] += ops::dot(grow, &bv[p * n..(p + 1) * n]);
                        }
                    }
                    let gb = slot(&mut grads, b, k * n);
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let x = av[i * k + p];
                            if x != 0.0 {
                                for (dst, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *dst += x * gv;
                                }
                            }
                        }
                    }
                }
                &Op::Add(a, b) => {
                    add_into(slot(&mut grads, a, g.len()), &g);
                    add_into(slot(&mut grads, b, g.len()), &g);
                }
                &Op::Sub(a, b) => {
                    add_into(slot(&mut grads, a, g.len()), &g);
                    let gb = slot(&mut grads, b, g.len());
                    for (d, x) in gb.iter_mut().zip(&g) {
                        *d -= x;
                    }
                }
                &Op::Mul(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let ga = slot(&mut grads, a, g.len());
                    for ((d, x), y) in ga.iter_mut().zip(&g).zip(bv) {
                        *d += x * y;
                    }
                    let gb = slot(&mut grads, b, g.len());
                    for ((d, x), y) in gb.iter_mut().zip(&g).zip(av) {
                        *d += x * y;
                    }
                }
                &Op::Scale(a, c) => {
                    let ga = slot(&mut grads, a, g.len());
                    for (d, x) in ga.iter_mut().zip(&g) {
                        *d += c * x;
                    }
                }
                &Op::Dot(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let s = g[0];
                    let ga = slot(&mut grads, a, bv.len());
                    for (d, y) in ga.iter_mut().zip(bv) {
                        *d += s * y;
                    }
                    let gb = slot(&mut grads, b, av.len());
                    for (d, x) in gb.iter_mut().zip(av) {
                        *d += s * x;
                    }
                }
                &Op::Sum(a) => {
                    let n = self.value(a).len();
                    slot(&mut grads, a, n).iter_mut().for_each(|d| *d += g[0]);
                }
                &Op::LeakyRelu(a, slope) => {
                    let av = self.value(a);
                    let ga = slot(&mut grads, a, g.len());
                    for ((d, x), gv) in ga.iter_mut().zip(av).zip(&g) {
                        *d += if *x >= 0.0 { *gv } else { slope * gv };
                    }
                }
                &Op::Relu(a) => {
                    let av = self.value(a);
                    let ga = slot(&mut grads, a, g.len());
                    for ((d, x), gv) in ga.iter_mut().zip(av).zip(&g) {
                        if *x > 0.0 {
                            *d += gv;
                        }
                    }
                }
                &Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = slot(&mut grads, a, g.len());
                    for ((d, s), gv) in ga.iter_mut().zip(y).zip(&g) {
                        *d += gv * s * (1.0 - s);
                    }
                }
                &Op::Softmax(a) => {
                    let y = &node.value;
                    let gy = ops::dot(&g, y);
                    let ga = slot(&mut grads, a, g.len());
                    for ((d, s), gv) in ga.iter_mut().zip(y).zip(&g) {
                        *d += s * (gv - gy);
                    }
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        add_into(slot(&mut grads, p, n), &g[at..at + n]);
                        at += n;
                    }
                }
                &Op::Element(a, idx) => {
                    let n = self.value(a).len();
                    slot(&mut grads, a, n)[idx] += g[0];
                }
                Op::WeightedSum { weights, terms } => {
                    let w = self.value(*weights).to_vec();
                    let nw = w.len();
                    let mut gw = vec![0.0; nw];
                    for &(k, v) in terms {
                        gw[k] += ops::dot(self.value(v), &g);
                        let gv = slot(&mut grads, v, g.len());
                        for (d, x) in gv.iter_mut().zip(&g) {
                            *d += w[k] * x;
                        }
                    }
                    add_into(slot(&mut grads, *weights, nw), &gw);
                }
                Op::Dropout(a, mask) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for ((d, m), gv) in ga.iter_mut().zip(mask).zip(&g) {
                        *d += m * gv;
                    }
                }
                &Op::SquaredError(a, target) => {
                    let d = self.scalar(a) - target;
                    slot(&mut grads, a, 1)[0] += 2.0 * d * g[0];
                }
                &Op::LogLoss(a, positive) => {
                    let x = self.scalar(a);
                    let (p, sign) = if positive {
                        (ops::sigmoid(x), 1.0)
                    } else {
                        (ops::sigmoid(-x), -1.0)
                    };
                    if p > ops::LOG_FLOOR {
                        slot(&mut grads, a, 1)[0] += -(1.0 - p) * sign * g[0];
                    }
                }
            }
        }
        Ok(buf)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
