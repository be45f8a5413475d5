//! One forward definition, two executors: the differentiable [`Tape`] and a
//! plain evaluator used for inference, where recording nodes is wasted work.

use std::borrow::Cow;

use rand::Rng;

use crate::compute::ops;
use crate::compute::{ParamId, ParamStore, Shape, Tape, Var};
use crate::error::{Error, Result};

pub trait Backend {
    type V: Clone;

    fn params(&self) -> &ParamStore;
    fn param(&mut self, id: ParamId) -> Result<Self::V>;
    fn row(&mut self, id: ParamId, row: usize) -> Result<Self::V>;
    fn constant(&mut self, values: Vec<f64>) -> Self::V;
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a [f64];

    fn matmul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scale(&mut self, a: &Self::V, c: f64) -> Self::V;
    fn dot(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sum(&mut self, a: &Self::V) -> Self::V;
    fn leaky_relu(&mut self, a: &Self::V, slope: f64) -> Result<Self::V>;
    fn relu(&mut self, a: &Self::V) -> Self::V;
    fn softmax(&mut self, a: &Self::V) -> Result<Self::V>;
    fn concat(&mut self, parts: &[Self::V]) -> Result<Self::V>;
    fn weighted_sum(&mut self, weights: &Self::V, terms: &[(usize, Self::V)], width: usize) -> Result<Self::V>;
    fn dropout<R: Rng>(&mut self, a: &Self::V, rate: f64, training: bool, rng: &mut R) -> Result<Self::V>;

    fn scalar(&self, v: &Self::V) -> f64 {
        self.value(v)[0]
    }

    /// Left-fold of `add` over a nonempty list.
    fn add_all(&mut self, parts: &[Self::V]) -> Result<Self::V> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("add_all of nothing".into()))?;
        let mut acc = first.clone();
        for p in rest {
            acc = self.add(&acc, p)?;
        }
        Ok(acc)
    }
}

impl Backend for Tape<'_> {
    type V = Var;

    fn params(&self) -> &ParamStore {
        Tape::params(self)
    }
    fn param(&mut self, id: ParamId) -> Result<Var> {
        Tape::param(self, id)
    }
    fn row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        Tape::row(self, id, row)
    }
    fn constant(&mut self, values: Vec<f64>) -> Var {
        self.constant_vector(values)
    }
    fn value<'a>(&'a self, v: &'a Var) -> &'a [f64] {
        Tape::value(self, *v)
    }
    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::matmul(self, *a, *b)
    }
    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::add(self, *a, *b)
    }
    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::sub(self, *a, *b)
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::mul(self, *a, *b)
    }
    fn scale(&mut self, a: &Var, c: f64) -> Var {
        Tape::scale(self, *a, c)
    }
    fn dot(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::dot(self, *a, *b)
    }
    fn sum(&mut self, a: &Var) -> Var {
        Tape::sum(self, *a)
    }
    fn leaky_relu(&mut self, a: &Var, slope: f64) -> Result<Var> {
        Tape::leaky_relu(self, *a, slope)
    }
    fn relu(&mut self, a: &Var) -> Var {
        Tape::relu(self, *a)
    }
    fn softmax(&mut self, a: &Var) -> Result<Var> {
        Tape::softmax(self, *a)
    }
    fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        Tape::concat(self, parts)
    }
    fn weighted_sum(&mut self, weights: &Var, terms: &[(usize, Var)], width: usize) -> Result<Var> {
        Tape::weighted_sum(self, *weights, terms, width)
    }
    fn dropout<R: Rng>(&mut self, a: &Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        Tape::dropout(self, *a, rate, training, rng)
    }
}

/// A value of the plain evaluator; parameters are borrowed, not copied.
#[derive(Clone, Debug)]
pub struct Value<'p> {
    data: Cow<'p, [f64]>,
    shape: Shape,
}

impl Value<'_> {
    fn owned(data: Vec<f64>, shape: Shape) -> Self {
        Self {
            data: Cow::Owned(data),
            shape,
        }
    }
}

/// Forward-only executor over a borrowed parameter store.
pub struct Eval<'p> {
    params: &'p ParamStore,
}

impl<'p> Eval<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params }
    }
}

fn same(op: &'static str, a: &Value, b: &Value) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Shape {
            op,
            detail: format!("{:?} vs {:?}", a.shape, b.shape),
        });
    }
    Ok(())
}

fn zip(a: &Value, b: &Value, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.data.iter().zip(b.data.iter()).map(|(&x, &y)| f(x, y)).collect()
}

impl<'p> Backend for Eval<'p> {
    type V = Value<'p>;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn param(&mut self, id: ParamId) -> Result<Value<'p>> {
        let t = self.params.get(id);
        let shape = match *t.shape() {
            [] => Shape::Scalar,
            [n] => Shape::Vector(n),
            [r, c] => Shape::Matrix(r, c),
            _ => return Err(Error::shape("param", "rank > 2")),
        };
        Ok(Value {
            data: Cow::Borrowed(t.values()),
            shape,
        })
    }

    fn row(&mut self, id: ParamId, row: usize) -> Result<Value<'p>> {
        let t = self.params.get(id);
        if t.shape().len() != 2 || row >= t.rows() {
            return Err(Error::shape(
                "row",
                format!("row {row} of {:?} `{}`", t.shape(), self.params.name(id)),
            ));
        }
        Ok(Value {
            data: Cow::Borrowed(t.row(row)),
            shape: Shape::Vector(t.row_len()),
        })
    }

    fn constant(&mut self, values: Vec<f64>) -> Value<'p> {
        let n = values.len();
        Value::owned(values, Shape::Vector(n))
    }

    fn value<'a>(&'a self, v: &'a Value<'p>) -> &'a [f64] {
        &v.data
    }

    fn matmul(&mut self, a: &Value<'p>, b: &Value<'p>) -> Result<Value<'p>> {
        let (m, ka, a_vec) = match a.shape {
            Shape::Matrix(r, c) => (r, c, false),
            Shape::Vector(n) => (1, n, true),
            Shape::Scalar => return Err(Error::shape("matmul", "scalar left operand")),
        };
        let (kb, n, b_vec) = match b.shape {
            Shape::Matrix(r, c) => (r, c, false),
            Shape::Vector(len) => (len, 1, true),
            Shape::Scalar => return Err(Error::shape("matmul", "scalar right operand")),
        };
        if ka != kb {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}: inner extents {ka} != {kb}", a.shape, b.shape),
            ));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &a.data[i * ka..(i + 1) * ka];
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, &x) in arow.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let brow = &b.data[k * n..(k + 1) * n];
                for (o, &y) in orow.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        let shape = match (a_vec, b_vec) {
            (true, true) => Shape::Scalar,
            (true, false) => Shape::Vector(n),
            (false, true) => Shape::Vector(m),
            (false, false) => Shape::Matrix(m, n),
        };
        Ok(Value::owned(out, shape))
    }

    fn add(&mut self, a: &Value<'p>, b: &Value<'p>) -> Result<Value<'p>> {
        same("add", a, b)?;
        Ok(Value::owned(zip(a, b, |x, y| x + y), a.shape))
    }

    fn sub(&mut self, a: &Value<'p>, b: &Value<'p>) -> Result<Value<'p>> {
        same("sub", a, b)?;
        Ok(Value::owned(zip(a, b, |x, y| x - y), a.shape))
    }

    fn mul(&mut self, a: &Value<'p>, b: &Value<'p>) -> Result<Value<'p>> {
        same("mul", a, b)?;
        Ok(Value::owned(zip(a, b, |x, y| x * y), a.shape))
    }

    fn scale(&mut self, a: &Value<'p>, c: f64) -> Value<'p> {
        Value::owned(a.data.iter().map(|x| x * c).collect(), a.shape)
    }

    fn dot(&mut self, a: &Value<'p>, b: &Value<'p>) -> Result<Value<'p>> {
        if a.shape != b.shape || !matches!(a.shape, Shape::Vector(_)) {
            return Err(Error::shape("inner_product", format!("{:?} vs {:?}", a.shape, b.shape)));
        }
        Ok(Value::owned(vec![ops::dot(&a.data, &b.data)], Shape::Scalar))
    }

    fn sum(&mut self, a: &Value<'p>) -> Value<'p> {
        Value::owned(vec![a.data.iter().sum()], Shape::Scalar)
    }

    fn leaky_relu(&mut self, a: &Value<'p>, slope: f64) -> Result<Value<'p>> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::InvalidArgument(format!("leaky relu slope {slope} outside (0, 1)")));
        }
        Ok(Value::owned(
            a.data.iter().map(|&x| ops::leaky_relu(x, slope)).collect(),
            a.shape,
        ))
    }

    fn relu(&mut self, a: &Value<'p>) -> Value<'p> {
        Value::owned(a.data.iter().map(|&x| ops::relu(x)).collect(), a.shape)
    }

    fn softmax(&mut self, a: &Value<'p>) -> Result<Value<'p>> {
        if !matches!(a.shape, Shape::Vector(_)) {
            return Err(Error::shape("softmax", format!("{:?}", a.shape)));
        }
        Ok(Value::owned(ops::softmax(&a.data)?, a.shape))
    }

    fn concat(&mut self, parts: &[Value<'p>]) -> Result<Value<'p>> {
        let mut out = Vec::new();
        for p in parts {
            if matches!(p.shape, Shape::Matrix(..)) {
                return Err(Error::shape("concat", "matrix operand"));
            }
            out.extend_from_slice(&p.data);
        }
        let n = out.len();
        Ok(Value::owned(out, Shape::Vector(n)))
    }

    fn weighted_sum(&mut self, weights: &Value<'p>, terms: &[(usize, Value<'p>)], width: usize) -> Result<Value<'p>> {
        let mut out = vec![0.0; width];
        for (k, v) in terms {
            if v.data.len() != width || *k >= weights.data.len() {
                return Err(Error::shape(
                    "weighted_sum",
                    format!("term of length {} with weight index {k}/{}", v.data.len(), weights.data.len()),
                ));
            }
            let c = weights.data[*k];
            for (o, x) in out.iter_mut().zip(v.data.iter()) {
                *o += c * x;
            }
        }
        Ok(Value::owned(out, Shape::Vector(width)))
    }

    fn dropout<R: Rng>(&mut self, a: &Value<'p>, rate: f64, training: bool, rng: &mut R) -> Result<Value<'p>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a.clone());
        }
        let keep = 1.0 / (1.0 - rate);
        let out = a
            .data
            .iter()
            .map(|&x| if rng.random::<f64>() < rate { 0.0 } else { x * keep })
            .collect();
        Ok(Value::owned(out, a.shape))
    }
}
