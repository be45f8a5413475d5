//! Output heads over `(u_final, i_final)`.

use rand::Rng;

use super::backend::Backend;
use super::config::Head;
use crate::compute::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub head: Head,
    /// FM/NFM: global bias, linear weights `[2d]`, factors `[2d, k]`.
    pub bias: Option<ParamId>,
    pub linear: Option<ParamId>,
    pub factors: Option<ParamId>,
    /// MLP/NFM: hidden layer `[d, in]` + `[d]`, output weights `[d]`.
    pub hidden_w: Option<ParamId>,
    pub hidden_b: Option<ParamId>,
    pub out_w: Option<ParamId>,
    /// MLP only; NFM uses the FM bias.
    pub out_b: Option<ParamId>,
}

pub(crate) fn find(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .find(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
}

impl HeadParams {
    fn empty(head: Head) -> Self {
        Self {
            head,
            bias: None,
            linear: None,
            factors: None,
            hidden_w: None,
            hidden_b: None,
            out_w: None,
            out_b: None,
        }
    }

    fn uses_fm(head: Head) -> bool {
        matches!(head, Head::Fm | Head::Nfm)
    }

    fn uses_hidden(head: Head) -> bool {
        matches!(head, Head::Mlp | Head::Nfm)
    }

    pub fn init(store: &mut ParamStore, head: Head, dim: usize, fm_factors: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::empty(head);
        let width = 2 * dim;
        if Self::uses_fm(head) {
            p.bias = Some(store.add_zeros("head.bias", vec![]));
            p.linear = Some(store.add_uniform("head.linear", vec![width], 1.0 / (width as f64).sqrt(), rng));
            p.factors = Some(store.add_uniform(
                "head.factors",
                vec![width, fm_factors],
                1.0 / (width as f64).sqrt(),
                rng,
            ));
        }
        if Self::uses_hidden(head) {
            let input = if head == Head::Mlp { width } else { fm_factors };
            p.hidden_w = Some(store.add_uniform(
                "head.hidden.w",
                vec![dim, input],
                1.0 / (input as f64).sqrt(),
                rng,
            ));
            p.hidden_b = Some(store.add_zeros("head.hidden.b", vec![dim]));
            p.out_w = Some(store.add_uniform("head.out.w", vec![dim], 1.0 / (dim as f64).sqrt(), rng));
        }
        if head == Head::Mlp {
            p.out_b = Some(store.add_zeros("head.out.b", vec![]));
        }
        p
    }

    pub fn resolve(store: &ParamStore, head: Head) -> Result<Self> {
        let mut p = Self::empty(head);
        if Self::uses_fm(head) {
            p.bias = Some(find(store, "head.bias")?);
            p.linear = Some(find(store, "head.linear")?);
            p.factors = Some(find(store, "head.factors")?);
        }
        if Self::uses_hidden(head) {
            p.hidden_w = Some(find(store, "head.hidden.w")?);
            p.hidden_b = Some(find(store, "head.hidden.b")?);
            p.out_w = Some(find(store, "head.out.w")?);
        }
        if head == Head::Mlp {
            p.out_b = Some(find(store, "head.out.b")?);
        }
        Ok(p)
    }
}

fn get<B: Backend>(b: &mut B, id: Option<ParamId>) -> Result<B::V> {
    b.param(id.ok_or_else(|| Error::Config("head parameter missing".into()))?)
}

/// Bi-interaction pooling `½((xV)² − (x∘x)(V∘V))`, one entry per factor.
/// Summing it gives `Σ_{j<k} ⟨v_j, v_k⟩ x_j x_k`.
pub fn bi_interaction<B: Backend>(b: &mut B, x: &B::V, factors: &B::V) -> Result<B::V> {
    let xv = b.matmul(x, factors)?;
    let sum_sq = b.mul(&xv, &xv)?;
    let x2 = b.mul(x, x)?;
    let v2 = b.mul(factors, factors)?;
    let sq_sum = b.matmul(&x2, &v2)?;
    let diff = b.sub(&sum_sq, &sq_sum)?;
    Ok(b.scale(&diff, 0.5))
}

/// One ReLU hidden layer of width d, then a linear scalar output.
fn hidden_layer<B: Backend, R: Rng>(
    b: &mut B,
    p: &HeadParams,
    input: &B::V,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<B::V> {
    let (w, bias, out) = (get(b, p.hidden_w)?, get(b, p.hidden_b)?, get(b, p.out_w)?);
    let z = b.matmul(&w, input)?;
    let z = b.add(&z, &bias)?;
    let h = b.relu(&z);
    let h = b.dropout(&h, dropout, training, rng)?;
    b.dot(&out, &h)
}

/// Raw score (a logit for ranking) from the final user and item vectors.
/// Dropout hits both inputs and the hidden layer.
pub fn predict<B: Backend, R: Rng>(
    b: &mut B,
    p: &HeadParams,
    user: &B::V,
    item: &B::V,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<B::V> {
    let u = b.dropout(user, dropout, training, rng)?;
    let i = b.dropout(item, dropout, training, rng)?;
    match p.head {
        Head::Mf => b.dot(&u, &i),
        Head::Fm => {
            let x = b.concat(&[u, i])?;
            let (bias, lin, v) = (get(b, p.bias)?, get(b, p.linear)?, get(b, p.factors)?);
            let linear = b.dot(&lin, &x)?;
            let bi = bi_interaction(b, &x, &v)?;
            let pair = b.sum(&bi);
            b.add_all(&[bias, linear, pair])
        }
        Head::Mlp => {
            let x = b.concat(&[u, i])?;
            let out = hidden_layer(b, p, &x, dropout, training, rng)?;
            let bias = get(b, p.out_b)?;
            b.add(&out, &bias)
        }
        Head::Nfm => {
            let x = b.concat(&[u, i])?;
            let (bias, lin, v) = (get(b, p.bias)?, get(b, p.linear)?, get(b, p.factors)?);
            let linear = b.dot(&lin, &x)?;
            let bi = bi_interaction(b, &x, &v)?;
            let deep = hidden_layer(b, p, &bi, dropout, training, rng)?;
            b.add_all(&[bias, linear, deep])
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::compute::Tensor;
    use crate::model::backend::Eval;

    fn run(store: &ParamStore, p: &HeadParams, u: Vec<f64>, i: Vec<f64>) -> f64 {
        let mut b = Eval::new(store);
        let (u, i) = (b.constant(u), b.constant(i));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = predict(&mut b, p, &u, &i, 0.0, false, &mut rng).unwrap();
        b.scalar(&out)
    }

    #[test]
    fn mf_is_inner_product() {
        let store = ParamStore::new();
        let p = HeadParams::empty(Head::Mf);
        assert_eq!(run(&store, &p, vec![1.0, 2.0], vec![3.0, 4.0]), 11.0);
    }

    #[test]
    fn mlp_with_zero_hidden_weights_is_output_bias() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = HeadParams::init(&mut store, Head::Mlp, 2, 16, &mut rng);
        store.get_mut(p.hidden_w.unwrap()).values_mut().fill(0.0);
        *store.get_mut(p.out_b.unwrap()).values_mut().first_mut().unwrap() = 0.625;
        for (u, i) in [(vec![1.0, -2.0], vec![0.5, 9.0]), (vec![-7.0, 3.0], vec![0.0, 0.0])] {
            assert_eq!(run(&store, &p, u, i), 0.625);
        }
    }

    #[test]
    fn fm_matches_brute_force_pairs() {
        let (d, k) = (2, 3);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = HeadParams::init(&mut store, Head::Fm, d, k, &mut rng);
        let v: Vec<f64> = (0..2 * d * k).map(|j| 0.1 * (j as f64) - 0.4).collect();
        *store.get_mut(p.factors.unwrap()) = Tensor::matrix(2 * d, k, v.clone()).unwrap().trainable();
        *store.get_mut(p.linear.unwrap()) = Tensor::vector(vec![0.5, -1.0, 0.25, 2.0]).trainable();
        store.get_mut(p.bias.unwrap()).values_mut()[0] = 0.3;
        let (u, i) = (vec![1.0, -2.0], vec![0.5, 3.0]);
        let x: Vec<f64> = u.iter().chain(&i).copied().collect();
        let mut pairs = 0.0;
        for a in 0..2 * d {
            for c in a + 1..2 * d {
                let dot: f64 = (0..k).map(|f| v[a * k + f] * v[c * k + f]).sum();
                pairs += dot * x[a] * x[c];
            }
        }
        let linear = 0.5 * x[0] - 1.0 * x[1] + 0.25 * x[2] + 2.0 * x[3];
        let expect = 0.3 + linear + pairs;
        assert!((run(&store, &p, u, i) - expect).abs() < 1e-12);
    }

    #[test]
    fn dropout_is_inactive_at_inference() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = HeadParams::init(&mut store, Head::Nfm, 3, 4, &mut rng);
        let mut b = Eval::new(&store);
        let (u, i) = (b.constant(vec![0.1, 0.2, 0.3]), b.constant(vec![0.3, 0.2, 0.1]));
        let a = predict(&mut b, &p, &u, &i, 0.5, false, &mut rng).unwrap();
        let c = predict(&mut b, &p, &u, &i, 0.0, false, &mut rng).unwrap();
        assert_eq!(b.scalar(&a), b.scalar(&c));
    }
}
