use super::{cst, linear, mismatch, Element, Result, Tensor, TensorError};

/// Projection weights of one attention layer. Every weight is `[D, D]` in
/// `[out, in]` order; biases are `[D]`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams<'a, T: Element> {
    pub wq: &'a Tensor<T>,
    pub wk: &'a Tensor<T>,
    pub wv: &'a Tensor<T>,
    pub wo: &'a Tensor<T>,
    pub bq: Option<&'a Tensor<T>>,
    pub bk: Option<&'a Tensor<T>>,
    pub bv: Option<&'a Tensor<T>>,
    pub bo: Option<&'a Tensor<T>>,
}

impl<'a, T: Element> AttentionParams<'a, T> {
    pub fn without_bias(
        wq: &'a Tensor<T>,
        wk: &'a Tensor<T>,
        wv: &'a Tensor<T>,
        wo: &'a Tensor<T>,
    ) -> Self {
        Self {
            wq,
            wk,
            wv,
            wo,
            bq: None,
            bk: None,
            bv: None,
            bo: None,
        }
    }
}

/// Scaled dot-product self-attention over the `N` tokens of `x: [N, D]`.
///
/// Each of the `heads` heads attends over a `D / heads` slice of the
/// projected queries, keys and values with scale `1/sqrt(D / heads)`; head
/// outputs are concatenated and passed through the output projection.
pub fn multi_head_attention<T: Element>(
    x: &Tensor<T>,
    params: AttentionParams<'_, T>,
    heads: usize,
) -> Result<Tensor<T>> {
    let (n, d) = match x.shape()[..] {
        [n, d] => (n, d),
        _ => {
            return Err(mismatch(
                "attention",
                format!("input must be [N,D], got {:?}", x.shape()),
            ))
        }
    };
    if heads == 0 || d % heads != 0 {
        return Err(TensorError::InvalidHyperparameter {
            op: "attention",
            detail: format!("model dim {d} not divisible by {heads} heads"),
        });
    }
    for w in [params.wq, params.wk, params.wv, params.wo] {
        if w.shape() != [d, d] {
            return Err(mismatch(
                "attention",
                format!("projection must be [{d},{d}], got {:?}", w.shape()),
            ));
        }
    }
    let q = linear(x, params.wq, params.bq)?;
    let k = linear(x, params.wk, params.bk)?;
    let v = linear(x, params.wv, params.bv)?;
    let hd = d / heads;
    let scale = cst::<T>(1.0 / (hd as f64).sqrt());
    let (q, k, v) = (q.data(), k.data(), v.data());
    let mut ctx = vec![T::zero(); n * d];
    let mut scores = vec![T::zero(); n];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..n {
            let qi = &q[i * d + off..i * d + off + hd];
            let mut max = T::neg_infinity();
            for (j, s) in scores.iter_mut().enumerate() {
                let kj = &k[j * d + off..j * d + off + hd];
                let dot = qi
                    .iter()
                    .zip(kj)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                *s = dot * scale;
                max = max.max(*s);
            }
            let mut sum = T::zero();
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                sum = sum + *s;
            }
            let out = &mut ctx[i * d + off..i * d + off + hd];
            for (j, &s) in scores.iter().enumerate() {
                let a = s / sum;
                let vj = &v[j * d + off..j * d + off + hd];
                for (o, &vv) in out.iter_mut().zip(vj) {
                    *o = *o + a * vv;
                }
            }
        }
    }
    let ctx = Tensor::from_vec(vec![n, d], ctx)?;
    linear(&ctx, params.wo, params.bo)
}

/// Applies [`multi_head_attention`] independently to each `[N, D]` slice of
/// a `[B, N, D]` tensor.
pub fn multi_head_attention_batched<T: Element>(
    x: &Tensor<T>,
    params: AttentionParams<'_, T>,
    heads: usize,
) -> Result<Tensor<T>> {
    let (b, n, d) = x.dims3("attention")?;
    let mut out = Vec::with_capacity(x.len());
    for slice in x.data().chunks_exact(n * d) {
        let t = Tensor::from_vec(vec![n, d], slice.to_vec())?;
        out.extend_from_slice(multi_head_attention(&t, params, heads)?.data());
    }
    Tensor::from_vec(vec![b, n, d], out)
}
