use super::{cst, mismatch, Element, Result, Tensor};

/// `[m,k] x [k,n] -> [m,n]`.
pub fn matmul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = match a.shape()[..] {
        [m, k] => (m, k),
        _ => {
            return Err(mismatch(
                "matmul",
                format!("lhs must be 2-D, got {:?}", a.shape()),
            ))
        }
    };
    let (k2, n) = match b.shape()[..] {
        [k2, n] => (k2, n),
        _ => {
            return Err(mismatch(
                "matmul",
                format!("rhs must be 2-D, got {:?}", b.shape()),
            ))
        }
    };
    if k != k2 {
        return Err(mismatch(
            "matmul",
            format!("inner dims {k} and {k2} differ"),
        ));
    }
    let (x, y) = (a.data(), b.data());
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = x[i * k + p];
            for (o, &bv) in orow.iter_mut().zip(&y[p * n..(p + 1) * n]) {
                *o = *o + av * bv;
            }
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// Affine map over the last axis: `y = x W^T + b`, with `W` stored as
/// `[out, in]`. Leading axes are treated as independent rows.
pub fn linear<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (n_out, n_in) = match weight.shape()[..] {
        [o, i] => (o, i),
        _ => {
            return Err(mismatch(
                "linear",
                format!("weight must be [out,in], got {:?}", weight.shape()),
            ))
        }
    };
    let last = input.shape().last().copied().unwrap_or(1);
    if last != n_in {
        return Err(mismatch(
            "linear",
            format!("input feature dim {last} != weight in-dim {n_in}"),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [n_out] {
            return Err(mismatch(
                "linear",
                format!("bias must be [{n_out}], got {:?}", b.shape()),
            ));
        }
    }
    let rows = input.len() / n_in;
    let (x, w) = (input.data(), weight.data());
    let mut out = Vec::with_capacity(rows * n_out);
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let wr = &w[o * n_in..(o + 1) * n_in];
            let mut acc = bias.map_or(T::zero(), |b| b.data()[o]);
            for (&a, &b) in xr.iter().zip(wr) {
                acc = acc + a * b;
            }
            out.push(acc);
        }
    }
    let mut shape = input.shape().to_vec();
    match shape.last_mut() {
        Some(d) => *d = n_out,
        None => shape.push(n_out),
    }
    Tensor::from_vec(shape, out)
}

pub fn add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(mismatch(
            "add",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x + y)
        .collect();
    Tensor::from_vec(a.shape().to_vec(), data)
}

/// Stacks `[C1,H,W]` and `[C2,H,W]` into `[C1+C2,H,W]`.
pub fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (c1, h, w) = a.dims3("concat_channels")?;
    let (c2, h2, w2) = b.dims3("concat_channels")?;
    if (h, w) != (h2, w2) {
        return Err(mismatch(
            "concat_channels",
            format!("spatial dims {h}x{w} vs {h2}x{w2}"),
        ));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(vec![c1 + c2, h, w], data)
}

/// Mean over spatial positions: `[C,H,W] -> [C]`.
pub fn global_avg_pool<T: Element>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3("global_avg_pool")?;
    let hw = h * w;
    let scale = cst::<T>(1.0 / hw as f64);
    let data = input
        .data()
        .chunks_exact(hw)
        .map(|plane| plane.iter().copied().sum::<T>() * scale)
        .collect();
    Tensor::from_vec(vec![c], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul() {
        let i = Tensor::from_fn(&[3, 3], |k| if k % 4 == 0 { 1.0f32 } else { 0.0 }).unwrap();
        let x = Tensor::from_fn(&[3, 2], |k| k as f32 * 0.5 - 1.0).unwrap();
        assert_eq!(matmul(&i, &x).unwrap(), x);
        assert!(matmul(&x, &x).is_err());
    }

    #[test]
    fn linear_matches_matmul_with_transpose() {
        let x = Tensor::from_fn(&[2, 3], |k| k as f32).unwrap();
        let w = Tensor::from_fn(&[4, 3], |k| (k as f32) * 0.1).unwrap();
        let b = Tensor::from_fn(&[4], |k| k as f32).unwrap();
        let y = linear(&x, &w, Some(&b)).unwrap();
        let wt = Tensor::from_fn(&[3, 4], |k| w.data()[(k % 4) * 3 + k / 4]).unwrap();
        let r = matmul(&x, &wt).unwrap();
        for (i, (&a, &c)) in y.data().iter().zip(r.data()).enumerate() {
            assert!((a - (c + b.data()[i % 4])).abs() < 1e-6);
        }
        assert_eq!(y.shape(), &[2, 4]);
    }

    #[test]
    fn linear_on_vector() {
        let x = Tensor::vector(vec![1.0f32, 2.0]).unwrap();
        let w = Tensor::from_vec(vec![1, 2], vec![3.0f32, 4.0]).unwrap();
        let y = linear(&x, &w, None).unwrap();
        assert_eq!(y.shape(), &[1]);
        assert_eq!(y.data(), &[11.0]);
    }

    #[test]
    fn pool_averages_positions() {
        let x = Tensor::from_vec(vec![2, 1, 2], vec![1.0f32, 3.0, -2.0, 2.0]).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().data(), &[2.0, 0.0]);
    }

    #[test]
    fn concat_checks_spatial_dims() {
        let a = Tensor::<f32>::zeros(&[1, 2, 2]).unwrap();
        let b = Tensor::<f32>::full(&[2, 2, 2], 1.0).unwrap();
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[3, 2, 2]);
        assert_eq!(&c.data()[4..], &[1.0; 8]);
        let d = Tensor::<f32>::zeros(&[1, 3, 2]).unwrap();
        assert!(concat_channels(&a, &d).is_err());
    }
}
