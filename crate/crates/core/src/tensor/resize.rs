use super::{cst, Element, Result, Tensor, TensorError};

/// Bilinear resize of `[C,H,W]` to `[C,out_h,out_w]` with half-pixel
/// centers (`src = (dst + 0.5) * in / out - 0.5`, clamped at the border).
pub fn resize_bilinear<T: Element>(
    input: &Tensor<T>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3("resize_bilinear")?;
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::InvalidHyperparameter {
            op: "resize_bilinear",
            detail: "output dims must be >= 1".into(),
        });
    }
    if (out_h, out_w) == (h, w) {
        return Ok(input.clone());
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, T)> {
        let ratio = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * ratio - 0.5).max(0.0);
                let i0 = (src.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, cst::<T>(src - i0 as f64))
            })
            .collect()
    };
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let x = input.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for plane in x.chunks_exact(h * w) {
        for &(y0, y1, ly) in &ys {
            for &(x0, x1, lx) in &xs {
                let top = plane[y0 * w + x0] * (T::one() - lx) + plane[y0 * w + x1] * lx;
                let bot = plane[y1 * w + x0] * (T::one() - lx) + plane[y1 * w + x1] * lx;
                out.push(top * (T::one() - ly) + bot * ly);
            }
        }
    }
    Tensor::from_vec(vec![c, out_h, out_w], out)
}
