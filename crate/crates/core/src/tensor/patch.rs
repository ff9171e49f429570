//! Patch flattening for the transformer part of a MobileViT block.
//!
//! Layout of `unfold` output `[P, N, C]`: `p = i * pw + j` indexes the
//! position inside a patch (row `i`, column `j`), `n = a * (W / pw) + b`
//! indexes the patch (patch row `a`, patch column `b`). Element `(p, n, c)`
//! is `x[c, a * ph + i, b * pw + j]`. The patch-internal index is major so
//! that attention runs over the `N` patches sharing a position `p`.

use super::{Element, Result, Tensor, TensorError};

fn check_patch(op: &'static str, h: usize, w: usize, ph: usize, pw: usize) -> Result<()> {
    if ph == 0 || pw == 0 {
        return Err(TensorError::InvalidHyperparameter {
            op,
            detail: "patch dims must be >= 1".into(),
        });
    }
    if !h.is_multiple_of(ph) || !w.is_multiple_of(pw) {
        return Err(TensorError::NotDivisible { op, h, w, ph, pw });
    }
    Ok(())
}

/// `[C,H,W] -> [ph*pw, (H/ph)*(W/pw), C]`.
pub fn unfold<T: Element>(input: &Tensor<T>, ph: usize, pw: usize) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3("unfold")?;
    check_patch("unfold", h, w, ph, pw)?;
    let (nh, nw) = (h / ph, w / pw);
    let (p_count, n_count) = (ph * pw, nh * nw);
    let x = input.data();
    let mut out = vec![T::zero(); input.len()];
    for i in 0..ph {
        for j in 0..pw {
            let p = i * pw + j;
            for a in 0..nh {
                for b in 0..nw {
                    let n = a * nw + b;
                    let (y, xx) = (a * ph + i, b * pw + j);
                    let dst = (p * n_count + n) * c;
                    for ch in 0..c {
                        out[dst + ch] = x[(ch * h + y) * w + xx];
                    }
                }
            }
        }
    }
    Tensor::from_vec(vec![p_count, n_count, c], out)
}

/// Inverse of [`unfold`]: `[ph*pw, N, C] -> [C,H,W]`.
pub fn fold<T: Element>(
    input: &Tensor<T>,
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
) -> Result<Tensor<T>> {
    check_patch("fold", h, w, ph, pw)?;
    let (nh, nw) = (h / ph, w / pw);
    let (p_count, n_count, c) = input.dims3("fold")?;
    if p_count != ph * pw || n_count != nh * nw {
        return Err(super::mismatch(
            "fold",
            format!(
                "expected [{}, {}, C] for {h}x{w} with {ph}x{pw} patches, got {:?}",
                ph * pw,
                nh * nw,
                input.shape()
            ),
        ));
    }
    let x = input.data();
    let mut out = vec![T::zero(); input.len()];
    for i in 0..ph {
        for j in 0..pw {
            let p = i * pw + j;
            for a in 0..nh {
                for b in 0..nw {
                    let n = a * nw + b;
                    let (y, xx) = (a * ph + i, b * pw + j);
                    let src = (p * n_count + n) * c;
                    for ch in 0..c {
                        out[(ch * h + y) * w + xx] = x[src + ch];
                    }
                }
            }
        }
    }
    Tensor::from_vec(vec![c, h, w], out)
}
