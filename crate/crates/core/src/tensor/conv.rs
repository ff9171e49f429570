use super::{mismatch, Element, Result, Tensor, TensorError};

/// Stride and symmetric zero padding of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dParams {
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dParams {
    pub const fn new(stride: usize, padding: usize) -> Self {
        Self { stride, padding }
    }
}

impl Default for Conv2dParams {
    fn default() -> Self {
        Self::new(1, 0)
    }
}

/// `floor((input + 2*padding - kernel) / stride) + 1`, or `None` when the
/// kernel does not fit the padded input.
pub fn conv_output_dim(input: usize, kernel: usize, params: Conv2dParams) -> Option<usize> {
    let padded = input + 2 * params.padding;
    if params.stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / params.stride + 1)
}

/// Dense 2-D convolution: input `[C_in,H,W]`, kernel `[C_out,C_in,kH,kW]`,
/// optional bias `[C_out]`.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    params: Conv2dParams,
) -> Result<Tensor<T>> {
    conv2d_grouped(input, kernel, bias, params, 1)
}

/// Depthwise convolution: every channel of `[C,H,W]` is convolved with its
/// own `[kH,kW]` slice of the `[C,kH,kW]` kernel.
pub fn depthwise_conv2d<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    params: Conv2dParams,
) -> Result<Tensor<T>> {
    let (c, _, _) = input.dims3("depthwise_conv2d")?;
    let (kc, kh, kw) = match kernel.shape()[..] {
        [kc, kh, kw] => (kc, kh, kw),
        _ => {
            return Err(mismatch(
                "depthwise_conv2d",
                format!("kernel must be [C,kH,kW], got {:?}", kernel.shape()),
            ))
        }
    };
    if kc != c {
        return Err(mismatch(
            "depthwise_conv2d",
            format!("input has {c} channels, kernel has {kc}"),
        ));
    }
    let k4 = kernel.clone().reshape(&[c, 1, kh, kw])?;
    conv2d_grouped(input, &k4, bias, params, c)
}

/// Grouped convolution. The kernel is `[C_out, C_in/groups, kH, kW]`.
pub fn conv2d_grouped<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    params: Conv2dParams,
    groups: usize,
) -> Result<Tensor<T>> {
    const OP: &str = "conv2d";
    if params.stride < 1 {
        return Err(TensorError::InvalidHyperparameter {
            op: OP,
            detail: "stride must be >= 1".into(),
        });
    }
    if groups == 0 {
        return Err(TensorError::InvalidHyperparameter {
            op: OP,
            detail: "groups must be >= 1".into(),
        });
    }
    let (c_in, h, w) = input.dims3(OP)?;
    let (c_out, kc_in, kh, kw) = match kernel.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(mismatch(
                OP,
                format!(
                    "kernel must be [C_out,C_in,kH,kW], got {:?}",
                    kernel.shape()
                ),
            ))
        }
    };
    if c_in % groups != 0 || c_out % groups != 0 || kc_in * groups != c_in {
        return Err(mismatch(
            OP,
            format!("input has {c_in} channels, kernel expects {kc_in} x {groups} groups"),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(mismatch(
                OP,
                format!("bias must be [{c_out}], got {:?}", b.shape()),
            ));
        }
    }
    let (oh, ow) = match (
        conv_output_dim(h, kh, params),
        conv_output_dim(w, kw, params),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(TensorError::InvalidHyperparameter {
                op: OP,
                detail: format!(
                    "kernel {kh}x{kw} larger than padded input {}x{}",
                    h + 2 * params.padding,
                    w + 2 * params.padding
                ),
            })
        }
    };

    let x = input.data();
    let k = kernel.data();
    let (s, p) = (params.stride, params.padding);
    let out_per_group = c_out / groups;
    let mut out = vec![T::zero(); c_out * oh * ow];

    // Valid output index ranges per kernel offset, so the inner loop runs
    // without bounds tests.
    let range = |n_in: usize, n_out: usize, offset: usize| -> (usize, usize) {
        // need 0 <= o*s + offset - p < n_in
        let lo = if p > offset {
            (p - offset).div_ceil(s)
        } else {
            0
        }
        .min(n_out);
        let hi = if n_in + p > offset {
            ((n_in + p - offset - 1) / s + 1).min(n_out)
        } else {
            0
        };
        (lo, hi.max(lo))
    };

    for oc in 0..c_out {
        let g = oc / out_per_group;
        let plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        if let Some(b) = bias {
            plane.fill(b.data()[oc]);
        }
        for icg in 0..kc_in {
            let ic = g * kc_in + icg;
            let xin = &x[ic * h * w..(ic + 1) * h * w];
            for ky in 0..kh {
                let (oy0, oy1) = range(h, oh, ky);
                for kx in 0..kw {
                    let wv = k[((oc * kc_in + icg) * kh + ky) * kw + kx];
                    let (ox0, ox1) = range(w, ow, kx);
                    if ox0 == ox1 {
                        continue;
                    }
                    for oy in oy0..oy1 {
                        let iy = oy * s + ky - p;
                        let row = &xin[iy * w..(iy + 1) * w];
                        let orow = &mut plane[oy * ow..(oy + 1) * ow];
                        if s == 1 {
                            let ix0 = ox0 + kx - p;
                            for (o, &xi) in
                                orow[ox0..ox1].iter_mut().zip(&row[ix0..ix0 + (ox1 - ox0)])
                            {
                                *o = *o + wv * xi;
                            }
                        } else {
                            for ox in ox0..ox1 {
                                orow[ox] = orow[ox] + wv * row[ox * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(vec![c_out, oh, ow], out)
}
