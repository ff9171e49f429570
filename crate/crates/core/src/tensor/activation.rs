use super::{Element, Result, Tensor, TensorError};

#[inline]
pub(crate) fn sigmoid_scalar<T: Element>(x: T) -> T {
    // Branch on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

/// `x * sigmoid(x)`, elementwise.
pub fn silu<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| x * sigmoid_scalar(x))
}

/// Softmax along `axis`, with the slice maximum subtracted before
/// exponentiation.
pub fn softmax<T: Element>(input: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let shape = input.shape();
    if axis >= shape.len() {
        return Err(TensorError::InvalidAxis {
            op: "softmax",
            axis,
            rank: shape.len(),
        });
    }
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let x = input.data();
    let mut out = vec![T::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * n + j) * inner + i;
            let max = (0..n).map(|j| x[idx(j)]).fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for j in 0..n {
                let e = (x[idx(j)] - max).exp();
                out[idx(j)] = e;
                sum = sum + e;
            }
            for j in 0..n {
                out[idx(j)] = out[idx(j)] / sum;
            }
        }
    }
    Tensor::from_vec(shape.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn silu_at_zero() {
        let t = Tensor::vector(vec![0.0f32]).unwrap();
        assert_eq!(silu(&t).data(), &[0.0]);
    }

    #[test]
    fn softmax_uniform_is_stable() {
        for a in [0.0f32, 1.0, -50.0, 1000.0] {
            let t = Tensor::vector(vec![a; 3]).unwrap();
            let s = softmax(&t, 0).unwrap();
            for &v in s.data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn softmax_bad_axis() {
        let t = Tensor::<f32>::zeros(&[2, 2]).unwrap();
        assert!(matches!(
            softmax(&t, 2),
            Err(TensorError::InvalidAxis { .. })
        ));
    }

    #[test]
    fn softmax_over_leading_axis() {
        let t = Tensor::from_vec(vec![2, 2], vec![0.0f32, 1.0, 0.0, 1.0]).unwrap();
        let s = softmax(&t, 0).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn softmax_slices_sum_to_one(
            rows in 1usize..5,
            cols in 1usize..9,
            seed in prop::collection::vec(-1.0e4f32..1.0e4, 40),
        ) {
            let t = Tensor::from_fn(&[rows, cols], |i| seed[i % seed.len()]).unwrap();
            let s = softmax(&t, 1).unwrap();
            prop_assert!(s.all_finite());
            for r in 0..rows {
                let sum: f32 = s.data()[r * cols..(r + 1) * cols].iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn softmax_shift_invariant(
            vals in prop::collection::vec(-8i32..8, 1..9),
            shift in -64i32..64,
        ) {
            // Quarter-integers keep both the inputs and the shifted inputs exact.
            let t = Tensor::vector(vals.iter().map(|&v| v as f32 * 0.25).collect()).unwrap();
            let shifted = t.map(|x| x + shift as f32);
            let a = softmax(&t, 0).unwrap();
            let b = softmax(&shifted, 0).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn silu_finite_for_extremes(x in -1.0e4f32..1.0e4) {
            let t = Tensor::vector(vec![x]).unwrap();
            prop_assert!(silu(&t).all_finite());
            prop_assert!(sigmoid(&t).all_finite());
        }
    }
}
