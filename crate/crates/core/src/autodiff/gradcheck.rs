//! Central finite differences, the reference the tape is checked against.

use super::{Bound, ParamSet, Scalar, Tape, Tensor, Var};
use crate::error::Result;

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate `i`.
pub fn finite_difference_gradient<T: Scalar>(
    mut f: impl FnMut(&Tensor<T>) -> T,
    x: &Tensor<T>,
    h: T,
) -> Tensor<T> {
    let mut probe = x.clone();
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.push((plus - minus) / two_h);
    }
    Tensor::new(x.shape().to_vec(), grad).expect("same shape")
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] over paired elements.
pub fn max_relative_error<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape(), "gradient shapes differ");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| relative_error(x.to_f64(), y.to_f64(), floor))
        .fold(0.0, f64::max)
}

/// Largest relative error between tape gradients and central differences over
/// every parameter of `params`. `build` records a scalar loss on a fresh tape.
pub fn param_gradient_error<T: Scalar>(
    params: &ParamSet<T>,
    build: impl Fn(&mut Tape<T>, &Bound) -> Result<Var>,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = build(&mut tape, &bound)?;
    tape.backward(loss)?;
    let mut worst = 0.0f64;
    for (i, grad) in bound.grads(&tape).into_iter().enumerate() {
        let original = params.get(bound.param_id(i));
        let analytic = grad.unwrap_or_else(|| Tensor::zeros(original.shape()));
        let mut probe = params.clone();
        let numeric = finite_difference_gradient(
            |t| {
                *probe.get_mut(bound.param_id(i)) = t.clone();
                let mut tp = Tape::new();
                let b = probe.bind_frozen(&mut tp);
                let l = build(&mut tp, &b).expect("loss builds at probe point");
                tp.value(l).item()
            },
            original,
            T::from_f64(h),
        );
        worst = worst.max(max_relative_error(&analytic, &numeric, floor));
    }
    Ok(worst)
}
