use crate::error::{Error, Result};

use serde::{Deserialize, Serialize};

use super::{ParamSet, Scalar, Tensor};

/// Factor that brings the global gradient norm down to `max`, or 1.
fn clip_scale<T: Scalar>(max: Option<T>, grads: &[Option<Tensor<T>>]) -> T {
    let Some(max) = max else { return T::one() };
    let norm = grads
        .iter()
        .flatten()
        .flat_map(|g| g.data().iter().map(|&x| x * x))
        .sum::<T>()
        .sqrt();
    if norm > max {
        max / norm
    } else {
        T::one()
    }
}

fn check_learning_rate(learning_rate: f64) -> Result<()> {
    if learning_rate > 0.0 && learning_rate.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")))
    }
}

/// Stochastic gradient descent with optional heavy-ball momentum and global
/// gradient-norm clipping.
#[derive(Clone, Debug)]
pub struct Sgd<T = f32> {
    learning_rate: T,
    momentum: T,
    clip_norm: Option<T>,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        check_learning_rate(learning_rate)?;
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must lie in [0,1), got {momentum}")));
        }
        Ok(Self {
            learning_rate: T::from_f64(learning_rate),
            momentum: T::from_f64(momentum),
            clip_norm: None,
            velocity: Vec::new(),
        })
    }

    pub fn with_clip_norm(mut self, max_norm: Option<f64>) -> Self {
        self.clip_norm = max_norm.map(T::from_f64);
        self
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: T) {
        self.learning_rate = lr;
    }

    /// Applies one update. `grads[i]` belongs to the i-th parameter; `None`
    /// leaves that parameter untouched.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Option<Tensor<T>>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::shape("sgd", &[params.len()], &[grads.len()]));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        }
        let scale = clip_scale(self.clip_norm, grads);
        let (lr, mu) = (self.learning_rate, self.momentum);
        for ((param, grad), vel) in params.tensors_mut().zip(grads).zip(&mut self.velocity) {
            let Some(grad) = grad else { continue };
            if grad.len() != param.len() {
                return Err(Error::shape("sgd", param.shape(), grad.shape()));
            }
            if mu == T::zero() && scale == T::one() {
                for (p, &g) in param.data_mut().iter_mut().zip(grad.data()) {
                    *p = *p - lr * g;
                }
                continue;
            }
            for ((p, &g), v) in param.data_mut().iter_mut().zip(grad.data()).zip(vel.iter_mut()) {
                *v = mu * *v + g * scale;
                *p = *p - lr * *v;
            }
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates and the same clipping as [`Sgd`].
/// Per-coordinate step sizes make it far less sensitive to badly scaled
/// gradients, which matters for multiplicative interactions learned through
/// saturating units.
#[derive(Clone, Debug)]
pub struct Adam<T = f32> {
    learning_rate: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    clip_norm: Option<T>,
    steps: i32,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64) -> Result<Self> {
        check_learning_rate(learning_rate)?;
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0,1), got {b}")));
            }
        }
        Ok(Self {
            learning_rate: T::from_f64(learning_rate),
            beta1: T::from_f64(beta1),
            beta2: T::from_f64(beta2),
            epsilon: T::from_f64(1e-8),
            clip_norm: None,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn with_clip_norm(mut self, max_norm: Option<f64>) -> Self {
        self.clip_norm = max_norm.map(T::from_f64);
        self
    }

    /// Same contract as [`Sgd::step`]. Skipped parameters keep their moments.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Option<Tensor<T>>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::shape("adam", &[params.len()], &[grads.len()]));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
            self.second = self.first.clone();
        }
        let scale = clip_scale(self.clip_norm, grads);
        self.steps += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = T::one() - b1.powi(self.steps);
        let c2 = T::one() - b2.powi(self.steps);
        let entries = params.tensors_mut().zip(grads).zip(self.first.iter_mut().zip(&mut self.second));
        for ((param, grad), (m, v)) in entries {
            let Some(grad) = grad else { continue };
            if grad.len() != param.len() {
                return Err(Error::shape("adam", param.shape(), grad.shape()));
            }
            for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g * scale;
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p = *p - self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Which update rule a trainer uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::Config(format!("unknown optimizer `{s}` (sgd|adam)"))),
        }
    }
}

/// Either optimizer behind one `step`.
#[derive(Clone, Debug)]
pub enum Optimizer<T = f32> {
    Sgd(Sgd<T>),
    Adam(Adam<T>),
}

impl<T: Scalar> Optimizer<T> {
    /// `momentum` is the heavy-ball coefficient for SGD and `beta1` for Adam
    /// (with `beta2 = 0.999`).
    pub fn new(kind: OptimizerKind, learning_rate: f64, momentum: f64, clip_norm: Option<f64>) -> Result<Self> {
        Ok(match kind {
            OptimizerKind::Sgd => Self::Sgd(Sgd::new(learning_rate, momentum)?.with_clip_norm(clip_norm)),
            OptimizerKind::Adam => Self::Adam(Adam::new(learning_rate, momentum, 0.999)?.with_clip_norm(clip_norm)),
        })
    }

    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Option<Tensor<T>>]) -> Result<()> {
        match self {
            Self::Sgd(o) => o.step(params, grads),
            Self::Adam(o) => o.step(params, grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    #[test]
    fn plain_step_is_exact() {
        let mut params = ParamSet::<f32>::new();
        params.add("w", Tensor::vector(vec![1.0, -2.0])).unwrap();
        let grads = vec![Some(Tensor::vector(vec![0.5, 0.25]))];
        let mut sgd = Sgd::new(0.1, 0.0).unwrap();
        sgd.step(&mut params, &grads).unwrap();
        let w = params.by_name("w").unwrap().data();
        assert_eq!(w[0], 1.0f32 - 0.1f32 * 0.5f32);
        assert_eq!(w[1], -2.0f32 - 0.1f32 * 0.25f32);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Sgd::<f32>::new(0.0, 0.0).is_err());
        assert!(Sgd::<f32>::new(0.1, 1.0).is_err());
        assert!(Sgd::<f32>::new(0.1, -0.1).is_err());
    }

    fn quadratic_loss(params: &ParamSet<f64>, tape: &mut Tape<f64>) -> (crate::autodiff::Var, crate::autodiff::Bound) {
        // f(w) = 0.5 * sum(curv * w^2), curvatures 1 and 4
        let bound = params.bind(tape);
        let w = bound.vars()[0];
        let c = tape.constant(Tensor::vector(vec![1.0, 4.0]));
        let sq = tape.hadamard(w, w).unwrap();
        let weighted = tape.hadamard(sq, c).unwrap();
        let s = tape.sum_all(weighted);
        (tape.scale(s, 0.5), bound)
    }

    #[test]
    fn descends_a_convex_quadratic_below_the_curvature_bound() {
        for momentum in [0.0, 0.5] {
            let mut params = ParamSet::<f64>::new();
            params.add("w", Tensor::vector(vec![3.0, -2.0])).unwrap();
            // largest curvature is 4, so lr < 2/4 converges
            let mut sgd = Sgd::new(0.2, momentum).unwrap();
            let mut last = f64::INFINITY;
            let mut first = None;
            for _ in 0..30 {
                let mut tape = Tape::new();
                let (loss, bound) = quadratic_loss(&params, &mut tape);
                let value = tape.value(loss).item();
                first.get_or_insert(value);
                if momentum == 0.0 {
                    assert!(value < last);
                }
                last = value;
                tape.backward(loss).unwrap();
                sgd.step(&mut params, &bound.grads(&tape)).unwrap();
            }
            assert!(last < 1e-3 * first.unwrap());
        }
    }

    #[test]
    fn clipping_bounds_the_update() {
        let mut params = ParamSet::<f32>::new();
        params.add("w", Tensor::vector(vec![0.0, 0.0])).unwrap();
        let mut sgd = Sgd::new(1.0, 0.0).unwrap().with_clip_norm(Some(1.0));
        sgd.step(&mut params, &[Some(Tensor::vector(vec![30.0, 40.0]))]).unwrap();
        let w = params.by_name("w").unwrap().data();
        assert!((w[0] + 0.6).abs() < 1e-6 && (w[1] + 0.8).abs() < 1e-6);
    }

    #[test]
    fn first_adam_step_moves_each_coordinate_by_the_learning_rate() {
        // bias correction makes m̂/√v̂ = sign(g) on step one
        let mut params = ParamSet::<f64>::new();
        params.add("w", Tensor::vector(vec![1.0, -2.0, 0.5])).unwrap();
        let mut adam = Adam::new(0.01, 0.9, 0.999).unwrap();
        adam.step(&mut params, &[Some(Tensor::vector(vec![3.0, -0.001, 0.0]))]).unwrap();
        let w = params.by_name("w").unwrap().data();
        assert!((w[0] - 0.99).abs() < 1e-9);
        assert!((w[1] + 1.99).abs() < 1e-5);
        assert_eq!(w[2], 0.5);
    }

    #[test]
    fn adam_descends_a_badly_scaled_quadratic() {
        let mut params = ParamSet::<f64>::new();
        params.add("w", Tensor::vector(vec![3.0, -2.0])).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.9, None).unwrap();
        let mut first = None;
        let mut last = 0.0;
        for _ in 0..300 {
            let mut tape = Tape::new();
            let (loss, bound) = quadratic_loss(&params, &mut tape);
            last = tape.value(loss).item();
            first.get_or_insert(last);
            tape.backward(loss).unwrap();
            opt.step(&mut params, &bound.grads(&tape)).unwrap();
        }
        assert!(last < 1e-3 * first.unwrap());
        assert!(Adam::<f32>::new(0.1, 1.0, 0.9).is_err());
        assert_eq!("adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
