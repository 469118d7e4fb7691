//! Layers shared by the tag, next-shot and QA models.
//!
//! Layers only remember [`ParamId`]s; the tensors live in the owning model's
//! [`ParamSet`], which is what gets bound to a tape and checkpointed.

use rand::Rng;

use crate::autodiff::{uniform, Bound, ParamId, ParamSet, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// `x·W + b`, with `W` stored `input×output`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    /// Weights uniform in `±1/√input`, bias zero.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let weight = params.add(format!("{name}.w"), uniform(rng, &[input, output], bound))?;
        let bias = if bias {
            Some(params.add(format!("{name}.b"), Tensor::zeros(&[output]))?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            input,
            output,
        })
    }

    /// Recovers the layout of a layer created by [`Linear::new`].
    pub fn from_params<T: Scalar>(params: &ParamSet<T>, name: &str) -> Result<Self> {
        let weight = params.id(&format!("{name}.w"))?;
        let (input, output) = params.get(weight).dims2("linear")?;
        let bias = params.id(&format!("{name}.b")).ok();
        if let Some(b) = bias {
            if params.get(b).shape() != [output] {
                return Err(Error::shape("linear bias", params.get(b).shape(), &[output]));
            }
        }
        Ok(Self {
            weight,
            bias,
            input,
            output,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul(x, bound[self.weight])?;
        match self.bias {
            Some(b) => tape.add_row(y, bound[b]),
            None => Ok(y),
        }
    }

    /// Tape-free evaluation on one row.
    pub fn apply<T: Scalar>(&self, params: &ParamSet<T>, x: &[T]) -> Vec<T> {
        let w = params.get(self.weight);
        let mut out = match self.bias {
            Some(b) => params.get(b).data().to_vec(),
            None => vec![T::zero(); self.output],
        };
        T::gemm(1, self.input, self.output, x, false, w.data(), false, &mut out, true);
        out
    }
}

/// Stack of [`Linear`] layers with `tanh` between them (none after the last).
/// Applied row-wise, this is a stack of 1×1 convolutions over a matrix whose
/// rows are candidates.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` includes the input width, e.g. `[in, 256, 64, 1]`.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        widths: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!("mlp `{name}` needs at least two widths")));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(params, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn from_params<T: Scalar>(params: &ParamSet<T>, name: &str) -> Result<Self> {
        let mut layers = Vec::new();
        while let Ok(layer) = Linear::from_params(params, &format!("{name}.{}", layers.len())) {
            if let Some(prev) = layers.last() {
                let prev: &Linear = prev;
                if prev.output != layer.input {
                    return Err(Error::shape("mlp", &[prev.output], &[layer.input]));
                }
            }
            layers.push(layer);
        }
        if layers.is_empty() {
            return Err(Error::Lookup(format!("no mlp layers under `{name}`")));
        }
        Ok(Self { layers })
    }

    pub fn input(&self) -> usize {
        self.layers[0].input
    }

    pub fn output(&self) -> usize {
        self.layers.last().map(|l| l.output).unwrap_or(0)
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input())
            .chain(self.layers.iter().map(|l| l.output))
            .collect()
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, bound, h)?;
            if i + 1 < self.layers.len() {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }

    /// Scores `n` candidates per query with the same weights: each row of the
    /// `B×q` `queries` is repeated `n` times, joined with the matching rows of
    /// the question-major `(B·n)×c` `candidates`, and mapped to one logit.
    /// Returns `B×n` pre-softmax scores.
    pub fn choice_logits<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        queries: Var,
        candidates: Var,
        n: usize,
    ) -> Result<Var> {
        let (b, q) = tape.value(queries).dims2("choice_logits")?;
        let (rows, c) = tape.value(candidates).dims2("choice_logits")?;
        if n == 0 || rows != b * n || q + c != self.input() || self.output() != 1 {
            return Err(Error::shape("choice_logits", &[rows, q + c, self.output()], &[b * n, self.input(), 1]));
        }
        let repeated = tape.repeat_rows(queries, n)?;
        let joined = tape.concat_cols(repeated, candidates)?;
        let scores = self.forward(tape, bound, joined)?;
        tape.reshape(scores, vec![b, n])
    }
}

/// Single-layer LSTM over row-batched inputs.
///
/// Gate weights are stored `(input+hidden)×hidden`, i.e. transposed relative to
/// the usual `W·[x;h]` notation, so a batch of rows `[x‖h]` multiplies on the
/// left.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub input_gate: Linear,
    pub forget_gate: Linear,
    pub output_gate: Linear,
    pub cell_gate: Linear,
    pub input: usize,
    pub hidden: usize,
}

impl Lstm {
    /// Weights uniform in `±1/√(input+hidden)`; biases zero except the forget
    /// gate, which starts at 1.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = input + hidden;
        let gate = |g: &str, params: &mut ParamSet<T>, rng: &mut R| {
            Linear::new(params, &format!("{name}.{g}"), fan_in, hidden, true, rng)
        };
        let input_gate = gate("i", params, rng)?;
        let forget_gate = gate("f", params, rng)?;
        let output_gate = gate("o", params, rng)?;
        let cell_gate = gate("g", params, rng)?;
        let fb = forget_gate.bias.expect("gate has bias");
        *params.get_mut(fb) = Tensor::full(&[hidden], T::one());
        Ok(Self {
            input_gate,
            forget_gate,
            output_gate,
            cell_gate,
            input,
            hidden,
        })
    }

    pub fn from_params<T: Scalar>(params: &ParamSet<T>, name: &str) -> Result<Self> {
        let input_gate = Linear::from_params(params, &format!("{name}.i"))?;
        let forget_gate = Linear::from_params(params, &format!("{name}.f"))?;
        let output_gate = Linear::from_params(params, &format!("{name}.o"))?;
        let cell_gate = Linear::from_params(params, &format!("{name}.g"))?;
        let hidden = input_gate.output;
        let input = input_gate
            .input
            .checked_sub(hidden)
            .ok_or_else(|| Error::shape("lstm", &[input_gate.input], &[hidden]))?;
        for g in [&forget_gate, &output_gate, &cell_gate] {
            if g.input != input_gate.input || g.output != hidden {
                return Err(Error::shape("lstm", &[g.input, g.output], &[input_gate.input, hidden]));
            }
        }
        Ok(Self {
            input_gate,
            forget_gate,
            output_gate,
            cell_gate,
            input,
            hidden,
        })
    }

    pub fn zero_state<T: Scalar>(&self, tape: &mut Tape<T>, batch: usize) -> (Var, Var) {
        let h = tape.constant(Tensor::zeros(&[batch, self.hidden]));
        let c = tape.constant(Tensor::zeros(&[batch, self.hidden]));
        (h, c)
    }

    /// One step: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
    pub fn step<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let (rows, width) = tape.value(x).dims2("lstm_step")?;
        if width != self.input {
            return Err(Error::shape("lstm_step", &[rows, width], &[rows, self.input]));
        }
        let xh = tape.concat_cols(x, h)?;
        let i = self.input_gate.forward(tape, bound, xh)?;
        let i = tape.sigmoid(i);
        let f = self.forget_gate.forward(tape, bound, xh)?;
        let f = tape.sigmoid(f);
        let o = self.output_gate.forward(tape, bound, xh)?;
        let o = tape.sigmoid(o);
        let g = self.cell_gate.forward(tape, bound, xh)?;
        let g = tape.tanh(g);
        let kept = tape.hadamard(f, c)?;
        let written = tape.hadamard(i, g)?;
        let c_next = tape.add(kept, written)?;
        let squashed = tape.tanh(c_next);
        let h_next = tape.hadamard(o, squashed)?;
        Ok((h_next, c_next))
    }

    /// Folds [`Lstm::step`] from the zero state over `inputs` (each `B×input`)
    /// and returns the hidden state after every step.
    pub fn run<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, inputs: &[Var]) -> Result<Vec<Var>> {
        let Some(&first) = inputs.first() else {
            return Err(Error::EmptyInput("lstm over an empty sequence".into()));
        };
        let batch = tape.value(first).dims2("lstm_run")?.0;
        let (mut h, mut c) = self.zero_state(tape, batch);
        let mut outputs = Vec::with_capacity(inputs.len());
        for &x in inputs {
            (h, c) = self.step(tape, bound, x, h, c)?;
            outputs.push(h);
        }
        Ok(outputs)
    }
}
