use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Ordered, named parameter tensors of one network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.values
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Record every parameter on `tape`, trainable or frozen.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.values
            .iter()
            .map(|v| tape.leaf(v.clone(), trainable))
            .collect()
    }

    /// Gradients of bound parameters after `tape.backward`.
    pub fn grads(&self, tape: &Tape, bound: &[Var]) -> Vec<Tensor> {
        bound
            .iter()
            .zip(&self.values)
            .map(|(v, p)| tape.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| (format!("{prefix}{n}"), v.clone()))
            .collect()
    }

    /// Overwrite every parameter from `source`, matching `prefix + name` and
    /// shape exactly.
    pub fn load_named(&mut self, prefix: &str, source: &[(String, Tensor)]) -> Result<()> {
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let key = format!("{prefix}{name}");
            let (_, t) = source
                .iter()
                .find(|(n, _)| *n == key)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))?;
            if t.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "{key}: shape {:?} does not match network {:?}",
                    t.shape(),
                    value.shape()
                )));
            }
            *value = t.clone();
        }
        Ok(())
    }
}

/// Affine layer `x W + b` with parameters stored in a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    w: usize,
    b: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    /// Weights uniform in `±gain/√inputs`, zero bias.
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamSet,
        name: &str,
        inputs: usize,
        outputs: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let bound = gain / (inputs as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let w = ps.add(format!("{name}.w"), Tensor::new(vec![inputs, outputs], data).expect("shape"));
        let b = ps.add(format!("{name}.b"), Tensor::zeros(&[1, outputs]));
        Self { w, b, inputs, outputs }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        let xw = tape.matmul(x, bound[self.w])?;
        tape.add_row(xw, bound[self.b])
    }
}

/// Stack of tanh hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhMlp {
    layers: Vec<Linear>,
}

impl TanhMlp {
    pub fn new<R: Rng + ?Sized>(ps: &mut ParamSet, name: &str, widths: &[usize], rng: &mut R) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(ps, &format!("{name}{i}"), w[0], w[1], 1.0, rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            let h = layer.forward(tape, bound, x)?;
            x = tape.tanh(h);
        }
        Ok(x)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }
}
