// SPDX-License-Identifier: Apache-2.0

//! Fully connected tanh networks: `W_L ∘ ρ ∘ W_{L-1} ∘ … ∘ ρ ∘ W_1` with
//! `W_ℓ(x) = A_ℓ x + b_ℓ` and no activation after the last affine map.
//!
//! Parameters live in one flat buffer, layer by layer, each layer stored as
//! `A_ℓ` row-major followed by `b_ℓ`. Gradients and optimizer state use the
//! same layout.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{PinnError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitScheme {
    /// Weights `U(-√(6/(n_in+n_out)), +√(6/(n_in+n_out)))`, biases zero.
    #[default]
    GlorotUniform,
    /// All parameters zero (useful for tests).
    Zeros,
}

/// Architecture `(N₀, …, N_L)` plus initialization settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub init: InitScheme,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>, seed: u64) -> Result<Self> {
        let spec = Self {
            widths,
            activation: Activation::Tanh,
            init: InitScheme::GlorotUniform,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `input → hidden × depth_hidden → output`, the equal-width convention.
    pub fn uniform(input: usize, hidden: usize, hidden_layers: usize, output: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden, hidden_layers));
        widths.push(output);
        Self::new(widths, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(PinnError::Usage(format!(
                "network needs at least input and output widths, got {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(PinnError::Usage(format!("zero layer width in {:?}", self.widths)));
        }
        Ok(())
    }

    /// `L`, the number of affine maps.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// `max(N₀, …, N_L)`.
    pub fn width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(0)
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.widths)
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// All weights and biases of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    widths: Vec<usize>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(widths: &[usize]) -> Self {
        Self {
            widths: widths.to_vec(),
            data: vec![0.0; param_count(widths)],
        }
    }

    pub fn from_flat(widths: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected = param_count(widths);
        if widths.len() < 2 || widths.contains(&0) {
            return Err(PinnError::Usage(format!("invalid widths {widths:?}")));
        }
        if data.len() != expected {
            return Err(PinnError::Usage(format!(
                "{} parameters supplied, widths {widths:?} need {expected}",
                data.len()
            )));
        }
        Ok(Self {
            widths: widths.to_vec(),
            data,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Offset of layer `l` (0-based) in the flat buffer.
    pub fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.widths[..=l])
    }

    /// `A_{l+1}` as an `N_{l+1} × N_l` view.
    pub fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        let (rows, cols) = (self.widths[l + 1], self.widths[l]);
        let off = self.layer_offset(l);
        ArrayView2::from_shape((rows, cols), &self.data[off..off + rows * cols]).unwrap()
    }

    /// `b_{l+1}`.
    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let (rows, cols) = (self.widths[l + 1], self.widths[l]);
        let off = self.layer_offset(l) + rows * cols;
        ArrayView1::from(&self.data[off..off + rows])
    }

    /// Write as text: a `widths` line followed by one value per line in the
    /// flat layer order. Values use round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# pinn parameter set v1\nwidths");
        for w in &self.widths {
            write!(out, " {w}").unwrap();
        }
        out.push('\n');
        for v in &self.data {
            writeln!(out, "{v:?}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut widths: Option<Vec<usize>> = None;
        let mut data = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("widths") {
                let parsed = rest
                    .split_whitespace()
                    .map(str::parse::<usize>)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| PinnError::Parse(format!("line {}: {e}", lineno + 1)))?;
                widths = Some(parsed);
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| PinnError::Parse(format!("line {}: {e}", lineno + 1)))?;
            data.push(v);
        }
        let widths = widths.ok_or_else(|| PinnError::Parse("missing widths line".into()))?;
        Self::from_flat(&widths, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Glorot-uniform weights and zero biases, seeded by `spec.seed`.
pub fn initialize(spec: &NetworkSpec) -> Result<ParamSet> {
    spec.validate()?;
    let mut params = ParamSet::zeros(&spec.widths);
    if spec.init == InitScheme::Zeros {
        return Ok(params);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for l in 0..spec.depth() {
        let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let off = params.layer_offset(l);
        for w in &mut params.data[off..off + n_in * n_out] {
            *w = dist.sample(&mut rng);
        }
    }
    Ok(params)
}

/// Plain forward pass for one input vector.
pub fn forward(params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.widths[0] {
        return Err(PinnError::Usage(format!(
            "input has {} components, network expects {}",
            x.len(),
            params.widths[0]
        )));
    }
    let mut a = x.to_vec();
    let last = params.num_layers() - 1;
    for l in 0..=last {
        let w = params.weights(l);
        let b = params.bias(l);
        let mut z: Vec<f64> = w
            .rows()
            .into_iter()
            .zip(b.iter())
            .map(|(row, bi)| row.iter().zip(&a).map(|(wij, aj)| wij * aj).sum::<f64>() + bi)
            .collect();
        if l < last {
            z.iter_mut().for_each(|v| *v = v.tanh());
        }
        a = z;
    }
    Ok(a)
}

/// Parameters recorded as tape leaves.
pub struct TapeParams {
    widths: Vec<usize>,
    pub vars: Vec<Var>,
}

impl TapeParams {
    pub fn new(tape: &mut Tape, params: &ParamSet) -> Self {
        Self {
            widths: params.widths.clone(),
            vars: params.data.iter().map(|&p| tape.var(p)).collect(),
        }
    }

    /// Record the forward pass for one input on the tape.
    pub fn forward(&self, tape: &mut Tape, x: &[Var]) -> Result<Vec<Var>> {
        if x.len() != self.widths[0] {
            return Err(PinnError::Usage(format!(
                "input has {} components, network expects {}",
                x.len(),
                self.widths[0]
            )));
        }
        let mut a = x.to_vec();
        let depth = self.widths.len() - 1;
        let mut off = 0;
        for l in 0..depth {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let mut next = Vec::with_capacity(n_out);
            for i in 0..n_out {
                let mut acc = self.vars[off + n_in * n_out + i];
                for (j, &aj) in a.iter().enumerate() {
                    let prod = tape.mul(self.vars[off + i * n_in + j], aj)?;
                    acc = tape.add(acc, prod)?;
                }
                if l + 1 < depth {
                    acc = tape.tanh(acc)?;
                }
                next.push(acc);
            }
            off += n_in * n_out + n_out;
            a = next;
        }
        Ok(a)
    }
}

/// Side of the interface a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Ω⁺, label `z = +1`.
    Inside,
    /// Ω⁻, label `z = −1`.
    Outside,
}

impl Region {
    pub fn label(self) -> f64 {
        match self {
            Region::Inside => 1.0,
            Region::Outside => -1.0,
        }
    }
}

/// Append the region label as an extra input coordinate.
pub fn augment_input(x: &[f64], region: Region) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.extend_from_slice(x);
    out.push(region.label());
    out
}

/// `((1+z)/2) f⁺(x) + ((1−z)/2) f⁻(x)`: the continuous extension over the
/// label coordinate that a single network represents.
pub fn blend_regions<F, G>(inside: F, outside: G, x: &[f64], z: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    0.5 * (1.0 + z) * inside(x) + 0.5 * (1.0 - z) * outside(x)
}
