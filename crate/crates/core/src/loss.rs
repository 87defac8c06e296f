// SPDX-License-Identifier: Apache-2.0

//! Loss terms, residual norms and scalarization policies.
//!
//! A training step evaluates every condition of a problem into one
//! [`LossTerm`] (value plus parameter gradient) and then combines them as
//! `Σ λᵢ Lᵢ`. The weights `λᵢ` come from a [`ScalingPolicy`] and are treated
//! as constants with respect to the parameters.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Bernoulli, Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::autodiff::Tape;
use crate::error::{PinnError, Result};
use crate::jet::{self, Jet, JetTrace};
use crate::network::ParamSet;
use crate::problems::{Condition, EvalVars};

/// Denominator floor for loss and gradient ratios.
pub const RATIO_FLOOR: f64 = 1e-12;
/// Ratios and LRA estimates are clamped to `[RATIO_MIN, RATIO_MAX]`.
pub const RATIO_MIN: f64 = 1e-4;
pub const RATIO_MAX: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermKind {
    Pde,
    Bc,
    Ic,
    Data,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TermLabel {
    pub kind: TermKind,
    pub name: String,
}

impl TermLabel {
    pub fn new(kind: TermKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
        }
    }
}

impl fmt::Display for TermLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Maps a residual vector to one non-negative number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum NormKind {
    #[default]
    Mse,
    L1,
    L2,
    L3,
    Linf,
    L1L2L3,
    L2Linf,
    MseLinf,
}

impl NormKind {
    pub const ALL: [NormKind; 8] = [
        NormKind::Mse,
        NormKind::L1,
        NormKind::L2,
        NormKind::L3,
        NormKind::Linf,
        NormKind::L1L2L3,
        NormKind::L2Linf,
        NormKind::MseLinf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Mse => "mse",
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::L3 => "l3",
            NormKind::Linf => "linf",
            NormKind::L1L2L3 => "l1+l2+l3",
            NormKind::L2Linf => "l2+linf",
            NormKind::MseLinf => "mse+linf",
        }
    }

    fn components(self) -> &'static [NormKind] {
        match self {
            NormKind::L1L2L3 => &[NormKind::L1, NormKind::L2, NormKind::L3],
            NormKind::L2Linf => &[NormKind::L2, NormKind::Linf],
            NormKind::MseLinf => &[NormKind::Mse, NormKind::Linf],
            NormKind::Mse => &[NormKind::Mse],
            NormKind::L1 => &[NormKind::L1],
            NormKind::L2 => &[NormKind::L2],
            NormKind::L3 => &[NormKind::L3],
            NormKind::Linf => &[NormKind::Linf],
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = PinnError;
    fn from_str(s: &str) -> Result<Self> {
        NormKind::ALL
            .into_iter()
            .find(|n| n.name() == s.trim())
            .ok_or_else(|| PinnError::Config(format!("unknown norm '{s}'")))
    }
}

/// Count-normalized Lᵖ norm value and gradient.
fn lp_norm(r: &[f64], p: i32, grad: &mut [f64]) -> f64 {
    let n = r.len() as f64;
    let mean = r.iter().map(|x| x.abs().powi(p)).sum::<f64>() / n;
    let norm = mean.powf(1.0 / f64::from(p));
    if norm > 0.0 {
        let denom = n * norm.powi(p - 1);
        for (g, x) in grad.iter_mut().zip(r) {
            *g += x.signum() * x.abs().powi(p - 1) / denom;
        }
    }
    norm
}

fn single_norm(kind: NormKind, r: &[f64], grad: &mut [f64]) -> f64 {
    let n = r.len() as f64;
    match kind {
        NormKind::Mse => {
            for (g, x) in grad.iter_mut().zip(r) {
                *g += 2.0 * x / n;
            }
            r.iter().map(|x| x * x).sum::<f64>() / n
        }
        NormKind::L1 => {
            for (g, x) in grad.iter_mut().zip(r) {
                if *x != 0.0 {
                    *g += x.signum() / n;
                }
            }
            r.iter().map(|x| x.abs()).sum::<f64>() / n
        }
        NormKind::L2 => lp_norm(r, 2, grad),
        NormKind::L3 => lp_norm(r, 3, grad),
        NormKind::Linf => {
            // first index attaining the maximum
            let (idx, val) = r
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
            if r[idx] != 0.0 {
                grad[idx] += r[idx].signum();
            }
            val
        }
        _ => unreachable!("composite norms are expanded by the caller"),
    }
}

/// Norm value together with its gradient with respect to each residual.
pub fn norm_with_gradient(residuals: &[f64], norm: NormKind) -> Result<(f64, Vec<f64>)> {
    if residuals.is_empty() {
        return Err(PinnError::Usage("norm of an empty residual vector".into()));
    }
    let mut grad = vec![0.0; residuals.len()];
    let value = norm
        .components()
        .iter()
        .map(|&c| single_norm(c, residuals, &mut grad))
        .sum();
    Ok((value, grad))
}

pub fn apply_norm(residuals: &[f64], norm: NormKind) -> Result<f64> {
    norm_with_gradient(residuals, norm).map(|(v, _)| v)
}

/// One loss term with its parameter gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTerm {
    pub label: TermLabel,
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// All loss terms of one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBundle {
    pub terms: Vec<LossTerm>,
    pub epoch: u64,
}

impl LossBundle {
    pub fn values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.value).collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Residuals of one condition with their sensitivities to the network jets.
pub struct ResidualBatch {
    pub values: Vec<f64>,
    traces: Vec<JetTrace>,
    jets: Vec<Jet>,
    /// per point: ∂r/∂(leaf) in leaf order (eval by eval: value, firsts, seconds)
    partials: Vec<Vec<f64>>,
}

/// Evaluate the residual of `cond` at every sample point.
pub fn condition_residuals(cond: &Condition, params: &ParamSet, with_partials: bool) -> Result<ResidualBatch> {
    if params.widths().last() != Some(&1) {
        return Err(PinnError::Usage("PDE problems need a scalar-output network".into()));
    }
    let mut traces = Vec::with_capacity(cond.evals.len());
    let mut jets = Vec::with_capacity(cond.evals.len());
    for ev in &cond.evals {
        let (j, t) = jet::forward(params, ev.inputs.view(), &ev.request)?;
        jets.push(j);
        traces.push(t);
    }
    let n = cond.len();
    let mut values = Vec::with_capacity(n);
    let mut partials = Vec::with_capacity(if with_partials { n } else { 0 });
    let mut tape = Tape::with_capacity(64);
    let mut point = vec![0.0; cond.points.nrows()];
    for p in 0..n {
        tape.clear();
        let mut leaves = Vec::new();
        let vars: Vec<EvalVars> = jets
            .iter()
            .map(|j| {
                let value = tape.var(j.value[[0, p]]);
                let first: Vec<_> = j.first.iter().map(|m| tape.var(m[[0, p]])).collect();
                let second: Vec<_> = j.second.iter().map(|m| tape.var(m[[0, p]])).collect();
                leaves.push(value);
                leaves.extend(&first);
                leaves.extend(&second);
                EvalVars { value, first, second }
            })
            .collect();
        for (d, x) in point.iter_mut().enumerate() {
            *x = cond.points[[d, p]];
        }
        let r = (cond.residual)(&mut tape, &point, &vars)
            .map_err(|e| PinnError::NonFinite(format!("{} residual at point {point:?}: {e}", cond.label)))?;
        let rv = tape.value(r);
        if !rv.is_finite() {
            return Err(PinnError::NonFinite(format!("{} residual at point {point:?}", cond.label)));
        }
        values.push(rv);
        if with_partials {
            partials.push(tape.backward(r)?.wrt(&leaves));
        }
    }
    Ok(ResidualBatch {
        values,
        traces,
        jets,
        partials,
    })
}

/// Evaluate every condition into a loss term with its parameter gradient.
pub fn assemble(conditions: &[Condition], params: &ParamSet, norm: NormKind, epoch: u64) -> Result<LossBundle> {
    let mut terms = Vec::with_capacity(conditions.len());
    for cond in conditions {
        if cond.is_empty() {
            // e.g. an empty data set contributes no term
            continue;
        }
        let batch = condition_residuals(cond, params, true)?;
        let (value, dnorm) = norm_with_gradient(&batch.values, norm)?;
        let mut gradient = vec![0.0; params.len()];
        for (e, (jet_e, trace)) in batch.jets.iter().zip(&batch.traces).enumerate() {
            let offset: usize = batch.jets[..e].iter().map(|j| 1 + j.first.len() + j.second.len()).sum();
            let mut seeds = Jet::zeros_like(jet_e);
            for (p, part) in batch.partials.iter().enumerate() {
                let w = dnorm[p];
                if w == 0.0 {
                    continue;
                }
                let mut k = offset;
                seeds.value[[0, p]] = w * part[k];
                k += 1;
                for s in seeds.first.iter_mut() {
                    s[[0, p]] = w * part[k];
                    k += 1;
                }
                for s in seeds.second.iter_mut() {
                    s[[0, p]] = w * part[k];
                    k += 1;
                }
            }
            jet::backward_into(params, trace, &seeds, &mut gradient)?;
        }
        if !value.is_finite() {
            return Err(PinnError::NonFinite(format!("{} loss", cond.label)));
        }
        terms.push(LossTerm {
            label: cond.label.clone(),
            value,
            gradient,
        });
    }
    if terms.is_empty() {
        return Err(PinnError::Usage("no loss terms to assemble".into()));
    }
    Ok(LossBundle { terms, epoch })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochasticDist {
    /// `Norm(1, σ)` with σ = 0.25, redrawn until positive.
    Normal,
    /// `Uni(0.5, 1.5)`.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceMode {
    Fixed,
    /// Spread shrinks linearly to zero at the final epoch.
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalingPolicy {
    Fixed,
    Lra {
        alpha: f64,
    },
    SoftAdapt,
    ReLoBRaLo {
        temperature: f64,
        expected_rho: f64,
        alpha: f64,
        /// Softmax scale; `None` means the number of loss terms.
        m: Option<f64>,
    },
    Stochastic {
        dist: StochasticDist,
        variance: VarianceMode,
    },
}

impl ScalingPolicy {
    pub fn lra() -> Self {
        ScalingPolicy::Lra { alpha: 0.9 }
    }

    pub fn relobralo() -> Self {
        ScalingPolicy::ReLoBRaLo {
            temperature: 0.1,
            expected_rho: 0.999,
            alpha: 0.999,
            m: None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScalingPolicy::Fixed => "fixed".into(),
            ScalingPolicy::Lra { .. } => "lra".into(),
            ScalingPolicy::SoftAdapt => "softadapt".into(),
            ScalingPolicy::ReLoBRaLo { .. } => "relobralo".into(),
            ScalingPolicy::Stochastic { dist, variance } => {
                let d = match dist {
                    StochasticDist::Normal => "stoch-normal",
                    StochasticDist::Uniform => "stoch-uniform",
                };
                let v = match variance {
                    VarianceMode::Fixed => "fixed-var",
                    VarianceMode::Decreasing => "decreasing-var",
                };
                format!("{d}/{v}")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PinnError::Config(m.to_string()));
        match *self {
            ScalingPolicy::Lra { alpha } if !(0.0..=1.0).contains(&alpha) => bad("lra alpha must lie in [0, 1]"),
            ScalingPolicy::ReLoBRaLo {
                temperature,
                expected_rho,
                alpha,
                m,
            } => {
                if !(temperature > 0.0 && temperature.is_finite()) {
                    return bad("relobralo temperature must be positive");
                }
                if !(0.0..=1.0).contains(&expected_rho) || !(0.0..=1.0).contains(&alpha) {
                    return bad("relobralo rho and alpha must lie in [0, 1]");
                }
                if m.is_some_and(|m| !(m > 0.0)) {
                    return bad("relobralo m must be positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Evolving weights and history for one training run.
#[derive(Clone, Debug)]
pub struct ScalingState {
    pub policy: ScalingPolicy,
    pub lambdas: Vec<f64>,
    pub initial_losses: Option<Vec<f64>>,
    pub prev_losses: Option<Vec<f64>>,
    /// Total number of epochs, used by decreasing-variance schedules.
    pub total_epochs: u64,
    rng: ChaCha8Rng,
}

impl ScalingState {
    pub fn new(policy: ScalingPolicy, terms: usize, total_epochs: u64, seed: u64) -> Result<Self> {
        policy.validate()?;
        if terms == 0 {
            return Err(PinnError::Usage("scaling state needs at least one term".into()));
        }
        Ok(Self {
            policy,
            lambdas: vec![1.0; terms],
            initial_losses: None,
            prev_losses: None,
            total_epochs: total_epochs.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn terms(&self) -> usize {
        self.lambdas.len()
    }

    fn record_history(&mut self, values: &[f64]) {
        if self.initial_losses.is_none() {
            self.initial_losses = Some(values.to_vec());
        }
        self.prev_losses = Some(values.to_vec());
    }
}

/// Weighted total loss and its parameter gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalarized {
    pub total: f64,
    pub gradient: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `num / den` with the denominator floored and the result clamped.
pub fn guarded_ratio(num: f64, den: f64) -> f64 {
    (num / den.max(RATIO_FLOOR)).clamp(RATIO_MIN, RATIO_MAX)
}

/// `m · softmax(args / temperature)`, floored at the smallest positive
/// double so no weight is ever exactly zero.
pub fn scaled_softmax(args: &[f64], temperature: f64, m: f64) -> Vec<f64> {
    let scaled: Vec<f64> = args.iter().map(|a| a / temperature).collect();
    let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - top).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| (m * e / z).max(f64::MIN_POSITIVE)).collect()
}

/// SoftAdapt weights `softmax(Lᵢ(t) / Lᵢ(t−1))`.
pub fn softadapt_weights(current: &[f64], previous: &[f64]) -> Vec<f64> {
    let ratios: Vec<f64> = current.iter().zip(previous).map(|(c, p)| guarded_ratio(*c, *p)).collect();
    scaled_softmax(&ratios, 1.0, 1.0)
}

/// ReLoBRaLo balancing weights `λ̂^(t;t')`: `m · softmax(Lᵢ(t) / (𝒯 Lᵢ(t')))`.
pub fn relobralo_weights(current: &[f64], lookback: &[f64], temperature: f64, m: f64) -> Vec<f64> {
    let ratios: Vec<f64> = current.iter().zip(lookback).map(|(c, p)| guarded_ratio(*c, *p)).collect();
    scaled_softmax(&ratios, temperature, m)
}

/// LRA estimate `max|∇L_pde| / mean|∇L_i|`, clamped.
pub fn lra_estimate(pde_grad_max: f64, term_grad_mean: f64) -> f64 {
    guarded_ratio(pde_grad_max, term_grad_mean)
}

/// LRA update: non-PDE weights move towards the gradient-ratio estimate;
/// PDE weights stay 1.
pub fn lra_update(bundle: &LossBundle, state: &mut ScalingState) -> Result<Vec<f64>> {
    let ScalingPolicy::Lra { alpha } = state.policy else {
        return Err(PinnError::Usage("lra_update on a non-LRA state".into()));
    };
    let n = bundle.terms.first().map_or(0, |t| t.gradient.len());
    let mut pde = vec![0.0; n];
    let mut any_pde = false;
    for t in bundle.terms.iter().filter(|t| t.label.kind == TermKind::Pde) {
        any_pde = true;
        for (a, g) in pde.iter_mut().zip(&t.gradient) {
            *a += g;
        }
    }
    if !any_pde {
        return Ok(state.lambdas.clone());
    }
    let pde_max = pde.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    for (lam, term) in state.lambdas.iter_mut().zip(&bundle.terms) {
        if term.label.kind == TermKind::Pde {
            *lam = 1.0;
            continue;
        }
        let mean = term.gradient.iter().map(|g| g.abs()).sum::<f64>() / n.max(1) as f64;
        let estimate = lra_estimate(pde_max, mean);
        *lam = alpha * *lam + (1.0 - alpha) * estimate;
    }
    Ok(state.lambdas.clone())
}

/// ReLoBRaLo update with one Bernoulli lookback draw shared by all terms.
pub fn relobralo_update(bundle: &LossBundle, state: &mut ScalingState) -> Result<Vec<f64>> {
    let ScalingPolicy::ReLoBRaLo {
        temperature,
        expected_rho,
        alpha,
        m,
    } = state.policy
    else {
        return Err(PinnError::Usage("relobralo_update on a non-ReLoBRaLo state".into()));
    };
    let current = bundle.values();
    let (Some(initial), Some(prev)) = (state.initial_losses.clone(), state.prev_losses.clone()) else {
        state.lambdas.iter_mut().for_each(|l| *l = 1.0);
        return Ok(state.lambdas.clone());
    };
    let m = m.unwrap_or(state.terms() as f64);
    let rho = Bernoulli::new(expected_rho)
        .map_err(|e| PinnError::Config(e.to_string()))?
        .sample(&mut state.rng);
    let rho = if rho { 1.0 } else { 0.0 };
    let from_start = relobralo_weights(&current, &initial, temperature, m);
    let from_prev = relobralo_weights(&current, &prev, temperature, m);
    for (i, lam) in state.lambdas.iter_mut().enumerate() {
        *lam = alpha * (rho * *lam + (1.0 - rho) * from_start[i]) + (1.0 - alpha) * from_prev[i];
        *lam = lam.max(f64::MIN_POSITIVE);
    }
    Ok(state.lambdas.clone())
}

/// Bounds of the stochastic coefficient distribution at `epoch`:
/// `(mean, std)` for normal draws, `(low, high)` for uniform draws.
pub fn stochastic_parameters(dist: StochasticDist, variance: VarianceMode, epoch: u64, total: u64) -> (f64, f64) {
    let progress = match variance {
        VarianceMode::Fixed => 0.0,
        VarianceMode::Decreasing => (epoch as f64 / total.max(1) as f64).min(1.0),
    };
    match dist {
        StochasticDist::Normal => (1.0, 0.25 - 0.25 * progress),
        StochasticDist::Uniform => (0.5 + 0.5 * progress, 1.5 - 0.5 * progress),
    }
}

/// Draw one coefficient per term for `epoch`.
pub fn sample_stochastic_coeffs(state: &mut ScalingState, epoch: u64) -> Result<Vec<f64>> {
    let ScalingPolicy::Stochastic { dist, variance } = state.policy else {
        return Err(PinnError::Usage("stochastic draw on a non-stochastic state".into()));
    };
    let (a, b) = stochastic_parameters(dist, variance, epoch, state.total_epochs);
    let k = state.terms();
    let draws: Vec<f64> = match dist {
        StochasticDist::Normal if b <= 0.0 => vec![a; k],
        StochasticDist::Normal => {
            let normal = Normal::new(a, b).map_err(|e| PinnError::Config(e.to_string()))?;
            (0..k)
                .map(|_| loop {
                    let x = normal.sample(&mut state.rng);
                    if x > 0.0 {
                        break x;
                    }
                })
                .collect()
        }
        StochasticDist::Uniform if a >= b => vec![a; k],
        StochasticDist::Uniform => {
            let uni = Uniform::new_inclusive(a, b).map_err(|e| PinnError::Config(e.to_string()))?;
            (0..k).map(|_| uni.sample(&mut state.rng)).collect()
        }
    };
    state.lambdas.copy_from_slice(&draws);
    Ok(draws)
}

/// Weights for this step under the state's policy, advancing its history.
pub fn compute_weights(bundle: &LossBundle, state: &mut ScalingState) -> Result<Vec<f64>> {
    if bundle.len() != state.terms() {
        return Err(PinnError::Usage(format!(
            "bundle has {} terms, scaling state tracks {}",
            bundle.len(),
            state.terms()
        )));
    }
    let values = bundle.values();
    let weights = match state.policy {
        ScalingPolicy::Fixed => vec![1.0; values.len()],
        ScalingPolicy::Lra { .. } => lra_update(bundle, state)?,
        ScalingPolicy::SoftAdapt => match &state.prev_losses {
            None => vec![1.0; values.len()],
            Some(prev) => {
                let w = softadapt_weights(&values, prev);
                state.lambdas.copy_from_slice(&w);
                w
            }
        },
        ScalingPolicy::ReLoBRaLo { .. } => relobralo_update(bundle, state)?,
        ScalingPolicy::Stochastic { .. } => sample_stochastic_coeffs(state, bundle.epoch)?,
    };
    state.record_history(&values);
    Ok(weights)
}

/// `Σ λᵢ Lᵢ` and its gradient, with the weights from the state's policy.
pub fn scalarize(bundle: &LossBundle, state: &mut ScalingState) -> Result<Scalarized> {
    let weights = compute_weights(bundle, state)?;
    let n = bundle.terms[0].gradient.len();
    let mut gradient = vec![0.0; n];
    let mut total = 0.0;
    for (w, term) in weights.iter().zip(&bundle.terms) {
        total += w * term.value;
        for (g, t) in gradient.iter_mut().zip(&term.gradient) {
            *g += w * t;
        }
    }
    if !total.is_finite() {
        return Err(PinnError::NonFinite("total loss".into()));
    }
    Ok(Scalarized {
        total,
        gradient,
        weights,
    })
}
