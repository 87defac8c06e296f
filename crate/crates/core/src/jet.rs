// SPDX-License-Identifier: Apache-2.0

//! Batched evaluation of a network together with its input derivatives.
//!
//! For a batch of inputs (one column per point) the forward pass carries,
//! next to the activations, the first derivatives `∂u/∂x_k` for a requested
//! set of input coordinates and the pure second derivatives `∂²u/∂x_k²` for a
//! subset of those. The reverse pass takes seed adjoints for every carried
//! quantity and returns the parameter gradient of `Σ seed · quantity`,
//! summed over the batch.
//!
//! This is the same computation the scalar tape performs when a residual is
//! built from `grad_graph` twice; here it is laid out as dense matrix
//! products so collocation batches of thousands of points stay cheap.

use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::error::{PinnError, Result};
use crate::network::ParamSet;

/// Hyperbolic tangent, rational form near zero and `exp` elsewhere.
///
/// Agrees with `f64::tanh` to a few ulps and avoids the `expm1` call that
/// dominates the forward pass.
#[inline]
pub fn tanh(x: f64) -> f64 {
    const P: [f64; 3] = [-9.643_991_794_250_523e-1, -9.928_772_310_019_186e1, -1.614_687_684_417_084_5e3];
    const Q: [f64; 3] = [1.128_116_784_916_329_3e2, 2.235_488_390_601_004_5e3, 4.844_063_053_251_255e3];
    let a = x.abs();
    if a > 22.0 {
        return 1f64.copysign(x);
    }
    if a >= 0.625 {
        let e = (2.0 * a).exp();
        return (1.0 - 2.0 / (e + 1.0)).copysign(x);
    }
    let z = x * x;
    let p = (P[0] * z + P[1]) * z + P[2];
    let q = ((z + Q[0]) * z + Q[1]) * z + Q[2];
    x + x * z * p / q
}

/// Which input derivatives to carry.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivRequest {
    /// Input coordinates `k` for which `∂u/∂x_k` is produced.
    pub first: Vec<usize>,
    /// Coordinates for which `∂²u/∂x_k²` is produced; each must also be in
    /// `first`.
    pub second: Vec<usize>,
}

impl DerivRequest {
    pub fn value_only() -> Self {
        Self::default()
    }

    pub fn gradient(dims: &[usize]) -> Self {
        Self {
            first: dims.to_vec(),
            second: Vec::new(),
        }
    }

    pub fn new(first: &[usize], second: &[usize]) -> Self {
        Self {
            first: first.to_vec(),
            second: second.to_vec(),
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        for &d in self.first.iter().chain(&self.second) {
            if d >= input_dim {
                return Err(PinnError::Usage(format!(
                    "derivative requested for coordinate {d} of a {input_dim}-input network"
                )));
            }
        }
        for &d in &self.second {
            if !self.first.contains(&d) {
                return Err(PinnError::Usage(format!(
                    "second derivative in coordinate {d} requires the first derivative too"
                )));
            }
        }
        Ok(())
    }

    pub fn first_slot(&self, dim: usize) -> Option<usize> {
        self.first.iter().position(|&d| d == dim)
    }

    pub fn second_slot(&self, dim: usize) -> Option<usize> {
        self.second.iter().position(|&d| d == dim)
    }

    /// For each second-derivative slot, the matching first-derivative slot.
    fn second_parents(&self) -> Vec<usize> {
        self.second
            .iter()
            .map(|d| self.first_slot(*d).expect("validated"))
            .collect()
    }
}

/// Network outputs and input derivatives for a batch (`outputs × batch`).
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: Array2<f64>,
    pub first: Vec<Array2<f64>>,
    pub second: Vec<Array2<f64>>,
}

impl Jet {
    pub fn zeros_like(other: &Jet) -> Self {
        let z = || Array2::zeros(other.value.raw_dim());
        Self {
            value: z(),
            first: other.first.iter().map(|_| z()).collect(),
            second: other.second.iter().map(|_| z()).collect(),
        }
    }

    pub fn batch(&self) -> usize {
        self.value.ncols()
    }
}

struct HiddenCache {
    // pre-activation derivative streams
    z_first: Vec<Array2<f64>>,
    z_second: Vec<Array2<f64>>,
    // tanh(z) and 1 - tanh(z)^2
    h: Array2<f64>,
    s: Array2<f64>,
    // post-activation streams, the input of the next layer
    h_first: Vec<Array2<f64>>,
    h_second: Vec<Array2<f64>>,
}

/// Intermediate values kept for the reverse pass.
pub struct JetTrace {
    request: DerivRequest,
    inputs: Array2<f64>,
    hidden: Vec<HiddenCache>,
}

fn affine(w: ArrayView2<f64>, a: &Array2<f64>) -> Array2<f64> {
    w.dot(a)
}

/// Forward pass over a batch. `inputs` has one column per point.
pub fn forward(params: &ParamSet, inputs: ArrayView2<f64>, request: &DerivRequest) -> Result<(Jet, JetTrace)> {
    let widths = params.widths();
    if inputs.nrows() != widths[0] {
        return Err(PinnError::Usage(format!(
            "batch has {} input rows, network expects {}",
            inputs.nrows(),
            widths[0]
        )));
    }
    request.validate(widths[0])?;
    let parents = request.second_parents();
    let batch = inputs.ncols();
    let depth = params.num_layers();
    let mut hidden: Vec<HiddenCache> = Vec::with_capacity(depth.saturating_sub(1));

    let mut out: Option<Jet> = None;
    for l in 0..depth {
        let w = params.weights(l);
        let b = params.bias(l);
        let n_out = w.nrows();

        // Pre-activation value and streams.
        let (mut z, z_first, z_second) = if l == 0 {
            let z = w.dot(&inputs);
            // ∂x/∂x_k is a unit vector, so the first stream is column k of W
            // broadcast over the batch; second input derivatives vanish.
            let z_first: Vec<Array2<f64>> = request
                .first
                .iter()
                .map(|&k| {
                    let col = w.column(k);
                    col.insert_axis(Axis(1)).broadcast((n_out, batch)).unwrap().to_owned()
                })
                .collect();
            let z_second = request.second.iter().map(|_| Array2::zeros((n_out, batch))).collect();
            (z, z_first, z_second)
        } else {
            let prev = &hidden[l - 1];
            let z = affine(w, &prev.h);
            let z_first = prev.h_first.iter().map(|a| affine(w, a)).collect();
            let z_second = prev.h_second.iter().map(|a| affine(w, a)).collect();
            (z, z_first, z_second)
        };
        z += &b.insert_axis(Axis(1));

        if l + 1 == depth {
            out = Some(Jet {
                value: z,
                first: z_first,
                second: z_second,
            });
            break;
        }

        let h = z.mapv(tanh);
        let s = h.mapv(|v| 1.0 - v * v);
        let h_first: Vec<Array2<f64>> = z_first.iter().map(|zk| zk * &s).collect();
        let h_second: Vec<Array2<f64>> = z_second
            .iter()
            .zip(&parents)
            .map(|(zkk, &p)| {
                let mut r = Array2::zeros((n_out, batch));
                Zip::from(&mut r)
                    .and(zkk)
                    .and(&z_first[p])
                    .and(&h)
                    .and(&s)
                    .for_each(|r, &zkk, &zk, &h, &s| *r = s * zkk - 2.0 * h * s * zk * zk);
                r
            })
            .collect();
        hidden.push(HiddenCache {
            z_first,
            z_second,
            h,
            s,
            h_first,
            h_second,
        });
    }

    let jet = out.expect("network has at least one layer");
    for m in std::iter::once(&jet.value).chain(&jet.first).chain(&jet.second) {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(PinnError::NonFinite("network output or derivative".into()));
        }
    }
    Ok((
        jet,
        JetTrace {
            request: request.clone(),
            inputs: inputs.to_owned(),
            hidden,
        },
    ))
}

/// Forward pass without keeping the trace.
pub fn evaluate(params: &ParamSet, inputs: ArrayView2<f64>, request: &DerivRequest) -> Result<Jet> {
    forward(params, inputs, request).map(|(jet, _)| jet)
}

/// Parameter gradient of `Σ_points ⟨seeds, jet⟩`.
pub fn backward(params: &ParamSet, trace: &JetTrace, seeds: &Jet) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.len()];
    backward_into(params, trace, seeds, &mut grad)?;
    Ok(grad)
}

/// Like [`backward`], accumulating into `grad`.
pub fn backward_into(params: &ParamSet, trace: &JetTrace, seeds: &Jet, grad: &mut [f64]) -> Result<()> {
    let req = &trace.request;
    if seeds.first.len() != req.first.len() || seeds.second.len() != req.second.len() {
        return Err(PinnError::Usage("seed jet does not match the traced request".into()));
    }
    if grad.len() != params.len() {
        return Err(PinnError::Usage("gradient buffer has the wrong length".into()));
    }
    let parents = req.second_parents();
    let depth = params.num_layers();
    let widths = params.widths();

    let mut gz = seeds.value.clone();
    let mut gz_first = seeds.first.clone();
    let mut gz_second = seeds.second.clone();

    for l in (0..depth).rev() {
        let w = params.weights(l);
        let (n_out, n_in) = (widths[l + 1], widths[l]);
        let off = params.layer_offset(l);
        let (gw_slice, rest) = grad[off..].split_at_mut(n_out * n_in);
        let gb_slice = &mut rest[..n_out];

        let mut gw = ArrayView2::from_shape((n_out, n_in), &*gw_slice).unwrap().to_owned();
        if l == 0 {
            gw += &gz.dot(&trace.inputs.t());
            for (slot, &k) in req.first.iter().enumerate() {
                let col_sum = gz_first[slot].sum_axis(Axis(1));
                let mut col = gw.column_mut(k);
                col += &col_sum;
            }
        } else {
            let prev = &trace.hidden[l - 1];
            gw += &gz.dot(&prev.h.t());
            for (g, a) in gz_first.iter().zip(&prev.h_first) {
                gw += &g.dot(&a.t());
            }
            for (g, a) in gz_second.iter().zip(&prev.h_second) {
                gw += &g.dot(&a.t());
            }
        }
        gw_slice.copy_from_slice(gw.as_slice().unwrap());
        for (gb, s) in gb_slice.iter_mut().zip(gz.sum_axis(Axis(1)).iter()) {
            *gb += s;
        }
        if l == 0 {
            break;
        }

        // Back through the affine map into the previous activation streams.
        let wt = w.t();
        let gh = wt.dot(&gz);
        let gh_first: Vec<Array2<f64>> = gz_first.iter().map(|g| wt.dot(g)).collect();
        let gh_second: Vec<Array2<f64>> = gz_second.iter().map(|g| wt.dot(g)).collect();

        // Back through tanh: h = tanh z, s = 1 - h², t = ds/dz = -2hs,
        // h_k = s z_k, h_kk = s z_kk + t z_k².
        let c = &trace.hidden[l - 1];
        let t = Zip::from(&c.h).and(&c.s).map_collect(|&h, &s| -2.0 * h * s);
        let mut gs = Array2::<f64>::zeros(gh.raw_dim());
        let mut gt = Array2::<f64>::zeros(gh.raw_dim());
        let mut new_first: Vec<Array2<f64>> = Vec::with_capacity(gh_first.len());
        for (g, zk) in gh_first.iter().zip(&c.z_first) {
            Zip::from(&mut gs).and(g).and(zk).for_each(|gs, &g, &zk| *gs += g * zk);
            new_first.push(g * &c.s);
        }
        let mut new_second: Vec<Array2<f64>> = Vec::with_capacity(gh_second.len());
        for ((g, zkk), &p) in gh_second.iter().zip(&c.z_second).zip(&parents) {
            let zk = &c.z_first[p];
            Zip::from(&mut gs).and(g).and(zkk).for_each(|gs, &g, &zkk| *gs += g * zkk);
            Zip::from(&mut gt).and(g).and(zk).for_each(|gt, &g, &zk| *gt += g * zk * zk);
            Zip::from(&mut new_first[p])
                .and(g)
                .and(&t)
                .and(zk)
                .for_each(|nf, &g, &t, &zk| *nf += 2.0 * g * t * zk);
            new_second.push(g * &c.s);
        }
        let mut new_value = Array2::<f64>::zeros(gh.raw_dim());
        Zip::from(&mut new_value)
            .and(&gh)
            .and(&gs)
            .and(&gt)
            .and(&c.h)
            .and(&c.s)
            .for_each(|out, &gh, &gs, &gt, &h, &s| {
                let t = -2.0 * h * s;
                *out = gh * s + gs * t + gt * (-2.0 * s * s - 2.0 * h * t);
            });
        gz = new_value;
        gz_first = new_first;
        gz_second = new_second;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(PinnError::NonFinite("parameter gradient".into()));
    }
    Ok(())
}
