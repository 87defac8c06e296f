// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use pinn_core::autodiff::Tape;
use pinn_core::network::{ParamSet, TapeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random fully connected net with 2–4 layers, widths ≤ 20 and non-zero biases.
pub fn random_net(rng: &mut ChaCha8Rng, max_in: usize, max_out: usize) -> ParamSet {
    let layers = rng.random_range(2..=4);
    let mut widths = vec![rng.random_range(1..=max_in)];
    for _ in 1..layers {
        widths.push(rng.random_range(1..=20));
    }
    widths.push(rng.random_range(1..=max_out));
    let mut p = ParamSet::zeros(&widths);
    for l in 0..layers {
        let scale = (3.0 / widths[l] as f64).sqrt();
        let off = p.layer_offset(l);
        let nw = widths[l] * widths[l + 1];
        let data = p.as_mut_slice();
        for w in &mut data[off..off + nw] {
            *w = rng.random_range(-scale..scale);
        }
        for b in &mut data[off + nw..off + nw + widths[l + 1]] {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    p
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// Gradient of `½‖u(x) − y‖²` with respect to every parameter, by the
/// layer-wise error recursion:
/// δᴸ = u − y, δˡ = (Wˡ⁺¹)ᵀ δˡ⁺¹ ⊙ (1 − tanh²(zˡ)),
/// ∂C/∂Wˡ = δˡ (aˡ⁻¹)ᵀ, ∂C/∂bˡ = δˡ.
pub fn backprop_recursion(p: &ParamSet, x: &[f64], y: &[f64]) -> Vec<f64> {
    let widths = p.widths().to_vec();
    let depth = widths.len() - 1;
    let data = p.as_slice();
    let w = |l: usize, i: usize, j: usize| data[p.layer_offset(l) + i * widths[l] + j];
    let b = |l: usize, i: usize| data[p.layer_offset(l) + widths[l] * widths[l + 1] + i];

    let mut acts = vec![x.to_vec()];
    let mut pre = Vec::new();
    for l in 0..depth {
        let a = &acts[l];
        let z: Vec<f64> = (0..widths[l + 1])
            .map(|i| b(l, i) + (0..widths[l]).map(|j| w(l, i, j) * a[j]).sum::<f64>())
            .collect();
        let next = if l + 1 < depth { z.iter().map(|v| v.tanh()).collect() } else { z.clone() };
        pre.push(z);
        acts.push(next);
    }

    let mut grad = vec![0.0; p.len()];
    let mut delta: Vec<f64> = acts[depth].iter().zip(y).map(|(u, t)| u - t).collect();
    for l in (0..depth).rev() {
        let off = p.layer_offset(l);
        for i in 0..widths[l + 1] {
            for j in 0..widths[l] {
                grad[off + i * widths[l] + j] = delta[i] * acts[l][j];
            }
            grad[off + widths[l] * widths[l + 1] + i] = delta[i];
        }
        if l > 0 {
            delta = (0..widths[l])
                .map(|j| {
                    let back: f64 = (0..widths[l + 1]).map(|i| w(l, i, j) * delta[i]).sum();
                    back * (1.0 - pre[l - 1][j].tanh().powi(2))
                })
                .collect();
        }
    }
    grad
}

/// Same cost differentiated by the tape engine.
pub fn tape_cost_gradient(p: &ParamSet, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut tape = Tape::new();
    let tp = TapeParams::new(&mut tape, p);
    let xs: Vec<_> = x.iter().map(|&v| tape.constant(v)).collect();
    let out = tp.forward(&mut tape, &xs).unwrap();
    let mut sq = Vec::new();
    for (o, &t) in out.iter().zip(y) {
        let d = tape.shift(*o, -t).unwrap();
        let s = tape.mul(d, d).unwrap();
        sq.push(tape.scale(s, 0.5).unwrap());
    }
    let c = tape.sum(&sq).unwrap();
    tape.backward(c).unwrap().wrt(&tp.vars)
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_inf(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let num = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(0.0_f64, |m, y| m.max(y.abs())).max(floor);
    num / den
}
