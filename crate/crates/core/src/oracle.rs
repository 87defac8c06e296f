// SPDX-License-Identifier: Apache-2.0

//! Reference solutions used to score trained networks: a method-of-lines
//! Burgers solver, a radial finite-volume solver for the linearized
//! Poisson–Boltzmann sphere, and probe sets for test MSE.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PinnError, Result};
use crate::jet::{self, DerivRequest};
use crate::network::{ParamSet, Region};
use crate::problems::{burgers_initial, mollified_delta, riccati_exact, Burgers, PbGeometry};

/// Values on a tensor grid with sorted axes; the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceGrid {
    pub axis_names: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub solver: String,
    pub resolution: String,
    pub problem_hash: u64,
}

/// FNV-1a, used to tag a grid with the parameters it was computed for.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let (lo, hi) = (axis[0], *axis.last()?);
    if !(x >= lo && x <= hi) {
        return None;
    }
    if axis.len() == 1 {
        return Some((0, 0.0));
    }
    let i = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
    let w = (x - axis[i]) / (axis[i + 1] - axis[i]);
    Some((i, w))
}

impl ReferenceGrid {
    pub fn new(
        axis_names: Vec<String>,
        axes: Vec<Vec<f64>>,
        values: Vec<f64>,
        solver: impl Into<String>,
        problem_hash: u64,
    ) -> Result<Self> {
        if axes.is_empty() || axes.len() != axis_names.len() {
            return Err(PinnError::Usage("grid needs one name per axis".into()));
        }
        if axes.iter().any(|a| a.is_empty() || a.windows(2).any(|w| !(w[1] > w[0]))) {
            return Err(PinnError::Usage("grid axes must be non-empty and strictly increasing".into()));
        }
        let n: usize = axes.iter().map(Vec::len).product();
        if values.len() != n {
            return Err(PinnError::Usage(format!("grid has {n} nodes but {} values", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PinnError::NonFinite("reference grid value".into()));
        }
        let resolution = axes.iter().map(|a| a.len().to_string()).collect::<Vec<_>>().join("x");
        Ok(Self {
            axis_names,
            axes,
            values,
            solver: solver.into(),
            resolution,
            problem_hash,
        })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.flat(idx)]
    }

    /// Multilinear interpolation; points outside the grid are a usage error.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.axes.len() {
            return Err(PinnError::Usage(format!("expected {} coordinates", self.axes.len())));
        }
        let mut brackets = Vec::with_capacity(x.len());
        for (d, (&xd, axis)) in x.iter().zip(&self.axes).enumerate() {
            let b = bracket(axis, xd).ok_or_else(|| {
                PinnError::Usage(format!("probe {x:?} lies outside the reference grid along {}", self.axis_names[d]))
            })?;
            brackets.push(b);
        }
        let dims = x.len();
        let mut total = 0.0;
        let mut idx = vec![0; dims];
        for corner in 0..(1usize << dims) {
            let mut weight = 1.0;
            for d in 0..dims {
                let (i, w) = brackets[d];
                let upper = corner >> d & 1 == 1;
                if upper && self.axes[d].len() == 1 {
                    weight = 0.0;
                    break;
                }
                idx[d] = i + upper as usize;
                weight *= if upper { w } else { 1.0 - w };
            }
            if weight != 0.0 {
                total += weight * self.at(&idx);
            }
        }
        Ok(total)
    }

    /// CSV with `#` metadata lines, a header row and one row per node.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# solver={} resolution={} problem={:016x}",
            self.solver, self.resolution, self.problem_hash
        );
        let _ = writeln!(
            s,
            "# axes {}",
            self.shape().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
        );
        let _ = writeln!(s, "{},value", self.axis_names.join(","));
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for v in &self.values {
            for (d, &i) in idx.iter().enumerate() {
                let _ = write!(s, "{:?},", self.axes[d][i]);
            }
            let _ = writeln!(s, "{v:?}");
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: &str| PinnError::Parse(format!("reference grid: {m}"));
        let mut lines = text.lines();
        let meta = lines.next().ok_or_else(|| bad("empty file"))?;
        let mut solver = String::new();
        let mut hash = 0;
        for field in meta.trim_start_matches('#').split_whitespace() {
            if let Some(v) = field.strip_prefix("solver=") {
                solver = v.to_string();
            } else if let Some(v) = field.strip_prefix("problem=") {
                hash = u64::from_str_radix(v, 16).map_err(|_| bad("bad problem hash"))?;
            }
        }
        let shape: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("# axes"))
            .ok_or_else(|| bad("missing axes line"))?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad axes line"))?;
        let header: Vec<String> = lines.next().ok_or_else(|| bad("missing header"))?.split(',').map(String::from).collect();
        let dims = shape.len();
        if header.len() != dims + 1 {
            return Err(bad("header does not match axes"));
        }
        let n: usize = shape.iter().product();
        let mut axes: Vec<Vec<f64>> = shape.iter().map(|&k| vec![f64::NAN; k]).collect();
        let mut values = Vec::with_capacity(n);
        let mut idx = vec![0; dims];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(&format!("bad row '{line}'")))?;
            if row.len() != dims + 1 || values.len() == n {
                return Err(bad("unexpected row"));
            }
            for d in 0..dims {
                axes[d][idx[d]] = row[d];
            }
            values.push(row[dims]);
            for d in (0..dims).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        if values.len() != n {
            return Err(bad("row count does not match axes"));
        }
        ReferenceGrid::new(header[..dims].to_vec(), axes, values, solver, hash)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Burgers
// ---------------------------------------------------------------------------

pub const BURGERS_REFERENCE_NX: usize = 401;
pub const BURGERS_REFERENCE_NT: usize = 501;

fn burgers_rhs(u: &[f64], out: &mut [f64], dx: f64, nu: f64) {
    let n = u.len();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    let (a, b) = (0.25 / dx, nu / (dx * dx));
    for i in 1..n - 1 {
        let flux = a * (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]);
        out[i] = -flux + b * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
    }
}

/// Method-of-lines solution on an `nx × nt` grid of `(x, t)` nodes.
///
/// Central differences on the conservative flux `u²/2` and on `u_xx`,
/// classical RK4 in time with sub-steps limited by both the advective
/// (`0.4 dx / max|u|`) and diffusive (`0.2 dx² / ν`) stability bounds.
pub fn solve_burgers(problem: &Burgers, nx: usize, nt: usize) -> Result<ReferenceGrid> {
    let Burgers { nu, length, t_final } = *problem;
    if nx < 3 || nt < 3 {
        return Err(PinnError::Usage("Burgers reference needs nx, nt ≥ 3".into()));
    }
    if !(nu > 0.0 && length > 0.0 && t_final > 0.0) {
        return Err(PinnError::Usage("ν, L and T must be positive".into()));
    }
    let dx = length / (nx - 1) as f64;
    let dt_out = t_final / (nt - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * dx).collect();
    let ts: Vec<f64> = (0..nt).map(|j| j as f64 * dt_out).collect();

    let mut u: Vec<f64> = xs.iter().map(|&x| burgers_initial(x, length)).collect();
    u[0] = 0.0;
    u[nx - 1] = 0.0;
    let limit = 10.0 * u.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut snapshots = Vec::with_capacity(nt);
    snapshots.push(u.clone());
    let mut k = vec![vec![0.0; nx]; 4];
    let mut stage = vec![0.0; nx];
    for _ in 1..nt {
        let umax = u.iter().fold(1e-8f64, |m, v| m.max(v.abs()));
        let dt_max = (0.4 * dx / umax).min(0.2 * dx * dx / nu);
        let steps = (dt_out / dt_max).ceil().max(1.0) as usize;
        let dt = dt_out / steps as f64;
        for _ in 0..steps {
            burgers_rhs(&u, &mut k[0], dx, nu);
            for (c, w) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
                let (prev, rest) = k.split_at_mut(c);
                for i in 0..nx {
                    stage[i] = u[i] + w * dt * prev[c - 1][i];
                }
                burgers_rhs(&stage, &mut rest[0], dx, nu);
            }
            for i in 0..nx {
                u[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            if u.iter().any(|v| !v.is_finite() || v.abs() > limit) {
                return Err(PinnError::Resolution(format!(
                    "Burgers solver unstable at nx = {nx}; refine the grid"
                )));
            }
        }
        snapshots.push(u.clone());
    }

    let mut values = vec![0.0; nx * nt];
    for (j, snap) in snapshots.iter().enumerate() {
        for (i, &v) in snap.iter().enumerate() {
            values[i * nt + j] = v;
        }
    }
    let hash = fnv1a(&format!("burgers nu={nu:?} L={length:?} T={t_final:?}"));
    ReferenceGrid::new(vec!["x".into(), "t".into()], vec![xs, ts], values, "burgers-mol-rk4", hash)
}

/// Default-resolution Burgers reference.
pub fn burgers_reference(problem: &Burgers) -> Result<ReferenceGrid> {
    solve_burgers(problem, BURGERS_REFERENCE_NX, BURGERS_REFERENCE_NT)
}

/// Twenty probe abscissae `0.0475 k L`, strictly inside `[0, L]`; they are
/// grid nodes whenever `nx − 1` is a multiple of 400.
pub fn burgers_probe_xs(length: f64) -> Vec<f64> {
    (1..=20).map(|k| 0.0475 * length * k as f64).collect()
}

/// `‖a − b‖ / ‖b − c‖` over matching probe values: about 4 for a
/// second-order method under successive halvings.
pub fn refinement_ratio(coarse: &[f64], mid: &[f64], fine: &[f64]) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d(coarse, mid) / d(mid, fine)
}

/// RMS over interior nodes of the finite-difference Burgers residual
/// `u_t + (u²/2)_x − ν u_xx`, with central differences in both x and t.
pub fn burgers_fd_residual_rms(grid: &ReferenceGrid, nu: f64) -> f64 {
    let (xs, ts) = (&grid.axes[0], &grid.axes[1]);
    let (dx, dt) = (xs[1] - xs[0], ts[1] - ts[0]);
    let u = |i: usize, j: usize| grid.at(&[i, j]);
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 1..ts.len() - 1 {
        for i in 1..xs.len() - 1 {
            let ut = (u(i, j + 1) - u(i, j - 1)) / (2.0 * dt);
            let fx = (u(i + 1, j).powi(2) - u(i - 1, j).powi(2)) / (4.0 * dx);
            let uxx = (u(i + 1, j) - 2.0 * u(i, j) + u(i - 1, j)) / (dx * dx);
            let r = ut + fx - nu * uxx;
            sum += r * r;
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Linearized Poisson–Boltzmann, radial
// ---------------------------------------------------------------------------

fn tridiagonal_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let singular = || PinnError::Resolution("radial system is singular".into());
    if diag[0].abs() < 1e-300 {
        return Err(singular());
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        if m.abs() < 1e-300 || !m.is_finite() {
            return Err(singular());
        }
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

fn shell_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    // composite Simpson on r² f(r)
    if b <= a {
        return 0.0;
    }
    let n = 16;
    let h = (b - a) / n as f64;
    let g = |r: f64| r * r * f(r);
    let mut s = g(a) + g(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Linearized PB for one charge at the sphere center, solved as a radial
/// two-region problem by cell-centred finite volumes.
///
/// `nr` intervals are split between `[0, R]` and `[R, R_out]` in proportion to
/// their lengths so that the interface lies on a node. Faces sit midway
/// between nodes; flux continuity across Γ holds by construction.
pub fn solve_pb_linear_radial(geom: &PbGeometry, nr: usize) -> Result<ReferenceGrid> {
    geom.validate()?;
    if nr < 100 {
        return Err(PinnError::Usage("radial reference needs nr ≥ 100".into()));
    }
    if geom.charges.len() != 1 || geom.charges[0].position.iter().zip(&geom.center).any(|(a, b)| a != b) {
        return Err(PinnError::Usage(
            "radial reference requires exactly one charge at the sphere center".into(),
        ));
    }
    let q = geom.charges[0].q;
    let (r_in, r_out) = (geom.radius, geom.truncation_radius);
    let m = ((nr as f64 * r_in / r_out).round() as usize).clamp(2, nr - 2);
    let mut rs: Vec<f64> = (0..=m).map(|i| r_in * i as f64 / m as f64).collect();
    let outer = nr - m;
    rs.extend((1..=outer).map(|i| r_in + (r_out - r_in) * i as f64 / outer as f64));
    rs[m] = r_in;
    let n = rs.len();

    let (e1, e2) = (geom.eps_inside, geom.eps_outside);
    let kb2 = geom.kappa_bar(Region::Outside).powi(2);
    let sigma = geom.sigma();
    let rho = |r: f64| mollified_delta(&[r, 0.0, 0.0], &[0.0; 3], sigma);

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n - 1 {
        let left_face = if i == 0 { 0.0 } else { 0.5 * (rs[i - 1] + rs[i]) };
        let right_face = 0.5 * (rs[i] + rs[i + 1]);
        let eps_right = if i < m { e1 } else { e2 };
        let a_right = eps_right * right_face * right_face / (rs[i + 1] - rs[i]);
        diag[i] += a_right;
        upper[i] = -a_right;
        if i > 0 {
            let eps_left = if i <= m { e1 } else { e2 };
            let a_left = eps_left * left_face * left_face / (rs[i] - rs[i - 1]);
            diag[i] += a_left;
            lower[i] = -a_left;
        }
        // split the control volume at Γ
        let inner_hi = right_face.min(r_in);
        let outer_lo = left_face.max(r_in);
        if outer_lo < right_face {
            diag[i] += kb2 * (right_face.powi(3) - outer_lo.powi(3)) / 3.0;
        }
        if left_face < inner_hi {
            rhs[i] = 4.0 * PI * q * shell_integral(rho, left_face, inner_hi);
        }
    }
    diag[n - 1] = 1.0;
    rhs[n - 1] = crate::problems::green_boundary(&[geom.center[0] + r_out, geom.center[1], geom.center[2]], geom)?;

    let phi = tridiagonal_solve(&lower, &diag, &upper, &rhs)?;
    let hash = fnv1a(&format!("pb-linear {geom:?}"));
    ReferenceGrid::new(vec!["r".into()], vec![rs], phi, "pb-radial-fv", hash)
}

pub const PB_REFERENCE_NR: usize = 4000;

// ---------------------------------------------------------------------------
// Probe sets and test MSE
// ---------------------------------------------------------------------------

/// Network inputs (one column per probe) with reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSet {
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
}

impl TestSet {
    pub fn new(inputs: Array2<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.ncols() != targets.len() || targets.is_empty() {
            return Err(PinnError::Usage("test set needs one target per probe column".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn predict(&self, params: &ParamSet) -> Result<Vec<f64>> {
        let j = jet::evaluate(params, self.inputs.view(), &DerivRequest::value_only())?;
        Ok(j.value.row(0).to_vec())
    }
}

/// Mean squared difference of `predicted` against `targets`.
pub fn mse(predicted: &[f64], targets: &[f64]) -> f64 {
    predicted.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / targets.len() as f64
}

pub fn test_mse(params: &ParamSet, set: &TestSet) -> Result<f64> {
    Ok(mse(&set.predict(params)?, &set.targets))
}

/// Test MSE of an arbitrary function of the probe inputs.
pub fn test_mse_fn(f: impl Fn(&[f64]) -> f64, set: &TestSet) -> f64 {
    let pred: Vec<f64> = (0..set.len()).map(|c| f(&set.inputs.column(c).to_vec())).collect();
    mse(&pred, &set.targets)
}

/// `‖p − t‖₂ / ‖t‖₂`.
pub fn relative_l2(predicted: &[f64], targets: &[f64]) -> f64 {
    let num: f64 = predicted.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    let den: f64 = targets.iter().map(|t| t * t).sum();
    (num / den).sqrt()
}

/// `n` equispaced probes on `[0, t_max]` against the closed form.
pub fn riccati_test_set(n: usize, t_max: f64) -> Result<TestSet> {
    if n < 2 {
        return Err(PinnError::Usage("need at least two probes".into()));
    }
    let ts: Vec<f64> = (0..n).map(|j| t_max * j as f64 / (n - 1) as f64).collect();
    let targets = ts.iter().map(|&t| riccati_exact(t)).collect::<Result<Vec<_>>>()?;
    TestSet::new(Array2::from_shape_vec((1, n), ts).unwrap(), targets)
}

/// Every `stride`-th grid node along both axes (ends included).
pub fn grid_test_set(grid: &ReferenceGrid, stride: usize) -> Result<TestSet> {
    if grid.axes.len() != 2 || stride == 0 {
        return Err(PinnError::Usage("grid probes need a 2-D grid and stride ≥ 1".into()));
    }
    let pick = |len: usize| {
        let mut v: Vec<usize> = (0..len).step_by(stride).collect();
        if *v.last().unwrap() != len - 1 {
            v.push(len - 1);
        }
        v
    };
    let (ix, it) = (pick(grid.axes[0].len()), pick(grid.axes[1].len()));
    let mut cols = Vec::with_capacity(2 * ix.len() * it.len());
    let mut targets = Vec::with_capacity(ix.len() * it.len());
    for &i in &ix {
        for &j in &it {
            cols.push(grid.axes[0][i]);
            cols.push(grid.axes[1][j]);
            targets.push(grid.at(&[i, j]));
        }
    }
    let inputs = Array2::from_shape_vec((targets.len(), 2), cols).unwrap().reversed_axes();
    TestSet::new(inputs, targets)
}

/// Probes on concentric shells around the sphere center, with the region
/// label appended and targets from the radial profile.
pub fn radial_test_set(profile: &ReferenceGrid, geom: &PbGeometry, shells: &[f64], per_shell: usize, seed: u64) -> Result<TestSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = Vec::new();
    let mut targets = Vec::new();
    for &r in shells {
        if (r - geom.radius).abs() < 1e-12 {
            return Err(PinnError::Usage("probe shell coincides with the interface".into()));
        }
        let value = profile.interpolate(&[r])?;
        let region = if r < geom.radius { Region::Inside } else { Region::Outside };
        for _ in 0..per_shell {
            let v: [f64; 3] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            for (c, vk) in geom.center.iter().zip(v) {
                cols.push(c + r * vk / norm);
            }
            cols.push(region.label());
            targets.push(value);
        }
    }
    let inputs = Array2::from_shape_vec((targets.len(), 4), cols).unwrap().reversed_axes();
    TestSet::new(inputs, targets)
}

/// Default probe shells: three inside the sphere, three in the solvent.
pub fn default_shells(geom: &PbGeometry) -> Vec<f64> {
    let (r, out) = (geom.radius, geom.truncation_radius);
    vec![0.4 * r, 0.6 * r, 0.8 * r, 1.25 * r, 1.75 * r, r + 0.5 * (out - r)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Charge;

    #[test]
    fn burgers_grid_respects_initial_and_wall_values() {
        let b = Burgers::default();
        let g = solve_burgers(&b, 101, 11).unwrap();
        for i in 1..100 {
            assert_eq!(g.at(&[i, 0]), burgers_initial(g.axes[0][i], 8.0));
        }
        for j in 0..11 {
            assert_eq!(g.at(&[0, j]), 0.0);
            assert_eq!(g.at(&[100, j]), 0.0);
        }
        assert!(solve_burgers(&b, 2, 10).is_err());
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let ts: Vec<f64> = (0..4).map(|j| j as f64).collect();
        let f = |x: f64, t: f64| 1.0 + 2.0 * x - t + 0.5 * x * t;
        let mut values = Vec::new();
        for &x in &xs {
            for &t in &ts {
                values.push(f(x, t));
            }
        }
        let g = ReferenceGrid::new(vec!["x".into(), "t".into()], vec![xs, ts], values, "test", 0).unwrap();
        for (x, t) in [(0.3, 0.7), (2.0, 3.0), (0.0, 0.0), (1.11, 2.5)] {
            assert!((g.interpolate(&[x, t]).unwrap() - f(x, t)).abs() < 1e-12);
        }
        assert!(matches!(g.interpolate(&[2.1, 0.0]), Err(PinnError::Usage(_))));
        assert!(g.interpolate(&[0.5, -0.1]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = solve_burgers(&Burgers::default(), 21, 5).unwrap();
        let back = ReferenceGrid::from_csv(&g.to_csv()).unwrap();
        assert_eq!(g, back);
        assert!(ReferenceGrid::from_csv("# solver=x\n# axes 2\nr,value\n0,1\n").is_err());
    }

    #[test]
    fn radial_solver_preconditions() {
        let g = PbGeometry::default();
        assert!(solve_pb_linear_radial(&g, 50).is_err());
        let off = PbGeometry {
            charges: vec![Charge {
                position: [0.1, 0.0, 0.0],
                q: 1.0,
            }],
            ..PbGeometry::default()
        };
        assert!(solve_pb_linear_radial(&off, 500).is_err());
        let p = solve_pb_linear_radial(&g, 500).unwrap();
        assert_eq!(p.axes[0][0], 0.0);
        assert_eq!(*p.axes[0].last().unwrap(), 5.0);
        assert!(p.axes[0].contains(&1.0));
    }

    #[test]
    fn riccati_probes() {
        let s = riccati_test_set(11, 0.95).unwrap();
        assert_eq!(s.targets[0], 2.0);
        assert!((s.inputs[[0, 10]] - 0.95).abs() < 1e-15);
        assert!(test_mse_fn(|x| riccati_exact(x[0]).unwrap(), &s) <= 1e-20);
    }

    #[test]
    fn grid_probes_include_ends() {
        let g = solve_burgers(&Burgers::default(), 21, 11).unwrap();
        let s = grid_test_set(&g, 4).unwrap();
        assert_eq!(s.len(), 6 * 4);
        assert_eq!(s.inputs[[0, 0]], 0.0);
        assert_eq!(s.inputs[[1, 3]], 5.0);
        assert!(test_mse_fn(|x| g.interpolate(x).unwrap(), &s) < 1e-24);
    }
}
