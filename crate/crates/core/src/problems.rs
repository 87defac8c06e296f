// SPDX-License-Identifier: Apache-2.0

//! Benchmark PDE problems: residual operators, condition sets and samplers.
//!
//! A problem is turned into a list of [`Condition`]s by sampling. Each
//! condition owns its collocation points, says which network evaluations
//! (and which input derivatives) it needs per point, and carries a residual
//! closure that records the residual on a scalar tape from those values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Tape, Var};
use crate::error::{PinnError, Result};
use crate::jet::{self, DerivRequest};
use crate::loss::{TermKind, TermLabel};
use crate::network::{augment_input, ParamSet, Region};

/// Network values at one point, as tape leaves.
pub struct EvalVars {
    pub value: Var,
    /// Ordered as the evaluation's `request.first`.
    pub first: Vec<Var>,
    /// Ordered as the evaluation's `request.second`.
    pub second: Vec<Var>,
}

/// Residual at one point: `(tape, raw point coordinates, per-evaluation values)`.
pub type ResidualFn = Arc<dyn Fn(&mut Tape, &[f64], &[EvalVars]) -> Result<Var> + Send + Sync>;

/// One network evaluation per point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// Network inputs, one column per point.
    pub inputs: Array2<f64>,
    pub request: DerivRequest,
}

/// A sampled condition contributing one loss term.
#[derive(Clone)]
pub struct Condition {
    pub label: TermLabel,
    /// Raw coordinates, one column per point (before any augmentation).
    pub points: Array2<f64>,
    pub evals: Vec<Evaluation>,
    pub residual: ResidualFn,
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Condition")
            .field("label", &self.label)
            .field("points", &self.points.ncols())
            .field("evals", &self.evals.len())
            .finish()
    }
}

impl Condition {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    /// Residual values at every point (no gradients).
    pub fn residuals(&self, params: &ParamSet) -> Result<Vec<f64>> {
        crate::loss::condition_residuals(self, params, false).map(|b| b.values)
    }
}

/// Points per condition, keyed by condition name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleCounts(pub BTreeMap<String, usize>);

impl SampleCounts {
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Self {
        Self(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: &str, count: usize) {
        self.0.insert(name.to_string(), count);
    }

    /// Counts from `self`, falling back to `defaults` for missing names.
    pub fn merged_over(&self, defaults: &SampleCounts) -> SampleCounts {
        let mut out = defaults.clone();
        for (k, v) in &self.0 {
            out.0.insert(k.clone(), *v);
        }
        out
    }
}

/// A PDE benchmark that can be sampled into training conditions.
pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    /// Width of the network input layer.
    fn input_dim(&self) -> usize;

    /// Condition names in term order, with default sample counts.
    fn default_counts(&self) -> SampleCounts;

    /// Condition names in term order.
    fn condition_names(&self) -> Vec<&'static str>;

    /// Draw collocation points for every condition.
    fn sample(&self, counts: &SampleCounts, seed: u64) -> Result<Vec<Condition>>;
}

fn count_for(counts: &SampleCounts, name: &str) -> Result<usize> {
    match counts.get(name) {
        Some(0) => Err(PinnError::Config(format!("condition '{name}' needs at least one sample"))),
        Some(n) => Ok(n),
        None => Err(PinnError::Config(format!("no sample count for condition '{name}'"))),
    }
}

// ---------------------------------------------------------------------------
// Burgers
// ---------------------------------------------------------------------------

/// `u_t + u u_x − ν u_xx = 0` on `[0, L] × [0, T]`, Gaussian initial bump,
/// homogeneous Dirichlet walls. Network input is `(x, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Burgers {
    pub nu: f64,
    pub length: f64,
    pub t_final: f64,
}

impl Default for Burgers {
    fn default() -> Self {
        Self {
            nu: 0.01,
            length: 8.0,
            t_final: 5.0,
        }
    }
}

pub fn burgers_residual(u: f64, u_t: f64, u_x: f64, u_xx: f64, nu: f64) -> f64 {
    u_t + u * u_x - nu * u_xx
}

/// `exp(−(x − L/2)²)`.
pub fn burgers_initial(x: f64, length: f64) -> f64 {
    let d = x - 0.5 * length;
    (-d * d).exp()
}

impl Problem for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["pde", "ic", "bc-left", "bc-right"]
    }

    fn default_counts(&self) -> SampleCounts {
        SampleCounts::from_pairs(&[("pde", 4000), ("ic", 400), ("bc-left", 200), ("bc-right", 200)])
    }

    fn sample(&self, counts: &SampleCounts, seed: u64) -> Result<Vec<Condition>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, tf, nu) = (self.length, self.t_final, self.nu);
        let ux = Uniform::new_inclusive(0.0, l).unwrap();
        let ut = Uniform::new_inclusive(0.0, tf).unwrap();

        let n = count_for(counts, "pde")?;
        let mut pts = Array2::zeros((2, n));
        for c in 0..n {
            pts[[0, c]] = ux.sample(&mut rng);
            pts[[1, c]] = ut.sample(&mut rng);
        }
        let pde = Condition {
            label: TermLabel::new(TermKind::Pde, "pde"),
            evals: vec![Evaluation {
                inputs: pts.clone(),
                request: DerivRequest::new(&[0, 1], &[0]),
            }],
            points: pts,
            residual: Arc::new(move |tape, _x, ev| {
                let e = &ev[0];
                let (u, u_x, u_t, u_xx) = (e.value, e.first[0], e.first[1], e.second[0]);
                let adv = tape.mul(u, u_x)?;
                let lhs = tape.add(u_t, adv)?;
                let diff = tape.scale(u_xx, nu)?;
                tape.sub(lhs, diff)
            }),
        };

        let n = count_for(counts, "ic")?;
        let mut pts = Array2::zeros((2, n));
        for c in 0..n {
            pts[[0, c]] = ux.sample(&mut rng);
        }
        let ic = Condition {
            label: TermLabel::new(TermKind::Ic, "ic"),
            evals: vec![Evaluation {
                inputs: pts.clone(),
                request: DerivRequest::value_only(),
            }],
            points: pts,
            residual: Arc::new(move |tape, x, ev| tape.shift(ev[0].value, -burgers_initial(x[0], l))),
        };

        let mut walls = Vec::new();
        for (name, xw) in [("bc-left", 0.0), ("bc-right", l)] {
            let n = count_for(counts, name)?;
            let mut pts = Array2::zeros((2, n));
            for c in 0..n {
                pts[[0, c]] = xw;
                pts[[1, c]] = ut.sample(&mut rng);
            }
            walls.push(Condition {
                label: TermLabel::new(TermKind::Bc, name),
                evals: vec![Evaluation {
                    inputs: pts.clone(),
                    request: DerivRequest::value_only(),
                }],
                points: pts,
                residual: Arc::new(|_tape, _x, ev| Ok(ev[0].value)),
            });
        }
        let mut out = vec![pde, ic];
        out.extend(walls);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Riccati
// ---------------------------------------------------------------------------

/// `y'' + 2t (y')² = 0` on `[0, T]`, `y(0) = 2`, `y'(0) = −1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Riccati {
    pub t_final: f64,
}

impl Default for Riccati {
    fn default() -> Self {
        Self { t_final: 0.99 }
    }
}

pub fn riccati_residual(_y: f64, y_t: f64, y_tt: f64, t: f64) -> f64 {
    y_tt + 2.0 * t * y_t * y_t
}

/// `½(ln|t−1| − ln|t+1|) + 2`, singular at `t = ±1`.
pub fn riccati_exact(t: f64) -> Result<f64> {
    if (t.abs() - 1.0).abs() == 0.0 {
        return Err(PinnError::Domain(format!("exact Riccati solution is singular at t = {t}")));
    }
    Ok(0.5 * ((t - 1.0).abs().ln() - (t + 1.0).abs().ln()) + 2.0)
}

/// `y'(t) = 1 / (t² − 1)`.
pub fn riccati_exact_derivative(t: f64) -> Result<f64> {
    let d = t * t - 1.0;
    if d == 0.0 {
        return Err(PinnError::Domain(format!("exact Riccati solution is singular at t = {t}")));
    }
    Ok(1.0 / d)
}

impl Problem for Riccati {
    fn name(&self) -> &'static str {
        "riccati"
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["pde", "ic-value", "ic-slope"]
    }

    fn default_counts(&self) -> SampleCounts {
        SampleCounts::from_pairs(&[("pde", 2000), ("ic-value", 1), ("ic-slope", 1)])
    }

    fn sample(&self, counts: &SampleCounts, seed: u64) -> Result<Vec<Condition>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = count_for(counts, "pde")?;
        let ut = Uniform::new_inclusive(0.0, self.t_final).unwrap();
        let pts = Array2::from_shape_fn((1, n), |_| ut.sample(&mut rng));
        let pde = Condition {
            label: TermLabel::new(TermKind::Pde, "pde"),
            evals: vec![Evaluation {
                inputs: pts.clone(),
                request: DerivRequest::new(&[0], &[0]),
            }],
            points: pts,
            residual: Arc::new(|tape, x, ev| {
                let e = &ev[0];
                let sq = tape.mul(e.first[0], e.first[0])?;
                let k = tape.scale(sq, 2.0 * x[0])?;
                tape.add(e.second[0], k)
            }),
        };
        let at_zero = |n| Array2::<f64>::zeros((1, n));
        let n = count_for(counts, "ic-value")?;
        let value = Condition {
            label: TermLabel::new(TermKind::Ic, "ic-value"),
            evals: vec![Evaluation {
                inputs: at_zero(n),
                request: DerivRequest::value_only(),
            }],
            points: at_zero(n),
            residual: Arc::new(|tape, _x, ev| tape.shift(ev[0].value, -2.0)),
        };
        let n = count_for(counts, "ic-slope")?;
        let slope = Condition {
            label: TermLabel::new(TermKind::Ic, "ic-slope"),
            evals: vec![Evaluation {
                inputs: at_zero(n),
                request: DerivRequest::gradient(&[0]),
            }],
            points: at_zero(n),
            residual: Arc::new(|tape, _x, ev| tape.shift(ev[0].first[0], 1.0)),
        };
        Ok(vec![pde, value, slope])
    }
}

// ---------------------------------------------------------------------------
// Poisson–Boltzmann on a sphere
// ---------------------------------------------------------------------------

/// Physical constants in CGS-style units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Boltzmann constant, erg/K.
    pub k_b: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Elementary charge, statC.
    pub e_c: f64,
    /// Avogadro constant, 1/mol.
    pub n_a: f64,
    /// Ionic strength, mol/L.
    pub ionic_strength: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            k_b: 1.380_649e-16,
            temperature: 300.0,
            e_c: 4.803_204_71e-10,
            n_a: 6.022_140_76e23,
            ionic_strength: 0.15,
        }
    }
}

impl PhysicalConstants {
    /// Thermal voltage `k_B T / e_c`.
    pub fn thermal_voltage(&self) -> f64 {
        self.k_b * self.temperature / self.e_c
    }

    /// `κ² = 8π N_A I / (1000 ε k_B T)`.
    pub fn debye_kappa_squared(&self, eps: f64) -> f64 {
        8.0 * PI * self.n_a * self.ionic_strength / (1000.0 * eps * self.k_b * self.temperature)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PbUnits {
    /// Potentials in units of `k_B T / e_c`; the nonlinearity is `sinh φ`.
    #[default]
    Reduced,
    /// Thermal voltage taken from the constants bundle.
    Physical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PbMode {
    #[default]
    Nonlinear,
    /// `sinh φ → φ` in the solvent equation.
    Linearized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Charge {
    pub position: [f64; 3],
    pub q: f64,
}

/// Sphere-shaped molecule with interior point charges in a screening solvent.
#[derive(Clone, Debug, PartialEq)]
pub struct PbGeometry {
    pub center: [f64; 3],
    pub radius: f64,
    pub charges: Vec<Charge>,
    /// Dielectric constant inside the sphere.
    pub eps_inside: f64,
    /// Dielectric constant of the solvent.
    pub eps_outside: f64,
    /// Debye–Hückel screening constant κ of the solvent.
    pub kappa: f64,
    /// Mollifier width; `None` picks 0.2 × (closest charge-to-surface distance).
    pub sigma: Option<f64>,
    /// Radius of the truncated outer boundary.
    pub truncation_radius: f64,
    pub constants: PhysicalConstants,
    pub units: PbUnits,
}

impl Default for PbGeometry {
    fn default() -> Self {
        Self {
            center: [0.0; 3],
            radius: 1.0,
            charges: vec![Charge {
                position: [0.0; 3],
                q: 1.0,
            }],
            eps_inside: 2.0,
            eps_outside: 80.0,
            kappa: 1.0,
            sigma: None,
            truncation_radius: 5.0,
            constants: PhysicalConstants::default(),
            units: PbUnits::Reduced,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl PbGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(PinnError::Config("sphere radius must be positive".into()));
        }
        if !(self.truncation_radius > self.radius) {
            return Err(PinnError::Config("truncation radius must exceed the sphere radius".into()));
        }
        if self.units == PbUnits::Physical {
            if !(1.0..=10.0).contains(&self.eps_inside) || !(70.0..=80.0).contains(&self.eps_outside) {
                return Err(PinnError::Config(
                    "physical units need eps_inside in [1, 10] and eps_outside in [70, 80]".into(),
                ));
            }
        } else if !(self.eps_inside > 0.0 && self.eps_outside > 0.0) {
            return Err(PinnError::Config("dielectric constants must be positive".into()));
        }
        if self.kappa < 0.0 {
            return Err(PinnError::Config("kappa must be non-negative".into()));
        }
        if self.charges.is_empty() {
            return Err(PinnError::Config("at least one charge is required".into()));
        }
        for c in &self.charges {
            if dist(&c.position, &self.center) >= self.radius {
                return Err(PinnError::Config(format!(
                    "charge at {:?} is not strictly inside the sphere",
                    c.position
                )));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(PinnError::Config("sigma must be positive".into()));
            }
        }
        Ok(())
    }

    /// Mollifier width in use.
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or_else(|| {
            let gap = self
                .charges
                .iter()
                .map(|c| self.radius - dist(&c.position, &self.center))
                .fold(f64::INFINITY, f64::min);
            0.2 * gap
        })
    }

    /// Piecewise modified Debye–Hückel parameter κ̄.
    pub fn kappa_bar(&self, region: Region) -> f64 {
        match region {
            Region::Inside => 0.0,
            Region::Outside => self.eps_outside.sqrt() * self.kappa,
        }
    }

    pub fn epsilon(&self, region: Region) -> f64 {
        match region {
            Region::Inside => self.eps_inside,
            Region::Outside => self.eps_outside,
        }
    }

    pub fn region_of(&self, x: &[f64]) -> Region {
        if dist(x, &self.center) < self.radius {
            Region::Inside
        } else {
            Region::Outside
        }
    }

    /// Outward unit normal of the sphere at `x`.
    pub fn normal(&self, x: &[f64]) -> [f64; 3] {
        let r = dist(x, &self.center);
        [
            (x[0] - self.center[0]) / r,
            (x[1] - self.center[1]) / r,
            (x[2] - self.center[2]) / r,
        ]
    }

    /// Potential scale of the solvent nonlinearity: 1 in reduced units.
    pub fn thermal_voltage(&self) -> f64 {
        match self.units {
            PbUnits::Reduced => 1.0,
            PbUnits::Physical => self.constants.thermal_voltage(),
        }
    }

    /// Total mollified charge density `4π Σ qᵢ δ_σ(x − xᵢ)`.
    pub fn source(&self, x: &[f64]) -> f64 {
        let sigma = self.sigma();
        4.0 * PI * self.charges.iter().map(|c| c.q * mollified_delta(x, &c.position, sigma)).sum::<f64>()
    }
}

/// Normalized 3-D Gaussian `(2πσ²)^{−3/2} exp(−|x − c|² / 2σ²)`.
pub fn mollified_delta(x: &[f64], center: &[f64], sigma: f64) -> f64 {
    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    (2.0 * PI * sigma * sigma).powf(-1.5) * (-r2 / (2.0 * sigma * sigma)).exp()
}

/// Screened-Coulomb boundary value `Σ qᵢ exp(−κ̄ rᵢ / √ε₂) / (ε₂ rᵢ)`.
pub fn green_boundary(x: &[f64], geom: &PbGeometry) -> Result<f64> {
    let kb = geom.kappa_bar(Region::Outside);
    let eps = geom.eps_outside;
    let mut total = 0.0;
    for c in &geom.charges {
        let r = dist(x, &c.position);
        if r == 0.0 {
            return Err(PinnError::Domain(format!("boundary point {x:?} coincides with a charge")));
        }
        total += c.q / (eps * r) * (-kb * r / eps.sqrt()).exp();
    }
    Ok(total)
}

/// `|arg|` above which `sinh` in the solvent term is considered runaway.
pub const SINH_GUARD: f64 = 30.0;

/// Residual inside the molecule: `−ε₁ Δφ − 4π Σ qᵢ δ_σ(x − xᵢ)`.
pub fn pb_residual_inside(laplacian: f64, x: &[f64], geom: &PbGeometry) -> f64 {
    -geom.eps_inside * laplacian - geom.source(x)
}

/// Residual in the solvent: `−ε₂ Δφ + κ̄² V sinh(φ / V)` (or `κ̄² φ` when
/// linearized), with `V` the thermal voltage.
pub fn pb_residual_outside(phi: f64, laplacian: f64, geom: &PbGeometry, mode: PbMode) -> Result<f64> {
    let kb2 = geom.kappa_bar(Region::Outside).powi(2);
    let v = geom.thermal_voltage();
    let screening = match mode {
        PbMode::Linearized => kb2 * phi,
        PbMode::Nonlinear => {
            let arg = phi / v;
            if arg.abs() > SINH_GUARD {
                return Err(PinnError::NonFinite(format!("sinh argument {arg} beyond guard")));
            }
            kb2 * v * arg.sinh()
        }
    };
    Ok(-geom.eps_outside * laplacian + screening)
}

/// Continuity and flux-jump residuals of the two-sided network at `x ∈ Γ`.
pub fn interface_residuals(params: &ParamSet, x: &[f64], geom: &PbGeometry) -> Result<(f64, f64)> {
    let req = DerivRequest::gradient(&[0, 1, 2]);
    let n = geom.normal(x);
    let mut phi = [0.0; 2];
    let mut flux = [0.0; 2];
    for (i, region) in [Region::Inside, Region::Outside].into_iter().enumerate() {
        let input = Array2::from_shape_vec((4, 1), augment_input(x, region)).unwrap();
        let j = jet::evaluate(params, input.view(), &req)?;
        phi[i] = j.value[[0, 0]];
        flux[i] = geom.epsilon(region) * (0..3).map(|k| j.first[k][[0, 0]] * n[k]).sum::<f64>();
    }
    Ok((phi[0] - phi[1], flux[0] - flux[1]))
}

/// Parse a charge list: one `x y z q` line per charge; `#` starts a comment.
pub fn parse_charges(text: &str) -> Result<Vec<Charge>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| PinnError::Parse(format!("charge file line {}: {e}", lineno + 1)))?;
        if vals.len() != 4 {
            return Err(PinnError::Parse(format!(
                "charge file line {}: expected 4 values, got {}",
                lineno + 1,
                vals.len()
            )));
        }
        out.push(Charge {
            position: [vals[0], vals[1], vals[2]],
            q: vals[3],
        });
    }
    Ok(out)
}

pub fn load_charges(path: &Path) -> Result<Vec<Charge>> {
    parse_charges(&std::fs::read_to_string(path)?)
}

/// Sphere-geometry Poisson–Boltzmann problem. The network input is
/// `(x, y, z, label)` with label `+1` inside and `−1` in the solvent.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonBoltzmann {
    pub geometry: PbGeometry,
    pub mode: PbMode,
}

impl PoissonBoltzmann {
    pub fn new(geometry: PbGeometry, mode: PbMode) -> Result<Self> {
        geometry.validate()?;
        Ok(Self { geometry, mode })
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn laplacian(tape: &mut Tape, e: &EvalVars) -> Result<Var> {
    tape.sum(&e.second)
}

fn augmented(points: &Array2<f64>, region: Region) -> Array2<f64> {
    let n = points.ncols();
    let mut out = Array2::zeros((4, n));
    out.slice_mut(ndarray::s![0..3, ..]).assign(points);
    out.row_mut(3).fill(region.label());
    out
}

impl Problem for PoissonBoltzmann {
    fn name(&self) -> &'static str {
        "pb"
    }

    fn input_dim(&self) -> usize {
        4
    }

    fn condition_names(&self) -> Vec<&'static str> {
        vec!["pde-inside", "pde-outside", "interface-continuity", "interface-flux", "boundary"]
    }

    fn default_counts(&self) -> SampleCounts {
        SampleCounts::from_pairs(&[
            ("pde-inside", 1000),
            ("pde-outside", 1000),
            ("interface-continuity", 500),
            ("interface-flux", 500),
            ("boundary", 250),
        ])
    }

    fn sample(&self, counts: &SampleCounts, seed: u64) -> Result<Vec<Condition>> {
        let g = Arc::new(self.geometry.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, r_in, r_out) = (g.center, g.radius, g.truncation_radius);

        let in_ball = |n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            let cube = Uniform::new_inclusive(-hi, hi).unwrap();
            let mut pts = Array2::zeros((3, n));
            let mut filled = 0;
            while filled < n {
                let p = [cube.sample(rng), cube.sample(rng), cube.sample(rng)];
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if r < hi && r > lo {
                    for k in 0..3 {
                        pts[[k, filled]] = c[k] + p[k];
                    }
                    filled += 1;
                }
            }
            pts
        };
        let on_sphere = |n: usize, rng: &mut ChaCha8Rng, radius: f64| {
            let mut pts = Array2::zeros((3, n));
            for col in 0..n {
                let d = random_direction(rng);
                for k in 0..3 {
                    pts[[k, col]] = c[k] + radius * d[k];
                }
            }
            pts
        };

        let xyz = [0, 1, 2];
        let lap_req = DerivRequest::new(&xyz, &xyz);
        let grad_req = DerivRequest::gradient(&xyz);

        let inside_pts = in_ball(count_for(counts, "pde-inside")?, &mut rng, -1.0, r_in);
        let gi = g.clone();
        let inside = Condition {
            label: TermLabel::new(TermKind::Pde, "pde-inside"),
            evals: vec![Evaluation {
                inputs: augmented(&inside_pts, Region::Inside),
                request: lap_req.clone(),
            }],
            points: inside_pts,
            residual: Arc::new(move |tape, x, ev| {
                let lap = laplacian(tape, &ev[0])?;
                let a = tape.scale(lap, -gi.eps_inside)?;
                tape.shift(a, -gi.source(x))
            }),
        };

        let outside_pts = in_ball(count_for(counts, "pde-outside")?, &mut rng, r_in, r_out);
        let go = g.clone();
        let mode = self.mode;
        let outside = Condition {
            label: TermLabel::new(TermKind::Pde, "pde-outside"),
            evals: vec![Evaluation {
                inputs: augmented(&outside_pts, Region::Outside),
                request: lap_req,
            }],
            points: outside_pts,
            residual: Arc::new(move |tape, _x, ev| {
                let e = &ev[0];
                let lap = laplacian(tape, e)?;
                let diff = tape.scale(lap, -go.eps_outside)?;
                let kb2 = go.kappa_bar(Region::Outside).powi(2);
                let screening = match mode {
                    PbMode::Linearized => tape.scale(e.value, kb2)?,
                    PbMode::Nonlinear => {
                        let v = go.thermal_voltage();
                        let arg = tape.scale(e.value, 1.0 / v)?;
                        if tape.value(arg).abs() > SINH_GUARD {
                            return Err(PinnError::NonFinite(format!(
                                "sinh argument {} beyond guard",
                                tape.value(arg)
                            )));
                        }
                        let s = tape.sinh(arg)?;
                        tape.scale(s, kb2 * v)?
                    }
                };
                tape.add(diff, screening)
            }),
        };

        let cont_pts = on_sphere(count_for(counts, "interface-continuity")?, &mut rng, r_in);
        let continuity = Condition {
            label: TermLabel::new(TermKind::Bc, "interface-continuity"),
            evals: vec![
                Evaluation {
                    inputs: augmented(&cont_pts, Region::Inside),
                    request: DerivRequest::value_only(),
                },
                Evaluation {
                    inputs: augmented(&cont_pts, Region::Outside),
                    request: DerivRequest::value_only(),
                },
            ],
            points: cont_pts,
            residual: Arc::new(|tape, _x, ev| tape.sub(ev[0].value, ev[1].value)),
        };

        let flux_pts = on_sphere(count_for(counts, "interface-flux")?, &mut rng, r_in);
        let gf = g.clone();
        let flux = Condition {
            label: TermLabel::new(TermKind::Bc, "interface-flux"),
            evals: vec![
                Evaluation {
                    inputs: augmented(&flux_pts, Region::Inside),
                    request: grad_req.clone(),
                },
                Evaluation {
                    inputs: augmented(&flux_pts, Region::Outside),
                    request: grad_req,
                },
            ],
            points: flux_pts,
            residual: Arc::new(move |tape, x, ev| {
                let n = gf.normal(x);
                let mut sides = [None, None];
                for (side, (e, eps)) in ev.iter().zip([gf.eps_inside, gf.eps_outside]).enumerate() {
                    let terms = (0..3)
                        .map(|k| tape.scale(e.first[k], eps * n[k]))
                        .collect::<Result<Vec<_>>>()?;
                    sides[side] = Some(tape.sum(&terms)?);
                }
                tape.sub(sides[0].unwrap(), sides[1].unwrap())
            }),
        };

        let bnd_pts = on_sphere(count_for(counts, "boundary")?, &mut rng, r_out);
        let gb = g.clone();
        let boundary = Condition {
            label: TermLabel::new(TermKind::Bc, "boundary"),
            evals: vec![Evaluation {
                inputs: augmented(&bnd_pts, Region::Outside),
                request: DerivRequest::value_only(),
            }],
            points: bnd_pts,
            residual: Arc::new(move |tape, x, ev| {
                let target = green_boundary(x, &gb)?;
                tape.shift(ev[0].value, -target)
            }),
        };

        Ok(vec![inside, outside, continuity, flux, boundary])
    }
}
