// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # Riccati with ReLoBRaLo
//! problem = riccati
//! widths = 1,20,20,20,1
//! policy = relobralo
//! relobralo.temperature = 0.1
//! schedule = piecewise
//! epochs = 10000
//! trials = 10
//! samples.pde = 2000
//! ```
//!
//! Keys not listed in [`KEYS`] are rejected, so typos fail loudly.

use std::path::{Path, PathBuf};

use crate::error::{PinnError, Result};
use crate::loss::{NormKind, ScalingPolicy, StochasticDist, VarianceMode};
use crate::optim::{CycleShape, LrSchedule};
use crate::problems::{
    load_charges, parse_charges, Burgers, PbGeometry, PbMode, PbUnits, PoissonBoltzmann, Problem, Riccati, SampleCounts,
};

/// Every accepted key, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("name", "experiment name used in summaries (default: file stem or problem)"),
    ("problem", "riccati | burgers | pb"),
    ("widths", "comma-separated layer widths, input first"),
    ("norm", "mse | l1 | l2 | l3 | linf | l1+l2+l3 | l2+linf | mse+linf"),
    ("policy", "fixed | lra | softadapt | relobralo | stochastic"),
    ("lra.alpha", "LRA smoothing factor"),
    ("relobralo.temperature", "softmax temperature"),
    ("relobralo.expected_rho", "expected Bernoulli lookback value"),
    ("relobralo.alpha", "exponential smoothing factor"),
    ("relobralo.m", "softmax scale (default: number of terms)"),
    ("stochastic.dist", "normal | uniform"),
    ("stochastic.variance", "fixed | decreasing"),
    ("schedule", "piecewise | cyclical | constant"),
    ("lr", "rate for the constant schedule"),
    ("lr.piecewise", "epoch:rate pairs, e.g. 0:1e-2,2000:2e-3,8000:5e-4"),
    ("lr.base", "cyclical lower rate"),
    ("lr.max", "cyclical upper rate"),
    ("lr.half_period", "cyclical half-period in epochs"),
    ("lr.shape", "triangular | sawtooth"),
    ("epochs", "optimizer steps per trial"),
    ("trials", "independent trials"),
    ("seed", "base seed; trial k uses seed + k"),
    ("test_every", "epochs between test-MSE evaluations"),
    ("out", "output directory"),
    ("samples.<condition>", "collocation points for a condition"),
    ("burgers.nu", "viscosity"),
    ("burgers.length", "domain length"),
    ("burgers.t_final", "final time"),
    ("riccati.t_final", "end of the training interval"),
    ("pb.mode", "nonlinear | linearized"),
    ("pb.units", "reduced | physical"),
    ("pb.radius", "sphere radius"),
    ("pb.center", "sphere center x,y,z"),
    ("pb.truncation_radius", "outer boundary radius"),
    ("pb.eps_inside", "dielectric constant inside"),
    ("pb.eps_outside", "dielectric constant of the solvent"),
    ("pb.kappa", "Debye–Hückel screening constant"),
    ("pb.sigma", "mollifier width"),
    ("pb.charges", "inline charges 'x y z q; x y z q'"),
    ("pb.charges_file", "charge file, one 'x y z q' per line"),
    ("pb.temperature", "temperature in K (physical units)"),
    ("pb.ionic_strength", "ionic strength in mol/L (physical units)"),
];

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemConfig {
    Riccati(Riccati),
    Burgers(Burgers),
    Pb(PoissonBoltzmann),
}

impl ProblemConfig {
    pub fn problem(&self) -> &dyn Problem {
        match self {
            ProblemConfig::Riccati(p) => p,
            ProblemConfig::Burgers(p) => p,
            ProblemConfig::Pb(p) => p,
        }
    }

    pub fn name(&self) -> &'static str {
        self.problem().name()
    }

    pub fn default_widths(&self) -> Vec<usize> {
        match self {
            ProblemConfig::Riccati(_) => vec![1, 20, 20, 20, 1],
            ProblemConfig::Burgers(_) => vec![2, 20, 20, 20, 20, 1],
            ProblemConfig::Pb(_) => vec![4, 20, 20, 20, 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub widths: Vec<usize>,
    pub norm: NormKind,
    pub policy: ScalingPolicy,
    pub schedule: LrSchedule,
    pub epochs: u64,
    pub trials: usize,
    pub seed: u64,
    pub test_every: u64,
    /// Sample counts; conditions not listed use the problem defaults.
    pub samples: SampleCounts,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for a problem: fixed policy, MSE norm, the standard
    /// piecewise schedule, 10000 epochs, 10 trials.
    pub fn new(problem: ProblemConfig) -> Self {
        let name = problem.name().to_string();
        Self {
            widths: problem.default_widths(),
            out: PathBuf::from("results").join(&name),
            name,
            problem,
            norm: NormKind::Mse,
            policy: ScalingPolicy::Fixed,
            schedule: LrSchedule::standard_piecewise(),
            epochs: 10_000,
            trials: 10,
            seed: 0,
            test_every: 50,
            samples: SampleCounts::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.trials == 0 {
            return Err(PinnError::Config("epochs and trials must be at least 1".into()));
        }
        if self.test_every == 0 {
            return Err(PinnError::Config("test_every must be at least 1".into()));
        }
        let p = self.problem.problem();
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(PinnError::Config("widths need at least two positive entries".into()));
        }
        if self.widths[0] != p.input_dim() || *self.widths.last().unwrap() != 1 {
            return Err(PinnError::Config(format!(
                "{} networks take {} inputs and produce 1 output",
                p.name(),
                p.input_dim()
            )));
        }
        let names = p.condition_names();
        for k in self.samples.0.keys() {
            if !names.contains(&k.as_str()) {
                return Err(PinnError::Config(format!(
                    "unknown condition '{k}' for {}; expected one of {names:?}",
                    p.name()
                )));
            }
        }
        self.policy.validate()?;
        self.schedule.validate()
    }

    /// Sample counts with problem defaults filled in.
    pub fn sample_counts(&self) -> SampleCounts {
        self.samples.merged_over(&self.problem.problem().default_counts())
    }

    /// Load a config file; the name defaults to the file stem and relative
    /// paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        parse_config_named(&text, base, stem.as_deref())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| PinnError::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

/// Parse config text; relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    parse_config_named(text, base, None)
}

/// Like [`parse_config`], with a fallback experiment name.
pub fn parse_config_named(text: &str, base: &Path, default_name: Option<&str>) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PinnError::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let known = KEYS.iter().any(|(name, _)| *name == k) || k.starts_with("samples.");
        if !known {
            return Err(PinnError::Config(format!("line {}: unknown key '{k}'", lineno + 1)));
        }
        if pairs.iter().any(|(seen, _)| *seen == k) {
            return Err(PinnError::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
        }
        pairs.push((k, v));
    }
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

    let problem_name = get("problem").ok_or_else(|| PinnError::Config("missing 'problem'".into()))?;
    let problem = match problem_name {
        "riccati" => {
            let mut r = Riccati::default();
            if let Some(v) = get("riccati.t_final") {
                r.t_final = parse_num("riccati.t_final", v)?;
            }
            if !(r.t_final > 0.0 && r.t_final < 1.0) {
                return Err(PinnError::Config("riccati.t_final must lie in (0, 1)".into()));
            }
            ProblemConfig::Riccati(r)
        }
        "burgers" => {
            let mut b = Burgers::default();
            for (key, slot) in [
                ("burgers.nu", &mut b.nu),
                ("burgers.length", &mut b.length),
                ("burgers.t_final", &mut b.t_final),
            ] {
                if let Some(v) = get(key) {
                    *slot = parse_num(key, v)?;
                    if !(*slot > 0.0) {
                        return Err(PinnError::Config(format!("{key} must be positive")));
                    }
                }
            }
            ProblemConfig::Burgers(b)
        }
        "pb" => ProblemConfig::Pb(parse_pb(&get, base)?),
        other => return Err(PinnError::Config(format!("unknown problem '{other}'"))),
    };
    for (k, _) in &pairs {
        let prefix = k.split('.').next().unwrap_or("");
        if ["riccati", "burgers", "pb"].contains(&prefix) && prefix != problem_name {
            return Err(PinnError::Config(format!("key '{k}' does not apply to problem '{problem_name}'")));
        }
    }

    let mut cfg = ExperimentConfig::new(problem);
    if let Some(v) = get("name").or(default_name) {
        cfg.name = v.to_string();
    }
    if let Some(v) = get("widths") {
        cfg.widths = parse_list("widths", v)?;
    }
    if let Some(v) = get("norm") {
        cfg.norm = v.parse()?;
    }
    cfg.policy = parse_policy(&get)?;
    cfg.schedule = parse_schedule(&get)?;
    if let Some(v) = get("epochs") {
        cfg.epochs = parse_num("epochs", v)?;
    }
    if let Some(v) = get("trials") {
        cfg.trials = parse_num("trials", v)?;
    }
    if let Some(v) = get("seed") {
        cfg.seed = parse_num("seed", v)?;
    }
    if let Some(v) = get("test_every") {
        cfg.test_every = parse_num("test_every", v)?;
    }
    cfg.out = match get("out") {
        Some(v) => base.join(v),
        None => base.join("results").join(&cfg.name),
    };
    for (k, v) in &pairs {
        if let Some(cond) = k.strip_prefix("samples.") {
            cfg.samples.set(cond, parse_num(k, v)?);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_policy<'a>(get: &impl Fn(&str) -> Option<&'a str>) -> Result<ScalingPolicy> {
    let f = |key: &str, default: f64| get(key).map_or(Ok(default), |v| parse_num(key, v));
    let policy = match get("policy").unwrap_or("fixed") {
        "fixed" => ScalingPolicy::Fixed,
        "lra" => ScalingPolicy::Lra {
            alpha: f("lra.alpha", 0.9)?,
        },
        "softadapt" => ScalingPolicy::SoftAdapt,
        "relobralo" => ScalingPolicy::ReLoBRaLo {
            temperature: f("relobralo.temperature", 0.1)?,
            expected_rho: f("relobralo.expected_rho", 0.999)?,
            alpha: f("relobralo.alpha", 0.999)?,
            m: get("relobralo.m").map(|v| parse_num("relobralo.m", v)).transpose()?,
        },
        "stochastic" => ScalingPolicy::Stochastic {
            dist: match get("stochastic.dist").unwrap_or("normal") {
                "normal" => StochasticDist::Normal,
                "uniform" => StochasticDist::Uniform,
                other => return Err(PinnError::Config(format!("unknown stochastic.dist '{other}'"))),
            },
            variance: match get("stochastic.variance").unwrap_or("fixed") {
                "fixed" => VarianceMode::Fixed,
                "decreasing" => VarianceMode::Decreasing,
                other => return Err(PinnError::Config(format!("unknown stochastic.variance '{other}'"))),
            },
        },
        other => return Err(PinnError::Config(format!("unknown policy '{other}'"))),
    };
    policy.validate()?;
    Ok(policy)
}

fn parse_schedule<'a>(get: &impl Fn(&str) -> Option<&'a str>) -> Result<LrSchedule> {
    match get("schedule").unwrap_or("piecewise") {
        "piecewise" => match get("lr.piecewise") {
            None => Ok(LrSchedule::standard_piecewise()),
            Some(v) => {
                let segs = v
                    .split(',')
                    .map(|seg| {
                        let (e, r) = seg
                            .split_once(':')
                            .ok_or_else(|| PinnError::Config(format!("lr.piecewise: bad segment '{seg}'")))?;
                        Ok((parse_num("lr.piecewise", e.trim())?, parse_num("lr.piecewise", r.trim())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                LrSchedule::piecewise(segs)
            }
        },
        "constant" => {
            let lr = get("lr").ok_or_else(|| PinnError::Config("constant schedule needs 'lr'".into()))?;
            LrSchedule::constant(parse_num("lr", lr)?)
        }
        "cyclical" => {
            let LrSchedule::Cyclical {
                mut base,
                mut max,
                mut half_period,
                mut shape,
            } = LrSchedule::standard_cyclical()
            else {
                unreachable!()
            };
            if let Some(v) = get("lr.base") {
                base = parse_num("lr.base", v)?;
            }
            if let Some(v) = get("lr.max") {
                max = parse_num("lr.max", v)?;
            }
            if let Some(v) = get("lr.half_period") {
                half_period = parse_num("lr.half_period", v)?;
            }
            if let Some(v) = get("lr.shape") {
                shape = match v {
                    "triangular" => CycleShape::Triangular,
                    "sawtooth" => CycleShape::Sawtooth,
                    other => return Err(PinnError::Config(format!("unknown lr.shape '{other}'"))),
                };
            }
            let s = LrSchedule::Cyclical {
                base,
                max,
                half_period,
                shape,
            };
            s.validate()?;
            Ok(s)
        }
        other => Err(PinnError::Config(format!("unknown schedule '{other}'"))),
    }
}

fn parse_pb<'a>(get: &impl Fn(&str) -> Option<&'a str>, base: &Path) -> Result<PoissonBoltzmann> {
    let mut g = PbGeometry::default();
    let f = |key: &str, slot: &mut f64| -> Result<()> {
        if let Some(v) = get(key) {
            *slot = parse_num(key, v)?;
        }
        Ok(())
    };
    f("pb.radius", &mut g.radius)?;
    f("pb.truncation_radius", &mut g.truncation_radius)?;
    f("pb.eps_inside", &mut g.eps_inside)?;
    f("pb.eps_outside", &mut g.eps_outside)?;
    f("pb.kappa", &mut g.kappa)?;
    f("pb.temperature", &mut g.constants.temperature)?;
    f("pb.ionic_strength", &mut g.constants.ionic_strength)?;
    if let Some(v) = get("pb.sigma") {
        g.sigma = Some(parse_num("pb.sigma", v)?);
    }
    if let Some(v) = get("pb.center") {
        let c: Vec<f64> = parse_list("pb.center", v)?;
        if c.len() != 3 {
            return Err(PinnError::Config("pb.center needs three coordinates".into()));
        }
        g.center = [c[0], c[1], c[2]];
    }
    match (get("pb.charges"), get("pb.charges_file")) {
        (Some(_), Some(_)) => {
            return Err(PinnError::Config("give either pb.charges or pb.charges_file".into()));
        }
        (Some(v), None) => g.charges = parse_charges(&v.replace(';', "\n"))?,
        (None, Some(p)) => g.charges = load_charges(&base.join(p))?,
        (None, None) => {}
    }
    g.units = match get("pb.units").unwrap_or("reduced") {
        "reduced" => PbUnits::Reduced,
        "physical" => PbUnits::Physical,
        other => return Err(PinnError::Config(format!("unknown pb.units '{other}'"))),
    };
    let mode = match get("pb.mode").unwrap_or("nonlinear") {
        "nonlinear" => PbMode::Nonlinear,
        "linearized" => PbMode::Linearized,
        other => return Err(PinnError::Config(format!("unknown pb.mode '{other}'"))),
    };
    PoissonBoltzmann::new(g, mode)
}
