// SPDX-License-Identifier: Apache-2.0

//! Multi-trial training runs, aggregation and CSV/SVG output.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::config::{ExperimentConfig, ProblemConfig};
use crate::error::{PinnError, Result};
use crate::loss::{assemble, scalarize, ScalingState};
use crate::network::{initialize, NetworkSpec, ParamSet};
use crate::optim::{adam_step, AdamState};
use crate::oracle::{
    burgers_reference, default_shells, grid_test_set, radial_test_set, riccati_test_set, solve_pb_linear_radial, test_mse,
    TestSet, PB_REFERENCE_NR,
};
use crate::problems::Condition;

/// Metrics for one epoch of one trial, taken before that epoch's update.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub trial: usize,
    pub epoch: u64,
    pub losses: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub total: f64,
    pub test_mse: Option<f64>,
    pub lr: f64,
    /// Seconds since the trial started.
    pub wall_time: f64,
}

/// Upper end of the Riccati probe interval; the solution blows up at t = 1.
pub const RICCATI_PROBE_END: f64 = 0.95;

/// Probe set against the problem's reference solution, if one exists.
///
/// The Poisson–Boltzmann problem is scored against the linearized radial
/// solution, which needs a single charge at the sphere center.
pub fn reference_test_set(problem: &ProblemConfig) -> Result<Option<TestSet>> {
    match problem {
        ProblemConfig::Riccati(_) => riccati_test_set(200, RICCATI_PROBE_END).map(Some),
        ProblemConfig::Burgers(b) => grid_test_set(&burgers_reference(b)?, 10).map(Some),
        ProblemConfig::Pb(p) => {
            let g = &p.geometry;
            if g.charges.len() != 1 || g.charges[0].position != g.center {
                return Ok(None);
            }
            let profile = solve_pb_linear_radial(g, PB_REFERENCE_NR)?;
            radial_test_set(&profile, g, &default_shells(g), 100, 0x5eed).map(Some)
        }
    }
}

/// A validated config with its reference probes, shared by all trials.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub config: ExperimentConfig,
    pub test_set: Option<TestSet>,
    pub term_names: Vec<String>,
}

impl Benchmark {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let test_set = reference_test_set(&config.problem)?;
        let term_names = config.problem.problem().condition_names().iter().map(|s| s.to_string()).collect();
        Ok(Self {
            config: config.clone(),
            test_set,
            term_names,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub records: Vec<MetricsRecord>,
    /// Parameters after the last successful update.
    pub params: ParamSet,
    /// Reason training stopped early, if it did.
    pub diverged: Option<String>,
    /// Test MSE of the final parameters.
    pub final_test_mse: Option<f64>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeds for network initialization, point sampling and the scaling policy.
pub fn trial_seeds(base: u64, trial: usize) -> (u64, u64, u64) {
    let s = base.wrapping_add(trial as u64);
    (s, splitmix(s ^ 0x1), splitmix(s ^ 0x2))
}

fn is_divergence(e: &PinnError) -> bool {
    matches!(e, PinnError::NonFinite(_))
}

/// Train one trial: points are sampled once, then every epoch assembles the
/// loss terms, scalarizes them and takes one ADAM step.
pub fn run_trial_with(bench: &Benchmark, trial: usize) -> Result<TrialOutcome> {
    let cfg = &bench.config;
    let (net_seed, sample_seed, scale_seed) = trial_seeds(cfg.seed, trial);
    let problem = cfg.problem.problem();
    let conditions: Vec<Condition> = problem.sample(&cfg.sample_counts(), sample_seed)?;
    let mut params = initialize(&NetworkSpec::new(cfg.widths.clone(), net_seed)?)?;
    let mut scaling = ScalingState::new(cfg.policy, conditions.len(), cfg.epochs, scale_seed)?;
    let mut adam = AdamState::new(params.len());
    let started = Instant::now();
    let mut records = Vec::with_capacity(cfg.epochs as usize);
    let mut diverged = None;

    let score = |p: &ParamSet| -> Result<Option<f64>> { bench.test_set.as_ref().map(|s| test_mse(p, s)).transpose() };

    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch);
        let step = assemble(&conditions, &params, cfg.norm, epoch).and_then(|bundle| {
            let s = scalarize(&bundle, &mut scaling)?;
            Ok((bundle, s))
        });
        let (bundle, scal) = match step {
            Ok(v) => v,
            Err(e) if is_divergence(&e) => {
                diverged = Some(format!("epoch {epoch}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let test = if epoch % cfg.test_every == 0 || epoch + 1 == cfg.epochs {
            score(&params)?
        } else {
            None
        };
        records.push(MetricsRecord {
            trial,
            epoch,
            losses: bundle.values(),
            lambdas: scal.weights.clone(),
            total: scal.total,
            test_mse: test,
            lr,
            wall_time: started.elapsed().as_secs_f64(),
        });
        match adam_step(params.as_mut_slice(), &scal.gradient, &mut adam, lr) {
            Ok(()) => {}
            Err(e) if is_divergence(&e) => {
                diverged = Some(format!("epoch {epoch}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let final_test_mse = if diverged.is_some() {
        None
    } else {
        match score(&params) {
            Ok(v) => v.filter(|m| m.is_finite()),
            Err(e) if is_divergence(&e) => {
                diverged = Some(format!("final evaluation: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    };
    Ok(TrialOutcome {
        trial,
        records,
        params,
        diverged,
        final_test_mse,
    })
}

pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    run_trial_with(&Benchmark::prepare(config)?, trial)
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub term_names: Vec<String>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Run every trial of a prepared benchmark on up to `jobs` threads.
pub fn run_experiment(bench: &Benchmark, jobs: usize) -> Result<ExperimentResult> {
    let n = bench.config.trials;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<TrialOutcome>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, n) {
            scope.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= n {
                    break;
                }
                let out = run_trial_with(bench, t);
                slots.lock().unwrap()[t] = Some(out);
            });
        }
    });
    let outcomes = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("every trial ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: bench.config.clone(),
        term_names: bench.term_names.clone(),
        outcomes,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub problem: String,
    pub norm: String,
    pub policy: String,
    pub schedule: String,
    pub trials: usize,
    pub diverged: usize,
    /// Statistics of the final test MSE over non-diverged trials.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub median: Option<f64>,
}

fn schedule_name(cfg: &ExperimentConfig) -> &'static str {
    match cfg.schedule {
        crate::optim::LrSchedule::Piecewise(ref s) if s.len() == 1 => "constant",
        crate::optim::LrSchedule::Piecewise(_) => "piecewise",
        crate::optim::LrSchedule::Cyclical { .. } => "cyclical",
    }
}

impl ExperimentResult {
    pub fn final_test_mses(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter(|o| o.diverged.is_none())
            .filter_map(|o| o.final_test_mse)
            .collect()
    }

    pub fn diverged_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.diverged.is_some()).count()
    }

    pub fn summary(&self) -> SummaryRow {
        let finals = self.final_test_mses();
        let (mean, std, med) = if finals.is_empty() {
            (None, None, None)
        } else {
            let (m, s) = mean_std(&finals);
            (Some(m), Some(s), Some(median(&finals)))
        };
        SummaryRow {
            name: self.config.name.clone(),
            problem: self.config.problem.name().to_string(),
            norm: self.config.norm.name().to_string(),
            policy: self.config.policy.name(),
            schedule: schedule_name(&self.config).to_string(),
            trials: self.outcomes.len(),
            diverged: self.diverged_count(),
            mean,
            std,
            median: med,
        }
    }

    /// Mean and spread of test MSE at every epoch where all non-diverged
    /// trials were scored.
    pub fn curve(&self) -> Vec<CurvePoint> {
        let live: Vec<&TrialOutcome> = self.outcomes.iter().filter(|o| o.diverged.is_none()).collect();
        let Some(first) = live.first() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, rec) in first.records.iter().enumerate() {
            if rec.test_mse.is_none() {
                continue;
            }
            let vals: Option<Vec<f64>> = live.iter().map(|o| o.records.get(i).and_then(|r| r.test_mse)).collect();
            if let Some(vals) = vals {
                let (mean, std) = mean_std(&vals);
                out.push(CurvePoint {
                    epoch: rec.epoch,
                    mean,
                    std,
                    trials: vals.len(),
                });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub epoch: u64,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

/// One row per (trial, epoch).
pub fn records_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("trial,epoch");
    for n in &result.term_names {
        let _ = write!(s, ",loss_{n}");
    }
    for n in &result.term_names {
        let _ = write!(s, ",lambda_{n}");
    }
    s.push_str(",total,test_mse,lr,diverged,wall_time\n");
    for o in &result.outcomes {
        let flag = u8::from(o.diverged.is_some());
        for r in &o.records {
            let _ = write!(s, "{},{}", r.trial, r.epoch);
            for v in r.losses.iter().chain(&r.lambdas) {
                let _ = write!(s, ",{v:?}");
            }
            let _ = writeln!(
                s,
                ",{:?},{},{:?},{flag},{:.6}",
                r.total,
                opt(r.test_mse),
                r.lr,
                r.wall_time
            );
        }
    }
    s
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("epoch,mean_test_mse,std_test_mse,trials\n");
    for p in points {
        let _ = writeln!(s, "{},{:?},{:?},{}", p.epoch, p.mean, p.std, p.trials);
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(
        "name,problem,norm,policy,schedule,trials,diverged,final_test_mse_mean,final_test_mse_std,final_test_mse_median\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.problem,
            r.norm,
            r.policy,
            r.schedule,
            r.trials,
            r.diverged,
            opt(r.mean),
            opt(r.std),
            opt(r.median)
        );
    }
    s
}

/// Log-scale line chart of the mean test-MSE curve with a ±1 std band.
pub fn render_svg(points: &[CurvePoint], title: &str) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        title.replace('&', "&amp;").replace('<', "&lt;")
    );
    let usable: Vec<&CurvePoint> = points.iter().filter(|p| p.mean > 0.0 && p.mean.is_finite()).collect();
    if usable.len() >= 2 {
        let lo_of = |p: &CurvePoint| (p.mean - p.std).max(p.mean * 1e-3).log10();
        let hi_of = |p: &CurvePoint| (p.mean + p.std).log10();
        let ymin = usable.iter().map(|p| lo_of(p)).fold(f64::INFINITY, f64::min).floor();
        let ymax = usable.iter().map(|p| hi_of(p)).fold(f64::NEG_INFINITY, f64::max).ceil().max(ymin + 1.0);
        let xmax = usable.last().unwrap().epoch.max(1) as f64;
        let px = |e: u64| pad + (w - 2.0 * pad) * e as f64 / xmax;
        let py = |l: f64| h - pad - (h - 2.0 * pad) * (l - ymin) / (ymax - ymin);
        let mut band = String::new();
        for p in &usable {
            let _ = write!(band, "{:.1},{:.1} ", px(p.epoch), py(hi_of(p)));
        }
        for p in usable.iter().rev() {
            let _ = write!(band, "{:.1},{:.1} ", px(p.epoch), py(lo_of(p)));
        }
        let line: String = usable.iter().map(|p| format!("{:.1},{:.1} ", px(p.epoch), py(p.mean.log10()))).collect();
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"#9ecae1\" opacity=\"0.5\"/>", band.trim_end());
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"/>", line.trim_end());
        let _ = writeln!(
            s,
            "<line x1=\"{pad}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{0}\" stroke=\"black\"/>",
            h - pad,
            w - pad
        );
        for d in (ymin as i32)..=(ymax as i32) {
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e{d}</text>",
                pad - 4.0,
                py(d as f64) + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">epoch (0 to {xmax})</text>",
            w / 2.0,
            h - pad + 30.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Write `records.csv`, `curve.csv`, `curve.svg`, `summary.csv` and one
/// parameter file per trial under `dir`.
pub fn emit_plot_data(result: &ExperimentResult, dir: &Path) -> Result<()> {
    if result.outcomes.iter().all(|o| o.records.is_empty()) {
        return Err(PinnError::Usage("no records to write".into()));
    }
    std::fs::create_dir_all(dir.join("params"))?;
    write_atomic(&dir.join("records.csv"), &records_csv(result))?;
    let curve = result.curve();
    write_atomic(&dir.join("curve.csv"), &curve_csv(&curve))?;
    write_atomic(&dir.join("curve.svg"), &render_svg(&curve, &result.config.name))?;
    write_atomic(&dir.join("summary.csv"), &summary_csv(&[result.summary()]))?;
    for o in &result.outcomes {
        write_atomic(&dir.join("params").join(format!("trial_{}.txt", o.trial)), &o.params.to_text())?;
    }
    Ok(())
}

/// Run each config in turn, writing its outputs to its `out` directory.
pub fn run_sweep(configs: &[ExperimentConfig], jobs: usize) -> Result<Vec<SummaryRow>> {
    if configs.is_empty() {
        return Err(PinnError::Usage("sweep needs at least one config".into()));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let result = run_experiment(&Benchmark::prepare(cfg)?, jobs)?;
        emit_plot_data(&result, &cfg.out)?;
        rows.push(result.summary());
    }
    Ok(rows)
}

/// Available hardware threads, at least 1.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
