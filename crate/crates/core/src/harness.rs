//! Monte Carlo experiment: draw markets, solve them across a grid of
//! return targets, and compare the averages with the large-market theory.
//!
//! Each trial is one market draw (ensemble, return matrix, Wishart factor)
//! reused for every grid point. Trials run in parallel and are reduced in
//! trial-index order, so a summary depends only on the config and seed.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealed::annealed_risk;
use crate::error::{PortfolioError, Result};
use crate::market::{build_ensemble, sample_return_matrix, wishart, DistKind, ParetoParams};
use crate::moments::{empirical_moments, AsymptoticMoments};
use crate::quenched::{minimal_risk, sharpe_ratio, ConstraintSpec, GMoments, QuenchedSystem};
use crate::replica::{epsilon_quenched, sharpe_theory};
use crate::rng::trial_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Total asset count including the risk-free asset.
    #[serde(rename = "N")]
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub pareto_r: ParetoParams,
    pub pareto_h: ParetoParams,
    pub dist_kind: DistKind,
    #[serde(rename = "R_grid")]
    pub r_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// `N = 250`, `p = 500`, 100 trials, `R ∈ {0.9, …, 1.8}`.
    pub fn desk() -> Self {
        ExperimentConfig {
            n: 250,
            p: 500,
            rho: 0.1,
            r0: 1.0,
            pareto_r: ParetoParams::REFERENCE,
            pareto_h: ParetoParams::REFERENCE,
            dist_kind: DistKind::Gaussian,
            r_grid: (0..10).map(|i| 0.9 + 0.1 * i as f64).collect(),
            trials: 100,
            seed: 20190105,
        }
    }

    /// The desk config at `N = 1000`, `p = 2000`.
    pub fn full_scale() -> Self {
        ExperimentConfig {
            n: 1000,
            p: 2000,
            ..Self::desk()
        }
    }

    /// `α = p/(N − 1)`.
    pub fn alpha(&self) -> f64 {
        self.p as f64 / (self.n as f64 - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PortfolioError::Config(msg));
        if self.n < 3 {
            return bad(format!("N must be at least 3, got {}", self.n));
        }
        if self.p < self.n {
            return Err(PortfolioError::Domain(format!(
                "alpha = p/(N-1) must exceed 1, got p={} N={}",
                self.p, self.n
            )));
        }
        if self.trials < 2 {
            return bad(format!("need at least 2 trials, got {}", self.trials));
        }
        if self.r_grid.is_empty() {
            return bad("R grid is empty".into());
        }
        if !(self.rho.is_finite() && self.r0.is_finite())
            || self.r_grid.iter().any(|r| !r.is_finite())
        {
            return bad("rho, R0 and the R grid must be finite".into());
        }
        self.pareto_r
            .validate()
            .and(self.pareto_h.validate())
            .map_err(|e| PortfolioError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PortfolioError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| PortfolioError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n").map_err(|e| PortfolioError::io(path, e))
    }

    /// Exact ensemble averages of the configured sampling laws.
    pub fn true_moments(&self) -> Result<AsymptoticMoments> {
        AsymptoticMoments::from_pareto(&self.pareto_r, &self.pareto_h)
    }
}

/// How each trial's seed is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedSchedule {
    /// Trial `t` uses `seed ^ t`.
    #[default]
    PerTrial,
    /// Every trial reuses `seed`; only useful to test the aggregation.
    Repeated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPoint {
    pub r: f64,
    pub eps: f64,
    pub sharpe: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub g: GMoments,
    /// Ensemble averages of this trial's own `(r_i, v_i)`.
    pub empirical: AsymptoticMoments,
    pub points: Vec<TrialPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub reason: String,
}

pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    run_trial_seeded(config, trial, trial_seed(config.seed, trial as u64))
}

fn run_trial_seeded(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialResult> {
    let alpha = config.alpha();
    let ensemble = build_ensemble(&config.pareto_r, &config.pareto_h, config.n, config.r0, seed)?;
    let x = sample_return_matrix(&ensemble, config.p, config.dist_kind, seed)?;
    let j = wishart(&x)?;
    let system = QuenchedSystem::new(&j, &ensemble)?;
    let g = system.gmoments();
    let points = config
        .r_grid
        .iter()
        .map(|&r| {
            let c = ConstraintSpec::new(config.rho, r, config.r0)?;
            let eps = minimal_risk(&g, &c, config.n)?;
            let sharpe = sharpe_ratio(eps, &c)?;
            let kappa = annealed_risk(&ensemble, &c, alpha)? / eps;
            Ok(TrialPoint {
                r,
                eps,
                sharpe,
                kappa,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult {
        trial,
        g,
        empirical: empirical_moments(&ensemble),
        points,
    })
}

/// Mean and spread of one quantity across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    /// `sd / √trials`.
    pub stderr: f64,
}

impl Stat {
    pub fn from_samples(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            sd,
            stderr: sd / n.sqrt(),
        }
    }

    pub fn spread(&self, kind: StatKind) -> f64 {
        match kind {
            StatKind::Stderr => self.stderr,
            StatKind::Stddev => self.sd,
        }
    }
}

/// Which spread is reported as the error bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    #[default]
    Stderr,
    Stddev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridStats {
    pub r: f64,
    pub eps: Stat,
    pub sharpe: Stat,
    pub kappa: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub alpha: f64,
    pub points: Vec<GridStats>,
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    #[serde(skip)]
    pub elapsed: Duration,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_experiment_with(config, SeedSchedule::PerTrial)
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    schedule: SeedSchedule,
) -> Result<ExperimentSummary> {
    config.validate()?;
    let start = Instant::now();
    let outcomes: Vec<_> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = match schedule {
                SeedSchedule::PerTrial => trial_seed(config.seed, t as u64),
                SeedSchedule::Repeated => config.seed,
            };
            run_trial_seeded(config, t, seed).map_err(|e| TrialFailure {
                trial: t,
                reason: e.to_string(),
            })
        })
        .collect();

    let mut trials = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => trials.push(t),
            Err(f) => {
                log::warn!("trial {} failed: {}", f.trial, f.reason);
                failures.push(f);
            }
        }
    }
    if failures.len() * 10 > config.trials || trials.len() < 2 {
        return Err(PortfolioError::ExperimentFailed {
            failed: failures.len(),
            total: config.trials,
            reason: failures
                .first()
                .map(|f| f.reason.clone())
                .unwrap_or_else(|| "too few successful trials".into()),
        });
    }

    let points = config
        .r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let column = |f: fn(&TrialPoint) -> f64| -> Vec<f64> {
                trials.iter().map(|t| f(&t.points[i])).collect()
            };
            GridStats {
                r,
                eps: Stat::from_samples(&column(|p| p.eps)),
                sharpe: Stat::from_samples(&column(|p| p.sharpe)),
                kappa: Stat::from_samples(&column(|p| p.kappa)),
            }
        })
        .collect();
    let elapsed = start.elapsed();
    log::info!(
        "{} trials ({} failed) at N={}, p={} in {:.2?}",
        config.trials,
        failures.len(),
        config.n,
        config.p,
        elapsed
    );
    Ok(ExperimentSummary {
        config: config.clone(),
        alpha: config.alpha(),
        points,
        trials,
        failures,
        elapsed,
    })
}

/// Pass thresholds for a simulation-versus-theory comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_abs_z: f64,
    pub max_rel_err: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_abs_z: 3.0,
            max_rel_err: 0.05,
        }
    }
}

/// One grid point of a simulated curve: mean and error bar of `ε` and `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub r: f64,
    pub eps_mean: f64,
    pub eps_err: f64,
    pub sharpe_mean: f64,
    pub sharpe_err: f64,
}

/// One grid point of a theory curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub r: f64,
    pub eps: f64,
    pub sharpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub eps_mean: f64,
    pub eps_stderr: f64,
    pub eps_theory: f64,
    pub sharpe_mean: f64,
    pub sharpe_stderr: f64,
    pub sharpe_theory: f64,
    #[serde(with = "crate::report::nullable_f64")]
    pub z_eps: f64,
    #[serde(with = "crate::report::nullable_f64")]
    pub z_sharpe: f64,
}

impl ComparisonRow {
    pub fn rel_err_eps(&self) -> f64 {
        rel_err(self.eps_mean, self.eps_theory)
    }

    pub fn rel_err_sharpe(&self) -> f64 {
        rel_err(self.sharpe_mean, self.sharpe_theory)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config: Option<ExperimentConfig>,
    pub alpha: Option<f64>,
    pub trials_ok: Option<usize>,
    pub trials_failed: Option<usize>,
    pub stat: StatKind,
    pub kappa_mean: Option<f64>,
    pub kappa_theory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metadata: ReportMetadata,
    pub thresholds: Thresholds,
    pub rows: Vec<ComparisonRow>,
    #[serde(with = "crate::report::nullable_f64")]
    pub max_abs_z: f64,
    #[serde(with = "crate::report::nullable_f64")]
    pub max_rel_err: f64,
    pub pass: bool,
}

fn rel_err(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs()
    }
}

fn z_score(mean: f64, theory: f64, spread: f64) -> f64 {
    if mean == theory {
        0.0
    } else {
        (mean - theory) / spread
    }
}

/// Score a simulated curve against a theory curve on the same grid.
pub fn compare_curves(
    sim: &[SimPoint],
    theory: &[TheoryPoint],
    thresholds: Thresholds,
    metadata: ReportMetadata,
) -> Result<ComparisonReport> {
    if sim.is_empty() {
        return Err(PortfolioError::Config("empty R grid".into()));
    }
    if sim.len() != theory.len()
        || sim
            .iter()
            .zip(theory)
            .any(|(s, t)| (s.r - t.r).abs() > 1e-9 * s.r.abs().max(1.0))
    {
        return Err(PortfolioError::Config(format!(
            "simulation and theory grids differ ({} vs {} points)",
            sim.len(),
            theory.len()
        )));
    }
    let rows: Vec<ComparisonRow> = sim
        .iter()
        .zip(theory)
        .map(|(s, t)| ComparisonRow {
            r: s.r,
            eps_mean: s.eps_mean,
            eps_stderr: s.eps_err,
            eps_theory: t.eps,
            sharpe_mean: s.sharpe_mean,
            sharpe_stderr: s.sharpe_err,
            sharpe_theory: t.sharpe,
            z_eps: z_score(s.eps_mean, t.eps, s.eps_err),
            z_sharpe: z_score(s.sharpe_mean, t.sharpe, s.sharpe_err),
        })
        .collect();
    let max_abs_z = rows
        .iter()
        .flat_map(|r| [r.z_eps.abs(), r.z_sharpe.abs()])
        .fold(0.0, f64::max);
    let max_rel_err = rows
        .iter()
        .flat_map(|r| [r.rel_err_eps(), r.rel_err_sharpe()])
        .fold(0.0, f64::max);
    let pass = max_abs_z <= thresholds.max_abs_z && max_rel_err <= thresholds.max_rel_err;
    Ok(ComparisonReport {
        metadata,
        thresholds,
        rows,
        max_abs_z,
        max_rel_err,
        pass,
    })
}

/// Theory curve for `ε` and `S` at the summary's `(ρ, R0)` over its grid.
pub fn theory_curve(
    m: &AsymptoticMoments,
    alpha: f64,
    rho: f64,
    r0: f64,
    grid: &[f64],
) -> Result<Vec<TheoryPoint>> {
    grid.iter()
        .map(|&r| {
            let c = ConstraintSpec::new(rho, r, r0)?;
            Ok(TheoryPoint {
                r,
                eps: epsilon_quenched(m, alpha, &c)?,
                sharpe: sharpe_theory(m, alpha, &c)?,
            })
        })
        .collect()
}

/// Compare a summary with the theory evaluated at moments `m_true`.
pub fn compare_with_theory(
    summary: &ExperimentSummary,
    m_true: &AsymptoticMoments,
    alpha: f64,
    stat: StatKind,
    thresholds: Thresholds,
) -> Result<ComparisonReport> {
    let cfg = &summary.config;
    let theory = theory_curve(m_true, alpha, cfg.rho, cfg.r0, &cfg.r_grid)?;
    let sim: Vec<SimPoint> = summary
        .points
        .iter()
        .map(|p| SimPoint {
            r: p.r,
            eps_mean: p.eps.mean,
            eps_err: p.eps.spread(stat),
            sharpe_mean: p.sharpe.mean,
            sharpe_err: p.sharpe.spread(stat),
        })
        .collect();
    let kappa_mean =
        summary.points.iter().map(|p| p.kappa.mean).sum::<f64>() / summary.points.len() as f64;
    let metadata = ReportMetadata {
        config: Some(cfg.clone()),
        alpha: Some(alpha),
        trials_ok: Some(summary.trials.len()),
        trials_failed: Some(summary.failures.len()),
        stat,
        kappa_mean: Some(kappa_mean),
        kappa_theory: Some(alpha / (alpha - 1.0)),
    };
    compare_curves(&sim, &theory, thresholds, metadata)
}
