//! Self-check suites run by `mvrisk check`.
//!
//! Each suite draws its cases from a fixed seed, so a failure reproduces.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::annealed::annealed_min_risk;
use crate::error::{PortfolioError, Result};
use crate::market::{build_ensemble, sample_return_matrix, wishart, AssetEnsemble, DistKind, ParetoParams};
use crate::moments::AsymptoticMoments;
use crate::oracle::explicit_pipeline;
use crate::quenched::{lagrange_multipliers, minimal_risk, normalized, ConstraintSpec, QuenchedSystem, RhoStar};
use crate::replica::{
    asymptotic_gmoments, cumulant_phi, dual_max_return_asymptotic, epsilon_min, epsilon_quenched,
    free_energy_risk_limit, replica_order_parameters, sharpe_analysis, tobin_tangent,
};

const SUITE_SEED: u64 = 0x6d76_7269_736b;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Duality,
    Tobin,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Identities, Suite::Duality, Suite::Tobin, Suite::Oracle];
}

impl FromStr for Suite {
    type Err = PortfolioError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(Suite::Identities),
            "duality" => Ok(Suite::Duality),
            "tobin" => Ok(Suite::Tobin),
            "oracle" => Ok(Suite::Oracle),
            other => Err(PortfolioError::Config(format!(
                "unknown check suite {other:?}; expected identities, duality, tobin or oracle"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Identities => "identities",
            Suite::Duality => "duality",
            Suite::Tobin => "tobin",
            Suite::Oracle => "oracle",
        })
    }
}

/// Worst residual of one check over all its cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} cases={:<5} residual={:.3e} tol={:.0e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.residual,
            self.tolerance
        )
    }
}

/// Accumulates the worst residual; any error or NaN fails the check.
struct Tracker {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    worst: f64,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tracker {
            name,
            tolerance,
            cases: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, residual: Result<f64>) {
        self.cases += 1;
        let r = match residual {
            Ok(r) if r.is_nan() => f64::INFINITY,
            Ok(r) => r.abs(),
            Err(e) => {
                log::warn!("{}: case {} errored: {e}", self.name, self.cases);
                f64::INFINITY
            }
        };
        self.worst = self.worst.max(r);
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            cases: self.cases,
            residual: self.worst,
            tolerance: self.tolerance,
            pass: self.cases > 0 && self.worst <= self.tolerance,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Relative difference, measured against `max(|b|, 1)` so values near zero
/// are compared absolutely.
fn rel1(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// A random market description with `R1 > R0 > 0` and positive spread.
pub fn random_moments(rng: &mut impl Rng) -> (AsymptoticMoments, f64) {
    loop {
        let count = rng.random_range(5..40);
        let r: Vec<f64> = (0..count).map(|_| rng.random_range(0.5..2.5)).collect();
        let v: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..3.0)).collect();
        let Ok(m) = AsymptoticMoments::from_samples(&r, &v) else {
            continue;
        };
        if m.v1() > 1e-6 {
            let r0 = m.r1() * rng.random_range(0.0..0.9);
            return (m, r0);
        }
    }
}

fn random_market(seed: u64, n: usize, p: usize) -> Result<(AssetEnsemble, crate::market::WishartMatrix)> {
    let pareto = ParetoParams::REFERENCE;
    let ens = build_ensemble(&pareto, &pareto, n, 1.0, seed)?;
    let x = sample_return_matrix(&ens, p, DistKind::Gaussian, seed)?;
    let j = wishart(&x)?;
    Ok((ens, j))
}

pub fn run_suite(suite: Suite) -> Vec<CheckResult> {
    match suite {
        Suite::Identities => identities(),
        Suite::Duality => duality(),
        Suite::Tobin => tobin(),
        Suite::Oracle => oracle(),
    }
}

fn identities() -> Vec<CheckResult> {
    let mut rng = ChaCha20Rng::seed_from_u64(SUITE_SEED);
    let mut pyth = Tracker::new("sharpe_pythagoras", 1e-12);
    let mut kappa = Tracker::new("kappa_ratio", 1e-12);
    let mut op_eps = Tracker::new("order_parameter_risk", 1e-12);
    let mut op_mult = Tracker::new("order_parameter_multipliers", 1e-12);
    let mut phi = Tracker::new("cumulant_second_differences", 1e-6);
    for _ in 0..1000 {
        let (m, r0) = random_moments(&mut rng);
        let alpha = rng.random_range(1.1..10.0);
        let rho = rng.random_range(-0.5..1.5);
        let r = rng.random_range(0.5..3.0);
        let c = ConstraintSpec::new(rho, r, r0).expect("finite targets");

        pyth.record(sharpe_analysis(&m, alpha, rho, r0).map(|s| s.pythagoras_residual() / s.s2_star));
        kappa.record((|| {
            let ratio = annealed_min_risk(&m, &c, alpha)? / epsilon_quenched(&m, alpha, &c)?;
            Ok(rel(ratio, alpha / (alpha - 1.0)))
        })());
        op_eps.record((|| {
            let beta = rng.random_range(1.0..1e3);
            let op = replica_order_parameters(&m, alpha, &c, beta)?;
            let eps = epsilon_quenched(&m, alpha, &c)?;
            op_mult.record((|| {
                let (k, theta) = lagrange_multipliers(&asymptotic_gmoments(&m, alpha)?, &c)?;
                Ok(rel1(op.k / beta, k).max(rel1(op.theta / beta, theta)))
            })());
            Ok(rel(free_energy_risk_limit(&op, alpha), eps))
        })());
    }
    for _ in 0..100 {
        let (m, _) = random_moments(&mut rng);
        let alpha = rng.random_range(1.1..10.0);
        let k = rng.random_range(-2.0..2.0);
        let theta = rng.random_range(-2.0..2.0);
        phi.record(cumulant_hessian_residual(&m, alpha, k, theta));
    }
    vec![pyth.finish(), kappa.finish(), op_eps.finish(), op_mult.finish(), phi.finish()]
}

/// Central second differences of φ at `h = 1e-4` against the asymptotic g-moments.
pub fn cumulant_hessian_residual(m: &AsymptoticMoments, alpha: f64, k: f64, theta: f64) -> Result<f64> {
    let h = 1e-4;
    let f = |dk: f64, dt: f64| cumulant_phi(m, alpha, k + dk, theta + dt);
    let f00 = f(0.0, 0.0)?;
    let d_kk = (f(h, 0.0)? - 2.0 * f00 + f(-h, 0.0)?) / (h * h);
    let d_tt = (f(0.0, h)? - 2.0 * f00 + f(0.0, -h)?) / (h * h);
    let d_kt = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
    let g = asymptotic_gmoments(m, alpha)?;
    Ok(rel(d_kk, g.g0).max(rel(d_kt, g.g1)).max(rel(d_tt, g.g2)))
}

fn duality() -> Vec<CheckResult> {
    let mut rng = ChaCha20Rng::seed_from_u64(SUITE_SEED ^ 1);
    let mut asym = Tracker::new("round_trip_asymptotic", 1e-12);
    let mut finite = Tracker::new("round_trip_finite_n", 1e-8);
    let mut risk = Tracker::new("dual_risk_constraint", 1e-8);
    let mut budget = Tracker::new("dual_budget_constraint", 1e-8);
    for _ in 0..100 {
        let (m, r0) = random_moments(&mut rng);
        let alpha = rng.random_range(1.1..10.0);
        let rho = rng.random_range(-0.5..1.5);
        let r = m.r_rho(rho, r0) + rng.random_range(0.05..2.0);
        asym.record((|| {
            let c = ConstraintSpec::new(rho, r, r0)?;
            let eps = epsilon_quenched(&m, alpha, &c)?;
            Ok(rel(dual_max_return_asymptotic(&m, alpha, rho, r0, eps)?, r))
        })());
    }
    for case in 0..100u64 {
        let rho = rng.random_range(-0.5..1.5);
        let up = rng.random_range(0.05..2.0);
        let outcome = (|| -> Result<_> {
            let (ens, j) = random_market(SUITE_SEED ^ (case << 8), 20, 60)?;
            let sys = QuenchedSystem::new(&j, &ens)?;
            let g = sys.gmoments();
            let r = rho * ens.r0() + (1.0 - rho) * g.r1() + up;
            let c = ConstraintSpec::new(rho, r, ens.r0())?;
            let eps = minimal_risk(&g, &c, ens.n())?;
            let dual = sys.dual_max_return(rho, eps)?;
            let n = ens.n() as f64;
            let quad = 0.5 * j.quadratic_form(&dual.weights);
            let sum: f64 = dual.weights.sum();
            Ok((
                rel(dual.max_return, r),
                rel(quad, (n - 1.0) * eps),
                (sum / n - c.budget()).abs(),
            ))
        })();
        match outcome {
            Ok((a, b, c)) => {
                finite.record(Ok(a));
                risk.record(Ok(b));
                budget.record(Ok(c));
            }
            Err(e) => {
                let msg = e.to_string();
                finite.record(Err(e));
                risk.record(Err(PortfolioError::Degenerate(msg.clone())));
                budget.record(Err(PortfolioError::Degenerate(msg)));
            }
        }
    }
    vec![asym.finish(), finite.finish(), risk.finish(), budget.finish()]
}

fn tobin() -> Vec<CheckResult> {
    let mut direction = Tracker::new("market_direction_invariance", 1e-10);
    let mut consistency = Tracker::new("market_vs_optimal_portfolio", 1e-10);
    let mut cal = Tracker::new("cal_touches_min_risk", 1e-12);
    let grid = [1.2, 1.5, 1.8];
    let outcome = (|| -> Result<_> {
        let (ens, j) = random_market(SUITE_SEED ^ 2, 100, 300)?;
        let sys = QuenchedSystem::new(&j, &ens)?;
        let reference = normalized(&sys.market_portfolio(grid[0], RhoStar::FiniteN)?.weights);
        let mut dirs = Vec::new();
        let mut cons = Vec::new();
        for &r in &grid {
            let mp = sys.market_portfolio(r, RhoStar::FiniteN)?;
            dirs.push((normalized(&mp.weights) - &reference).amax());
            let c = ConstraintSpec::new(mp.rho_star, r, ens.r0())?;
            let sol = sys.solve(&c)?;
            let diff: DVector<f64> = &mp.weights - &sol.weights;
            cons.push(diff.amax() / sol.weights.amax());
        }
        Ok((dirs, cons))
    })();
    match outcome {
        Ok((dirs, cons)) => {
            dirs.into_iter().for_each(|d| direction.record(Ok(d)));
            cons.into_iter().for_each(|d| consistency.record(Ok(d)));
        }
        Err(e) => {
            let msg = e.to_string();
            direction.record(Err(e));
            consistency.record(Err(PortfolioError::Degenerate(msg)));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(SUITE_SEED ^ 3);
    for _ in 0..100 {
        let (m, r0) = random_moments(&mut rng);
        let alpha = rng.random_range(1.1..10.0);
        let r = r0 + rng.random_range(0.01..3.0);
        cal.record((|| {
            let t = tobin_tangent(&m, alpha, r0)?;
            let y = (2.0 * epsilon_min(&m, alpha, r, r0)?).sqrt();
            Ok(rel(t.cal(r), y))
        })());
    }
    vec![direction.finish(), consistency.finish(), cal.finish()]
}

fn oracle() -> Vec<CheckResult> {
    let mut rng = ChaCha20Rng::seed_from_u64(SUITE_SEED ^ 4);
    let mut g = Tracker::new("g_moments_vs_explicit_inverse", 1e-8);
    let mut mult = Tracker::new("multipliers_vs_cramer", 1e-8);
    let mut weights = Tracker::new("weights_vs_explicit_inverse", 1e-8);
    let mut eps = Tracker::new("risk_vs_quadratic_form", 1e-8);
    for case in 0..50u64 {
        let rho = rng.random_range(-0.5..1.5);
        let r = rng.random_range(0.8..2.0);
        let outcome = (|| -> Result<_> {
            let (ens, j) = random_market(SUITE_SEED ^ (case << 16) ^ 4, 10, 30)?;
            let sys = QuenchedSystem::new(&j, &ens)?;
            let c = ConstraintSpec::new(rho, r, ens.r0())?;
            let sol = sys.solve(&c)?;
            let o = explicit_pipeline(j.matrix(), &ens, &c)
                .ok_or_else(|| PortfolioError::Degenerate("explicit inverse failed".into()))?;
            let gm = sys.gmoments();
            Ok([
                rel(gm.g0, o.g0).max(rel1(gm.g1, o.g1)).max(rel(gm.g2, o.g2)),
                rel1(sol.k, o.k).max(rel1(sol.theta, o.theta)),
                (&sol.weights - &o.weights).amax() / o.weights.amax().max(1.0),
                rel(sol.eps, o.eps),
            ])
        })();
        let trackers = [&mut g, &mut mult, &mut weights, &mut eps];
        match outcome {
            Ok(res) => trackers.into_iter().zip(res).for_each(|(t, r)| t.record(Ok(r))),
            Err(e) => {
                let msg = e.to_string();
                trackers
                    .into_iter()
                    .for_each(|t| t.record(Err(PortfolioError::Degenerate(msg.clone()))));
            }
        }
    }
    vec![g.finish(), mult.finish(), weights.finish(), eps.finish()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn tracker_fails_on_error_and_nan() {
        let mut t = Tracker::new("x", 1.0);
        t.record(Ok(f64::NAN));
        assert!(!t.finish().pass);
        let mut t = Tracker::new("x", 1.0);
        t.record(Err(PortfolioError::Domain("boom".into())));
        assert!(!t.finish().pass);
        assert!(!Tracker::new("x", 1.0).finish().pass);
    }

    #[test]
    fn identities_suite_passes() {
        for c in run_suite(Suite::Identities) {
            assert!(c.pass, "{c}");
        }
    }
}
