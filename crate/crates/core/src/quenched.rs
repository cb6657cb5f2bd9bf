//! Finite-market risk minimization on one realized Wishart matrix.
//!
//! Every `J⁻¹` quadratic form goes through the Cholesky factor held by
//! [`WishartMatrix`]: two solves `J a = e`, `J b = r` give all of `g(0)`,
//! `g(1)`, `g(2)` and every optimal portfolio, which is a linear
//! combination of `a` and `b`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PortfolioError, Result};
use crate::market::{AssetEnsemble, WishartMatrix};
use crate::moments::AsymptoticMoments;
use crate::replica;

/// Budget and expected-return targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    /// Fraction of the budget held in the risk-free asset.
    pub rho: f64,
    /// Expected return coefficient `R`.
    pub r: f64,
    /// Risk-free rate `R0`.
    pub r0: f64,
}

impl ConstraintSpec {
    pub fn new(rho: f64, r: f64, r0: f64) -> Result<Self> {
        if !(rho.is_finite() && r.is_finite() && r0.is_finite()) {
            return Err(PortfolioError::InvalidParameter(format!(
                "constraint values must be finite: rho={rho}, R={r}, R0={r0}"
            )));
        }
        Ok(ConstraintSpec { rho, r, r0 })
    }

    /// Right-hand side of the budget constraint per asset, `1 − ρ`.
    pub fn budget(&self) -> f64 {
        1.0 - self.rho
    }

    /// Right-hand side of the return constraint per asset, `R − ρ R0`.
    pub fn excess_return(&self) -> f64 {
        self.r - self.rho * self.r0
    }

    pub fn with_rho(self, rho: f64) -> Self {
        ConstraintSpec { rho, ..self }
    }
}

/// `g(0) = eᵀJ⁻¹e/N`, `g(1) = rᵀJ⁻¹e/N`, `g(2) = rᵀJ⁻¹r/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GMoments {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

impl GMoments {
    pub fn new(g0: f64, g1: f64, g2: f64) -> Result<Self> {
        if !(g0 > 0.0 && g0.is_finite() && g1.is_finite() && g2.is_finite()) {
            return Err(PortfolioError::InvalidParameter(format!(
                "g-moments need finite values with g0 > 0, got ({g0}, {g1}, {g2})"
            )));
        }
        Ok(GMoments { g0, g1, g2 })
    }

    pub fn r1(&self) -> f64 {
        self.g1 / self.g0
    }

    pub fn v1(&self) -> f64 {
        self.g2 / self.g0 - self.r1().powi(2)
    }

    fn check_nondegenerate(&self) -> Result<f64> {
        let v1 = self.v1();
        let tol = 1e-12 * (self.g2 / self.g0).max(1.0);
        if v1 <= tol {
            return Err(PortfolioError::Degenerate(format!(
                "V1 = {v1:e} <= {tol:e}: budget and return constraints are collinear"
            )));
        }
        Ok(v1)
    }
}

/// Closed-form multipliers `(k*, θ*)` solving the 2×2 stationarity system.
pub fn lagrange_multipliers(g: &GMoments, c: &ConstraintSpec) -> Result<(f64, f64)> {
    let v1 = g.check_nondegenerate()?;
    let scale = 1.0 / (v1 * g.g0);
    let k = scale * (c.budget() * g.g2 / g.g0 - c.excess_return() * g.g1 / g.g0);
    let theta = scale * (c.excess_return() - c.budget() * g.g1 / g.g0);
    Ok((k, theta))
}

/// Minimal risk per risky asset, `N/(N−1) · (k*(1−ρ) + θ*(R−ρR0))/2`.
pub fn minimal_risk(g: &GMoments, c: &ConstraintSpec, n: usize) -> Result<f64> {
    let (k, theta) = lagrange_multipliers(g, c)?;
    Ok(risk_from_multipliers(k, theta, c, n))
}

fn risk_from_multipliers(k: f64, theta: f64, c: &ConstraintSpec, n: usize) -> f64 {
    let n = n as f64;
    n / (n - 1.0) * (k * c.budget() + theta * c.excess_return()) / 2.0
}

/// `S = (R − ρR0)/√(2ε)`.
pub fn sharpe_ratio(eps: f64, c: &ConstraintSpec) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(PortfolioError::UndefinedSharpe { eps });
    }
    Ok(c.excess_return() / (2.0 * eps).sqrt())
}

/// Optimal portfolio for one constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSolution {
    pub weights: DVector<f64>,
    pub k: f64,
    pub theta: f64,
    /// Minimal risk per risky asset.
    pub eps: f64,
    /// `None` when the optimal portfolio carries no risk.
    pub sharpe: Option<f64>,
    pub rho: f64,
}

/// Which `ρ*` to plug into the market portfolio.
#[derive(Debug, Clone, Copy)]
pub enum RhoStar {
    /// The `ρ*` formula evaluated with the g-based `R1`, `V1` of this market;
    /// the resulting direction is exactly independent of `R`.
    FiniteN,
    /// The large-market `ρ*` from ensemble moments.
    Asymptotic(AsymptoticMoments),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPortfolio {
    pub rho_star: f64,
    pub weights: DVector<f64>,
}

/// Solution of the return-maximization problem under a risk budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Multiplier of the risk constraint; infinite at the minimum-variance point.
    pub tau: f64,
    /// Multiplier of the budget constraint; infinite at the minimum-variance point.
    pub k: f64,
    pub weights: DVector<f64>,
    pub max_return: f64,
}

/// A factorized market: `J`, the ensemble, and the solves `J⁻¹e`, `J⁻¹r`.
#[derive(Debug, Clone)]
pub struct QuenchedSystem<'a> {
    wishart: &'a WishartMatrix,
    ensemble: &'a AssetEnsemble,
    inv_e: DVector<f64>,
    inv_r: DVector<f64>,
    g: GMoments,
}

impl<'a> QuenchedSystem<'a> {
    pub fn new(wishart: &'a WishartMatrix, ensemble: &'a AssetEnsemble) -> Result<Self> {
        let dim = ensemble.risky_count();
        if wishart.dim() != dim {
            return Err(PortfolioError::InvalidParameter(format!(
                "Wishart matrix is {0}x{0} but the ensemble has {dim} risky assets",
                wishart.dim()
            )));
        }
        let e = DVector::from_element(dim, 1.0);
        let r = ensemble.returns_vector();
        let inv_e = wishart.solve(&e);
        let inv_r = wishart.solve(&r);
        let n = ensemble.n() as f64;
        let g = GMoments::new(e.dot(&inv_e) / n, r.dot(&inv_e) / n, r.dot(&inv_r) / n).map_err(
            |_| PortfolioError::Singular {
                assets: dim,
                periods: wishart.periods(),
            },
        )?;
        Ok(QuenchedSystem {
            wishart,
            ensemble,
            inv_e,
            inv_r,
            g,
        })
    }

    pub fn gmoments(&self) -> GMoments {
        self.g
    }

    pub fn ensemble(&self) -> &AssetEnsemble {
        self.ensemble
    }

    pub fn wishart(&self) -> &WishartMatrix {
        self.wishart
    }

    /// `J⁻¹e` and `J⁻¹r`.
    pub fn solves(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.inv_e, &self.inv_r)
    }

    /// `w* = k J⁻¹e + θ J⁻¹r`.
    pub fn optimal_portfolio(&self, k: f64, theta: f64) -> DVector<f64> {
        &self.inv_e * k + &self.inv_r * theta
    }

    pub fn solve(&self, c: &ConstraintSpec) -> Result<PortfolioSolution> {
        let (k, theta) = lagrange_multipliers(&self.g, c)?;
        let eps = risk_from_multipliers(k, theta, c, self.ensemble.n());
        Ok(PortfolioSolution {
            weights: self.optimal_portfolio(k, theta),
            k,
            theta,
            eps,
            sharpe: sharpe_ratio(eps, c).ok(),
            rho: c.rho,
        })
    }

    /// `½ wᵀJw / (N − 1)`, evaluated directly.
    pub fn risk_of(&self, w: &DVector<f64>) -> f64 {
        0.5 * self.wishart.quadratic_form(w) / self.ensemble.risky_count() as f64
    }

    /// `(N−1)/N · rᵀJ⁻¹r / N`, the ceiling on `S²` for this market.
    pub fn sharpe_bound(&self) -> f64 {
        let n = self.ensemble.n() as f64;
        (n - 1.0) / n * self.g.g2
    }

    /// `ρ*` computed from the g-based `R1` and `V1`.
    pub fn finite_rho_star(&self, r: f64) -> Result<f64> {
        let (r1, v1) = (self.g.r1(), self.g.v1());
        let r0 = self.ensemble.r0();
        let den = v1 + (r1 - r0).powi(2);
        if !(den > 0.0) {
            return Err(PortfolioError::Degenerate(
                "V1 + (R1 - R0)^2 vanishes".into(),
            ));
        }
        Ok((v1 + (r - r1) * (r0 - r1)) / den)
    }

    /// Optimal risky weights at `ρ = ρ*(R)`: a multiple of `J⁻¹(r − R0 e)`.
    pub fn market_portfolio(&self, r: f64, rho: RhoStar) -> Result<MarketPortfolio> {
        let r0 = self.ensemble.r0();
        let direction = &self.inv_r - &self.inv_e * r0;
        let reference = self.inv_r.norm() + r0.abs() * self.inv_e.norm();
        if direction.norm() <= 1e-12 * reference {
            return Err(PortfolioError::Degenerate(
                "r - R0 e vanishes: the market portfolio has no direction".into(),
            ));
        }
        match rho {
            RhoStar::FiniteN => {
                self.g.check_nondegenerate()?;
                let rho_star = self.finite_rho_star(r)?;
                let (r1, v1) = (self.g.r1(), self.g.v1());
                let scale = (r - r0) / (self.g.g0 * (v1 + (r1 - r0).powi(2)));
                Ok(MarketPortfolio {
                    rho_star,
                    weights: direction * scale,
                })
            }
            RhoStar::Asymptotic(m) => {
                let (rho_star, _) = replica::rho_star(&m, r, r0)?;
                let c = ConstraintSpec::new(rho_star, r, r0)?;
                let (k, theta) = lagrange_multipliers(&self.g, &c)?;
                Ok(MarketPortfolio {
                    rho_star,
                    weights: self.optimal_portfolio(k, theta),
                })
            }
        }
    }

    /// Maximize expected return subject to the budget and the risk budget
    /// `½ wᵀJw = (N − 1) · eps_target`.
    ///
    /// `eps_target` is per risky asset, the same normalization that
    /// [`minimal_risk`] reports, so the two problems round-trip exactly.
    pub fn dual_max_return(&self, rho: f64, eps_target: f64) -> Result<DualSolution> {
        let v1 = self.g.check_nondegenerate()?;
        let n = self.ensemble.n() as f64;
        let eps_n = eps_target * (n - 1.0) / n;
        let budget = 1.0 - rho;
        let g0 = self.g.g0;
        let r1 = self.g.r1();
        let radicand = risk_budget_radicand(2.0 * eps_n * g0, budget * budget)?;
        // s = 1/√(V1/radicand), so τ = g0/s and k = (1−ρ)/s − R1
        let s = (radicand / v1).sqrt();
        let weights = &self.inv_e * (budget / g0) + (&self.inv_r - &self.inv_e * r1) * (s / g0);
        Ok(DualSolution {
            tau: g0 / s,
            k: budget / s - r1,
            weights,
            max_return: rho * self.ensemble.r0() + budget * r1 + (v1 * radicand).sqrt(),
        })
    }
}

/// `a − b`, the slack of a risk budget above the minimum-variance point.
/// A shortfall within rounding of `b` counts as zero.
pub(crate) fn risk_budget_radicand(a: f64, b: f64) -> Result<f64> {
    let radicand = a - b;
    if !radicand.is_finite() || radicand < -8.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return Err(PortfolioError::InfeasibleRiskBudget { radicand });
    }
    Ok(radicand.max(0.0))
}

/// g-moments of `J` for this ensemble via two factorized solves.
pub fn wishart_gmoments(wishart: &WishartMatrix, ensemble: &AssetEnsemble) -> Result<GMoments> {
    Ok(QuenchedSystem::new(wishart, ensemble)?.gmoments())
}

/// `w / ‖w‖`.
pub fn normalized(w: &DVector<f64>) -> DVector<f64> {
    w / w.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn scaled_identity(n: usize, r: Vec<f64>) -> (WishartMatrix, AssetEnsemble) {
        let j = DMatrix::<f64>::identity(n - 1, n - 1) / n as f64;
        let v = vec![1.0; n - 1];
        (
            WishartMatrix::from_matrix(j, n).unwrap(),
            AssetEnsemble::new(n, 1.0, r, v).unwrap(),
        )
    }

    #[test]
    fn identity_scaled_j_gives_n_minus_one() {
        let (j, e) = scaled_identity(6, vec![1.0; 5]);
        let g = wishart_gmoments(&j, &e).unwrap();
        for x in [g.g0, g.g1, g.g2] {
            assert!((x - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_targets_give_zero_multipliers_and_risk() {
        let g = GMoments::new(2.0, 2.5, 3.5).unwrap();
        let c = ConstraintSpec::new(1.0, 1.1, 1.1).unwrap();
        let (k, t) = lagrange_multipliers(&g, &c).unwrap();
        assert_eq!((k, t), (0.0, 0.0));
        assert_eq!(minimal_risk(&g, &c, 10).unwrap(), 0.0);
    }

    #[test]
    fn return_on_min_variance_line_gives_zero_theta() {
        let g = GMoments::new(2.0, 2.5, 3.5).unwrap();
        let rho = 0.3;
        let r0 = 1.0;
        let r = rho * r0 + (1.0 - rho) * g.g1 / g.g0;
        let (_, t) = lagrange_multipliers(&g, &ConstraintSpec::new(rho, r, r0).unwrap()).unwrap();
        assert!(t.abs() < 1e-15);
    }

    #[test]
    fn collinear_constraints_are_rejected() {
        // g2/g0 == (g1/g0)^2
        let g = GMoments::new(2.0, 3.0, 4.5).unwrap();
        let c = ConstraintSpec::new(0.1, 1.2, 1.0).unwrap();
        assert!(matches!(
            lagrange_multipliers(&g, &c),
            Err(PortfolioError::Degenerate(_))
        ));
    }

    #[test]
    fn sharpe_unit_cases() {
        let c = ConstraintSpec::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(sharpe_ratio(0.5, &c).unwrap(), 1.0);
        let c0 = ConstraintSpec::new(0.5, 1.0, 2.0).unwrap();
        assert_eq!(sharpe_ratio(0.3, &c0).unwrap(), 0.0);
        assert!(matches!(
            sharpe_ratio(0.0, &c),
            Err(PortfolioError::UndefinedSharpe { .. })
        ));
    }

    #[test]
    fn zero_multipliers_give_zero_portfolio() {
        let (j, e) = scaled_identity(5, vec![1.0, 1.5, 2.0, 1.2]);
        let sys = QuenchedSystem::new(&j, &e).unwrap();
        assert!(sys.optimal_portfolio(0.0, 0.0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_excess_return_has_no_market_direction() {
        let (j, e) = scaled_identity(5, vec![1.0; 4]);
        let sys = QuenchedSystem::new(&j, &e).unwrap();
        assert!(matches!(
            sys.market_portfolio(1.5, RhoStar::FiniteN),
            Err(PortfolioError::Degenerate(_))
        ));
    }

    #[test]
    fn dual_at_min_variance_point_returns_r_min() {
        let (j, e) = scaled_identity(5, vec![1.0, 1.5, 2.0, 1.2]);
        let sys = QuenchedSystem::new(&j, &e).unwrap();
        let g = sys.gmoments();
        let rho = 0.2;
        let n = 5.0;
        // radicand = 0 when eps_N = (1-ρ)²/(2 g0)
        let eps = (1.0 - rho) * (1.0 - rho) / (2.0 * g.g0) * n / (n - 1.0);
        let d = sys.dual_max_return(rho, eps).unwrap();
        let r_min = rho * 1.0 + (1.0 - rho) * g.r1();
        assert!((d.max_return - r_min).abs() < 1e-12);
        assert!(d.tau.is_infinite());
        assert!(sys.dual_max_return(rho, 0.5 * eps).is_err());
    }

    proptest! {
        #[test]
        fn multipliers_solve_two_by_two_system(
            g0 in 0.1f64..5.0, r1 in 0.5f64..2.0, v1 in 0.01f64..1.0,
            rho in -1.0f64..2.0, r in 0.0f64..3.0, r0 in 0.5f64..1.5,
        ) {
            let g = GMoments::new(g0, g0 * r1, g0 * (v1 + r1 * r1)).unwrap();
            let c = ConstraintSpec::new(rho, r, r0).unwrap();
            let (k, t) = lagrange_multipliers(&g, &c).unwrap();
            // Cramer's rule on [[g0, g1], [g1, g2]] (k, θ) = (1−ρ, R−ρR0)
            let det = g.g0 * g.g2 - g.g1 * g.g1;
            let k_ref = (c.budget() * g.g2 - g.g1 * c.excess_return()) / det;
            let t_ref = (g.g0 * c.excess_return() - g.g1 * c.budget()) / det;
            let scale = 1.0 + k_ref.abs() + t_ref.abs();
            prop_assert!((k - k_ref).abs() <= 1e-12 * scale);
            prop_assert!((t - t_ref).abs() <= 1e-12 * scale);
            prop_assert!((g.g0 * k + g.g1 * t - c.budget()).abs() <= 1e-12 * scale * (g.g0 + g.g1));
        }
    }
}
