//! Closed-form large-market results.
//!
//! Everything here is a function of [`AsymptoticMoments`] and the period
//! ratio `α = p/(N − 1)`; nothing touches a sampled matrix. Feed it the
//! exact moments of the sampling law for theory curves, or the empirical
//! moments of one ensemble for self-averaging checks.

use serde::{Deserialize, Serialize};

use crate::error::{PortfolioError, Result};
use crate::moments::AsymptoticMoments;
use crate::quenched::{risk_budget_radicand, ConstraintSpec, GMoments};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(PortfolioError::Domain(format!(
            "period ratio alpha must exceed 1, got {alpha}"
        )))
    }
}

fn positive_v1(m: &AsymptoticMoments) -> Result<f64> {
    let v1 = m.v1();
    if v1 > 0.0 {
        Ok(v1)
    } else {
        Err(PortfolioError::Degenerate(format!(
            "V1 = {v1} must be positive"
        )))
    }
}

fn tangency_denominator(m: &AsymptoticMoments, r0: f64) -> Result<f64> {
    let den = m.v1() + (m.r1() - r0).powi(2);
    if den > 0.0 {
        Ok(den)
    } else {
        Err(PortfolioError::Degenerate(
            "V1 + (R1 - R0)^2 vanishes: every risky asset earns R0 with no spread".into(),
        ))
    }
}

/// Cumulant generating function per asset, up to the constant dropped in
/// its definition. Only its `(k, θ)` derivatives carry meaning.
pub fn cumulant_phi(m: &AsymptoticMoments, alpha: f64, k: f64, theta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let quad = k * k * m.m1 + 2.0 * k * theta * m.m1r + theta * theta * m.m1r2;
    Ok(-0.5 * alpha * (alpha / (alpha - 1.0)).ln()
        - 0.5 * (alpha - 1.0).ln()
        - 0.5 * m.mlogv
        + quad / (2.0 * (alpha - 1.0)))
}

/// `g(k) = ⟨v⁻¹ r^k⟩/(α − 1)`.
pub fn asymptotic_gmoments(m: &AsymptoticMoments, alpha: f64) -> Result<GMoments> {
    check_alpha(alpha)?;
    let d = alpha - 1.0;
    GMoments::new(m.m1 / d, m.m1r / d, m.m1r2 / d)
}

/// Minimal risk per asset at `(ρ, R)`.
pub fn epsilon_quenched(m: &AsymptoticMoments, alpha: f64, c: &ConstraintSpec) -> Result<f64> {
    check_alpha(alpha)?;
    let v1 = positive_v1(m)?;
    let budget = c.budget();
    let dev = c.r - m.r_rho(c.rho, c.r0);
    Ok((alpha - 1.0) / (2.0 * m.m1) * (budget * budget + dev * dev / v1))
}

/// Where the risk-free position sits relative to the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `ρ* ≤ 0`: borrow at `R0` to buy risky assets.
    LeverageRisky,
    /// `0 < ρ* < 1`.
    Mixed,
    /// `ρ* ≥ 1`: short risky assets to hold more of the risk-free one.
    LeverageRiskFree,
}

impl Regime {
    pub fn classify(rho_star: f64) -> Regime {
        if rho_star <= 0.0 {
            Regime::LeverageRisky
        } else if rho_star < 1.0 {
            Regime::Mixed
        } else {
            Regime::LeverageRiskFree
        }
    }
}

/// `ρ*` minimizing the minimal risk at fixed `R`.
pub fn rho_star(m: &AsymptoticMoments, r: f64, r0: f64) -> Result<(f64, Regime)> {
    let den = tangency_denominator(m, r0)?;
    let r1 = m.r1();
    if r1 <= r0 {
        log::warn!("R1 = {r1} <= R0 = {r0}: risky assets do not beat the risk-free rate on average");
    }
    let rho = (m.v1() + (r - r1) * (r0 - r1)) / den;
    Ok((rho, Regime::classify(rho)))
}

/// Minimal risk at the optimal risk-free fraction `ρ*(R)`.
pub fn epsilon_min(m: &AsymptoticMoments, alpha: f64, r: f64, r0: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let den = tangency_denominator(m, r0)?;
    Ok((alpha - 1.0) / (2.0 * m.m1) * (r - r0).powi(2) / den)
}

/// Minimal risk when no risk-free asset is available.
pub fn epsilon_no_riskfree(m: &AsymptoticMoments, alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v1 = positive_v1(m)?;
    Ok((alpha - 1.0) / (2.0 * m.m1) * (1.0 + (r - m.r1()).powi(2) / v1))
}

/// Sharpe ratio `(R − ρR0)/√(2ε)` along the large-market frontier.
pub fn sharpe_theory(m: &AsymptoticMoments, alpha: f64, c: &ConstraintSpec) -> Result<f64> {
    let eps = epsilon_quenched(m, alpha, c)?;
    if !(eps > 0.0) {
        return Err(PortfolioError::UndefinedSharpe { eps });
    }
    Ok(c.excess_return() / (2.0 * eps).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeAnalysis {
    /// Return coefficient maximizing `S`; `None` when `R1 = 0`.
    pub r_star: Option<f64>,
    pub s2_star: f64,
    /// Return coefficient minimizing `ε`.
    pub r_min: f64,
    pub s2_min: f64,
    /// `S²` in the limit `R → ∞`, where `ε` is unbounded.
    pub s2_max: f64,
}

impl SharpeAnalysis {
    /// `S²(R*) − S²(R_min) − S²(R_max)`, zero up to rounding.
    pub fn pythagoras_residual(&self) -> f64 {
        self.s2_star - self.s2_min - self.s2_max
    }
}

pub fn sharpe_analysis(
    m: &AsymptoticMoments,
    alpha: f64,
    rho: f64,
    r0: f64,
) -> Result<SharpeAnalysis> {
    check_alpha(alpha)?;
    let v1 = positive_v1(m)?;
    let r1 = m.r1();
    let unit = m.m1 / (alpha - 1.0);
    let r_star = (r1 != 0.0).then(|| rho * r0 + (1.0 - rho) * (r1 + v1 / r1));
    Ok(SharpeAnalysis {
        r_star,
        s2_star: (v1 + r1 * r1) * unit,
        r_min: m.r_rho(rho, r0),
        s2_min: r1 * r1 * unit,
        s2_max: v1 * unit,
    })
}

/// Tangent from `(R0, 0)` to the risky-only frontier `y(R) = √(2 ε0(R))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TobinTangent {
    pub r_m: f64,
    pub y_rm: f64,
    pub cal_slope: f64,
    pub r0: f64,
}

impl TobinTangent {
    /// Capital allocation line `y_A(R)`.
    pub fn cal(&self, r: f64) -> f64 {
        self.cal_slope * (r - self.r0)
    }
}

pub fn tobin_tangent(m: &AsymptoticMoments, alpha: f64, r0: f64) -> Result<TobinTangent> {
    check_alpha(alpha)?;
    let v1 = positive_v1(m)?;
    let r1 = m.r1();
    if r1 <= r0 {
        return Err(PortfolioError::NoTangency { r1, r0 });
    }
    let scale = (alpha - 1.0) / m.m1;
    let gap = r1 - r0;
    Ok(TobinTangent {
        r_m: r1 + v1 / gap,
        y_rm: (scale * (1.0 + v1 / (gap * gap))).sqrt(),
        cal_slope: scale.sqrt() / (v1 + gap * gap).sqrt(),
        r0,
    })
}

/// Replica-symmetric saddle point at inverse temperature `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    pub beta: f64,
    pub k: f64,
    pub theta: f64,
    pub chi_w: f64,
    pub q_w: f64,
    pub chi_s: f64,
    pub q_s: f64,
    pub tchi_w: f64,
    pub tq_w: f64,
    pub tchi_s: f64,
    pub tq_s: f64,
}

pub fn replica_order_parameters(
    m: &AsymptoticMoments,
    alpha: f64,
    c: &ConstraintSpec,
    beta: f64,
) -> Result<OrderParameters> {
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PortfolioError::Domain(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let v1 = positive_v1(m)?;
    let (r1, r2, v2) = (m.r1(), m.r2(), m.v2());
    let spread2 = v2 + (r2 - r1).powi(2);
    if !(spread2 > 0.0) {
        return Err(PortfolioError::Degenerate(
            "V2 + (R2 - R1)^2 vanishes".into(),
        ));
    }
    let a1 = alpha - 1.0;
    let budget = c.budget();
    let excess = c.excess_return();
    let dev = c.r - m.r_rho(c.rho, c.r0);
    let bracket = budget * budget + dev * dev / v1;
    let mult = beta * a1 / (m.m1 * v1);
    let mass_ratio = m.m2 / (m.m1 * m.m1);
    let shifted = dev + v1 * budget * (r2 - r1) / spread2;
    let q_w = bracket / a1
        + mass_ratio * budget * budget * v2 / spread2
        + mass_ratio * spread2 / (v1 * v1) * shifted * shifted;
    Ok(OrderParameters {
        beta,
        k: mult * (budget * (v1 + r1 * r1) - excess * r1),
        theta: mult * (excess - budget * r1),
        chi_w: m.m1 / (beta * a1),
        q_w,
        chi_s: 1.0 / (beta * a1),
        q_s: alpha / (a1 * m.m1) * bracket,
        tchi_w: 0.0,
        tq_w: 0.0,
        tchi_s: beta * a1,
        tq_s: beta * beta * a1 / m.m1 * bracket,
    })
}

/// `−∂φ/∂β` at the saddle point's own `β`.
pub fn free_energy_risk(op: &OrderParameters, alpha: f64) -> f64 {
    let d = 1.0 + op.beta * op.chi_s;
    alpha * op.chi_s / (2.0 * d) + alpha * op.q_s / (2.0 * d * d)
}

/// `ε = −lim_{β→∞} ∂φ/∂β`, using `1 + βχ_s = α/(α − 1)` at the saddle point.
pub fn free_energy_risk_limit(op: &OrderParameters, alpha: f64) -> f64 {
    let d = alpha / (alpha - 1.0);
    alpha * op.q_s / (2.0 * d * d)
}

/// Maximal expected return under the risk budget `eps` (upper branch).
pub fn dual_max_return_asymptotic(
    m: &AsymptoticMoments,
    alpha: f64,
    rho: f64,
    r0: f64,
    eps: f64,
) -> Result<f64> {
    let g = asymptotic_gmoments(m, alpha)?;
    let v1 = positive_v1(m)?;
    let radicand = risk_budget_radicand(2.0 * eps * g.g0, (1.0 - rho).powi(2))?;
    Ok(m.r_rho(rho, r0) + (v1 * radicand).sqrt())
}

/// Every closed-form value at one `(ρ, R, R0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPrediction {
    pub eps: f64,
    pub sharpe_ratio: Option<f64>,
    pub rho_star: f64,
    pub regime: Regime,
    pub eps_min: f64,
    pub eps0: f64,
    pub kappa: f64,
    pub sharpe: SharpeAnalysis,
    /// Absent when `R1 ≤ R0`.
    pub tangent: Option<TobinTangent>,
}

pub fn predict(m: &AsymptoticMoments, alpha: f64, c: &ConstraintSpec) -> Result<ReplicaPrediction> {
    let eps = epsilon_quenched(m, alpha, c)?;
    let (rho_star, regime) = rho_star(m, c.r, c.r0)?;
    Ok(ReplicaPrediction {
        eps,
        sharpe_ratio: sharpe_theory(m, alpha, c).ok(),
        rho_star,
        regime,
        eps_min: epsilon_min(m, alpha, c.r, c.r0)?,
        eps0: epsilon_no_riskfree(m, alpha, c.r)?,
        kappa: alpha / (alpha - 1.0),
        sharpe: sharpe_analysis(m, alpha, c.rho, c.r0)?,
        tangent: tobin_tangent(m, alpha, c.r0).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_asset() -> AsymptoticMoments {
        AsymptoticMoments::from_samples(&[1.0, 2.0], &[1.0, 2.0]).unwrap()
    }

    fn c(rho: f64, r: f64, r0: f64) -> ConstraintSpec {
        ConstraintSpec::new(rho, r, r0).unwrap()
    }

    /// Random moment set with R1 > R0 > 0, built from an explicit ensemble.
    fn moments_strategy() -> impl Strategy<Value = (AsymptoticMoments, f64)> {
        (
            prop::collection::vec((0.2f64..3.0, 0.1f64..10.0), 3..30),
            0.05f64..0.95,
        )
            .prop_filter_map("needs spread", |(pairs, frac)| {
                let (r, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                let m = AsymptoticMoments::from_samples(&r, &v).ok()?;
                (m.v1() > 1e-6).then(|| (m, frac * m.r1()))
            })
    }

    #[test]
    fn phi_at_origin_is_the_constant_part() {
        let m = two_asset();
        let a: f64 = 2.5;
        let expected = -0.5 * a * (a / (a - 1.0)).ln() - 0.5 * (a - 1.0).ln() - 0.5 * m.mlogv;
        assert_eq!(cumulant_phi(&m, a, 0.0, 0.0).unwrap(), expected);
        assert!(cumulant_phi(&m, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn phi_is_even_in_multipliers() {
        let m = two_asset();
        let a = cumulant_phi(&m, 3.0, 0.7, -1.3).unwrap();
        let b = cumulant_phi(&m, 3.0, -0.7, 1.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn asymptotic_g_scales_with_alpha() {
        let m = two_asset();
        let g = asymptotic_gmoments(&m, 2.0).unwrap();
        assert_eq!((g.g0, g.g1, g.g2), (m.m1, m.m1r, m.m1r2));
        let far = asymptotic_gmoments(&m, 1e12).unwrap();
        assert!(far.g0 < 1e-11 && far.g2 < 1e-11);
        assert!(asymptotic_gmoments(&m, 0.5).is_err());
    }

    #[test]
    fn epsilon_hand_values() {
        let m = two_asset();
        assert_eq!(epsilon_quenched(&m, 2.0, &c(1.0, 1.0, 1.0)).unwrap(), 0.0);
        let e = epsilon_quenched(&m, 2.0, &c(0.0, 4.0 / 3.0, 1.0)).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
        let e0 = epsilon_no_riskfree(&m, 2.0, 4.0 / 3.0).unwrap();
        assert!((e0 - 2.0 / 3.0).abs() < 1e-15);
        let flat = AsymptoticMoments::from_samples(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(matches!(
            epsilon_quenched(&flat, 2.0, &c(0.0, 1.0, 1.0)),
            Err(PortfolioError::Degenerate(_))
        ));
    }

    #[test]
    fn rho_star_special_points() {
        let m = two_asset();
        let r0 = 1.0;
        let (rho, regime) = rho_star(&m, r0, r0).unwrap();
        assert!((rho - 1.0).abs() < 1e-15);
        assert_eq!(regime, Regime::LeverageRiskFree);
        let r_zero = m.r1() + m.v1() / (m.r1() - r0);
        let (rho, _) = rho_star(&m, r_zero, r0).unwrap();
        assert!(rho.abs() < 1e-14);
        assert_eq!(Regime::classify(0.0), Regime::LeverageRisky);
        assert_eq!(Regime::classify(1e-3), Regime::Mixed);
        assert_eq!(Regime::classify(1.0), Regime::LeverageRiskFree);
        // R1 = R0 pins ρ* at one for every R
        for r in [0.5, 1.0, 3.0] {
            let (rho, _) = rho_star(&m, r, m.r1()).unwrap();
            assert!((rho - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn regime_boundaries() {
        let m = two_asset();
        let r0 = 1.0;
        let upper = m.r1() + m.v1() / (m.r1() - r0);
        assert_eq!(rho_star(&m, 0.9, r0).unwrap().1, Regime::LeverageRiskFree);
        assert_eq!(rho_star(&m, 1.2, r0).unwrap().1, Regime::Mixed);
        assert_eq!(rho_star(&m, upper + 0.1, r0).unwrap().1, Regime::LeverageRisky);
    }

    #[test]
    fn epsilon_min_is_epsilon_at_rho_star() {
        let m = two_asset();
        let a = 2.0;
        assert_eq!(epsilon_min(&m, a, 1.0, 1.0).unwrap(), 0.0);
        for r in [0.7, 1.1, 1.5, 2.4] {
            let (rho, _) = rho_star(&m, r, 1.0).unwrap();
            let at_star = epsilon_quenched(&m, a, &c(rho, r, 1.0)).unwrap();
            let min = epsilon_min(&m, a, r, 1.0).unwrap();
            assert!((at_star - min).abs() < 1e-12 * (1.0 + min));
        }
    }

    #[test]
    fn r1_zero_leaves_r_star_undefined() {
        let m = AsymptoticMoments::from_samples(&[-1.0, 1.0], &[1.0, 1.0]).unwrap();
        let s = sharpe_analysis(&m, 2.0, 0.1, 0.5).unwrap();
        assert!(s.r_star.is_none());
        assert!(s.s2_star > 0.0);
    }

    #[test]
    fn no_tangency_below_risk_free_rate() {
        let m = two_asset();
        assert!(matches!(
            tobin_tangent(&m, 2.0, m.r1() + 0.1),
            Err(PortfolioError::NoTangency { .. })
        ));
    }

    #[test]
    fn order_parameter_identities() {
        let m = AsymptoticMoments::from_samples(&[1.0, 2.0, 1.4], &[1.0, 2.0, 3.0]).unwrap();
        let alpha = 2.5;
        let cs = c(0.2, 1.6, 1.0);
        let beta = 7.0;
        let op = replica_order_parameters(&m, alpha, &cs, beta).unwrap();
        assert!((op.chi_s * beta * (alpha - 1.0) - 1.0).abs() < 1e-15);
        assert_eq!((op.tchi_w, op.tq_w), (0.0, 0.0));
        assert!(op.chi_w > 0.0 && op.q_w > 0.0 && op.q_w.is_finite());
        let d = 1.0 + beta * op.chi_s;
        let first = alpha * op.chi_s / (2.0 * d);
        assert!((first - 1.0 / (2.0 * beta)).abs() < 1e-15);

        let eps = epsilon_quenched(&m, alpha, &cs).unwrap();
        assert!((free_energy_risk_limit(&op, alpha) - eps).abs() < 1e-12 * eps);
        let hot = replica_order_parameters(&m, alpha, &cs, 1e6).unwrap();
        assert!((free_energy_risk(&hot, alpha) - eps).abs() < 1e-5);
        assert!(replica_order_parameters(&m, alpha, &cs, 0.0).is_err());
    }

    #[test]
    fn dual_branch_round_trip_and_edge() {
        let m = two_asset();
        let (alpha, rho, r0) = (2.0, 0.3, 1.0);
        let r_min = m.r_rho(rho, r0);
        let g0 = m.m1 / (alpha - 1.0);
        let eps_edge = (1.0 - rho).powi(2) / (2.0 * g0);
        let r = dual_max_return_asymptotic(&m, alpha, rho, r0, eps_edge).unwrap();
        assert!((r - r_min).abs() < 1e-14);
        assert!(dual_max_return_asymptotic(&m, alpha, rho, r0, 0.9 * eps_edge).is_err());
        let mut last = r;
        for i in 1..50 {
            let r = dual_max_return_asymptotic(&m, alpha, rho, r0, eps_edge * (1.0 + 0.1 * i as f64))
                .unwrap();
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn prediction_bundles_consistent_values() {
        let m = two_asset();
        let p = predict(&m, 2.0, &c(0.1, 1.5, 1.0)).unwrap();
        assert!(p.eps >= 0.0 && p.eps0 >= p.eps_min);
        assert!(p.sharpe.pythagoras_residual().abs() < 1e-12);
        assert_eq!(p.kappa, 2.0);
        assert!(p.tangent.is_some());
    }

    proptest! {
        #[test]
        fn pythagoras_and_cauchy_schwarz_ceiling((m, r0) in moments_strategy(), alpha in 1.1f64..10.0, rho in -1.0f64..2.0) {
            let s = sharpe_analysis(&m, alpha, rho, r0).unwrap();
            prop_assert!(s.pythagoras_residual().abs() <= 1e-12 * s.s2_star.max(1.0));
            prop_assert!((s.s2_star - m.m1r2 / (alpha - 1.0)).abs() <= 1e-12 * s.s2_star.max(1.0));
            let other = sharpe_analysis(&m, alpha, 0.7, r0).unwrap();
            prop_assert_eq!(s.s2_star, other.s2_star);
            // S at R* really is the largest S along the ρ-fixed frontier
            let r_star = s.r_star.unwrap();
            let s_star = sharpe_theory(&m, alpha, &c(rho, r_star, r0)).unwrap();
            prop_assert!((s_star * s_star - s.s2_star).abs() <= 1e-9 * s.s2_star);
        }

        #[test]
        fn kappa_is_alpha_ratio((m, r0) in moments_strategy(), alpha in 1.01f64..20.0, rho in -1.0f64..2.0, r in -1.0f64..4.0) {
            let cs = c(rho, r, r0);
            let eps = epsilon_quenched(&m, alpha, &cs).unwrap();
            prop_assume!(eps > 0.0);
            let eps_or = crate::annealed::annealed_min_risk(&m, &cs, alpha).unwrap();
            let kappa = eps_or / eps;
            prop_assert!((kappa - alpha / (alpha - 1.0)).abs() <= 1e-12 * kappa);
        }

        #[test]
        fn risk_is_stationary_at_rho_star((m, r0) in moments_strategy(), alpha in 1.1f64..10.0, r in 0.0f64..3.0) {
            let (rho, _) = rho_star(&m, r, r0).unwrap();
            let h = 1e-5;
            let e = |x: f64| epsilon_quenched(&m, alpha, &c(x, r, r0)).unwrap();
            let slope = (e(rho + h) - e(rho - h)) / (2.0 * h);
            let scale = e(rho) + (alpha - 1.0) / m.m1;
            prop_assert!(slope.abs() <= 1e-6 * scale, "slope {}", slope);
        }

        #[test]
        fn risky_only_frontier_dominates((m, r0) in moments_strategy(), alpha in 1.1f64..10.0, r in -1.0f64..4.0) {
            let gap = epsilon_no_riskfree(&m, alpha, r).unwrap() - epsilon_min(&m, alpha, r, r0).unwrap();
            prop_assert!(gap >= -1e-12);
            let t = tobin_tangent(&m, alpha, r0).unwrap();
            let at_m = epsilon_no_riskfree(&m, alpha, t.r_m).unwrap() - epsilon_min(&m, alpha, t.r_m, r0).unwrap();
            prop_assert!(at_m.abs() <= 1e-12 * epsilon_min(&m, alpha, t.r_m, r0).unwrap().max(1.0));
        }

        #[test]
        fn capital_allocation_line_geometry((m, r0) in moments_strategy(), alpha in 1.1f64..10.0, dr in 0.0f64..3.0) {
            let t = tobin_tangent(&m, alpha, r0).unwrap();
            let r = r0 + dr;
            let y_min = (2.0 * epsilon_min(&m, alpha, r, r0).unwrap()).sqrt();
            prop_assert!((t.cal(r) - y_min).abs() <= 1e-12 * y_min.max(1.0));
            let y0 = (2.0 * epsilon_no_riskfree(&m, alpha, t.r_m).unwrap()).sqrt();
            prop_assert!((t.cal(t.r_m) - t.y_rm).abs() <= 1e-12 * t.y_rm);
            prop_assert!((y0 - t.y_rm).abs() <= 1e-12 * t.y_rm);
        }

        #[test]
        fn sharpe_is_constant_along_the_cal((m, r0) in moments_strategy(), alpha in 1.1f64..10.0, dr in 0.05f64..3.0, dr2 in 0.05f64..3.0) {
            let s_at = |r: f64| {
                let (rho, _) = rho_star(&m, r, r0).unwrap();
                sharpe_theory(&m, alpha, &c(rho, r, r0)).unwrap()
            };
            let (a, b) = (s_at(r0 + dr), s_at(r0 + dr2));
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            // bounded by the fixed-ρ maximum; equal to it only when R0 = 0
            let s2_star = sharpe_analysis(&m, alpha, 0.0, r0).unwrap().s2_star;
            prop_assert!(a * a <= s2_star * (1.0 + 1e-12));
            let m0 = s_at_zero_rate(&m, alpha, dr);
            prop_assert!((m0 * m0 - s2_star).abs() <= 1e-10 * s2_star);
        }

        #[test]
        fn dual_inverts_epsilon_on_upper_branch((m, r0) in moments_strategy(), alpha in 1.1f64..10.0, rho in -1.0f64..2.0, up in 0.05f64..2.0) {
            let r = m.r_rho(rho, r0) + up;
            let eps = epsilon_quenched(&m, alpha, &c(rho, r, r0)).unwrap();
            let back = dual_max_return_asymptotic(&m, alpha, rho, r0, eps).unwrap();
            prop_assert!((back - r).abs() <= 1e-12 * r.abs().max(1.0));
        }
    }

    fn s_at_zero_rate(m: &AsymptoticMoments, alpha: f64, r: f64) -> f64 {
        let (rho, _) = rho_star(m, r, 0.0).unwrap();
        sharpe_theory(m, alpha, &c(rho, r, 0.0)).unwrap()
    }
}
