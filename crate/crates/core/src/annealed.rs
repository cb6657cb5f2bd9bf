//! The annealed benchmark: minimize the expected risk `E_X[H] = (α/2) Σ v_i w_i²`.

use nalgebra::DVector;

use crate::error::{PortfolioError, Result};
use crate::market::AssetEnsemble;
use crate::moments::AsymptoticMoments;
use crate::quenched::{lagrange_multipliers, minimal_risk, ConstraintSpec, GMoments};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(PortfolioError::Domain(format!(
            "period ratio alpha must be positive, got {alpha}"
        )))
    }
}

/// Diagonal analogues of the g-moments: `(1/N) Σ r_i^k / (α v_i)` for k = 0, 1, 2.
pub fn annealed_gmoments(ensemble: &AssetEnsemble, alpha: f64) -> Result<GMoments> {
    check_alpha(alpha)?;
    let n = ensemble.n() as f64;
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&r, &v) in ensemble.returns().iter().zip(ensemble.variances()) {
        let w = 1.0 / (alpha * v);
        s0 += w;
        s1 += w * r;
        s2 += w * r * r;
    }
    GMoments::new(s0 / n, s1 / n, s2 / n)
}

/// `w_OR,i = (k + θ r_i)/(α v_i)` with multipliers fixed by the two constraints.
pub fn annealed_portfolio(
    ensemble: &AssetEnsemble,
    c: &ConstraintSpec,
    alpha: f64,
) -> Result<DVector<f64>> {
    let g = annealed_gmoments(ensemble, alpha)?;
    let (k, theta) = lagrange_multipliers(&g, c)?;
    Ok(DVector::from_iterator(
        ensemble.risky_count(),
        ensemble
            .returns()
            .iter()
            .zip(ensemble.variances())
            .map(|(&r, &v)| (k + theta * r) / (alpha * v)),
    ))
}

/// Expected risk per risky asset of the annealed optimum on this ensemble.
pub fn annealed_risk(ensemble: &AssetEnsemble, c: &ConstraintSpec, alpha: f64) -> Result<f64> {
    let g = annealed_gmoments(ensemble, alpha)?;
    minimal_risk(&g, c, ensemble.n())
}

/// `E_X[H(w)] = (α/2) Σ v_i w_i²`.
pub fn expected_risk(ensemble: &AssetEnsemble, w: &DVector<f64>, alpha: f64) -> f64 {
    0.5 * alpha
        * ensemble
            .variances()
            .iter()
            .zip(w.iter())
            .map(|(v, w)| v * w * w)
            .sum::<f64>()
}

/// Large-market minimal expected risk per asset.
pub fn annealed_min_risk(m: &AsymptoticMoments, c: &ConstraintSpec, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v1 = m.v1();
    if !(v1 > 0.0) {
        return Err(PortfolioError::Degenerate(format!(
            "V1 = {v1} must be positive"
        )));
    }
    let budget = c.budget();
    let dev = c.excess_return() - budget * m.r1();
    Ok(alpha / (2.0 * m.m1) * (budget * budget + dev * dev / v1))
}

/// `κ = ε_OR / ε`.
pub fn opportunity_loss(eps_or: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(PortfolioError::Domain(format!(
            "opportunity loss needs positive quenched risk, got {eps}"
        )));
    }
    Ok(eps_or / eps)
}
