//! Ensemble averages `⟨f(r, v)⟩` over the risky assets.

use serde::{Deserialize, Serialize};

use crate::error::{PortfolioError, Result};
use crate::market::{AssetEnsemble, ParetoParams};

/// The seven ensemble averages the large-market theory depends on.
///
/// The same type carries either exact averages of a sampling law
/// ([`AsymptoticMoments::from_pareto`]) or the empirical averages of one
/// finite ensemble ([`empirical_moments`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMoments {
    /// ⟨v⁻¹⟩
    pub m1: f64,
    /// ⟨v⁻¹ r⟩
    pub m1r: f64,
    /// ⟨v⁻¹ r²⟩
    pub m1r2: f64,
    /// ⟨v⁻²⟩
    pub m2: f64,
    /// ⟨v⁻² r⟩
    pub m2r: f64,
    /// ⟨v⁻² r²⟩
    pub m2r2: f64,
    /// ⟨ln v⟩
    pub mlogv: f64,
    v1: f64,
    v2: f64,
}

impl AsymptoticMoments {
    /// Build from raw averages. `V1` and `V2` are formed as differences and
    /// clamped at zero.
    pub fn new(
        m1: f64,
        m1r: f64,
        m1r2: f64,
        m2: f64,
        m2r: f64,
        m2r2: f64,
        mlogv: f64,
    ) -> Result<Self> {
        let all = [m1, m1r, m1r2, m2, m2r, m2r2, mlogv];
        if all.iter().any(|x| !x.is_finite()) || !(m1 > 0.0) || !(m2 > 0.0) {
            return Err(PortfolioError::InvalidParameter(format!(
                "moments must be finite with <v^-1> > 0 and <v^-2> > 0, got {all:?}"
            )));
        }
        let v1 = (m1r2 / m1 - (m1r / m1).powi(2)).max(0.0);
        let v2 = (m2r2 / m2 - (m2r / m2).powi(2)).max(0.0);
        Ok(AsymptoticMoments {
            m1,
            m1r,
            m1r2,
            m2,
            m2r,
            m2r2,
            mlogv,
            v1,
            v2,
        })
    }

    /// Averages over explicit `(r_i, v_i)` pairs. `V1` and `V2` are computed
    /// in weighted-variance form, so they are never negative.
    pub fn from_samples(r: &[f64], v: &[f64]) -> Result<Self> {
        if r.is_empty() || r.len() != v.len() {
            return Err(PortfolioError::InvalidParameter(format!(
                "need matching non-empty r and v, got {} and {}",
                r.len(),
                v.len()
            )));
        }
        if v.iter().any(|&x| !(x > 0.0)) {
            return Err(PortfolioError::InvalidParameter(
                "variances must be positive".into(),
            ));
        }
        let n = r.len() as f64;
        let mean = |f: &dyn Fn(f64, f64) -> f64| r.iter().zip(v).map(|(&r, &v)| f(r, v)).sum::<f64>() / n;
        let m1 = mean(&|_, v| 1.0 / v);
        let m1r = mean(&|r, v| r / v);
        let m1r2 = mean(&|r, v| r * r / v);
        let m2 = mean(&|_, v| 1.0 / (v * v));
        let m2r = mean(&|r, v| r / (v * v));
        let m2r2 = mean(&|r, v| r * r / (v * v));
        let mlogv = mean(&|_, v| v.ln());
        let mut m = AsymptoticMoments::new(m1, m1r, m1r2, m2, m2r, m2r2, mlogv)?;
        let (r1, r2) = (m.r1(), m.r2());
        m.v1 = mean(&|r, v| (r - r1).powi(2) / v) / m1;
        m.v2 = mean(&|r, v| (r - r2).powi(2) / (v * v)) / m2;
        Ok(m)
    }

    /// Exact averages when `r ~ pareto_r`, `h ~ pareto_h` independently and `v = h r²`.
    pub fn from_pareto(pareto_r: &ParetoParams, pareto_h: &ParetoParams) -> Result<Self> {
        pareto_r.validate()?;
        pareto_h.validate()?;
        let hr = |k: f64| pareto_h.raw_moment(k);
        let rr = |k: f64| pareto_r.raw_moment(k);
        AsymptoticMoments::new(
            hr(-1.0) * rr(-2.0),
            hr(-1.0) * rr(-1.0),
            hr(-1.0),
            hr(-2.0) * rr(-4.0),
            hr(-2.0) * rr(-3.0),
            hr(-2.0) * rr(-2.0),
            pareto_h.log_mean() + 2.0 * pareto_r.log_mean(),
        )
    }

    /// v⁻¹-weighted mean return.
    pub fn r1(&self) -> f64 {
        self.m1r / self.m1
    }

    /// v⁻¹-weighted return variance.
    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn r2(&self) -> f64 {
        self.m2r / self.m2
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }

    /// `R_ρ = ρ R0 + (1 − ρ) R1`.
    pub fn r_rho(&self, rho: f64, r0: f64) -> f64 {
        rho * r0 + (1.0 - rho) * self.r1()
    }
}

pub fn empirical_moments(ensemble: &AssetEnsemble) -> AsymptoticMoments {
    AsymptoticMoments::from_samples(ensemble.returns(), ensemble.variances())
        .expect("ensemble invariants guarantee valid moments")
}
