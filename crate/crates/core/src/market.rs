//! Market generation: bounded Pareto parameters, asset ensembles, sampled
//! return matrices and the Wishart matrix built from them.
//!
//! Scaling convention: [`ReturnMatrix`] stores `x_{iμ}/√N`, so the Wishart
//! matrix is exactly `J = X Xᵀ` with no further `1/N` factor. Do not rescale
//! again downstream.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PortfolioError, Result};
use crate::rng::{stream_rng, Stream};

/// Bounded Pareto law with density proportional to `x^{-c}` on `[l, u]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoParams {
    pub l: f64,
    pub u: f64,
    pub c: f64,
}

impl ParetoParams {
    pub fn new(l: f64, u: f64, c: f64) -> Result<Self> {
        let p = ParetoParams { l, u, c };
        p.validate()?;
        Ok(p)
    }

    /// Settings used for both `r` and `h` in the reference experiment.
    pub const REFERENCE: ParetoParams = ParetoParams {
        l: 1.0,
        u: 2.0,
        c: 2.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = self.l.is_finite()
            && self.u.is_finite()
            && self.c.is_finite()
            && self.l > 0.0
            && self.l < self.u
            && self.c > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PortfolioError::InvalidParameter(format!(
                "bounded Pareto needs 0 < l < u and c > 0, got l={}, u={}, c={}",
                self.l, self.u, self.c
            )))
        }
    }

    fn is_log_case(&self) -> bool {
        (self.c - 1.0).abs() < 1e-12
    }

    /// Inverse CDF at `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let x = if self.is_log_case() {
            self.l * (self.u / self.l).powf(q)
        } else {
            let a = 1.0 - self.c;
            let la = self.l.powf(a);
            (la + q * (self.u.powf(a) - la)).powf(1.0 / a)
        };
        x.clamp(self.l, self.u)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.l {
            return 0.0;
        }
        if x >= self.u {
            return 1.0;
        }
        if self.is_log_case() {
            (x / self.l).ln() / (self.u / self.l).ln()
        } else {
            let a = 1.0 - self.c;
            let la = self.l.powf(a);
            (x.powf(a) - la) / (self.u.powf(a) - la)
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.l || x > self.u {
            return 0.0;
        }
        self.normalizer() * x.powf(-self.c)
    }

    fn normalizer(&self) -> f64 {
        if self.is_log_case() {
            1.0 / (self.u / self.l).ln()
        } else {
            let a = 1.0 - self.c;
            a / (self.u.powf(a) - self.l.powf(a))
        }
    }

    /// `E[x^k]` for real `k`.
    pub fn raw_moment(&self, k: f64) -> f64 {
        let b = k + 1.0 - self.c;
        let integral = if b.abs() < 1e-12 {
            (self.u / self.l).ln()
        } else {
            (self.u.powf(b) - self.l.powf(b)) / b
        };
        self.normalizer() * integral
    }

    /// `E[ln x]`.
    pub fn log_mean(&self) -> f64 {
        let (lu, ll) = (self.u.ln(), self.l.ln());
        if self.is_log_case() {
            0.5 * (lu * lu - ll * ll) / (lu - ll)
        } else {
            // antiderivative of x^{a-1} ln x is x^a (ln x / a - 1/a²)
            let a = 1.0 - self.c;
            let f = |x: f64, lx: f64| x.powf(a) * (lx / a - 1.0 / (a * a));
            self.normalizer() * (f(self.u, lu) - f(self.l, ll))
        }
    }
}

/// Draw `count` values from a bounded Pareto law by inverse-CDF transform.
pub fn sample_bounded_pareto(params: &ParetoParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if count == 0 {
        return Err(PortfolioError::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let mut rng = stream_rng(seed, Stream::ParetoR);
    Ok(draw_pareto(params, count, &mut rng))
}

fn draw_pareto(params: &ParetoParams, count: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..count)
        .map(|_| params.quantile(rng.random::<f64>()))
        .collect()
}

/// Quenched market parameters: `N − 1` risky assets plus the risk-free asset `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetEnsemble {
    n: usize,
    r0: f64,
    r: Vec<f64>,
    v: Vec<f64>,
}

impl AssetEnsemble {
    /// `n` counts the risk-free asset, so `r` and `v` have length `n − 1`.
    pub fn new(n: usize, r0: f64, r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return Err(PortfolioError::InvalidParameter(format!(
                "need N >= 3 assets, got {n}"
            )));
        }
        if r.len() != n - 1 || v.len() != n - 1 {
            return Err(PortfolioError::InvalidParameter(format!(
                "expected {} risky assets, got r={} v={}",
                n - 1,
                r.len(),
                v.len()
            )));
        }
        if !r0.is_finite() || r.iter().any(|x| !x.is_finite()) {
            return Err(PortfolioError::InvalidParameter(
                "returns must be finite".into(),
            ));
        }
        if let Some((i, &vi)) = v.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x.is_finite())) {
            return Err(PortfolioError::InvalidParameter(format!(
                "variance of asset {i} must be positive and finite, got {vi}"
            )));
        }
        Ok(AssetEnsemble { n, r0, r, v })
    }

    /// Total asset count `N`, including the risk-free asset.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn risky_count(&self) -> usize {
        self.n - 1
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn returns(&self) -> &[f64] {
        &self.r
    }

    pub fn variances(&self) -> &[f64] {
        &self.v
    }

    pub fn returns_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.r)
    }

    /// CSV dump with header `index,r,v`, one risky asset per row.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "r", "v"])?;
        for (i, (r, v)) in self.r.iter().zip(&self.v).enumerate() {
            w.write_record(&[i.to_string(), r.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| PortfolioError::io(path, e))?;
        self.write_csv(file)
            .map_err(|e| PortfolioError::data(path, e))
    }
}

/// Draw `r_i` and `h_i` independently and set `v_i = h_i r_i²`.
pub fn build_ensemble(
    pareto_r: &ParetoParams,
    pareto_h: &ParetoParams,
    n: usize,
    r0: f64,
    seed: u64,
) -> Result<AssetEnsemble> {
    pareto_r.validate()?;
    pareto_h.validate()?;
    if n < 3 {
        return Err(PortfolioError::InvalidParameter(format!(
            "need N >= 3 assets, got {n}"
        )));
    }
    let r = draw_pareto(pareto_r, n - 1, &mut stream_rng(seed, Stream::ParetoR));
    let h = draw_pareto(pareto_h, n - 1, &mut stream_rng(seed, Stream::ParetoH));
    let v = r.iter().zip(&h).map(|(r, h)| h * r * r).collect();
    AssetEnsemble::new(n, r0, r, v)
}

/// Per-period return law, parameterised by its mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    #[default]
    Gaussian,
    /// Uniform on `[r − √(3v), r + √(3v)]`.
    ShiftedUniform,
}

impl FromStr for DistKind {
    type Err = PortfolioError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(DistKind::Gaussian),
            "shifted_uniform" => Ok(DistKind::ShiftedUniform),
            other => Err(PortfolioError::Config(format!(
                "unknown return distribution {other:?} (expected gaussian or shifted_uniform)"
            ))),
        }
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistKind::Gaussian => "gaussian",
            DistKind::ShiftedUniform => "shifted_uniform",
        })
    }
}

/// Centered returns scaled by `1/√N`, shape `(N − 1) × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    n: usize,
    data: DMatrix<f64>,
}

impl ReturnMatrix {
    /// Wrap an already-scaled `(N − 1) × p` matrix.
    pub fn from_scaled(n: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() + 1 != n {
            return Err(PortfolioError::InvalidParameter(format!(
                "return matrix has {} rows but N - 1 = {}",
                data.nrows(),
                n.saturating_sub(1)
            )));
        }
        if data.ncols() == 0 || data.iter().any(|x| !x.is_finite()) {
            return Err(PortfolioError::InvalidParameter(
                "return matrix must have p >= 1 finite columns".into(),
            ));
        }
        Ok(ReturnMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> usize {
        self.data.ncols()
    }

    pub fn scaled(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Row `i` of the modified returns `x̄_{iμ} − r_i`, without the `1/√N`.
    pub fn centered_row(&self, i: usize) -> Vec<f64> {
        let s = (self.n as f64).sqrt();
        self.data.row(i).iter().map(|x| x * s).collect()
    }

    /// CSV dump: header `index,x_1,...,x_p`, one risky asset per row (scaled values).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((1..=self.periods()).map(|mu| format!("x_{mu}")));
        w.write_record(&header)?;
        for (i, row) in self.data.row_iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample `p` periods of returns for every risky asset.
pub fn sample_return_matrix(
    ensemble: &AssetEnsemble,
    p: usize,
    kind: DistKind,
    seed: u64,
) -> Result<ReturnMatrix> {
    if p == 0 {
        return Err(PortfolioError::InvalidParameter(
            "need at least one period".into(),
        ));
    }
    let rows = ensemble.risky_count();
    let inv_sqrt_n = 1.0 / (ensemble.n() as f64).sqrt();
    let mut rng = stream_rng(seed, Stream::Returns);
    let mut buf = Vec::with_capacity(rows * p);
    for &v in ensemble.variances() {
        match kind {
            DistKind::Gaussian => {
                let sd = v.sqrt();
                for _ in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    buf.push(sd * z * inv_sqrt_n);
                }
            }
            DistKind::ShiftedUniform => {
                let half = (3.0 * v).sqrt();
                for _ in 0..p {
                    let u: f64 = rng.random();
                    buf.push(half * (2.0 * u - 1.0) * inv_sqrt_n);
                }
            }
        }
    }
    ReturnMatrix::from_scaled(ensemble.n(), DMatrix::from_row_slice(rows, p, &buf))
}

/// Pivots below this fraction of the diagonal mark `J` as numerically singular.
const PIVOT_TOL: f64 = 1e-11;

/// `J = X Xᵀ` together with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct WishartMatrix {
    j: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    periods: usize,
}

impl WishartMatrix {
    /// Factorize a symmetric matrix directly; `periods` is only used in errors.
    pub fn from_matrix(j: DMatrix<f64>, periods: usize) -> Result<Self> {
        let n = j.nrows();
        if n == 0 || j.ncols() != n {
            return Err(PortfolioError::InvalidParameter(format!(
                "Wishart matrix must be square and non-empty, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        if j != j.transpose() {
            return Err(PortfolioError::InvalidParameter(
                "Wishart matrix must be symmetric".into(),
            ));
        }
        let singular = PortfolioError::Singular {
            assets: n,
            periods,
        };
        let chol = Cholesky::new(j.clone()).ok_or(singular)?;
        let l = chol.l_dirty();
        for i in 0..n {
            let pivot = l[(i, i)];
            if !(pivot * pivot > PIVOT_TOL * j[(i, i)]) {
                return Err(PortfolioError::Singular {
                    assets: n,
                    periods,
                });
            }
        }
        Ok(WishartMatrix { j, chol, periods })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Solve `J y = rhs` with the stored factor.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// `wᵀ J w`.
    pub fn quadratic_form(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.j * w))
    }
}

pub fn wishart(x: &ReturnMatrix) -> Result<WishartMatrix> {
    let data = x.scaled();
    let mut j = data * data.transpose();
    let n = j.nrows();
    for c in 0..n {
        for r in 0..c {
            j[(r, c)] = j[(c, r)];
        }
    }
    WishartMatrix::from_matrix(j, x.periods())
}
