//! Pretext representation learning, downstream linear heads and risk
//! evaluation.

use crate::error::{dim_err, Error, Result};
use crate::generators::{mixture_posterior_rows, MixtureSpec};
use crate::linalg::{
    center_columns, is_degenerate_psd, pca_top_r, pinv, solve_spd, CovarianceBlocks, DenseMatrix, DenseVector,
    DEFAULT_RANK_TOL,
};

/// Anything that maps a batch of `X₁` rows to representation rows.
pub trait Representation: Sync {
    fn transform(&self, x1: &DenseMatrix) -> DenseMatrix;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureMap {
    Identity,
    Custom(String),
}

/// `ψ(x) = B·φ₁(x)`. With [`FeatureMap::Custom`] the caller applies `φ₁`
/// before calling [`Representation::transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRepresentation {
    /// `d2 × D1`.
    pub b: DenseMatrix,
    pub feature_map: FeatureMap,
    /// Set when a singular system had to be pseudo-inverted.
    pub degenerate: bool,
}

impl LinearRepresentation {
    pub fn new(b: DenseMatrix) -> Self {
        Self {
            b,
            feature_map: FeatureMap::Identity,
            degenerate: false,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.b.nrows()
    }
}

impl Representation for LinearRepresentation {
    fn transform(&self, x1: &DenseMatrix) -> DenseMatrix {
        x1 * self.b.transpose()
    }
}

/// The identity map, for the raw-`X₁` baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawFeatures;

impl Representation for RawFeatures {
    fn transform(&self, x1: &DenseMatrix) -> DenseMatrix {
        x1.clone()
    }
}

/// `ψ*(x₁) = Σ_y P(y|x₁)·μ₂_y` for a Gaussian mixture.
#[derive(Debug, Clone)]
pub struct MixturePsi<'a>(pub &'a MixtureSpec);

impl Representation for MixturePsi<'_> {
    fn transform(&self, x1: &DenseMatrix) -> DenseMatrix {
        mixture_posterior_rows(self.0, x1) * &self.0.centers2
    }
}

/// A linear map from `X₁` together with a degeneracy flag.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: DenseMatrix,
    pub degenerate: bool,
}

fn right_solve_cov(cross: &DenseMatrix, sigma: &DenseMatrix) -> (DenseMatrix, bool) {
    // cross · Σ⁻¹ with Σ symmetric
    if is_degenerate_psd(sigma, DEFAULT_RANK_TOL) {
        return (cross * pinv(sigma, DEFAULT_RANK_TOL), true);
    }
    let (x, fallback) = solve_spd(sigma, &cross.transpose());
    (x.transpose(), fallback)
}

/// `B* = Σ_{X₂X₁}·Σ_{X₁X₁}⁻¹`.
pub fn closed_form_psi_gaussian(blocks: &CovarianceBlocks) -> LinearRepresentation {
    let (b, degenerate) = right_solve_cov(&blocks.sigma_x1x2.transpose(), &blocks.sigma_x1x1);
    LinearRepresentation {
        b,
        feature_map: FeatureMap::Identity,
        degenerate,
    }
}

/// `f* = Σ_{YX₁}·Σ_{X₁X₁}⁻¹` (a `k × d1` map).
pub fn closed_form_f_gaussian(blocks: &CovarianceBlocks) -> LinearMap {
    let (matrix, degenerate) = right_solve_cov(&blocks.sigma_x1y.transpose(), &blocks.sigma_x1x1);
    LinearMap { matrix, degenerate }
}

/// The head `W*` (`d2 × k`) with `(W*)ᵀ = Σ_{YY}·Σ_{X₂Y}†`, so that
/// `(W*)ᵀψ* = f*` under conditional independence.
pub fn optimal_head_gaussian(blocks: &CovarianceBlocks) -> DenseMatrix {
    (&blocks.sigma_yy * pinv(&blocks.sigma_x2y, DEFAULT_RANK_TOL)).transpose()
}

/// `Σ_y P(y|x₁)·μ₂_y`.
pub fn closed_form_psi_mixture(spec: &MixtureSpec, x1: &DenseVector) -> DenseVector {
    spec.centers2.tr_mul(&crate::generators::mixture_posterior(spec, x1))
}

/// `λ·tr(XᵀX/n)/D`: a ridge that scales with the feature magnitude.
pub fn trace_scaled_ridge(x: &DenseMatrix, relative: f64) -> f64 {
    if x.ncols() == 0 || x.nrows() == 0 {
        return 0.0;
    }
    relative * x.norm_squared() / (x.nrows() * x.ncols()) as f64
}

/// Coefficients `C` (`D × q`) of `y ≈ x·C`. Solves
/// `(XᵀX + n·ridge·I)C = XᵀY`; `ridge = 0` gives the minimum-norm least-squares
/// solution.
pub fn least_squares(x: &DenseMatrix, y: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    if x.nrows() != y.nrows() {
        return Err(dim_err("least_squares rows", x.nrows(), y.nrows()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge {ridge} must be finite and ≥ 0")));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("least squares needs at least one row".into()));
    }
    if ridge == 0.0 {
        return Ok(pinv(x, DEFAULT_RANK_TOL) * y);
    }
    let n = x.nrows() as f64;
    let d = x.ncols();
    let gram = x.tr_mul(x) + DenseMatrix::identity(d, d) * (n * ridge);
    Ok(solve_spd(&gram, &x.tr_mul(y)).0)
}

/// Pretext regression of `X₂` on `X₁`: returns `B` with `X₂ ≈ X₁·Bᵀ`.
pub fn fit_pretext_linear(x1_pre: &DenseMatrix, x2: &DenseMatrix, ridge: f64) -> Result<LinearRepresentation> {
    let c = least_squares(x1_pre, x2, ridge)?;
    Ok(LinearRepresentation::new(c.transpose()))
}

/// Linear head on representation features, with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DownstreamFit {
    /// `d2 × d3`, in the original feature coordinates.
    pub w_hat: DenseMatrix,
    pub ridge: f64,
    pub pca_rank: Option<usize>,
    pub feature_mean: DenseVector,
    pub label_mean: DenseVector,
}

impl DownstreamFit {
    pub fn predict(&self, psi: &DenseMatrix) -> DenseMatrix {
        let mut centered = psi.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.feature_mean[j]);
        }
        let mut out = centered * &self.w_hat;
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.label_mean[j]);
        }
        out
    }
}

pub fn fit_downstream(psi_x1: &DenseMatrix, y: &DenseMatrix, ridge: f64, pca_rank: Option<usize>) -> Result<DownstreamFit> {
    if psi_x1.nrows() != y.nrows() {
        return Err(dim_err("fit_downstream rows", psi_x1.nrows(), y.nrows()));
    }
    let (psi_c, feature_mean) = center_columns(psi_x1);
    let (y_c, label_mean) = center_columns(y);
    let w_hat = match pca_rank {
        None => least_squares(&psi_c, &y_c, ridge)?,
        Some(r) => {
            if r > psi_x1.ncols() {
                return Err(Error::InvalidArgument(format!("pca rank {r} exceeds feature dim {}", psi_x1.ncols())));
            }
            let pca = pca_top_r(&psi_c, r)?;
            let z = &psi_c * &pca.projection;
            &pca.projection * least_squares(&z, &y_c, ridge)?
        }
    };
    Ok(DownstreamFit {
        w_hat,
        ridge,
        pca_rank,
        feature_mean,
        label_mean,
    })
}

fn mean_sq_gap<F>(fit: &DownstreamFit, rep: &dyn Representation, f_star: F, eval_x1: &DenseMatrix) -> Result<f64>
where
    F: Fn(&DenseMatrix) -> DenseMatrix,
{
    if eval_x1.nrows() == 0 {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    let target = f_star(eval_x1);
    let pred = fit.predict(&rep.transform(eval_x1));
    if target.shape() != pred.shape() {
        return Err(dim_err("target shape", format!("{:?}", pred.shape()), format!("{:?}", target.shape())));
    }
    Ok((target - pred).norm_squared() / eval_x1.nrows() as f64)
}

/// Monte-Carlo estimate of `½·E‖f*(X₁) − Ŵᵀψ(X₁)‖²`.
pub fn excess_risk<F>(fit: &DownstreamFit, rep: &dyn Representation, f_star: F, eval_x1: &DenseMatrix) -> Result<f64>
where
    F: Fn(&DenseMatrix) -> DenseMatrix,
{
    Ok(0.5 * mean_sq_gap(fit, rep, f_star, eval_x1)?)
}

/// Same as [`excess_risk`] without the ½.
pub fn mse<F>(fit: &DownstreamFit, rep: &dyn Representation, f_star: F, eval_x1: &DenseMatrix) -> Result<f64>
where
    F: Fn(&DenseMatrix) -> DenseMatrix,
{
    mean_sq_gap(fit, rep, f_star, eval_x1)
}

/// Target `f*(x) = F·x` for a linear map `F` (`k × d1`).
pub fn linear_target(map: &DenseMatrix) -> impl Fn(&DenseMatrix) -> DenseMatrix + '_ {
    move |x| x * map.transpose()
}

/// Target `E[Y|X₁]` for one-hot mixture labels: the class posterior.
pub fn mixture_target(spec: &MixtureSpec) -> impl Fn(&DenseMatrix) -> DenseMatrix + '_ {
    move |x| mixture_posterior_rows(spec, x)
}

/// Mean softmax cross-entropy of `γ·scores` against integer labels.
pub fn log_loss_eval(scores: &DenseMatrix, labels: &[usize], gamma: f64) -> Result<f64> {
    let (n, k) = scores.shape();
    if k < 2 {
        return Err(Error::InvalidArgument("log loss needs at least two classes".into()));
    }
    if labels.len() != n {
        return Err(dim_err("log_loss labels", n, labels.len()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("log loss of an empty batch".into()));
    }
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::InvalidArgument(format!("label {label} out of range for {k} classes")));
        }
        let row = scores.row(i) * gamma;
        let m = row.max();
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    Ok(total / n as f64)
}

/// Gaussian-kernel ridge regression with the median pairwise distance as
/// bandwidth.
#[derive(Debug, Clone)]
pub struct KernelRidge {
    pub train: DenseMatrix,
    pub coef: DenseMatrix,
    pub bandwidth: f64,
    pub label_mean: DenseVector,
}

fn sq_dists(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
    let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
    let mut g = a * b.transpose();
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            g[(i, j)] = (na[i] + nb[j] - 2.0 * g[(i, j)]).max(0.0);
        }
    }
    g
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl KernelRidge {
    pub fn fit(x: &DenseMatrix, y: &DenseMatrix, ridge: f64) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(dim_err("kernel ridge rows", x.nrows(), y.nrows()));
        }
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidArgument("kernel ridge needs at least two rows".into()));
        }
        let d2 = sq_dists(x, x);
        let off: Vec<f64> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| d2[(i, j)].sqrt()).collect();
        let bandwidth = median(off).max(1e-12);
        let gram = d2.map(|v| (-v / (2.0 * bandwidth * bandwidth)).exp()) + DenseMatrix::identity(n, n) * (n as f64 * ridge);
        let (y_c, label_mean) = center_columns(y);
        let (coef, _) = solve_spd(&gram, &y_c);
        Ok(Self {
            train: x.clone(),
            coef,
            bandwidth,
            label_mean,
        })
    }

    pub fn predict(&self, x: &DenseMatrix) -> DenseMatrix {
        let h2 = 2.0 * self.bandwidth * self.bandwidth;
        let k = sq_dists(x, &self.train).map(|v| (-v / h2).exp());
        let mut out = k * &self.coef;
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.label_mean[j]);
        }
        out
    }
}
