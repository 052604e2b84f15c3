//! Conditional-independence diagnostics: ε_CI in its linear and universal
//! forms, β, ε_Ȳ, the Bayes-gap bound and conditional spectra.

use crate::error::{Error, Result};
use crate::generators::DiscreteJoint;
use crate::linalg::{
    empirical_cov, inv_sqrt, pinv, rank, singular_values, spectral_norm, CovarianceBlocks, DenseMatrix, DenseVector,
    DEFAULT_RANK_TOL,
};

/// Summary of the CI quantities for one model or dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CIReport {
    /// Frobenius form.
    pub eps_ci: f64,
    pub eps_ci_spectral: f64,
    pub beta_inv: f64,
    pub eps_y_bar: Option<f64>,
    pub rank_sigma_x2ybar: usize,
    pub degenerate: bool,
}

/// Both norms of `Σ_{φ₁φ₁}^{-1/2}·Σ_{φ₁X₂|φ_ȳ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsCiLinear {
    pub frobenius: f64,
    pub spectral: f64,
    pub degenerate: bool,
}

/// `blocks` holds `(φ₁, X₂, φ_ȳ)` in the `(x1, x2, y)` slots.
pub fn eps_ci_linear(blocks: &CovarianceBlocks) -> Result<EpsCiLinear> {
    blocks.validate()?;
    let partial = blocks.partial_x1x2_given_y()?;
    let m = inv_sqrt(&blocks.sigma_x1x1, DEFAULT_RANK_TOL)? * &partial.matrix;
    Ok(EpsCiLinear {
        frobenius: m.norm(),
        spectral: spectral_norm(&m),
        degenerate: partial.degenerate_conditioning,
    })
}

/// [`eps_ci_linear`] on centered empirical blocks.
pub fn eps_ci_linear_from_samples(x1: &DenseMatrix, x2: &DenseMatrix, ybar: &DenseMatrix) -> Result<EpsCiLinear> {
    eps_ci_linear(&CovarianceBlocks::from_samples(x1, x2, ybar, true)?)
}

/// `ε_CI` for a finite joint whose third axis is `Ȳ`, with `X₂` embedded as
/// standard basis vectors:
/// `ε² = E_{X₁}‖E[X₂|X₁] − E[E[X₂|Ȳ]|X₁]‖²`. Returns `ε`.
pub fn eps_ci_universal(joint: &DiscreteJoint) -> Result<f64> {
    let p12 = joint.p12();
    let p1 = joint.p1();
    let p1y = joint.p1y();
    let p2y = joint.p2y();
    let py = joint.py();
    if py.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroMarginal("p(ybar)"));
    }
    // E[X₂ = b | Ȳ = y] = p(b, y) / p(y)
    let x2_given_y = DenseMatrix::from_fn(joint.n2, joint.ny, |b, y| p2y[(b, y)] / py[y]);
    let mut total = 0.0;
    for a in 0..joint.n1 {
        let post = p1y.row(a).transpose() / p1[a];
        let via_y = &x2_given_y * post;
        let direct = p12.row(a).transpose() / p1[a];
        total += p1[a] * (direct - via_y).norm_squared();
    }
    Ok(total.max(0.0).sqrt())
}

/// `1/β = ‖Σ_{Yφ_ȳ}·Σ_{X₂φ_ȳ}†‖₂` with the rank of `Σ_{X₂φ_ȳ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaInv {
    pub value: f64,
    pub rank: usize,
    /// Rank below the number of `Ȳ` coordinates.
    pub rank_deficient: bool,
}

pub fn beta_inv(sigma_y_ybar: &DenseMatrix, sigma_x2_ybar: &DenseMatrix) -> Result<BetaInv> {
    if sigma_y_ybar.ncols() != sigma_x2_ybar.ncols() {
        return Err(crate::error::dim_err("beta_inv Ȳ dim", sigma_x2_ybar.ncols(), sigma_y_ybar.ncols()));
    }
    let m = sigma_y_ybar * pinv(sigma_x2_ybar, DEFAULT_RANK_TOL);
    let r = rank(sigma_x2_ybar, DEFAULT_RANK_TOL);
    Ok(BetaInv {
        value: spectral_norm(&m),
        rank: r,
        rank_deficient: r < sigma_x2_ybar.ncols(),
    })
}

/// `E_{X₁}‖E[Y|X₁] − E[E[Y|Ȳ]|X₁]‖²` for a joint over `(X₁, Ȳ, Y)`
/// (the middle axis is the latent).
pub fn eps_y_bar(joint: &DiscreteJoint) -> Result<f64> {
    let p1 = joint.p1();
    let p1y = joint.p1y();
    let p_bar = joint.p2();
    let p1_bar = joint.p12();
    let p_bar_y = joint.p2y();
    let y_given_bar = DenseMatrix::from_fn(joint.ny, joint.n2, |y, b| p_bar_y[(b, y)] / p_bar[b]);
    let mut total = 0.0;
    for a in 0..joint.n1 {
        let direct = p1y.row(a).transpose() / p1[a];
        let bar_post = p1_bar.row(a).transpose() / p1[a];
        total += p1[a] * (direct - &y_given_bar * bar_post).norm_squared();
    }
    Ok(total.max(0.0))
}

/// Both sides of `E‖E[Y|X₁] − E[Y|X₁,X₂]‖² ≤ 2k·E[1 − max_y P(y|X₁)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl BayesGap {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-12
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn bayes_gap_check(joint: &DiscreteJoint) -> BayesGap {
    let p1 = joint.p1();
    let p1y = joint.p1y();
    let p12 = joint.p12();
    let k = joint.ny;
    let mut lhs = 0.0;
    let mut bayes_error = 0.0;
    for a in 0..joint.n1 {
        let post1: DenseVector = p1y.row(a).transpose() / p1[a];
        bayes_error += p1[a] * (1.0 - post1.max());
        for b in 0..joint.n2 {
            let pab = p12[(a, b)];
            if pab <= 0.0 {
                continue;
            }
            let post12 = DenseVector::from_iterator(k, (0..k).map(|y| joint.prob(a, b, y) / pab));
            lhs += pab * (&post1 - post12).norm_squared();
        }
    }
    BayesGap {
        lhs,
        rhs: 2.0 * k as f64 * bayes_error,
    }
}

/// Singular values of `Σ_{X₁X₂}` and of `Σ_{X₁X₂|Y}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair {
    pub unconditional: DenseVector,
    pub conditional: DenseVector,
}

pub fn spectrum_conditional(blocks: &CovarianceBlocks) -> Result<SpectrumPair> {
    Ok(SpectrumPair {
        unconditional: singular_values(&blocks.sigma_x1x2),
        conditional: singular_values(&blocks.partial_x1x2_given_y()?.matrix),
    })
}

/// ε_CI (centered, Frobenius and spectral) and 1/β (uncentered second
/// moments of the one-hot `Ȳ`) from samples.
pub fn ci_report_from_samples(x1: &DenseMatrix, x2: &DenseMatrix, y: &DenseMatrix, ybar: &DenseMatrix) -> Result<CIReport> {
    let eps = eps_ci_linear_from_samples(x1, x2, ybar)?;
    let beta = beta_inv(&empirical_cov(y, ybar, false)?, &empirical_cov(x2, ybar, false)?)?;
    Ok(CIReport {
        eps_ci: eps.frobenius,
        eps_ci_spectral: eps.spectral,
        beta_inv: beta.value,
        eps_y_bar: None,
        rank_sigma_x2ybar: beta.rank,
        degenerate: eps.degenerate || beta.rank_deficient,
    })
}
