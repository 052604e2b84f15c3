//! Fast internal consistency checks over every module.

use std::time::Instant;

use crate::ace::{
    ace_fit, ace_objective_identity_check, apx_error_bound_eval, build_operator_t, eps_ci_tilde, GChoice,
    DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::ci::{bayes_gap_check, eps_ci_linear, eps_ci_universal};
use crate::error::Result;
use crate::generators::{
    discrete_joint_random, gaussian_ci_population, mixture_posterior_rows, mixture_sample, GaussianCISpec, MixtureSpec,
};
use crate::harness::{run, ExperimentConfig, ExperimentKind};
use crate::linalg::{
    conditional_maps_from_covariance, gaussian_conditionals_from_precision, inv_sqrt, pinv, DenseMatrix,
    DEFAULT_RANK_TOL,
};
use crate::parallel::Execution;
use crate::rng::{rng_from_seed, derive_seed};
use crate::ssl::{closed_form_f_gaussian, closed_form_psi_gaussian, closed_form_psi_mixture, optimal_head_gaussian};
use crate::topic::{verify_topic_model, TopicModelSpec};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy)]
pub struct SelfcheckOptions {
    /// Tolerance handed to `pinv` in the Penrose check.
    pub pinv_rank_tol: f64,
    pub seed: u64,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        Self {
            pinv_rank_tol: DEFAULT_RANK_TOL,
            seed: 20240611,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = (&'static str, fn(&SelfcheckOptions) -> Result<(bool, String)>);

const CHECKS: [Check; 12] = [
    ("pinv-penrose", check_penrose),
    ("inv-sqrt", check_inv_sqrt),
    ("precision-vs-covariance", check_conditional_routes),
    ("exact-ci-gaussian", check_exact_ci),
    ("mixture-identity", check_mixture_identity),
    ("eps-ci-linear", check_eps_linear),
    ("eps-ci-universal", check_eps_universal),
    ("ace-operator", check_ace),
    ("apx-bound", check_bound),
    ("bayes-gap", check_bayes_gap),
    ("topic-model", check_topic),
    ("determinism", check_determinism),
];

pub fn run_selfcheck(opts: &SelfcheckOptions) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, f)| {
            let start = Instant::now();
            let (passed, detail) = match f(opts) {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn gaussian_matrix(r: usize, c: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_from_seed(seed);
    DenseMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn verdict(worst: f64, tol: f64) -> (bool, String) {
    (worst <= tol, format!("max error {worst:.3e} (tol {tol:.0e})"))
}

fn check_penrose(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for t in 0..5 {
        // rank 3 in a 6 × 5 matrix with a spread spectrum
        let u = gaussian_matrix(6, 3, derive_seed(o.seed, &[1, t])).qr().q();
        let v = gaussian_matrix(5, 3, derive_seed(o.seed, &[2, t])).qr().q();
        let s = DenseMatrix::from_diagonal(&crate::DenseVector::from_vec(vec![3.0, 1.0, 0.2]));
        let a = &u * s * v.transpose();
        let p = pinv(&a, o.pinv_rank_tol);
        let ap = &a * &p;
        let pa = &p * &a;
        for e in [
            (&ap * &a - &a).amax(),
            (&pa * &p - &p).amax(),
            (&ap - ap.transpose()).amax(),
            (&pa - pa.transpose()).amax(),
        ] {
            worst = worst.max(e);
        }
    }
    Ok(verdict(worst, 1e-10))
}

fn check_inv_sqrt(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let g = gaussian_matrix(6, 6, derive_seed(o.seed, &[3]));
    let m = &g * g.transpose() + DenseMatrix::identity(6, 6) * 0.1;
    let r = inv_sqrt(&m, DEFAULT_RANK_TOL)?;
    Ok(verdict((&r * &m * &r - DenseMatrix::identity(6, 6)).amax(), 1e-9))
}

fn check_conditional_routes(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for t in 0..10 {
        let spec = GaussianCISpec::random(5, 4, 3, 1.0, 0.5, derive_seed(o.seed, &[4, t]))?;
        let blocks = gaussian_ci_population(&spec);
        let a = gaussian_conditionals_from_precision(&blocks)?;
        let b = conditional_maps_from_covariance(&blocks)?;
        worst = worst
            .max((a.map_x2_given_x1 - b.map_x2_given_x1).amax())
            .max((a.map_y_given_x - b.map_y_given_x).amax())
            .max((a.map_y_given_x1 - b.map_y_given_x1).amax());
    }
    Ok(verdict(worst, 1e-8))
}

fn check_exact_ci(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for t in 0..10 {
        let spec = GaussianCISpec::random(8, 6, 3, 1.0, 0.5, derive_seed(o.seed, &[5, t]))?;
        let blocks = gaussian_ci_population(&spec);
        let f = closed_form_f_gaussian(&blocks).matrix;
        let composed = optimal_head_gaussian(&blocks).transpose() * closed_form_psi_gaussian(&blocks).b;
        worst = worst.max((f - composed).norm());
    }
    Ok(verdict(worst, 1e-8))
}

fn check_mixture_identity(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mu = gaussian_matrix(1, 4, derive_seed(o.seed, &[6]));
    let mut c2 = DenseMatrix::zeros(2, 4);
    c2.row_mut(0).copy_from(&mu);
    c2.row_mut(1).copy_from(&(-&mu));
    let spec = MixtureSpec::new(gaussian_matrix(2, 3, derive_seed(o.seed, &[7])), c2, 0.0)?;
    let x = mixture_sample(&spec, 200, derive_seed(o.seed, &[8]))?.x1;
    let post = mixture_posterior_rows(&spec, &x);
    let mut worst: f64 = 0.0;
    for i in 0..x.nrows() {
        let psi = closed_form_psi_mixture(&spec, &x.row(i).transpose());
        let lhs = 2.0 * post[(i, 0)] - 1.0;
        let rhs = (mu.row(0) * &psi)[0] / mu.norm_squared();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(verdict(worst, 1e-10))
}

fn check_eps_linear(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let spec = GaussianCISpec::random(6, 5, 2, 1.0, 0.5, derive_seed(o.seed, &[9]))?;
    let blocks = gaussian_ci_population(&spec);
    let eps = eps_ci_linear(&blocks)?;
    let partial = blocks.partial_x1x2_given_y()?.matrix.amax();
    Ok(verdict(eps.frobenius.max(eps.spectral).max(partial), 1e-10))
}

fn check_eps_universal(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut positive = true;
    for t in 0..10 {
        let ci = discrete_joint_random((5, 4, 3), derive_seed(o.seed, &[10, t]), true)?;
        worst = worst.max(eps_ci_universal(&ci)?).max(eps_ci_tilde(&ci)?);
        let rnd = discrete_joint_random((5, 4, 3), derive_seed(o.seed, &[11, t]), false)?;
        positive &= eps_ci_universal(&rnd)? > 0.0;
    }
    let (ok, detail) = verdict(worst, 1e-10);
    Ok((ok && positive, format!("{detail}, non-CI positive: {positive}")))
}

fn check_ace(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let j = discrete_joint_random((6, 7, 3), derive_seed(o.seed, &[12, t]), false)?;
        let s = build_operator_t(&j)?.singular_values();
        worst = worst.max((s[0] - 1.0).abs());
        let sol = ace_fit(&j, 3, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        for i in 0..3 {
            worst = worst.max((sol.sigmas[i] - s[i + 1]).abs());
        }
        ace_objective_identity_check(&sol, &j)?;
    }
    Ok(verdict(worst, 1e-8))
}

fn check_bound(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut violations = 0;
    let mut exact: f64 = 0.0;
    for t in 0..20 {
        let j = discrete_joint_random((6, 6, 3), derive_seed(o.seed, &[13, t]), false)?;
        let sol = ace_fit(&j, 2, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        for c in [GChoice::PinvOfA, GChoice::BayesIndicator] {
            violations += usize::from(!apx_error_bound_eval(&sol, &j, c)?.holds());
        }
        let ci = discrete_joint_random((6, 6, 3), derive_seed(o.seed, &[14, t]), true)?;
        let sol = ace_fit(&ci, 3, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        exact = exact.max(apx_error_bound_eval(&sol, &ci, GChoice::PinvOfA)?.actual);
    }
    Ok((violations == 0 && exact <= 1e-8, format!("{violations} violations, exact-CI residual {exact:.3e}")))
}

fn check_bayes_gap(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for t in 0..50 {
        let j = discrete_joint_random((4, 5, 3), derive_seed(o.seed, &[15, t]), false)?;
        worst = worst.min(bayes_gap_check(&j).margin());
    }
    Ok((worst >= -1e-12, format!("smallest margin {worst:.3e}")))
}

fn check_topic(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut failed = 0;
    for t in 0..3 {
        let spec = TopicModelSpec::random(4, 2, 4, 3, derive_seed(o.seed, &[16, t]))?;
        failed += usize::from(!verify_topic_model(&spec)?.all_ok());
    }
    Ok((failed == 0, format!("{failed} of 3 specs failed")))
}

fn check_determinism(o: &SelfcheckOptions) -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig {
        d1: 6,
        d2: 5,
        n1: 200,
        n2: 80,
        eval_n: 200,
        trials: 4,
        k_grid: vec![2, 3],
        seed: o.seed,
        ..ExperimentConfig::defaults(ExperimentKind::MseVsK)
    };
    let a = run(&cfg)?;
    let b = run(&cfg)?;
    cfg.execution = Execution::Sequential;
    let c = run(&cfg)?;
    let same = a.records == b.records && a.records == c.records;
    Ok((same, format!("repeat and sequential runs identical: {same}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_selfcheck(&SelfcheckOptions::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn corrupted_pinv_tolerance_is_caught() {
        let opts = SelfcheckOptions {
            pinv_rank_tol: 0.9,
            ..Default::default()
        };
        let out = run_selfcheck(&opts);
        assert!(!out.iter().find(|c| c.name == "pinv-penrose").unwrap().passed);
    }
}
