//! Trial execution for every experiment kind.

use crate::ace::{ace_fit, apx_error_bound_eval, eps_ci_tilde, GChoice, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::ci::{ci_report_from_samples, eps_ci_linear_from_samples};
use crate::error::Result;
use crate::generators::{
    discrete_joint_random, gaussian_ci_population, gaussian_ci_sample, mixture_sample, GaussianCISpec, LabeledDataset,
    MixtureSpec,
};
use crate::harness::config::{DataModel, ExperimentConfig, ExperimentKind, Method};
use crate::linalg::{center_columns, DenseMatrix};
use crate::parallel::map_indexed;
use crate::rng::derive_seed;
use crate::ssl::{
    closed_form_f_gaussian, closed_form_psi_gaussian, fit_downstream, fit_pretext_linear, mse, optimal_head_gaussian,
    trace_scaled_ridge, DownstreamFit, KernelRidge, MixturePsi, RawFeatures, Representation,
};
use crate::topic::{verify_topic_model, TopicModelSpec};

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub grid_index: usize,
    pub grid_value: f64,
    pub trial: usize,
    pub method: String,
    pub mse: f64,
    pub eps_ci: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
}

impl TrialResult {
    pub fn method_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.records {
            if !names.contains(&r.method) {
                names.push(r.method.clone());
            }
        }
        names
    }

    /// Records with non-finite values.
    pub fn flagged(&self) -> usize {
        self.records.iter().filter(|r| !r.mse.is_finite()).count()
    }
}

/// Method labels emitted for a configuration, in row order.
pub fn method_labels(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.experiment {
        ExperimentKind::MseVsK | ExperimentKind::MseVsEps | ExperimentKind::MseVsN2 => {
            cfg.methods.iter().map(|m| m.name().to_string()).collect()
        }
        ExperimentKind::ExactCiGaussian => std::iter::once("psi-star-head".to_string())
            .chain(cfg.methods.iter().map(|m| m.name().to_string()))
            .collect(),
        ExperimentKind::AceDemo => ["ace-actual", "ace-bound-pinv", "ace-bound-bayes", "svd-bound-pinv"]
            .map(String::from)
            .to_vec(),
        ExperimentKind::TopicCheck => ["beta-inv", "beta-bound", "linearity-gap"].map(String::from).to_vec(),
        ExperimentKind::CiReport => ["eps-ci-frobenius", "eps-ci-spectral", "beta-inv"].map(String::from).to_vec(),
    }
}

/// Seed that fixes the model (mixture centers, loadings, joints, topic specs)
/// for a trial; shared across grid points.
pub fn model_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[0, trial as u64])
}

/// Seed for the samples drawn at one grid point of one trial.
pub fn sample_seed(master: u64, grid_index: usize, trial: usize) -> u64 {
    derive_seed(master, &[1, grid_index as u64, trial as u64])
}

pub fn run(cfg: &ExperimentConfig) -> Result<TrialResult> {
    cfg.validate()?;
    let grid = cfg.grid();
    let labels = method_labels(cfg);
    let cells = grid.len() * cfg.trials;
    let outputs = map_indexed(cfg.execution, cells, |cell| {
        let (g, t) = (cell / cfg.trials, cell % cfg.trials);
        run_cell(cfg, g, grid[g], t)
    });
    let mut records = Vec::with_capacity(cells * labels.len());
    for (cell, out) in outputs.into_iter().enumerate() {
        let (g, t) = (cell / cfg.trials, cell % cfg.trials);
        let seed = sample_seed(cfg.seed, g, t);
        let (values, eps) = match out {
            Ok(v) => v,
            Err(e) => {
                eprintln!("warning: {} grid={} trial={t}: {e}", cfg.experiment, grid[g]);
                (vec![f64::NAN; labels.len()], f64::NAN)
            }
        };
        for (label, value) in labels.iter().zip(values) {
            records.push(TrialRecord {
                experiment: cfg.experiment,
                grid_index: g,
                grid_value: grid[g],
                trial: t,
                method: label.clone(),
                mse: value,
                eps_ci: eps,
                seed,
            });
        }
    }
    Ok(TrialResult {
        config: cfg.clone(),
        records,
    })
}

/// Values (one per method label) and the ε_CI column for one cell.
fn run_cell(cfg: &ExperimentConfig, g: usize, grid_value: f64, trial: usize) -> Result<(Vec<f64>, f64)> {
    let mseed = model_seed(cfg.seed, trial);
    let sseed = sample_seed(cfg.seed, g, trial);
    match cfg.experiment {
        ExperimentKind::MseVsK => mse_cell(cfg, grid_value as usize, cfg.alpha, cfg.n2, mseed, sseed),
        ExperimentKind::MseVsEps => mse_cell(cfg, cfg.k, grid_value, cfg.n2, mseed, sseed),
        ExperimentKind::MseVsN2 => mse_cell(cfg, cfg.k, cfg.alpha, grid_value as usize, mseed, sseed),
        ExperimentKind::ExactCiGaussian => {
            let gcfg = ExperimentConfig {
                model: DataModel::Gaussian,
                ..cfg.clone()
            };
            let k = grid_value as usize;
            let (mut values, eps) = mse_cell(&gcfg, k, 0.0, cfg.n2, mseed, sseed)?;
            let spec = GaussianCISpec::random(cfg.d1, cfg.d2, k, cfg.noise1, cfg.noise2, mseed)?;
            let blocks = gaussian_ci_population(&spec);
            let f = closed_form_f_gaussian(&blocks).matrix;
            let composed = optimal_head_gaussian(&blocks).transpose() * closed_form_psi_gaussian(&blocks).b;
            values.insert(0, (f - composed).norm_squared());
            Ok((values, eps))
        }
        ExperimentKind::AceDemo => {
            let k = grid_value as usize;
            let joint = discrete_joint_random((cfg.support, cfg.support, cfg.y_size), mseed, false)?;
            let sol = ace_fit(&joint, k, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
            let pinv_b = apx_error_bound_eval(&sol, &joint, GChoice::PinvOfA)?;
            let bayes_b = apx_error_bound_eval(&sol, &joint, GChoice::BayesIndicator)?;
            Ok((
                vec![pinv_b.actual, pinv_b.bound, bayes_b.bound, pinv_b.bound_exact_svd],
                eps_ci_tilde(&joint)?,
            ))
        }
        ExperimentKind::TopicCheck => {
            let k = grid_value as usize;
            let spec = TopicModelSpec::random(cfg.vocab, k, cfg.doc_len, cfg.atoms, mseed)?;
            let r = verify_topic_model(&spec)?;
            Ok((vec![r.beta_inv, r.beta_bound, r.linearity_gap], r.eps_ci))
        }
        ExperimentKind::CiReport => {
            let spec = MixtureSpec::random(cfg.k, cfg.d1, cfg.d2, grid_value, mseed)?;
            let data = mixture_sample(&spec, cfg.n1, derive_seed(sseed, &[1]))?;
            let y = data.y()?;
            let rep = ci_report_from_samples(&data.x1, data.x2()?, y, y)?;
            Ok((vec![rep.eps_ci, rep.eps_ci_spectral, rep.beta_inv], rep.eps_ci))
        }
    }
}

enum Model {
    Mixture(MixtureSpec),
    Gaussian { spec: GaussianCISpec, f_map: DenseMatrix },
}

impl Model {
    fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        match self {
            Model::Mixture(s) => mixture_sample(s, n, seed),
            Model::Gaussian { spec, .. } => gaussian_ci_sample(spec, n, seed),
        }
    }

    fn target(&self, x1: &DenseMatrix) -> DenseMatrix {
        match self {
            Model::Mixture(s) => crate::generators::mixture_posterior_rows(s, x1),
            Model::Gaussian { f_map, .. } => x1 * f_map.transpose(),
        }
    }
}

fn mse_cell(cfg: &ExperimentConfig, k: usize, alpha: f64, n2: usize, mseed: u64, sseed: u64) -> Result<(Vec<f64>, f64)> {
    let model = match cfg.model {
        DataModel::Mixture => Model::Mixture(MixtureSpec::random(k, cfg.d1, cfg.d2, alpha, mseed)?),
        DataModel::Gaussian => {
            let spec = GaussianCISpec::random(cfg.d1, cfg.d2, k, cfg.noise1, cfg.noise2, mseed)?;
            let f_map = closed_form_f_gaussian(&gaussian_ci_population(&spec)).matrix;
            Model::Gaussian { spec, f_map }
        }
    };
    let pre = model.sample(cfg.n1, derive_seed(sseed, &[1]))?;
    let down = model.sample(n2, derive_seed(sseed, &[2]))?;
    let eval_x1 = model.sample(cfg.eval_n, derive_seed(sseed, &[3]))?.x1;
    let target = |x: &DenseMatrix| model.target(x);

    let pre_x2 = pre.x2()?;
    let eps = eps_ci_linear_from_samples(&pre.x1, pre_x2, pre.y()?)?.frobenius;
    let y_down = down.y()?;

    let mut values = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let value = match method {
            Method::Psi => {
                let (x1c, _) = center_columns(&pre.x1);
                let (x2c, _) = center_columns(pre_x2);
                let ridge = trace_scaled_ridge(&x1c, cfg.ridge);
                let rep = fit_pretext_linear(&x1c, &x2c, ridge)?;
                head_mse(cfg, &rep, &down.x1, y_down, &eval_x1, target)?
            }
            Method::RawX1 => head_mse(cfg, &RawFeatures, &down.x1, y_down, &eval_x1, target)?,
            Method::PsiStar => match &model {
                Model::Mixture(s) => head_mse(cfg, &MixturePsi(s), &down.x1, y_down, &eval_x1, target)?,
                Model::Gaussian { spec, .. } => {
                    let rep = closed_form_psi_gaussian(&gaussian_ci_population(spec));
                    head_mse(cfg, &rep, &down.x1, y_down, &eval_x1, target)?
                }
            },
            Method::KernelX1 => {
                let kr = KernelRidge::fit(&down.x1, y_down, cfg.kernel_ridge)?;
                (target(&eval_x1) - kr.predict(&eval_x1)).norm_squared() / eval_x1.nrows() as f64
            }
        };
        values.push(value);
    }
    Ok((values, eps))
}

fn head_mse<F>(
    cfg: &ExperimentConfig,
    rep: &dyn Representation,
    x1_down: &DenseMatrix,
    y_down: &DenseMatrix,
    eval_x1: &DenseMatrix,
    target: F,
) -> Result<f64>
where
    F: Fn(&DenseMatrix) -> DenseMatrix,
{
    let feats = rep.transform(x1_down);
    let pca = cfg.pca.map(|r| r.min(feats.ncols()));
    let ridge = trace_scaled_ridge(&center_columns(&feats).0, cfg.ridge);
    let fit: DownstreamFit = fit_downstream(&feats, y_down, ridge, pca)?;
    mse(&fit, rep, target, eval_x1)
}
