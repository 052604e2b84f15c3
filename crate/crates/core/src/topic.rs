//! Topic-model documents, the latent `Ȳ` that makes the two document halves
//! conditionally uncorrelated, and exact verification by enumeration.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};

use crate::ci::beta_inv;
use crate::error::{dim_err, Error, Result};
use crate::generators::{softmax, LabeledDataset};
use crate::linalg::{pinv, sym_eigen, DenseMatrix, DenseVector, DEFAULT_RANK_TOL};
use crate::rng::{rng_from_seed, SeededRng};

pub const MAX_VOCAB: usize = 8;
pub const MAX_DOC_LEN: usize = 8;
pub const MAX_TOPICS: usize = 3;

const SIMPLEX_TOL: f64 = 1e-9;

/// Prior over topic mixtures `μ ∈ Δ_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Tau {
    /// Atoms are the columns of a `k × m` matrix.
    Finite { weights: Vec<f64>, atoms: DenseMatrix },
    Dirichlet { alpha: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModelSpec {
    pub vocab: usize,
    pub topics: usize,
    /// `V × k`, columns are word distributions.
    pub a: DenseMatrix,
    pub tau: Tau,
    /// Even.
    pub doc_len: usize,
    pub w: DenseVector,
    pub noise_sigma: f64,
}

fn on_simplex(v: impl Iterator<Item = f64>) -> bool {
    let mut total = 0.0;
    for x in v {
        if !(x >= 0.0 && x.is_finite()) {
            return false;
        }
        total += x;
    }
    (total - 1.0).abs() <= SIMPLEX_TOL
}

impl TopicModelSpec {
    pub fn new(a: DenseMatrix, tau: Tau, doc_len: usize, w: DenseVector, noise_sigma: f64) -> Result<Self> {
        let (vocab, topics) = a.shape();
        if vocab == 0 || topics == 0 {
            return Err(Error::InvalidArgument("topic model needs V, k ≥ 1".into()));
        }
        if doc_len == 0 || !doc_len.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("document length {doc_len} must be even and positive")));
        }
        if w.len() != topics {
            return Err(dim_err("topic weights w", topics, w.len()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma must be ≥ 0".into()));
        }
        if !a.column_iter().all(|c| on_simplex(c.iter().copied())) {
            return Err(Error::InvalidArgument("columns of A must be distributions".into()));
        }
        match &tau {
            Tau::Finite { weights, atoms } => {
                if atoms.nrows() != topics || atoms.ncols() != weights.len() || weights.is_empty() {
                    return Err(dim_err("tau atoms", format!("{topics}x{}", weights.len()), format!("{:?}", atoms.shape())));
                }
                if !on_simplex(weights.iter().copied()) {
                    return Err(Error::InvalidArgument("tau weights must sum to 1".into()));
                }
                if !atoms.column_iter().all(|c| on_simplex(c.iter().copied())) {
                    return Err(Error::InvalidArgument("tau atoms must lie on the simplex".into()));
                }
            }
            Tau::Dirichlet { alpha } => {
                if alpha.len() != topics || alpha.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidArgument("Dirichlet alpha must be k positive values".into()));
                }
            }
        }
        Ok(Self {
            vocab,
            topics,
            a,
            tau,
            doc_len,
            w,
            noise_sigma,
        })
    }

    /// Random word distributions, `atoms` random mixtures with random weights,
    /// and Gaussian `w`.
    pub fn random(vocab: usize, topics: usize, doc_len: usize, atoms: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let a = random_simplex_columns(&mut rng, vocab, topics);
        let atom_m = random_simplex_columns(&mut rng, topics, atoms);
        let weights = random_simplex_columns(&mut rng, atoms, 1).column(0).iter().copied().collect();
        let w = DenseVector::from_fn(topics, |_, _| rng.sample(StandardNormal));
        Self::new(a, Tau::Finite { weights, atoms: atom_m }, doc_len, w, 0.0)
    }

    /// `Γ = E[μμᵀ]` (finite τ only).
    pub fn topic_covariance(&self) -> Result<DenseMatrix> {
        let (weights, atoms) = self.finite_tau()?;
        let mut g = DenseMatrix::zeros(self.topics, self.topics);
        for (j, &wt) in weights.iter().enumerate() {
            let m = atoms.column(j);
            g += m * m.transpose() * wt;
        }
        Ok(g)
    }

    fn finite_tau(&self) -> Result<(&[f64], &DenseMatrix)> {
        match &self.tau {
            Tau::Finite { weights, atoms } => Ok((weights, atoms)),
            Tau::Dirichlet { .. } => Err(Error::Unsupported("exact computation needs a finite-support tau".into())),
        }
    }

    fn check_scale(&self) -> Result<()> {
        if self.vocab > MAX_VOCAB || self.doc_len > MAX_DOC_LEN || self.topics > MAX_TOPICS {
            return Err(Error::Unsupported(format!(
                "exact enumeration limited to V ≤ {MAX_VOCAB}, N ≤ {MAX_DOC_LEN}, k ≤ {MAX_TOPICS}; got V={}, N={}, k={}",
                self.vocab, self.doc_len, self.topics
            )));
        }
        Ok(())
    }
}

fn random_simplex_columns(rng: &mut SeededRng, rows: usize, cols: usize) -> DenseMatrix {
    let u = Uniform::new(0.05, 1.0).expect("valid range");
    let mut m = DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(u));
    for mut c in m.column_iter_mut() {
        let s = c.sum();
        c /= s;
    }
    m
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `log P(counts | word distribution q)` for a multinomial.
fn multinomial_ln_prob(counts: &[usize], q: &DenseVector) -> f64 {
    let n: usize = counts.iter().sum();
    let mut lp = ln_factorial(n);
    for (v, &c) in counts.iter().enumerate() {
        if c > 0 {
            if q[v] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += c as f64 * q[v].ln() - ln_factorial(c);
        }
    }
    lp
}

/// All count vectors of `total` words over `parts` symbols.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=rem).rev() {
            cur.push(c);
            rec(rem - c, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Posterior over finite atoms given word counts.
fn atom_posterior(counts: &[usize], weights: &[f64], word_dists: &DenseMatrix) -> Option<DenseVector> {
    let logits = DenseVector::from_iterator(
        weights.len(),
        weights.iter().enumerate().map(|(j, &wt)| {
            if wt <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let q = word_dists.column(j);
            let mut l = wt.ln();
            for (v, &c) in counts.iter().enumerate() {
                if c > 0 {
                    l += if q[v] > 0.0 { c as f64 * q[v].ln() } else { f64::NEG_INFINITY };
                }
            }
            l
        }),
    );
    if logits.max() == f64::NEG_INFINITY {
        return None;
    }
    Some(softmax(&logits))
}

/// Draws documents; `X₁`, `X₂` are the normalized bags of the two halves and
/// `Y = wᵀE[μ|X] + noise`. For a Dirichlet prior the posterior mean is an
/// importance-sampled estimate.
pub fn sample_documents(spec: &TopicModelSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be ≥ 1".into()));
    }
    const IMPORTANCE_DRAWS: usize = 512;
    let mut rng = rng_from_seed(seed);
    let v = spec.vocab;
    let half = spec.doc_len / 2;
    let mut x1 = DenseMatrix::zeros(n, v);
    let mut x2 = DenseMatrix::zeros(n, v);
    let mut y = DenseMatrix::zeros(n, 1);

    let dirichlet_draw = |rng: &mut SeededRng, alpha: &[f64]| -> DenseVector {
        let g: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let s: f64 = g.iter().sum();
        DenseVector::from_iterator(alpha.len(), g.into_iter().map(|x| x / s))
    };

    for i in 0..n {
        let mu = match &spec.tau {
            Tau::Finite { weights, atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (j, &wt) in weights.iter().enumerate() {
                    acc += wt;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                atoms.column(pick).into_owned()
            }
            Tau::Dirichlet { alpha } => dirichlet_draw(&mut rng, alpha),
        };
        let q = &spec.a * &mu;
        let mut counts = vec![0usize; v];
        for pos in 0..spec.doc_len {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut word = v - 1;
            for (wv, &p) in q.iter().enumerate() {
                acc += p;
                if u < acc {
                    word = wv;
                    break;
                }
            }
            if pos < half {
                x1[(i, word)] += 2.0 / spec.doc_len as f64;
            } else {
                x2[(i, word)] += 2.0 / spec.doc_len as f64;
            }
            counts[word] += 1;
        }
        let post_mean = match &spec.tau {
            Tau::Finite { weights, atoms } => {
                let dists = &spec.a * atoms;
                let post = atom_posterior(&counts, weights, &dists).expect("observed document has positive probability");
                atoms * post
            }
            Tau::Dirichlet { alpha } => {
                let draws: Vec<DenseVector> = (0..IMPORTANCE_DRAWS).map(|_| dirichlet_draw(&mut rng, alpha)).collect();
                let dists = DenseMatrix::from_columns(&draws.iter().map(|m| &spec.a * m).collect::<Vec<_>>());
                let uniform = vec![1.0 / IMPORTANCE_DRAWS as f64; IMPORTANCE_DRAWS];
                let post = atom_posterior(&counts, &uniform, &dists).expect("observed document has positive probability");
                DenseMatrix::from_columns(&draws) * post
            }
        };
        let noise: f64 = rng.sample(StandardNormal);
        y[(i, 0)] = spec.w.dot(&post_mean) + spec.noise_sigma * noise;
    }
    LabeledDataset::new(x1, Some(x2), Some(y), seed)
}

/// Exact half-document model for a finite τ.
#[derive(Debug, Clone)]
pub struct BarYModel {
    /// Possible half-documents as word counts.
    pub halves: Vec<Vec<usize>>,
    /// Normalized bags, one row per half-document.
    pub bags: DenseMatrix,
    /// `P(X₁ = x)` for each half-document.
    pub p_x1: DenseVector,
    /// `P(Ȳ = i | X₁ = x) = E[μ|x](i)`; rows for zero-probability halves are zero.
    pub channel: DenseMatrix,
    /// `P(X₂ = x | Ȳ = i) = P(X₂ = x | μ = e_i)`, halves × k.
    pub p_x2_given_bar: DenseMatrix,
    /// `E[X₂ | Ȳ = i]` by enumeration, `V × k`.
    pub x2_given_bar: DenseMatrix,
    /// Posterior over atoms for each half-document, halves × m.
    pub atom_post: DenseMatrix,
}

pub fn build_bar_y(spec: &TopicModelSpec) -> Result<BarYModel> {
    spec.check_scale()?;
    let (weights, atoms) = spec.finite_tau()?;
    let half = spec.doc_len / 2;
    let halves = compositions(half, spec.vocab);
    let h = halves.len();
    let m = weights.len();
    let dists = &spec.a * atoms;
    let bags = DenseMatrix::from_fn(h, spec.vocab, |r, v| 2.0 * halves[r][v] as f64 / spec.doc_len as f64);

    let mut p_x1 = DenseVector::zeros(h);
    let mut channel = DenseMatrix::zeros(h, spec.topics);
    let mut atom_post = DenseMatrix::zeros(h, m);
    for (r, counts) in halves.iter().enumerate() {
        p_x1[r] = (0..m)
            .map(|j| weights[j] * multinomial_ln_prob(counts, &dists.column(j).into_owned()).exp())
            .sum();
        if let Some(post) = atom_posterior(counts, weights, &dists) {
            if p_x1[r] > 0.0 {
                channel.row_mut(r).copy_from(&(atoms * &post).transpose());
                atom_post.row_mut(r).copy_from(&post.transpose());
            }
        }
    }
    let p_x2_given_bar = DenseMatrix::from_fn(h, spec.topics, |r, i| {
        multinomial_ln_prob(&halves[r], &spec.a.column(i).into_owned()).exp()
    });
    let x2_given_bar = bags.tr_mul(&p_x2_given_bar);
    Ok(BarYModel {
        halves,
        bags,
        p_x1,
        channel,
        p_x2_given_bar,
        x2_given_bar,
        atom_post,
    })
}

/// Outcome of the four topic-model checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport {
    pub bar_y_size: usize,
    /// `(E‖E[X₂|X₁] − E[E[X₂|Ȳ]|X₁]‖²)^{1/2}`.
    pub eps_ci: f64,
    /// Largest `|E[Y|X₁] − wᵀE[Ȳ|X₁]|` over half-documents.
    pub linearity_gap: f64,
    /// Largest `|E[X₂|μ = e_i] − A e_i|` entry.
    pub mean_map_gap: f64,
    /// `1/β` from the enumerated joint of `(X₂, Ȳ, Y)`.
    pub beta_inv: f64,
    /// `‖wᵀΓ(AΓ)†‖₂`.
    pub beta_inv_topic_cov: f64,
    pub kappa: f64,
    pub sigma_min_a: f64,
    /// `κ‖w‖₂ / σ_min(A)` (zero when `w = 0`).
    pub beta_bound: f64,
}

impl TopicReport {
    pub fn eps_ci_ok(&self) -> bool {
        self.eps_ci <= 1e-10
    }

    pub fn linearity_ok(&self) -> bool {
        self.linearity_gap <= 1e-10
    }

    pub fn beta_ok(&self) -> bool {
        self.beta_inv <= self.beta_bound * (1.0 + 1e-9) + 1e-12
            && self.beta_inv_topic_cov <= self.beta_bound * (1.0 + 1e-9) + 1e-12
    }

    pub fn all_ok(&self) -> bool {
        self.bar_y_size > 0 && self.eps_ci_ok() && self.linearity_ok() && self.beta_ok()
    }
}

pub fn verify_topic_model(spec: &TopicModelSpec) -> Result<TopicReport> {
    let model = build_bar_y(spec)?;
    let (weights, atoms) = spec.finite_tau()?;
    let dists = &spec.a * atoms;
    let h = model.halves.len();
    let m = weights.len();

    // P(X₂ = x | atom j)
    let p_half_given_atom = DenseMatrix::from_fn(h, m, |r, j| {
        multinomial_ln_prob(&model.halves[r], &dists.column(j).into_owned()).exp()
    });

    let mut eps_sq = 0.0;
    let mut linearity_gap: f64 = 0.0;
    let mut gamma_tilde = DenseMatrix::zeros(spec.topics, spec.topics);
    for r in 0..h {
        let px = model.p_x1[r];
        if px <= 0.0 {
            continue;
        }
        let post = model.atom_post.row(r).transpose();
        // P(X₂ = x' | X₁ = x) = Σ_j P(j | x) P(x' | j)
        let p_x2 = &p_half_given_atom * &post;
        let direct = model.bags.tr_mul(&p_x2);
        let bar_post = model.channel.row(r).transpose();
        let via_bar = &model.x2_given_bar * &bar_post;
        eps_sq += px * (direct - via_bar).norm_squared();

        let mut ey = 0.0;
        for (r2, counts2) in model.halves.iter().enumerate() {
            if p_x2[r2] <= 0.0 {
                continue;
            }
            let full: Vec<usize> = model.halves[r].iter().zip(counts2).map(|(a, b)| a + b).collect();
            let post_full = atom_posterior(&full, weights, &dists).expect("positive probability");
            ey += p_x2[r2] * spec.w.dot(&(atoms * post_full));
        }
        linearity_gap = linearity_gap.max((ey - spec.w.dot(&bar_post)).abs());
        gamma_tilde += &bar_post * bar_post.transpose() * px;
    }

    let mean_map_gap = (&model.x2_given_bar - &spec.a).amax();

    let w_row = DenseMatrix::from_row_slice(1, spec.topics, spec.w.as_slice());
    let sigma_y_bar = &w_row * &gamma_tilde;
    let sigma_x2_bar = &spec.a * &gamma_tilde;
    let beta = beta_inv(&sigma_y_bar, &sigma_x2_bar)?;

    let gamma = spec.topic_covariance()?;
    let beta_cov = beta_inv(&(&w_row * &gamma), &(&spec.a * &gamma))?;
    let (eig, _) = sym_eigen(&gamma);
    let (lmax, lmin) = (eig[0], eig[eig.len() - 1]);
    let kappa = if lmin > DEFAULT_RANK_TOL * lmax { lmax / lmin } else { f64::INFINITY };
    let sv = crate::linalg::singular_values(&spec.a);
    let sigma_min_a = sv[sv.len() - 1];
    let w_norm = spec.w.norm();
    let beta_bound = if w_norm == 0.0 {
        0.0
    } else if sigma_min_a <= 0.0 {
        f64::INFINITY
    } else {
        kappa * w_norm / sigma_min_a
    };

    Ok(TopicReport {
        bar_y_size: spec.topics,
        eps_ci: eps_sq.max(0.0).sqrt(),
        linearity_gap,
        mean_map_gap,
        beta_inv: beta.value,
        beta_inv_topic_cov: beta_cov.value,
        kappa,
        sigma_min_a,
        beta_bound,
    })
}

/// `E[μ|X₁]` for each half-document, `halves × k`.
pub fn posterior_mean_by_half(spec: &TopicModelSpec) -> Result<DenseMatrix> {
    Ok(build_bar_y(spec)?.channel)
}

/// `wᵀ·pinv(A)`, the value `1/β` takes when `Γ̃` is invertible.
pub fn head_through_pinv(spec: &TopicModelSpec) -> DenseMatrix {
    DenseMatrix::from_row_slice(1, spec.topics, spec.w.as_slice()) * pinv(&spec.a, DEFAULT_RANK_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn small_spec(seed: u64) -> TopicModelSpec {
        TopicModelSpec::random(4, 2, 4, 3, seed).unwrap()
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(2, 3).len(), 6);
        assert_eq!(compositions(4, 8).len(), 330);
        assert!(compositions(3, 4).iter().all(|c| c.iter().sum::<usize>() == 3));
    }

    #[test]
    fn samples_have_unit_mass_halves() {
        let spec = small_spec(1);
        let d = sample_documents(&spec, 50, 2).unwrap();
        for r in d.x1.row_iter().chain(d.x2.as_ref().unwrap().row_iter()) {
            assert_abs_diff_eq!(r.sum(), 1.0, epsilon = 1e-12);
        }
        assert_eq!(d, sample_documents(&spec, 50, 2).unwrap());
    }

    #[test]
    fn single_atom_mean_matches_a_mu() {
        let a = DenseMatrix::from_row_slice(3, 2, &[0.5, 0.1, 0.3, 0.2, 0.2, 0.7]);
        let mu = DenseMatrix::from_row_slice(2, 1, &[0.3, 0.7]);
        let spec = TopicModelSpec::new(a.clone(), Tau::Finite { weights: vec![1.0], atoms: mu.clone() }, 4, DenseVector::from_vec(vec![1.0, -1.0]), 0.0).unwrap();
        let n = 20_000;
        let d = sample_documents(&spec, n, 3).unwrap();
        let x2 = d.x2.unwrap();
        let target = &a * mu.column(0);
        for v in 0..3 {
            let mean = x2.column(v).sum() / n as f64;
            // each coordinate is a binomial proportion over N/2 words
            let se = (target[v] * (1.0 - target[v]) / 2.0 / n as f64).sqrt();
            assert!((mean - target[v]).abs() <= 5.0 * se);
        }
        // one atom: posterior is the atom itself, so Y is constant
        assert!(d.y.unwrap().iter().all(|&v| (v - (0.3 - 0.7)).abs() < 1e-12));
        let model = build_bar_y(&spec).unwrap();
        for r in 0..model.halves.len() {
            assert_abs_diff_eq!(model.channel[(r, 0)], 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn dirichlet_samples_but_refuses_exact() {
        let mut spec = small_spec(4);
        spec.tau = Tau::Dirichlet { alpha: vec![0.5, 0.5] };
        assert!(sample_documents(&spec, 5, 1).is_ok());
        assert!(matches!(build_bar_y(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn scale_limits_are_enforced() {
        let spec = TopicModelSpec::random(9, 2, 4, 2, 5).unwrap();
        assert!(matches!(verify_topic_model(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn vertex_tau_gives_topic_posterior() {
        let a = random_simplex_columns(&mut rng_from_seed(6), 4, 2);
        let spec = TopicModelSpec::new(
            a,
            Tau::Finite { weights: vec![0.4, 0.6], atoms: DenseMatrix::identity(2, 2) },
            4,
            DenseVector::from_vec(vec![1.0, 2.0]),
            0.0,
        )
        .unwrap();
        let model = build_bar_y(&spec).unwrap();
        assert_abs_diff_eq!(model.channel, model.atom_post, epsilon = 1e-15);
    }

    #[test]
    fn bar_y_matches_full_enumeration() {
        let spec = small_spec(7);
        let (weights, atoms) = spec.finite_tau().unwrap();
        let dists = &spec.a * atoms;
        let (v, n) = (spec.vocab, spec.doc_len);
        // every ordered document in [V]^N
        let mut by_x1: BTreeMap<Vec<usize>, (f64, DenseVector)> = BTreeMap::new();
        for code in 0..v.pow(n as u32) {
            let mut words = Vec::with_capacity(n);
            let mut c = code;
            for _ in 0..n {
                words.push(c % v);
                c /= v;
            }
            let p: f64 = (0..weights.len())
                .map(|j| weights[j] * words.iter().map(|&w| dists[(w, j)]).product::<f64>())
                .sum();
            let mut key = vec![0; v];
            for &w in &words[..n / 2] {
                key[w] += 1;
            }
            let mut x2 = DenseVector::zeros(v);
            for &w in &words[n / 2..] {
                x2[w] += 2.0 / n as f64;
            }
            let e = by_x1.entry(key).or_insert((0.0, DenseVector::zeros(v)));
            e.0 += p;
            e.1 += x2 * p;
        }
        let model = build_bar_y(&spec).unwrap();
        for (r, counts) in model.halves.iter().enumerate() {
            let (p, sum) = &by_x1[counts];
            let direct = sum / *p;
            let via = &model.x2_given_bar * model.channel.row(r).transpose();
            assert_abs_diff_eq!(direct, via.clone(), epsilon = 1e-12);
            assert_abs_diff_eq!(&spec.a * model.channel.row(r).transpose(), via, epsilon = 1e-12);
        }
    }

    #[test]
    fn topic_conditions_hold_on_small_specs() {
        for seed in 0..5 {
            let r = verify_topic_model(&TopicModelSpec::random(5, 3, 6, 4, seed).unwrap()).unwrap();
            assert!(r.all_ok(), "{r:?}");
            assert!(r.mean_map_gap <= 1e-12);
            assert!(r.kappa >= 1.0);
        }
    }

    #[test]
    fn zero_w_and_single_topic() {
        let mut spec = small_spec(8);
        spec.w = DenseVector::zeros(2);
        let r = verify_topic_model(&spec).unwrap();
        assert_eq!(r.beta_inv, 0.0);
        assert_eq!(r.beta_bound, 0.0);
        assert!(r.all_ok());

        let one = TopicModelSpec::new(
            DenseMatrix::from_column_slice(3, 1, &[0.2, 0.3, 0.5]),
            Tau::Finite { weights: vec![1.0], atoms: DenseMatrix::from_element(1, 1, 1.0) },
            4,
            DenseVector::from_vec(vec![2.0]),
            0.0,
        )
        .unwrap();
        assert!(verify_topic_model(&one).unwrap().all_ok());
    }

    #[test]
    fn disjoint_topics_have_finite_beta() {
        let a = DenseMatrix::from_row_slice(4, 2, &[0.5, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.5]);
        let spec = TopicModelSpec::new(
            a,
            Tau::Finite { weights: vec![0.5, 0.5], atoms: DenseMatrix::identity(2, 2) },
            4,
            DenseVector::from_vec(vec![1.0, -2.0]),
            0.0,
        )
        .unwrap();
        let r = verify_topic_model(&spec).unwrap();
        assert!(r.beta_inv.is_finite());
        assert!(r.all_ok());
        assert_abs_diff_eq!(r.beta_inv, head_through_pinv(&spec).norm(), epsilon = 1e-10);
    }
}
