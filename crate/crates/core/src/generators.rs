//! Seeded synthetic data models with their analytic population quantities.

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{ensure_finite, max_asymmetry, symmetrize, CovarianceBlocks, DenseMatrix, DenseVector};
use crate::rng::{rng_from_seed, SeededRng};

/// A finite sample. Rows are draws; absent views are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x1: DenseMatrix,
    pub x2: Option<DenseMatrix>,
    pub y: Option<DenseMatrix>,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn new(x1: DenseMatrix, x2: Option<DenseMatrix>, y: Option<DenseMatrix>, seed: u64) -> Result<Self> {
        let n = x1.nrows();
        for m in x2.iter().chain(y.iter()) {
            if m.nrows() != n {
                return Err(dim_err("dataset rows", n, m.nrows()));
            }
        }
        Ok(Self { x1, x2, y, seed })
    }

    pub fn len(&self) -> usize {
        self.x1.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.nrows() == 0
    }

    pub fn x2(&self) -> Result<&DenseMatrix> {
        self.x2.as_ref().ok_or_else(|| Error::InvalidArgument("dataset has no X2 view".into()))
    }

    pub fn y(&self) -> Result<&DenseMatrix> {
        self.y.as_ref().ok_or_else(|| Error::InvalidArgument("dataset has no labels".into()))
    }
}

/// Row-wise argmax of a (one-hot) label matrix.
pub fn labels_from_one_hot(y: &DenseMatrix) -> Vec<usize> {
    y.row_iter().map(|r| r.transpose().argmax().0).collect()
}

pub fn one_hot(labels: &[usize], k: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        m[(i, l)] = 1.0;
    }
    m
}

fn standard_normal_matrix(rng: &mut SeededRng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `X₁ = M₁Y + ε₁`, `X₂ = M₂Y + ε₂`, `Y ~ N(0, Σ_Y)`, isotropic Gaussian noises.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCISpec {
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    pub m1: DenseMatrix,
    pub m2: DenseMatrix,
    pub noise1: f64,
    pub noise2: f64,
    pub sigma_y: DenseMatrix,
}

impl GaussianCISpec {
    pub fn new(m1: DenseMatrix, m2: DenseMatrix, noise1: f64, noise2: f64, sigma_y: DenseMatrix) -> Result<Self> {
        let (d1, k) = m1.shape();
        let d2 = m2.nrows();
        if d1 == 0 || d2 == 0 || k == 0 {
            return Err(Error::InvalidArgument("gaussian spec dims must be ≥ 1".into()));
        }
        if m2.ncols() != k {
            return Err(dim_err("M2 columns", k, m2.ncols()));
        }
        if sigma_y.shape() != (k, k) {
            return Err(dim_err("Σ_Y", format!("{k}x{k}"), format!("{:?}", sigma_y.shape())));
        }
        if !(noise1 > 0.0 && noise2 > 0.0 && noise1.is_finite() && noise2.is_finite()) {
            return Err(Error::InvalidArgument("noise scales must be positive".into()));
        }
        ensure_finite(&m1, "M1")?;
        ensure_finite(&m2, "M2")?;
        ensure_finite(&sigma_y, "Σ_Y")?;
        if max_asymmetry(&sigma_y) > 1e-10 * sigma_y.amax().max(1.0) {
            return Err(Error::NotSymmetric(max_asymmetry(&sigma_y)));
        }
        Ok(Self {
            d1,
            d2,
            k,
            m1,
            m2,
            noise1,
            noise2,
            sigma_y,
        })
    }

    /// Loadings with iid `N(0, 1/d)` entries and `Σ_Y = I`.
    pub fn random(d1: usize, d2: usize, k: usize, noise1: f64, noise2: f64, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let m1 = standard_normal_matrix(&mut rng, d1, k) / (d1.max(1) as f64).sqrt();
        let m2 = standard_normal_matrix(&mut rng, d2, k) / (d2.max(1) as f64).sqrt();
        Self::new(m1, m2, noise1, noise2, DenseMatrix::identity(k, k))
    }
}

pub fn gaussian_ci_population(spec: &GaussianCISpec) -> CovarianceBlocks {
    let s = &spec.sigma_y;
    let m1s = &spec.m1 * s;
    let m2s = &spec.m2 * s;
    CovarianceBlocks {
        sigma_x1x1: symmetrize(&(&m1s * spec.m1.transpose()))
            + DenseMatrix::identity(spec.d1, spec.d1) * spec.noise1.powi(2),
        sigma_x1x2: &m1s * spec.m2.transpose(),
        sigma_x1y: m1s,
        sigma_x2x2: symmetrize(&(&m2s * spec.m2.transpose()))
            + DenseMatrix::identity(spec.d2, spec.d2) * spec.noise2.powi(2),
        sigma_x2y: m2s,
        sigma_yy: s.clone(),
    }
}

/// Lower factor `L` with `L·Lᵀ = Σ`; PSD-singular inputs go through the eigen route.
fn psd_factor(sigma: &DenseMatrix) -> DenseMatrix {
    if let Some(ch) = Cholesky::new(symmetrize(sigma)) {
        return ch.l();
    }
    let (vals, vecs) = crate::linalg::sym_eigen(sigma);
    let mut f = vecs;
    for (j, v) in vals.iter().enumerate() {
        let scale = v.max(0.0).sqrt();
        f.column_mut(j).scale_mut(scale);
    }
    f
}

pub fn gaussian_ci_sample(spec: &GaussianCISpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be ≥ 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let factor = psd_factor(&spec.sigma_y);
    let y = standard_normal_matrix(&mut rng, n, spec.k) * factor.transpose();
    let e1 = standard_normal_matrix(&mut rng, n, spec.d1) * spec.noise1;
    let e2 = standard_normal_matrix(&mut rng, n, spec.d2) * spec.noise2;
    let x1 = &y * spec.m1.transpose() + e1;
    let x2 = &y * spec.m2.transpose() + e2;
    LabeledDataset::new(x1, Some(x2), Some(y), seed)
}

/// k-class Gaussian mixture with unit covariances and a uniform prior.
/// `X₂ = (1−α)·X̂₂ + α·X₁`, where `X₁` is zero-padded or truncated to `d₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub k: usize,
    pub d1: usize,
    pub d2: usize,
    /// `k × d1`, row `y` is `μ₁_y`.
    pub centers1: DenseMatrix,
    /// `k × d2`, row `y` is `μ₂_y`.
    pub centers2: DenseMatrix,
    pub alpha: f64,
}

impl MixtureSpec {
    pub fn new(centers1: DenseMatrix, centers2: DenseMatrix, alpha: f64) -> Result<Self> {
        let (k, d1) = centers1.shape();
        let d2 = centers2.ncols();
        if centers2.nrows() != k {
            return Err(dim_err("centers2 rows", k, centers2.nrows()));
        }
        if k == 0 || d1 == 0 || d2 == 0 {
            return Err(Error::InvalidArgument("mixture dims must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
        }
        ensure_finite(&centers1, "centers1")?;
        ensure_finite(&centers2, "centers2")?;
        Ok(Self {
            k,
            d1,
            d2,
            centers1,
            centers2,
            alpha,
        })
    }

    /// Centers uniform on `[0, 10)` per coordinate.
    pub fn random(k: usize, d1: usize, d2: usize, alpha: f64, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let u = Uniform::new(0.0, 10.0).expect("valid range");
        let c1 = DenseMatrix::from_fn(k, d1, |_, _| rng.sample(u));
        let c2 = DenseMatrix::from_fn(k, d2, |_, _| rng.sample(u));
        Self::new(c1, c2, alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.centers1.clone(), self.centers2.clone(), alpha)
    }
}

/// Pads `x` with zeros on the right, or keeps its leading `d` coordinates.
pub fn pad_or_truncate(x: &DenseMatrix, d: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.nrows(), d);
    let c = d.min(x.ncols());
    out.view_mut((0, 0), (x.nrows(), c)).copy_from(&x.view((0, 0), (x.nrows(), c)));
    out
}

pub fn mixture_sample(spec: &MixtureSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be ≥ 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..spec.k)).collect();
    let mut x1 = standard_normal_matrix(&mut rng, n, spec.d1);
    let mut x2_hat = standard_normal_matrix(&mut rng, n, spec.d2);
    for (i, &l) in labels.iter().enumerate() {
        let mut r1 = x1.row_mut(i);
        r1 += spec.centers1.row(l);
        let mut r2 = x2_hat.row_mut(i);
        r2 += spec.centers2.row(l);
    }
    let x2 = if spec.alpha == 0.0 {
        x2_hat
    } else {
        x2_hat * (1.0 - spec.alpha) + pad_or_truncate(&x1, spec.d2) * spec.alpha
    };
    LabeledDataset::new(x1, Some(x2), Some(one_hot(&labels, spec.k)), seed)
}

/// Softmax of `−½‖x − μ_y‖²` over classes.
pub fn mixture_posterior(spec: &MixtureSpec, x1: &DenseVector) -> DenseVector {
    let logits = DenseVector::from_iterator(
        spec.k,
        spec.centers1
            .row_iter()
            .map(|c| -0.5 * (c.transpose() - x1).norm_squared()),
    );
    softmax(&logits)
}

/// [`mixture_posterior`] applied to every row; returns `n × k`.
pub fn mixture_posterior_rows(spec: &MixtureSpec, x1: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x1.nrows(), spec.k);
    for (i, row) in x1.row_iter().enumerate() {
        let p = mixture_posterior(spec, &row.transpose());
        out.row_mut(i).copy_from(&p.transpose());
    }
    out
}

pub fn softmax(logits: &DenseVector) -> DenseVector {
    let m = logits.max();
    let e = logits.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// Finite joint `p(x₁, x₂, y)` stored x₁-major: index `(x₁·|X₂| + x₂)·|Y| + y`.
/// A joint without a label uses `|Y| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    pub n1: usize,
    pub n2: usize,
    pub ny: usize,
    pub p: Vec<f64>,
}

const JOINT_SUM_TOL: f64 = 1e-12;

impl DiscreteJoint {
    pub fn new(n1: usize, n2: usize, ny: usize, p: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || ny == 0 {
            return Err(Error::InvalidArgument("joint supports must be nonempty".into()));
        }
        if p.len() != n1 * n2 * ny {
            return Err(dim_err("joint entries", n1 * n2 * ny, p.len()));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("joint entries must be finite and nonnegative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > JOINT_SUM_TOL * (p.len() as f64).max(1.0) {
            return Err(Error::InvalidArgument(format!("joint sums to {total}, not 1")));
        }
        let joint = Self { n1, n2, ny, p };
        if joint.p1().iter().any(|&v| v <= 0.0) {
            return Err(Error::ZeroMarginal("p(x1)"));
        }
        if joint.p2().iter().any(|&v| v <= 0.0) {
            return Err(Error::ZeroMarginal("p(x2)"));
        }
        Ok(joint)
    }

    /// Normalizes nonnegative weights into a joint.
    pub fn from_weights(n1: usize, n2: usize, ny: usize, w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument("weights must have a positive finite sum".into()));
        }
        Self::new(n1, n2, ny, w.into_iter().map(|v| v / total).collect())
    }

    /// Joint of `(X₁, X₂)` only.
    pub fn from_pair(p12: &DenseMatrix) -> Result<Self> {
        let (n1, n2) = p12.shape();
        let p = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).map(|(i, j)| p12[(i, j)]).collect();
        Self::from_weights(n1, n2, 1, p)
    }

    /// `p(y)·p(x₁|y)·p(x₂|y)` from `p(y)` and the columns of the conditionals.
    pub fn from_ci(py: &DenseVector, p1_given_y: &DenseMatrix, p2_given_y: &DenseMatrix) -> Result<Self> {
        let ny = py.len();
        let (n1, n2) = (p1_given_y.nrows(), p2_given_y.nrows());
        if p1_given_y.ncols() != ny || p2_given_y.ncols() != ny {
            return Err(dim_err("conditional columns", ny, p1_given_y.ncols().max(p2_given_y.ncols())));
        }
        let mut w = vec![0.0; n1 * n2 * ny];
        for a in 0..n1 {
            for b in 0..n2 {
                for y in 0..ny {
                    w[(a * n2 + b) * ny + y] = py[y] * p1_given_y[(a, y)] * p2_given_y[(b, y)];
                }
            }
        }
        Self::from_weights(n1, n2, ny, w)
    }

    /// Independent `X₁`, `X₂` with the given marginals.
    pub fn product(p1: &DenseVector, p2: &DenseVector) -> Result<Self> {
        Self::from_pair(&(p1 * p2.transpose()))
    }

    /// `X₂ = X₁`, uniform over `m` symbols.
    pub fn identity(m: usize) -> Result<Self> {
        Self::from_pair(&(DenseMatrix::identity(m, m) / m as f64))
    }

    #[inline]
    pub fn idx(&self, a: usize, b: usize, y: usize) -> usize {
        (a * self.n2 + b) * self.ny + y
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize, y: usize) -> f64 {
        self.p[self.idx(a, b, y)]
    }

    /// `p(x₁, x₂)` as an `n1 × n2` matrix.
    pub fn p12(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n1, self.n2, |a, b| (0..self.ny).map(|y| self.prob(a, b, y)).sum())
    }

    /// `p(x₁, y)`, `n1 × ny`.
    pub fn p1y(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n1, self.ny, |a, y| (0..self.n2).map(|b| self.prob(a, b, y)).sum())
    }

    /// `p(x₂, y)`, `n2 × ny`.
    pub fn p2y(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n2, self.ny, |b, y| (0..self.n1).map(|a| self.prob(a, b, y)).sum())
    }

    pub fn p1(&self) -> DenseVector {
        let m = self.p12();
        DenseVector::from_iterator(self.n1, m.row_iter().map(|r| r.sum()))
    }

    pub fn p2(&self) -> DenseVector {
        let m = self.p12();
        DenseVector::from_iterator(self.n2, m.column_iter().map(|c| c.sum()))
    }

    pub fn py(&self) -> DenseVector {
        let m = self.p1y();
        DenseVector::from_iterator(self.ny, m.column_iter().map(|c| c.sum()))
    }

    /// `(1−δ)·self + δ·other`.
    pub fn mix(&self, other: &Self, delta: f64) -> Result<Self> {
        if (self.n1, self.n2, self.ny) != (other.n1, other.n2, other.ny) {
            return Err(dim_err(
                "mix supports",
                format!("{:?}", (self.n1, self.n2, self.ny)),
                format!("{:?}", (other.n1, other.n2, other.ny)),
            ));
        }
        let p = self.p.iter().zip(&other.p).map(|(a, b)| (1.0 - delta) * a + delta * b).collect();
        Self::from_weights(self.n1, self.n2, self.ny, p)
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

/// Random joint over supports `(|X₁|, |X₂|, |Y|)`. With `ci_with_y` the joint
/// factors as `p(y)p(x₁|y)p(x₂|y)`; otherwise every cell is drawn
/// independently. All entries are bounded away from zero.
pub fn discrete_joint_random(sizes: (usize, usize, usize), seed: u64, ci_with_y: bool) -> Result<DiscreteJoint> {
    let (n1, n2, ny) = sizes;
    if n1 < 2 || n2 < 2 || ny < 1 {
        return Err(Error::InvalidArgument(format!("joint sizes {sizes:?} too small")));
    }
    let mut rng = rng_from_seed(seed);
    if ci_with_y {
        let py = random_simplex_columns(&mut rng, ny, 1).column(0).into_owned();
        let c1 = random_simplex_columns(&mut rng, n1, ny);
        let c2 = random_simplex_columns(&mut rng, n2, ny);
        DiscreteJoint::from_ci(&py, &c1, &c2)
    } else {
        let u = Uniform::new(0.05, 1.0).expect("valid range");
        let w = (0..n1 * n2 * ny).map(|_| rng.sample(u)).collect();
        DiscreteJoint::from_weights(n1, n2, ny, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{empirical_cov, partial_cov};
    use approx::assert_abs_diff_eq;

    #[test]
    fn population_hand_case() {
        let one = DenseMatrix::from_element(1, 1, 1.0);
        let spec = GaussianCISpec::new(one.clone(), one.clone(), 1.0, 1.0, one).unwrap();
        let b = gaussian_ci_population(&spec);
        assert_eq!(b.sigma_x1x1[(0, 0)], 2.0);
        assert_eq!(b.sigma_x1x2[(0, 0)], 1.0);
    }

    #[test]
    fn zero_loading_decouples_views() {
        let spec = GaussianCISpec::new(
            DenseMatrix::zeros(3, 2),
            DenseMatrix::from_element(2, 2, 1.0),
            1.0,
            1.0,
            DenseMatrix::identity(2, 2),
        )
        .unwrap();
        assert_eq!(gaussian_ci_population(&spec).sigma_x1x2, DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn gaussian_sample_matches_population() {
        let spec = GaussianCISpec::random(3, 2, 2, 0.8, 0.6, 1).unwrap();
        let pop = gaussian_ci_population(&spec);
        let n = 100_000;
        let data = gaussian_ci_sample(&spec, n, 2).unwrap();
        let emp = CovarianceBlocks::from_samples(&data.x1, data.x2.as_ref().unwrap(), data.y.as_ref().unwrap(), false)
            .unwrap();
        // entrywise SE of a second moment is at most sqrt(Σ_aa Σ_bb + Σ_ab²)/√n
        let joint_pop = pop.joint();
        let joint_emp = emp.joint();
        for i in 0..joint_pop.nrows() {
            for j in 0..joint_pop.ncols() {
                let var = joint_pop[(i, i)] * joint_pop[(j, j)] + joint_pop[(i, j)].powi(2);
                let se = (var / n as f64).sqrt();
                assert!((joint_emp[(i, j)] - joint_pop[(i, j)]).abs() <= 5.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn gaussian_sample_is_seeded() {
        let spec = GaussianCISpec::random(2, 2, 1, 1.0, 1.0, 3).unwrap();
        assert_eq!(gaussian_ci_sample(&spec, 50, 9).unwrap(), gaussian_ci_sample(&spec, 50, 9).unwrap());
        assert_ne!(gaussian_ci_sample(&spec, 50, 9).unwrap(), gaussian_ci_sample(&spec, 50, 10).unwrap());
    }

    #[test]
    fn mixture_alpha_one_copies_x1() {
        for (d1, d2) in [(3, 5), (5, 3), (4, 4)] {
            let spec = MixtureSpec::random(3, d1, d2, 1.0, 4).unwrap();
            let data = mixture_sample(&spec, 20, 5).unwrap();
            assert_eq!(data.x2.unwrap(), pad_or_truncate(&data.x1, d2));
        }
    }

    #[test]
    fn mixture_alpha_zero_is_conditionally_uncorrelated() {
        let spec = MixtureSpec::random(3, 2, 2, 0.0, 6).unwrap();
        let n = 60_000;
        let data = mixture_sample(&spec, n, 7).unwrap();
        let y = data.y.as_ref().unwrap();
        let x2 = data.x2.as_ref().unwrap();
        let c = |a: &DenseMatrix, b: &DenseMatrix| empirical_cov(a, b, true).unwrap();
        let p = partial_cov(&c(&data.x1, x2), &c(&data.x1, y), &c(y, y), &c(y, x2)).unwrap();
        // one-hot Y has a singular centered covariance
        assert!(p.degenerate_conditioning);
        // unit residual variances, so each entry has SE ≈ 1/√n
        assert!(p.matrix.norm() <= 5.0 * 2.0 / (n as f64).sqrt(), "{}", p.matrix.norm());
    }

    #[test]
    fn mixture_class_means_match_centers() {
        let c1 = DenseMatrix::from_row_slice(2, 1, &[1.0, 7.0]);
        let spec = MixtureSpec::new(c1.clone(), DenseMatrix::zeros(2, 1), 0.0).unwrap();
        let data = mixture_sample(&spec, 20_000, 8).unwrap();
        let labels = labels_from_one_hot(data.y.as_ref().unwrap());
        for y in 0..2 {
            let vals: Vec<f64> = labels.iter().zip(data.x1.column(0).iter()).filter(|(l, _)| **l == y).map(|(_, v)| *v).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((mean - c1[(y, 0)]).abs() <= 5.0 / (vals.len() as f64).sqrt());
        }
    }

    #[test]
    fn posterior_symmetry_and_confidence() {
        let c1 = DenseMatrix::from_row_slice(2, 2, &[0.0, 0.0, 20.0, 0.0]);
        let spec = MixtureSpec::new(c1, DenseMatrix::zeros(2, 1), 0.0).unwrap();
        let mid = mixture_posterior(&spec, &DenseVector::from_vec(vec![10.0, 3.0]));
        assert_abs_diff_eq!(mid[0], 0.5, epsilon = 1e-15);
        let at = mixture_posterior(&spec, &DenseVector::from_vec(vec![20.0, 0.0]));
        assert!(at[1] >= 0.99);
    }

    #[test]
    fn posterior_matches_density_ratio() {
        let spec = MixtureSpec::random(4, 3, 2, 0.0, 11).unwrap();
        let x = DenseVector::from_vec(vec![3.0, 4.0, 5.0]);
        let p = mixture_posterior(&spec, &x);
        let dens: Vec<f64> = (0..4)
            .map(|y| (-0.5 * (spec.centers1.row(y).transpose() - &x).norm_squared()).exp())
            .collect();
        let total: f64 = dens.iter().sum();
        for y in 0..4 {
            assert_abs_diff_eq!(p[y], dens[y] / total, epsilon = 1e-12);
        }
    }

    #[test]
    fn discrete_joint_ci_and_random() {
        for ci in [false, true] {
            let j = discrete_joint_random((4, 5, 3), 3, ci).unwrap();
            assert_abs_diff_eq!(j.p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(j.p1().iter().all(|&v| v > 0.0));
        }
        let j = discrete_joint_random((3, 3, 2), 4, true).unwrap();
        let py = j.py();
        let p1y = j.p1y();
        let p2y = j.p2y();
        for a in 0..3 {
            for b in 0..3 {
                for y in 0..2 {
                    assert_abs_diff_eq!(j.prob(a, b, y), p1y[(a, y)] * p2y[(b, y)] / py[y], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn zero_marginal_is_rejected() {
        let p12 = DenseMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(DiscreteJoint::from_pair(&p12), Err(Error::ZeroMarginal(_))));
    }
}
