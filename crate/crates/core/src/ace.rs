//! The conditional-expectation operator of a finite joint, its low-rank
//! label-factored counterpart, and the ACE solver for its top singular
//! functions.
//!
//! Functions on `X₁` are vectors indexed by symbol and measured in `L²(p₁)`;
//! likewise on `X₂`. Singular decompositions go through the symmetrised matrix
//! `K = D₁^{1/2}·T·D₂^{1/2}`, whose Euclidean SVD is the weighted SVD of `T`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::generators::DiscreteJoint;
use crate::linalg::{pinv, rank, spectral_norm, svd, DenseMatrix, DenseVector, DEFAULT_RANK_TOL};
use crate::rng::{derive_seed, rng_from_seed};
use crate::ssl::least_squares;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// `T(x₁, x₂) = p(x₁, x₂) / (p(x₁)·p(x₂))`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorT {
    pub t: DenseMatrix,
    pub d1: DenseVector,
    pub d2: DenseVector,
    /// `D₁^{1/2}·T·D₂^{1/2}`.
    pub symmetrized: DenseMatrix,
}

impl OperatorT {
    /// `(T g)(x₁) = E[g(X₂) | X₁ = x₁]`.
    pub fn apply(&self, g: &DenseVector) -> DenseVector {
        &self.t * g.component_mul(&self.d2)
    }

    /// `(Tᵀ h)(x₂) = E[h(X₁) | X₂ = x₂]`.
    pub fn apply_adjoint(&self, h: &DenseVector) -> DenseVector {
        self.t.tr_mul(&h.component_mul(&self.d1))
    }

    /// Singular values of `T` in the weighted geometry.
    pub fn singular_values(&self) -> DenseVector {
        svd(&self.symmetrized).singular_values
    }
}

fn sqrt_weights(d: &DenseVector) -> DenseVector {
    d.map(f64::sqrt)
}

/// `D₁^{1/2}·M·D₂^{1/2}`.
fn weight_sym(m: &DenseMatrix, d1: &DenseVector, d2: &DenseVector) -> DenseMatrix {
    let s1 = sqrt_weights(d1);
    let s2 = sqrt_weights(d2);
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |a, b| s1[a] * m[(a, b)] * s2[b])
}

pub fn build_operator_t(joint: &DiscreteJoint) -> Result<OperatorT> {
    let p1 = joint.p1();
    let p2 = joint.p2();
    if p1.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroMarginal("p(x1)"));
    }
    if p2.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroMarginal("p(x2)"));
    }
    let p12 = joint.p12();
    let t = DenseMatrix::from_fn(joint.n1, joint.n2, |a, b| p12[(a, b)] / (p1[a] * p2[b]));
    let symmetrized = DenseMatrix::from_fn(joint.n1, joint.n2, |a, b| p12[(a, b)] / (p1[a] * p2[b]).sqrt());
    Ok(OperatorT {
        t,
        d1: p1,
        d2: p2,
        symmetrized,
    })
}

/// `L(x₁, x₂) = Σ_y p(x₁|y)·p(x₂|y)·p(y) / (p(x₁)·p(x₂))`.
pub fn build_operator_l(joint: &DiscreteJoint) -> Result<DenseMatrix> {
    let p1 = joint.p1();
    let p2 = joint.p2();
    let py = joint.py();
    if py.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroMarginal("p(y)"));
    }
    let p1y = joint.p1y();
    let p2y = joint.p2y();
    Ok(DenseMatrix::from_fn(joint.n1, joint.n2, |a, b| {
        (0..joint.ny).map(|y| p1y[(a, y)] * p2y[(b, y)] / py[y]).sum::<f64>() / (p1[a] * p2[b])
    }))
}

/// Weighted operator norm of `T − L`.
pub fn eps_ci_tilde(joint: &DiscreteJoint) -> Result<f64> {
    let op = build_operator_t(joint)?;
    let l = build_operator_l(joint)?;
    Ok(spectral_norm(&weight_sym(&(&op.t - l), &op.d1, &op.d2)))
}

/// Top-k nonconstant singular function pairs of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AceSolution {
    /// `|X₁| × k`, orthonormal and centered in `L²(p₁)`.
    pub psi: DenseMatrix,
    /// `|X₂| × k`, orthonormal and centered in `L²(p₂)`.
    pub eta: DenseMatrix,
    /// `σ_i = E[ψ_i(X₁)·η_i(X₂)]`, non-increasing.
    pub sigmas: DenseVector,
    pub iterations: usize,
    pub converged: bool,
}

impl AceSolution {
    pub fn k(&self) -> usize {
        self.sigmas.len()
    }
}

/// Gram–Schmidt (two passes) against `fixed` and the earlier columns.
/// Columns that vanish are replaced by standard basis vectors orthogonalised
/// the same way, so the result always has orthonormal columns.
fn orthonormalize(m: &DenseMatrix, fixed: &DenseVector) -> DenseMatrix {
    let n = m.nrows();
    let mut out = DenseMatrix::zeros(n, m.ncols());
    let mut next_basis = 0;
    for j in 0..m.ncols() {
        let scale = m.column(j).norm();
        let mut candidate = m.column(j).into_owned();
        let mut accepted = false;
        loop {
            let reference = candidate.norm().max(scale);
            for _ in 0..2 {
                let c = fixed.dot(&candidate);
                candidate.axpy(-c, fixed, 1.0);
                for i in 0..j {
                    let col = out.column(i);
                    let c = col.dot(&candidate);
                    candidate.axpy(-c, &col.into_owned(), 1.0);
                }
            }
            let norm = candidate.norm();
            if reference > 0.0 && norm > 1e-10 * reference && norm > 1e-300 {
                out.set_column(j, &(candidate / norm));
                accepted = true;
                break;
            }
            if next_basis >= n {
                break;
            }
            candidate = DenseVector::zeros(n);
            candidate[next_basis] = 1.0;
            next_basis += 1;
        }
        debug_assert!(accepted, "ran out of basis vectors");
    }
    out
}

/// Generalised ACE: alternate `ψ ← E[η|X₁]`, `η ← E[ψ|X₂]`, each followed by
/// centering and weighted orthonormalisation, on an oversampled block; a
/// Rayleigh–Ritz rotation after every sweep aligns the pairs with the
/// singular directions.
pub fn ace_fit(joint: &DiscreteJoint, k: usize, max_iters: usize, tol: f64) -> Result<AceSolution> {
    let (n1, n2) = (joint.n1, joint.n2);
    if k == 0 || k + 1 > n1.min(n2) {
        return Err(Error::InvalidArgument(format!("need 1 ≤ k and k + 1 ≤ min(|X1|, |X2|); got k={k}, sizes {n1}x{n2}")));
    }
    let op = build_operator_t(joint)?;
    let s1 = sqrt_weights(&op.d1);
    let s2 = sqrt_weights(&op.d2);
    let kmat = &op.symmetrized;
    let block = (2 * k).max(k + 4).min(n1.min(n2) - 1);

    let mut rng = rng_from_seed(derive_seed(0x0ACE, &[n1 as u64, n2 as u64, k as u64]));
    let init = DenseMatrix::from_fn(n2, block, |_, _| rng.sample(StandardNormal));
    let mut v = orthonormalize(&init, &s2);
    let mut u = DenseMatrix::zeros(n1, block);
    let mut sigmas = DenseVector::zeros(block);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        u = orthonormalize(&(kmat * &v), &s1);
        v = orthonormalize(&kmat.tr_mul(&u), &s2);
        let ritz = svd(&u.tr_mul(&(kmat * &v)));
        u = &u * &ritz.u;
        v = &v * &ritz.v;
        let change = (ritz.singular_values.rows(0, k) - sigmas.rows(0, k)).amax();
        sigmas = ritz.singular_values;
        if change < tol {
            converged = true;
            break;
        }
    }

    let mut psi = DenseMatrix::zeros(n1, k);
    let mut eta = DenseMatrix::zeros(n2, k);
    for i in 0..k {
        psi.set_column(i, &u.column(i).component_div(&s1));
        eta.set_column(i, &v.column(i).component_div(&s2));
    }
    Ok(AceSolution {
        psi,
        eta,
        sigmas: sigmas.rows(0, k).into_owned(),
        iterations,
        converged,
    })
}

/// The k-th maximal correlation, i.e. the `(k+1)`-th weighted singular value
/// of `T`.
pub fn maximal_correlation(joint: &DiscreteJoint, k: usize) -> Result<f64> {
    if k == 0 || k + 1 > joint.n1.min(joint.n2) {
        return Err(Error::InvalidArgument(format!("maximal correlation index {k} out of range")));
    }
    let s = build_operator_t(joint)?.singular_values();
    Ok(s[k].clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AceCcaObjectives {
    /// `E‖ψ(X₁) − η(X₂)‖²`.
    pub l_ace: f64,
    /// `Σ_i E[ψ_i(X₁)·η_i(X₂)]`.
    pub l_cca: f64,
}

const CONSTRAINT_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-10;

fn weighted_gram(f: &DenseMatrix, w: &DenseVector) -> DenseMatrix {
    let mut fw = f.clone();
    for (i, mut row) in fw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    f.tr_mul(&fw)
}

/// Evaluates both objectives for `(ψ, η)` and checks
/// `l_ace = 2k − 2·l_cca`. Fails if `Σ_ψψ` or `Σ_ηη` is not the identity.
pub fn ace_cca_objectives(psi: &DenseMatrix, eta: &DenseMatrix, joint: &DiscreteJoint) -> Result<AceCcaObjectives> {
    let k = psi.ncols();
    if eta.ncols() != k || psi.nrows() != joint.n1 || eta.nrows() != joint.n2 {
        return Err(crate::error::dim_err(
            "ace objectives",
            format!("{}x{k}, {}x{k}", joint.n1, joint.n2),
            format!("{:?}, {:?}", psi.shape(), eta.shape()),
        ));
    }
    let eye = DenseMatrix::identity(k, k);
    let dev_psi = (weighted_gram(psi, &joint.p1()) - &eye).amax();
    let dev_eta = (weighted_gram(eta, &joint.p2()) - &eye).amax();
    if dev_psi > CONSTRAINT_TOL || dev_eta > CONSTRAINT_TOL {
        return Err(Error::Constraint(format!(
            "features not orthonormal (deviation {:.3e}, {:.3e})",
            dev_psi, dev_eta
        )));
    }
    let p12 = joint.p12();
    let mut l_ace = 0.0;
    let mut l_cca = 0.0;
    for a in 0..joint.n1 {
        for b in 0..joint.n2 {
            let p = p12[(a, b)];
            let (pa, eb) = (psi.row(a), eta.row(b));
            l_ace += p * (pa - eb).norm_squared();
            l_cca += p * pa.dot(&eb);
        }
    }
    let gap = (l_ace - (2.0 * k as f64 - 2.0 * l_cca)).abs();
    if gap > IDENTITY_TOL {
        return Err(Error::Constraint(format!("ACE/CCA identity off by {gap:e}")));
    }
    Ok(AceCcaObjectives { l_ace, l_cca })
}

pub fn ace_objective_identity_check(solution: &AceSolution, joint: &DiscreteJoint) -> Result<AceCcaObjectives> {
    ace_cca_objectives(&solution.psi, &solution.eta, joint)
}

/// Which `g_y` on `X₂` stands in for the label in the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GChoice {
    /// Minimum-norm `g_y` with `E[g_y(X₂)|Y=y'] = 1(y = y')`.
    PinvOfA,
    /// `g_y = 1(Bayes classifier on X₂ predicts y)`.
    BayesIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApxBound {
    /// Bound with `T_k` assembled from the supplied solution.
    pub bound: f64,
    /// Bound with `T_k` from the exact SVD of `T`.
    pub bound_exact_svd: f64,
    /// `Σ_y min E(f*_y(X₁) − c_y − w_yᵀψ(X₁))²`.
    pub actual: f64,
    /// The `PinvOfA` system was rank deficient.
    pub degenerate: bool,
}

impl ApxBound {
    pub fn holds(&self) -> bool {
        self.actual <= self.bound + 1e-8
    }
}

fn l2_sq(h: &DenseVector, w: &DenseVector) -> f64 {
    h.iter().zip(w.iter()).map(|(v, p)| p * v * v).sum()
}

/// `T_k g = E[g]·1 + Σ_i σ_i⟨η_i, g⟩ψ_i`.
fn truncated_apply(psi: &DenseMatrix, eta: &DenseMatrix, sigmas: &DenseVector, p2: &DenseVector, g: &DenseVector) -> DenseVector {
    let gw = g.component_mul(p2);
    let mut out = DenseVector::from_element(psi.nrows(), gw.sum());
    for i in 0..sigmas.len() {
        out.axpy(sigmas[i] * eta.column(i).dot(&gw), &psi.column(i).into_owned(), 1.0);
    }
    out
}

fn g_functions(joint: &DiscreteJoint, choice: GChoice) -> (DenseMatrix, bool) {
    let p2 = joint.p2();
    let py = joint.py();
    let p2y = joint.p2y();
    match choice {
        GChoice::PinvOfA => {
            let a_tilde = DenseMatrix::from_fn(joint.ny, joint.n2, |y, b| p2y[(b, y)] / (py[y] * p2[b]).sqrt());
            let r = rank(&a_tilde, DEFAULT_RANK_TOL);
            let rhs = DenseMatrix::from_diagonal(&py.map(f64::sqrt));
            let g_tilde = pinv(&a_tilde, DEFAULT_RANK_TOL) * rhs;
            let g = DenseMatrix::from_fn(joint.n2, joint.ny, |b, y| g_tilde[(b, y)] / p2[b].sqrt());
            (g, r < joint.ny)
        }
        GChoice::BayesIndicator => {
            let mut g = DenseMatrix::zeros(joint.n2, joint.ny);
            for b in 0..joint.n2 {
                let best = p2y.row(b).transpose().argmax().0;
                g[(b, best)] = 1.0;
            }
            (g, false)
        }
    }
}

/// Weighted least-squares residual of each `f*_y` on `[1, ψ]`, summed.
fn projection_residual(psi: &DenseMatrix, f_star: &DenseMatrix, p1: &DenseVector) -> Result<f64> {
    let n1 = psi.nrows();
    let sw = sqrt_weights(p1);
    let mut design = DenseMatrix::zeros(n1, psi.ncols() + 1);
    for a in 0..n1 {
        design[(a, 0)] = sw[a];
        for i in 0..psi.ncols() {
            design[(a, i + 1)] = sw[a] * psi[(a, i)];
        }
    }
    let target = DenseMatrix::from_fn(n1, f_star.ncols(), |a, y| sw[a] * f_star[(a, y)]);
    let coef = least_squares(&design, &target, 0.0)?;
    Ok((target - design * coef).norm_squared())
}

/// Approximation error of the representation `[1, ψ]` for `f*(x₁) = P(Y|x₁)`
/// and the bound `Σ_y 2(‖(T_k − L)g_y‖² + ‖L g_y − f*_y‖²)`.
pub fn apx_error_bound_eval(solution: &AceSolution, joint: &DiscreteJoint, g_choice: GChoice) -> Result<ApxBound> {
    let k = solution.k();
    let op = build_operator_t(joint)?;
    let l = build_operator_l(joint)?;
    let p1 = op.d1.clone();
    let p2 = op.d2.clone();
    let p1y = joint.p1y();
    let f_star = DenseMatrix::from_fn(joint.n1, joint.ny, |a, y| p1y[(a, y)] / p1[a]);
    let (g, degenerate) = g_functions(joint, g_choice);

    let exact = svd(&op.symmetrized);
    let kk = k.min(exact.singular_values.len().saturating_sub(1));
    let s1 = sqrt_weights(&p1);
    let s2 = sqrt_weights(&p2);
    let psi_exact = DenseMatrix::from_fn(joint.n1, kk, |a, i| exact.u[(a, i + 1)] / s1[a]);
    let eta_exact = DenseMatrix::from_fn(joint.n2, kk, |b, i| exact.v[(b, i + 1)] / s2[b]);
    let sig_exact = exact.singular_values.rows(1, kk).into_owned();

    let mut bound = 0.0;
    let mut bound_exact = 0.0;
    for y in 0..joint.ny {
        let gy = g.column(y).into_owned();
        let lg = &l * gy.component_mul(&p2);
        let fit_term = l2_sq(&(&lg - f_star.column(y)), &p1);
        let tk = truncated_apply(&solution.psi, &solution.eta, &solution.sigmas, &p2, &gy);
        let tk_exact = truncated_apply(&psi_exact, &eta_exact, &sig_exact, &p2, &gy);
        bound += 2.0 * (l2_sq(&(tk - &lg), &p1) + fit_term);
        bound_exact += 2.0 * (l2_sq(&(tk_exact - &lg), &p1) + fit_term);
    }
    Ok(ApxBound {
        bound,
        bound_exact_svd: bound_exact,
        actual: projection_residual(&solution.psi, &f_star, &p1)?,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::discrete_joint_random;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_joint_gives_ones() {
        let p1 = DenseVector::from_vec(vec![0.2, 0.3, 0.5]);
        let p2 = DenseVector::from_vec(vec![0.6, 0.4]);
        let op = build_operator_t(&DiscreteJoint::product(&p1, &p2).unwrap()).unwrap();
        assert_abs_diff_eq!(op.t, DenseMatrix::from_element(3, 2, 1.0), epsilon = 1e-14);
        let s = op.singular_values();
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-12);
        assert!(s[1] < 1e-12);
    }

    #[test]
    fn identity_joint_is_scaled_identity() {
        let op = build_operator_t(&DiscreteJoint::identity(4).unwrap()).unwrap();
        assert_abs_diff_eq!(op.t, DenseMatrix::identity(4, 4) * 4.0, epsilon = 1e-12);
        for s in op.singular_values().iter() {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_expectation_of_constant_is_constant() {
        let j = discrete_joint_random((5, 6, 1), 3, false).unwrap();
        let op = build_operator_t(&j).unwrap();
        let ones = op.apply(&DenseVector::from_element(6, 1.0));
        assert_abs_diff_eq!(ones, DenseVector::from_element(5, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn l_matches_t_under_ci_and_is_ones_for_one_class() {
        let ci = discrete_joint_random((4, 5, 2), 1, true).unwrap();
        let op = build_operator_t(&ci).unwrap();
        assert_abs_diff_eq!(build_operator_l(&ci).unwrap(), op.t, epsilon = 1e-12);
        assert!(eps_ci_tilde(&ci).unwrap() < 1e-12);
        let one = discrete_joint_random((3, 3, 1), 2, false).unwrap();
        assert_abs_diff_eq!(build_operator_l(&one).unwrap(), DenseMatrix::from_element(3, 3, 1.0), epsilon = 1e-12);
        let rnd = discrete_joint_random((5, 5, 2), 4, false).unwrap();
        assert!(rank(&build_operator_l(&rnd).unwrap(), 1e-10) <= 2);
        assert!(eps_ci_tilde(&rnd).unwrap() > 0.0);
    }

    #[test]
    fn ace_matches_dense_svd() {
        for seed in 0..10 {
            let j = discrete_joint_random((6, 7, 3), seed, false).unwrap();
            let sol = ace_fit(&j, 3, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
            assert!(sol.converged);
            let s = build_operator_t(&j).unwrap().singular_values();
            for i in 0..3 {
                assert_abs_diff_eq!(sol.sigmas[i], s[i + 1], epsilon = 1e-8);
            }
            ace_objective_identity_check(&sol, &j).unwrap();
        }
    }

    #[test]
    fn ace_on_large_support_uses_partial_block() {
        let j = discrete_joint_random((30, 25, 4), 7, false).unwrap();
        let sol = ace_fit(&j, 2, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        assert!(sol.converged);
        let s = build_operator_t(&j).unwrap().singular_values();
        assert_abs_diff_eq!(sol.sigmas[0], s[1], epsilon = 1e-8);
        assert_abs_diff_eq!(sol.sigmas[1], s[2], epsilon = 1e-8);
    }

    #[test]
    fn ace_product_and_permutation() {
        let p = DenseVector::from_vec(vec![0.25, 0.25, 0.5]);
        let prod = DiscreteJoint::product(&p, &p).unwrap();
        let sol = ace_fit(&prod, 1, 100, DEFAULT_TOL).unwrap();
        assert!(sol.sigmas[0] < 1e-12);
        let obj = ace_objective_identity_check(&sol, &prod).unwrap();
        assert_abs_diff_eq!(obj.l_ace, 2.0, epsilon = 1e-10);

        let perm = DiscreteJoint::identity(5).unwrap();
        let sol = ace_fit(&perm, 4, 100, DEFAULT_TOL).unwrap();
        for s in sol.sigmas.iter() {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn ace_rejects_oversized_k() {
        let j = discrete_joint_random((3, 4, 1), 1, false).unwrap();
        assert!(ace_fit(&j, 3, 10, DEFAULT_TOL).is_err());
        assert!(maximal_correlation(&j, 3).is_err());
    }

    #[test]
    fn binary_symmetric_channel() {
        let q = 0.2;
        let p12 = DenseMatrix::from_row_slice(2, 2, &[(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0]);
        let j = DiscreteJoint::from_pair(&p12).unwrap();
        assert_abs_diff_eq!(maximal_correlation(&j, 1).unwrap(), (1.0 - 2.0 * q).abs(), epsilon = 1e-12);
    }

    #[test]
    fn infeasible_features_are_rejected() {
        let j = discrete_joint_random((3, 3, 1), 1, false).unwrap();
        let bad = DenseMatrix::from_element(3, 1, 2.0);
        assert!(matches!(ace_cca_objectives(&bad, &bad, &j), Err(Error::Constraint(_))));
    }

    #[test]
    fn bound_is_tight_under_exact_ci() {
        let j = discrete_joint_random((5, 6, 3), 9, true).unwrap();
        let sol = ace_fit(&j, 3, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        let b = apx_error_bound_eval(&sol, &j, GChoice::PinvOfA).unwrap();
        assert!(!b.degenerate);
        assert!(b.actual <= 1e-8, "{}", b.actual);
        assert!(b.holds());
    }

    #[test]
    fn bound_holds_on_random_joints() {
        for seed in 0..20 {
            let j = discrete_joint_random((5, 6, 3), 100 + seed, false).unwrap();
            let sol = ace_fit(&j, 2, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
            for choice in [GChoice::PinvOfA, GChoice::BayesIndicator] {
                let b = apx_error_bound_eval(&sol, &j, choice).unwrap();
                assert!(b.holds(), "{seed} {choice:?} {b:?}");
            }
        }
    }
}
