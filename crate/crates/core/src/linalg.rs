//! Dense linear algebra and covariance primitives.
//!
//! Matrices are `nalgebra` dynamic matrices. Everything here is a pure
//! function of its inputs; SVD and eigen outputs are put into a canonical
//! order and sign so repeated calls produce identical bits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Relative singular-value cutoff used when no tolerance is supplied.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-10;
const SIGN_EPS: f64 = 1e-12;

/// Builds a matrix from row-major entries, checking shape and finiteness.
pub fn matrix_from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<DenseMatrix> {
    if rows * cols != entries.len() {
        return Err(dim_err("matrix_from_rows", rows * cols, entries.len()));
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix_from_rows"));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, entries))
}

/// Row-major copy of the entries.
pub fn to_row_major(m: &DenseMatrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn ensure_finite(m: &DenseMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn max_asymmetry(m: &DenseMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Flips the sign of column `j` of `a` (and of `b`, if given) so that the first
/// entry of `a[:, j]` with magnitude above a small threshold is positive.
fn canonical_sign(a: &mut DenseMatrix, mut b: Option<&mut DenseMatrix>) {
    for j in 0..a.ncols() {
        let col = a.column(j);
        let scale = col.amax();
        let lead = col.iter().copied().find(|v| v.abs() > SIGN_EPS.max(1e-8 * scale));
        if matches!(lead, Some(v) if v < 0.0) {
            a.column_mut(j).neg_mut();
            if let Some(b) = b.as_deref_mut() {
                b.column_mut(j).neg_mut();
            }
        }
    }
}

/// Thin SVD `m = u · diag(s) · vᵀ` with singular values sorted in
/// non-increasing order and the leading nonzero entry of each left singular
/// vector positive.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: DenseVector,
    pub v: DenseMatrix,
}

pub fn svd(m: &DenseMatrix) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd {
            u: DenseMatrix::zeros(r, 0),
            singular_values: DenseVector::zeros(0),
            v: DenseMatrix::zeros(c, 0),
        };
    }
    let (u_raw, s_raw, v_raw) = if r >= c {
        jacobi_svd(m.clone())
    } else {
        let (v, s, u) = jacobi_svd(m.transpose());
        (u, s, v)
    };
    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps column order for exact ties
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));
    let mut u = DenseMatrix::zeros(r, k);
    let mut v = DenseMatrix::zeros(c, k);
    let mut s = DenseVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &v_raw.column(src));
        s[dst] = s_raw[src];
    }
    canonical_sign(&mut u, Some(&mut v));
    Svd {
        u,
        singular_values: s,
        v,
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD of a tall matrix (`rows ≥ cols`), unsorted.
fn jacobi_svd(mut a: DenseMatrix) -> (DenseMatrix, DenseVector, DenseMatrix) {
    let (r, n) = a.shape();
    let mut v = DenseMatrix::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut a, p, q, cs, sn);
                rotate_columns(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DenseVector::from_iterator(n, a.column_iter().map(|col| col.norm()));
    let top = s.max();
    let mut u = DenseMatrix::zeros(r, n);
    let mut missing = Vec::new();
    for j in 0..n {
        if top > 0.0 && s[j] > top * f64::EPSILON * n as f64 {
            u.set_column(j, &(a.column(j) / s[j]));
        } else {
            missing.push(j);
        }
    }
    // complete numerically null directions with an orthonormal basis
    let mut e = 0;
    for j in missing {
        while e < r {
            let mut cand = DenseVector::zeros(r);
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for i in 0..n {
                    let ui = u.column(i);
                    let d = ui.dot(&cand);
                    cand.axpy(-d, &ui, 1.0);
                }
            }
            let nrm = cand.norm();
            if nrm > 0.5 {
                u.set_column(j, &(cand / nrm));
                break;
            }
        }
    }
    (u, s, v)
}

fn rotate_columns(m: &mut DenseMatrix, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = cs * x - sn * y;
        m[(i, q)] = sn * x + cs * y;
    }
}

pub fn singular_values(m: &DenseMatrix) -> DenseVector {
    svd(m).singular_values
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing and
/// canonical eigenvector signs.
pub fn sym_eigen(m: &DenseMatrix) -> (DenseVector, DenseMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (DenseVector::zeros(0), DenseMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vals = DenseVector::zeros(n);
    let mut vecs = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = eig.eigenvalues[src];
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    canonical_sign(&mut vecs, None);
    (vals, vecs)
}

pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.norm()
}

/// Numerical rank: number of singular values above `rank_tol · σ_max`.
pub fn rank(m: &DenseMatrix, rank_tol: f64) -> usize {
    let s = singular_values(m);
    match s.iter().next() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rank_tol * top).count(),
        _ => 0,
    }
}

/// Moore–Penrose pseudo-inverse; singular values at or below
/// `rank_tol · σ_max` are treated as zero.
pub fn pinv(m: &DenseMatrix, rank_tol: f64) -> DenseMatrix {
    let (r, c) = m.shape();
    let Svd {
        u,
        singular_values: s,
        v,
    } = svd(m);
    let top = s.iter().copied().next().unwrap_or(0.0);
    let mut out = DenseMatrix::zeros(c, r);
    if top <= 0.0 {
        return out;
    }
    for i in 0..s.len() {
        if s[i] > rank_tol * top {
            out += (v.column(i) * u.column(i).transpose()) / s[i];
        }
    }
    out
}

/// `M^{-1/2}` restricted to the positive eigenspace of a symmetric PSD matrix.
pub fn inv_sqrt(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    check_symmetric(m)?;
    let n = m.nrows();
    let (vals, vecs) = sym_eigen(m);
    let mut out = DenseMatrix::zeros(n, n);
    let top = vals.iter().copied().next().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(out);
    }
    for i in 0..n {
        if vals[i] > rank_tol * top {
            let col = vecs.column(i);
            out += (col * col.transpose()) / vals[i].sqrt();
        }
    }
    Ok(out)
}

/// Solves `a · x = b` for symmetric positive definite `a`, falling back to
/// the pseudo-inverse when the Cholesky factorisation fails. The flag reports
/// whether the fallback was taken.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> (DenseMatrix, bool) {
    if let Some(ch) = symmetrize(a).cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return (x, false);
        }
    }
    (pinv(a, DEFAULT_RANK_TOL) * b, true)
}

/// True when the smallest eigenvalue of a symmetric matrix is at most
/// `rank_tol` times the largest (or the matrix is zero).
pub fn is_degenerate_psd(m: &DenseMatrix, rank_tol: f64) -> bool {
    if m.nrows() == 0 {
        return false;
    }
    let (vals, _) = sym_eigen(m);
    let top = vals[0];
    let bottom = vals[vals.len() - 1];
    top <= 0.0 || bottom <= rank_tol * top
}

fn column_means(m: &DenseMatrix) -> DenseVector {
    let n = m.nrows().max(1) as f64;
    DenseVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtracts column means; returns the centered copy and the means.
pub fn center_columns(m: &DenseMatrix) -> (DenseMatrix, DenseVector) {
    let means = column_means(m);
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (out, means)
}

/// `(1/n)·AᵀB`, optionally after centering both inputs column-wise.
pub fn empirical_cov(a: &DenseMatrix, b: &DenseMatrix, center: bool) -> Result<DenseMatrix> {
    if a.nrows() != b.nrows() {
        return Err(dim_err("empirical_cov rows", a.nrows(), b.nrows()));
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidArgument("empirical_cov needs at least one row".into()));
    }
    let n = a.nrows() as f64;
    let out = if center {
        let (ac, _) = center_columns(a);
        let (bc, _) = center_columns(b);
        ac.tr_mul(&bc) / n
    } else {
        a.tr_mul(b) / n
    };
    Ok(out)
}

/// Partial covariance `Σ_{AB|Z}` plus a flag telling whether `Σ_{ZZ}` had to
/// be pseudo-inverted.
#[derive(Debug, Clone)]
pub struct PartialCov {
    pub matrix: DenseMatrix,
    pub degenerate_conditioning: bool,
}

/// `Σ_{AB} − Σ_{AZ}·Σ_{ZZ}⁻¹·Σ_{ZB}`.
pub fn partial_cov(
    sigma_ab: &DenseMatrix,
    sigma_az: &DenseMatrix,
    sigma_zz: &DenseMatrix,
    sigma_zb: &DenseMatrix,
) -> Result<PartialCov> {
    let (p, q) = sigma_ab.shape();
    let m = sigma_zz.nrows();
    if sigma_az.shape() != (p, m) {
        return Err(dim_err("partial_cov Σ_AZ", format!("{p}x{m}"), format!("{:?}", sigma_az.shape())));
    }
    if sigma_zz.shape() != (m, m) {
        return Err(dim_err("partial_cov Σ_ZZ", format!("{m}x{m}"), format!("{:?}", sigma_zz.shape())));
    }
    if sigma_zb.shape() != (m, q) {
        return Err(dim_err("partial_cov Σ_ZB", format!("{m}x{q}"), format!("{:?}", sigma_zb.shape())));
    }
    if m == 0 {
        return Ok(PartialCov {
            matrix: sigma_ab.clone(),
            degenerate_conditioning: false,
        });
    }
    let degenerate = is_degenerate_psd(sigma_zz, DEFAULT_RANK_TOL);
    let correction = if degenerate {
        sigma_az * pinv(sigma_zz, DEFAULT_RANK_TOL) * sigma_zb
    } else {
        let (x, fallback) = solve_spd(sigma_zz, sigma_zb);
        debug_assert!(!fallback);
        sigma_az * x
    };
    Ok(PartialCov {
        matrix: sigma_ab - correction,
        degenerate_conditioning: degenerate,
    })
}

/// Top principal directions of a sample matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    /// `d × r`, orthonormal columns.
    pub projection: DenseMatrix,
    /// Top-r singular values of `centered / √n`, non-increasing.
    pub spectrum: DenseVector,
    pub mean: DenseVector,
}

impl Pca {
    /// Coordinates of (row) samples in the principal basis.
    pub fn transform(&self, samples: &DenseMatrix) -> DenseMatrix {
        let mut c = samples.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        c * &self.projection
    }
}

pub fn pca_top_r(samples: &DenseMatrix, r: usize) -> Result<Pca> {
    let d = samples.ncols();
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!("pca rank {r} must be in 1..={d}")));
    }
    if samples.nrows() == 0 {
        return Err(Error::InvalidArgument("pca needs at least one sample".into()));
    }
    let (centered, mean) = center_columns(samples);
    let cov = centered.tr_mul(&centered) / samples.nrows() as f64;
    let (vals, vecs) = sym_eigen(&cov);
    let projection = vecs.columns(0, r).into_owned();
    let spectrum = DenseVector::from_iterator(r, vals.iter().take(r).map(|&l| l.max(0.0).sqrt()));
    Ok(Pca {
        projection,
        spectrum,
        mean,
    })
}

/// Joint second-moment blocks of `(X₁, X₂, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlocks {
    pub sigma_x1x1: DenseMatrix,
    pub sigma_x1x2: DenseMatrix,
    pub sigma_x1y: DenseMatrix,
    pub sigma_x2x2: DenseMatrix,
    pub sigma_x2y: DenseMatrix,
    pub sigma_yy: DenseMatrix,
}

impl CovarianceBlocks {
    pub fn new(
        sigma_x1x1: DenseMatrix,
        sigma_x1x2: DenseMatrix,
        sigma_x1y: DenseMatrix,
        sigma_x2x2: DenseMatrix,
        sigma_x2y: DenseMatrix,
        sigma_yy: DenseMatrix,
    ) -> Result<Self> {
        let blocks = Self {
            sigma_x1x1,
            sigma_x1x2,
            sigma_x1y,
            sigma_x2x2,
            sigma_x2y,
            sigma_yy,
        };
        blocks.validate()?;
        Ok(blocks)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.sigma_x1x1.nrows(), self.sigma_x2x2.nrows(), self.sigma_yy.nrows())
    }

    pub fn validate(&self) -> Result<()> {
        let (d1, d2, k) = self.dims();
        let expect = [
            ("Σ_X1X1", &self.sigma_x1x1, (d1, d1)),
            ("Σ_X1X2", &self.sigma_x1x2, (d1, d2)),
            ("Σ_X1Y", &self.sigma_x1y, (d1, k)),
            ("Σ_X2X2", &self.sigma_x2x2, (d2, d2)),
            ("Σ_X2Y", &self.sigma_x2y, (d2, k)),
            ("Σ_YY", &self.sigma_yy, (k, k)),
        ];
        for (name, m, shape) in expect {
            if m.shape() != shape {
                return Err(dim_err("covariance block", format!("{name} {shape:?}"), format!("{:?}", m.shape())));
            }
            ensure_finite(m, "covariance block")?;
        }
        for m in [&self.sigma_x1x1, &self.sigma_x2x2, &self.sigma_yy] {
            check_symmetric(m)?;
        }
        Ok(())
    }

    /// Blocks estimated from samples (rows are draws).
    pub fn from_samples(x1: &DenseMatrix, x2: &DenseMatrix, y: &DenseMatrix, center: bool) -> Result<Self> {
        let c = |a: &DenseMatrix, b: &DenseMatrix| empirical_cov(a, b, center);
        Ok(Self {
            sigma_x1x1: symmetrize(&c(x1, x1)?),
            sigma_x1x2: c(x1, x2)?,
            sigma_x1y: c(x1, y)?,
            sigma_x2x2: symmetrize(&c(x2, x2)?),
            sigma_x2y: c(x2, y)?,
            sigma_yy: symmetrize(&c(y, y)?),
        })
    }

    /// Splits a full `(d1+d2+k)`-square covariance into blocks.
    pub fn from_joint(joint: &DenseMatrix, d1: usize, d2: usize) -> Result<Self> {
        let n = joint.nrows();
        if !joint.is_square() || n < d1 + d2 {
            return Err(dim_err("from_joint", format!("square, ≥{}", d1 + d2), format!("{:?}", joint.shape())));
        }
        let k = n - d1 - d2;
        let b = |r0, nr, c0, nc| joint.view((r0, c0), (nr, nc)).into_owned();
        Self::new(
            b(0, d1, 0, d1),
            b(0, d1, d1, d2),
            b(0, d1, d1 + d2, k),
            b(d1, d2, d1, d2),
            b(d1, d2, d1 + d2, k),
            b(d1 + d2, k, d1 + d2, k),
        )
    }

    /// Full joint covariance in `(X₁, X₂, Y)` order.
    pub fn joint(&self) -> DenseMatrix {
        let (d1, d2, k) = self.dims();
        let n = d1 + d2 + k;
        let mut m = DenseMatrix::zeros(n, n);
        let mut put = |r0: usize, c0: usize, blk: &DenseMatrix| {
            m.view_mut((r0, c0), blk.shape()).copy_from(blk);
            m.view_mut((c0, r0), (blk.ncols(), blk.nrows())).copy_from(&blk.transpose());
        };
        put(0, 0, &self.sigma_x1x1);
        put(0, d1, &self.sigma_x1x2);
        put(0, d1 + d2, &self.sigma_x1y);
        put(d1, d1, &self.sigma_x2x2);
        put(d1, d1 + d2, &self.sigma_x2y);
        put(d1 + d2, d1 + d2, &self.sigma_yy);
        m
    }

    /// `Σ_{X₁X₂|Y}`.
    pub fn partial_x1x2_given_y(&self) -> Result<PartialCov> {
        partial_cov(
            &self.sigma_x1x2,
            &self.sigma_x1y,
            &self.sigma_yy,
            &self.sigma_x2y.transpose(),
        )
    }
}

/// Linear conditional-expectation maps; each maps a column vector of the
/// conditioning variable to the conditional mean.
#[derive(Debug, Clone)]
pub struct ConditionalMaps {
    /// `d2 × d1`: `E[X₂|X₁]`.
    pub map_x2_given_x1: DenseMatrix,
    /// `k × (d1+d2)`: `E[Y|X₁,X₂]`.
    pub map_y_given_x: DenseMatrix,
    /// `k × d1`: `E[Y|X₁]`.
    pub map_y_given_x1: DenseMatrix,
}

fn spd_inverse(m: &DenseMatrix, what: &'static str) -> Result<DenseMatrix> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    if is_degenerate_psd(m, DEFAULT_RANK_TOL) {
        return Err(Error::Singular(what));
    }
    symmetrize(m)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Singular(what))
}

/// Conditional maps computed from the precision matrix `Σ⁻¹` blocks
/// `A₁₁, A₁₂, A₂₂, ρ₁, ρ₂, B` with `ρ̄ᵢ = ρᵢ·B^{-1/2}`.
pub fn gaussian_conditionals_from_precision(blocks: &CovarianceBlocks) -> Result<ConditionalMaps> {
    blocks.validate()?;
    let (d1, d2, k) = blocks.dims();
    let precision = spd_inverse(&blocks.joint(), "joint covariance")?;
    let blk = |r0, nr, c0, nc| precision.view((r0, c0), (nr, nc)).into_owned();
    let a21 = blk(d1, d2, 0, d1);
    let a22 = blk(d1, d2, d1, d2);
    let rho1 = blk(0, d1, d1 + d2, k);
    let rho2 = blk(d1, d2, d1 + d2, k);
    let b = blk(d1 + d2, k, d1 + d2, k);

    let b_inv_sqrt = inv_sqrt(&b, DEFAULT_RANK_TOL)?;
    let rb1 = &rho1 * &b_inv_sqrt;
    let rb2 = &rho2 * &b_inv_sqrt;

    let lhs = &a22 - &rb2 * rb2.transpose();
    let rhs = &rb2 * rb1.transpose() - &a21;
    let lhs_inv = spd_inverse(&lhs, "A22 - ρ̄2ρ̄2ᵀ")?;
    let map_x2_given_x1 = lhs_inv * rhs;

    let mut rho_bar_t = DenseMatrix::zeros(k, d1 + d2);
    rho_bar_t.view_mut((0, 0), (k, d1)).copy_from(&rb1.transpose());
    rho_bar_t.view_mut((0, d1), (k, d2)).copy_from(&rb2.transpose());
    let map_y_given_x = -(&b_inv_sqrt * rho_bar_t);

    // Marginalise X₂ out of the precision: Schur complement onto (X₁, Y).
    let keep: Vec<usize> = (0..d1).chain(d1 + d2..d1 + d2 + k).collect();
    let drop: Vec<usize> = (d1..d1 + d2).collect();
    let pick = |rows: &[usize], cols: &[usize]| {
        DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| precision[(rows[i], cols[j])])
    };
    let p_kk = pick(&keep, &keep);
    let p_kd = pick(&keep, &drop);
    let p_dd = pick(&drop, &drop);
    let p_dd_inv = spd_inverse(&p_dd, "precision X2 block")?;
    let marginal = &p_kk - &p_kd * p_dd_inv * p_kd.transpose();
    let m_y1 = marginal.view((d1, 0), (k, d1)).into_owned();
    let m_yy = marginal.view((d1, d1), (k, k)).into_owned();
    let map_y_given_x1 = -(spd_inverse(&m_yy, "marginal precision Y block")? * m_y1);

    Ok(ConditionalMaps {
        map_x2_given_x1,
        map_y_given_x,
        map_y_given_x1,
    })
}

/// The same three maps from covariance blocks directly
/// (`Σ_{X₂X₁}Σ_{X₁X₁}⁻¹` and friends).
pub fn conditional_maps_from_covariance(blocks: &CovarianceBlocks) -> Result<ConditionalMaps> {
    blocks.validate()?;
    let (d1, d2, _) = blocks.dims();
    let s11_inv = spd_inverse(&blocks.sigma_x1x1, "Σ_X1X1")?;
    let joint = blocks.joint();
    let sxx = joint.view((0, 0), (d1 + d2, d1 + d2)).into_owned();
    let sxy = joint.view((0, d1 + d2), (d1 + d2, joint.ncols() - d1 - d2)).into_owned();
    let sxx_inv = spd_inverse(&sxx, "Σ_XX")?;
    Ok(ConditionalMaps {
        map_x2_given_x1: blocks.sigma_x1x2.transpose() * &s11_inv,
        map_y_given_x: sxy.transpose() * sxx_inv,
        map_y_given_x1: blocks.sigma_x1y.transpose() * s11_inv,
    })
}

/// Precision matrix of the joint covariance.
pub fn precision(blocks: &CovarianceBlocks) -> Result<DenseMatrix> {
    spd_inverse(&blocks.joint(), "joint covariance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::rng::rng_from_seed;

    fn gaussian_matrix(r: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = rng_from_seed(seed);
        DenseMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn random_psd(n: usize, seed: u64) -> DenseMatrix {
        let g = gaussian_matrix(n, n + 2, seed);
        &g * g.transpose() / (n as f64) + DenseMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn svd_reconstructs_rank_deficient_products() {
        for seed in 0..200u64 {
            let mut rng = crate::rng::rng_from_seed(seed);
            let (r, c) = (rng.random_range(2..13), rng.random_range(2..13));
            let a = DenseVector::from_fn(r, |_, _| rng.random_range(0.05..1.0)).normalize();
            let b = DenseVector::from_fn(c, |_, _| rng.random_range(0.05..1.0)).normalize();
            let m = &a * b.transpose();
            let d = svd(&m);
            let back = &d.u * DenseMatrix::from_diagonal(&d.singular_values) * d.v.transpose();
            assert!((back - &m).amax() < 1e-13, "{seed}");
            assert!((d.singular_values[0] - 1.0).abs() < 1e-13);
            assert!((d.u.tr_mul(&d.u) - DenseMatrix::identity(r.min(c), r.min(c))).amax() < 1e-12);
            assert!((d.v.tr_mul(&d.v) - DenseMatrix::identity(r.min(c), r.min(c))).amax() < 1e-12);
        }
    }

    #[test]
    fn empirical_cov_unit_variance() {
        let a = matrix_from_rows(2, 1, &[1.0, -1.0]).unwrap();
        let c = empirical_cov(&a, &a, true).unwrap();
        assert_eq!(c, DenseMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn empirical_cov_zero_input() {
        let a = DenseMatrix::zeros(6, 3);
        let b = gaussian_matrix(6, 2, 1);
        assert_eq!(empirical_cov(&a, &b, true).unwrap(), DenseMatrix::zeros(3, 2));
        assert_eq!(empirical_cov(&a, &b, false).unwrap(), DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn empirical_cov_matches_double_loop() {
        let mut rng = rng_from_seed(5);
        let a = DenseMatrix::from_fn(5, 2, |_, _| rng.random_range(-5..=5) as f64);
        let b = DenseMatrix::from_fn(5, 3, |_, _| rng.random_range(-5..=5) as f64);
        for center in [false, true] {
            let got = empirical_cov(&a, &b, center).unwrap();
            let n = 5.0;
            let mean = |m: &DenseMatrix, j: usize| if center { (0..5).map(|i| m[(i, j)]).sum::<f64>() / n } else { 0.0 };
            for p in 0..2 {
                for q in 0..3 {
                    let mut acc = 0.0;
                    for i in 0..5 {
                        acc += (a[(i, p)] - mean(&a, p)) * (b[(i, q)] - mean(&b, q));
                    }
                    assert_abs_diff_eq!(got[(p, q)], acc / n, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn empirical_cov_row_mismatch() {
        let err = empirical_cov(&DenseMatrix::zeros(3, 1), &DenseMatrix::zeros(4, 1), true);
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn partial_cov_without_cross_term() {
        let sab = gaussian_matrix(2, 3, 3);
        let p = partial_cov(&sab, &DenseMatrix::zeros(2, 2), &random_psd(2, 4), &DenseMatrix::zeros(2, 3)).unwrap();
        assert_eq!(p.matrix, sab);
        assert!(!p.degenerate_conditioning);
    }

    #[test]
    fn partial_cov_ci_by_construction() {
        // A = Ma Z + e_a, B = Mb Z + e_b with independent noises.
        let ma = gaussian_matrix(3, 2, 10);
        let mb = gaussian_matrix(4, 2, 11);
        let szz = random_psd(2, 12);
        let sab = &ma * &szz * mb.transpose();
        let saz = &ma * &szz;
        let szb = &szz * mb.transpose();
        let p = partial_cov(&sab, &saz, &szz, &szb).unwrap();
        assert!(p.matrix.norm() <= 1e-10);
    }

    #[test]
    fn partial_cov_matches_block_inverse_oracle() {
        // Σ_{AB|Z} for scalar A, B, Z equals the inverse of the (A,B) block of
        // the inverse joint, off-diagonal entry.
        let joint = random_psd(3, 20);
        let p = partial_cov(
            &joint.view((0, 1), (1, 1)).into_owned(),
            &joint.view((0, 2), (1, 1)).into_owned(),
            &joint.view((2, 2), (1, 1)).into_owned(),
            &joint.view((2, 1), (1, 1)).into_owned(),
        )
        .unwrap();
        let inv = joint.clone().try_inverse().unwrap();
        let ab_block = inv.view((0, 0), (2, 2)).into_owned().try_inverse().unwrap();
        assert_abs_diff_eq!(p.matrix[(0, 0)], ab_block[(0, 1)], epsilon = 1e-12);
    }

    #[test]
    fn partial_cov_singular_conditioning_is_flagged() {
        let szz = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = partial_cov(
            &DenseMatrix::identity(1, 1),
            &DenseMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            &szz,
            &DenseMatrix::from_row_slice(2, 1, &[0.5, 0.5]),
        )
        .unwrap();
        assert!(p.degenerate_conditioning);
        assert_abs_diff_eq!(p.matrix[(0, 0)], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn pinv_simple_cases() {
        let i3 = DenseMatrix::identity(3, 3);
        assert_abs_diff_eq!(pinv(&i3, DEFAULT_RANK_TOL), i3, epsilon = 1e-14);
        let d = DenseMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let expect = DenseMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(pinv(&d, DEFAULT_RANK_TOL), expect, epsilon = 1e-14);
        assert_eq!(pinv(&DenseMatrix::zeros(2, 3), DEFAULT_RANK_TOL), DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn pinv_penrose_identities_rank_two() {
        let m = gaussian_matrix(4, 2, 30) * gaussian_matrix(2, 3, 31);
        let p = pinv(&m, DEFAULT_RANK_TOL);
        assert!((&m * &p * &m - &m).norm() < 1e-8);
        assert!((&p * &m * &p - &p).norm() < 1e-8);
        assert!(max_asymmetry(&(&m * &p)) < 1e-8);
        assert!(max_asymmetry(&(&p * &m)) < 1e-8);
        assert_eq!(rank(&m, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn inv_sqrt_cases() {
        let i2 = DenseMatrix::identity(2, 2);
        assert_abs_diff_eq!(inv_sqrt(&i2, DEFAULT_RANK_TOL).unwrap(), i2, epsilon = 1e-14);
        let d = DenseMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let expect = DenseMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(inv_sqrt(&d, DEFAULT_RANK_TOL).unwrap(), expect, epsilon = 1e-14);
        let asym = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(inv_sqrt(&asym, DEFAULT_RANK_TOL), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn inv_sqrt_gives_range_projector() {
        let g = gaussian_matrix(5, 3, 40);
        let m = &g * g.transpose(); // rank 3
        let s = inv_sqrt(&m, 1e-8).unwrap();
        let proj = &s * &m * &s;
        assert_abs_diff_eq!(&proj * &proj, proj.clone(), epsilon = 1e-8);
        assert_abs_diff_eq!(proj.trace(), 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(&proj * &g, g, epsilon = 1e-8);
    }

    #[test]
    fn pca_rank_one_and_full() {
        let dir = DenseVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let coeffs = gaussian_matrix(50, 1, 50);
        let samples = &coeffs * dir.transpose();
        let p = pca_top_r(&samples, 3).unwrap();
        assert!(p.spectrum[0] > 0.0);
        assert!(p.spectrum[1] < 1e-7 && p.spectrum[2] < 1e-7);
        let q = &p.projection;
        assert_abs_diff_eq!(q.transpose() * q, DenseMatrix::identity(3, 3), epsilon = 1e-10);
        assert_abs_diff_eq!(q * q.transpose(), DenseMatrix::identity(3, 3), epsilon = 1e-10);
        assert!(pca_top_r(&samples, 4).is_err());
        assert!(pca_top_r(&samples, 0).is_err());
    }

    #[test]
    fn pca_isotropic_spectrum_is_flat() {
        let samples = gaussian_matrix(20_000, 4, 60);
        let p = pca_top_r(&samples, 4).unwrap();
        // eigenvalues of a 4-dim identity sample covariance fluctuate by ~√(2/n)·4
        for v in p.spectrum.iter() {
            assert!((v - 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn svd_is_sorted_and_sign_canonical() {
        let m = gaussian_matrix(5, 4, 70);
        let s = svd(&m);
        for w in s.singular_values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let rebuilt = &s.u * DenseMatrix::from_diagonal(&s.singular_values) * s.v.transpose();
        assert_abs_diff_eq!(rebuilt, m, epsilon = 1e-12);
        for j in 0..s.u.ncols() {
            let lead = s.u.column(j).iter().copied().find(|v| v.abs() > 1e-8).unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn conditional_maps_block_diagonal_are_zero() {
        let blocks = CovarianceBlocks::new(
            random_psd(2, 80),
            DenseMatrix::zeros(2, 2),
            DenseMatrix::zeros(2, 1),
            random_psd(2, 81),
            DenseMatrix::zeros(2, 1),
            random_psd(1, 82),
        )
        .unwrap();
        let maps = gaussian_conditionals_from_precision(&blocks).unwrap();
        assert!(maps.map_x2_given_x1.norm() < 1e-14);
        assert!(maps.map_y_given_x.norm() < 1e-14);
        assert!(maps.map_y_given_x1.norm() < 1e-14);
    }

    #[test]
    fn conditional_maps_routes_agree() {
        for seed in 0..20 {
            let joint = random_psd(5, 100 + seed);
            let blocks = CovarianceBlocks::from_joint(&joint, 2, 2).unwrap();
            let a = gaussian_conditionals_from_precision(&blocks).unwrap();
            let b = conditional_maps_from_covariance(&blocks).unwrap();
            assert_abs_diff_eq!(a.map_x2_given_x1, b.map_x2_given_x1, epsilon = 1e-8);
            assert_abs_diff_eq!(a.map_y_given_x, b.map_y_given_x, epsilon = 1e-8);
            assert_abs_diff_eq!(a.map_y_given_x1, b.map_y_given_x1, epsilon = 1e-8);
        }
    }

    #[test]
    fn singular_joint_is_rejected() {
        let g = gaussian_matrix(5, 3, 90);
        let joint = &g * g.transpose();
        let blocks = CovarianceBlocks::from_joint(&joint, 2, 2).unwrap();
        assert!(matches!(gaussian_conditionals_from_precision(&blocks), Err(Error::Singular(_))));
    }

    #[test]
    fn joint_roundtrips_through_blocks() {
        let joint = random_psd(6, 91);
        let blocks = CovarianceBlocks::from_joint(&joint, 2, 3).unwrap();
        assert_eq!(blocks.joint(), joint);
    }
}
