//! BLUP weights and kriging covariance matrices for simple, ordinary and
//! universal kriging on a fixed design.
//!
//! A [`KrigingSystem`] caches the triangular factor of the design covariance
//! block together with the trend projection matrices, so that weights and
//! covariances for arbitrary target subsets are cheap. All solves go through
//! the cached factor; no explicit matrix inverse is ever formed. Simple
//! kriging is handled uniformly as the `p = 0` case (no trend columns).

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::covariance::{chol_with_jitter, cov_matrix, logdet_from_chol, CovModel};
use crate::design_space::{CandidateSet, Design, TrendBasis};
use crate::error::{KrigError, Result};

/// Which kriging flavor a system implements.
///
/// Ordinary kriging is algebraically universal kriging with a constant
/// basis; it is kept as its own variant because it admits the rank-one
/// decomposition of [`KrigingSystem::ok_parts`].
#[derive(Debug, Clone, PartialEq)]
pub enum KrigingVariant {
    /// Known mean: `None` means identically zero, otherwise one value per
    /// candidate point.
    Simple { mean: Option<DVector<f64>> },
    Ordinary,
    Universal(TrendBasis),
}

impl KrigingVariant {
    pub fn simple() -> Self {
        KrigingVariant::Simple { mean: None }
    }

    /// Trend basis used by this variant; `None` for simple kriging.
    pub fn basis(&self) -> Option<TrendBasis> {
        match self {
            KrigingVariant::Simple { .. } => None,
            KrigingVariant::Ordinary => Some(TrendBasis::Constant),
            KrigingVariant::Universal(b) => Some(b.clone()),
        }
    }

    /// Number of trend functions for a given space dimension.
    pub fn p(&self, dim: usize) -> usize {
        self.basis().map_or(0, |b| b.p(dim))
    }
}

/// Cached factorization bundle for a fixed design.
///
/// Holds the design covariance block `C` and its Cholesky factor, the trend
/// design matrix `F` (k x p), the GLS projector `B = (F'C^-1F)^-1 F'C^-1`
/// (p x k) and `A = C^-1 (I - F B)` (k x k). Weight rows for any target x
/// are `f(x)' B + c(x)' A`.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    set: Arc<CandidateSet>,
    model: CovModel,
    variant: KrigingVariant,
    design: Design,
    c: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    f: DMatrix<f64>,
    /// `L^-1 F` where `C = L L'`.
    li_f: DMatrix<f64>,
    /// Factor of the p x p normal matrix `F' C^-1 F` (absent when p = 0).
    chol_m: Option<Cholesky<f64, Dyn>>,
    b: DMatrix<f64>,
    a: DMatrix<f64>,
}

impl KrigingSystem {
    /// Builds and caches the factorizations for `design`. Only design-sized
    /// (k, p) allocations are made.
    pub fn build(
        set: Arc<CandidateSet>,
        design: Design,
        model: CovModel,
        variant: KrigingVariant,
    ) -> Result<Self> {
        model.validate()?;
        let k = design.k();
        let p = variant.p(set.dim());
        if k < p {
            return Err(KrigError::UnderIdentifiedTrend { k, p });
        }
        if let KrigingVariant::Simple { mean: Some(mean) } = &variant {
            if mean.len() != set.len() {
                return Err(KrigError::LengthMismatch {
                    expected: set.len(),
                    got: mean.len(),
                });
            }
        }
        let c = cov_matrix(&model, &set, design.indices(), design.indices())?;
        let (chol, jitter) = chol_with_jitter(&c, model.sigma2)?;

        let f = match variant.basis() {
            Some(basis) => basis.matrix(&set, design.indices())?,
            None => DMatrix::zeros(k, 0),
        };
        let l = chol.l_dirty();
        let li_f = l
            .solve_lower_triangular(&f)
            .ok_or_else(|| KrigError::SingularBlock("triangular solve failed".into()))?;

        let (chol_m, b) = if p > 0 {
            let ci_f = chol.solve(&f);
            let m = f.transpose() * &ci_f;
            let chol_m = Cholesky::new(m).ok_or_else(|| {
                KrigError::SingularBlock("trend normal matrix F'C^-1F".into())
            })?;
            let b = chol_m.solve(&ci_f.transpose());
            (Some(chol_m), b)
        } else {
            (None, DMatrix::zeros(0, k))
        };
        let a = chol.solve(&(DMatrix::identity(k, k) - &f * &b));

        Ok(Self {
            set,
            model,
            variant,
            design,
            c,
            chol,
            jitter,
            f,
            li_f,
            chol_m,
            b,
            a,
        })
    }

    pub fn set(&self) -> &Arc<CandidateSet> {
        &self.set
    }

    pub fn model(&self) -> &CovModel {
        &self.model
    }

    pub fn variant(&self) -> &KrigingVariant {
        &self.variant
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn k(&self) -> usize {
        self.design.k()
    }

    pub fn p(&self) -> usize {
        self.f.ncols()
    }

    /// Jitter that had to be added to factorize the design block (usually 0).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn trend_matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn gls_projector(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn residual_projector(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub(crate) fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub(crate) fn li_f(&self) -> &DMatrix<f64> {
        &self.li_f
    }

    pub(crate) fn chol_m(&self) -> Option<&Cholesky<f64, Dyn>> {
        self.chol_m.as_ref()
    }

    /// Log-determinant of the design covariance block (the MES criterion).
    pub fn logdet_design_cov(&self) -> f64 {
        logdet_from_chol(&self.chol)
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for &t in targets {
            if t >= self.set.len() {
                return Err(KrigError::InvalidInput(format!(
                    "target index {t} out of bounds for {} candidates",
                    self.set.len()
                )));
            }
            if self.design.contains(t) {
                return Err(KrigError::InvalidInput(format!(
                    "target index {t} is a design point"
                )));
            }
        }
        Ok(())
    }

    /// Cross covariance from the design to `points` (k x |points|).
    pub(crate) fn cross_cov(&self, points: &[usize]) -> Result<DMatrix<f64>> {
        cov_matrix(&self.model, &self.set, self.design.indices(), points)
    }

    /// Basis rows for `points` (|points| x p).
    pub(crate) fn basis_rows(&self, points: &[usize]) -> Result<DMatrix<f64>> {
        match self.variant.basis() {
            Some(basis) => basis.matrix(&self.set, points),
            None => Ok(DMatrix::zeros(points.len(), 0)),
        }
    }

    /// Weight matrix `W = F0 B + C_x0' A` (|targets| x k): row i holds the
    /// weights of the design observations for predicting target i.
    pub fn weights(&self, targets: &[usize]) -> Result<DMatrix<f64>> {
        self.check_targets(targets)?;
        let c_x0 = self.cross_cov(targets)?;
        let f0 = self.basis_rows(targets)?;
        Ok(f0 * &self.b + c_x0.transpose() * &self.a)
    }

    /// Kriging covariance matrix of the prediction errors at `targets`:
    /// `W C W' - W C_x0 - C_x0' W' + C_0`, symmetrized against rounding.
    pub fn kriging_cov(&self, targets: &[usize]) -> Result<DMatrix<f64>> {
        self.check_targets(targets)?;
        let c_x0 = self.cross_cov(targets)?;
        let f0 = self.basis_rows(targets)?;
        let w = f0 * &self.b + c_x0.transpose() * &self.a;
        let c0 = cov_matrix(&self.model, &self.set, targets, targets)?;
        let wc = &w * &self.c;
        let wcx = &w * &c_x0;
        let mut sigma = wc * w.transpose() - &wcx - wcx.transpose() + c0;
        symmetrize(&mut sigma);
        Ok(sigma)
    }

    /// Diagonal of [`Self::kriging_cov`] computed one target at a time with
    /// k-sized work only.
    pub fn kriging_variances(&self, targets: &[usize]) -> Result<DVector<f64>> {
        self.check_targets(targets)?;
        let mut out = DVector::zeros(targets.len());
        for (row, &t) in targets.iter().enumerate() {
            let c = self.cross_cov(&[t])?; // k x 1
            let f0 = self.basis_rows(&[t])?; // 1 x p
            let w = f0 * &self.b + c.transpose() * &self.a; // 1 x k
            let c00 = self.model.cov_between(&self.set, t, t);
            let wc = &w * &self.c;
            out[row] = (wc * w.transpose())[(0, 0)] - 2.0 * (&w * &c)[(0, 0)] + c00;
        }
        Ok(out)
    }

    /// Ordinary-kriging decomposition `Sigma_OK = Sigma_SK + (1/b) u u'` with
    /// `b = 1' C^-1 1` and `u = 1_m - C_x0' C^-1 1`.
    pub fn ok_parts(&self, targets: &[usize]) -> Result<OkParts> {
        if self.variant != KrigingVariant::Ordinary {
            return Err(KrigError::InvalidInput(
                "ok_parts requires the ordinary kriging variant".into(),
            ));
        }
        self.check_targets(targets)?;
        let k = self.k();
        let ones_k = DVector::from_element(k, 1.0);
        let ci_one = self.chol.solve(&ones_k);
        let b = (ones_k.transpose() * &ci_one)[(0, 0)];
        let c_x0 = self.cross_cov(targets)?;
        let ci_cx0 = self.chol.solve(&c_x0);
        let c0 = cov_matrix(&self.model, &self.set, targets, targets)?;
        let mut sigma_sk = c0 - c_x0.transpose() * ci_cx0;
        symmetrize(&mut sigma_sk);
        let u = DVector::from_element(targets.len(), 1.0) - c_x0.transpose() * ci_one;
        Ok(OkParts {
            sigma_sk,
            correction: u,
            b,
        })
    }

    /// BLUP predictions at `targets` from `observations` on the design.
    pub fn predict(&self, targets: &[usize], observations: &DVector<f64>) -> Result<DVector<f64>> {
        if observations.len() != self.k() {
            return Err(KrigError::LengthMismatch {
                expected: self.k(),
                got: observations.len(),
            });
        }
        let w = self.weights(targets)?;
        match &self.variant {
            KrigingVariant::Simple { mean: Some(mean) } => {
                let mu_design =
                    DVector::from_iterator(self.k(), self.design.indices().iter().map(|&i| mean[i]));
                let mu_targets =
                    DVector::from_iterator(targets.len(), targets.iter().map(|&i| mean[i]));
                Ok(mu_targets + w * (observations - mu_design))
            }
            _ => Ok(w * observations),
        }
    }
}

/// Pieces of the ordinary-kriging covariance: the simple-kriging part plus a
/// rank-one correction.
#[derive(Debug, Clone)]
pub struct OkParts {
    pub sigma_sk: DMatrix<f64>,
    /// `u` with `Sigma_OK = Sigma_SK + (1/b) u u'`.
    pub correction: DVector<f64>,
    /// `1' C^-1 1`.
    pub b: f64,
}

impl OkParts {
    pub fn assemble(&self) -> DMatrix<f64> {
        &self.sigma_sk + (&self.correction * self.correction.transpose()) / self.b
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::make_grid;
    use approx::assert_relative_eq;

    fn grid_system(
        n: usize,
        design: &[usize],
        model: CovModel,
        variant: KrigingVariant,
    ) -> KrigingSystem {
        let set = Arc::new(make_grid(n, 2, 1.0).unwrap());
        let design = Design::new(design.to_vec(), set.len()).unwrap();
        KrigingSystem::build(set, design, model, variant).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn ols_reduction_in_vanishing_range_limit() {
        // C -> sigma^2 I, constant basis: B row = 1/k, GLS mean = sample mean
        let sys = grid_system(
            4,
            &[0, 3, 7, 12],
            CovModel::new(1.0, 1e-9, 0.5).unwrap(),
            KrigingVariant::Ordinary,
        );
        let b = sys.gls_projector();
        for j in 0..4 {
            assert_relative_eq!(b[(0, j)], 0.25, max_relative = 1e-9);
        }
        let obs = DVector::from_vec(vec![1.0, 2.0, 3.0, 6.0]);
        let beta = b * &obs;
        assert_relative_eq!(beta[0], 3.0, max_relative = 1e-9);
    }

    #[test]
    fn interpolating_trend_zeroes_residual_projector() {
        // k = p with invertible F: A = 0 (points must not be collinear)
        let sys = grid_system(
            4,
            &[0, 5, 3],
            CovModel::new(1.0, 1.5, 1.0).unwrap(),
            KrigingVariant::Universal(TrendBasis::Linear),
        );
        assert_eq!(sys.k(), sys.p());
        assert!(max_abs(sys.residual_projector()) < 1e-9);
    }

    #[test]
    fn projectors_match_dense_inverse_oracle() {
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![1, 4, 7, 9, 12, 14], set.len()).unwrap();
        let model = CovModel::new(1.3, 2.0, 1.5).unwrap();
        let sys = KrigingSystem::build(
            set.clone(),
            design.clone(),
            model.clone(),
            KrigingVariant::Universal(TrendBasis::Linear),
        )
        .unwrap();

        // oracle: explicit inverses
        let c = cov_matrix(&model, &set, design.indices(), design.indices()).unwrap();
        let c_inv = c.try_inverse().unwrap();
        let f = TrendBasis::Linear.matrix(&set, design.indices()).unwrap();
        let m_inv = (f.transpose() * &c_inv * &f).try_inverse().unwrap();
        let b_oracle = &m_inv * f.transpose() * &c_inv;
        let a_oracle = &c_inv * (DMatrix::identity(6, 6) - &f * &b_oracle);

        assert!(max_abs(&(sys.gls_projector() - b_oracle)) < 1e-9);
        assert!(max_abs(&(sys.residual_projector() - a_oracle)) < 1e-9);
    }

    #[test]
    fn system_invariants_bf_identity_af_zero() {
        let sys = grid_system(
            5,
            &[0, 4, 12, 20, 24, 7, 17],
            CovModel::new(2.0, 1.0, 1.5).unwrap(),
            KrigingVariant::Universal(TrendBasis::Linear),
        );
        let bf = sys.gls_projector() * sys.trend_matrix();
        assert!(max_abs(&(bf - DMatrix::identity(3, 3))) < 1e-10);
        let af = sys.residual_projector() * sys.trend_matrix();
        assert!(max_abs(&af) < 1e-10);
    }

    #[test]
    fn simple_kriging_scalar_weight() {
        // design = {(1,1)}, target (2,1): w = exp(-1)
        let sys = grid_system(
            2,
            &[0],
            CovModel::new(1.0, 1.0, 0.5).unwrap(),
            KrigingVariant::simple(),
        );
        let w = sys.weights(&[2]).unwrap(); // index 2 is (2,1)
        assert_eq!(w.shape(), (1, 1));
        assert_relative_eq!(w[(0, 0)], (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn ordinary_weight_rows_sum_to_one() {
        let sys = grid_system(
            5,
            &[0, 4, 20, 24, 12],
            CovModel::new(1.0, 2.0, 1.5).unwrap(),
            KrigingVariant::Ordinary,
        );
        let targets: Vec<usize> = sys.design().complement(25);
        let w = sys.weights(&targets).unwrap();
        for r in 0..w.nrows() {
            let s: f64 = w.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row {r} sums to {s}");
        }
    }

    #[test]
    fn universal_unbiasedness_identity() {
        let sys = grid_system(
            4,
            &[0, 3, 5, 10, 12, 15],
            CovModel::new(1.0, 1.0, 1.0).unwrap(),
            KrigingVariant::Universal(TrendBasis::Linear),
        );
        let targets = [1, 7, 11];
        let w = sys.weights(&targets).unwrap();
        let f0 = TrendBasis::Linear.matrix(sys.set(), &targets).unwrap();
        assert!(max_abs(&(w * sys.trend_matrix() - f0)) < 1e-10);
    }

    #[test]
    fn scalar_kriging_variance() {
        let sys = grid_system(
            2,
            &[0],
            CovModel::new(1.0, 1.0, 0.5).unwrap(),
            KrigingVariant::simple(),
        );
        let sigma = sys.kriging_cov(&[2]).unwrap();
        assert_relative_eq!(sigma[(0, 0)], 1.0 - (-2.0f64).exp(), max_relative = 1e-12);
        let vars = sys.kriging_variances(&[2]).unwrap();
        assert_relative_eq!(vars[0], sigma[(0, 0)], max_relative = 1e-12);
    }

    #[test]
    fn duplicate_coordinate_interpolates_exactly() {
        // candidate 1 duplicates candidate 0's coordinates; no nugget
        let set = Arc::new(
            CandidateSet::new(
                1,
                vec![0, 1, 2, 3],
                vec![1.0, 1.0, 2.0, 3.0],
                Vec::new(),
                Vec::new(),
            )
            .unwrap(),
        );
        let design = Design::new(vec![0, 2], set.len()).unwrap();
        let model = CovModel::new(1.0, 1.0, 0.5).unwrap();
        let sys =
            KrigingSystem::build(set, design, model, KrigingVariant::simple()).unwrap();
        let w = sys.weights(&[1]).unwrap();
        assert_relative_eq!(w[(0, 0)], 1.0, max_relative = 1e-10);
        assert!(w[(0, 1)].abs() < 1e-10);
        let sigma = sys.kriging_cov(&[1]).unwrap();
        assert!(sigma[(0, 0)].abs() < 1e-10);
    }

    #[test]
    fn sk_covariance_matches_schur_identity() {
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![2, 5, 8, 11, 14], set.len()).unwrap();
        let model = CovModel::new(1.5, 1.7, 1.0).unwrap();
        let sys = KrigingSystem::build(
            set.clone(),
            design.clone(),
            model.clone(),
            KrigingVariant::simple(),
        )
        .unwrap();
        let targets = design.complement(16);
        let sigma = sys.kriging_cov(&targets).unwrap();

        let c = cov_matrix(&model, &set, design.indices(), design.indices()).unwrap();
        let c_x0 = cov_matrix(&model, &set, design.indices(), &targets).unwrap();
        let c0 = cov_matrix(&model, &set, &targets, &targets).unwrap();
        let oracle = c0 - c_x0.transpose() * c.try_inverse().unwrap() * c_x0;
        assert!(max_abs(&(sigma - oracle)) < 1e-9);
    }

    #[test]
    fn ok_parts_reconstruct_covariance() {
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![0, 3, 9, 12, 15], set.len()).unwrap();
        let model = CovModel::new(1.0, 1.5, 1.5).unwrap();
        let sys = KrigingSystem::build(set.clone(), design.clone(), model.clone(), KrigingVariant::Ordinary)
            .unwrap();
        let targets = design.complement(16);
        let parts = sys.ok_parts(&targets).unwrap();
        let direct = sys.kriging_cov(&targets).unwrap();
        assert!(max_abs(&(parts.assemble() - direct)) < 1e-9);

        // b equals the sum of the entries of C^-1
        let c = cov_matrix(&model, &set, design.indices(), design.indices()).unwrap();
        let sum: f64 = c.try_inverse().unwrap().iter().sum();
        assert_relative_eq!(parts.b, sum, max_relative = 1e-9);

        // difference to the SK part is PSD of rank <= 1
        let diff = parts.assemble() - &parts.sigma_sk;
        let eig = diff.symmetric_eigenvalues();
        let mut positive = 0;
        for &lambda in eig.iter() {
            assert!(lambda > -1e-9);
            if lambda > 1e-9 {
                positive += 1;
            }
        }
        assert!(positive <= 1);
    }

    #[test]
    fn ok_correction_limit_at_vanishing_range() {
        // phi -> 0: correction -> (1/k) 1 1'
        let sys = grid_system(
            3,
            &[0, 4, 8],
            CovModel::new(1.0, 1e-4, 0.5).unwrap(),
            KrigingVariant::Ordinary,
        );
        let targets = sys.design().complement(9);
        let parts = sys.ok_parts(&targets).unwrap();
        let corr = (&parts.correction * parts.correction.transpose()) / parts.b;
        for v in corr.iter() {
            assert_relative_eq!(*v, 1.0 / 3.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn predict_constant_field_ordinary() {
        let sys = grid_system(
            4,
            &[0, 3, 12, 15],
            CovModel::new(1.0, 2.0, 1.5).unwrap(),
            KrigingVariant::Ordinary,
        );
        let obs = DVector::from_element(4, 5.5);
        let pred = sys.predict(&[5, 6, 9], &obs).unwrap();
        for v in pred.iter() {
            assert_relative_eq!(*v, 5.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn predict_simple_zero_mean_zero_obs() {
        let sys = grid_system(
            3,
            &[0, 8],
            CovModel::new(1.0, 1.0, 0.5).unwrap(),
            KrigingVariant::simple(),
        );
        let pred = sys.predict(&[4], &DVector::zeros(2)).unwrap();
        assert_eq!(pred[0], 0.0);
    }

    #[test]
    fn predict_reproduces_linear_field_at_short_range() {
        // observations follow an exact linear trend; phi -> 0 reduces the
        // BLUP to the GLS trend fit
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![0, 3, 12, 15, 5, 10], set.len()).unwrap();
        let model = CovModel::new(1.0, 1e-6, 0.5).unwrap();
        let sys = KrigingSystem::build(
            set.clone(),
            design.clone(),
            model,
            KrigingVariant::Universal(TrendBasis::Linear),
        )
        .unwrap();
        let field = |x: &[f64]| 2.0 + 0.5 * x[0] - 1.5 * x[1];
        let obs = DVector::from_iterator(
            6,
            design.indices().iter().map(|&i| field(set.coord(i))),
        );
        let targets = [1, 6, 11];
        let pred = sys.predict(&targets, &obs).unwrap();
        for (row, &t) in targets.iter().enumerate() {
            assert_relative_eq!(pred[row], field(set.coord(t)), max_relative = 1e-9);
        }
    }

    #[test]
    fn determinant_identity_on_joint_covariance() {
        // det C_joint = det C_design * det Sigma_SK
        let set = Arc::new(make_grid(5, 2, 1.0).unwrap());
        let design = Design::new(vec![0, 6, 12, 18, 24], set.len()).unwrap();
        let model = CovModel::new(1.0, 1.2, 1.0).unwrap();
        let sys = KrigingSystem::build(
            set.clone(),
            design.clone(),
            model.clone(),
            KrigingVariant::simple(),
        )
        .unwrap();
        let targets: Vec<usize> = design.complement(25);

        let mut joint: Vec<usize> = design.indices().to_vec();
        joint.extend(&targets);
        let c_joint = cov_matrix(&model, &set, &joint, &joint).unwrap();
        let lhs = c_joint.determinant().ln();

        let sigma = sys.kriging_cov(&targets).unwrap();
        let rhs = sys.logdet_design_cov() + sigma.determinant().ln();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
    }

    #[test]
    fn covariance_respects_target_permutation() {
        let sys = grid_system(
            4,
            &[0, 5, 10, 15],
            CovModel::new(1.0, 1.5, 1.5).unwrap(),
            KrigingVariant::Ordinary,
        );
        let t1 = [1, 2, 6, 9];
        let t2 = [6, 1, 9, 2];
        let perm = [1usize, 3, 0, 2]; // position of t1[i] inside t2
        let s1 = sys.kriging_cov(&t1).unwrap();
        let s2 = sys.kriging_cov(&t2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(s1[(i, j)], s2[(perm[i], perm[j])], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn response_scaling_shifts_logdet() {
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![0, 3, 12, 15], set.len()).unwrap();
        let targets = design.complement(16);
        let m = targets.len() as f64;
        let s = 37.5f64;
        let base = CovModel::new(1.0, 1.5, 1.0).unwrap();
        let scaled = CovModel::new(s * s, 1.5, 1.0).unwrap();
        let sys1 = KrigingSystem::build(set.clone(), design.clone(), base, KrigingVariant::Ordinary)
            .unwrap();
        let sys2 = KrigingSystem::build(set, design, scaled, KrigingVariant::Ordinary).unwrap();
        let ld1 = sys1.kriging_cov(&targets).unwrap().determinant().ln();
        let ld2 = sys2.kriging_cov(&targets).unwrap().determinant().ln();
        assert_relative_eq!(ld2 - ld1, 2.0 * m * s.ln(), max_relative = 1e-8);
    }

    #[test]
    fn ordinary_equals_universal_constant() {
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![1, 4, 9, 13], set.len()).unwrap();
        let model = CovModel::new(1.0, 2.0, 1.5).unwrap();
        let targets = design.complement(16);
        let ok = KrigingSystem::build(
            set.clone(),
            design.clone(),
            model.clone(),
            KrigingVariant::Ordinary,
        )
        .unwrap();
        let uk = KrigingSystem::build(
            set,
            design,
            model,
            KrigingVariant::Universal(TrendBasis::Constant),
        )
        .unwrap();
        assert!(max_abs(&(ok.weights(&targets).unwrap() - uk.weights(&targets).unwrap())) < 1e-10);
        assert!(
            max_abs(&(ok.kriging_cov(&targets).unwrap() - uk.kriging_cov(&targets).unwrap()))
                < 1e-10
        );
    }

    #[test]
    fn under_identified_trend_is_rejected() {
        let set = Arc::new(make_grid(4, 2, 1.0).unwrap());
        let design = Design::new(vec![0, 15], set.len()).unwrap();
        let err = KrigingSystem::build(
            set,
            design,
            CovModel::new(1.0, 1.0, 0.5).unwrap(),
            KrigingVariant::Universal(TrendBasis::Linear),
        )
        .unwrap_err();
        assert!(matches!(err, KrigError::UnderIdentifiedTrend { k: 2, p: 3 }));
    }

    #[test]
    fn target_overlapping_design_index_is_rejected() {
        let sys = grid_system(
            3,
            &[0, 4],
            CovModel::new(1.0, 1.0, 0.5).unwrap(),
            KrigingVariant::simple(),
        );
        assert!(sys.weights(&[4]).is_err());
    }

    use crate::covariance::cov_matrix;
    use crate::design_space::CandidateSet;
}
