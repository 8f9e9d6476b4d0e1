//! Stage-two update formulas and cheap increment/decrement objectives.
//!
//! Given a base design and its cached [`KrigingSystem`], the quality of an
//! `l`-point increment is scored from the `l x l` block `Sigma_2` of the
//! current kriging covariance at the increment points. Everything needed for
//! that block has dimensions `k`, `l` or `p` only — the number of remaining
//! prediction sites never enters, which is what makes incremental design
//! construction scale to dense candidate grids.
//!
//! The GV objective is `logdet Sigma_2` (maximize). The V objective adds the
//! cross block `Sigma_20` and is linear in the number of prediction sites.
//! Full weight/covariance updates for the enlarged design are provided for
//! auditing and for consumers that need the stage-two predictor itself.

use nalgebra::{Cholesky, DMatrix};

use crate::covariance::cov_matrix;
use crate::criteria::logdet_psd;
use crate::error::{KrigError, Result};
use crate::kriging::{symmetrize, KrigingSystem};

/// A base design with cached factorizations and optional log-determinant
/// bookkeeping for the GV criterion over its complement.
///
/// `logdet` may be tracked in a relative sense (an unknown common offset):
/// chained increments and decrements update it exactly, so values of
/// equal-sized designs remain comparable even when the absolute
/// determinant was never computed.
#[derive(Debug, Clone)]
pub struct StageState {
    system: KrigingSystem,
    logdet: Option<f64>,
}

/// Blocks of the current kriging covariance partitioned by a candidate
/// increment: `sigma2` at the increment points, optionally the cross block
/// to the remaining prediction sites.
#[derive(Debug, Clone)]
pub struct KrigingCovBlocks {
    pub sigma2: DMatrix<f64>,
    pub sigma20: Option<DMatrix<f64>>,
    pub sigma0: Option<DMatrix<f64>>,
}

impl StageState {
    pub fn new(system: KrigingSystem) -> Self {
        Self {
            system,
            logdet: None,
        }
    }

    /// Tracks a log-determinant (absolute, or relative to an arbitrary
    /// baseline) that chained updates keep current.
    pub fn with_logdet(system: KrigingSystem, logdet: f64) -> Self {
        Self {
            system,
            logdet: Some(logdet),
        }
    }

    pub fn system(&self) -> &KrigingSystem {
        &self.system
    }

    pub fn logdet(&self) -> Option<f64> {
        self.logdet
    }

    fn check_increment(&self, increment: &[usize]) -> Result<()> {
        let n = self.system.set().len();
        for (pos, &i) in increment.iter().enumerate() {
            if i >= n {
                return Err(KrigError::InvalidInput(format!(
                    "increment index {i} out of bounds for {n} candidates"
                )));
            }
            if self.system.design().contains(i) {
                return Err(KrigError::InvalidInput(format!(
                    "increment index {i} overlaps the design"
                )));
            }
            if increment[..pos].contains(&i) {
                return Err(KrigError::InvalidInput(format!(
                    "increment index {i} repeated"
                )));
            }
        }
        Ok(())
    }

    /// `Sigma_2`: kriging covariance of the prediction errors at the
    /// increment points under the current design. Only k/l/p-sized matrices
    /// are touched.
    pub fn sigma2_block(&self, increment: &[usize]) -> Result<DMatrix<f64>> {
        self.check_increment(increment)?;
        let sys = &self.system;
        let c12 = sys.cross_cov(increment)?; // k x l
        let c2 = cov_matrix(sys.model(), sys.set(), increment, increment)?;
        // residual part C_2 - C_12' C^-1 C_12 via the triangular factor
        let x = sys
            .chol()
            .l_dirty()
            .solve_lower_triangular(&c12)
            .ok_or_else(|| KrigError::SingularBlock("triangular solve".into()))?;
        let mut sigma2 = c2 - x.transpose() * &x;
        // trend part G M^-1 G' with G = F_2 - C_12' C^-1 F
        if let Some(chol_m) = sys.chol_m() {
            let f2 = sys.basis_rows(increment)?;
            let g = f2 - x.transpose() * sys.li_f();
            let y = chol_m
                .l_dirty()
                .solve_lower_triangular(&g.transpose())
                .ok_or_else(|| KrigError::SingularBlock("trend triangular solve".into()))?;
            sigma2 += y.transpose() * y;
        }
        symmetrize(&mut sigma2);
        Ok(sigma2)
    }

    /// Cross block `Sigma_20` (l x |targets|) between increment points and
    /// prediction sites under the current design.
    pub fn sigma20_block(&self, increment: &[usize], targets: &[usize]) -> Result<DMatrix<f64>> {
        self.check_increment(increment)?;
        self.check_increment(targets)?; // same constraints apply
        if targets.iter().any(|t| increment.contains(t)) {
            return Err(KrigError::InvalidInput(
                "targets overlap the increment".into(),
            ));
        }
        let sys = &self.system;
        let c12 = sys.cross_cov(increment)?; // k x l
        let c10 = sys.cross_cov(targets)?; // k x m
        let c20 = cov_matrix(sys.model(), sys.set(), increment, targets)?; // l x m
        let l = sys.chol().l_dirty();
        let x2 = l
            .solve_lower_triangular(&c12)
            .ok_or_else(|| KrigError::SingularBlock("triangular solve".into()))?;
        let x0 = l
            .solve_lower_triangular(&c10)
            .ok_or_else(|| KrigError::SingularBlock("triangular solve".into()))?;
        let mut sigma20 = c20 - x2.transpose() * &x0;
        if let Some(chol_m) = sys.chol_m() {
            let f2 = sys.basis_rows(increment)?;
            let f0 = sys.basis_rows(targets)?;
            let g2 = f2 - x2.transpose() * sys.li_f();
            let g0 = f0 - x0.transpose() * sys.li_f();
            let lm = chol_m.l_dirty();
            let y2 = lm
                .solve_lower_triangular(&g2.transpose())
                .ok_or_else(|| KrigError::SingularBlock("trend triangular solve".into()))?;
            let y0 = lm
                .solve_lower_triangular(&g0.transpose())
                .ok_or_else(|| KrigError::SingularBlock("trend triangular solve".into()))?;
            sigma20 += y2.transpose() * y0;
        }
        Ok(sigma20)
    }

    /// All blocks at once; `sigma20`/`sigma0` only when `targets` is given.
    pub fn cov_blocks(
        &self,
        increment: &[usize],
        targets: Option<&[usize]>,
    ) -> Result<KrigingCovBlocks> {
        let sigma2 = self.sigma2_block(increment)?;
        let (sigma20, sigma0) = match targets {
            Some(t) => (
                Some(self.sigma20_block(increment, t)?),
                Some(self.system.kriging_cov(t)?),
            ),
            None => (None, None),
        };
        Ok(KrigingCovBlocks {
            sigma2,
            sigma20,
            sigma0,
        })
    }

    /// GV increment objective `logdet Sigma_2` (maximize). A singular block
    /// (e.g. an increment duplicating a design point without nugget) yields
    /// `-inf`, so such increments are never selected.
    pub fn gv_increment_objective(&self, increment: &[usize]) -> Result<f64> {
        Ok(logdet_psd(&self.sigma2_block(increment)?))
    }

    /// V increment objective `tr Sigma_2 + tr(Sigma_2^-1 Sigma_20 Sigma_20')`
    /// (maximize), evaluated over all non-design, non-increment candidates.
    /// Work is linear in the number of prediction sites.
    pub fn v_increment_objective(&self, increment: &[usize]) -> Result<f64> {
        let sys = &self.system;
        let n = sys.set().len();
        let targets: Vec<usize> = (0..n)
            .filter(|i| !sys.design().contains(*i) && !increment.contains(i))
            .collect();
        self.v_increment_objective_over(increment, &targets)
    }

    /// As [`Self::v_increment_objective`] with an explicit target set.
    pub fn v_increment_objective_over(
        &self,
        increment: &[usize],
        targets: &[usize],
    ) -> Result<f64> {
        let sigma2 = self.sigma2_block(increment)?;
        let chol = Cholesky::new(sigma2.clone())
            .ok_or_else(|| KrigError::SingularBlock("increment block Sigma_2".into()))?;
        let trace = sigma2.trace();
        if targets.is_empty() {
            return Ok(trace);
        }
        let sigma20 = self.sigma20_block(increment, targets)?;
        let z = chol
            .l_dirty()
            .solve_lower_triangular(&sigma20)
            .ok_or_else(|| KrigError::SingularBlock("increment block Sigma_2".into()))?;
        Ok(trace + z.iter().map(|v| v * v).sum::<f64>())
    }

    /// Stage-two weights `[W_1 W_2]` for predicting `targets` from the
    /// enlarged design: `W_2 = Sigma_20' Sigma_2^-1`,
    /// `W_1 = W_10 - W_2 W_12`.
    pub fn update_weights(
        &self,
        increment: &[usize],
        targets: &[usize],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let w10 = self.system.weights(targets)?;
        if increment.is_empty() {
            return Ok((w10, DMatrix::zeros(targets.len(), 0)));
        }
        let sigma2 = self.sigma2_block(increment)?;
        let sigma20 = self.sigma20_block(increment, targets)?;
        let chol = Cholesky::new(sigma2)
            .ok_or_else(|| KrigError::SingularBlock("increment block Sigma_2".into()))?;
        let w2 = chol.solve(&sigma20).transpose(); // m x l
        let w12 = self.system.weights(increment)?; // l x k
        let w1 = w10 - &w2 * w12;
        Ok((w1, w2))
    }

    /// Stage-two kriging covariance over `targets` by the rank-l downdate
    /// `Sigma_0 - Sigma_20' Sigma_2^-1 Sigma_20`.
    pub fn update_kriging_cov(&self, increment: &[usize], targets: &[usize]) -> Result<DMatrix<f64>> {
        let sigma0 = self.system.kriging_cov(targets)?;
        if increment.is_empty() {
            return Ok(sigma0);
        }
        let sigma2 = self.sigma2_block(increment)?;
        let sigma20 = self.sigma20_block(increment, targets)?;
        let chol = Cholesky::new(sigma2)
            .ok_or_else(|| KrigError::SingularBlock("increment block Sigma_2".into()))?;
        let z = chol
            .l_dirty()
            .solve_lower_triangular(&sigma20)
            .ok_or_else(|| KrigError::SingularBlock("increment block Sigma_2".into()))?;
        let mut out = sigma0 - z.transpose() * z;
        symmetrize(&mut out);
        Ok(out)
    }

    /// Chained GV bookkeeping: the tracked log-determinant after adding
    /// `increment` drops by `logdet Sigma_2`.
    pub fn chain_logdet(&self, increment: &[usize]) -> Result<f64> {
        let logdet = self.logdet.ok_or(KrigError::UntrackedLogdet)?;
        Ok(logdet - self.gv_increment_objective(increment)?)
    }

    /// New state on the enlarged design `xi union increment`; the tracked
    /// log-determinant, if any, is chained.
    pub fn extend(&self, increment: &[usize]) -> Result<StageState> {
        self.check_increment(increment)?;
        let new_logdet = match self.logdet {
            Some(_) => Some(self.chain_logdet(increment)?),
            None => None,
        };
        let mut indices = self.system.design().indices().to_vec();
        indices.extend_from_slice(increment);
        let system = self.rebuild(indices)?;
        Ok(StageState {
            system,
            logdet: new_logdet,
        })
    }

    /// New state with `drop` removed from the design. The tracked
    /// log-determinant grows by `logdet Sigma_2*` where `Sigma_2*` is the
    /// block at the dropped points under the *reduced* design.
    pub fn reduce(&self, drop: &[usize]) -> Result<StageState> {
        for &i in drop {
            if !self.system.design().contains(i) {
                return Err(KrigError::InvalidInput(format!(
                    "cannot drop index {i}: not in the design"
                )));
            }
        }
        let retained: Vec<usize> = self
            .system
            .design()
            .indices()
            .iter()
            .copied()
            .filter(|i| !drop.contains(i))
            .collect();
        let system = self.rebuild(retained)?;
        let reduced = StageState {
            system,
            logdet: None,
        };
        let new_logdet = match self.logdet {
            Some(v) => Some(v + logdet_psd(&reduced.sigma2_block(drop)?)),
            None => None,
        };
        Ok(StageState {
            logdet: new_logdet,
            ..reduced
        })
    }

    fn rebuild(&self, indices: Vec<usize>) -> Result<KrigingSystem> {
        let design = crate::design_space::Design::new(indices, self.system.set().len())?;
        KrigingSystem::build(
            self.system.set().clone(),
            design,
            self.system.model().clone(),
            self.system.variant().clone(),
        )
    }
}
