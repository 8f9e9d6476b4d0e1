//! Design-criterion functionals (GV, G, V, MES) and relative efficiencies.
//!
//! GV and MES are log-determinants and kept in log space throughout — raw
//! determinants of larger prediction sets overflow or underflow long before
//! the designs of interest are reached. G and V are plain nonnegative reals.
//! The scale-free per-point GV value uses the m-th root of the determinant
//! (one factor per prediction site).

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{cov_matrix, logdet_from_chol, CovModel};
use crate::design_space::{CandidateSet, Design};
use crate::error::{KrigError, Result};

/// The four supported design criteria. GV, G and V are minimized; MES is
/// maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Gv,
    G,
    V,
    Mes,
}

impl CriterionKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gv" => Ok(CriterionKind::Gv),
            "g" => Ok(CriterionKind::G),
            "v" => Ok(CriterionKind::V),
            "mes" => Ok(CriterionKind::Mes),
            other => Err(KrigError::InvalidInput(format!(
                "unknown criterion '{other}' (expected gv|g|v|mes)"
            ))),
        }
    }

    /// True for the log-determinant criteria.
    pub fn log_scale(&self) -> bool {
        matches!(self, CriterionKind::Gv | CriterionKind::Mes)
    }

    /// True when smaller values are better.
    pub fn minimized(&self) -> bool {
        !matches!(self, CriterionKind::Mes)
    }

    pub fn name(&self) -> &'static str {
        match self {
            CriterionKind::Gv => "gv",
            CriterionKind::G => "g",
            CriterionKind::V => "v",
            CriterionKind::Mes => "mes",
        }
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A criterion value tagged with its kind and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub kind: CriterionKind,
    pub value: f64,
    /// Whether `value` is a log-determinant.
    pub log_scale: bool,
}

impl CriterionValue {
    pub fn new(kind: CriterionKind, value: f64) -> Self {
        Self {
            kind,
            value,
            log_scale: kind.log_scale(),
        }
    }

    /// Degenerate (zero-volume) log-determinant, e.g. from duplicate points.
    pub fn is_degenerate(&self) -> bool {
        self.log_scale && self.value == f64::NEG_INFINITY
    }

    /// Scale-free per-point determinant value `exp(logdet / m)` for
    /// log-scale criteria; the raw value otherwise.
    pub fn per_point(&self, m: usize) -> f64 {
        if self.log_scale {
            (self.value / m as f64).exp()
        } else {
            self.value
        }
    }

    /// Comparison in the "smaller is better" sense for the criterion kind.
    pub fn better_than(&self, other: &CriterionValue) -> bool {
        if self.kind.minimized() {
            self.value < other.value
        } else {
            self.value > other.value
        }
    }
}

/// Log-determinant of a covariance matrix through its Cholesky factor.
/// A factorization failure signals a numerically singular (zero-volume)
/// matrix and yields the `-inf` sentinel rather than an error.
pub fn logdet_psd(sigma: &DMatrix<f64>) -> f64 {
    if sigma.nrows() == 0 {
        return 0.0;
    }
    match Cholesky::new(sigma.clone()) {
        Some(chol) => logdet_from_chol(&chol),
        None => f64::NEG_INFINITY,
    }
}

/// GV criterion: log-determinant of the kriging covariance matrix.
pub fn gv_value(sigma: &DMatrix<f64>) -> CriterionValue {
    CriterionValue::new(CriterionKind::Gv, logdet_psd(sigma))
}

/// G criterion: maximum kriging variance over the targets.
pub fn g_value(diag: &DVector<f64>) -> CriterionValue {
    let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CriterionValue::new(CriterionKind::G, max)
}

/// V criterion: average kriging variance over the targets.
pub fn v_value(diag: &DVector<f64>) -> CriterionValue {
    let mean = diag.iter().sum::<f64>() / diag.len() as f64;
    CriterionValue::new(CriterionKind::V, mean)
}

/// MES criterion: log-determinant of the design covariance block.
pub fn mes_value(model: &CovModel, set: &CandidateSet, design: &Design) -> Result<CriterionValue> {
    let c = cov_matrix(model, set, design.indices(), design.indices())?;
    let logdet = logdet_psd(&c);
    if logdet == f64::NEG_INFINITY {
        return Err(KrigError::SingularBlock("design covariance".into()));
    }
    Ok(CriterionValue::new(CriterionKind::Mes, logdet))
}

/// Relative efficiency of a design with respect to the optimal one.
///
/// For G and V this is the plain ratio `opt / value`. The determinant
/// criteria compare `sqrt(det)` (half log-difference in log space); for the
/// maximized MES criterion the ratio is inverted so that the result stays in
/// `(0, 1]` whenever `at_optimum` really is the better value.
pub fn relative_efficiency(
    kind: CriterionKind,
    at_optimum: &CriterionValue,
    at_design: &CriterionValue,
) -> Result<f64> {
    for v in [at_optimum, at_design] {
        if v.kind != kind {
            return Err(KrigError::KindMismatch {
                expected: kind.name().into(),
                got: v.kind.name().into(),
            });
        }
    }
    Ok(match kind {
        CriterionKind::Gv => (0.5 * (at_optimum.value - at_design.value)).exp(),
        CriterionKind::Mes => (0.5 * (at_design.value - at_optimum.value)).exp(),
        CriterionKind::G | CriterionKind::V => at_optimum.value / at_design.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logdet_of_diagonal() {
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        assert_relative_eq!(gv_value(&sigma).value, 4.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_matrix_gives_sentinel() {
        let sigma = DMatrix::from_element(2, 2, 1.0); // rank one
        let v = gv_value(&sigma);
        assert!(v.is_degenerate());
    }

    #[test]
    fn g_and_v_of_diagonal() {
        let diag = DVector::from_vec(vec![0.2, 0.7, 0.5]);
        assert_eq!(g_value(&diag).value, 0.7);
        assert_relative_eq!(v_value(&diag).value, 0.466_666_666_666_666_7, max_relative = 1e-12);
    }

    #[test]
    fn one_by_one_case_all_criteria_agree() {
        let sigma = DMatrix::from_element(1, 1, 0.37);
        let diag = DVector::from_element(1, 0.37);
        assert_relative_eq!(gv_value(&sigma).value, 0.37f64.ln(), max_relative = 1e-12);
        assert_eq!(g_value(&diag).value, 0.37);
        assert_eq!(v_value(&diag).value, 0.37);
    }

    #[test]
    fn v_scales_quadratically() {
        let diag = DVector::from_vec(vec![0.2, 0.7, 0.5]);
        let s = 3.0f64;
        let scaled = &diag * s * s;
        assert_relative_eq!(v_value(&scaled).value, s * s * v_value(&diag).value, max_relative = 1e-12);
    }

    #[test]
    fn mes_small_cases() {
        use crate::design_space::make_grid;
        let set = make_grid(3, 2, 1.0).unwrap();
        // k = 1: log sigma^2
        let model = CovModel::new(2.5, 1.0, 0.5).unwrap();
        let d = Design::new(vec![0], set.len()).unwrap();
        assert_relative_eq!(
            mes_value(&model, &set, &d).unwrap().value,
            2.5f64.ln(),
            max_relative = 1e-12
        );
        // phi -> 0: diagonal limit k log sigma^2
        let model = CovModel::new(2.0, 1e-9, 0.5).unwrap();
        let d = Design::new(vec![0, 4, 8], set.len()).unwrap();
        assert_relative_eq!(
            mes_value(&model, &set, &d).unwrap().value,
            3.0 * 2.0f64.ln(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn efficiency_self_is_one() {
        let v = CriterionValue::new(CriterionKind::Gv, -3.7);
        assert_eq!(relative_efficiency(CriterionKind::Gv, &v, &v).unwrap(), 1.0);
        let g = CriterionValue::new(CriterionKind::G, 0.4);
        assert_eq!(relative_efficiency(CriterionKind::G, &g, &g).unwrap(), 1.0);
    }

    #[test]
    fn efficiency_kind_mismatch() {
        let gv = CriterionValue::new(CriterionKind::Gv, -1.0);
        let g = CriterionValue::new(CriterionKind::G, 0.5);
        assert!(relative_efficiency(CriterionKind::Gv, &gv, &g).is_err());
    }

    #[test]
    fn gv_efficiency_is_root_det_ratio() {
        let opt = CriterionValue::new(CriterionKind::Gv, -10.0);
        let other = CriterionValue::new(CriterionKind::Gv, -8.0);
        let e = relative_efficiency(CriterionKind::Gv, &opt, &other).unwrap();
        assert_relative_eq!(e, (-1.0f64).exp(), max_relative = 1e-12);
        assert!(e <= 1.0 + 1e-9);
    }
}
