//! Matérn covariance model with optional nugget and geometric anisotropy,
//! plus covariance-matrix assembly between candidate subsets.
//!
//! The correlation is parameterized as
//! `rho(h) = 2^(1-kappa) / Gamma(kappa) * (h/phi)^kappa * K_kappa(h/phi)`,
//! the form used by geoR's `likfit`/`matern`. Mixing parameterizations is a
//! classic source of silent errors, hence the explicit statement here and in
//! the README.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::bessel::ln_bessel_k;
use crate::design_space::CandidateSet;
use crate::error::{KrigError, Result};

/// Geometric anisotropy: coordinates are rotated by `-angle` and the second
/// axis divided by `ratio` before distances are taken. Only defined in 2-D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    /// Rotation angle in radians.
    pub angle: f64,
    /// Axis ratio, `>= 1`; 1 means isotropy.
    pub ratio: f64,
}

/// Matérn covariance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovModel {
    /// Variance sigma^2 (response units squared).
    pub sigma2: f64,
    /// Range parameter phi.
    pub phi: f64,
    /// Smoothness parameter kappa.
    pub kappa: f64,
    /// Nugget tau^2 added on the diagonal (index-coincidence, not distance).
    #[serde(default)]
    pub nugget: f64,
    #[serde(default)]
    pub anisotropy: Option<Anisotropy>,
}

impl CovModel {
    pub fn new(sigma2: f64, phi: f64, kappa: f64) -> Result<Self> {
        let model = Self {
            sigma2,
            phi,
            kappa,
            nugget: 0.0,
            anisotropy: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_nugget(mut self, nugget: f64) -> Result<Self> {
        self.nugget = nugget;
        self.validate()?;
        Ok(self)
    }

    pub fn with_anisotropy(mut self, angle: f64, ratio: f64) -> Result<Self> {
        self.anisotropy = Some(Anisotropy { angle, ratio });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma2 > 0.0
            && self.sigma2.is_finite()
            && self.phi > 0.0
            && self.phi.is_finite()
            && self.kappa > 0.0
            && self.kappa.is_finite()
            && self.nugget >= 0.0
            && self.nugget.is_finite();
        if !ok {
            return Err(KrigError::InvalidInput(format!(
                "covariance parameters out of range: sigma2={}, phi={}, kappa={}, nugget={}",
                self.sigma2, self.phi, self.kappa, self.nugget
            )));
        }
        if let Some(a) = &self.anisotropy {
            if !(a.ratio >= 1.0 && a.ratio.is_finite() && a.angle.is_finite()) {
                return Err(KrigError::InvalidInput(format!(
                    "anisotropy out of range: angle={}, ratio={}",
                    a.angle, a.ratio
                )));
            }
        }
        Ok(())
    }

    /// sigma^2 * rho(effective distance between candidates i and j), plus the
    /// nugget when `i == j`.
    pub fn cov_between(&self, set: &CandidateSet, i: usize, j: usize) -> f64 {
        let h = effective_distance_unchecked(set.coord(i), set.coord(j), self.anisotropy.as_ref());
        let mut c = self.sigma2 * matern_corr(h, self.phi, self.kappa);
        if i == j {
            c += self.nugget;
        }
        c
    }
}

/// Matérn correlation in the geoR parameterization. `rho(0) = 1`, strictly
/// decreasing, `rho -> 0` as `h -> inf`.
pub fn matern_corr(h: f64, phi: f64, kappa: f64) -> f64 {
    assert!(h >= 0.0 && h.is_finite(), "distance must be finite and >= 0");
    assert!(phi > 0.0 && kappa > 0.0, "phi and kappa must be positive");
    if h == 0.0 {
        return 1.0;
    }
    let t = h / phi;
    let ln_rho = (1.0 - kappa) * std::f64::consts::LN_2
        - statrs::function::gamma::ln_gamma(kappa)
        + kappa * t.ln()
        + ln_bessel_k(kappa, t);
    // exact-arithmetic value is in (0, 1); clip rounding spills
    ln_rho.exp().clamp(0.0, 1.0)
}

/// Distance after the anisotropy transform; identity when `aniso` is absent
/// or the ratio is 1.
pub fn effective_distance(a: &[f64], b: &[f64], aniso: Option<&Anisotropy>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(KrigError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if aniso.is_some() && a.len() != 2 {
        return Err(KrigError::InvalidInput(format!(
            "anisotropy is only defined in 2-D, got dimension {}",
            a.len()
        )));
    }
    Ok(effective_distance_unchecked(a, b, aniso))
}

fn effective_distance_unchecked(a: &[f64], b: &[f64], aniso: Option<&Anisotropy>) -> f64 {
    match aniso {
        Some(an) if an.ratio != 1.0 => {
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            let (sin, cos) = an.angle.sin_cos();
            // rotate the difference vector by -angle, shrink the second axis
            let u = cos * dx + sin * dy;
            let v = (-sin * dx + cos * dy) / an.ratio;
            u.hypot(v)
        }
        _ => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            d2.sqrt()
        }
    }
}

/// Covariance matrix between two index subsets:
/// `entry(i, j) = sigma^2 rho(d(rows[i], cols[j])) + nugget * [rows[i] == cols[j]]`.
pub fn cov_matrix(
    model: &CovModel,
    set: &CandidateSet,
    rows: &[usize],
    cols: &[usize],
) -> Result<DMatrix<f64>> {
    model.validate()?;
    if model.anisotropy.is_some() && set.dim() != 2 {
        return Err(KrigError::InvalidInput(
            "anisotropy is only defined in 2-D".into(),
        ));
    }
    for &i in rows.iter().chain(cols) {
        if i >= set.len() {
            return Err(KrigError::InvalidInput(format!(
                "index {i} out of bounds for {} candidates",
                set.len()
            )));
        }
    }
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            m[(r, c)] = model.cov_between(set, i, j);
        }
    }
    Ok(m)
}

/// Jitter escalation used when factorizing covariance matrices: start at
/// `1e-10 sigma^2`, multiply by 10 up to `1e-6 sigma^2`, then give up.
pub const JITTER_START_FACTOR: f64 = 1e-10;
pub const JITTER_MAX_FACTOR: f64 = 1e-6;

/// Cholesky factorization with the escalating-jitter safeguard. Returns the
/// factor and the jitter that was needed (0.0 in the usual case).
pub fn chol_with_jitter(matrix: &DMatrix<f64>, sigma2: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok((chol, 0.0));
    }
    let mut factor = JITTER_START_FACTOR;
    while factor <= JITTER_MAX_FACTOR * (1.0 + 1e-12) {
        let jitter = factor * sigma2;
        let mut jittered = matrix.clone();
        for i in 0..matrix.nrows() {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok((chol, jitter));
        }
        factor *= 10.0;
    }
    Err(KrigError::SingularModel {
        max_jitter: JITTER_MAX_FACTOR * sigma2,
    })
}

/// Log-determinant read off a Cholesky factor.
pub fn logdet_from_chol(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].ln();
    }
    2.0 * acc
}
