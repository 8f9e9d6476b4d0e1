//! Finite candidate universe, designs as index subsets, and trend bases.
//!
//! All internal math uses dense 0-based candidate indices; the `id` column of
//! a candidate file is an external label that is carried through to reports
//! but never used for indexing. Coordinates are treated as planar Euclidean;
//! no projection handling is attempted.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{KrigError, Result};

/// Hard cap on the number of candidate points a grid may generate.
pub const MAX_GRID_POINTS: usize = 8_000_000;

/// The finite set of N candidate locations, with optional named covariates
/// (e.g. elevation) used by external-drift trends.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    dim: usize,
    ids: Vec<i64>,
    /// Row-major N x dim coordinate storage.
    coords: Vec<f64>,
    covariate_names: Vec<String>,
    /// Row-major N x n_covariates storage.
    covariates: Vec<f64>,
}

impl CandidateSet {
    /// Builds a candidate set from per-point records, validating uniqueness
    /// of the ids and consistency of the coordinate dimension.
    pub fn new(
        dim: usize,
        ids: Vec<i64>,
        coords: Vec<f64>,
        covariate_names: Vec<String>,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(KrigError::InvalidInput("dimension must be >= 1".into()));
        }
        let n = ids.len();
        if n < 2 {
            return Err(KrigError::InvalidInput(format!(
                "need at least 2 candidate points, got {n}"
            )));
        }
        if coords.len() != n * dim {
            return Err(KrigError::LengthMismatch {
                expected: n * dim,
                got: coords.len(),
            });
        }
        if covariates.len() != n * covariate_names.len() {
            return Err(KrigError::LengthMismatch {
                expected: n * covariate_names.len(),
                got: covariates.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for &id in &ids {
            if !seen.insert(id) {
                return Err(KrigError::InvalidInput(format!("duplicate id {id}")));
            }
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(KrigError::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self {
            dim,
            ids,
            coords,
            covariate_names,
            covariates,
        })
    }

    /// Regular lattice `{spacing*1, ..., spacing*n}^d` with row-major ids
    /// starting at 0 (the last axis varies fastest).
    pub fn grid(n_per_axis: usize, dim: usize, spacing: f64) -> Result<Self> {
        if n_per_axis < 2 {
            return Err(KrigError::InvalidInput(format!(
                "grid needs n_per_axis >= 2, got {n_per_axis}"
            )));
        }
        if dim == 0 {
            return Err(KrigError::InvalidInput("dimension must be >= 1".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(KrigError::InvalidInput(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let n_total = n_per_axis
            .checked_pow(dim as u32)
            .filter(|&n| n <= MAX_GRID_POINTS)
            .ok_or_else(|| {
                KrigError::Capacity(format!(
                    "grid {n_per_axis}^{dim} exceeds the {MAX_GRID_POINTS}-point limit"
                ))
            })?;
        let mut coords = Vec::with_capacity(n_total * dim);
        let mut index = vec![0usize; dim];
        for _ in 0..n_total {
            for &i in &index {
                coords.push(spacing * (i + 1) as f64);
            }
            // odometer increment, last axis fastest
            for axis in (0..dim).rev() {
                index[axis] += 1;
                if index[axis] < n_per_axis {
                    break;
                }
                index[axis] = 0;
            }
        }
        let ids = (0..n_total as i64).collect();
        Self::new(dim, ids, coords, Vec::new(), Vec::new())
    }

    /// Loads candidates from a CSV file with header
    /// `id,x1[,x2,...,xd][,name1,...]`: coordinate columns are the ones named
    /// `x1..xd`, every later column is a covariate named by its header.
    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.first().map(|c| c.trim()) != Some("id") {
            return Err(KrigError::Parse {
                line: 1,
                msg: format!("first column must be 'id', got '{}'", cols.first().unwrap_or(&"")),
            });
        }
        let mut dim = 0usize;
        while 1 + dim < cols.len() && cols[1 + dim].trim() == format!("x{}", dim + 1) {
            dim += 1;
        }
        if dim == 0 {
            return Err(KrigError::Parse {
                line: 1,
                msg: "no coordinate columns (expected x1[,x2,...])".into(),
            });
        }
        let covariate_names: Vec<String> = cols[1 + dim..]
            .iter()
            .map(|c| c.trim().to_string())
            .collect();

        let mut ids = Vec::new();
        let mut coords = Vec::new();
        let mut covariates = Vec::new();
        let mut seen = HashSet::new();
        for (row_idx, record) in reader.records().enumerate() {
            let line = row_idx + 2; // 1-based, after the header
            let record = record.map_err(|e| KrigError::Parse {
                line,
                msg: e.to_string(),
            })?;
            if record.len() != cols.len() {
                return Err(KrigError::Parse {
                    line,
                    msg: format!("expected {} columns, got {}", cols.len(), record.len()),
                });
            }
            let parse_f64 = |field: &str, what: &str| -> Result<f64> {
                field.trim().parse::<f64>().map_err(|_| KrigError::Parse {
                    line,
                    msg: format!("non-numeric {what} '{field}'"),
                })
            };
            let id: i64 = record[0].trim().parse().map_err(|_| KrigError::Parse {
                line,
                msg: format!("non-integer id '{}'", &record[0]),
            })?;
            if !seen.insert(id) {
                return Err(KrigError::Parse {
                    line,
                    msg: format!("duplicate id {id}"),
                });
            }
            ids.push(id);
            for c in 0..dim {
                coords.push(parse_f64(&record[1 + c], "coordinate")?);
            }
            for c in 0..covariate_names.len() {
                covariates.push(parse_f64(&record[1 + dim + c], "covariate")?);
            }
        }
        Self::new(dim, ids, coords, covariate_names, covariates)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self, index: usize) -> i64 {
        self.ids[index]
    }

    pub fn ids(&self) -> &[i64] {
        &self.ids
    }

    pub fn coord(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_column(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn covariate(&self, index: usize, column: usize) -> f64 {
        self.covariates[index * self.covariate_names.len() + column]
    }

    /// Smallest nearest-neighbor distance over the whole set (brute force).
    pub fn min_nn_distance(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.coord(i);
            for j in (i + 1)..n {
                let b = self.coord(j);
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                if d2 < best {
                    best = d2;
                }
            }
        }
        best.sqrt()
    }
}

/// A design: a sorted set of distinct candidate indices with
/// `1 <= k <= N - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Design {
    indices: Vec<usize>,
}

impl Design {
    pub fn new(mut indices: Vec<usize>, n_candidates: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() || indices.len() >= n_candidates {
            return Err(KrigError::InvalidInput(format!(
                "design size {} out of range [1, {}]",
                indices.len(),
                n_candidates.saturating_sub(1)
            )));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(KrigError::InvalidInput("duplicate design index".into()));
        }
        if *indices.last().unwrap() >= n_candidates {
            return Err(KrigError::InvalidInput(format!(
                "design index {} out of bounds for {} candidates",
                indices.last().unwrap(),
                n_candidates
            )));
        }
        Ok(Self { indices })
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Sorted list of the `m = N - k` non-design indices.
    pub fn complement(&self, n_candidates: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n_candidates - self.k());
        let mut inside = self.indices.iter().peekable();
        for i in 0..n_candidates {
            if inside.peek() == Some(&&i) {
                inside.next();
            } else {
                out.push(i);
            }
        }
        out
    }
}

/// Trend (drift) basis `f(x)` of the linear model part.
#[derive(Debug, Clone, PartialEq)]
pub enum TrendBasis {
    /// f = (1)
    Constant,
    /// f = (1, x1, ..., xd)
    Linear,
    /// Full quadratic; in 2-D the column order is fixed as
    /// (1, x, y, x^2, y^2, xy) so design matrices are reproducible.
    Quadratic,
    /// Explicit monomials, one exponent vector (length d) per basis function.
    Monomials(Vec<Vec<u32>>),
    /// Columns (1, covariate), the covariate looked up by name.
    ExternalDrift(String),
}

impl TrendBasis {
    /// Number of basis functions for a given space dimension.
    pub fn p(&self, dim: usize) -> usize {
        match self {
            TrendBasis::Constant => 1,
            TrendBasis::Linear => dim + 1,
            TrendBasis::Quadratic => 1 + 2 * dim + dim * (dim - 1) / 2,
            TrendBasis::Monomials(list) => list.len(),
            TrendBasis::ExternalDrift(_) => 2,
        }
    }

    /// Validates the basis against a candidate set.
    pub fn validate(&self, set: &CandidateSet) -> Result<()> {
        match self {
            TrendBasis::Monomials(list) => {
                if list.is_empty() {
                    return Err(KrigError::InvalidInput("empty monomial list".into()));
                }
                if let Some(bad) = list.iter().find(|e| e.len() != set.dim()) {
                    return Err(KrigError::InvalidInput(format!(
                        "monomial exponent vector {:?} does not match dimension {}",
                        bad,
                        set.dim()
                    )));
                }
                Ok(())
            }
            TrendBasis::ExternalDrift(name) => set
                .covariate_column(name)
                .map(|_| ())
                .ok_or_else(|| KrigError::MissingCovariate(name.clone())),
            _ => Ok(()),
        }
    }

    /// Evaluates the basis row `f(x_index)` into `row`.
    fn fill_row(&self, set: &CandidateSet, index: usize, row: &mut [f64]) {
        let x = set.coord(index);
        match self {
            TrendBasis::Constant => row[0] = 1.0,
            TrendBasis::Linear => {
                row[0] = 1.0;
                row[1..1 + x.len()].copy_from_slice(x);
            }
            TrendBasis::Quadratic => {
                let d = x.len();
                row[0] = 1.0;
                row[1..1 + d].copy_from_slice(x);
                for (j, &xi) in x.iter().enumerate() {
                    row[1 + d + j] = xi * xi;
                }
                let mut c = 1 + 2 * d;
                for i in 0..d {
                    for j in (i + 1)..d {
                        row[c] = x[i] * x[j];
                        c += 1;
                    }
                }
            }
            TrendBasis::Monomials(list) => {
                for (c, exps) in list.iter().enumerate() {
                    row[c] = exps
                        .iter()
                        .zip(x)
                        .map(|(&e, &xi)| xi.powi(e as i32))
                        .product();
                }
            }
            TrendBasis::ExternalDrift(name) => {
                let col = set
                    .covariate_column(name)
                    .expect("external drift validated against the candidate set");
                row[0] = 1.0;
                row[1] = set.covariate(index, col);
            }
        }
    }

    /// Design matrix of the basis over `subset`: row i is `f(x_{subset[i]})`.
    pub fn matrix(&self, set: &CandidateSet, subset: &[usize]) -> Result<DMatrix<f64>> {
        self.validate(set)?;
        if let Some(&bad) = subset.iter().find(|&&i| i >= set.len()) {
            return Err(KrigError::InvalidInput(format!(
                "subset index {bad} out of bounds for {} candidates",
                set.len()
            )));
        }
        let p = self.p(set.dim());
        let mut m = DMatrix::zeros(subset.len(), p);
        let mut row = vec![0.0; p];
        for (r, &idx) in subset.iter().enumerate() {
            self.fill_row(set, idx, &mut row);
            for (c, &v) in row.iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }
}

/// Convenience wrapper matching the operation-style API.
pub fn make_grid(n_per_axis: usize, dim: usize, spacing: f64) -> Result<CandidateSet> {
    CandidateSet::grid(n_per_axis, dim, spacing)
}

/// See [`CandidateSet::load_csv`].
pub fn load_candidates<P: AsRef<Path>>(path: P) -> Result<CandidateSet> {
    CandidateSet::load_csv(path)
}

/// See [`TrendBasis::matrix`].
pub fn basis_matrix(basis: &TrendBasis, set: &CandidateSet, subset: &[usize]) -> Result<DMatrix<f64>> {
    basis.matrix(set, subset)
}

/// See [`Design::complement`].
pub fn complement(design: &Design, n_candidates: usize) -> Vec<usize> {
    design.complement(n_candidates)
}
