//! Design optimizers: exhaustive enumeration, exchange + simulated
//! annealing, increment selection and the incremental–decremental loop.
//!
//! Everything is deterministic for a fixed `(instance, config, seed)`:
//! restarts derive their own RNG streams from the base seed, run
//! independently (possibly in parallel) and are reduced in restart order
//! with lexicographic tie-breaking on the design, so the result does not
//! depend on the worker count.
//!
//! GV searches never evaluate a determinant over the prediction sites.
//! Values are tracked through chained block updates relative to a fixed
//! reference design; one full evaluation of the final design (outside the
//! search loop, not counted) converts the result to an absolute criterion
//! value when the prediction set is small enough to allow it.

use std::sync::Arc;
use std::time::Instant;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovModel;
use crate::criteria::{CriterionKind, CriterionValue};
use crate::design_space::{CandidateSet, Design};
use crate::error::{KrigError, Result};
use crate::incremental::StageState;
use crate::kriging::{KrigingSystem, KrigingVariant};

/// A problem instance: candidate set, covariance model and kriging variant.
#[derive(Debug, Clone)]
pub struct Instance {
    pub set: Arc<CandidateSet>,
    pub model: CovModel,
    pub variant: KrigingVariant,
}

impl Instance {
    pub fn new(set: Arc<CandidateSet>, model: CovModel, variant: KrigingVariant) -> Self {
        Self {
            set,
            model,
            variant,
        }
    }

    pub fn n(&self) -> usize {
        self.set.len()
    }

    pub fn p(&self) -> usize {
        self.variant.p(self.set.dim())
    }

    pub fn build_system(&self, design: &Design) -> Result<KrigingSystem> {
        KrigingSystem::build(
            self.set.clone(),
            design.clone(),
            self.model.clone(),
            self.variant.clone(),
        )
    }
}

/// Annealing schedule. `t0 = None` estimates the initial temperature from
/// the criterion spread over 50 sampled exchanges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealParams {
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default = "default_cooling")]
    pub cooling: f64,
    #[serde(default = "default_moves")]
    pub moves_per_temperature: usize,
}

fn default_cooling() -> f64 {
    0.9
}

fn default_moves() -> usize {
    50
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            t0: None,
            cooling: default_cooling(),
            moves_per_temperature: default_moves(),
        }
    }
}

/// Incremental–decremental loop parameters. Defaults: start at the minimal
/// feasible size, drop two points per round, loop until no improvement.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IncrDecrParams {
    #[serde(default)]
    pub k_start: Option<usize>,
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub k1: Option<usize>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
}

fn default_rounds() -> usize {
    30
}

/// Search configuration shared by all optimizers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(default)]
    pub seed: u64,
    /// Stop safeguard: maximum number of temperature plateaus / rounds.
    #[serde(default = "default_max_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Exchange neighborhood radius in grid units (multiples of the
    /// smallest nearest-neighbor distance).
    #[serde(default = "default_neighborhood_radius")]
    pub neighborhood_radius: f64,
    #[serde(default)]
    pub anneal: AnnealParams,
    #[serde(default)]
    pub incr_decr: IncrDecrParams,
    /// Cap on exhaustive design enumeration.
    #[serde(default = "default_exhaustive_cap")]
    pub exhaustive_cap: u64,
    /// Cap on exact increment enumeration.
    #[serde(default = "default_increment_cap")]
    pub increment_cap: u64,
    /// Largest prediction-set size for which GV results are converted to an
    /// absolute log-determinant after the search.
    #[serde(default = "default_full_eval_cap")]
    pub full_eval_cap: usize,
    /// Record a per-iteration trace of best values.
    #[serde(default)]
    pub trace: bool,
}

fn default_max_outer_iters() -> usize {
    500
}

fn default_restarts() -> usize {
    10
}

fn default_neighborhood_radius() -> f64 {
    2.0
}

fn default_exhaustive_cap() -> u64 {
    200_000
}

fn default_increment_cap() -> u64 {
    10_000
}

fn default_full_eval_cap() -> usize {
    4_000
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_outer_iters: default_max_outer_iters(),
            restarts: default_restarts(),
            neighborhood_radius: default_neighborhood_radius(),
            anneal: AnnealParams::default(),
            incr_decr: IncrDecrParams::default(),
            exhaustive_cap: default_exhaustive_cap(),
            increment_cap: default_increment_cap(),
            full_eval_cap: default_full_eval_cap(),
            trace: false,
        }
    }
}

/// Outcome of a search run.
///
/// `criterion_calls` counts objective evaluations: one per candidate design,
/// exchange proposal or increment scored. GV searches only ever do
/// increment-block work per call; the conversion of the winning design to an
/// absolute value happens once afterwards and is not counted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub design: Vec<usize>,
    pub design_ids: Vec<i64>,
    pub criterion: CriterionValue,
    /// True when a GV value is only known relative to an internal reference
    /// design (prediction set too large for a final full evaluation).
    pub criterion_is_relative: bool,
    pub criterion_calls: u64,
    pub iterations: u64,
    pub elapsed_seconds: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn n_choose_k(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed; deterministic and collision-resistant enough for
/// distributing restart streams.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0xA5A5_5A5A_DEAD_BEEF)))
}

/// Direct (non-incremental) criterion evaluation of a design over its
/// complement. This is the brute-force path used by the exhaustive oracle
/// and for the final value of a search; the annealing loops for GV never
/// call it.
pub fn evaluate_design(
    instance: &Instance,
    design: &Design,
    kind: CriterionKind,
) -> Result<CriterionValue> {
    match kind {
        CriterionKind::Mes => {
            crate::criteria::mes_value(&instance.model, &instance.set, design)
        }
        CriterionKind::Gv => {
            let sys = instance.build_system(design)?;
            let targets = design.complement(instance.n());
            let sigma = sys.kriging_cov(&targets)?;
            Ok(crate::criteria::gv_value(&sigma))
        }
        CriterionKind::G | CriterionKind::V => {
            let sys = instance.build_system(design)?;
            let targets = design.complement(instance.n());
            let diag = sys.kriging_variances(&targets)?;
            Ok(match kind {
                CriterionKind::G => crate::criteria::g_value(&diag),
                _ => crate::criteria::v_value(&diag),
            })
        }
    }
}

/// Score in "smaller is better" orientation.
fn oriented(kind: CriterionKind, value: f64) -> f64 {
    if kind.minimized() {
        value
    } else {
        -value
    }
}

/// (score, design) ordering with lexicographic tie-break.
fn better(a_score: f64, a_design: &[usize], b_score: f64, b_design: &[usize]) -> bool {
    a_score < b_score || (a_score == b_score && a_design < b_design)
}

// ---------------------------------------------------------------------------
// exhaustive enumeration
// ---------------------------------------------------------------------------

/// Result of [`exhaustive_optimal`]: the optimum plus every design whose
/// score ties it within relative 1e-9.
#[derive(Debug, Clone)]
pub struct ExhaustiveOutcome {
    pub best: SearchResult,
    pub ties: Vec<Vec<usize>>,
}

/// Global optimum over all `C(N, k)` designs by direct evaluation.
/// Deterministic; errors if the enumeration exceeds the configured cap.
pub fn exhaustive_optimal(
    instance: &Instance,
    kind: CriterionKind,
    k: usize,
    config: &SearchConfig,
) -> Result<ExhaustiveOutcome> {
    let n = instance.n();
    let count = n_choose_k(n, k);
    if count > config.exhaustive_cap {
        return Err(KrigError::Capacity(format!(
            "C({n},{k}) = {count} exceeds the exhaustive cap {}",
            config.exhaustive_cap
        )));
    }
    let started = Instant::now();
    let mut calls = 0u64;
    let mut scores = Vec::with_capacity(count as usize);
    let mut best_score = f64::INFINITY;
    let mut best_design: Option<Vec<usize>> = None;
    for combo in (0..n).combinations(k) {
        let design = Design::new(combo.clone(), n)?;
        calls += 1;
        let score = match evaluate_design(instance, &design, kind) {
            Ok(v) => oriented(kind, v.value),
            Err(_) => f64::INFINITY,
        };
        scores.push(score);
        if best_design.is_none() || better(score, &combo, best_score, best_design.as_ref().unwrap())
        {
            best_score = score;
            best_design = Some(combo);
        }
    }
    let best_design = best_design.ok_or_else(|| KrigError::InvalidInput("empty enumeration".into()))?;
    let tol = 1e-9 * best_score.abs().max(1.0);
    let ties: Vec<Vec<usize>> = (0..n)
        .combinations(k)
        .zip(&scores)
        .filter(|(_, &s)| s - best_score <= tol)
        .map(|(c, _)| c)
        .collect();

    let value = CriterionValue::new(kind, if kind.minimized() { best_score } else { -best_score });
    Ok(ExhaustiveOutcome {
        best: SearchResult {
            design_ids: best_design.iter().map(|&i| instance.set.id(i)).collect(),
            design: best_design,
            criterion: value,
            criterion_is_relative: false,
            criterion_calls: calls,
            iterations: count,
            elapsed_seconds: started.elapsed().as_secs_f64(),
            seed: config.seed,
            trace: None,
        },
        ties,
    })
}

// ---------------------------------------------------------------------------
// neighborhoods
// ---------------------------------------------------------------------------

/// Per-candidate exchange pools: every candidate within
/// `radius x (smallest nearest-neighbor distance)`, falling back to the 8
/// nearest candidates where the ball is too empty (irregular sets).
fn neighbor_pools(set: &CandidateSet, radius_units: f64) -> Vec<Vec<usize>> {
    let n = set.len();
    let unit = set.min_nn_distance();
    let radius = radius_units * unit + 1e-9;
    let mut pools = Vec::with_capacity(n);
    for i in 0..n {
        let a = set.coord(i);
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let b = set.coord(j);
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (d2.sqrt(), j)
            })
            .collect();
        let mut pool: Vec<usize> = dists
            .iter()
            .filter(|(d, _)| *d <= radius)
            .map(|&(_, j)| j)
            .collect();
        if pool.len() < 4 {
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            pool = dists.iter().take(8).map(|&(_, j)| j).collect();
            pool.sort_unstable();
        }
        pools.push(pool);
    }
    pools
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

// ---------------------------------------------------------------------------
// annealing with exchange moves
// ---------------------------------------------------------------------------

/// How a search run picks its starting designs.
#[derive(Debug, Clone)]
pub enum StartMode {
    /// Uniformly random subsets, one per restart.
    Random,
    /// The given design for the first restart, random for the others.
    Warm(Design),
}

/// Objective state for the annealing loop: either chained GV bookkeeping or
/// direct evaluation of the other criteria.
enum MoveState {
    Gv {
        state: StageState,
    },
    Direct {
        kind: CriterionKind,
        design: Vec<usize>,
        value: f64,
    },
}

impl MoveState {
    fn design(&self) -> Vec<usize> {
        match self {
            MoveState::Gv { state } => state.system().design().indices().to_vec(),
            MoveState::Direct { design, .. } => design.clone(),
        }
    }

    /// Current value in minimization orientation.
    fn score(&self) -> f64 {
        match self {
            MoveState::Gv { state } => state.logdet().unwrap(),
            MoveState::Direct { kind, value, .. } => oriented(*kind, *value),
        }
    }
}

struct RestartOutcome {
    best_score: f64,
    best_design: Vec<usize>,
    calls: u64,
    iterations: u64,
    trace: Vec<f64>,
}

/// Deterministic feasible reference design of size `k`, shared by all
/// restarts of a run so their chained GV values are comparable.
fn find_reference(instance: &Instance, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = instance.n();
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xREF0 + attempt));
        let cand = random_subset(&mut rng, n, k);
        if instance.build_system(&Design::new(cand.clone(), n)?).is_ok() {
            return Ok(cand);
        }
    }
    Err(KrigError::InvalidInput(
        "no feasible reference design found".into(),
    ))
}

/// Random design of size `k` for which the kriging system is buildable.
fn random_feasible_subset(instance: &Instance, rng: &mut ChaCha8Rng, k: usize) -> Result<Vec<usize>> {
    let n = instance.n();
    for _ in 0..64 {
        let cand = random_subset(rng, n, k);
        if instance.build_system(&Design::new(cand.clone(), n)?).is_ok() {
            return Ok(cand);
        }
    }
    Err(KrigError::InvalidInput(
        "no feasible random start found".into(),
    ))
}

/// Chained GV state for `target`, relative to the shared `reference` design
/// of the same size: the target is reached by one joint increment followed
/// by one joint decrement, so every intermediate design is a superset of a
/// feasible design.
fn chained_gv_state(
    instance: &Instance,
    reference: &[usize],
    target: &[usize],
    calls: &mut u64,
) -> Result<StageState> {
    let n = instance.n();
    let system = instance.build_system(&Design::new(reference.to_vec(), n)?)?;
    let mut state = StageState::with_logdet(system, 0.0);
    let ins: Vec<usize> = target
        .iter()
        .copied()
        .filter(|i| !reference.contains(i))
        .collect();
    let outs: Vec<usize> = reference
        .iter()
        .copied()
        .filter(|i| !target.contains(i))
        .collect();
    if !ins.is_empty() {
        state = state.extend(&ins)?;
        *calls += 1;
    }
    if !outs.is_empty() {
        state = state.reduce(&outs)?;
        *calls += 1;
    }
    Ok(state)
}

fn init_move_state(
    instance: &Instance,
    kind: CriterionKind,
    reference: &[usize],
    design: &[usize],
    calls: &mut u64,
) -> Result<MoveState> {
    match kind {
        CriterionKind::Gv => Ok(MoveState::Gv {
            state: chained_gv_state(instance, reference, design, calls)?,
        }),
        _ => {
            let d = Design::new(design.to_vec(), instance.n())?;
            *calls += 1;
            let value = evaluate_design(instance, &d, kind)?.value;
            Ok(MoveState::Direct {
                kind,
                design: d.indices().to_vec(),
                value,
            })
        }
    }
}

/// Scores the design obtained by swapping `out` for `inc`. For GV the swap
/// is chained as extend-then-reduce (the enlarged intermediate is always
/// feasible) and the resulting state is returned for a cheap commit.
/// Infeasible proposals score `+inf` and are never accepted.
fn eval_swap(
    instance: &Instance,
    current: &MoveState,
    out: usize,
    inc: usize,
    calls: &mut u64,
) -> Result<(f64, Option<StageState>)> {
    *calls += 1;
    match current {
        MoveState::Gv { state } => {
            let swapped = state
                .extend(&[inc])
                .and_then(|extended| extended.reduce(&[out]));
            match swapped {
                Ok(next) => {
                    let score = next.logdet().unwrap();
                    Ok((score, Some(next)))
                }
                Err(KrigError::SingularModel { .. } | KrigError::SingularBlock(_)) => {
                    Ok((f64::INFINITY, None))
                }
                Err(e) => Err(e),
            }
        }
        MoveState::Direct { kind, design, .. } => {
            let mut next: Vec<usize> = design.iter().copied().filter(|&i| i != out).collect();
            next.push(inc);
            let d = Design::new(next, instance.n())?;
            let value = match evaluate_design(instance, &d, *kind) {
                Ok(v) => v.value,
                Err(_) => return Ok((f64::INFINITY, None)),
            };
            Ok((oriented(*kind, value), None))
        }
    }
}

fn anneal_restart(
    instance: &Instance,
    kind: CriterionKind,
    reference: &[usize],
    start: Vec<usize>,
    pools: &[Vec<usize>],
    config: &SearchConfig,
    seed: u64,
) -> Result<RestartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut calls = 0u64;
    let mut state = init_move_state(instance, kind, reference, &start, &mut calls)?;
    let mut best_score = state.score();
    let mut best_design = state.design();
    let k = best_design.len();

    // random exchange proposal: position uniform, replacement uniform over
    // the point's pool minus the design
    let propose = |rng: &mut ChaCha8Rng, design: &[usize]| -> Option<(usize, usize)> {
        for _ in 0..32 {
            let out = design[rng.random_range(0..k)];
            let candidates: Vec<usize> = pools[out]
                .iter()
                .copied()
                .filter(|c| !design.contains(c))
                .collect();
            if !candidates.is_empty() {
                return Some((out, candidates[rng.random_range(0..candidates.len())]));
            }
        }
        None
    };

    // initial temperature from the spread of sampled exchanges
    let t0 = match config.anneal.t0 {
        Some(t) => t,
        None => {
            let design = state.design();
            let mut acc = 0.0;
            let mut cnt = 0u32;
            for _ in 0..50 {
                if let Some((out, inc)) = propose(&mut rng, &design) {
                    let (score, _) = eval_swap(instance, &state, out, inc, &mut calls)?;
                    if score.is_finite() {
                        acc += (score - state.score()).abs();
                        cnt += 1;
                    }
                }
            }
            if cnt == 0 || acc == 0.0 {
                1.0
            } else {
                acc / cnt as f64
            }
        }
    };

    let mut temperature = t0;
    let mut plateaus = 0u64;
    let mut trace = Vec::new();
    for _ in 0..config.max_outer_iters {
        plateaus += 1;
        let mut improved = false;
        for _ in 0..config.anneal.moves_per_temperature {
            let design = state.design();
            let Some((out, inc)) = propose(&mut rng, &design) else {
                continue;
            };
            let (score, swapped) = eval_swap(instance, &state, out, inc, &mut calls)?;
            if score == f64::INFINITY {
                continue; // degenerate or infeasible proposal
            }
            let delta = score - state.score();
            let accept = delta <= 0.0
                || (temperature > 0.0 && rng.random::<f64>() < (-delta / temperature).exp());
            if accept {
                state = match (swapped, &state) {
                    (Some(next), MoveState::Gv { .. }) => MoveState::Gv { state: next },
                    (_, MoveState::Direct { kind, design, .. }) => {
                        let mut next: Vec<usize> =
                            design.iter().copied().filter(|&i| i != out).collect();
                        next.push(inc);
                        next.sort_unstable();
                        MoveState::Direct {
                            kind: *kind,
                            design: next,
                            value: if kind.minimized() { score } else { -score },
                        }
                    }
                    _ => unreachable!("swapped state accompanies every GV proposal"),
                };
                let current = state.design();
                if better(state.score(), &current, best_score, &best_design) {
                    if state.score() < best_score {
                        improved = true;
                    }
                    best_score = state.score();
                    best_design = current;
                }
            }
        }
        if config.trace {
            trace.push(best_score);
        }
        if !improved {
            break; // converged: a full plateau without improvement
        }
        temperature *= config.anneal.cooling;
    }

    Ok(RestartOutcome {
        best_score,
        best_design,
        calls,
        iterations: plateaus,
        trace,
    })
}

/// Reduces per-restart outcomes in restart order (deterministic regardless
/// of how they were computed) and converts the winner to a `SearchResult`.
fn finish_run(
    instance: &Instance,
    kind: CriterionKind,
    outcomes: Vec<RestartOutcome>,
    config: &SearchConfig,
    started: Instant,
) -> Result<SearchResult> {
    let mut calls = 0u64;
    let mut iterations = 0u64;
    let mut winner: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for o in outcomes {
        calls += o.calls;
        iterations += o.iterations;
        let replace = match &winner {
            None => true,
            Some((score, design, _)) => better(o.best_score, &o.best_design, *score, design),
        };
        if replace {
            winner = Some((o.best_score, o.best_design, o.trace));
        }
    }
    let (score, design, trace) =
        winner.ok_or_else(|| KrigError::InvalidInput("no restarts executed".into()))?;

    let m = instance.n() - design.len();
    let (criterion, relative, trace) = if kind == CriterionKind::Gv {
        if m <= config.full_eval_cap {
            let d = Design::new(design.clone(), instance.n())?;
            let absolute = evaluate_design(instance, &d, kind)?;
            let shift = absolute.value - score;
            let shifted = trace.iter().map(|v| v + shift).collect();
            (absolute, false, shifted)
        } else {
            (CriterionValue::new(kind, score), true, trace)
        }
    } else {
        let value = if kind.minimized() { score } else { -score };
        (CriterionValue::new(kind, value), false, trace)
    };

    Ok(SearchResult {
        design_ids: design.iter().map(|&i| instance.set.id(i)).collect(),
        design,
        criterion,
        criterion_is_relative: relative,
        criterion_calls: calls,
        iterations,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        seed: config.seed,
        trace: if config.trace { Some(trace) } else { None },
    })
}

/// Fixed-size design optimization by neighboring-point exchanges with
/// simulated annealing, multi-restart.
pub fn anneal_exchange(
    instance: &Instance,
    kind: CriterionKind,
    k: usize,
    config: &SearchConfig,
    start: StartMode,
) -> Result<SearchResult> {
    let n = instance.n();
    if k < 1 || k >= n {
        return Err(KrigError::InvalidInput(format!(
            "design size {k} out of range for {n} candidates"
        )));
    }
    if k < instance.p() {
        return Err(KrigError::UnderIdentifiedTrend {
            k,
            p: instance.p(),
        });
    }
    let started = Instant::now();
    let pools = neighbor_pools(&instance.set, config.neighborhood_radius);
    let reference = find_reference(instance, k, config.seed)?;
    let restarts = config.restarts.max(1);
    let outcomes: Vec<Result<RestartOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            let start_design = match (&start, r) {
                (StartMode::Warm(d), 0) => d.indices().to_vec(),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5747));
                    random_feasible_subset(instance, &mut rng, k)?
                }
            };
            anneal_restart(instance, kind, &reference, start_design, &pools, config, seed)
        })
        .collect();
    let outcomes: Result<Vec<RestartOutcome>> = outcomes.into_iter().collect();
    finish_run(instance, kind, outcomes?, config, started)
}

// ---------------------------------------------------------------------------
// increment selection
// ---------------------------------------------------------------------------

/// Objective for increment selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementObjective {
    /// Maximize the log-determinant of the increment block (GV).
    Gv,
    /// Maximize the trace objective (V).
    V,
}

impl IncrementObjective {
    pub fn from_criterion(kind: CriterionKind) -> Result<Self> {
        match kind {
            CriterionKind::Gv | CriterionKind::Mes => Ok(IncrementObjective::Gv),
            CriterionKind::V => Ok(IncrementObjective::V),
            CriterionKind::G => Err(KrigError::InvalidInput(
                "no increment objective exists for the G criterion".into(),
            )),
        }
    }
}

fn increment_score(state: &StageState, objective: IncrementObjective, incr: &[usize]) -> f64 {
    match objective {
        IncrementObjective::Gv => state
            .gv_increment_objective(incr)
            .unwrap_or(f64::NEG_INFINITY),
        IncrementObjective::V => state
            .v_increment_objective(incr)
            .unwrap_or(f64::NEG_INFINITY),
    }
}

/// Chooses an `l`-point increment maximizing the objective: exact
/// enumeration under the cap, otherwise greedy seeding followed by
/// exchange refinement (annealed, then steepest ascent to a local optimum).
/// Returns the increment (sorted) and the number of objective evaluations.
pub fn select_increment(
    state: &StageState,
    l: usize,
    objective: IncrementObjective,
    config: &SearchConfig,
    seed: u64,
) -> Result<(Vec<usize>, u64)> {
    if l == 0 {
        return Err(KrigError::InvalidInput("increment size must be >= 1".into()));
    }
    let n = state.system().set().len();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| !state.system().design().contains(i))
        .collect();
    if candidates.len() < l {
        return Err(KrigError::InvalidInput(format!(
            "only {} candidates for an increment of {l}",
            candidates.len()
        )));
    }
    let mut calls = 0u64;

    if n_choose_k(candidates.len(), l) <= config.increment_cap {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for combo in candidates.iter().copied().combinations(l) {
            calls += 1;
            let score = increment_score(state, objective, &combo);
            let replace = match &best {
                None => true,
                Some((s, d)) => score > *s || (score == *s && combo < *d),
            };
            if replace {
                best = Some((score, combo));
            }
        }
        let (_, incr) = best.unwrap();
        return Ok((incr, calls));
    }

    // greedy one-point-at-a-time seeding
    let mut chosen: Vec<usize> = Vec::with_capacity(l);
    for _ in 0..l {
        let mut best: Option<(f64, usize)> = None;
        for &c in &candidates {
            if chosen.contains(&c) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(c);
            calls += 1;
            let score = increment_score(state, objective, &trial);
            if best.is_none() || score > best.unwrap().0 {
                best = Some((score, c));
            }
        }
        chosen.push(best.unwrap().1);
    }
    chosen.sort_unstable();

    // annealed exchange restricted to the increment
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = chosen.clone();
    let mut current_score = increment_score(state, objective, &current);
    calls += 1;
    let mut best = (current_score, current.clone());
    let mut t = {
        let mut acc = 0.0;
        let mut cnt = 0;
        for _ in 0..20 {
            let pos = rng.random_range(0..l);
            let c = candidates[rng.random_range(0..candidates.len())];
            if current.contains(&c) {
                continue;
            }
            let mut trial = current.clone();
            trial[pos] = c;
            calls += 1;
            let s = increment_score(state, objective, &trial);
            if s.is_finite() {
                acc += (s - current_score).abs();
                cnt += 1;
            }
        }
        if cnt == 0 || acc == 0.0 {
            1.0
        } else {
            acc / cnt as f64
        }
    };
    for _ in 0..config.max_outer_iters.min(60) {
        let mut improved = false;
        for _ in 0..config.anneal.moves_per_temperature {
            let pos = rng.random_range(0..l);
            let c = candidates[rng.random_range(0..candidates.len())];
            if current.contains(&c) {
                continue;
            }
            let mut trial = current.clone();
            trial[pos] = c;
            trial.sort_unstable();
            calls += 1;
            let s = increment_score(state, objective, &trial);
            let delta = current_score - s; // maximization
            if delta <= 0.0 || (t > 0.0 && rng.random::<f64>() < (-delta / t).exp()) {
                current = trial;
                current_score = s;
                if s > best.0 || (s == best.0 && current < best.1) {
                    if s > best.0 {
                        improved = true;
                    }
                    best = (s, current.clone());
                }
            }
        }
        if !improved {
            break;
        }
        t *= config.anneal.cooling;
    }

    // deterministic steepest-ascent polish
    let (mut best_score, mut incr) = best;
    loop {
        let mut improved = false;
        for pos in 0..l {
            for &c in &candidates {
                if incr.contains(&c) {
                    continue;
                }
                let mut trial = incr.clone();
                trial[pos] = c;
                trial.sort_unstable();
                calls += 1;
                let s = increment_score(state, objective, &trial);
                if s > best_score || (s == best_score && trial < incr) {
                    if s > best_score {
                        improved = true;
                    }
                    best_score = s;
                    incr = trial;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((incr, calls))
}

// ---------------------------------------------------------------------------
// incremental-decremental optimization
// ---------------------------------------------------------------------------

/// Builds designs of size `k_target` by repeated increment/decrement rounds.
///
/// Starts from a random design of minimal feasible size, adds an optimal
/// increment, then loops: drop `l1` points (systematically over all retained
/// subsets when feasible, otherwise sampled), re-add an optimal increment,
/// and keep the best same-size design found. GV progress is tracked through
/// chained block determinants; the V criterion re-evaluates candidate
/// designs directly.
pub fn incr_decr_optimize(
    instance: &Instance,
    kind: CriterionKind,
    k_target: usize,
    config: &SearchConfig,
) -> Result<SearchResult> {
    let n = instance.n();
    let p = instance.p();
    if k_target <= p {
        return Err(KrigError::InvalidInput(format!(
            "k_target {k_target} must exceed the trend size {p}"
        )));
    }
    if k_target >= n {
        return Err(KrigError::InvalidInput(format!(
            "k_target {k_target} out of range for {n} candidates"
        )));
    }
    let objective = IncrementObjective::from_criterion(kind)?;
    if kind == CriterionKind::Mes {
        return Err(KrigError::InvalidInput(
            "incremental-decremental search supports gv and v criteria".into(),
        ));
    }
    let started = Instant::now();
    let k_start = config.incr_decr.k_start.unwrap_or(p.max(1)).clamp(p.max(1), k_target);
    let k1_default = k_target.saturating_sub(2).max(p.max(1));
    let k1 = config
        .incr_decr
        .k1
        .unwrap_or(k1_default)
        .clamp(p.max(1), k_target - 1);
    let l1 = k_target - k1;
    let rounds_cap = config.incr_decr.rounds.min(config.max_outer_iters);

    let reference = find_reference(instance, k_start, config.seed)?;
    let restarts = config.restarts.max(1);
    let outcomes: Vec<Result<RestartOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            incr_decr_restart(
                instance, kind, objective, &reference, k_target, k_start, k1, l1, rounds_cap,
                config, seed,
            )
        })
        .collect();
    let outcomes: Result<Vec<RestartOutcome>> = outcomes.into_iter().collect();
    finish_run(instance, kind, outcomes?, config, started)
}

#[allow(clippy::too_many_arguments)]
fn incr_decr_restart(
    instance: &Instance,
    kind: CriterionKind,
    objective: IncrementObjective,
    reference: &[usize],
    k_target: usize,
    k_start: usize,
    k1: usize,
    l1: usize,
    rounds_cap: usize,
    config: &SearchConfig,
    seed: u64,
) -> Result<RestartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut calls = 0u64;

    // random feasible start of size k_start, chained from the shared
    // reference so GV values stay comparable across restarts
    let start = random_feasible_subset(instance, &mut rng, k_start)?;
    let mut state = chained_gv_state(instance, reference, &start, &mut calls)?;

    if k_start < k_target {
        let (incr, c) = select_increment(
            &state,
            k_target - k_start,
            objective,
            config,
            derive_seed(seed, 1),
        )?;
        calls += c;
        state = state.extend(&incr)?;
    }

    let score_of = |state: &StageState, calls: &mut u64| -> Result<f64> {
        match kind {
            CriterionKind::Gv => Ok(state.logdet().unwrap()),
            _ => {
                *calls += 1;
                let d = state.system().design().clone();
                Ok(oriented(kind, evaluate_design(instance, &d, kind)?.value))
            }
        }
    };

    let mut current_score = score_of(&state, &mut calls)?;
    let mut trace = vec![current_score];
    let mut rounds = 0u64;
    let subset_count = n_choose_k(k_target, k1);
    let systematic = subset_count <= config.increment_cap;

    for round in 0..rounds_cap {
        rounds += 1;
        let design_now: Vec<usize> = state.system().design().indices().to_vec();
        let retained_sets: Vec<Vec<usize>> = if systematic {
            design_now.iter().copied().combinations(k1).collect()
        } else {
            (0..64)
                .map(|_| {
                    let mut d = design_now.clone();
                    for i in 0..k1 {
                        let j = rng.random_range(i..d.len());
                        d.swap(i, j);
                    }
                    let mut s = d[..k1].to_vec();
                    s.sort_unstable();
                    s
                })
                .collect()
        };

        let mut best_round: Option<(f64, StageState)> = None;
        for (s_idx, retained) in retained_sets.iter().enumerate() {
            let drop: Vec<usize> = design_now
                .iter()
                .copied()
                .filter(|i| !retained.contains(i))
                .collect();
            calls += 1; // decrement block evaluation
            let reduced = state.reduce(&drop)?;
            let (incr, c) = select_increment(
                &reduced,
                l1,
                objective,
                config,
                derive_seed(seed, (round as u64) << 20 | (s_idx as u64 + 2)),
            )?;
            calls += c;
            let candidate = reduced.extend(&incr)?;
            let score = score_of(&candidate, &mut calls)?;
            let replace = match &best_round {
                None => true,
                Some((s, st)) => better(
                    score,
                    candidate.system().design().indices(),
                    *s,
                    st.system().design().indices(),
                ),
            };
            if replace {
                best_round = Some((score, candidate));
            }
        }

        let Some((best_score, best_state)) = best_round else {
            break;
        };
        if best_score < current_score {
            current_score = best_score;
            state = best_state;
            trace.push(current_score);
        } else {
            break; // no improvement this round
        }
    }

    Ok(RestartOutcome {
        best_score: current_score,
        best_design: state.system().design().indices().to_vec(),
        calls,
        iterations: rounds,
        trace,
    })
}
