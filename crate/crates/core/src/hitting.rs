//! Exact hitting probabilities on finite windows.
//!
//! For a target `ℓ` the regime-resolved probabilities `F_i` (an `m x m`
//! matrix whose column `β` is `f̃^(β)_{iℓ}`) satisfy
//! `F_i = M_i F_{i+1} + N_i F_{i-1}` away from `ℓ`, with `F_ℓ = I`. On a
//! window `[a, b]` the system splits into two Dirichlet problems, `[a, ℓ]`
//! and `[ℓ, b]`, each solved by block tridiagonal elimination.
//!
//! Edge values decide the bracket: `Killed` puts zero at the edges (walks
//! that leave never hit, a lower bound) and `Absorbed` puts the identity
//! there (walks that leave count as hits in their current regime, an upper
//! bound on the total).
//!
//! Norms of hitting vectors are the maximum over starting regimes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::envgen::EnvRealization;
use crate::error::{Error, Result};
use crate::model::RegimeModel;
use crate::smallmat::{inverse, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Killed,
    Absorbed,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::Killed => "killed",
            BoundaryMode::Absorbed => "absorbed",
        }
    }

    fn edge(self, m: usize) -> Mat {
        match self {
            BoundaryMode::Killed => Mat::zeros(m, m),
            BoundaryMode::Absorbed => Mat::identity(m),
        }
    }
}

/// Hitting probabilities of one target on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTable {
    pub target: i64,
    pub window: (i64, i64),
    pub mode: BoundaryMode,
    /// `values[i - a]` holds `F_i`, with `F_ℓ = I`.
    values: Vec<Mat>,
    /// Return matrix, `(𝒰_ℓ)_{αβ} = P_{αℓ}(τ_ℓ < ∞, G_{τ_ℓ} = β)`.
    pub return_matrix: Mat,
}

impl HittingTable {
    pub fn m(&self) -> usize {
        self.return_matrix.rows()
    }

    fn offset(&self, i: i64) -> Result<usize> {
        if i < self.window.0 || i > self.window.1 {
            return Err(Error::OutsideWindow { site: i });
        }
        Ok((i - self.window.0) as usize)
    }

    /// `F_i`, column `β` is `f̃^(β)_{iℓ}`.
    pub fn resolved(&self, i: i64) -> Result<&Mat> {
        Ok(&self.values[self.offset(i)?])
    }

    /// `f_{iℓ}` as a vector over starting regimes.
    pub fn f(&self, i: i64) -> Result<Vec<f64>> {
        Ok(self.resolved(i)?.row_sums())
    }

    /// `f^(β)_{iℓ}` as a vector over starting regimes.
    pub fn f_beta(&self, i: i64, beta: usize) -> Result<Vec<f64>> {
        Ok(self.resolved(i)?.col(beta))
    }

    /// `‖f_{iℓ}‖`, maximum over starting regimes.
    pub fn norm(&self, i: i64) -> Result<f64> {
        Ok(self.f(i)?.into_iter().fold(0.0, f64::max))
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.window.0..=self.window.1
    }

    /// Rows `alpha,i,f,f_beta_1..m,boundary_mode`, regimes 1-based.
    pub fn to_csv(&self) -> String {
        let m = self.m();
        let mut s = String::from("alpha,i,f");
        for b in 1..=m {
            let _ = write!(s, ",f_beta_{b}");
        }
        s.push_str(",boundary_mode\n");
        for i in self.sites() {
            let fi = &self.values[(i - self.window.0) as usize];
            for a in 0..m {
                let _ = write!(s, "{},{},{:.17e}", a + 1, i, fi.row(a).iter().sum::<f64>());
                for b in 0..m {
                    let _ = write!(s, ",{:.17e}", fi[(a, b)]);
                }
                let _ = writeln!(s, ",{}", self.mode.as_str());
            }
        }
        s
    }
}

/// Solves `F_i = M_i F_{i+1} + N_i F_{i-1}` on `lo < i < hi` with
/// `F_lo = left` and `F_hi = right`. Returns `F_lo..=F_hi`.
pub fn solve_dirichlet(
    model: &RegimeModel,
    e: &EnvRealization,
    lo: i64,
    hi: i64,
    left: &Mat,
    right: &Mat,
) -> Result<Vec<Mat>> {
    if hi <= lo {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let m = model.m();
    let len = (hi - lo + 1) as usize;
    // F_i = C_i F_{i+1} + D_i
    let mut c: Vec<Mat> = Vec::with_capacity(len);
    let mut d: Vec<Mat> = Vec::with_capacity(len);
    c.push(Mat::zeros(m, m));
    d.push(left.clone());
    for i in lo + 1..hi {
        let (mm, nn) = model.mn(e, i)?;
        let k = (i - lo) as usize;
        let s = &Mat::identity(m) - &(&nn * &c[k - 1]);
        let sinv = inverse(&s).map_err(|_| Error::Singular { context: format!("elimination pivot at site {i}") })?;
        c.push(&sinv * &mm);
        let nd = &nn * &d[k - 1];
        d.push(&sinv * &nd);
    }
    let mut out = vec![Mat::zeros(m, m); len];
    out[len - 1] = right.clone();
    for k in (1..len - 1).rev() {
        out[k] = &(&c[k] * &out[k + 1]) + &d[k];
    }
    out[0] = left.clone();
    Ok(out)
}

/// Hitting table for target `ℓ` on the window `[a, b]`.
pub fn solve_window(
    model: &RegimeModel,
    e: &EnvRealization,
    target: i64,
    window: (i64, i64),
    mode: BoundaryMode,
) -> Result<HittingTable> {
    let (a, b) = window;
    if a >= target || b <= target {
        return Err(Error::Precondition(format!(
            "window [{a}, {b}] must contain target {target} with margin at least 1"
        )));
    }
    let m = model.m();
    let edge = mode.edge(m);
    let id = Mat::identity(m);
    let mut values = solve_dirichlet(model, e, a, target, &edge, &id)?;
    let right = solve_dirichlet(model, e, target, b, &id, &edge)?;
    values.extend(right.into_iter().skip(1));
    let (mm, nn) = model.mn(e, target)?;
    let k = (target - a) as usize;
    let return_matrix = &(&mm * &values[k + 1]) + &(&nn * &values[k - 1]);
    Ok(HittingTable { target, window, mode, values, return_matrix })
}

/// Largest violation of the first-step equations at interior sites.
pub fn residual(model: &RegimeModel, e: &EnvRealization, table: &HittingTable) -> Result<f64> {
    let (a, b) = table.window;
    let mut worst: f64 = 0.0;
    for i in a + 1..b {
        if i == table.target {
            continue;
        }
        let (mm, nn) = model.mn(e, i)?;
        let rhs = &(&mm * table.resolved(i + 1)?) + &(&nn * table.resolved(i - 1)?);
        worst = worst.max(rhs.max_abs_diff(table.resolved(i)?));
    }
    Ok(worst)
}

/// `P_{αi}(𝒩_ℓ ≥ k)`, the probability of at least `k` visits to `ℓ` at
/// times `n ≥ 1`.
pub fn kth_visit(table: &HittingTable, alpha: usize, i: i64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let f = if i == table.target { table.return_matrix.clone() } else { table.resolved(i)?.clone() };
    let mut row = Mat::from_rows(&[f.row(alpha)]);
    for _ in 1..k {
        row = &row * &table.return_matrix;
    }
    Ok(row.as_slice().iter().sum())
}

/// Killed and Absorbed tables on a common window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub killed: HittingTable,
    pub absorbed: HittingTable,
    /// Largest `‖absorbed - killed‖` over the evaluation sites.
    pub gap: f64,
    pub converged: bool,
    pub doublings: u32,
}

pub const BRACKET_GAP_TOL: f64 = 1e-4;
pub const MAX_WINDOW_SITES: i64 = 1 << 14;

/// Default half-width of the solver window.
pub fn default_half_width(model: &RegimeModel) -> i64 {
    40 * model.period().unwrap_or(1).max(1) as i64
}

/// Brackets the hitting probabilities of `target` at `eval_sites`,
/// doubling the window until the gap closes or the window reaches the cap.
pub fn solve_auto(
    model: &RegimeModel,
    e: &EnvRealization,
    target: i64,
    eval_sites: &[i64],
) -> Result<Bracket> {
    let reach = eval_sites.iter().map(|i| (i - target).abs()).max().unwrap_or(0);
    let mut half = default_half_width(model).max(reach + 1);
    let mut doublings = 0;
    loop {
        let window = (target - half, target + half);
        let killed = solve_window(model, e, target, window, BoundaryMode::Killed)?;
        let absorbed = solve_window(model, e, target, window, BoundaryMode::Absorbed)?;
        let mut gap: f64 = 0.0;
        for &i in eval_sites {
            let k = killed.f(i)?;
            let a = absorbed.f(i)?;
            gap = gap.max(k.iter().zip(&a).map(|(x, y)| (y - x).abs()).fold(0.0, f64::max));
        }
        let converged = gap < BRACKET_GAP_TOL;
        if converged || 2 * (2 * half) + 1 > MAX_WINDOW_SITES {
            return Ok(Bracket { killed, absorbed, gap, converged, doublings });
        }
        half *= 2;
        doublings += 1;
    }
}

/// Exit probabilities from the strip `(low, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTable {
    pub low: i64,
    pub high: i64,
    /// `(site, P(hit high first), P(hit low first))`, vectors over regimes.
    pub rows: Vec<(i64, Vec<f64>, Vec<f64>)>,
}

/// Probabilities of reaching `high` before `low` and vice versa.
pub fn solve_two_targets(model: &RegimeModel, e: &EnvRealization, low: i64, high: i64) -> Result<ExitTable> {
    if high - low < 2 {
        return Err(Error::Precondition("targets must leave at least one interior site".into()));
    }
    let m = model.m();
    let (z, id) = (Mat::zeros(m, m), Mat::identity(m));
    let up = solve_dirichlet(model, e, low, high, &z, &id)?;
    let down = solve_dirichlet(model, e, low, high, &id, &z)?;
    let rows = (low + 1..high)
        .map(|i| {
            let k = (i - low) as usize;
            (i, up[k].row_sums(), down[k].row_sums())
        })
        .collect();
    Ok(ExitTable { low, high, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Plus,
    Minus,
}

/// Exponential decay rate of `‖f_{±n,0}‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub direction: Direction,
    pub gamma: f64,
    /// `(n, log ‖f_{±n,0}‖)` from the Killed solve.
    pub series: Vec<(i64, f64)>,
    /// Largest Absorbed minus Killed gap over the fitted range.
    pub bracket_width: f64,
    /// Slope obtained with the margin doubled.
    pub gamma_wide: f64,
    /// Set when doubling the margin moves the slope by more than `1e-3`.
    pub margin_sensitive: bool,
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn gamma_once(
    model: &RegimeModel,
    e: &EnvRealization,
    direction: Direction,
    n_max: i64,
    margin: i64,
) -> Result<(f64, Vec<(i64, f64)>, f64)> {
    let window = match direction {
        Direction::Plus => (-margin, n_max + margin),
        Direction::Minus => (-n_max - margin, margin),
    };
    let killed = solve_window(model, e, 0, window, BoundaryMode::Killed)?;
    let absorbed = solve_window(model, e, 0, window, BoundaryMode::Absorbed)?;
    let sign = if direction == Direction::Plus { 1 } else { -1 };
    let mut series = Vec::with_capacity(n_max as usize);
    let mut width: f64 = 0.0;
    for n in 1..=n_max {
        let norm = killed.norm(sign * n)?;
        series.push((n, norm.ln()));
        if n >= n_max / 2 {
            width = width.max(absorbed.norm(sign * n)? - norm);
        }
    }
    let fit: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, v)| *n >= n_max / 2 && v.is_finite())
        .map(|(n, v)| (*n as f64, *v))
        .collect();
    if fit.len() < 2 {
        return Err(Error::NotConverged("hitting probabilities underflowed before the fit range".into()));
    }
    Ok((slope(&fit), series, width))
}

/// Estimates `γ±` by the least-squares slope of `log ‖f_{±n,0}‖` over
/// `n ∈ [n_max/2, n_max]`, using Killed solves on a window extending
/// `window_margin` sites beyond the evaluation range on both sides.
pub fn estimate_gamma(
    model: &RegimeModel,
    e: &EnvRealization,
    direction: Direction,
    n_max: i64,
    window_margin: i64,
) -> Result<GammaEstimate> {
    if n_max < 4 {
        return Err(Error::Precondition("n_max must be at least 4".into()));
    }
    if window_margin < 1 {
        return Err(Error::Precondition("window margin must be positive".into()));
    }
    let (gamma, series, bracket_width) = gamma_once(model, e, direction, n_max, window_margin)?;
    let (gamma_wide, _, _) = gamma_once(model, e, direction, n_max, 2 * window_margin)?;
    Ok(GammaEstimate {
        direction,
        gamma,
        series,
        bracket_width,
        gamma_wide,
        margin_sensitive: (gamma - gamma_wide).abs() > 1e-3,
    })
}

/// Both product bounds on `‖f‖` at one target and depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub target: i64,
    pub n: i64,
    /// `‖f_{ℓ-n,ℓ}‖` and `Π_k ‖f_{ℓ-k,ℓ-k+1}‖`.
    pub left: (f64, f64),
    /// `‖f_{ℓ+n,ℓ}‖` and `Π_k ‖f_{ℓ+k,ℓ+k-1}‖`.
    pub right: (f64, f64),
    pub holds: bool,
}

/// Checks `‖f_{ℓ∓n,ℓ}‖ ≤ Π ‖f_{ℓ∓k,ℓ∓k±1}‖` with Killed solves on one window.
pub fn subadditivity_check(model: &RegimeModel, e: &EnvRealization, target: i64, n: i64) -> Result<SubadditivityReport> {
    if n < 1 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let w = default_half_width(model);
    let window = (target - n - w, target + n + w);
    let direct = solve_window(model, e, target, window, BoundaryMode::Killed)?;
    let mut left_prod = 1.0;
    let mut right_prod = 1.0;
    for k in 1..=n {
        let up = solve_window(model, e, target - k + 1, window, BoundaryMode::Killed)?;
        left_prod *= up.norm(target - k)?;
        let down = solve_window(model, e, target + k - 1, window, BoundaryMode::Killed)?;
        right_prod *= down.norm(target + k)?;
    }
    let left = (direct.norm(target - n)?, left_prod);
    let right = (direct.norm(target + n)?, right_prod);
    let slack = 1e-12;
    Ok(SubadditivityReport {
        target,
        n,
        left,
        right,
        holds: left.0 <= left.1 + slack && right.0 <= right.1 + slack,
    })
}

/// `p_i = Σ_β π_β p_i^(β)` for a rank-one switching matrix.
pub fn effective_p(model: &RegimeModel, e: &EnvRealization, i: i64) -> Result<f64> {
    let pi = rank1_pi(model)?;
    let col = e.column(i)?;
    Ok(pi.iter().zip(&col).map(|(w, p)| w * p).sum())
}

fn rank1_pi(model: &RegimeModel) -> Result<Vec<f64>> {
    if model.rank().r != 1 {
        return Err(Error::Precondition(format!("Q has rank {}, expected 1", model.rank().r)));
    }
    Ok(model.q().row(0).to_vec())
}

/// Law of the regime in force at the first hit of `ℓ` for a rank-one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Hitting {
    pub target: i64,
    pub pi: Vec<f64>,
    /// `π_β q^(β)_{ℓ+1} / q_{ℓ+1}`, for starts above the target.
    pub from_above: Vec<f64>,
    /// `π_β p^(β)_{ℓ-1} / p_{ℓ-1}`, for starts below the target.
    pub from_below: Vec<f64>,
}

pub fn rank1_hitting(model: &RegimeModel, e: &EnvRealization, target: i64) -> Result<Rank1Hitting> {
    let pi = rank1_pi(model)?;
    let above = e.column(target + 1)?;
    let below = e.column(target - 1)?;
    let q_eff: f64 = pi.iter().zip(&above).map(|(w, p)| w * (1.0 - p)).sum();
    let p_eff: f64 = pi.iter().zip(&below).map(|(w, p)| w * p).sum();
    Ok(Rank1Hitting {
        target,
        from_above: pi.iter().zip(&above).map(|(w, p)| w * (1.0 - p) / q_eff).collect(),
        from_below: pi.iter().zip(&below).map(|(w, p)| w * p / p_eff).collect(),
        pi,
    })
}

/// Where the walk goes, as decided by a product criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    PlusInfinity,
    MinusInfinity,
    Boundary,
}

/// A truncated positive series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSum {
    pub partial: f64,
    pub terms: usize,
    /// Bound on the omitted tail; infinite for a divergent series.
    pub tail_bound: f64,
    pub finite: bool,
}

pub const SERIES_TAIL_TOL: f64 = 1e-12;
pub const SERIES_MAX_TERMS: usize = 1_000_000;

/// `Σ_{n≥0} Π_{k=1}^n r_k` for a periodic ratio sequence `r`
/// (`ratios[k-1] = r_k`, repeated).
fn periodic_series(ratios: &[f64]) -> SeriesSum {
    let per = ratios.len();
    let block: f64 = ratios.iter().product();
    let block_partials: f64 = {
        let mut acc = 0.0;
        let mut prod = 1.0;
        for r in ratios {
            prod *= r;
            acc += prod;
        }
        acc
    };
    let mut partial = 1.0;
    let mut term = 1.0;
    let mut n = 0usize;
    loop {
        if n % per == 0 && block < 1.0 {
            let tail = term * block_partials / (1.0 - block);
            if tail < SERIES_TAIL_TOL * partial {
                return SeriesSum { partial, terms: n + 1, tail_bound: tail, finite: true };
            }
        }
        if n >= SERIES_MAX_TERMS || !partial.is_finite() || partial > 1e300 {
            let finite = block < 1.0;
            let tail_bound = if finite { term * block_partials / (1.0 - block) } else { f64::INFINITY };
            return SeriesSum { partial, terms: n + 1, tail_bound, finite };
        }
        term *= ratios[n % per];
        partial += term;
        n += 1;
    }
}

/// Analysis of a walk whose regime alternates deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSeries {
    /// Regime playing at the start site, 0-based.
    pub start_regime: usize,
    pub start_site: i64,
    /// `ρ_k` for `k = start_site .. start_site + P - 1`.
    pub rho: Vec<f64>,
    /// Two-step growth factor of `ρ` products along this start.
    pub lambda: f64,
    /// The same factor for the start in the other class.
    pub lambda_other: f64,
    pub s: SeriesSum,
    pub f: SeriesSum,
    pub verdict: Limit,
}

fn involution(model: &RegimeModel) -> Result<Vec<usize>> {
    let m = model.m();
    let q = model.q();
    let mut next = vec![usize::MAX; m];
    for a in 0..m {
        for b in 0..m {
            let v = q[(a, b)];
            if v == 1.0 {
                next[a] = b;
            } else if v != 0.0 {
                return Err(Error::Precondition("Q must be a permutation matrix".into()));
            }
        }
    }
    if (0..m).any(|a| next[next[a]] != a) {
        return Err(Error::Precondition("Q must be an involution".into()));
    }
    Ok(next)
}

/// Product criterion for a walk whose regime at site `k` is fixed by the
/// parity of `k - start_site`: `start_regime` on even offsets, its image
/// under `Q` on odd ones. `ρ_k = σ_k^(regime at k)`; with `λ` the two-step
/// growth of the products, `S = Σ ρ_{i+1}⋯ρ_{i+n}` is finite iff `λ < 1`
/// (walk to `+∞`) and `F = Σ 1/(ρ_{i-1}⋯ρ_{i-n})` is finite iff `λ > 1`
/// (walk to `-∞`).
pub fn counterexample_series(
    model: &RegimeModel,
    e: &EnvRealization,
    start_regime: usize,
    start_site: i64,
) -> Result<CounterexampleSeries> {
    let next = involution(model)?;
    let per = model
        .period()
        .ok_or_else(|| Error::Precondition("environments must be periodic".into()))?;
    let big_p = crate::envgen::lcm(2, per);
    let regime_at = |start: usize, k: i64| if (k - start_site).rem_euclid(2) == 0 { start } else { next[start] };
    let rho_for = |start: usize, k: i64| e.sigma(regime_at(start, k), k);
    let rho: Vec<f64> = (0..big_p as i64).map(|d| rho_for(start_regime, start_site + d)).collect::<Result<_>>()?;
    let lambda = rho.iter().product::<f64>().powf(2.0 / big_p as f64);
    // The other class: the complementary regime at the start site.
    let other = next[start_regime];
    let rho_other: Vec<f64> = (0..big_p as i64).map(|d| rho_for(other, start_site + d)).collect::<Result<_>>()?;
    let lambda_other = rho_other.iter().product::<f64>().powf(2.0 / big_p as f64);

    let forward: Vec<f64> = (1..=big_p as i64).map(|d| rho_for(start_regime, start_site + d)).collect::<Result<_>>()?;
    let backward: Vec<f64> =
        (1..=big_p as i64).map(|d| rho_for(start_regime, start_site - d).map(|r| 1.0 / r)).collect::<Result<_>>()?;
    let s = periodic_series(&forward);
    let f = periodic_series(&backward);
    let verdict = if lambda < 1.0 - 1e-12 {
        Limit::PlusInfinity
    } else if lambda > 1.0 + 1e-12 {
        Limit::MinusInfinity
    } else {
        Limit::Boundary
    };
    Ok(CounterexampleSeries { start_regime, start_site, rho, lambda, lambda_other, s, f, verdict })
}
