//! Transience and recurrence verdicts with the evidence behind them.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::envgen::{batch_mean, ergodic_log_sigma_mean, lcm, log_sigma, EnvRealization, EnvSpec};
use crate::error::{Error, Result};
use crate::hitting::{counterexample_series, effective_p, estimate_gamma, Direction, Limit};
use crate::model::{check_hypothesis_inv, irreducibility_probe, rank1_reduce_degenerate, Irreducibility, RegimeModel};
use crate::smallmat::Mat;
use crate::spectral::{forward_spectrum, inverse_spectrum, rank1_product_structure, ruelle_dual_dims, Family, Method, QrOptions, SpectrumResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TransientPlus,
    TransientMinus,
    Recurrent,
    EnvironmentDependent,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Exact,
    Numerical,
    LowConfidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub criterion: String,
    pub values: Value,
}

impl Evidence {
    fn new(criterion: &str, values: Value) -> Self {
        Evidence { criterion: criterion.to_string(), values }
    }
}

/// Dimension counts used by the spectral rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    /// `m` on the full path, `r` on the reduced path.
    pub k: usize,
    pub reduced: bool,
    pub forward_d0: usize,
    pub forward_d0_minus: usize,
    pub inverse_d0: usize,
    pub inverse_d0_minus: usize,
    /// Inverse counts obtained by duality rather than computed.
    pub via_duality: bool,
}

impl Dimensions {
    /// Forward and inverse minus-dimensions cannot both reach `k`.
    pub fn exclusive(&self) -> bool {
        !(self.forward_d0_minus >= self.k && self.inverse_d0_minus >= self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
    pub confidence: Confidence,
    pub dimensions: Option<Dimensions>,
    /// `(γ₊, γ₋)` when estimated.
    pub gamma: Option<(f64, f64)>,
    pub u: Option<f64>,
}

impl Classification {
    fn new(verdict: Verdict, confidence: Confidence) -> Self {
        Classification { verdict, evidence: Vec::new(), confidence, dimensions: None, gamma: None, u: None }
    }

    fn push(&mut self, criterion: &str, values: Value) {
        self.evidence.push(Evidence::new(criterion, values));
    }

    pub fn has_evidence(&self, criterion: &str) -> bool {
        self.evidence.iter().any(|e| e.criterion == criterion)
    }
}

/// `μ = (1-p₁)(1-p₂)² / (p₁p₂²)`.
pub fn mu_game_b(p1: f64, p2: f64) -> Result<f64> {
    for p in [p1, p2] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidSpec(format!("probability {p} outside (0, 1)")));
        }
    }
    Ok((1.0 - p1) * (1.0 - p2).powi(2) / (p1 * p2 * p2))
}

/// Game B verdict from `μ`: above one loses, below one wins.
pub fn mu_verdict(mu: f64) -> Verdict {
    if (mu - 1.0).abs() <= 1e-12 {
        Verdict::Recurrent
    } else if mu > 1.0 {
        Verdict::TransientMinus
    } else {
        Verdict::TransientPlus
    }
}

/// `μ(π₁) = (1/(0.099 + 0.4π₁) - 1)(1/(0.749 - 0.25π₁) - 1)²` for Game D.
pub fn mu_game_d(pi1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi1) {
        return Err(Error::InvalidSpec(format!("π₁ = {pi1} outside [0, 1]")));
    }
    Ok((1.0 / (0.099 + 0.4 * pi1) - 1.0) * (1.0 / (0.749 - 0.25 * pi1) - 1.0).powi(2))
}

/// `(π₁, μ)` on `n` evenly spaced points of `[0, 1]`.
pub fn mu_game_d_curve(n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(Error::Precondition("the grid needs at least two points".into()));
    }
    (0..n)
        .map(|k| {
            let x = k as f64 / (n - 1) as f64;
            Ok((x, mu_game_d(x)?))
        })
        .collect()
}

fn verdict_from_u(u: f64, stderr: f64, exact: bool) -> Verdict {
    let band = if exact { 1e-12 } else { 3.0 * stderr };
    if u.abs() <= band {
        if exact {
            Verdict::Recurrent
        } else {
            Verdict::Indeterminate
        }
    } else if u > 0.0 {
        Verdict::TransientMinus
    } else {
        Verdict::TransientPlus
    }
}

/// Verdict for a walk driven by one environment process alone.
pub fn classify_single_regime(spec: &EnvSpec, n_samples: usize, seed: u64) -> Result<Classification> {
    let u = ergodic_log_sigma_mean(spec, n_samples, seed)?;
    let verdict = verdict_from_u(u.mean, u.stderr, u.exact);
    let confidence = if u.exact { Confidence::Exact } else { Confidence::Numerical };
    let mut c = Classification::new(verdict, confidence);
    c.u = Some(u.mean);
    c.push("sign of E log σ", json!({ "u": u.mean, "stderr": u.stderr, "exact": u.exact }));
    if verdict == Verdict::Recurrent {
        c.push("irreducible", json!({ "reason": "single nearest-neighbour chain with p in (0, 1)" }));
    }
    Ok(c)
}

/// Settings for [`classify_full`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Steps for iterative spectra and Birkhoff averages.
    pub n_steps: usize,
    /// Also estimate `γ±` with the hitting solver.
    pub estimate_gamma: bool,
    /// `|γ|` below this counts as zero.
    pub gamma_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { n_steps: crate::spectral::DEFAULT_STEPS, estimate_gamma: false, gamma_tol: 0.02 }
    }
}

/// `(γ₊, γ₋)` with the default depth for the model.
pub fn gamma_pair(model: &RegimeModel, e: &EnvRealization) -> Result<(f64, f64)> {
    let n_max = 60 * model.period().unwrap_or(1).max(2) as i64;
    let plus = estimate_gamma(model, e, Direction::Plus, n_max, 4 * n_max)?;
    let minus = estimate_gamma(model, e, Direction::Minus, n_max, 4 * n_max)?;
    Ok((plus.gamma, minus.gamma))
}

/// Mean of `log σ` for a scalar chain given by `p(i)`, exact on periodic
/// environments.
fn scalar_u<F>(period: Option<usize>, n_steps: usize, mut p: F) -> Result<(f64, f64, bool)>
where
    F: FnMut(i64) -> Result<f64>,
{
    match period {
        Some(per) => {
            let s: f64 = (0..per as i64).map(|i| p(i).map(log_sigma)).sum::<Result<f64>>()?;
            Ok((s / per as f64, 0.0, true))
        }
        None => {
            let xs: Vec<f64> = (1..=n_steps as i64).map(|i| p(i).map(log_sigma)).collect::<Result<_>>()?;
            let (mean, se) = batch_mean(&xs, 100);
            Ok((mean, se, false))
        }
    }
}

fn finish_scalar(c: &mut Classification, u: f64, se: f64, exact: bool, label: &str, sigma: Vec<f64>) -> Result<()> {
    c.verdict = verdict_from_u(u, se, exact);
    c.confidence = if exact { Confidence::Exact } else { Confidence::Numerical };
    c.u = Some(u);
    c.push(label, json!({ "u": u, "stderr": se, "exact": exact }));
    let prod = rank1_product_structure(&sigma)?;
    c.push(
        "rank-one product rates",
        json!({
            "plus_rate": prod.plus_rate,
            "minus_rate": prod.minus_rate,
            "n": prod.n,
            "closed_form_rel_err": prod.max_rel_err,
            "reduced_d0_minus": if u < 0.0 { 1 } else { 0 },
        }),
    );
    if c.verdict == Verdict::Recurrent {
        c.push("irreducible", json!({ "reason": "scalar nearest-neighbour chain with p in (0, 1)" }));
    }
    Ok(())
}

fn apply_rules(c: &mut Classification, d: &Dimensions, shift_invertible: bool) -> bool {
    let k = d.k;
    let names = if d.reduced { ("ď₀", "ď₀₋", "inverse d₀", "inverse d₀₋") } else { ("d̄₀", "d̄₀₋", "d̃₀", "d̃₀₋") };
    if d.forward_d0_minus >= k && d.inverse_d0 == k {
        c.verdict = Verdict::TransientPlus;
        c.push(&format!("{} ≥ {k} and {} = {k}", names.1, names.2), json!(d));
        return true;
    }
    if d.inverse_d0_minus >= k && d.forward_d0 == k {
        c.verdict = Verdict::TransientMinus;
        c.push(&format!("{} ≥ {k} and {} = {k}", names.3, names.0), json!(d));
        return true;
    }
    if shift_invertible && d.forward_d0 == k {
        c.verdict = Verdict::TransientMinus;
        c.push(&format!("invertible shift and {} = {k}", names.0), json!(d));
        return true;
    }
    if shift_invertible && d.inverse_d0 == k {
        c.verdict = Verdict::TransientPlus;
        c.push(&format!("invertible shift and {} = {k}", names.2), json!(d));
        return true;
    }
    false
}

fn dimensions(
    model: &RegimeModel,
    e: &EnvRealization,
    family: Family,
    opts: &ClassifyOptions,
) -> Result<(Dimensions, SpectrumResult, Confidence)> {
    let qr = QrOptions { n_steps: opts.n_steps, ..QrOptions::default() };
    let fwd = forward_spectrum(model, e, family, qr)?;
    let (inverse_d0, inverse_d0_minus, via_duality, low) = match ruelle_dual_dims(&fwd) {
        Ok((a, b)) if fwd.shift_invertible => (a, b, true, false),
        _ => {
            let inv = inverse_spectrum(model, e, family, qr)?;
            (inv.d0, inv.d0_minus, false, inv.low_confidence)
        }
    };
    let confidence = if low {
        Confidence::LowConfidence
    } else if fwd.method == Method::ExactPeriodic {
        Confidence::Exact
    } else {
        Confidence::Numerical
    };
    let d = Dimensions {
        k: fwd.dim() / 2,
        reduced: family == Family::Reduced,
        forward_d0: fwd.d0,
        forward_d0_minus: fwd.d0_minus,
        inverse_d0,
        inverse_d0_minus,
        via_duality,
    };
    Ok((d, fwd, confidence))
}

/// Verdicts of the deterministic-alternation analysis over every shift of
/// a periodic environment and every start regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentTable {
    /// `(shift, start regime, λ, verdict)`, regimes 0-based.
    pub rows: Vec<(usize, usize, f64, Limit)>,
}

impl EnvironmentTable {
    pub fn distinct(&self) -> Vec<Limit> {
        let mut v: Vec<Limit> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.3) {
                v.push(r.3);
            }
        }
        v
    }
}

pub fn environment_table(model: &RegimeModel, e: &EnvRealization) -> Result<EnvironmentTable> {
    let per = e
        .period()
        .ok_or_else(|| Error::Precondition("environment table needs periodic environments".into()))?;
    let mut rows = Vec::new();
    for k in 0..per {
        let shifted = e.shift(k as i64)?;
        for b in 0..model.m() {
            let s = counterexample_series(model, &shifted, b, 0)?;
            rows.push((k, b, s.lambda, s.verdict));
        }
    }
    Ok(EnvironmentTable { rows })
}

fn inconclusive(c: &mut Classification, model: &RegimeModel, e: &EnvRealization, opts: &ClassifyOptions) -> Result<()> {
    c.verdict = Verdict::Indeterminate;
    let per = match e.period() {
        Some(p) => p,
        None => {
            c.push("irreducibility", json!({ "verdict": "unknown", "reason": "aperiodic environment" }));
            return Ok(());
        }
    };
    let probe = irreducibility_probe(model, e, lcm(2, per))?;
    match &probe {
        Irreducibility::Irreducible => {
            c.push("irreducible", json!({ "quotient_period": lcm(2, per) }));
            let (gp, gm) = match c.gamma {
                Some(g) => g,
                None => gamma_pair(model, e)?,
            };
            c.gamma = Some((gp, gm));
            if gp.abs() < opts.gamma_tol && gm.abs() < opts.gamma_tol {
                c.verdict = Verdict::Recurrent;
                c.push("γ₊ = γ₋ = 0", json!({ "gamma_plus": gp, "gamma_minus": gm, "tol": opts.gamma_tol }));
            }
        }
        Irreducibility::Reducible { classes } => {
            c.push("reducible", json!({ "classes": classes.len() }));
            match environment_table(model, e) {
                Ok(table) => {
                    let distinct = table.distinct();
                    c.push("start and environment verdicts", json!(table.rows));
                    c.verdict = match distinct.as_slice() {
                        [Limit::PlusInfinity] => Verdict::TransientPlus,
                        [Limit::MinusInfinity] => Verdict::TransientMinus,
                        d if d.len() > 1 => Verdict::EnvironmentDependent,
                        _ => Verdict::Indeterminate,
                    };
                }
                Err(err) => c.push("environment analysis unavailable", json!({ "reason": err.to_string() })),
            }
        }
        Irreducibility::Unknown => c.push("irreducibility", json!({ "verdict": "unknown" })),
    }
    Ok(())
}

/// Full pipeline: rank reduction, then the scalar, reduced or full-rank
/// rules, then the structural analysis when the spectral rules are silent.
pub fn classify_full(model: &RegimeModel, e: &EnvRealization, opts: &ClassifyOptions) -> Result<Classification> {
    let mut c = Classification::new(Verdict::Indeterminate, Confidence::Numerical);
    let rd = model.rank();
    c.push("rank", json!({ "m": model.m(), "r": rd.r }));
    if opts.estimate_gamma {
        let g = gamma_pair(model, e)?;
        c.gamma = Some(g);
        c.push("γ estimates", json!({ "gamma_plus": g.0, "gamma_minus": g.1 }));
    }
    let period = e.period();
    let sigma_len = period.map_or(opts.n_steps.min(2000), |p| 60 * p);
    if rd.r == 1 {
        let (u, se, exact) = scalar_u(period, opts.n_steps, |i| effective_p(model, e, i))?;
        let sigma: Vec<f64> =
            (1..=sigma_len as i64).map(|i| effective_p(model, e, i).map(|p| (1.0 - p) / p)).collect::<Result<_>>()?;
        finish_scalar(&mut c, u, se, exact, "sign of E log σ for the averaged chain", sigma)?;
        return Ok(c);
    }
    let family = if rd.r < model.m() {
        let span = period.map_or((1, opts.n_steps.min(2000) as i64), |p| (0, p as i64 - 1));
        let hyp = check_hypothesis_inv(model, e, span)?;
        c.push("reduced matrices invertible", json!({ "holds": hyp.holds, "sites_checked": hyp.sites.len() }));
        if !hyp.holds {
            if model.has_duplicate_regimes() {
                match rank1_reduce_degenerate(model, e, span) {
                    Ok(red) => {
                        c.push("shared row vector reduction", json!({ "v": red.v }));
                        let (u, se, exact) = scalar_u(period, opts.n_steps, |i| red.effective_p(model, e, i))?;
                        let sigma: Vec<f64> = (1..=sigma_len as i64)
                            .map(|i| red.effective_p(model, e, i).map(|p| (1.0 - p) / p))
                            .collect::<Result<_>>()?;
                        finish_scalar(&mut c, u, se, exact, "sign of E log σ for the reduced scalar chain", sigma)?;
                        return Ok(c);
                    }
                    Err(err) => c.push("shared row vector reduction failed", json!({ "reason": err.to_string() })),
                }
            }
            return Ok(c);
        }
        Family::Reduced
    } else {
        Family::Full
    };
    let (d, _, confidence) = match dimensions(model, e, family, opts) {
        Ok(x) => x,
        Err(err) => {
            c.push("spectrum failed", json!({ "reason": err.to_string() }));
            return Ok(c);
        }
    };
    c.confidence = confidence;
    c.dimensions = Some(d);
    c.push("dimensions", json!(d));
    if !d.exclusive() {
        c.push("exclusivity violated", json!(d));
        return Ok(c);
    }
    if !apply_rules(&mut c, &d, model.shift_invertible()) {
        inconclusive(&mut c, model, e, opts)?;
    }
    Ok(c)
}

/// The three sufficient conditions for a certified paradox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParrondoReport {
    /// `E log σ^(α)` per regime.
    pub u: Vec<f64>,
    pub every_game_loses: bool,
    pub inverse_d0: usize,
    pub forward_d0_minus: usize,
    pub k: usize,
    pub inverse_d0_is_k: bool,
    pub forward_d0_minus_at_least_k: bool,
    pub certified: bool,
}

pub fn parrondo_check(model: &RegimeModel, e: &EnvRealization, opts: &ClassifyOptions) -> Result<ParrondoReport> {
    let u: Vec<f64> = (0..model.m())
        .map(|a| ergodic_log_sigma_mean(model.spec(a), opts.n_steps, 0).map(|x| x.mean))
        .collect::<Result<_>>()?;
    let family = if model.rank().r < model.m() { Family::Reduced } else { Family::Full };
    let (d, _, _) = dimensions(model, e, family, opts)?;
    let every_game_loses = u.iter().all(|x| *x > 0.0);
    let a = d.inverse_d0 == d.k;
    let b = d.forward_d0_minus >= d.k;
    Ok(ParrondoReport {
        u,
        every_game_loses,
        inverse_d0: d.inverse_d0,
        forward_d0_minus: d.forward_d0_minus,
        k: d.k,
        inverse_d0_is_k: a,
        forward_d0_minus_at_least_k: b,
        certified: every_game_loses && a && b,
    })
}

/// `ψ = (x, 1-x; 1-y, y)` with the normalizer of the step that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PsiState {
    pub fn from_matrix(rho: &Mat) -> Result<Self> {
        if rho.rows() != 2 || rho.cols() != 2 {
            return Err(Error::Dimension("seed must be 2x2".into()));
        }
        for r in 0..2 {
            if (rho.row(r).iter().sum::<f64>() - 1.0).abs() > 1e-12 || rho.row(r).iter().any(|v| *v < 0.0) {
                return Err(Error::Precondition("seed must be stochastic".into()));
            }
        }
        Ok(PsiState { x: rho[(0, 0)], y: rho[(1, 1)], z: 1.0 })
    }

    pub fn matrix(&self) -> Mat {
        Mat::from_rows(&[[self.x, 1.0 - self.x], [1.0 - self.y, self.y]])
    }

    /// One step with regime probabilities `(p1, p2)`.
    pub fn step(&self, p1: f64, p2: f64) -> Self {
        let (q1, q2) = (1.0 - p1, 1.0 - p2);
        let z = p1 * p2 + p2 * q1 * self.x + p1 * q2 * self.y;
        assert!(z > 0.0, "normalizer must be positive");
        PsiState { x: p1 * q2 * self.y / z, y: p2 * q1 * self.x / z, z }
    }
}

fn check_alternating(model: &RegimeModel) -> Result<()> {
    let swap = Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
    if model.m() != 2 || model.q().max_abs_diff(&swap) > 0.0 {
        return Err(Error::Precondition("the ψ recursion needs two alternating regimes".into()));
    }
    Ok(())
}

/// `ψ_{n,a,ρ}` for `n = a..=b`; the step into `n + 1` reads site `n`.
pub fn psi_path(model: &RegimeModel, e: &EnvRealization, a: i64, b: i64, seed: &Mat) -> Result<Vec<PsiState>> {
    check_alternating(model)?;
    let mut s = PsiState::from_matrix(seed)?;
    let mut out = vec![s];
    for n in a..b {
        s = s.step(e.p(0, n)?, e.p(1, n)?);
        out.push(s);
    }
    Ok(out)
}

/// Limit of one residue class of `ψ_{0,-k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiLimit {
    pub modulus: usize,
    pub residue: usize,
    pub psi: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiResult {
    /// `ψ_{0,-k}` for `k = 1..=k_max`.
    pub values: Vec<PsiState>,
    /// Smallest modulus among 2 and 6 whose residue classes all settle.
    pub modulus: Option<usize>,
    pub limits: Vec<PsiLimit>,
    /// Every iterate equals the seed to within `1e-12`.
    pub constant: bool,
}

pub const PSI_TOL: f64 = 1e-6;

/// `ψ_{0,-k,ρ}` for growing `k`, with limits along residue classes of `k`,
/// each class judged over the last fifth of the iterates.
pub fn psi_recursion(model: &RegimeModel, e: &EnvRealization, seed: &Mat, k_max: usize) -> Result<PsiResult> {
    if k_max < 12 {
        return Err(Error::Precondition("k_max must be at least 12".into()));
    }
    let values: Vec<PsiState> = (1..=k_max as i64)
        .map(|k| psi_path(model, e, -k, 0, seed).map(|p| *p.last().expect("nonempty")))
        .collect::<Result<_>>()?;
    let s0 = PsiState::from_matrix(seed)?;
    let constant = values.iter().all(|v| (v.x - s0.x).abs() <= 1e-12 && (v.y - s0.y).abs() <= 1e-12);
    let tail_start = k_max - k_max / 5;
    let mut modulus = None;
    let mut limits = Vec::new();
    for m in [2usize, 6] {
        let mut settled = true;
        let mut found = Vec::new();
        for r in 0..m {
            let class: Vec<&PsiState> = (tail_start..=k_max).filter(|k| k % m == r).map(|k| &values[k - 1]).collect();
            let spread = |f: fn(&PsiState) -> f64| {
                let lo = class.iter().map(|s| f(s)).fold(f64::INFINITY, f64::min);
                let hi = class.iter().map(|s| f(s)).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            };
            if spread(|s| s.x) > PSI_TOL || spread(|s| s.y) > PSI_TOL {
                settled = false;
                break;
            }
            let last = class.last().expect("class nonempty");
            found.push(PsiLimit { modulus: m, residue: r, psi: [[last.x, 1.0 - last.x], [1.0 - last.y, last.y]] });
        }
        if settled {
            modulus = Some(m);
            limits = found;
            break;
        }
    }
    Ok(PsiResult { values, modulus, limits, constant })
}
