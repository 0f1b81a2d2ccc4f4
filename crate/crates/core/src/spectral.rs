//! Lyapunov spectra of transfer-matrix products and the dimension counts
//! derived from them.
//!
//! Forward products are `A_n ⋯ A_1` over sites `1, 2, …`. Inverse products
//! follow the walk to the left: `A_{-n}⁻¹ ⋯ A_{-1}⁻¹` over sites `-1, -2, …`.
//! For periodic environments both reduce to the monodromy matrix over one
//! period, whose eigenvalue moduli give the exponents exactly.

use serde::{Deserialize, Serialize};

use crate::envgen::{batch_mean, EnvRealization};
use crate::error::{Error, Result};
use crate::model::RegimeModel;
use crate::smallmat::{eigenvalues, qr, Mat};

/// Band on `|log|λ||` treated as modulus one on the exact path.
pub const EXACT_TOL: f64 = 1e-6;
pub const DEFAULT_STEPS: usize = 100_000;
pub const N_BLOCKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Forward,
    Inverse,
    ReducedForward,
    ReducedInverse,
}

impl Side {
    fn new(family: Family, inverse: bool) -> Self {
        match (family, inverse) {
            (Family::Full, false) => Side::Forward,
            (Family::Full, true) => Side::Inverse,
            (Family::Reduced, false) => Side::ReducedForward,
            (Family::Reduced, true) => Side::ReducedInverse,
        }
    }
}

/// Which transfer matrices to multiply: `A_i` or the reduced `Ǎ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Full,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactPeriodic,
    QrIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Sorted descending.
    pub exponents: Vec<f64>,
    /// Number of exponents `≤ tol`.
    pub d0: usize,
    /// Number of exponents `< -tol`.
    pub d0_minus: usize,
    pub side: Side,
    pub method: Method,
    pub n_steps: usize,
    /// Zero band per exponent, in exponent units.
    pub tol_zero: Vec<f64>,
    /// Block-mean standard errors, iterative path only.
    pub stderr: Option<Vec<f64>>,
    /// Monodromy eigenvalues as `(re, im)`, exact path only.
    pub eigenvalues: Option<Vec<(f64, f64)>>,
    pub shift_invertible: bool,
    pub low_confidence: bool,
}

impl SpectrumResult {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn count(exponents: &[f64], tol: &[f64]) -> (usize, usize) {
        let d0 = exponents.iter().zip(tol).filter(|(x, t)| **x <= **t).count();
        let d0_minus = exponents.iter().zip(tol).filter(|(x, t)| **x < -**t).count();
        (d0, d0_minus)
    }
}

/// Options for the iterative path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QrOptions {
    pub n_steps: usize,
    pub reorth_every: usize,
    /// Fixed zero band; `None` uses `max(3·stderr, 5·ln(n)/n)` per exponent.
    pub tol_zero: Option<f64>,
}

impl Default for QrOptions {
    fn default() -> Self {
        QrOptions { n_steps: DEFAULT_STEPS, reorth_every: 1, tol_zero: None }
    }
}

/// Lyapunov exponents of `Y_n = B_n ⋯ B_1` with `B_k = stream(k)`, `k ≥ 1`,
/// by periodic QR reorthonormalization.
pub fn lyapunov_qr<F>(mut stream: F, side: Side, opts: QrOptions) -> Result<SpectrumResult>
where
    F: FnMut(usize) -> Result<Mat>,
{
    let QrOptions { n_steps, reorth_every, tol_zero } = opts;
    if reorth_every == 0 || n_steps < reorth_every {
        return Err(Error::Precondition("need n_steps >= reorth_every >= 1".into()));
    }
    let first = stream(1)?;
    if !first.is_square() {
        return Err(Error::Dimension("stream matrices must be square".into()));
    }
    let d = first.rows();
    let mut basis = generic_basis(d)?;
    let mut acc = Mat::identity(d);
    let mut totals = vec![0.0; d];
    // Per-step increments, one series per diagonal position.
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps / reorth_every + 1); d];
    let mut since = 0usize;
    for k in 1..=n_steps {
        let b = if k == 1 { first.clone() } else { stream(k)? };
        if b.rows() != d || b.cols() != d {
            return Err(Error::Dimension(format!("stream matrix at step {k} has the wrong shape")));
        }
        acc = &b * &acc;
        since += 1;
        if since == reorth_every || k == n_steps {
            let f = qr(&(&acc * &basis))?;
            for j in 0..d {
                let r = f.r[(j, j)];
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::SingularStream { site: k as i64 });
                }
                let l = r.ln();
                totals[j] += l;
                samples[j].push(l / since as f64);
            }
            basis = f.q;
            acc = Mat::identity(d);
            since = 0;
        }
    }
    let n = n_steps as f64;
    let mut pairs: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let blocks = N_BLOCKS.min(samples[j].len()).max(1);
            let (_, se) = batch_mean(&samples[j], blocks);
            (totals[j] / n, se)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let exponents: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let stderr: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let floor = 5.0 * n.ln() / n;
    let tol: Vec<f64> = match tol_zero {
        Some(t) => vec![t; d],
        None => stderr.iter().map(|se| (3.0 * se).max(floor)).collect(),
    };
    let (d0, d0_minus) = SpectrumResult::count(&exponents, &tol);
    Ok(SpectrumResult {
        exponents,
        d0,
        d0_minus,
        side,
        method: Method::QrIteration,
        n_steps,
        tol_zero: tol,
        stderr: Some(stderr),
        eigenvalues: None,
        shift_invertible: true,
        low_confidence: false,
    })
}

/// A fixed orthonormal basis in general position. Coordinate vectors can
/// sit inside invariant subspaces of structured products, which delays the
/// separation of exponents until rounding breaks the symmetry.
fn generic_basis(d: usize) -> Result<Mat> {
    let mut seed = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            seed[(i, j)] = ((i * d + j + 1) as f64 * 0.618_033_988_749_895).fract() - 0.5;
        }
    }
    Ok(qr(&seed)?.q)
}

fn transfer(model: &RegimeModel, e: &EnvRealization, family: Family, i: i64) -> Result<Mat> {
    match family {
        Family::Full => model.a_matrix(e, i),
        Family::Reduced => model.a_check(e, i),
    }
}

fn transfer_inv(model: &RegimeModel, e: &EnvRealization, family: Family, i: i64) -> Result<Mat> {
    match family {
        Family::Full => model.a_inverse(e, i),
        Family::Reduced => model.a_check_inverse(e, i),
    }
}

/// `𝒜 = A_𝔭 ⋯ A_1` (or the reduced analogue).
pub fn monodromy(model: &RegimeModel, e: &EnvRealization, family: Family) -> Result<Mat> {
    let per = e
        .period()
        .ok_or_else(|| Error::Precondition("monodromy needs periodic environments".into()))?;
    let mut acc = transfer(model, e, family, 1)?;
    for i in 2..=per as i64 {
        acc = &transfer(model, e, family, i)? * &acc;
    }
    Ok(acc)
}

fn exact(model: &RegimeModel, e: &EnvRealization, family: Family, inverse: bool) -> Result<SpectrumResult> {
    let per = e
        .period()
        .ok_or_else(|| Error::Precondition("exact spectrum needs periodic environments".into()))?;
    let a = monodromy(model, e, family)?;
    let eig = eigenvalues(&a)?;
    let sign = if inverse { -1.0 } else { 1.0 };
    let mut exponents: Vec<f64> = eig.values.iter().map(|z| sign * z.norm().ln() / per as f64).collect();
    if exponents.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular { context: "monodromy matrix has a zero eigenvalue".into() });
    }
    exponents.sort_by(|a, b| b.total_cmp(a));
    let tol = vec![EXACT_TOL / per as f64; exponents.len()];
    let (d0, d0_minus) = SpectrumResult::count(&exponents, &tol);
    Ok(SpectrumResult {
        exponents,
        d0,
        d0_minus,
        side: Side::new(family, inverse),
        method: Method::ExactPeriodic,
        n_steps: per,
        tol_zero: tol,
        stderr: None,
        eigenvalues: Some(eig.values.iter().map(|z| (z.re, z.im)).collect()),
        shift_invertible: true,
        low_confidence: false,
    })
}

/// Forward exponents from the monodromy eigenvalues.
pub fn exact_periodic_spectrum(model: &RegimeModel, e: &EnvRealization, family: Family) -> Result<SpectrumResult> {
    exact(model, e, family, false)
}

/// Forward exponents of `A_n ⋯ A_1` by QR iteration.
pub fn forward_spectrum_qr(
    model: &RegimeModel,
    e: &EnvRealization,
    family: Family,
    opts: QrOptions,
) -> Result<SpectrumResult> {
    let mut s = lyapunov_qr(|k| transfer(model, e, family, k as i64), Side::new(family, false), opts)?;
    s.shift_invertible = model.shift_invertible();
    Ok(s)
}

/// Exponents of the inverse products, exact for periodic environments and
/// by QR iteration over sites `-1, -2, …` otherwise.
pub fn inverse_spectrum(
    model: &RegimeModel,
    e: &EnvRealization,
    family: Family,
    opts: QrOptions,
) -> Result<SpectrumResult> {
    if e.period().is_some() {
        return exact(model, e, family, true);
    }
    inverse_spectrum_qr(model, e, family, opts)
}

pub fn inverse_spectrum_qr(
    model: &RegimeModel,
    e: &EnvRealization,
    family: Family,
    opts: QrOptions,
) -> Result<SpectrumResult> {
    let mut s = lyapunov_qr(|k| transfer_inv(model, e, family, -(k as i64)), Side::new(family, true), opts)?;
    s.shift_invertible = model.shift_invertible();
    s.low_confidence = !s.shift_invertible;
    Ok(s)
}

/// Forward exponents, exact for periodic environments.
pub fn forward_spectrum(
    model: &RegimeModel,
    e: &EnvRealization,
    family: Family,
    opts: QrOptions,
) -> Result<SpectrumResult> {
    if e.period().is_some() {
        return exact(model, e, family, false);
    }
    forward_spectrum_qr(model, e, family, opts)
}

/// Inverse dimensions `(d̃₀, d̃₀₋)` from the forward ones:
/// `d̃₀₋ = d - d̄₀` and `d̃₀ = d - d̄₀₋`.
pub fn ruelle_dual_dims(forward: &SpectrumResult) -> Result<(usize, usize)> {
    if !forward.shift_invertible {
        return Err(Error::Precondition("duality needs an invertible shift".into()));
    }
    if matches!(forward.side, Side::Inverse | Side::ReducedInverse) {
        return Err(Error::Precondition("expected a forward spectrum".into()));
    }
    let d = forward.dim();
    Ok((d - forward.d0_minus, d - forward.d0))
}

/// Closed form of a product of rank-one reduced transfer matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Product {
    pub n: usize,
    /// `log U_k` for `k = 1..=n`, with `U_k = σ_1 + σ_1σ_2 + … + σ_1⋯σ_k`.
    pub log_u: Vec<f64>,
    /// `log s_n`, with `s_n = σ_1⋯σ_n`.
    pub log_s: f64,
    /// `n⁻¹ log U_n`, tends to `max(0, u)`.
    pub plus_rate: f64,
    /// `n⁻¹ log((1 + U_n)/s_n)`, tends to `max(0, -u)`.
    pub minus_rate: f64,
    /// Largest relative deviation of the direct product from the closed
    /// form, over the steps that were multiplied out.
    pub max_rel_err: f64,
    pub verified_steps: usize,
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Checks `Ǎ_n ⋯ Ǎ_1 = (1+U_n, -U_n; 1+U_{n-1}, -U_{n-1})` with
/// `Ǎ_k = (1+σ_k, -σ_k; 1, 0)` and returns the growth rates.
///
/// The direct product is multiplied out while its entries stay below
/// `1e150`; the rates are always computed in the log domain.
pub fn rank1_product_structure(sigma: &[f64]) -> Result<Rank1Product> {
    if sigma.is_empty() {
        return Err(Error::Precondition("empty σ stream".into()));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Precondition("σ must be positive and finite".into()));
    }
    let n = sigma.len();
    let mut log_u = Vec::with_capacity(n);
    let mut log_s = 0.0;
    let mut lu = f64::NEG_INFINITY;
    let mut prod = Mat::identity(2);
    let mut max_rel_err: f64 = 0.0;
    let mut verified = 0;
    let mut u_prev = 0.0;
    for (k, s) in sigma.iter().enumerate() {
        log_s += s.ln();
        lu = logaddexp(lu, log_s);
        log_u.push(lu);
        if verified == k {
            let a = Mat::from_rows(&[[1.0 + s, -s], [1.0, 0.0]]);
            let next = &a * &prod;
            if next.max_abs() < 1e150 {
                let u = lu.exp();
                let closed = Mat::from_rows(&[[1.0 + u, -u], [1.0 + u_prev, -u_prev]]);
                let rel = next.max_abs_diff(&closed) / closed.max_abs().max(1.0);
                max_rel_err = max_rel_err.max(rel);
                prod = next;
                u_prev = u;
                verified += 1;
            }
        }
    }
    let nf = n as f64;
    Ok(Rank1Product {
        n,
        plus_rate: lu / nf,
        minus_rate: (logaddexp(0.0, lu) - log_s) / nf,
        log_u,
        log_s,
        max_rel_err,
        verified_steps: verified,
    })
}
