//! Quenched Monte Carlo of the pair `(G_n, X_n)`.
//!
//! Each step first draws `G_n` from row `G_{n-1}` of `Q`, then moves `X`
//! up with probability `p^(G_n)_{X_{n-1}}`. A replicate `r` of a run with
//! base seed `s` uses ChaCha8 seeded from `s` on stream `r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::envgen::EnvRealization;
use crate::error::{Error, Result};
use crate::model::RegimeModel;

/// Generator for replicate `rep` of base seed `seed`.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One walker on a fixed environment.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    e: &'a EnvRealization,
    cumulative: Vec<Vec<f64>>,
    pub regime: usize,
    pub site: i64,
}

impl<'a> Walker<'a> {
    pub fn new(model: &RegimeModel, e: &'a EnvRealization, start: (usize, i64)) -> Result<Self> {
        let m = model.m();
        if start.0 >= m {
            return Err(Error::Precondition(format!("start regime {} out of range", start.0 + 1)));
        }
        if e.m() != m {
            return Err(Error::Dimension("environment and model disagree on m".into()));
        }
        let cumulative = (0..m)
            .map(|a| {
                let mut acc = 0.0;
                model.q().row(a).iter().map(|x| {
                    acc += x;
                    acc
                }).collect()
            })
            .collect();
        Ok(Walker { e, cumulative, regime: start.0, site: start.1 })
    }

    fn next_regime(&self, u: f64) -> usize {
        let row = &self.cumulative[self.regime];
        let m = row.len();
        // The last positive entry absorbs rounding in the cumulative sum.
        let last = (0..m).rev().find(|&b| row[b] > if b == 0 { 0.0 } else { row[b - 1] }).unwrap_or(m - 1);
        (0..m).find(|&b| u < row[b]).map_or(last, |b| b.min(last))
    }

    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let u: f64 = rng.gen();
        self.regime = self.next_regime(u);
        let p = self.e.p(self.regime, self.site)?;
        let v: f64 = rng.gen();
        self.site += if v < p { 1 } else { -1 };
        Ok(())
    }
}

/// `(n, G_n, X_n)` rows sampled every `stride` steps, plus the last step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: (usize, i64),
    pub seed: u64,
    pub stride: usize,
    pub steps: Vec<(usize, usize, i64)>,
}

impl Trajectory {
    /// Rows `n,G,X`, regimes 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,G,X\n");
        for (n, g, x) in &self.steps {
            let _ = writeln!(s, "{n},{},{x}", g + 1);
        }
        s
    }

    pub fn final_site(&self) -> i64 {
        self.steps.last().map_or(self.start.1, |s| s.2)
    }
}

pub fn run(model: &RegimeModel, e: &EnvRealization, start: (usize, i64), n_steps: usize, seed: u64) -> Result<Trajectory> {
    run_strided(model, e, start, n_steps, seed, 1)
}

pub fn run_strided(
    model: &RegimeModel,
    e: &EnvRealization,
    start: (usize, i64),
    n_steps: usize,
    seed: u64,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::Precondition("stride must be positive".into()));
    }
    let mut w = Walker::new(model, e, start)?;
    let mut rng = replicate_rng(seed, 0);
    let mut steps = vec![(0, start.0, start.1)];
    for n in 1..=n_steps {
        w.step(&mut rng)?;
        if n % stride == 0 || n == n_steps {
            steps.push((n, w.regime, w.site));
        }
    }
    Ok(Trajectory { start, seed, stride, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Replicates entering the estimate.
    pub replicates: usize,
    /// Replicates dropped because they reached the horizon undecided.
    pub censored: usize,
    pub seed: u64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitOptions {
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Leaving this window counts as never hitting, as in a Killed solve.
    pub kill_window: Option<(i64, i64)>,
}

impl HitOptions {
    pub fn new(replicates: usize, seed: u64) -> Self {
        HitOptions { horizon: 1_000_000, replicates, seed, kill_window: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Hit(usize),
    Miss,
    Censored,
}

fn first_hit(model: &RegimeModel, e: &EnvRealization, start: (usize, i64), target: i64, opts: &HitOptions, rep: u64) -> Result<Outcome> {
    let mut w = Walker::new(model, e, start)?;
    let mut rng = replicate_rng(opts.seed, rep);
    for _ in 0..opts.horizon {
        w.step(&mut rng)?;
        if w.site == target {
            return Ok(Outcome::Hit(w.regime));
        }
        if let Some((lo, hi)) = opts.kill_window {
            if w.site <= lo || w.site >= hi {
                return Ok(Outcome::Miss);
            }
        }
    }
    Ok(Outcome::Censored)
}

fn outcomes(model: &RegimeModel, e: &EnvRealization, start: (usize, i64), target: i64, opts: &HitOptions) -> Result<Vec<Outcome>> {
    if let Some((lo, hi)) = opts.kill_window {
        if !(lo < target && target < hi && lo < start.1 && start.1 < hi) {
            return Err(Error::Precondition("kill window must contain the start and the target".into()));
        }
    }
    (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| first_hit(model, e, start, target, opts, r))
        .collect()
}

/// Fraction of uncensored replicates that reach `target` at some time `n ≥ 1`.
pub fn mc_hitting(model: &RegimeModel, e: &EnvRealization, start: (usize, i64), target: i64, opts: HitOptions) -> Result<McEstimate> {
    let out = outcomes(model, e, start, target, &opts)?;
    let censored = out.iter().filter(|o| **o == Outcome::Censored).count();
    let xs: Vec<f64> = out
        .iter()
        .filter(|o| **o != Outcome::Censored)
        .map(|o| if matches!(o, Outcome::Hit(_)) { 1.0 } else { 0.0 })
        .collect();
    let (value, stderr) = mean_stderr(&xs);
    Ok(McEstimate { value, stderr, replicates: xs.len(), censored, seed: opts.seed })
}

/// Empirical law of `G_τ` on the replicates that hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeAtHit {
    pub counts: Vec<usize>,
    pub hits: usize,
    pub censored: usize,
    pub frequencies: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub fn regime_at_hit(model: &RegimeModel, e: &EnvRealization, start: (usize, i64), target: i64, opts: HitOptions) -> Result<RegimeAtHit> {
    let out = outcomes(model, e, start, target, &opts)?;
    let mut counts = vec![0usize; model.m()];
    let mut censored = 0;
    for o in &out {
        match o {
            Outcome::Hit(b) => counts[*b] += 1,
            Outcome::Censored => censored += 1,
            Outcome::Miss => {}
        }
    }
    let hits: usize = counts.iter().sum();
    let n = hits.max(1) as f64;
    let frequencies: Vec<f64> = counts.iter().map(|c| *c as f64 / n).collect();
    let stderr = frequencies.iter().map(|f| (f * (1.0 - f) / n).sqrt()).collect();
    Ok(RegimeAtHit { counts, hits, censored, frequencies, stderr })
}

/// Mean and standard error of `X_n - X_0` after `n_steps`.
pub fn displacement(model: &RegimeModel, e: &EnvRealization, start: (usize, i64), n_steps: usize, replicates: usize, seed: u64) -> Result<McEstimate> {
    let finals: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut w = Walker::new(model, e, start)?;
            let mut rng = replicate_rng(seed, r);
            for _ in 0..n_steps {
                w.step(&mut rng)?;
            }
            Ok((w.site - start.1) as f64)
        })
        .collect::<Result<_>>()?;
    let (value, stderr) = mean_stderr(&finals);
    Ok(McEstimate { value, stderr, replicates, censored: 0, seed })
}

/// Starting fortune in the fortune-curve experiments.
pub const START_FORTUNE: i64 = 100;

/// A named game for fortune experiments.
#[derive(Debug, Clone)]
pub struct Game<'a> {
    pub name: String,
    pub model: &'a RegimeModel,
    pub env: &'a EnvRealization,
    pub start_regime: usize,
}

/// One fortune path per game, rows `game,n,fortune`.
pub fn fortune_curves_csv(games: &[Game<'_>], n_steps: usize, seed: u64) -> Result<String> {
    let mut s = String::from("game,n,fortune\n");
    for g in games {
        let t = run(g.model, g.env, (g.start_regime, START_FORTUNE), n_steps, seed)?;
        for (n, _, x) in t.steps.iter().skip(1) {
            let _ = writeln!(s, "{},{n},{x}", g.name);
        }
    }
    Ok(s)
}

/// Final fortune statistics over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FortuneStats {
    pub game: String,
    pub start: i64,
    pub mean_final: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub n_steps: usize,
}

impl FortuneStats {
    /// `(mean - start) / stderr`.
    pub fn z(&self) -> f64 {
        (self.mean_final - self.start as f64) / self.stderr
    }
}

pub fn final_fortune_stats(game: &Game<'_>, n_steps: usize, replicates: usize, seed: u64) -> Result<FortuneStats> {
    let d = displacement(game.model, game.env, (game.start_regime, START_FORTUNE), n_steps, replicates, seed)?;
    Ok(FortuneStats {
        game: game.name.clone(),
        start: START_FORTUNE,
        mean_final: START_FORTUNE as f64 + d.value,
        stderr: d.stderr,
        replicates,
        n_steps,
    })
}
