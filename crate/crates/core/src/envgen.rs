//! Environment processes `p^(α)` and the shift `T`.
//!
//! An [`EnvSpec`] describes one stationary ergodic process of success
//! probabilities indexed by the integers. An [`EnvRealization`] holds one
//! sample of several such processes ("tracks") together with the map from
//! regimes to tracks, so regimes that share a process read identical values.
//!
//! Site indices of a realization are relative: reading site `i` returns the
//! underlying process at `i + origin_shift`. Shifting by `k` adds `k` to the
//! origin, which is exactly the action of `T^k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closest a probability may come to 0 or 1.
pub const PROB_MARGIN: f64 = 1e-12;

/// Stream offset reserved for environment tracks so they never collide with
/// the replicate streams used by the simulator.
const ENV_STREAM_BASE: u64 = 1 << 63;

/// A stationary ergodic process of success probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// `p_i = values[i mod d]`.
    Periodic { values: Vec<f64> },
    /// Independent draws from a finite law.
    Iid { support: Vec<f64>, weights: Vec<f64> },
    /// Orbit of the Gauss map `x -> 1/x - floor(1/x)` started from its
    /// invariant density `1/(log 2 (1+x))`.
    GaussMap,
}

fn check_prob(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() || v <= PROB_MARGIN || v >= 1.0 - PROB_MARGIN {
        return Err(Error::InvalidSpec(format!(
            "{what} {v} is not strictly inside (0, 1) with margin {PROB_MARGIN}"
        )));
    }
    Ok(())
}

impl EnvSpec {
    pub fn constant(p: f64) -> Self {
        EnvSpec::Periodic { values: vec![p] }
    }

    pub fn periodic(values: &[f64]) -> Self {
        EnvSpec::Periodic { values: values.to_vec() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Periodic { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSpec("periodic values are empty".into()));
                }
                for v in values {
                    check_prob(*v, "periodic value")?;
                }
            }
            EnvSpec::Iid { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return Err(Error::InvalidSpec(
                        "iid support and weights must be non-empty and of equal length".into(),
                    ));
                }
                for v in support {
                    check_prob(*v, "iid support value")?;
                }
                if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(Error::InvalidSpec("iid weights must be positive".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "iid weights sum to {total}, expected 1"
                    )));
                }
            }
            EnvSpec::GaussMap => {}
        }
        Ok(())
    }

    /// Spatial period, when the process is periodic.
    pub fn period(&self) -> Option<usize> {
        match self {
            EnvSpec::Periodic { values } => Some(values.len()),
            _ => None,
        }
    }

    /// Whether values outside a realized window can be recomputed exactly.
    pub fn is_regenerable(&self) -> bool {
        !matches!(self, EnvSpec::GaussMap)
    }

    /// Whether the shift acting on this process is invertible.
    pub fn shift_invertible(&self) -> bool {
        !matches!(self, EnvSpec::GaussMap)
    }
}

/// Stationary mean of `log σ` for a process, `σ = (1-p)/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSigmaMean {
    pub mean: f64,
    pub stderr: f64,
    /// `true` when `mean` is an exact expectation rather than an estimate.
    pub exact: bool,
    pub n_samples: usize,
}

pub fn log_sigma(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Mean of `log σ_0` under the stationary law of `spec`.
///
/// Periodic and iid processes return the exact expectation. The Gauss map
/// returns a Birkhoff average over `n_samples` iterates with a batch-means
/// standard error.
pub fn ergodic_log_sigma_mean(spec: &EnvSpec, n_samples: usize, seed: u64) -> Result<LogSigmaMean> {
    spec.validate()?;
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be at least 1".into()));
    }
    Ok(match spec {
        EnvSpec::Periodic { values } => LogSigmaMean {
            mean: values.iter().map(|p| log_sigma(*p)).sum::<f64>() / values.len() as f64,
            stderr: 0.0,
            exact: true,
            n_samples: values.len(),
        },
        EnvSpec::Iid { support, weights } => LogSigmaMean {
            mean: support.iter().zip(weights).map(|(p, w)| w * log_sigma(*p)).sum(),
            stderr: 0.0,
            exact: true,
            n_samples: support.len(),
        },
        EnvSpec::GaussMap => {
            let mut rng = track_rng(seed, 0);
            let orbit = gauss_orbit(&mut rng, n_samples);
            let samples: Vec<f64> = orbit.values.iter().map(|p| log_sigma(*p)).collect();
            let (mean, stderr) = batch_mean(&samples, 100);
            LogSigmaMean { mean, stderr, exact: false, n_samples }
        }
    })
}

/// Mean and batch-means standard error of a correlated series.
pub fn batch_mean(samples: &[f64], n_batches: usize) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let b = n_batches.min(n);
    if b < 2 {
        return (mean, f64::INFINITY);
    }
    let size = n / b;
    let means: Vec<f64> =
        (0..b).map(|k| samples[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mbar = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mbar).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

fn track_rng(seed: u64, track: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ENV_STREAM_BASE | track as u64);
    rng
}

struct GaussOrbit {
    values: Vec<f64>,
    /// Offsets where the orbit was restarted because it collapsed onto an
    /// endpoint in floating point.
    restarts: Vec<usize>,
}

fn gauss_draw(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let x = 2f64.powf(u) - 1.0;
        if x > PROB_MARGIN && x < 1.0 - PROB_MARGIN {
            return x;
        }
    }
}

fn gauss_orbit(rng: &mut ChaCha8Rng, len: usize) -> GaussOrbit {
    let mut values = Vec::with_capacity(len);
    let mut restarts = Vec::new();
    let mut x = gauss_draw(rng);
    for k in 0..len {
        values.push(x);
        let y = 1.0 / x;
        let next = y - y.floor();
        x = if next > PROB_MARGIN && next < 1.0 - PROB_MARGIN {
            next
        } else {
            restarts.push(k + 1);
            gauss_draw(rng)
        };
    }
    GaussOrbit { values, restarts }
}

/// Iid value at absolute site `j` of a track, reproducible for any `j`.
fn iid_value(seed: u64, track: usize, j: i64, support: &[f64], weights: &[f64]) -> f64 {
    let mut rng = track_rng(seed, track);
    let offset = (j as u64) ^ (1 << 63);
    rng.set_word_pos(offset as u128 * 2);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (v, w) in support.iter().zip(weights) {
        acc += w;
        if u < acc {
            return *v;
        }
    }
    *support.last().expect("validated non-empty")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Track {
    spec: EnvSpec,
    /// Absolute index of `values[0]`.
    base: i64,
    values: Vec<f64>,
    #[serde(default)]
    restarts: Vec<i64>,
}

/// One sampled environment for a set of regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRealization {
    window: (i64, i64),
    origin_shift: i64,
    seed: u64,
    tracks: Vec<Track>,
    assignment: Vec<usize>,
}

/// Samples a single process on `window = (lo, hi)`, inclusive.
pub fn realize(spec: &EnvSpec, window: (i64, i64), seed: u64) -> Result<EnvRealization> {
    realize_tracks(std::slice::from_ref(spec), &[0], window, seed)
}

/// Samples several processes and maps regime `α` to track `assignment[α]`.
pub fn realize_tracks(
    specs: &[EnvSpec],
    assignment: &[usize],
    window: (i64, i64),
    seed: u64,
) -> Result<EnvRealization> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(Error::EmptyWindow { lo, hi });
    }
    if assignment.is_empty() {
        return Err(Error::InvalidSpec("no regimes assigned".into()));
    }
    if let Some(bad) = assignment.iter().find(|t| **t >= specs.len()) {
        return Err(Error::InvalidSpec(format!("regime mapped to missing process {bad}")));
    }
    let len = (hi - lo + 1) as usize;
    let mut tracks = Vec::with_capacity(specs.len());
    for (t, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let track = match spec {
            EnvSpec::Periodic { values } => Track {
                spec: spec.clone(),
                base: lo,
                values: (lo..=hi).map(|j| values[j.rem_euclid(values.len() as i64) as usize]).collect(),
                restarts: vec![],
            },
            EnvSpec::Iid { support, weights } => Track {
                spec: spec.clone(),
                base: lo,
                values: (lo..=hi).map(|j| iid_value(seed, t, j, support, weights)).collect(),
                restarts: vec![],
            },
            EnvSpec::GaussMap => {
                let mut rng = track_rng(seed, t);
                let orbit = gauss_orbit(&mut rng, len);
                Track {
                    spec: spec.clone(),
                    base: lo,
                    values: orbit.values,
                    restarts: orbit.restarts.iter().map(|k| lo + *k as i64).collect(),
                }
            }
        };
        tracks.push(track);
    }
    Ok(EnvRealization { window, origin_shift: 0, seed, tracks, assignment: assignment.to_vec() })
}

impl EnvRealization {
    /// Number of regimes.
    pub fn m(&self) -> usize {
        self.assignment.len()
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn origin_shift(&self) -> i64 {
        self.origin_shift
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self, alpha: usize) -> &EnvSpec {
        &self.tracks[self.assignment[alpha]].spec
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// `true` when every track can be read at any site.
    pub fn is_regenerable(&self) -> bool {
        self.tracks.iter().all(|t| t.spec.is_regenerable())
    }

    pub fn shift_invertible(&self) -> bool {
        self.tracks.iter().all(|t| t.spec.shift_invertible())
    }

    /// Least common multiple of the regime periods, when all are periodic.
    pub fn period(&self) -> Option<usize> {
        let mut l = 1usize;
        for alpha in 0..self.m() {
            l = lcm(l, self.spec(alpha).period()?);
        }
        Some(l)
    }

    /// Probability `p_i^(α)`.
    pub fn p(&self, alpha: usize, i: i64) -> Result<f64> {
        let track = &self.tracks[self.assignment[alpha]];
        let j = i + self.origin_shift;
        let k = j - track.base;
        if k >= 0 && (k as usize) < track.values.len() {
            return Ok(track.values[k as usize]);
        }
        match &track.spec {
            EnvSpec::Periodic { values } => Ok(values[j.rem_euclid(values.len() as i64) as usize]),
            EnvSpec::Iid { support, weights } => {
                Ok(iid_value(self.seed, self.assignment[alpha], j, support, weights))
            }
            EnvSpec::GaussMap => Err(Error::OutsideWindow { site: i }),
        }
    }

    /// All regime probabilities at site `i`.
    pub fn column(&self, i: i64) -> Result<Vec<f64>> {
        (0..self.m()).map(|a| self.p(a, i)).collect()
    }

    /// `σ_i^(α) = q_i^(α) / p_i^(α)`.
    pub fn sigma(&self, alpha: usize, i: i64) -> Result<f64> {
        let p = self.p(alpha, i)?;
        Ok((1.0 - p) / p)
    }

    /// Whether site `i` can be read for every regime.
    pub fn covers(&self, i: i64) -> bool {
        (0..self.m()).all(|a| self.p(a, i).is_ok())
    }

    /// `T^k e`: reading site `i` of the result reads site `i + k` of `self`.
    ///
    /// Regenerable environments keep their window. Otherwise the window is
    /// cut down to the sites still backed by stored data.
    pub fn shift(&self, k: i64) -> Result<EnvRealization> {
        let mut out = self.clone();
        out.origin_shift += k;
        if !self.is_regenerable() {
            let (mut lo, mut hi) = self.window;
            for t in self.tracks.iter().filter(|t| !t.spec.is_regenerable()) {
                lo = lo.max(t.base - out.origin_shift);
                hi = hi.min(t.base + t.values.len() as i64 - 1 - out.origin_shift);
            }
            if lo > hi {
                return Err(Error::OutsideWindow { site: self.window.0 + k });
            }
            out.window = (lo, hi);
        }
        Ok(out)
    }

    /// Narrows the nominal window.
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<EnvRealization> {
        if lo > hi {
            return Err(Error::EmptyWindow { lo, hi });
        }
        for i in [lo, hi] {
            if !self.covers(i) {
                return Err(Error::OutsideWindow { site: i });
            }
        }
        let mut out = self.clone();
        out.window = (lo, hi);
        Ok(out)
    }

    /// Sites where a Gauss-map track was restarted, in relative coordinates.
    pub fn restart_sites(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self
            .tracks
            .iter()
            .flat_map(|t| t.restarts.iter().map(|j| j - self.origin_shift))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GAME_B: [f64; 3] = [0.099, 0.749, 0.749];

    #[test]
    fn periodic_game_b_values() {
        let e = realize(&EnvSpec::periodic(&GAME_B), (0, 5), 1).unwrap();
        let got: Vec<f64> = (0..=5).map(|i| e.p(0, i).unwrap()).collect();
        assert_eq!(got, vec![0.099, 0.749, 0.749, 0.099, 0.749, 0.749]);
        assert_eq!(e.p(0, -1).unwrap(), 0.749);
        assert_eq!(e.p(0, -3).unwrap(), 0.099);
    }

    #[test]
    fn constant_process() {
        let e = realize(&EnvSpec::constant(0.499), (-7, 7), 3).unwrap();
        assert!((-50..50).all(|i| e.p(0, i).unwrap() == 0.499));
    }

    #[test]
    fn gauss_single_site() {
        let e = realize(&EnvSpec::GaussMap, (0, 0), 11).unwrap();
        let p = e.p(0, 0).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(e.p(0, 1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(realize(&EnvSpec::periodic(&[]), (0, 1), 0).is_err());
        assert!(realize(&EnvSpec::constant(1.0), (0, 1), 0).is_err());
        assert!(realize(&EnvSpec::constant(0.0), (0, 1), 0).is_err());
        assert!(realize(&EnvSpec::constant(1e-13), (0, 1), 0).is_err());
        let bad = EnvSpec::Iid { support: vec![0.3, 0.6], weights: vec![0.5, 0.4] };
        assert!(bad.validate().is_err());
        let neg = EnvSpec::Iid { support: vec![0.3, 0.6], weights: vec![1.5, -0.5] };
        assert!(neg.validate().is_err());
        assert!(matches!(
            realize(&EnvSpec::constant(0.5), (3, 2), 0),
            Err(Error::EmptyWindow { lo: 3, hi: 2 })
        ));
    }

    #[test]
    fn shift_identities() {
        let e = realize(&EnvSpec::periodic(&[0.2, 0.4, 0.7]), (-10, 10), 0).unwrap();
        let s3 = e.shift(3).unwrap();
        let s0 = e.shift(0).unwrap();
        for i in -10..=10 {
            assert_eq!(s3.p(0, i).unwrap(), e.p(0, i).unwrap());
            assert_eq!(s0.p(0, i).unwrap(), e.p(0, i).unwrap());
        }
        assert_eq!(e.shift(1).unwrap().p(0, 0).unwrap(), e.p(0, 1).unwrap());
    }

    #[test]
    fn gauss_shift_cuts_window() {
        let e = realize(&EnvSpec::GaussMap, (0, 9), 5).unwrap();
        let s = e.shift(4).unwrap();
        assert_eq!(s.window(), (0, 5));
        assert_eq!(s.p(0, 5).unwrap(), e.p(0, 9).unwrap());
        assert!(e.shift(10).is_err());
    }

    #[test]
    fn log_sigma_means() {
        let r = ergodic_log_sigma_mean(&EnvSpec::periodic(&GAME_B), 1, 0).unwrap();
        let mu = (1.0 - 0.099) * (1.0 - 0.749f64).powi(2) / (0.099 * 0.749f64.powi(2));
        assert!((r.mean - mu.ln() / 3.0).abs() < 1e-15);
        assert!(r.exact);
        let half = ergodic_log_sigma_mean(&EnvSpec::constant(0.5), 1, 0).unwrap();
        assert_eq!(half.mean, 0.0);
        let iid = EnvSpec::Iid { support: vec![0.4, 0.6], weights: vec![0.5, 0.5] };
        assert!(ergodic_log_sigma_mean(&iid, 1, 0).unwrap().mean.abs() < 1e-15);
        assert!(ergodic_log_sigma_mean(&iid, 0, 0).is_err());
    }

    #[test]
    fn gauss_birkhoff_mean() {
        let r = ergodic_log_sigma_mean(&EnvSpec::GaussMap, 200_000, 7).unwrap();
        assert!(!r.exact);
        assert!((r.mean - std::f64::consts::LN_2 / 2.0).abs() < 0.02, "{r:?}");
        assert!(r.stderr > 0.0 && r.stderr < 0.05);
    }

    #[test]
    fn gauss_orbit_is_consistent() {
        let e = realize(&EnvSpec::GaussMap, (-20, 500), 99).unwrap();
        let restarts = e.restart_sites();
        for i in -20..500 {
            if restarts.contains(&(i + 1)) {
                continue;
            }
            let x = e.p(0, i).unwrap();
            let y = 1.0 / x;
            assert_eq!(e.p(0, i + 1).unwrap(), y - y.floor());
        }
    }

    #[test]
    fn iid_is_regenerable_and_seeded() {
        let spec = EnvSpec::Iid { support: vec![0.2, 0.5, 0.9], weights: vec![0.25, 0.25, 0.5] };
        let e = realize(&spec, (0, 10), 17).unwrap();
        let wide = realize(&spec, (-100, 100), 17).unwrap();
        for i in -100..=100 {
            assert_eq!(e.p(0, i).unwrap(), wide.p(0, i).unwrap());
        }
        let other = realize(&spec, (-100, 100), 18).unwrap();
        assert!((-100..=100).any(|i| other.p(0, i).unwrap() != wide.p(0, i).unwrap()));
        let big = realize(&spec, (0, 40_000), 3).unwrap();
        let frac = (0..=40_000).filter(|i| big.p(0, *i).unwrap() == 0.9).count() as f64 / 40_001.0;
        assert!((frac - 0.5).abs() < 0.01);
    }

    #[test]
    fn shared_tracks_read_identically() {
        let specs = [EnvSpec::GaussMap, EnvSpec::constant(0.3)];
        let e = realize_tracks(&specs, &[0, 0, 1], (0, 20), 4).unwrap();
        for i in 0..=20 {
            assert_eq!(e.p(0, i).unwrap(), e.p(1, i).unwrap());
            assert_eq!(e.p(2, i).unwrap(), 0.3);
        }
        assert_eq!(e.period(), None);
        let p = realize_tracks(
            &[EnvSpec::constant(0.5), EnvSpec::periodic(&GAME_B), EnvSpec::periodic(&[0.3, 0.4])],
            &[0, 1, 2],
            (0, 1),
            0,
        )
        .unwrap();
        assert_eq!(p.period(), Some(6));
    }

    proptest! {
        #[test]
        fn shift_is_equivariant(
            values in prop::collection::vec(0.01f64..0.99, 1..6),
            k in -20i64..20,
            i in -30i64..30,
        ) {
            let e = realize(&EnvSpec::periodic(&values), (-5, 5), 0).unwrap();
            prop_assert_eq!(e.shift(k).unwrap().p(0, i).unwrap(), e.p(0, i + k).unwrap());
            prop_assert_eq!(e.shift(1).unwrap().shift(k).unwrap().p(0, i).unwrap(),
                            e.shift(k + 1).unwrap().p(0, i).unwrap());
        }

        #[test]
        fn periodic_ignores_seed(
            values in prop::collection::vec(0.01f64..0.99, 1..6),
            s1 in any::<u64>(),
            s2 in any::<u64>(),
        ) {
            let a = realize(&EnvSpec::periodic(&values), (-12, 12), s1).unwrap();
            let b = realize(&EnvSpec::periodic(&values), (-12, 12), s2).unwrap();
            for i in -12..=12 {
                prop_assert_eq!(a.p(0, i).unwrap(), b.p(0, i).unwrap());
                let d = values.len() as i64;
                prop_assert_eq!(a.p(0, i).unwrap(), a.p(0, i + d).unwrap());
            }
        }

        #[test]
        fn emitted_values_are_probabilities(seed in any::<u64>()) {
            let specs = [
                EnvSpec::GaussMap,
                EnvSpec::Iid { support: vec![0.1, 0.8], weights: vec![0.3, 0.7] },
            ];
            let e = realize_tracks(&specs, &[0, 1], (-30, 30), seed).unwrap();
            for a in 0..2 {
                for i in -30..=30 {
                    let p = e.p(a, i).unwrap();
                    prop_assert!(p > 0.0 && p < 1.0);
                    let s = e.sigma(a, i).unwrap();
                    prop_assert!(s.is_finite() && s > 0.0);
                }
            }
        }
    }
}
