//! The regime-switching model and its transfer matrices.
//!
//! Regimes are indexed from 0 internally. With `Δ_i = diag(p_i^(1..m))`
//! the one-step hitting recursion reads `f_i = M_i f_{i+1} + N_i f_{i-1}`
//! where `M_i = QΔ_i` and `N_i = Q(I - Δ_i)`. When `M_i` and `N_i` are
//! invertible the recursion becomes the first-order system
//! `(f_{i+1}; f_i) = A_i (f_i; f_{i-1})`.
//!
//! When `Q` has rank `r < m` the same construction runs on `r x r` matrices
//! built from the decomposition `Q = (π; Θπ)` after relabelling regimes.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::envgen::{gcd, lcm, realize_tracks, EnvRealization, EnvSpec};
use crate::error::{Error, Result};
use crate::smallmat::{inverse, numerical_rank, solve, Mat};

/// Relative singular-value tolerance used to decide the rank of `Q`.
pub const RANK_TOL: f64 = 1e-9;
/// Determinants at or below this magnitude count as singular.
pub const DET_TOL: f64 = 1e-12;

/// Factorization `P Q Pᵀ = (π; Θπ)` of the switching matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDecomposition {
    pub r: usize,
    /// `row_permutation[k]` is the original regime placed at position `k`.
    pub row_permutation: Vec<usize>,
    /// `r x m`, columns in permuted order.
    pub pi: Mat,
    /// `(m - r) x r`.
    pub theta: Mat,
}

impl RankDecomposition {
    /// Reassembles `Q` in the original labelling.
    pub fn reconstruct(&self) -> Mat {
        let m = self.pi.cols();
        let stacked = if self.r < m {
            let lower = &self.theta * &self.pi;
            let mut s = Mat::zeros(m, m);
            s.set_block(0, 0, &self.pi);
            s.set_block(self.r, 0, &lower);
            s
        } else {
            self.pi.clone()
        };
        let mut q = Mat::zeros(m, m);
        for k in 0..m {
            for l in 0..m {
                q[(self.row_permutation[k], self.row_permutation[l])] = stacked[(k, l)];
            }
        }
        q
    }
}

/// Numerical rank of `q` and a decomposition with the independent rows first.
pub fn rank_decompose(q: &Mat, tol: f64) -> Result<RankDecomposition> {
    if !q.is_square() || q.rows() == 0 {
        return Err(Error::Dimension("Q must be square and non-empty".into()));
    }
    let m = q.rows();
    let r = numerical_rank(q, tol);
    let mut selected: Vec<usize> = Vec::with_capacity(r);
    for i in 0..m {
        if selected.len() == r {
            break;
        }
        let mut rows: Vec<&[f64]> = selected.iter().map(|k| q.row(*k)).collect();
        rows.push(q.row(i));
        if numerical_rank(&Mat::from_rows(&rows), tol) > selected.len() {
            selected.push(i);
        }
    }
    let mut perm = selected.clone();
    perm.extend((0..m).filter(|i| !selected.contains(i)));
    let mut permuted = Mat::zeros(m, m);
    for k in 0..m {
        for l in 0..m {
            permuted[(k, l)] = q[(perm[k], perm[l])];
        }
    }
    let pi = permuted.block(0, 0, r, m);
    let theta = if r < m {
        let dependent = permuted.block(r, 0, m - r, m);
        // Θ = D πᵀ (π πᵀ)⁻¹, computed as the transpose of a solve.
        let gram = &pi * &pi.transpose();
        let rhs = &pi * &dependent.transpose();
        solve(&gram, &rhs)?.transpose()
    } else {
        Mat::zeros(0, r)
    };
    Ok(RankDecomposition { r, row_permutation: perm, pi, theta })
}

/// Serializable description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Row-major switching matrix.
    pub q: Vec<Vec<f64>>,
    /// Distinct environment processes.
    pub processes: Vec<EnvSpec>,
    /// `assignment[α]` is the process driving regime `α`.
    pub assignment: Vec<usize>,
}

/// A validated regime-switching model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    q: Mat,
    processes: Vec<EnvSpec>,
    assignment: Vec<usize>,
    rank: RankDecomposition,
}

impl RegimeModel {
    pub fn new(q: Mat, processes: Vec<EnvSpec>, assignment: Vec<usize>) -> Result<Self> {
        let m = q.rows();
        if m == 0 || !q.is_square() {
            return Err(Error::InvalidModel("Q must be a non-empty square matrix".into()));
        }
        if assignment.len() != m {
            return Err(Error::InvalidModel(format!(
                "{m} regimes but {} process assignments",
                assignment.len()
            )));
        }
        for i in 0..m {
            let row = q.row(i);
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidModel(format!("row {} of Q has entries outside [0,1]", i + 1)));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("row {} of Q sums to {s}", i + 1)));
            }
        }
        for (a, t) in assignment.iter().enumerate() {
            if *t >= processes.len() {
                return Err(Error::InvalidModel(format!(
                    "regime {} refers to missing process {}",
                    a + 1,
                    t + 1
                )));
            }
        }
        for p in &processes {
            p.validate()?;
        }
        let rank = rank_decompose(&q, RANK_TOL)?;
        Ok(RegimeModel { q, processes, assignment, rank })
    }

    /// One regime per process.
    pub fn from_specs(q: Mat, specs: Vec<EnvSpec>) -> Result<Self> {
        let assignment = (0..specs.len()).collect();
        RegimeModel::new(q, specs, assignment)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let m = spec.q.len();
        if spec.q.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel("Q must be square".into()));
        }
        let q = Mat::from_vec(m, m, spec.q.concat()).map_err(|e| Error::InvalidModel(e.to_string()))?;
        RegimeModel::new(q, spec.processes.clone(), spec.assignment.clone())
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            q: (0..self.m()).map(|i| self.q.row(i).to_vec()).collect(),
            processes: self.processes.clone(),
            assignment: self.assignment.clone(),
        }
    }

    /// A single regime with its own process.
    pub fn single(spec: EnvSpec) -> Result<Self> {
        RegimeModel::new(Mat::identity(1), vec![spec], vec![0])
    }

    pub fn m(&self) -> usize {
        self.q.rows()
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn processes(&self) -> &[EnvSpec] {
        &self.processes
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn spec(&self, alpha: usize) -> &EnvSpec {
        &self.processes[self.assignment[alpha]]
    }

    pub fn rank(&self) -> &RankDecomposition {
        &self.rank
    }

    /// Least common multiple of the regime periods, when all are periodic.
    pub fn period(&self) -> Option<usize> {
        let mut l = 1;
        for a in 0..self.m() {
            l = lcm(l, self.spec(a).period()?);
        }
        Some(l)
    }

    pub fn shift_invertible(&self) -> bool {
        self.processes.iter().all(|p| p.shift_invertible())
    }

    pub fn realize(&self, window: (i64, i64), seed: u64) -> Result<EnvRealization> {
        realize_tracks(&self.processes, &self.assignment, window, seed)
    }

    /// Whether two regimes are driven by the same process.
    pub fn has_duplicate_regimes(&self) -> bool {
        let m = self.m();
        (0..m).any(|a| (a + 1..m).any(|b| self.spec(a) == self.spec(b)))
    }

    fn check_env(&self, e: &EnvRealization) -> Result<()> {
        if e.m() != self.m() {
            return Err(Error::Dimension(format!(
                "environment has {} regimes, model has {}",
                e.m(),
                self.m()
            )));
        }
        Ok(())
    }

    /// `M_i = QΔ_i` and `N_i = Q(I - Δ_i)`.
    pub fn mn(&self, e: &EnvRealization, i: i64) -> Result<(Mat, Mat)> {
        self.check_env(e)?;
        let p = e.column(i)?;
        let m = self.m();
        let mut mm = Mat::zeros(m, m);
        let mut nn = Mat::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                let qab = self.q[(a, b)];
                mm[(a, b)] = qab * p[b];
                nn[(a, b)] = qab * (1.0 - p[b]);
            }
        }
        Ok((mm, nn))
    }

    /// Full-rank transfer matrix `A_i`.
    pub fn a_matrix(&self, e: &EnvRealization, i: i64) -> Result<Mat> {
        let (mm, nn) = self.mn(e, i)?;
        transfer_from(&mm, &nn).ok_or(Error::SingularStream { site: i })
    }

    /// `A_i⁻¹ = (0, I; -σ_i⁻¹, N_i⁻¹)`.
    pub fn a_inverse(&self, e: &EnvRealization, i: i64) -> Result<Mat> {
        let (mm, nn) = self.mn(e, i)?;
        transfer_inverse_from(&mm, &nn).ok_or(Error::SingularStream { site: i })
    }

    /// `(M̌_i, Ň_i)` in the permuted labelling.
    pub fn mn_check(&self, e: &EnvRealization, i: i64) -> Result<(Mat, Mat)> {
        self.check_env(e)?;
        let rd = &self.rank;
        let (m, r) = (self.m(), rd.r);
        let p: Vec<f64> = rd.row_permutation.iter().map(|a| e.p(*a, i)).collect::<Result<_>>()?;
        let pi1 = rd.pi.block(0, 0, r, r);
        let d1 = Mat::diag(&p[..r]);
        let c1 = Mat::diag(&p[..r].iter().map(|v| 1.0 - v).collect::<Vec<_>>());
        let mut mc = &pi1 * &d1;
        let mut nc = &pi1 * &c1;
        if r < m {
            let pi2 = rd.pi.block(0, r, r, m - r);
            let d2 = Mat::diag(&p[r..]);
            let c2 = Mat::diag(&p[r..].iter().map(|v| 1.0 - v).collect::<Vec<_>>());
            mc = &mc + &(&(&pi2 * &d2) * &rd.theta);
            nc = &nc + &(&(&pi2 * &c2) * &rd.theta);
        }
        Ok((mc, nc))
    }

    /// Reduced transfer matrix `Ǎ_i`.
    pub fn a_check(&self, e: &EnvRealization, i: i64) -> Result<Mat> {
        let (mc, nc) = self.mn_check(e, i)?;
        transfer_from(&mc, &nc).ok_or(Error::SingularStream { site: i })
    }

    pub fn a_check_inverse(&self, e: &EnvRealization, i: i64) -> Result<Mat> {
        let (mc, nc) = self.mn_check(e, i)?;
        transfer_inverse_from(&mc, &nc).ok_or(Error::SingularStream { site: i })
    }
}

fn invertible(a: &Mat) -> Option<Mat> {
    let det = a.determinant().ok()?;
    if det.abs() <= DET_TOL {
        return None;
    }
    inverse(a).ok()
}

/// `(M⁻¹, -M⁻¹N; I, 0)`.
pub fn transfer_from(mm: &Mat, nn: &Mat) -> Option<Mat> {
    let minv = invertible(mm)?;
    invertible(nn)?;
    let sigma = &minv * nn;
    let d = mm.rows();
    Some(Mat::from_blocks(&minv, &sigma.scale(-1.0), &Mat::identity(d), &Mat::zeros(d, d)))
}

/// `(0, I; -σ⁻¹, N⁻¹)`.
pub fn transfer_inverse_from(mm: &Mat, nn: &Mat) -> Option<Mat> {
    invertible(mm)?;
    let ninv = invertible(nn)?;
    let sigma_inv = &ninv * mm;
    let d = mm.rows();
    Some(Mat::from_blocks(&Mat::zeros(d, d), &Mat::identity(d), &sigma_inv.scale(-1.0), &ninv))
}

/// `(N⁻¹, -σ⁻¹; I, 0)`.
pub fn dual_transfer_from(mm: &Mat, nn: &Mat) -> Option<Mat> {
    invertible(mm)?;
    let ninv = invertible(nn)?;
    let sigma_inv = &ninv * mm;
    let d = mm.rows();
    Some(Mat::from_blocks(&ninv, &sigma_inv.scale(-1.0), &Mat::identity(d), &Mat::zeros(d, d)))
}

/// Which reduction applies at a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferPath {
    FullRank,
    RankR,
    Rank1,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTransfer {
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub m_check: Mat,
    pub n_check: Mat,
    pub det_m: f64,
    pub det_n: f64,
    pub sigma_check: Option<Mat>,
    pub a_check: Option<Mat>,
    pub b_check: Option<Mat>,
}

/// Every transfer object at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrices {
    pub site: i64,
    pub path: TransferPath,
    pub delta: Vec<f64>,
    pub m: Mat,
    pub n: Mat,
    pub sigma: Option<Mat>,
    pub a: Option<Mat>,
    pub b: Option<Mat>,
    /// Present whenever `Q` is rank deficient.
    pub reduced: Option<ReducedTransfer>,
}

pub fn build_transfer(model: &RegimeModel, e: &EnvRealization, i: i64) -> Result<TransferMatrices> {
    let (mm, nn) = model.mn(e, i)?;
    let delta = e.column(i)?;
    let sigma = invertible(&mm).map(|minv| &minv * &nn);
    let a = transfer_from(&mm, &nn);
    let b = dual_transfer_from(&mm, &nn);
    let rd = model.rank();
    let m = model.m();
    let (path, reduced) = if rd.r == m {
        (TransferPath::FullRank, None)
    } else {
        let (mc, nc) = model.mn_check(e, i)?;
        let det_m = mc.determinant()?;
        let det_n = nc.determinant()?;
        let p: Vec<f64> = rd.row_permutation.iter().map(|a| delta[*a]).collect();
        let holds = det_m.abs() > DET_TOL && det_n.abs() > DET_TOL;
        let path = if !holds && model.has_duplicate_regimes() {
            TransferPath::Degenerate
        } else if rd.r == 1 {
            TransferPath::Rank1
        } else {
            TransferPath::RankR
        };
        let red = ReducedTransfer {
            delta1: p[..rd.r].to_vec(),
            delta2: p[rd.r..].to_vec(),
            sigma_check: invertible(&mc).map(|minv| &minv * &nc),
            a_check: transfer_from(&mc, &nc),
            b_check: dual_transfer_from(&mc, &nc),
            m_check: mc,
            n_check: nc,
            det_m,
            det_n,
        };
        (path, Some(red))
    };
    Ok(TransferMatrices { site: i, path, delta, m: mm, n: nn, sigma, a, b, reduced })
}

/// Per-site determinants of the reduced matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `(site, det M̌, det Ň)`.
    pub sites: Vec<(i64, f64, f64)>,
    pub holds: bool,
    pub tol: f64,
}

/// Checks that `M̌_i` and `Ň_i` are invertible for every site in `sites`.
pub fn check_hypothesis_inv(
    model: &RegimeModel,
    e: &EnvRealization,
    sites: (i64, i64),
) -> Result<HypothesisReport> {
    let mut out = Vec::new();
    let mut holds = true;
    for i in sites.0..=sites.1 {
        let (mc, nc) = model.mn_check(e, i)?;
        let (dm, dn) = (mc.determinant()?, nc.determinant()?);
        holds &= dm.abs() > DET_TOL && dn.abs() > DET_TOL;
        out.push((i, dm, dn));
    }
    Ok(HypothesisReport { sites: out, holds, tol: DET_TOL })
}

/// Scalar reduction available when `M̌_i = a_i vᵀ` and `Ň_i = b_i vᵀ` share
/// one row vector `v` at every site.
///
/// With `vᵀ𝟙 = 1`, the scalar `g_i = vᵀ f̌_i` solves a nearest-neighbour
/// recursion with `p_i = vᵀ a_i`, and `f̌_i = a_i g_{i+1} + b_i g_{i-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateReduction {
    /// The common row vector, normalized to sum 1, in the permuted labelling.
    pub v: Vec<f64>,
    pub sites_checked: (i64, i64),
}

impl DegenerateReduction {
    /// `(a_i, b_i) = (M̌_i 𝟙, Ň_i 𝟙)`.
    pub fn factors(&self, model: &RegimeModel, e: &EnvRealization, i: i64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mc, nc) = model.mn_check(e, i)?;
        Ok((mc.row_sums(), nc.row_sums()))
    }

    /// Effective success probability of the scalar chain at site `i`.
    pub fn effective_p(&self, model: &RegimeModel, e: &EnvRealization, i: i64) -> Result<f64> {
        let (a, _) = self.factors(model, e, i)?;
        Ok(a.iter().zip(&self.v).map(|(x, y)| x * y).sum())
    }
}

/// Detects the shared-row-vector structure on `sites` and returns the
/// scalar reduction.
pub fn rank1_reduce_degenerate(
    model: &RegimeModel,
    e: &EnvRealization,
    sites: (i64, i64),
) -> Result<DegenerateReduction> {
    let not_found = |why: &str| Error::Precondition(format!("degenerate structure not detected: {why}"));
    if model.rank().r == model.m() && model.m() > 1 {
        return Err(not_found("Q has full rank"));
    }
    if model.m() > 1 && !model.has_duplicate_regimes() {
        return Err(not_found("no two regimes share an environment process"));
    }
    let (mc0, _) = model.mn_check(e, sites.0)?;
    let r = mc0.rows();
    let lead = (0..r)
        .max_by(|a, b| {
            let na: f64 = mc0.row(*a).iter().map(|x| x * x).sum();
            let nb: f64 = mc0.row(*b).iter().map(|x| x * x).sum();
            na.total_cmp(&nb)
        })
        .expect("r >= 1");
    let row = mc0.row(lead);
    let s: f64 = row.iter().sum();
    if s.abs() < 1e-14 {
        return Err(not_found("zero row sum"));
    }
    let v: Vec<f64> = row.iter().map(|x| x / s).collect();
    let outer = |col: &[f64]| {
        let mut o = Mat::zeros(r, r);
        for a in 0..r {
            for b in 0..r {
                o[(a, b)] = col[a] * v[b];
            }
        }
        o
    };
    for i in sites.0..=sites.1 {
        let (mc, nc) = model.mn_check(e, i)?;
        let scale = mc.max_abs().max(nc.max_abs());
        if outer(&mc.row_sums()).max_abs_diff(&mc) > 1e-10 * scale
            || outer(&nc.row_sums()).max_abs_diff(&nc) > 1e-10 * scale
        {
            return Err(not_found(&format!("reduced matrices are not rank one with a common row at site {i}")));
        }
    }
    Ok(DegenerateReduction { v, sites_checked: sites })
}

/// Outcome of the finite-quotient communication-class probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Irreducibility {
    Irreducible,
    /// Classes as lists of `(regime, site mod P)`, regimes 0-based.
    Reducible { classes: Vec<Vec<(usize, usize)>> },
    Unknown,
}

/// Communication classes of `(G_n, X_n)` on `{1..m} x Z_P`.
///
/// The chain on `Z` is irreducible exactly when the quotient graph is
/// strongly connected and its closed walks realize every multiple of `P` as
/// a displacement.
pub fn irreducibility_probe(model: &RegimeModel, e: &EnvRealization, quotient_period: usize) -> Result<Irreducibility> {
    let per = match e.period() {
        Some(p) => p,
        None => return Ok(Irreducibility::Unknown),
    };
    let big_p = quotient_period;
    if big_p < 2 || big_p % 2 != 0 || big_p % per != 0 {
        return Err(Error::Precondition(format!(
            "quotient period {big_p} must be even and a multiple of the environment period {per}"
        )));
    }
    let m = model.m();
    let node = |a: usize, i: usize| a * big_p + i;
    let mut g: DiGraph<(usize, usize), i64> = DiGraph::new();
    let idx: Vec<_> = (0..m * big_p).map(|k| g.add_node((k / big_p, k % big_p))).collect();
    for a in 0..m {
        for i in 0..big_p {
            for b in 0..m {
                if model.q()[(a, b)] <= 0.0 {
                    continue;
                }
                let p = e.p(b, i as i64)?;
                if p > 0.0 {
                    g.add_edge(idx[node(a, i)], idx[node(b, (i + 1) % big_p)], 1);
                }
                if p < 1.0 {
                    g.add_edge(idx[node(a, i)], idx[node(b, (i + big_p - 1) % big_p)], -1);
                }
            }
        }
    }
    let sccs = tarjan_scc(&g);
    if sccs.len() > 1 {
        let mut classes: Vec<Vec<(usize, usize)>> =
            sccs.iter().map(|c| {
                let mut v: Vec<(usize, usize)> = c.iter().map(|n| g[*n]).collect();
                v.sort_unstable();
                v
            }).collect();
        classes.sort();
        return Ok(Irreducibility::Reducible { classes });
    }
    // Lift positions along a search tree; every edge then closes a cycle
    // whose displacement is a multiple of P.
    let mut pot: Vec<Option<i64>> = vec![None; g.node_count()];
    pot[0] = Some(0);
    let mut stack = vec![idx[0]];
    while let Some(u) = stack.pop() {
        let pu = pot[u.index()].expect("visited");
        for edge in g.edges(u) {
            use petgraph::visit::EdgeRef;
            let v = edge.target();
            if pot[v.index()].is_none() {
                pot[v.index()] = Some(pu + edge.weight());
                stack.push(v);
            }
        }
    }
    let mut d = 0usize;
    for edge in g.edge_indices() {
        let (u, v) = g.edge_endpoints(edge).expect("edge exists");
        let disp = pot[u.index()].expect("connected") + g[edge] - pot[v.index()].expect("connected");
        d = gcd(d, disp.unsigned_abs() as usize);
    }
    if d == big_p {
        Ok(Irreducibility::Irreducible)
    } else {
        Ok(Irreducibility::Reducible { classes: vec![(0..m).flat_map(|a| (0..big_p).map(move |i| (a, i))).collect()] })
    }
}
