//! Dense real linear algebra for small matrices.
//!
//! Everything here targets dimensions up to roughly 16x16: the transfer
//! matrices of an `m`-regime walk are `2m x 2m` and `m` stays in single
//! digits for every model of interest. The algorithms are the textbook ones
//! (partial-pivot LU, Householder QR, one-sided Jacobi SVD, balanced
//! Hessenberg reduction followed by Francis double-shift QR) and favour
//! clarity over blocking or cache tricks.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("matrix entries must be finite".into()));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; use
    /// [`Mat::from_vec`] for fallible construction.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn column(values: &[f64]) -> Self {
        Mat { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![1.0; rows * cols] }
    }

    /// Assembles `[[a, b], [c, d]]` from four blocks with compatible shapes.
    pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Self {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let rows = a.rows + c.rows;
        let cols = a.cols + b.cols;
        let mut m = Mat::zeros(rows, cols);
        m.set_block(0, 0, a);
        m.set_block(0, a.cols, b);
        m.set_block(a.rows, 0, c);
        m.set_block(a.rows, a.cols, d);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        m
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn determinant(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension("determinant of a non-square matrix".into()));
        }
        Ok(match Lu::factor(self) {
            Ok(lu) => lu.determinant(),
            Err(_) => 0.0,
        })
    }

    pub fn inverse(&self) -> Result<Mat> {
        inverse(self)
    }

    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        solve(self, b)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// LU factorization with partial pivoting, `PA = LU`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::Dimension("LU of a non-square matrix".into()));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        let tiny = f64::EPSILON * scale * n as f64;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tiny || pivot == 0.0 {
                return Err(Error::Singular { context: format!("zero pivot in column {k}") });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu.data[i * n + j] -= f * lu.data[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn determinant(&self) -> f64 {
        (0..self.lu.rows).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.lu.rows;
        if b.rows != n {
            return Err(Error::Dimension(format!("rhs has {} rows, expected {n}", b.rows)));
        }
        let mut x = Mat::zeros(n, b.cols);
        for (i, &p) in self.perm.iter().enumerate() {
            for j in 0..b.cols {
                x[(i, j)] = b[(p, j)];
            }
        }
        for j in 0..b.cols {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }
}

pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    Lu::factor(a)?.solve(b)
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    Lu::factor(a)?.solve(&Mat::identity(a.rows))
}

/// Thin Householder QR of an `m x n` matrix with `m >= n`.
#[derive(Debug, Clone)]
pub struct Qr {
    /// `m x n` with orthonormal columns.
    pub q: Mat,
    /// `n x n` upper triangular, nonnegative diagonal.
    pub r: Mat,
    /// Set when some diagonal entry of `r` is negligible relative to the
    /// largest one.
    pub rank_deficient: bool,
}

pub fn qr(a: &Mat) -> Result<Qr> {
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return Err(Error::Dimension(format!("qr needs rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        let mut v = vec![0.0; m];
        if norm > 0.0 {
            let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
            for i in k..m {
                v[i] = r[(i, k)];
            }
            v[k] -= alpha;
            let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
            if vnorm2 > 0.0 {
                for j in k..n {
                    let dot: f64 = (k..m).map(|i| v[i] * r[(i, j)]).sum();
                    let f = 2.0 * dot / vnorm2;
                    for i in k..m {
                        r[(i, j)] -= f * v[i];
                    }
                }
            }
        }
        vs.push(v);
    }
    // Accumulate the thin Q by applying the reflectors to the first n
    // columns of the identity, last reflector first.
    let mut q = Mat::zeros(m, n);
    for i in 0..n {
        q[(i, i)] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &vs[k];
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in 0..n {
            let dot: f64 = (k..m).map(|i| v[i] * q[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                q[(i, j)] -= f * v[i];
            }
        }
    }
    let mut r_sq = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r_sq[(i, j)] = r[(i, j)];
        }
    }
    // Fix signs so that diag(R) >= 0.
    for i in 0..n {
        if r_sq[(i, i)] < 0.0 {
            for j in i..n {
                r_sq[(i, j)] = -r_sq[(i, j)];
            }
            for row in 0..m {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    let dmax = (0..n).fold(0.0_f64, |acc, i| acc.max(r_sq[(i, i)]));
    let rank_deficient = (0..n).any(|i| r_sq[(i, i)] <= 1e-12 * dmax) || dmax == 0.0;
    Ok(Qr { q, r: r_sq, rank_deficient })
}

/// Singular values, largest first, by one-sided Jacobi rotations.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let work = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (m, n) = (work.rows, work.cols);
    let mut u = work;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    let (x, y) = (u[(k, p)], u[(k, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = c * x - s * y;
                    u[(k, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> =
        (0..n).map(|j| (0..m).map(|k| u[(k, j)] * u[(k, j)]).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(a: &Mat, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Eigenvalues of a square real matrix, sorted by descending modulus, ties
/// broken by descending real part and then descending imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    pub values: Vec<Complex64>,
}

impl EigenSet {
    fn sorted(mut values: Vec<Complex64>) -> Self {
        values.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(b.re.total_cmp(&a.re))
                .then(b.im.total_cmp(&a.im))
        });
        EigenSet { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.values.iter().product()
    }
}

const HQR_MAX_ITS: usize = 60;

pub fn eigenvalues(a: &Mat) -> Result<EigenSet> {
    if !a.is_square() {
        return Err(Error::Dimension("eigenvalues of a non-square matrix".into()));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(EigenSet { values: vec![] });
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    balance(&mut h);
    hessenberg(&mut h);
    let values = hqr(&mut h)?;
    Ok(EigenSet::sorted(values))
}

fn balance(a: &mut [Vec<f64>]) {
    let n = a.len();
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transformations.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            for j in m - 1..n {
                let t = a[piv][j];
                a[piv][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i > j + 1 {
                a[i][j] = 0.0;
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len();
    let eps = f64::EPSILON;
    let mut wr = vec![Complex64::new(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nu - 1] = Complex64::new(x + z, 0.0);
                    wr[nu] = Complex64::new(x + z, 0.0);
                    if z != 0.0 {
                        wr[nu] = Complex64::new(x - w / z, 0.0);
                    }
                } else {
                    wr[nu] = Complex64::new(x + p, -z);
                    wr[nu - 1] = Complex64::new(x + p, z);
                }
                nn -= 2;
                break;
            }
            if its == HQR_MAX_ITS {
                return Err(Error::NotConverged(format!(
                    "Hessenberg QR exceeded {HQR_MAX_ITS} iterations"
                )));
            }
            if its == 10 || its == 20 || its == 40 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[i + 2][i] = 0.0;
                if i != m {
                    a[i + 2][i - 1] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k + 1 != nu {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k + 1 != nu {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Mat::from_vec(n, n, data).unwrap()
    }

    #[test]
    fn qr_of_identity_and_diagonal() {
        let f = qr(&Mat::identity(3)).unwrap();
        assert!(f.q.max_abs_diff(&Mat::identity(3)) < 1e-15);
        assert!(f.r.max_abs_diff(&Mat::identity(3)) < 1e-15);

        let f = qr(&Mat::diag(&[2.0, 3.0])).unwrap();
        assert!(f.q.max_abs_diff(&Mat::identity(2)) < 1e-15);
        assert!(f.r.max_abs_diff(&Mat::diag(&[2.0, 3.0])) < 1e-15);
        assert!(!f.rank_deficient);
    }

    #[test]
    fn qr_random_round_trip() {
        for seed in 0..20 {
            let a = random_mat(6, seed);
            let f = qr(&a).unwrap();
            let back = &f.q * &f.r;
            assert!(back.max_abs_diff(&a) <= 1e-10 * a.max_abs());
            let qtq = &f.q.transpose() * &f.q;
            assert!(qtq.max_abs_diff(&Mat::identity(6)) <= 1e-10);
            for i in 0..6 {
                assert!(f.r[(i, i)] >= 0.0);
                for j in 0..i {
                    assert_eq!(f.r[(i, j)], 0.0);
                }
            }
            // |det a| = prod diag(R)
            let det = a.determinant().unwrap().abs();
            let prod: f64 = (0..6).map(|i| f.r[(i, i)]).product();
            assert!((det - prod).abs() <= 1e-9 * det.max(1e-300));
        }
    }

    #[test]
    fn qr_flags_rank_loss() {
        let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(qr(&a).unwrap().rank_deficient);
    }

    #[test]
    fn solve_and_inverse() {
        let b = Mat::column(&[1.0, -2.0, 3.5]);
        let x = solve(&Mat::identity(3), &b).unwrap();
        assert_eq!(x, b);

        let inv = inverse(&Mat::from_rows(&[[2.0, 0.0], [0.0, 4.0]])).unwrap();
        assert!(inv.max_abs_diff(&Mat::from_rows(&[[0.5, 0.0], [0.0, 0.25]])) < 1e-16);

        for seed in 100..110 {
            let a = random_mat(7, seed);
            let inv = inverse(&a).unwrap();
            assert!((&inv * &a).max_abs_diff(&Mat::identity(7)) < 1e-9);
            let rhs = random_mat(7, seed + 1000);
            let x = solve(&a, &rhs).unwrap();
            assert!((&a * &x).max_abs_diff(&rhs) <= 1e-9 * rhs.max_abs());
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(inverse(&a), Err(Error::Singular { .. })));
        assert_eq!(a.determinant().unwrap(), 0.0);
    }

    #[test]
    fn rank_of_equal_rows_is_one() {
        let q = Mat::from_rows(&[[0.2, 0.3, 0.5], [0.2, 0.3, 0.5], [0.2, 0.3, 0.5]]);
        assert_eq!(numerical_rank(&q, 1e-9), 1);
        assert_eq!(numerical_rank(&Mat::identity(4), 1e-9), 4);
        assert_eq!(numerical_rank(&Mat::zeros(2, 3), 1e-9), 0);
        let wide = Mat::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]);
        assert_eq!(numerical_rank(&wide, 1e-9), 2);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let sv = singular_values(&Mat::diag(&[3.0, -5.0, 1.0]));
        assert!((sv[0] - 5.0).abs() < 1e-14);
        assert!((sv[1] - 3.0).abs() < 1e-14);
        assert!((sv[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_diagonal_and_companion() {
        let e = eigenvalues(&Mat::diag(&[0.5, -3.0, 2.0])).unwrap();
        let re: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        assert_eq!(re.len(), 3);
        assert!((re[0] + 3.0).abs() < 1e-14);
        assert!((re[1] - 2.0).abs() < 1e-14);
        assert!((re[2] - 0.5).abs() < 1e-14);

        // (x-2)(x-3) = x^2 - 5x + 6
        let c = Mat::from_rows(&[[5.0, -6.0], [1.0, 0.0]]);
        let e = eigenvalues(&c).unwrap();
        assert!((e.values[0].re - 3.0).abs() < 1e-12);
        assert!((e.values[1].re - 2.0).abs() < 1e-12);
        assert!(e.values.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn eigenvalues_complex_pair() {
        // rotation by 90 degrees scaled by 2
        let a = Mat::from_rows(&[[0.0, -2.0], [2.0, 0.0]]);
        let e = eigenvalues(&a).unwrap();
        assert!((e.values[0] - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        assert!((e.values[1] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_trace_and_determinant() {
        for seed in 0..30 {
            let n = 2 + (seed as usize % 9);
            let a = random_mat(n, 7000 + seed);
            let e = eigenvalues(&a).unwrap();
            assert_eq!(e.len(), n);
            let tr = a.trace();
            let det = a.determinant().unwrap();
            let scale = a.max_abs() * n as f64;
            assert!((e.sum().re - tr).abs() <= 1e-8 * scale.max(tr.abs()));
            assert!(e.sum().im.abs() <= 1e-8 * scale);
            let prod = e.product();
            assert!((prod.re - det).abs() <= 1e-8 * det.abs().max(1e-3), "seed {seed}");
            // conjugate pairs appear together
            for z in &e.values {
                if z.im != 0.0 {
                    assert!(e.values.iter().any(|w| (w - z.conj()).norm() < 1e-9));
                }
            }
        }
    }

    #[test]
    fn eigenvalues_jordan_block() {
        let a = Mat::from_rows(&[[2.0, -1.0], [1.0, 0.0]]);
        let e = eigenvalues(&a).unwrap();
        for z in &e.values {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-7);
        }
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Mat::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn random_inverse_is_two_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let n = rng.gen_range(2..10);
            let mut a = random_mat(n, rng.gen());
            for i in 0..n {
                a[(i, i)] += 3.0;
            }
            let inv = a.inverse().unwrap();
            assert!((&a * &inv).max_abs_diff(&Mat::identity(n)) < 1e-9);
        }
    }
}
