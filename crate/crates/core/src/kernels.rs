//! Kernel evaluation, Gram-matrix assembly, and RKHS norms for functions
//! written in kernel-section coordinates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` used both as kernel input domain and as
/// density support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Argument(format!(
                "interval endpoints must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Spline kernel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineOrder {
    First,
    Second,
}

/// Kernel family plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    Gaussian { width: f64 },
    Spline { order: SplineOrder },
    Periodic { period: f64, harmonics: u32 },
}

/// A Mercer kernel on a compact interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    domain: Interval,
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.family {
            KernelFamily::Gaussian { width } => write!(f, "gaussian(width={width})")?,
            KernelFamily::Spline { order } => write!(
                f,
                "spline(order={})",
                match order {
                    SplineOrder::First => 1,
                    SplineOrder::Second => 2,
                }
            )?,
            KernelFamily::Periodic { period, harmonics } => {
                write!(f, "periodic(period={period}, harmonics={harmonics})")?
            }
        }
        write!(f, " on [{}, {}]", self.domain.lo, self.domain.hi)
    }
}

impl Kernel {
    /// Gaussian kernel `exp(-((x-a)/width)^2)`; `width = 1` recovers
    /// `exp(-(x-a)^2)`.
    pub fn gaussian(width: f64, domain: Interval) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Argument(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        Ok(Kernel {
            family: KernelFamily::Gaussian { width },
            domain,
        })
    }

    /// Spline kernel of order 1 or 2 on the domain rescaled to `[0, 1]`.
    pub fn spline(order: u8, domain: Interval) -> Result<Self> {
        let order = match order {
            1 => SplineOrder::First,
            2 => SplineOrder::Second,
            other => {
                return Err(Error::Argument(format!(
                    "spline order must be 1 or 2, got {other}"
                )))
            }
        };
        Ok(Kernel {
            family: KernelFamily::Spline { order },
            domain,
        })
    }

    /// Periodic kernel: truncated cosine expansion with `1/j^2` weights,
    /// so all eigenfunctions are bounded sines and cosines.
    pub fn periodic(period: f64, harmonics: u32, domain: Interval) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Argument(format!(
                "period must be positive, got {period}"
            )));
        }
        if harmonics == 0 {
            return Err(Error::Argument("harmonics must be >= 1".into()));
        }
        Ok(Kernel {
            family: KernelFamily::Periodic { period, harmonics },
            domain,
        })
    }

    pub fn from_family(family: KernelFamily, domain: Interval) -> Result<Self> {
        match family {
            KernelFamily::Gaussian { width } => Kernel::gaussian(width, domain),
            KernelFamily::Spline { order } => Kernel::spline(
                match order {
                    SplineOrder::First => 1,
                    SplineOrder::Second => 2,
                },
                domain,
            ),
            KernelFamily::Periodic { period, harmonics } => {
                Kernel::periodic(period, harmonics, domain)
            }
        }
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Evaluate `K(x, a)` with domain checking.
    pub fn eval(&self, x: f64, a: f64) -> Result<f64> {
        if !self.domain.contains(x) || !self.domain.contains(a) {
            return Err(Error::Domain(format!(
                "kernel input ({x}, {a}) outside [{}, {}]",
                self.domain.lo, self.domain.hi
            )));
        }
        Ok(self.eval_unchecked(x, a))
    }

    /// Evaluation without the domain check; hot paths validate inputs once
    /// and then call this.
    pub(crate) fn eval_unchecked(&self, x: f64, a: f64) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { width } => {
                let d = (x - a) / width;
                (-d * d).exp()
            }
            KernelFamily::Spline { order } => {
                let len = self.domain.length();
                let u = (x - self.domain.lo) / len;
                let v = (a - self.domain.lo) / len;
                let m = u.min(v);
                match order {
                    SplineOrder::First => m,
                    SplineOrder::Second => m * m * (3.0 * u.max(v) - m) / 6.0,
                }
            }
            KernelFamily::Periodic { period, harmonics } => {
                let theta = 2.0 * std::f64::consts::PI * (x - a) / period;
                let mut k = 1.0;
                for j in 1..=*harmonics {
                    let j = j as f64;
                    k += (j * theta).cos() / (j * j);
                }
                k
            }
        }
    }

    /// Assemble the Gram matrix of `points`; upper triangle computed,
    /// then mirrored so symmetry is exact.
    pub fn gram(&self, points: &[f64]) -> Result<GramMatrix> {
        if points.is_empty() {
            return Err(Error::Argument("gram requires a nonempty point set".into()));
        }
        for &p in points {
            if !self.domain.contains(p) {
                return Err(Error::Domain(format!(
                    "gram point {p} outside [{}, {}]",
                    self.domain.lo, self.domain.hi
                )));
            }
        }
        let n = points.len();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(points[i], points[j]);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(GramMatrix {
            points: points.to_vec(),
            entries,
            jitter: 0.0,
        })
    }
}

/// Gram matrix of a finite point set, with the jitter used when it was
/// last factorized.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    points: Vec<f64>,
    entries: DMatrix<f64>,
    jitter: f64,
}

impl GramMatrix {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared RKHS norm `c^T G c` of `f = sum_i c_i K(x_i, .)`, clamped to
    /// zero against roundoff from cancellation.
    pub fn rkhs_norm_sq(&self, coeffs: &[f64]) -> Result<f64> {
        let n = self.points.len();
        if coeffs.len() != n {
            return Err(Error::Argument(format!(
                "coefficient length {} does not match {} gram points",
                coeffs.len(),
                n
            )));
        }
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.entries[(i, j)] * coeffs[j];
            }
            quad += coeffs[i] * row;
        }
        let coeff_sq: f64 = coeffs.iter().map(|c| c * c).sum();
        let floor = -1e-12 * coeff_sq * self.entries.trace();
        if quad < floor {
            return Err(Error::Numeric(format!(
                "quadratic form {quad} below PSD floor {floor}"
            )));
        }
        Ok(quad.max(0.0))
    }

    /// Factorize `entries + (shift + jitter) I`, escalating the jitter
    /// through the ladder when needed, and record the jitter used.
    pub fn factorize(&mut self, shift: f64) -> Result<PackedFactor> {
        let factor = PackedFactor::from_entries(&self.entries, shift)?;
        self.jitter = factor.jitter;
        Ok(factor)
    }
}

/// Jitter escalation ladder: start at zero, then `1e-12 * maxdiag` growing
/// by a factor of 10 up to `1e-6 * maxdiag`. Gaussian Grams on dense point
/// sets are numerically rank-deficient, so factorization sometimes needs a
/// small positive diagonal bump.
fn jitter_ladder(maxdiag: f64) -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..=6).map(move |k| 1e-12 * 10f64.powi(k) * maxdiag))
}

/// Cholesky factor of a kernel matrix plus a diagonal shift, stored packed
/// row-major (row `i` occupies `i + 1` entries) so it can be extended by a
/// bordered row in place.
#[derive(Debug, Clone)]
pub struct PackedFactor {
    l: Vec<f64>,
    n: usize,
    pub shift: f64,
    pub jitter: f64,
}

impl PackedFactor {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Factorize `K(points) + shift I` directly from the kernel, trying the
    /// jitter ladder until a pivot-safe factorization is found.
    pub fn from_kernel(kernel: &Kernel, points: &[f64], shift: f64) -> Result<Self> {
        let n = points.len();
        let mut maxdiag: f64 = 0.0;
        for &p in points {
            maxdiag = maxdiag.max(kernel.eval_unchecked(p, p) + shift);
        }
        let mut a = vec![0.0; n * (n + 1) / 2];
        for jitter in jitter_ladder(maxdiag) {
            let mut idx = 0;
            for i in 0..n {
                for j in 0..=i {
                    a[idx] = kernel.eval_unchecked(points[i], points[j]);
                    if i == j {
                        a[idx] += shift + jitter;
                    }
                    idx += 1;
                }
            }
            if cholesky_in_place(&mut a, n) {
                return Ok(PackedFactor {
                    l: a,
                    n,
                    shift,
                    jitter,
                });
            }
        }
        Err(Error::Numeric(format!(
            "Cholesky failed for {n} points after exhausting the jitter ladder"
        )))
    }

    fn from_entries(entries: &DMatrix<f64>, shift: f64) -> Result<Self> {
        let n = entries.nrows();
        let maxdiag = (0..n)
            .map(|i| entries[(i, i)] + shift)
            .fold(0.0f64, f64::max);
        let mut a = vec![0.0; n * (n + 1) / 2];
        for jitter in jitter_ladder(maxdiag) {
            let mut idx = 0;
            for i in 0..n {
                for j in 0..=i {
                    a[idx] = entries[(i, j)];
                    if i == j {
                        a[idx] += shift + jitter;
                    }
                    idx += 1;
                }
            }
            if cholesky_in_place(&mut a, n) {
                return Ok(PackedFactor {
                    l: a,
                    n,
                    shift,
                    jitter,
                });
            }
        }
        Err(Error::Numeric(format!(
            "Cholesky failed for {n}x{n} Gram after exhausting the jitter ladder"
        )))
    }

    /// Extend the factor by one point, keeping the current shift and jitter
    /// on the new diagonal entry. Returns false when the bordered pivot is
    /// not positive, in which case the caller must refactorize.
    pub fn border(&mut self, kernel: &Kernel, points: &[f64], x_new: f64) -> bool {
        debug_assert_eq!(points.len(), self.n);
        let n = self.n;
        let mut row: Vec<f64> = points
            .iter()
            .map(|&p| kernel.eval_unchecked(p, x_new))
            .collect();
        // Forward substitution L l = k against the packed rows.
        for i in 0..n {
            let base = i * (i + 1) / 2;
            let s = row[i] - dot(&self.l[base..base + i], &row[..i]);
            row[i] = s / self.l[base + i];
        }
        let diag = kernel.eval_unchecked(x_new, x_new) + self.shift + self.jitter;
        let d2 = diag - dot(&row, &row);
        if d2 <= 0.0 {
            return false;
        }
        self.l.extend_from_slice(&row);
        self.l.push(d2.sqrt());
        self.n += 1;
        true
    }

    /// Solve `(K + (shift + jitter) I) x = rhs` via the two triangular solves.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let base = i * (i + 1) / 2;
            let s = x[i] - dot(&self.l[base..base + i], &x[..i]);
            x[i] = s / self.l[base + i];
        }
        // Backward pass runs over rows so memory access stays contiguous.
        for k in (0..n).rev() {
            let base = k * (k + 1) / 2;
            let xk = x[k] / self.l[base + k];
            x[k] = xk;
            axpy(-xk, &self.l[base..base + k], &mut x[..k]);
        }
        x
    }
}

/// Dot product with four accumulators; the unrolling keeps the FPU pipeline
/// busy despite strict FP evaluation order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let a4 = &a[4 * i..4 * i + 4];
        let b4 = &b[4 * i..4 * i + 4];
        s0 += a4[0] * b4[0];
        s1 += a4[1] * b4[1];
        s2 += a4[2] * b4[2];
        s3 += a4[3] * b4[3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

/// In-place packed Cholesky; returns false on a non-positive pivot.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for i in 0..n {
        let base_i = i * (i + 1) / 2;
        // Rows j < i end before row i begins, so the split is always clean.
        let (lower, row_i) = a.split_at_mut(base_i);
        for j in 0..i {
            let base_j = j * (j + 1) / 2;
            let s = row_i[j] - dot(&lower[base_j..base_j + j], &row_i[..j]);
            row_i[j] = s / lower[base_j + j];
        }
        let s = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if s <= 0.0 || !s.is_finite() {
            return false;
        }
        row_i[i] = s.sqrt();
    }
    true
}
