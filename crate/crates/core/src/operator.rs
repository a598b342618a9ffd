//! Composite-Simpson quadrature, kernel integral operators, the experiment's
//! regression function, smoothness norms, and the data-free limit function.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::densities::{Density, SamplingSchedule};
use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};

/// Equally spaced composite-Simpson rule over an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    span: Interval,
}

impl QuadratureGrid {
    /// Composite Simpson with `count` nodes (odd, at least 3).
    pub fn simpson(span: Interval, count: usize) -> Result<Arc<Self>> {
        if count < 3 || count % 2 == 0 {
            return Err(Error::Argument(format!(
                "Simpson grid needs an odd node count >= 3, got {count}"
            )));
        }
        let h = span.length() / (count - 1) as f64;
        // Lerp form keeps round endpoints (and breakpoints like 2.0 on the
        // canonical grid) exactly representable.
        let n1 = (count - 1) as f64;
        let nodes: Vec<f64> = (0..count)
            .map(|i| (span.lo * (n1 - i as f64) + span.hi * i as f64) / n1)
            .collect();
        let weights: Vec<f64> = (0..count)
            .map(|i| {
                let c = if i == 0 || i == count - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Ok(Arc::new(QuadratureGrid {
            nodes,
            weights,
            span,
        }))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn count(&self) -> usize {
        self.nodes.len()
    }

    pub fn span(&self) -> Interval {
        self.span
    }

    pub fn spacing(&self) -> f64 {
        self.span.length() / (self.count() - 1) as f64
    }
}

/// A function sampled on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::Argument(format!(
                "{} values for a {}-node grid",
                values.len(),
                grid.count()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: &Arc<QuadratureGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn zero(grid: &Arc<QuadratureGrid>) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.count()],
        }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise difference; grids must match.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn sup_diff(&self, other: &GridFunction) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.count() != other.grid.count() || self.grid.span() != other.grid.span() {
            return Err(Error::Argument("grid functions on different grids".into()));
        }
        Ok(())
    }

    /// Two-column CSV `(node, value)` with a header row and round-trip
    /// precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,value")?;
        for (x, v) in self.grid.nodes().iter().zip(self.values.iter()) {
            writeln!(w, "{:.16e},{:.16e}", x, v)?;
        }
        Ok(())
    }
}

/// Composite-Simpson estimate of the integral of `f` over its grid; exact
/// for cubics on each panel.
pub fn integrate(f: &GridFunction) -> f64 {
    f.grid
        .weights()
        .iter()
        .zip(f.values.iter())
        .map(|(w, v)| w * v)
        .sum()
}

/// Composite Simpson over `[lo, hi]` with node spacing at most
/// `max_spacing`.
fn simpson_segment(lo: f64, hi: f64, max_spacing: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let len = hi - lo;
    if len <= 0.0 {
        return 0.0;
    }
    let panels = ((len / (2.0 * max_spacing)).ceil() as usize).max(1);
    let h = len / (2 * panels) as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..2 * panels {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += c * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Piecewise-constant function with value zero off its listed pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pieces: Vec<(Interval, f64)>,
}

impl StepFunction {
    /// Pieces are sorted by left endpoint; their interiors must not overlap.
    pub fn new(mut pieces: Vec<(Interval, f64)>) -> Result<Self> {
        if pieces.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Argument("step values must be finite".into()));
        }
        pieces.sort_by(|a, b| a.0.lo.partial_cmp(&b.0.lo).unwrap());
        for w in pieces.windows(2) {
            if w[1].0.lo < w[0].0.hi {
                return Err(Error::Argument(format!(
                    "step pieces [{},{}] and [{},{}] overlap",
                    w[0].0.lo, w[0].0.hi, w[1].0.lo, w[1].0.hi
                )));
            }
        }
        Ok(StepFunction { pieces })
    }

    pub fn pieces(&self) -> &[(Interval, f64)] {
        &self.pieces
    }

    /// Value at `x`: the value of the piece whose closed interval contains
    /// it, zero elsewhere.
    pub fn eval(&self, x: f64) -> f64 {
        for (iv, v) in &self.pieces {
            if iv.contains(x) {
                return *v;
            }
        }
        0.0
    }

    fn left_limit(&self, x: f64) -> f64 {
        for (iv, v) in &self.pieces {
            if x > iv.lo && x <= iv.hi {
                return *v;
            }
        }
        0.0
    }

    fn right_limit(&self, x: f64) -> f64 {
        for (iv, v) in &self.pieces {
            if x >= iv.lo && x < iv.hi {
                return *v;
            }
        }
        0.0
    }

    /// Value to assign at a quadrature node over `span`: the mean of the
    /// one-sided limits at interior nodes (which cancels the leading
    /// quadrature error when a jump sits on a Simpson panel boundary), and
    /// the inward one-sided limit at the span endpoints.
    pub fn grid_value(&self, x: f64, span: Interval) -> f64 {
        if x <= span.lo {
            self.right_limit(x)
        } else if x >= span.hi {
            self.left_limit(x)
        } else {
            0.5 * (self.left_limit(x) + self.right_limit(x))
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut bs = Vec::with_capacity(2 * self.pieces.len());
        for (iv, _) in &self.pieces {
            bs.push(iv.lo);
            bs.push(iv.hi);
        }
        bs
    }
}

/// Pointwise value of the regression function `mu(x) = int K(x, a) h(a) da`,
/// integrating piece by piece so the quadrature never straddles a jump.
pub fn regression_value(kernel: &Kernel, h: &StepFunction, x: f64, max_spacing: f64) -> f64 {
    h.pieces()
        .iter()
        .map(|(iv, v)| v * simpson_segment(iv.lo, iv.hi, max_spacing, |a| kernel.eval_unchecked(x, a)))
        .sum()
}

/// The regression function on the whole grid.
pub fn build_regression_function(
    kernel: &Kernel,
    h: &StepFunction,
    grid: &Arc<QuadratureGrid>,
) -> Result<GridFunction> {
    let domain = kernel.domain();
    let span = grid.span();
    if span.lo < domain.lo || span.hi > domain.hi {
        return Err(Error::Domain(
            "quadrature grid exceeds the kernel domain".into(),
        ));
    }
    let spacing = grid.spacing();
    Ok(GridFunction::from_fn(grid, |x| {
        regression_value(kernel, h, x, spacing)
    }))
}

/// Apply the kernel integral operator with respect to `density`:
/// `(L_p f)(x) = int K(x, a) f(a) p(a) da`, evaluated by grid quadrature at
/// each node.
pub fn apply_operator(kernel: &Kernel, density: &Density, f: &GridFunction) -> Result<GridFunction> {
    let grid = f.grid();
    check_support(grid, density)?;
    let nodes = grid.nodes();
    let weighted: Vec<f64> = nodes
        .iter()
        .zip(grid.weights().iter().zip(f.values().iter()))
        .map(|(&x, (&w, &v))| w * v * density.pdf(x))
        .collect();
    let values: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            nodes
                .iter()
                .zip(weighted.iter())
                .map(|(&a, &q)| kernel.eval_unchecked(x, a) * q)
                .sum()
        })
        .collect();
    GridFunction::new(Arc::clone(grid), values)
}

/// Norm in the Lebesgue space weighted by `density`:
/// `sqrt(int f^2(a) p(a) da)`.
pub fn weighted_norm(f: &GridFunction, density: &Density) -> Result<f64> {
    check_support(f.grid(), density)?;
    let sq: f64 = f
        .grid()
        .nodes()
        .iter()
        .zip(f.grid().weights().iter().zip(f.values().iter()))
        .map(|(&x, (&w, &v))| w * v * v * density.pdf(x))
        .sum();
    Ok(sq.max(0.0).sqrt())
}

/// Smoothness norm for r = 1: `sqrt(int h^2 / p)`, computed with quadrature
/// split at the step function's breakpoints.
pub fn smoothness_norm_r1(
    h: &StepFunction,
    density: &Density,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let spacing = grid.spacing();
    let mut total = 0.0;
    for (iv, v) in h.pieces() {
        if *v == 0.0 {
            continue;
        }
        let mut singular = false;
        let piece = simpson_segment(iv.lo, iv.hi, spacing, |x| {
            let p = density.pdf(x);
            if p <= 0.0 {
                singular = true;
                return 0.0;
            }
            v * v / p
        });
        if singular {
            return Err(Error::Singularity(format!(
                "density vanishes on the step support [{}, {}]",
                iv.lo, iv.hi
            )));
        }
        total += piece;
    }
    Ok(total.sqrt())
}

/// Result of the spectral smoothness norm: the value on the numerically
/// resolvable subspace, plus how much of the target's spectral mass fell
/// below the eigenvalue floor.
#[derive(Debug, Clone, Copy)]
pub struct SpectralNorm {
    pub value: f64,
    pub excluded_mass: f64,
    /// Set when more than 1% of the spectral mass was excluded.
    pub ill_posed: bool,
}

/// Symmetrized Nystrom discretization of `L_p` on the grid:
/// `S[i][j] = sqrt(p_i w_i) K(x_i, x_j) sqrt(p_j w_j)`.
fn symmetrized_operator(
    kernel: &Kernel,
    density: &Density,
    grid: &QuadratureGrid,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut d = Vec::with_capacity(n);
    for (&x, &w) in nodes.iter().zip(grid.weights().iter()) {
        let p = density.pdf(x);
        if p <= 0.0 {
            return Err(Error::Singularity(format!(
                "density vanishes at grid node {x}; the discretized operator needs p > 0"
            )));
        }
        d.push((p * w).sqrt());
    }
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = d[i] * kernel.eval_unchecked(nodes[i], nodes[j]) * d[j];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok((s, d))
}

/// Smoothness norm `|| L_p^{-r} mu ||_p` for r in (1/2, 1], computed through
/// the eigendecomposition of the symmetrized discretization. Components with
/// eigenvalues below `1e-10 * lambda_max` are excluded and reported in the
/// result.
pub fn smoothness_norm_general(
    mu: &GridFunction,
    density: &Density,
    kernel: &Kernel,
    r: f64,
) -> Result<SpectralNorm> {
    if !(r > 0.5 && r <= 1.0) {
        return Err(Error::Argument(format!(
            "smoothness exponent r must lie in (1/2, 1], got {r}"
        )));
    }
    let (s, d) = symmetrized_operator(kernel, density, mu.grid())?;
    let eig = s.symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::Numeric("operator discretization has no positive eigenvalues".into()));
    }
    let floor = 1e-10 * lambda_max;
    let u = DVector::from_iterator(
        d.len(),
        d.iter().zip(mu.values().iter()).map(|(&di, &mi)| di * mi),
    );
    let z = eig.eigenvectors.transpose() * u;
    let mut kept = 0.0;
    let mut excluded = 0.0;
    let mut value_sq = 0.0;
    for (zj, &lj) in z.iter().zip(eig.eigenvalues.iter()) {
        let mass = zj * zj;
        if lj >= floor {
            kept += mass;
            value_sq += mass * lj.powf(-2.0 * r);
        } else {
            excluded += mass;
        }
    }
    let total = kept + excluded;
    let excluded_mass = if total > 0.0 { excluded / total } else { 0.0 };
    Ok(SpectralNorm {
        value: value_sq.sqrt(),
        excluded_mass,
        ill_posed: excluded_mass > 0.01,
    })
}

/// Data-free limit `(L_t + gamma I)^{-1} L_t mu` under the schedule's
/// average density at time `t`, solved on the grid through the symmetrized
/// discretization.
pub fn data_free_limit(
    mu: &GridFunction,
    schedule: &SamplingSchedule,
    t: usize,
    gamma: f64,
    kernel: &Kernel,
) -> Result<GridFunction> {
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!(
            "regularization gamma must be positive, got {gamma}"
        )));
    }
    let avg = schedule.average_density(t)?;
    let (mut s, d) = symmetrized_operator(kernel, &avg, mu.grid())?;
    let u = DVector::from_iterator(
        d.len(),
        d.iter().zip(mu.values().iter()).map(|(&di, &mi)| di * mi),
    );
    let rhs = &s * &u;
    for i in 0..s.nrows() {
        s[(i, i)] += gamma;
    }
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numeric("shifted operator system is not positive definite".into()))?;
    let w = chol.solve(&rhs);
    let values: Vec<f64> = w.iter().zip(d.iter()).map(|(&wi, &di)| wi / di).collect();
    GridFunction::new(Arc::clone(mu.grid()), values)
}

fn check_support(grid: &QuadratureGrid, density: &Density) -> Result<()> {
    let s = density.support();
    let g = grid.span();
    if g.lo < s.lo - 1e-12 || g.hi > s.hi + 1e-12 {
        return Err(Error::Argument(format!(
            "grid [{}, {}] not contained in density support [{}, {}]",
            g.lo, g.hi, s.lo, s.hi
        )));
    }
    Ok(())
}

/// The numerical experiment's step function: 1 on [0,2], 0.3 on [8,10],
/// zero elsewhere.
pub fn canonical_step(support: Interval) -> Result<StepFunction> {
    StepFunction::new(vec![
        (Interval::new(support.lo, support.lo + 2.0)?, 1.0),
        (Interval::new(support.hi - 2.0, support.hi)?, 0.3),
    ])
}
