//! Regularized least squares in the RKHS: batch fitting, streaming
//! extension, the regularization schedule, and sup-norm evaluation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel, PackedFactor};
use crate::operator::GridFunction;

/// Relative diagonal-shift drift tolerated before the streaming path
/// refactorizes.
pub const STALE_SHIFT_TOLERANCE: f64 = 1e-3;

/// Input/output pairs `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::Argument(format!(
                "{} inputs vs {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        Ok(Dataset { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// First `t` samples as a borrowed view.
    pub fn prefix(&self, t: usize) -> Result<(&[f64], &[f64])> {
        if t == 0 || t > self.len() {
            return Err(Error::Argument(format!(
                "prefix length {t} outside 1..={}",
                self.len()
            )));
        }
        Ok((&self.inputs[..t], &self.outputs[..t]))
    }
}

/// Regularization schedule `gamma(t) = gamma0 * t^{-alpha}` with
/// `0 < alpha < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSchedule {
    gamma0: f64,
    alpha: f64,
}

impl GammaSchedule {
    pub fn new(gamma0: f64, alpha: f64) -> Result<Self> {
        if !(gamma0 > 0.0) || !gamma0.is_finite() {
            return Err(Error::Argument(format!(
                "gamma0 must be positive, got {gamma0}"
            )));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Argument(format!(
                "alpha must lie strictly inside (0, 1/2), got {alpha}"
            )));
        }
        Ok(GammaSchedule { gamma0, alpha })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma_at(&self, t: usize) -> f64 {
        self.gamma0 * (t as f64).powf(-self.alpha)
    }
}

/// The fitted estimator: support inputs, representer coefficients, the
/// regularization in force, and the Cholesky factor retained for streaming.
#[derive(Debug, Clone)]
pub struct KrrModel {
    kernel: Kernel,
    support: Vec<f64>,
    outputs: Vec<f64>,
    coeffs: Vec<f64>,
    gamma: f64,
    factor: PackedFactor,
    /// Relative distance between `t * gamma` and the shift actually inside
    /// the factor; zero after `fit` or `refresh`.
    stale_drift: f64,
}

impl KrrModel {
    /// Model with no observations; `extend` on it equals a one-sample fit.
    pub fn empty(kernel: Kernel) -> Self {
        let factor = PackedFactor::from_kernel(&kernel, &[], 1.0).expect("empty factorization");
        KrrModel {
            kernel,
            support: Vec::new(),
            outputs: Vec::new(),
            coeffs: Vec::new(),
            gamma: 1.0,
            factor,
            stale_drift: 0.0,
        }
    }

    /// Solve the representer system `(G + t gamma I) c = y` by Cholesky with
    /// the jitter ladder, then iteratively refine until the normal-equation
    /// residual is at most `1e-10 ||y||`.
    pub fn fit(data: &Dataset, kernel: &Kernel, gamma: f64) -> Result<KrrModel> {
        Self::fit_slices(data.inputs(), data.outputs(), kernel, gamma)
    }

    pub(crate) fn fit_slices(
        inputs: &[f64],
        outputs: &[f64],
        kernel: &Kernel,
        gamma: f64,
    ) -> Result<KrrModel> {
        if inputs.is_empty() {
            return Err(Error::Argument("fit requires at least one sample".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Argument(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        let domain = kernel.domain();
        for &x in inputs {
            if !domain.contains(x) {
                return Err(Error::Domain(format!(
                    "input {x} outside kernel domain [{}, {}]",
                    domain.lo, domain.hi
                )));
            }
        }
        let shift = inputs.len() as f64 * gamma;
        let factor = PackedFactor::from_kernel(kernel, inputs, shift)?;
        let coeffs = solve_refined(kernel, inputs, outputs, shift, &factor)?;
        Ok(KrrModel {
            kernel: kernel.clone(),
            support: inputs.to_vec(),
            outputs: outputs.to_vec(),
            coeffs,
            gamma,
            factor,
            stale_drift: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Relative shift staleness accumulated by the streaming path since the
    /// last exact factorization.
    pub fn stale_drift(&self) -> f64 {
        self.stale_drift
    }

    /// `mu_hat(x) = sum_i c_i K(x_i, x)`.
    pub fn predict(&self, x: f64) -> Result<f64> {
        if !self.kernel.domain().contains(x) {
            return Err(Error::Domain(format!(
                "prediction point {x} outside kernel domain"
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: f64) -> f64 {
        self.support
            .iter()
            .zip(self.coeffs.iter())
            .map(|(&xi, &ci)| ci * self.kernel.eval_unchecked(xi, x))
            .sum()
    }

    /// Append one observation under the new regularization, with the
    /// default stale-shift tolerance.
    pub fn extend(self, x_new: f64, y_new: f64, gamma_new: f64) -> Result<KrrModel> {
        self.extend_with_tolerance(x_new, y_new, gamma_new, STALE_SHIFT_TOLERANCE)
    }

    /// Append one observation. When the new diagonal shift
    /// `(t+1) * gamma_new` is within `stale_tol` (relative) of the shift
    /// held by the factor, the factor is extended by one bordered row and
    /// the stale shift is kept, recording the drift; otherwise the system
    /// is refactorized at the exact shift.
    pub fn extend_with_tolerance(
        mut self,
        x_new: f64,
        y_new: f64,
        gamma_new: f64,
        stale_tol: f64,
    ) -> Result<KrrModel> {
        if !(gamma_new > 0.0) || !gamma_new.is_finite() {
            return Err(Error::Argument(format!(
                "gamma must be positive, got {gamma_new}"
            )));
        }
        if !self.kernel.domain().contains(x_new) {
            return Err(Error::Domain(format!(
                "input {x_new} outside kernel domain"
            )));
        }
        let t_new = self.support.len() + 1;
        let shift_target = t_new as f64 * gamma_new;
        if self.support.is_empty() {
            self.support.push(x_new);
            self.outputs.push(y_new);
            let factor = PackedFactor::from_kernel(&self.kernel, &self.support, shift_target)?;
            let coeffs = solve_refined(
                &self.kernel,
                &self.support,
                &self.outputs,
                shift_target,
                &factor,
            )?;
            return Ok(KrrModel {
                coeffs,
                gamma: gamma_new,
                factor,
                stale_drift: 0.0,
                ..self
            });
        }

        let drift = (shift_target - self.factor.shift).abs() / shift_target;
        if drift <= stale_tol && self.factor.border(&self.kernel, &self.support, x_new) {
            self.support.push(x_new);
            self.outputs.push(y_new);
            self.coeffs = self.factor.solve(&self.outputs);
            self.gamma = gamma_new;
            self.stale_drift = drift;
            Ok(self)
        } else {
            self.support.push(x_new);
            self.outputs.push(y_new);
            let factor = PackedFactor::from_kernel(&self.kernel, &self.support, shift_target)?;
            let coeffs = solve_refined(
                &self.kernel,
                &self.support,
                &self.outputs,
                shift_target,
                &factor,
            )?;
            Ok(KrrModel {
                coeffs,
                gamma: gamma_new,
                factor,
                stale_drift: 0.0,
                ..self
            })
        }
    }

    /// Refactorize at exactly `t * gamma` on the current data, discarding
    /// any stale-shift approximation.
    pub fn refresh(self, gamma: f64) -> Result<KrrModel> {
        KrrModel::fit_slices(&self.support, &self.outputs, &self.kernel, gamma)
    }

    /// Max over grid nodes of `|mu_hat - mu|`.
    pub fn sup_error(&self, mu: &GridFunction) -> f64 {
        mu.grid()
            .nodes()
            .iter()
            .zip(mu.values().iter())
            .map(|(&x, &m)| (self.predict_unchecked(x) - m).abs())
            .fold(0.0f64, f64::max)
    }

    /// Sup error over grid nodes that fall inside `region`.
    pub fn sup_error_within(&self, mu: &GridFunction, region: Interval) -> f64 {
        mu.grid()
            .nodes()
            .iter()
            .zip(mu.values().iter())
            .filter(|(&x, _)| region.contains(x))
            .map(|(&x, &m)| (self.predict_unchecked(x) - m).abs())
            .fold(0.0f64, f64::max)
    }

    /// `c^T G c` for the fitted coefficients.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let n = self.support.len();
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.kernel.eval_unchecked(self.support[i], self.support[j])
                    * self.coeffs[j];
            }
            quad += self.coeffs[i] * row;
        }
        quad.max(0.0)
    }

    /// Norm-equation residual `||(G + t gamma I) c - y||` relative to `||y||`.
    pub fn relative_residual(&self) -> f64 {
        let shift = self.support.len() as f64 * self.gamma;
        let r = residual(
            &self.kernel,
            &self.support,
            &self.outputs,
            shift,
            &self.coeffs,
        );
        let ynorm = norm2(&self.outputs);
        if ynorm == 0.0 {
            norm2(&r)
        } else {
            norm2(&r) / ynorm
        }
    }

    /// CSV export: a header line carrying gamma, t and the kernel spec,
    /// then `(support point, coefficient)` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# gamma={:.16e} t={} kernel=\"{}\"",
            self.gamma,
            self.support.len(),
            self.kernel
        )?;
        writeln!(w, "support,coefficient")?;
        for (x, c) in self.support.iter().zip(self.coeffs.iter()) {
            writeln!(w, "{:.16e},{:.16e}", x, c)?;
        }
        Ok(())
    }
}

/// Empirical mean-square residual plus `gamma * c^T G c`.
pub fn objective(data: &Dataset, kernel: &Kernel, gamma: f64, coeffs: &[f64]) -> Result<f64> {
    let t = data.len();
    if coeffs.len() != t {
        return Err(Error::Argument(format!(
            "{} coefficients for {} samples",
            coeffs.len(),
            t
        )));
    }
    if t == 0 {
        return Err(Error::Argument("objective needs at least one sample".into()));
    }
    let xs = data.inputs();
    let ys = data.outputs();
    let mut misfit = 0.0;
    let mut quad = 0.0;
    for i in 0..t {
        let mut fx = 0.0;
        for j in 0..t {
            fx += coeffs[j] * kernel.eval_unchecked(xs[j], xs[i]);
        }
        let r = ys[i] - fx;
        misfit += r * r;
        quad += coeffs[i] * fx;
    }
    Ok(misfit / t as f64 + gamma * quad)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(kernel: &Kernel, xs: &[f64], ys: &[f64], shift: f64, coeffs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let mut gc = 0.0;
        for j in 0..n {
            gc += kernel.eval_unchecked(xs[i], xs[j]) * coeffs[j];
        }
        r.push(ys[i] - gc - shift * coeffs[i]);
    }
    r
}

/// Solve `(G + shift I) c = y` with the given factor (which may carry a
/// jitter), refining against the unjittered system until the residual meets
/// the `1e-10 ||y||` contract.
fn solve_refined(
    kernel: &Kernel,
    xs: &[f64],
    ys: &[f64],
    shift: f64,
    factor: &PackedFactor,
) -> Result<Vec<f64>> {
    let ynorm = norm2(ys);
    let mut coeffs = factor.solve(ys);
    if ynorm == 0.0 {
        return Ok(coeffs);
    }
    for _ in 0..6 {
        let r = residual(kernel, xs, ys, shift, &coeffs);
        if norm2(&r) <= 1e-10 * ynorm {
            return Ok(coeffs);
        }
        let delta = factor.solve(&r);
        for (c, d) in coeffs.iter_mut().zip(delta.iter()) {
            *c += d;
        }
    }
    let r = residual(kernel, xs, ys, shift, &coeffs);
    if norm2(&r) <= 1e-10 * ynorm {
        Ok(coeffs)
    } else {
        Err(Error::Numeric(format!(
            "normal-equation residual {:.3e} above 1e-10 * ||y|| after refinement",
            norm2(&r)
        )))
    }
}
