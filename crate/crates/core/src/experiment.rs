//! Scenario assembly, data generation, the experiment reproduction,
//! covariance-summability diagnostics, smoothness traces, and empirical
//! convergence-rate estimation.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::densities::{sample, split_seed, SamplerMode, SamplerState, SamplingSchedule};
use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};
use crate::krr::{Dataset, GammaSchedule, KrrModel};
use crate::operator::{
    build_regression_function, regression_value, smoothness_norm_r1, weighted_norm,
    data_free_limit, GridFunction, QuadratureGrid, StepFunction,
};
use crate::special::normal_quantile;

/// Fraction of the domain (from the right edge) over which the
/// right-region sup error is reported alongside the full sup error.
const RIGHT_REGION_FRACTION: f64 = 0.4;

/// Noise draws use a stream index disjoint from the input-location draws.
const NOISE_STREAM_BASE: u64 = 1 << 63;

/// A fully specified experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kernel: Kernel,
    pub h: StepFunction,
    pub schedule: SamplingSchedule,
    pub noise_var: f64,
    pub gamma: GammaSchedule,
    pub grid: Arc<QuadratureGrid>,
    pub checkpoints: Vec<usize>,
    pub master_seed: u64,
    pub replicates: usize,
    pub sampler: SamplerMode,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.noise_var < 0.0 {
            return Err(Error::Argument(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_var
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Argument("replicates must be >= 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Argument("at least one checkpoint required".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("checkpoints must be strictly increasing".into()));
        }
        let total = self.schedule.total();
        if *self.checkpoints.last().unwrap() > total || self.checkpoints[0] == 0 {
            return Err(Error::Argument(format!(
                "checkpoints must lie in 1..={total}"
            )));
        }
        if self.schedule.support() != self.kernel.domain() {
            return Err(Error::Argument(
                "schedule support must equal the kernel domain".into(),
            ));
        }
        if self.grid.span() != self.kernel.domain() {
            return Err(Error::Argument(
                "quadrature grid must span the kernel domain".into(),
            ));
        }
        Ok(())
    }

    /// The right-region interval used for the secondary sup-error column.
    pub fn right_region(&self) -> Interval {
        let d = self.kernel.domain();
        Interval::new(d.hi - RIGHT_REGION_FRACTION * d.length(), d.hi)
            .expect("right region of a valid domain")
    }
}

/// Data-free quantities evaluated once per checkpoint: the regularization
/// in force, the squared smoothness norm under the average density, and the
/// weighted distance between the data-free limit and the target.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointSummary {
    pub t: usize,
    pub gamma: f64,
    pub smoothness_sq: f64,
    pub data_free_distance: f64,
}

/// One (checkpoint, replicate) observation.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub replicate: usize,
    pub seed: u64,
    pub t: usize,
    pub gamma: f64,
    pub sup_error: f64,
    pub sup_error_right: f64,
}

/// Mean/stddev of the observation series at one checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointAggregate {
    pub t: usize,
    pub mean_sup_error: f64,
    pub std_sup_error: f64,
    pub mean_sup_error_right: f64,
    pub std_sup_error_right: f64,
}

/// Everything `run_scenario` produces. Wall times are kept for the console
/// summary but never serialized, so repeated runs stay byte-identical.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub checkpoints: Vec<CheckpointSummary>,
    pub observations: Vec<Observation>,
    pub aggregates: Vec<CheckpointAggregate>,
    pub replicate_seeds: Vec<u64>,
    /// Estimates from the first replicate at each checkpoint, for export.
    pub estimates: Vec<GridFunction>,
    pub wall_seconds: Vec<f64>,
}

/// Draw the full dataset for one replicate: inputs from the schedule's
/// phase densities, outputs as the regression function plus independent
/// Gaussian noise. Fully deterministic given the seed.
pub fn generate_data(scenario: &Scenario, seed: u64) -> Result<Dataset> {
    scenario.validate()?;
    let total = scenario.schedule.total();
    let spacing = scenario.grid.spacing();
    let sigma = scenario.noise_var.sqrt();
    let mut state = match scenario.sampler {
        SamplerMode::Independent => SamplerState::independent(seed),
        SamplerMode::Metropolis { step_scale } => SamplerState::metropolis(seed, step_scale),
    };
    let mut inputs = Vec::with_capacity(total);
    let mut outputs = Vec::with_capacity(total);
    for i in 1..=total {
        let density = scenario.schedule.density_at(i)?;
        let (x, next) = sample(density, state);
        state = next;
        let mean = regression_value(&scenario.kernel, &scenario.h, x, spacing);
        let noise = if sigma > 0.0 {
            sigma * normal_quantile(noise_uniform(seed, i as u64))
        } else {
            0.0
        };
        inputs.push(x);
        outputs.push(mean + noise);
    }
    Dataset::new(inputs, outputs)
}

fn noise_uniform(seed: u64, index: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut z = seed ^ (NOISE_STREAM_BASE | index).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(z ^ (z >> 31));
    rng.random::<f64>().clamp(1e-16, 1.0 - 1e-16)
}

/// Stream one replicate through the estimator and record errors at each
/// checkpoint. Between checkpoints the factor is extended with its stale
/// shift; at a checkpoint the model is refactorized at exactly
/// `gamma(t) * t` before being evaluated.
fn stream_replicate(
    scenario: &Scenario,
    replicate: usize,
    seed: u64,
    mu: &GridFunction,
) -> Result<(Vec<Observation>, Vec<GridFunction>, f64)> {
    let start = Instant::now();
    let data = generate_data(scenario, seed)?;
    let t_max = *scenario.checkpoints.last().unwrap();
    let right = scenario.right_region();
    let mut model = KrrModel::empty(scenario.kernel.clone());
    let mut observations = Vec::with_capacity(scenario.checkpoints.len());
    let mut estimates = Vec::new();
    for i in 1..=t_max {
        let gamma_i = scenario.gamma.gamma_at(i);
        model = model.extend_with_tolerance(
            data.inputs()[i - 1],
            data.outputs()[i - 1],
            gamma_i,
            f64::INFINITY,
        )?;
        if scenario.checkpoints.contains(&i) {
            model = model.refresh(gamma_i)?;
            observations.push(Observation {
                replicate,
                seed,
                t: i,
                gamma: gamma_i,
                sup_error: model.sup_error(mu),
                sup_error_right: model.sup_error_within(mu, right),
            });
            if replicate == 0 {
                estimates.push(GridFunction::from_fn(&scenario.grid, |x| {
                    model.predict(x).unwrap_or(f64::NAN)
                }));
            }
        }
    }
    Ok((observations, estimates, start.elapsed().as_secs_f64()))
}

/// Run the full experiment: data-free checkpoint quantities once, then all
/// replicates (in parallel when a rayon pool is installed), then aggregates.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    scenario.validate()?;
    let mu = build_regression_function(&scenario.kernel, &scenario.h, &scenario.grid)?;

    let mut checkpoints = Vec::with_capacity(scenario.checkpoints.len());
    for &t in &scenario.checkpoints {
        let gamma = scenario.gamma.gamma_at(t);
        let avg = scenario.schedule.average_density(t)?;
        let smoothness = smoothness_norm_r1(&scenario.h, &avg, &scenario.grid)?;
        let bar = data_free_limit(&mu, &scenario.schedule, t, gamma, &scenario.kernel)?;
        let distance = weighted_norm(&bar.sub(&mu)?, &avg)?;
        checkpoints.push(CheckpointSummary {
            t,
            gamma,
            smoothness_sq: smoothness * smoothness,
            data_free_distance: distance,
        });
    }

    let replicate_seeds: Vec<u64> = (0..scenario.replicates)
        .map(|k| split_seed(scenario.master_seed, k as u64))
        .collect();

    let mut per_replicate: Vec<(usize, (Vec<Observation>, Vec<GridFunction>, f64))> =
        replicate_seeds
            .par_iter()
            .enumerate()
            .map(|(k, &seed)| stream_replicate(scenario, k, seed, &mu).map(|r| (k, r)))
            .collect::<Result<Vec<_>>>()?;
    per_replicate.sort_by_key(|(k, _)| *k);

    let mut observations = Vec::new();
    let mut estimates = Vec::new();
    let mut wall_seconds = Vec::with_capacity(scenario.replicates);
    for (k, (obs, est, wall)) in per_replicate {
        observations.extend(obs);
        if k == 0 {
            estimates = est;
        }
        wall_seconds.push(wall);
    }

    let aggregates = scenario
        .checkpoints
        .iter()
        .map(|&t| {
            let errs: Vec<f64> = observations
                .iter()
                .filter(|o| o.t == t)
                .map(|o| o.sup_error)
                .collect();
            let rights: Vec<f64> = observations
                .iter()
                .filter(|o| o.t == t)
                .map(|o| o.sup_error_right)
                .collect();
            let (mean_sup_error, std_sup_error) = mean_std(&errs);
            let (mean_sup_error_right, std_sup_error_right) = mean_std(&rights);
            CheckpointAggregate {
                t,
                mean_sup_error,
                std_sup_error,
                mean_sup_error_right,
                std_sup_error_right,
            }
        })
        .collect();

    Ok(RunReport {
        checkpoints,
        observations,
        aggregates,
        replicate_seeds,
        estimates,
        wall_seconds,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Squared smoothness norms `int h^2 / p_bar_t` along a list of times.
pub fn smoothness_trace(scenario: &Scenario, ts: &[usize]) -> Result<Vec<(usize, f64)>> {
    scenario.validate()?;
    ts.iter()
        .map(|&t| {
            let avg = scenario.schedule.average_density(t)?;
            let v = smoothness_norm_r1(&scenario.h, &avg, &scenario.grid)?;
            Ok((t, v * v))
        })
        .collect()
}

/// Bounded test functions for the covariance diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Identity,
    Square,
    Cosine,
}

impl TestFunction {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Identity => "x",
            TestFunction::Square => "x^2",
            TestFunction::Cosine => "cos",
        }
    }

    pub fn eval(&self, x: f64, support: Interval) -> f64 {
        match self {
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::Cosine => {
                (std::f64::consts::PI * (x - support.lo) / support.length()).cos()
            }
        }
    }

    pub fn all() -> Vec<TestFunction> {
        vec![TestFunction::Identity, TestFunction::Square, TestFunction::Cosine]
    }
}

/// One row of the covariance-summability diagnostic.
#[derive(Debug, Clone)]
pub struct CovarianceRow {
    pub function: &'static str,
    pub anchor: usize,
    pub lag: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub partial_sum: f64,
}

/// Monte Carlo estimates of `Cov(g(x_i), g(x_{i+k}))` across replicate
/// chains, at anchors i = 1 and i = mid-schedule, with standard errors and
/// the running partial sums of absolute covariances.
pub fn covariance_diagnostic(
    schedule: &SamplingSchedule,
    mode: SamplerMode,
    functions: &[TestFunction],
    max_lag: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<CovarianceRow>> {
    if max_lag == 0 {
        return Err(Error::Argument("max_lag must be >= 1".into()));
    }
    if replicates < 100 {
        return Err(Error::Argument(format!(
            "covariance diagnostic needs >= 100 replicates, got {replicates}"
        )));
    }
    let support = schedule.support();
    let mid = (schedule.total() / 2).max(1);
    let mut anchors = vec![1usize];
    if mid > 1 && mid + max_lag <= schedule.total() {
        anchors.push(mid);
    }
    let mut rows = Vec::new();
    for (a_idx, &anchor) in anchors.iter().enumerate() {
        if anchor + max_lag > schedule.total() {
            return Err(Error::Argument(format!(
                "anchor {anchor} plus max_lag {max_lag} exceeds the schedule length {}",
                schedule.total()
            )));
        }
        // One chain per replicate, each long enough to cover anchor + lags.
        let chain_len = anchor + max_lag;
        let chains: Vec<Vec<f64>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let chain_seed = split_seed(split_seed(seed, a_idx as u64 + 1), r as u64);
                let mut state = match mode {
                    SamplerMode::Independent => SamplerState::independent(chain_seed),
                    SamplerMode::Metropolis { step_scale } => {
                        SamplerState::metropolis(chain_seed, step_scale)
                    }
                };
                let mut xs = Vec::with_capacity(chain_len);
                for i in 1..=chain_len {
                    let density = schedule.density_at(i).expect("index within schedule");
                    let (x, next) = sample(density, state);
                    state = next;
                    xs.push(x);
                }
                xs
            })
            .collect();

        for &g in functions {
            let g_at = |idx: usize| -> Vec<f64> {
                chains
                    .iter()
                    .map(|c| g.eval(c[idx - 1], support))
                    .collect()
            };
            let base = g_at(anchor);
            let base_mean = base.iter().sum::<f64>() / replicates as f64;
            let mut partial = 0.0;
            for k in 0..=max_lag {
                let lagged = g_at(anchor + k);
                let lag_mean = lagged.iter().sum::<f64>() / replicates as f64;
                let products: Vec<f64> = base
                    .iter()
                    .zip(lagged.iter())
                    .map(|(b, l)| (b - base_mean) * (l - lag_mean))
                    .collect();
                let (estimate, sd) = mean_std(&products);
                let std_error = sd / (replicates as f64).sqrt();
                partial += estimate.abs();
                rows.push(CovarianceRow {
                    function: g.name(),
                    anchor,
                    lag: k,
                    estimate,
                    std_error,
                    partial_sum: partial,
                });
            }
        }
    }
    Ok(rows)
}

/// Fitted log-log convergence rate over a checkpoint ladder.
#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub theoretical: f64,
    /// `(t, mean sup error, stddev)` per ladder point.
    pub points: Vec<(usize, f64, f64)>,
}

/// The proved upper-bound exponent `min(alpha (r - 1/2), 1/2 - alpha)`.
pub fn theoretical_rate(alpha: f64, r: f64) -> f64 {
    (alpha * (r - 0.5)).min(0.5 - alpha)
}

/// Estimate the empirical convergence rate: batch fits at each ladder time
/// on a shared dataset per replicate, then a least-squares line through
/// `log(mean sup error)` against `log t`.
pub fn rate_fit(
    scenario: &Scenario,
    ts: &[usize],
    replicates: usize,
    smoothness_r: f64,
) -> Result<RateEstimate> {
    scenario.validate()?;
    if ts.len() < 4 {
        return Err(Error::Argument(format!(
            "rate ladder needs >= 4 checkpoints, got {}",
            ts.len()
        )));
    }
    if ts.windows(2).any(|w| w[0] >= w[1]) || ts[0] == 0 {
        return Err(Error::Argument("rate ladder must be strictly increasing".into()));
    }
    if (ts[ts.len() - 1] as f64) < 10.0 * ts[0] as f64 {
        return Err(Error::Argument(
            "rate ladder must span at least one decade in t".into(),
        ));
    }
    if *ts.last().unwrap() > scenario.schedule.total() {
        return Err(Error::Argument(format!(
            "ladder end {} exceeds the schedule length {}",
            ts.last().unwrap(),
            scenario.schedule.total()
        )));
    }
    if replicates < 10 {
        return Err(Error::Argument(format!(
            "rate estimation needs >= 10 replicates, got {replicates}"
        )));
    }
    let mu = build_regression_function(&scenario.kernel, &scenario.h, &scenario.grid)?;
    let errors: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let seed = split_seed(scenario.master_seed, k as u64);
            let data = generate_data(scenario, seed)?;
            ts.iter()
                .map(|&t| {
                    let (xs, ys) = data.prefix(t)?;
                    let model = KrrModel::fit_slices(
                        xs,
                        ys,
                        &scenario.kernel,
                        scenario.gamma.gamma_at(t),
                    )?;
                    Ok(model.sup_error(&mu))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(ts.len());
    for (j, &t) in ts.iter().enumerate() {
        let series: Vec<f64> = errors.iter().map(|row| row[j]).collect();
        let (mean, sd) = mean_std(&series);
        if !(mean > 0.0) {
            return Err(Error::Numeric(format!(
                "mean sup error at t={t} is not positive; log-log fit is degenerate"
            )));
        }
        points.push((t, mean, sd));
    }

    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(t, m, _)| ((t as f64).ln(), m.ln()))
        .collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };

    Ok(RateEstimate {
        slope,
        intercept,
        r2,
        theoretical: theoretical_rate(scenario.gamma.alpha(), smoothness_r),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{Density, Phase};
    use crate::operator::canonical_step;

    fn support() -> Interval {
        Interval::new(0.0, 10.0).unwrap()
    }

    fn canonical_densities() -> Vec<Density> {
        [2.0, 5.0, 8.0]
            .iter()
            .map(|&c| Density::truncated_gaussian(c, 1.0, support()).unwrap())
            .collect()
    }

    fn three_phase_schedule(count: usize) -> SamplingSchedule {
        SamplingSchedule::new(
            canonical_densities()
                .into_iter()
                .map(|density| Phase { density, count })
                .collect(),
        )
        .unwrap()
    }

    fn canonical_scenario(count: usize, grid_nodes: usize, replicates: usize) -> Scenario {
        let kernel = Kernel::gaussian(1.0, support()).unwrap();
        Scenario {
            h: canonical_step(support()).unwrap(),
            schedule: three_phase_schedule(count),
            noise_var: 0.01,
            gamma: GammaSchedule::new(0.01, 0.25).unwrap(),
            grid: QuadratureGrid::simpson(support(), grid_nodes).unwrap(),
            checkpoints: vec![count, 2 * count, 3 * count],
            master_seed: 20260808,
            replicates,
            sampler: SamplerMode::Independent,
            kernel,
        }
    }

    #[test]
    fn noiseless_data_equals_regression_function() {
        let mut sc = canonical_scenario(50, 201, 1);
        sc.noise_var = 0.0;
        let data = generate_data(&sc, 17).unwrap();
        for (x, y) in data.inputs().iter().zip(data.outputs().iter()) {
            let mu = regression_value(&sc.kernel, &sc.h, *x, sc.grid.spacing());
            assert_eq!(*y, mu);
        }
    }

    #[test]
    fn first_phase_mean_matches_truncated_normal_oracle() {
        let sc = canonical_scenario(1000, 201, 1);
        let data = generate_data(&sc, 99).unwrap();
        let first: &[f64] = &data.inputs()[..1000];
        let mean = first.iter().sum::<f64>() / 1000.0;
        // Analytic truncated-normal mean for center 2, scale 1 on [0, 10].
        let a = (0.0 - 2.0) / 1.0;
        let b = (10.0 - 2.0) / 1.0;
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cap_phi = |z: f64| 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
        let z = cap_phi(b) - cap_phi(a);
        let oracle = 2.0 + (phi(a) - phi(b)) / z;
        let sigma = (1.0 + (a * phi(a) - b * phi(b)) / z - ((phi(a) - phi(b)) / z).powi(2)).sqrt();
        let tol = 3.0 * sigma / 1000f64.sqrt();
        assert!((mean - oracle).abs() < tol, "mean {mean} vs {oracle} (tol {tol})");
    }

    #[test]
    fn generate_data_is_deterministic() {
        let sc = canonical_scenario(100, 201, 1);
        let a = generate_data(&sc, 5).unwrap();
        let b = generate_data(&sc, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_uncorrelated_with_inputs() {
        let sc = canonical_scenario(1000, 201, 1);
        let data = generate_data(&sc, 4).unwrap();
        let spacing = sc.grid.spacing();
        let resid: Vec<f64> = data
            .inputs()
            .iter()
            .zip(data.outputs().iter())
            .map(|(&x, &y)| y - regression_value(&sc.kernel, &sc.h, x, spacing))
            .collect();
        let n = resid.len() as f64;
        let mx = data.inputs().iter().sum::<f64>() / n;
        let mr = resid.iter().sum::<f64>() / n;
        let mut sxr = 0.0;
        let mut sxx = 0.0;
        let mut srr = 0.0;
        for (x, r) in data.inputs().iter().zip(resid.iter()) {
            sxr += (x - mx) * (r - mr);
            sxx += (x - mx) * (x - mx);
            srr += (r - mr) * (r - mr);
        }
        let corr = sxr / (sxx * srr).sqrt();
        assert!(corr.abs() < 3.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn run_scenario_small_is_deterministic_and_shaped() {
        let sc = canonical_scenario(60, 201, 2);
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.observations.len(), 6);
        assert_eq!(a.estimates.len(), 3);
        assert_eq!(a.aggregates.len(), 3);
        for (oa, ob) in a.observations.iter().zip(b.observations.iter()) {
            assert_eq!(oa.sup_error.to_bits(), ob.sup_error.to_bits());
            assert_eq!(oa.sup_error_right.to_bits(), ob.sup_error_right.to_bits());
        }
        for (ca, cb) in a.checkpoints.iter().zip(b.checkpoints.iter()) {
            assert_eq!(ca.data_free_distance.to_bits(), cb.data_free_distance.to_bits());
        }
    }

    #[test]
    fn smoothness_trace_decreases_after_first_phase() {
        let sc = canonical_scenario(200, 401, 1);
        let trace = smoothness_trace(&sc, &[200, 400, 600]).unwrap();
        assert!(trace[1].1 < trace[0].1, "{:?}", trace);
        assert!(trace[2].1 < trace[0].1, "{:?}", trace);
    }

    #[test]
    fn smoothness_trace_uniform_single_phase_is_constant() {
        let kernel = Kernel::gaussian(1.0, support()).unwrap();
        let sc = Scenario {
            h: canonical_step(support()).unwrap(),
            schedule: SamplingSchedule::new(vec![Phase {
                density: Density::uniform(support()),
                count: 500,
            }])
            .unwrap(),
            noise_var: 0.01,
            gamma: GammaSchedule::new(0.01, 0.25).unwrap(),
            grid: QuadratureGrid::simpson(support(), 2001).unwrap(),
            checkpoints: vec![500],
            master_seed: 1,
            replicates: 1,
            sampler: SamplerMode::Independent,
            kernel,
        };
        let trace = smoothness_trace(&sc, &[100, 250, 500]).unwrap();
        for (_, v) in trace {
            assert!((v - 21.8).abs() < 1e-9, "value {v}");
        }
    }

    #[test]
    fn smoothness_trace_depends_only_on_phase_counts() {
        let kernel = Kernel::gaussian(1.0, support()).unwrap();
        let make = |order: [usize; 2]| {
            let ds = canonical_densities();
            Scenario {
                h: canonical_step(support()).unwrap(),
                schedule: SamplingSchedule::new(vec![
                    Phase {
                        density: ds[order[0]].clone(),
                        count: 100,
                    },
                    Phase {
                        density: ds[order[1]].clone(),
                        count: 100,
                    },
                ])
                .unwrap(),
                noise_var: 0.0,
                gamma: GammaSchedule::new(0.01, 0.25).unwrap(),
                grid: QuadratureGrid::simpson(support(), 401).unwrap(),
                checkpoints: vec![200],
                master_seed: 1,
                replicates: 1,
                sampler: SamplerMode::Independent,
                kernel: kernel.clone(),
            }
        };
        // At t = 200 both phases are fully consumed, so the average density
        // (and the trace value) is order-independent.
        let a = smoothness_trace(&make([0, 1]), &[200]).unwrap();
        let b = smoothness_trace(&make([1, 0]), &[200]).unwrap();
        assert!((a[0].1 - b[0].1).abs() < 1e-12 * a[0].1.abs());
    }

    #[test]
    fn covariance_independent_mode_is_noise_at_positive_lags() {
        let schedule = three_phase_schedule(40);
        let rows = covariance_diagnostic(
            &schedule,
            SamplerMode::Independent,
            &TestFunction::all(),
            10,
            2000,
            31,
        )
        .unwrap();
        for row in rows.iter().filter(|r| r.lag >= 1) {
            assert!(
                row.estimate.abs() <= 3.0 * row.std_error,
                "{} anchor {} lag {}: {} vs se {}",
                row.function,
                row.anchor,
                row.lag,
                row.estimate,
                row.std_error
            );
        }
    }

    #[test]
    fn covariance_lag_zero_is_positive_variance() {
        let schedule = three_phase_schedule(40);
        let rows = covariance_diagnostic(
            &schedule,
            SamplerMode::Independent,
            &[TestFunction::Identity],
            5,
            500,
            7,
        )
        .unwrap();
        for row in rows.iter().filter(|r| r.lag == 0) {
            assert!(row.estimate > 0.0);
        }
    }

    #[test]
    fn covariance_metropolis_positive_lag_one() {
        let schedule = SamplingSchedule::new(vec![Phase {
            density: Density::uniform(support()),
            count: 60,
        }])
        .unwrap();
        let rows = covariance_diagnostic(
            &schedule,
            SamplerMode::Metropolis { step_scale: 1.0 },
            &[TestFunction::Identity],
            5,
            2000,
            13,
        )
        .unwrap();
        let lag1 = rows.iter().find(|r| r.anchor == 1 && r.lag == 1).unwrap();
        assert!(
            lag1.estimate > 3.0 * lag1.std_error,
            "lag-1 {} vs se {}",
            lag1.estimate,
            lag1.std_error
        );
        // Geometric mixing: the autocovariance decays along the lags.
        let lag5 = rows.iter().find(|r| r.anchor == 1 && r.lag == 5).unwrap();
        assert!(lag5.estimate < lag1.estimate);
    }

    #[test]
    fn covariance_rejects_small_replicates() {
        let schedule = three_phase_schedule(40);
        assert!(covariance_diagnostic(
            &schedule,
            SamplerMode::Independent,
            &[TestFunction::Identity],
            5,
            50,
            1
        )
        .is_err());
    }

    #[test]
    fn theoretical_rate_formula() {
        // Hand substitutions into min(alpha (r - 1/2), 1/2 - alpha).
        for (alpha, r, expect) in [
            (0.25, 1.0, 0.125),
            (0.4, 1.0, 0.1),
            (0.1, 1.0, 0.05),
            (0.3, 0.75, 0.075),
            (0.45, 0.6, 0.045),
        ] {
            let got = theoretical_rate(alpha, r);
            assert!((got - expect).abs() < 1e-15, "({alpha}, {r}): {got}");
        }
    }

    fn uniform_scenario(total: usize) -> Scenario {
        let kernel = Kernel::gaussian(1.0, support()).unwrap();
        Scenario {
            h: canonical_step(support()).unwrap(),
            schedule: SamplingSchedule::new(vec![Phase {
                density: Density::uniform(support()),
                count: total,
            }])
            .unwrap(),
            noise_var: 0.01,
            gamma: GammaSchedule::new(0.01, 0.25).unwrap(),
            grid: QuadratureGrid::simpson(support(), 1001).unwrap(),
            checkpoints: vec![total],
            master_seed: 424242,
            replicates: 1,
            sampler: SamplerMode::Independent,
            kernel,
        }
    }

    #[test]
    fn rate_fit_slope_is_negative_on_uniform_scenario() {
        let sc = uniform_scenario(800);
        let est = rate_fit(&sc, &[80, 160, 320, 800], 10, 1.0).unwrap();
        assert!(est.slope < 0.0, "slope {}", est.slope);
        assert_eq!(est.points.len(), 4);
        assert!((est.theoretical - 0.125).abs() < 1e-15);
    }

    #[test]
    fn rate_fit_preconditions() {
        let sc = uniform_scenario(400);
        assert!(rate_fit(&sc, &[100, 200, 400], 10, 1.0).is_err());
        assert!(rate_fit(&sc, &[100, 150, 200, 400], 10, 1.0).is_err());
        assert!(rate_fit(&sc, &[40, 80, 160, 400], 5, 1.0).is_err());
    }

    #[test]
    fn scenario_validation_catches_bad_checkpoints() {
        let mut sc = canonical_scenario(50, 201, 1);
        sc.checkpoints = vec![50, 50];
        assert!(sc.validate().is_err());
        sc.checkpoints = vec![200];
        assert!(sc.validate().is_err());
        sc.checkpoints = vec![];
        assert!(sc.validate().is_err());
    }
}
