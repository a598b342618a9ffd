//! Probability densities on an interval, convex combinations, sampling
//! schedules, the running average density, and seeded samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::Interval;
use crate::special::{normal_cdf, normal_pdf, normal_quantile};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed splitting rule for parallel replicates: `seed_k = master ^ (k * 0x9E3779B97F4A7C15)`.
pub fn split_seed(master: u64, k: u64) -> u64 {
    master ^ k.wrapping_mul(GOLDEN_GAMMA)
}

/// splitmix64-style finalizer; gives every (seed, index) pair its own
/// well-separated generator seed.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, index))
}

fn open_unit(u: f64) -> f64 {
    u.clamp(1e-16, 1.0 - 1e-16)
}

#[derive(Debug, Clone, PartialEq)]
enum DensityKind {
    TruncatedGaussian {
        center: f64,
        scale: f64,
        /// Standard-normal CDF at the support endpoints and their difference,
        /// precomputed at construction.
        cdf_lo: f64,
        mass: f64,
    },
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        /// Normalized so the panel masses sum to one.
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Mixture {
        components: Vec<Density>,
        weights: Vec<f64>,
    },
}

/// A normalized probability density on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    kind: DensityKind,
    support: Interval,
}

impl Density {
    /// Gaussian with the given center and scale, renormalized to the support
    /// via the error-function difference.
    pub fn truncated_gaussian(center: f64, scale: f64, support: Interval) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !center.is_finite() {
            return Err(Error::Argument(format!(
                "truncated gaussian needs finite center and positive scale, got ({center}, {scale})"
            )));
        }
        let cdf_lo = normal_cdf((support.lo - center) / scale);
        let cdf_hi = normal_cdf((support.hi - center) / scale);
        let mass = cdf_hi - cdf_lo;
        if !(mass > 1e-300) {
            return Err(Error::Argument(format!(
                "truncated gaussian({center}, {scale}) has no mass on [{}, {}]",
                support.lo, support.hi
            )));
        }
        Ok(Density {
            kind: DensityKind::TruncatedGaussian {
                center,
                scale,
                cdf_lo,
                mass,
            },
            support,
        })
    }

    /// Piecewise-constant density over the panels between `breakpoints`.
    /// Raw panel values are normalized to unit total mass.
    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return Err(Error::Argument(format!(
                "piecewise density needs n+1 breakpoints for n values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument(
                "piecewise breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Argument(
                "piecewise values must be finite and nonnegative".into(),
            ));
        }
        let mass: f64 = values
            .iter()
            .zip(breakpoints.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::Argument("piecewise density has zero mass".into()));
        }
        let values: Vec<f64> = values.iter().map(|v| v / mass).collect();
        let mut cumulative = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (v, w) in values.iter().zip(breakpoints.windows(2)) {
            acc += v * (w[1] - w[0]);
            cumulative.push(acc);
        }
        let support = Interval::new(breakpoints[0], *breakpoints.last().unwrap())?;
        Ok(Density {
            kind: DensityKind::PiecewiseConstant {
                breakpoints,
                values,
                cumulative,
            },
            support,
        })
    }

    /// Uniform density on the support.
    pub fn uniform(support: Interval) -> Self {
        Density::piecewise_constant(vec![support.lo, support.hi], vec![1.0])
            .expect("uniform density on a valid interval")
    }

    /// Convex combination of densities sharing a support.
    pub fn mixture(components: Vec<Density>, weights: Vec<f64>) -> Result<Self> {
        convex_combine(components, weights)
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    /// Normalized density value; zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.kind {
            DensityKind::TruncatedGaussian {
                center,
                scale,
                mass,
                ..
            } => normal_pdf((x - center) / scale) / (scale * mass),
            DensityKind::PiecewiseConstant {
                breakpoints,
                values,
                ..
            } => {
                let idx = panel_index(breakpoints, x);
                values[idx]
            }
            DensityKind::Mixture {
                components,
                weights,
            } => components
                .iter()
                .zip(weights.iter())
                .map(|(c, w)| w * c.pdf(x))
                .sum(),
        }
    }

    /// Cumulative distribution function, clamped to `[0, 1]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.support.lo {
            return 0.0;
        }
        if x >= self.support.hi {
            return 1.0;
        }
        match &self.kind {
            DensityKind::TruncatedGaussian {
                center,
                scale,
                cdf_lo,
                mass,
            } => (((normal_cdf((x - center) / scale)) - cdf_lo) / mass).clamp(0.0, 1.0),
            DensityKind::PiecewiseConstant {
                breakpoints,
                values,
                cumulative,
            } => {
                let idx = panel_index(breakpoints, x);
                (cumulative[idx] + values[idx] * (x - breakpoints[idx])).clamp(0.0, 1.0)
            }
            DensityKind::Mixture {
                components,
                weights,
            } => components
                .iter()
                .zip(weights.iter())
                .map(|(c, w)| w * c.cdf(x))
                .sum::<f64>()
                .clamp(0.0, 1.0),
        }
    }

    /// Inverse CDF. Closed form for truncated Gaussians and piecewise
    /// densities; bisection against `cdf` for mixtures.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = open_unit(u);
        match &self.kind {
            DensityKind::TruncatedGaussian {
                center,
                scale,
                cdf_lo,
                mass,
            } => {
                let p = (cdf_lo + u * mass).clamp(1e-300, 1.0 - 1e-17);
                (center + scale * normal_quantile(p)).clamp(self.support.lo, self.support.hi)
            }
            DensityKind::PiecewiseConstant {
                breakpoints,
                values,
                cumulative,
            } => {
                let idx = cumulative.partition_point(|&c| c < u).saturating_sub(1);
                let idx = idx.min(values.len() - 1);
                if values[idx] <= 0.0 {
                    return breakpoints[idx + 1];
                }
                (breakpoints[idx] + (u - cumulative[idx]) / values[idx])
                    .clamp(self.support.lo, self.support.hi)
            }
            DensityKind::Mixture { .. } => {
                let (mut lo, mut hi) = (self.support.lo, self.support.hi);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-14 * self.support.length() {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Borel non-degeneracy: strictly positive on the open support. A
    /// mixture qualifies when at least one positive-weight component does.
    pub fn is_strictly_positive(&self) -> bool {
        match &self.kind {
            DensityKind::TruncatedGaussian { .. } => true,
            DensityKind::PiecewiseConstant { values, .. } => values.iter().all(|&v| v > 0.0),
            DensityKind::Mixture {
                components,
                weights,
            } => components
                .iter()
                .zip(weights.iter())
                .any(|(c, &w)| w > 0.0 && c.is_strictly_positive()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.kind {
            DensityKind::Mixture {
                components,
                weights,
            } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (c, &w) in components.iter().zip(weights.iter()) {
                    acc += w;
                    if u < acc {
                        return c.draw(rng);
                    }
                }
                components
                    .last()
                    .expect("mixture has at least one component")
                    .draw(rng)
            }
            _ => self.quantile(rng.random::<f64>()),
        }
    }
}

fn panel_index(breakpoints: &[f64], x: f64) -> usize {
    let n = breakpoints.len() - 1;
    breakpoints[1..]
        .partition_point(|&b| b < x)
        .min(n.saturating_sub(1))
}

/// Convex combination of densities over a shared support: an element of
/// the convex hull of its components.
pub fn convex_combine(components: Vec<Density>, weights: Vec<f64>) -> Result<Density> {
    if components.is_empty() || components.len() != weights.len() {
        return Err(Error::Argument(format!(
            "convex combination needs matching nonempty lists, got {} components and {} weights",
            components.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Argument("weights must be nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Argument(format!(
            "weights must sum to 1 within 1e-12, got {sum}"
        )));
    }
    let support = components[0].support();
    if components.iter().any(|c| c.support() != support) {
        return Err(Error::Argument(
            "mixture components must share a support".into(),
        ));
    }
    Ok(Density {
        kind: DensityKind::Mixture {
            components,
            weights,
        },
        support,
    })
}

/// One phase of a sampling schedule: a density and how many consecutive
/// draws it governs.
#[derive(Debug, Clone)]
pub struct Phase {
    pub density: Density,
    pub count: usize,
}

/// Ordered phases defining the sampling densities p_1, ..., p_total.
#[derive(Debug, Clone)]
pub struct SamplingSchedule {
    phases: Vec<Phase>,
    total: usize,
}

impl SamplingSchedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Argument("schedule needs at least one phase".into()));
        }
        let support = phases[0].density.support();
        for (i, phase) in phases.iter().enumerate() {
            if phase.count == 0 {
                return Err(Error::Argument(format!("phase {i} has zero count")));
            }
            if phase.density.support() != support {
                return Err(Error::Argument(format!(
                    "phase {i} support differs from the schedule support"
                )));
            }
            if !phase.density.is_strictly_positive() {
                return Err(Error::Singularity(format!(
                    "phase {i} density is not Borel non-degenerate on the open support"
                )));
            }
        }
        let total = phases.iter().map(|p| p.count).sum();
        Ok(SamplingSchedule { phases, total })
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn support(&self) -> Interval {
        self.phases[0].density.support()
    }

    /// Density governing draw `i` (1-based).
    pub fn density_at(&self, i: usize) -> Result<&Density> {
        if i == 0 || i > self.total {
            return Err(Error::Argument(format!(
                "draw index {i} outside 1..={}",
                self.total
            )));
        }
        let mut remaining = i;
        for phase in &self.phases {
            if remaining <= phase.count {
                return Ok(&phase.density);
            }
            remaining -= phase.count;
        }
        unreachable!("index bounded by total")
    }

    /// Average density over the first `t` draws: the phase densities mixed
    /// with weights (draws taken from each phase among the first t) / t.
    pub fn average_density(&self, t: usize) -> Result<Density> {
        if t == 0 || t > self.total {
            return Err(Error::Argument(format!(
                "time {t} outside 1..={}",
                self.total
            )));
        }
        let mut remaining = t;
        let mut weights = Vec::with_capacity(self.phases.len());
        for phase in &self.phases {
            let taken = remaining.min(phase.count);
            weights.push(taken as f64 / t as f64);
            remaining -= taken;
        }
        let components: Vec<Density> = self.phases.iter().map(|p| p.density.clone()).collect();
        convex_combine(components, weights)
    }
}

/// How draws are produced: mutually independent inverse-CDF draws, or one
/// random-walk Metropolis chain with the target density as stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerMode {
    Independent,
    Metropolis { step_scale: f64 },
}

/// Value-passed sampler state; `sample` never mutates in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerState {
    pub mode: SamplerMode,
    pub rng_seed: u64,
    pub draw_count: u64,
    current: Option<f64>,
}

impl SamplerState {
    pub fn independent(rng_seed: u64) -> Self {
        SamplerState {
            mode: SamplerMode::Independent,
            rng_seed,
            draw_count: 0,
            current: None,
        }
    }

    /// Metropolis chain state. The first draw initializes the chain with an
    /// exact inverse-CDF draw from the target, so the chain starts in its
    /// stationary regime.
    pub fn metropolis(rng_seed: u64, step_scale: f64) -> Self {
        SamplerState {
            mode: SamplerMode::Metropolis { step_scale },
            rng_seed,
            draw_count: 0,
            current: None,
        }
    }

    pub fn current(&self) -> Option<f64> {
        self.current
    }
}

/// Draw one sample from `density`, returning the value and the advanced
/// state. Deterministic given `(rng_seed, draw_count)`.
pub fn sample(density: &Density, state: SamplerState) -> (f64, SamplerState) {
    let mut rng = draw_rng(state.rng_seed, state.draw_count);
    let mut next = state;
    next.draw_count += 1;
    match state.mode {
        SamplerMode::Independent => {
            let x = density.draw(&mut rng);
            next.current = Some(x);
            (x, next)
        }
        SamplerMode::Metropolis { step_scale } => {
            let current = match state.current {
                Some(c) => c,
                None => {
                    // Stationary start: an exact draw from the target.
                    let x = density.draw(&mut rng);
                    next.current = Some(x);
                    return (x, next);
                }
            };
            let z = normal_quantile(open_unit(rng.random::<f64>()));
            let proposal = current + step_scale * z;
            let p_cur = density.pdf(current);
            let p_prop = density.pdf(proposal);
            let accept = p_prop > 0.0 && rng.random::<f64>() * p_cur < p_prop;
            let x = if accept { proposal } else { current };
            next.current = Some(x);
            (x, next)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn support() -> Interval {
        Interval::new(0.0, 10.0).unwrap()
    }

    fn canonical() -> Vec<Density> {
        [2.0, 5.0, 8.0]
            .iter()
            .map(|&c| Density::truncated_gaussian(c, 1.0, support()).unwrap())
            .collect()
    }

    /// Composite-Simpson oracle used to verify normalization; independent of
    /// the cdf implementation.
    fn simpson_mass(d: &Density, nodes: usize) -> f64 {
        let s = d.support();
        let h = s.length() / (nodes - 1) as f64;
        let mut acc = 0.0;
        for i in 0..nodes {
            let w = if i == 0 || i == nodes - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * d.pdf(s.lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn uniform_pdf_value() {
        let u = Density::uniform(support());
        assert!((u.pdf(5.0) - 0.1).abs() < 1e-15);
        assert_eq!(u.pdf(-0.1), 0.0);
        assert_eq!(u.pdf(10.5), 0.0);
    }

    #[test]
    fn truncated_gaussian_symmetry_about_center() {
        let d = Density::truncated_gaussian(5.0, 1.0, support()).unwrap();
        assert!((d.pdf(4.0) - d.pdf(6.0)).abs() < 1e-15);
    }

    #[test]
    fn shipped_densities_integrate_to_one() {
        let mut all = canonical();
        all.push(Density::uniform(support()));
        all.push(convex_combine(canonical(), vec![0.2, 0.5, 0.3]).unwrap());
        for d in &all {
            let mass = simpson_mass(d, 2001);
            assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
        }
    }

    #[test]
    fn piecewise_density_normalizes_exactly() {
        // Discontinuous pdf: panel sums are exact, and the Simpson oracle
        // (which straddles the jumps) still converges to first order.
        let d = Density::piecewise_constant(vec![0.0, 2.0, 8.0, 10.0], vec![2.0, 1.0, 3.0])
            .unwrap();
        assert_eq!(d.cdf(10.0), 1.0);
        let panel_mass: f64 = 0.125 * 2.0 + 0.0625 * 6.0 + 0.1875 * 2.0;
        assert!((panel_mass - 1.0).abs() < 1e-15);
        assert!((simpson_mass(&d, 2001) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn convex_combine_identity_single_component() {
        let d = canonical().remove(0);
        let m = convex_combine(vec![d.clone()], vec![1.0]).unwrap();
        for i in 0..=100 {
            let x = i as f64 * 0.1;
            assert_eq!(m.pdf(x), d.pdf(x));
        }
    }

    #[test]
    fn convex_combine_idempotent_on_identical_components() {
        let d = canonical().remove(1);
        let m = convex_combine(vec![d.clone(), d.clone()], vec![0.5, 0.5]).unwrap();
        for i in 0..=100 {
            let x = i as f64 * 0.1;
            assert!((m.pdf(x) - d.pdf(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn convex_combine_uniforms_stays_uniform() {
        let u = Density::uniform(support());
        let m = convex_combine(vec![u.clone(), u.clone()], vec![0.3, 0.7]).unwrap();
        for i in 0..=50 {
            let x = i as f64 * 0.2;
            assert!((m.pdf(x) - u.pdf(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn convex_combine_rejects_bad_weights() {
        assert!(matches!(
            convex_combine(canonical(), vec![0.5, 0.5, 0.1]),
            Err(Error::Argument(_))
        ));
    }

    fn three_phase_schedule() -> SamplingSchedule {
        SamplingSchedule::new(
            canonical()
                .into_iter()
                .map(|density| Phase {
                    density,
                    count: 1000,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn density_at_phase_boundaries() {
        let s = three_phase_schedule();
        let d1 = &canonical()[0];
        let d2 = &canonical()[1];
        assert_eq!(s.density_at(1).unwrap(), d1);
        assert_eq!(s.density_at(1000).unwrap(), d1);
        assert_eq!(s.density_at(1001).unwrap(), d2);
        assert!(s.density_at(0).is_err());
        assert!(s.density_at(3001).is_err());
    }

    #[test]
    fn density_at_single_phase() {
        let s = SamplingSchedule::new(vec![Phase {
            density: Density::uniform(support()),
            count: 5,
        }])
        .unwrap();
        for i in 1..=5 {
            assert_eq!(s.density_at(i).unwrap(), &Density::uniform(support()));
        }
    }

    #[test]
    fn average_density_inside_first_phase() {
        let s = three_phase_schedule();
        let avg = s.average_density(500).unwrap();
        let d1 = &canonical()[0];
        for i in 0..=100 {
            let x = i as f64 * 0.1;
            assert_eq!(avg.pdf(x), d1.pdf(x));
        }
    }

    #[test]
    fn average_density_halfway_weights() {
        // At t=2000 the three-phase schedule mixes the first two truncated
        // Gaussians equally and gives no weight to the third.
        let s = three_phase_schedule();
        let avg = s.average_density(2000).unwrap();
        let cs = canonical();
        for i in 0..=100 {
            let x = i as f64 * 0.1;
            let expect = 0.5 * cs[0].pdf(x) + 0.5 * cs[1].pdf(x);
            assert!((avg.pdf(x) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn schedule_rejects_degenerate_density() {
        let with_hole =
            Density::piecewise_constant(vec![0.0, 4.0, 6.0, 10.0], vec![1.0, 0.0, 1.0]).unwrap();
        let r = SamplingSchedule::new(vec![Phase {
            density: with_hole,
            count: 10,
        }]);
        assert!(matches!(r, Err(Error::Singularity(_))));
    }

    #[test]
    fn independent_uniform_mean_matches_clt_bound() {
        let u = Density::uniform(support());
        let mut state = SamplerState::independent(42);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let (x, s) = sample(&u, state);
            state = s;
            sum += x;
        }
        let mean = sum / n as f64;
        // 3 sigma / sqrt(n) with sigma^2 = 100/12.
        assert!((mean - 5.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn independent_truncated_gaussian_ks_statistic() {
        let d = Density::truncated_gaussian(5.0, 1.0, support()).unwrap();
        let mut state = SamplerState::independent(7);
        let n = 100_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, s) = sample(&d, state);
            state = s;
            xs.push(x);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = d.cdf(x);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.01, "ks {ks}");
    }

    #[test]
    fn metropolis_uniform_mean_after_burn_in() {
        let u = Density::uniform(support());
        let mut state = SamplerState::metropolis(11, 1.0);
        for _ in 0..1000 {
            let (_, s) = sample(&u, state);
            state = s;
        }
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let (x, s) = sample(&u, state);
            state = s;
            sum += x;
        }
        let mean = sum / n as f64;
        assert!((mean - 5.0).abs() < 0.15, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_in_seed_and_count() {
        let d = canonical().remove(0);
        let run = |seed: u64| -> Vec<f64> {
            let mut state = SamplerState::independent(seed);
            (0..50)
                .map(|_| {
                    let (x, s) = sample(&d, state);
                    state = s;
                    x
                })
                .collect()
        };
        assert_eq!(run(99), run(99));
        assert_ne!(run(99), run(100));
    }

    #[test]
    fn split_seed_rule() {
        assert_eq!(split_seed(5, 0), 5);
        assert_eq!(split_seed(5, 3), 5 ^ 3u64.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn average_density_is_count_weighted_pointwise(
            counts in proptest::collection::vec(1usize..20, 1..4),
            t_frac in 0.01f64..1.0,
            x in 0.0f64..10.0,
        ) {
            let centers = [2.0, 5.0, 8.0];
            let phases: Vec<Phase> = counts
                .iter()
                .enumerate()
                .map(|(i, &count)| Phase {
                    density: Density::truncated_gaussian(centers[i % 3], 1.0, support()).unwrap(),
                    count,
                })
                .collect();
            let schedule = SamplingSchedule::new(phases).unwrap();
            let t = ((schedule.total() as f64 * t_frac).ceil() as usize).clamp(1, schedule.total());
            let avg = schedule.average_density(t).unwrap();
            let brute: f64 = (1..=t)
                .map(|i| schedule.density_at(i).unwrap().pdf(x))
                .sum::<f64>() / t as f64;
            prop_assert!((avg.pdf(x) - brute).abs() < 1e-12);
        }

        #[test]
        fn convex_combinations_integrate_to_one(w0 in 0.0f64..1.0, w1_frac in 0.0f64..1.0) {
            let w1 = (1.0 - w0) * w1_frac;
            let w2 = 1.0 - w0 - w1;
            let m = convex_combine(canonical(), vec![w0, w1, w2]).unwrap();
            let mass = simpson_mass(&m, 2001);
            prop_assert!((mass - 1.0).abs() < 1e-8);
        }
    }
}
