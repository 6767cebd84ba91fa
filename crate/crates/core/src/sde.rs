//! Euler-Maruyama simulation of drift-controlled diffusions on `[0, 1]`.
//!
//! Every path starts at the origin. Wiener increments come from a
//! counter-based generator keyed by `(seed, stream, step)`, so any path can
//! be replayed, or computed on any thread, without shared state.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::ensure_finite;
use crate::{Error, Result};

/// Uniform grid `t_i = i/T`, `i = 0..=T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeGrid {
    steps: usize,
}

impl TimeGrid {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }
}

/// Which random stream a draw belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum NoiseDomain {
    Wiener = 0,
    MonteCarlo = 1,
    Langevin = 2,
}

/// Seeded, counter-based Gaussian noise for one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
    stream: u64,
    zero_wiener: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NoiseSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            zero_wiener: false,
        }
    }

    /// Same source with every Wiener increment forced to zero. Other
    /// domains (e.g. Monte-Carlo draws) are unaffected.
    pub fn without_wiener(self) -> Self {
        Self {
            zero_wiener: true,
            ..self
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn is_zero_wiener(&self) -> bool {
        self.zero_wiener
    }

    /// Generator for `(seed, stream, step, domain)`.
    pub fn rng(&self, step: usize, domain: NoiseDomain) -> ChaCha8Rng {
        let key = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x243f_6a88_85a3_08d3)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(((step as u64) << 4) | domain as u64);
        rng
    }

    /// `ΔW_step ~ N(0, dt·I_n)`.
    pub fn increment(&self, step: usize, n: usize, dt: f64) -> Vec<f64> {
        if self.zero_wiener {
            return vec![0.0; n];
        }
        let sd = dt.sqrt();
        let mut rng = self.rng(step, NoiseDomain::Wiener);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    }

    pub fn increments(&self, grid: TimeGrid, n: usize) -> Vec<Vec<f64>> {
        (0..grid.steps()).map(|i| self.increment(i, n, grid.dt())).collect()
    }
}

/// Standard EM, or the σ-rescaled variant `dX = σ b dt + √σ dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleMode {
    Standard,
    Rescaled(f64),
}

impl ScaleMode {
    pub fn rescaled(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::invalid(format!("rescale sigma must lie in (0, 1], got {sigma}")));
        }
        Ok(ScaleMode::Rescaled(sigma))
    }

    /// Multiplier applied to the drift in the EM update.
    pub fn drift_scale(&self) -> f64 {
        match self {
            ScaleMode::Standard => 1.0,
            ScaleMode::Rescaled(s) => *s,
        }
    }

    /// Variance of the uncontrolled terminal state `X_1`.
    pub fn terminal_variance(&self) -> f64 {
        self.drift_scale()
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScaleMode::Standard => "standard",
            ScaleMode::Rescaled(_) => "rescaled",
        }
    }
}

/// One simulated path with every intermediate recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
    pub drifts: Vec<Vec<f64>>,
    /// `Σᵢ ‖bᵢ‖² / (2T)`
    pub running_cost: f64,
    pub mode: ScaleMode,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.drifts.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Running cost recomputed from the stored drifts.
    pub fn recompute_running_cost(&self) -> f64 {
        running_cost(&self.drifts)
    }

    /// Writes `step,t,x0..xk,b0..bk,dW0..dWk`; the final row carries the
    /// terminal state with empty drift and noise fields.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.dim();
        let t_steps = self.steps();
        let mut out = String::new();
        let mut header = vec!["step".to_string(), "t".to_string()];
        for prefix in ["x", "b", "dW"] {
            header.extend((0..n).map(|i| format!("{prefix}{i}")));
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..=t_steps {
            let mut row = vec![i.to_string(), (i as f64 / t_steps as f64).to_string()];
            row.extend(self.states[i].iter().map(f64::to_string));
            if i < t_steps {
                row.extend(self.drifts[i].iter().map(f64::to_string));
                row.extend(self.noise[i].iter().map(f64::to_string));
            } else {
                row.extend(std::iter::repeat_n(String::new(), 2 * n));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn running_cost(drifts: &[Vec<f64>]) -> f64 {
    let t = drifts.len() as f64;
    drifts
        .iter()
        .map(|b| b.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / (2.0 * t)
}

/// Simulates `X_{i+1} = X_i + s·b(X_i, t_i)/T + √s·ΔW_i` from `X_0 = 0`,
/// where `s` is 1 in standard mode and σ in rescaled mode.
pub fn simulate(
    n: usize,
    mut drift: impl FnMut(&[f64], f64) -> Vec<f64>,
    grid: TimeGrid,
    noise: NoiseSource,
    mode: ScaleMode,
) -> Result<Trajectory> {
    simulate_with(n, |x, t, _| Ok(drift(x, t)), grid, noise, mode)
}

/// As [`simulate`], with a fallible drift that also receives the step index.
pub fn simulate_with(
    n: usize,
    mut drift: impl FnMut(&[f64], f64, usize) -> Result<Vec<f64>>,
    grid: TimeGrid,
    noise: NoiseSource,
    mode: ScaleMode,
) -> Result<Trajectory> {
    let steps = grid.steps();
    let dt = grid.dt();
    let s = mode.drift_scale();
    let root_s = s.sqrt();
    let mut states = Vec::with_capacity(steps + 1);
    let mut drifts = Vec::with_capacity(steps);
    let mut incs = Vec::with_capacity(steps);
    states.push(vec![0.0; n]);
    for i in 0..steps {
        let x = &states[i];
        let b = drift(x, grid.time(i), i)?;
        if b.len() != n {
            return Err(Error::invalid(format!(
                "drift returned {} components at step {i}, expected {n}",
                b.len()
            )));
        }
        ensure_finite(&b, || format!("drift at step {i}"))?;
        let dw = noise.increment(i, n, dt);
        let next: Vec<f64> = (0..n).map(|k| x[k] + s * b[k] * dt + root_s * dw[k]).collect();
        ensure_finite(&next, || format!("state at step {}", i + 1))?;
        states.push(next);
        drifts.push(b);
        incs.push(dw);
    }
    let running_cost = running_cost(&drifts);
    Ok(Trajectory {
        states,
        noise: incs,
        drifts,
        running_cost,
        mode,
    })
}

/// `log N(x; 0, vI_n)` with `v` the terminal variance of the uncontrolled
/// process (1 in standard mode, σ in rescaled mode).
pub fn wiener_terminal_logdensity(x: &[f64], mode: ScaleMode) -> Result<f64> {
    ensure_finite(x, || "terminal state".into())?;
    let v = mode.terminal_variance();
    let n = x.len() as f64;
    let sq: f64 = x.iter().map(|a| a * a).sum();
    Ok(-0.5 * n * (2.0 * PI * v).ln() - sq / (2.0 * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn grid_endpoints() {
        let g = TimeGrid::new(8).unwrap();
        let ts = g.times();
        assert_eq!(ts[0], 0.0);
        assert_eq!(ts[8], 1.0);
        assert!(ts.windows(2).all(|w| close(w[1] - w[0], 0.125, 1e-15)));
        assert!(TimeGrid::new(0).is_err());
    }

    #[test]
    fn zero_drift_zero_noise_stays_at_origin() {
        let g = TimeGrid::new(10).unwrap();
        let tr = simulate(3, |_, _| vec![0.0; 3], g, NoiseSource::new(1, 0).without_wiener(), ScaleMode::Standard)
            .unwrap();
        assert!(tr.states.iter().all(|x| x.iter().all(|&v| v == 0.0)));
        assert_eq!(tr.running_cost, 0.0);
    }

    #[test]
    fn constant_drift_telescopes() {
        let a = vec![0.5, -2.0];
        let g = TimeGrid::new(4).unwrap();
        let tr = simulate(2, |_, _| a.clone(), g, NoiseSource::new(0, 0).without_wiener(), ScaleMode::Standard)
            .unwrap();
        for k in 0..2 {
            assert!(close(tr.terminal()[k], a[k], 1e-15));
        }
        assert!(close(tr.running_cost, (0.25 + 4.0) / 2.0, 1e-12));
    }

    #[test]
    fn rescaled_update() {
        let g = TimeGrid::new(1).unwrap();
        let noise = NoiseSource::new(3, 1);
        let sigma = 0.25;
        let tr = simulate(1, |_, _| vec![2.0], g, noise, ScaleMode::rescaled(sigma).unwrap()).unwrap();
        let dw = noise.increment(0, 1, 1.0)[0];
        assert!(close(tr.terminal()[0], sigma * 2.0 + 0.5 * dw, 1e-15));
    }

    #[test]
    fn non_finite_drift_reports_step() {
        let g = TimeGrid::new(5).unwrap();
        let err = simulate(1, |_, t| vec![if t >= 0.6 { f64::NAN } else { 0.0 }], g, NoiseSource::new(0, 0), ScaleMode::Standard)
            .unwrap_err();
        match err {
            Error::NumericFailure { location, .. } => assert!(location.contains("step 3"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_keys_replay_bitwise() {
        let g = TimeGrid::new(16).unwrap();
        let f = |x: &[f64], t: f64| x.iter().map(|v| -v + t).collect::<Vec<_>>();
        let a = simulate(3, f, g, NoiseSource::new(9, 4), ScaleMode::Standard).unwrap();
        let b = simulate(3, f, g, NoiseSource::new(9, 4), ScaleMode::Standard).unwrap();
        assert_eq!(a, b);
        let c = simulate(3, f, g, NoiseSource::new(9, 5), ScaleMode::Standard).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn running_cost_is_additive() {
        let g = TimeGrid::new(20).unwrap();
        let tr = simulate(2, |x, t| vec![x[0] + t, -x[1] * 3.0], g, NoiseSource::new(1, 2), ScaleMode::Standard).unwrap();
        assert!(tr.running_cost >= 0.0);
        assert!(close(tr.running_cost, tr.recompute_running_cost(), 1e-12));
        let manual: f64 = tr.drifts.iter().map(|b| (b[0] * b[0] + b[1] * b[1]) / 40.0).sum();
        assert!(close(tr.running_cost, manual, 1e-12));
    }

    #[test]
    fn terminal_law_of_pure_wiener_process() {
        let g = TimeGrid::new(64).unwrap();
        let n = 2;
        let paths = 10_000;
        let terms: Vec<Vec<f64>> = (0..paths)
            .map(|s| {
                simulate(n, |_, _| vec![0.0; n], g, NoiseSource::new(2024, s), ScaleMode::Standard)
                    .unwrap()
                    .terminal()
                    .to_vec()
            })
            .collect();
        for k in 0..n {
            let mean = terms.iter().map(|x| x[k]).sum::<f64>() / paths as f64;
            let var = terms.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
            assert!(mean.abs() <= 3.0 * (n as f64 / paths as f64).sqrt(), "mean {mean}");
            assert!((var - 1.0).abs() <= 0.05, "var {var}");
        }
    }

    #[test]
    fn ou_terminal_variance_error_shrinks_with_steps() {
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        let paths = 10_000u64;
        let mut prev: Option<f64> = None;
        for steps in [8, 16, 32, 64] {
            let g = TimeGrid::new(steps).unwrap();
            let xs: Vec<f64> = (0..paths)
                .map(|s| {
                    simulate(1, |x, _| vec![-x[0]], g, NoiseSource::new(77, s), ScaleMode::Standard)
                        .unwrap()
                        .terminal()[0]
                })
                .collect();
            let mean = xs.iter().sum::<f64>() / paths as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
            // mean of a symmetric process started at 0 is 0 for every T
            assert!(mean.abs() <= 3.0 * (var / paths as f64).sqrt());
            let err = (var - exact).abs();
            let mc_noise = exact * (2.0 / paths as f64).sqrt();
            if let Some(p) = prev {
                assert!(err <= p + 2.0 * mc_noise, "T={steps}: {err} vs {p}");
            }
            prev = Some(err);
        }
    }

    #[test]
    fn wiener_logdensity_values() {
        let v = wiener_terminal_logdensity(&[0.0], ScaleMode::Standard).unwrap();
        assert!(close(v, -0.918_938_533_204_672_7, 1e-12));
        let v = wiener_terminal_logdensity(&[0.0, 0.0], ScaleMode::Standard).unwrap();
        assert!(close(v, -1.837_877_066_409_345_5, 1e-12));
        // log N(1; 0, 0.25) = -0.5 ln(2π·0.25) - 1/(2·0.25)
        let want = -0.5 * (2.0 * PI * 0.25f64).ln() - 2.0;
        let v = wiener_terminal_logdensity(&[1.0], ScaleMode::Rescaled(0.25)).unwrap();
        assert!(close(v, want, 1e-12));
        assert!(close(v, -2.225_791_352_644_727, 1e-9));
        assert!(wiener_terminal_logdensity(&[f64::INFINITY], ScaleMode::Standard).is_err());
    }

    #[test]
    fn csv_dump_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let tr = simulate(2, |_, _| vec![1.0, 0.0], TimeGrid::new(3).unwrap(), NoiseSource::new(0, 0), ScaleMode::Standard)
            .unwrap();
        tr.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,x0,x1,b0,b1,dW0,dW1");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("3,1,"));
        assert!(lines[4].ends_with(",,,,"));
    }
}
