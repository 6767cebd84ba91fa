//! Failure-probability bound of the neural sampler and the parameter
//! solvers that make it at most `√δ`.
//!
//! ```text
//! P(V(X₁) > τ) ≤ C·exp(−(τ−ε)/σ) + √(2ε̂) + √(4L′²(C_L′/T + 1/T²))
//! ```
//!
//! `C = C_{τ,ε,n}` and `C_L′` are existence constants with no closed form;
//! they are inputs here and every output is conditional on them. The three
//! terms get budgets `C₁√δ`, `C₂√δ`, `C₃√δ` with `C₁ + C₂ + C₃ = 1`.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Tolerance on `C₁ + C₂ + C₃ = 1`.
const SPLIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    /// Tail constant `C_{τ,ε,n}`.
    pub c_tail: f64,
    /// Discretisation constant `C_L′`.
    pub c_lprime: f64,
    /// Lipschitz constant `L′` of the drift.
    pub lprime: f64,
    /// Lipschitz constant `L` of the density ratio and its gradient.
    pub l: f64,
    /// Lower bound `c` of the density ratio.
    pub c: f64,
    /// Radius outside which `V` is exactly quadratic.
    pub r: f64,
    pub tau: f64,
    pub eps: f64,
    pub splits: (f64, f64, f64),
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c_tail: 1.0,
            c_lprime: 1.0,
            lprime: 1.0,
            l: 1.0,
            c: 1.0,
            r: 1.0,
            tau: 1.0,
            eps: 0.5,
            splits: (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        }
    }
}

fn positive(name: &str, v: f64, assumption: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be positive and finite, got {v} ({assumption})")));
    }
    Ok(())
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        positive("C_tail", self.c_tail, "tail constant")?;
        if !(self.c_lprime >= 0.0 && self.c_lprime.is_finite()) {
            return Err(Error::invalid(format!(
                "C_L' must be non-negative, got {} (discretisation constant)",
                self.c_lprime
            )));
        }
        positive("L'", self.lprime, "drift Lipschitz assumption")?;
        positive("L", self.l, "Lipschitz assumption on the density ratio and its gradient")?;
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::invalid(format!(
                "c must lie in (0, 1], got {} (density ratio lower-bound assumption)",
                self.c
            )));
        }
        positive("R", self.r, "quadratic-outside-a-ball assumption")?;
        positive("tau", self.tau, "tau-global minimiser threshold")?;
        if !(self.eps > 0.0 && self.eps < self.tau) {
            return Err(Error::invalid(format!(
                "eps must lie in (0, tau) = (0, {}), got {} (tail assumption)",
                self.tau, self.eps
            )));
        }
        let (a, b, c) = self.splits;
        for (name, v) in [("C1", a), ("C2", b), ("C3", c)] {
            positive(name, v, "budget split")?;
        }
        if (a + b + c - 1.0).abs() > SPLIT_TOL {
            return Err(Error::invalid(format!("budget splits must sum to 1, got {}", a + b + c)));
        }
        Ok(())
    }

    /// Upper end of the admissible `ε̂` range, `16L²/c²`.
    pub fn eps_hat_limit(&self) -> f64 {
        16.0 * self.l * self.l / (self.c * self.c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundBreakdown {
    /// `C·exp(−(τ−ε)/σ)`
    pub temperature_term: f64,
    /// `√(2ε̂)`
    pub estimation_term: f64,
    /// `√(4L′²(C_L′/T + 1/T²))`
    pub discretisation_term: f64,
    pub total: f64,
}

fn temperature_term(k: &BoundConstants, sigma: f64) -> f64 {
    k.c_tail * (-(k.tau - k.eps) / sigma).exp()
}

fn estimation_term(eps_hat: f64) -> f64 {
    (2.0 * eps_hat).sqrt()
}

fn discretisation_term(k: &BoundConstants, t: u64) -> f64 {
    let t = t as f64;
    (4.0 * k.lprime * k.lprime * (k.c_lprime / t + 1.0 / (t * t))).sqrt()
}

/// The three-term bound. Requires `σ ∈ (0, 1)`, `ε̂ ∈ (0, 16L²/c²)`, `T ≥ 1`.
pub fn failure_bound(k: &BoundConstants, sigma: f64, eps_hat: f64, t: u64) -> Result<BoundBreakdown> {
    k.validate()?;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::invalid(format!("sigma must lie in the open interval (0, 1), got {sigma}")));
    }
    if !(eps_hat > 0.0 && eps_hat < k.eps_hat_limit()) {
        return Err(Error::invalid(format!(
            "eps_hat must lie in (0, 16L^2/c^2) = (0, {}), got {eps_hat}",
            k.eps_hat_limit()
        )));
    }
    if t == 0 {
        return Err(Error::invalid("T must be >= 1"));
    }
    let a = temperature_term(k, sigma);
    let b = estimation_term(eps_hat);
    let c = discretisation_term(k, t);
    Ok(BoundBreakdown {
        temperature_term: a,
        estimation_term: b,
        discretisation_term: c,
        total: a + b + c,
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Largest σ with `C·exp(−(τ−ε)/σ) ≤ C₁√δ`: `−2(τ−ε)/ln(C₁²δ/C²)`.
pub fn solve_sigma(k: &BoundConstants, delta: f64) -> Result<f64> {
    k.validate()?;
    check_delta(delta)?;
    let arg = k.splits.0 * k.splits.0 * delta / (k.c_tail * k.c_tail);
    if arg >= 1.0 {
        return Err(Error::invalid(format!(
            "delta {delta} is too large for C1 = {} and C_tail = {}: log argument {arg} >= 1",
            k.splits.0, k.c_tail
        )));
    }
    Ok(-2.0 * (k.tau - k.eps) / arg.ln())
}

/// Largest ε̂ with `√(2ε̂) ≤ C₂√δ`: `C₂²δ/2`.
pub fn solve_epshat(k: &BoundConstants, delta: f64) -> Result<f64> {
    k.validate()?;
    check_delta(delta)?;
    Ok(k.splits.1 * k.splits.1 * delta / 2.0)
}

/// Smallest integer T with `√(4L′²(C_L′/T + 1/T²)) ≤ C₃√δ`.
///
/// The condition is the quadratic `C₃²δ·T² − 4L′²C_L′·T − 4L′² ≥ 0`; its
/// positive root is ceiled. For `C_L′ = 0` this is `⌈√(4L′²/(C₃²δ))⌉`.
pub fn solve_t(k: &BoundConstants, delta: f64) -> Result<u64> {
    k.validate()?;
    check_delta(delta)?;
    let a = k.splits.2 * k.splits.2 * delta;
    let l2 = 4.0 * k.lprime * k.lprime;
    let b = l2 * k.c_lprime;
    let root = (b + (b * b + 4.0 * a * l2).sqrt()) / (2.0 * a);
    if !root.is_finite() || root > 1e18 {
        return Err(Error::invalid(format!("required T = {root} is not representable")));
    }
    // equality in exact arithmetic must not cost an extra step
    let budget = k.splits.2 * delta.sqrt() * (1.0 + 1e-12);
    let mut t = (root.ceil() as u64).max(1);
    while discretisation_term(k, t) > budget {
        t += 1;
    }
    while t > 1 && discretisation_term(k, t - 1) <= budget {
        t -= 1;
    }
    Ok(t)
}

/// `⌈√((C_L′+1)·4L′²/(C₃²δ))⌉`, which treats `T·C_L′` as `C_L′`. It meets
/// the discretisation budget only when `C_L′ = 0`; [`solve_t`] is exact.
pub fn solve_t_simplified(k: &BoundConstants, delta: f64) -> Result<u64> {
    k.validate()?;
    check_delta(delta)?;
    let v = ((k.c_lprime + 1.0) * 4.0 * k.lprime * k.lprime / (k.splits.2 * k.splits.2 * delta)).sqrt();
    Ok((v.ceil() as u64).max(1))
}

/// Solved parameters plugged back into the bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorollaryReport {
    pub delta: f64,
    /// Closed-form largest σ.
    pub sigma_max: f64,
    /// σ used for evaluation: `sigma_max` moved inside `(0, 1)` when needed.
    pub sigma: f64,
    pub eps_hat: f64,
    pub t_steps: u64,
    pub breakdown: BoundBreakdown,
    /// `[C₁√δ, C₂√δ, C₃√δ]`
    pub budgets: [f64; 3],
    pub sqrt_delta: f64,
}

/// Solves for (σ, ε̂, T) at `delta` and checks the bound is `≤ √δ`.
///
/// A bound above `√δ + 1e-12`, or a term above its budget by more than
/// `1e-12`, is a consistency error.
pub fn verify_corollary(k: &BoundConstants, delta: f64) -> Result<CorollaryReport> {
    let sigma_max = solve_sigma(k, delta)?;
    let sigma = sigma_max.min(1.0 - f64::EPSILON);
    let eps_hat = solve_epshat(k, delta)?.min(k.eps_hat_limit() * (1.0 - f64::EPSILON));
    let t_steps = solve_t(k, delta)?;
    let breakdown = failure_bound(k, sigma, eps_hat, t_steps)?;
    let sqrt_delta = delta.sqrt();
    let budgets = [k.splits.0 * sqrt_delta, k.splits.1 * sqrt_delta, k.splits.2 * sqrt_delta];
    let terms = [breakdown.temperature_term, breakdown.estimation_term, breakdown.discretisation_term];
    for (i, (term, budget)) in terms.iter().zip(&budgets).enumerate() {
        if *term > budget + 1e-12 {
            return Err(Error::Consistency(format!(
                "term {} = {term} exceeds its budget {budget} at delta {delta}",
                i + 1
            )));
        }
    }
    if breakdown.total > sqrt_delta + 1e-12 {
        return Err(Error::Consistency(format!(
            "bound {} exceeds sqrt(delta) = {sqrt_delta}",
            breakdown.total
        )));
    }
    Ok(CorollaryReport {
        delta,
        sigma_max,
        sigma,
        eps_hat,
        t_steps,
        breakdown,
        budgets,
        sqrt_delta,
    })
}

const CSV_HEADER: &str =
    "delta,sigma_max,sigma,eps_hat,T,temperature_term,estimation_term,discretisation_term,total,sqrt_delta";

impl CorollaryReport {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.delta,
            self.sigma_max,
            self.sigma,
            self.eps_hat,
            self.t_steps,
            self.breakdown.temperature_term,
            self.breakdown.estimation_term,
            self.breakdown.discretisation_term,
            self.breakdown.total,
            self.sqrt_delta
        )
    }

    /// Human-readable table of the solved parameters and term breakdown.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let b = &self.breakdown;
        writeln!(s, "delta                 {:.6e}", self.delta).unwrap();
        writeln!(s, "sigma_max             {:.6}", self.sigma_max).unwrap();
        writeln!(s, "eps_hat_max           {:.6e}", self.eps_hat).unwrap();
        writeln!(s, "T_min                 {}", self.t_steps).unwrap();
        writeln!(s, "term                  value          budget").unwrap();
        writeln!(s, "temperature           {:.6e}   {:.6e}", b.temperature_term, self.budgets[0]).unwrap();
        writeln!(s, "estimation            {:.6e}   {:.6e}", b.estimation_term, self.budgets[1]).unwrap();
        writeln!(s, "discretisation        {:.6e}   {:.6e}", b.discretisation_term, self.budgets[2]).unwrap();
        writeln!(s, "total                 {:.6e}   {:.6e}", b.total, self.sqrt_delta).unwrap();
        s
    }
}

/// Writes one CSV row per report.
pub fn write_reports_csv(reports: &[CorollaryReport], path: &Path) -> Result<()> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn thirds() -> BoundConstants {
        BoundConstants::default()
    }

    #[test]
    fn worked_solver_values() {
        let mut k = thirds();
        k.c_lprime = 0.0;
        // 1/3 is not representable; exact up to the rounding of C₂
        assert!((solve_epshat(&k, 0.09).unwrap() - 0.005).abs() <= 4.0 * f64::EPSILON * 0.005);
        assert_eq!(solve_t(&k, 0.09).unwrap(), 20);
        assert_eq!(solve_t_simplified(&k, 0.09).unwrap(), 20);
    }

    #[test]
    fn worked_sigma_value() {
        let k = BoundConstants {
            tau: 1.5,
            eps: 0.5,
            c_tail: 1.0,
            ..thirds()
        };
        let expected = -2.0 / (0.01f64 / 9.0).ln();
        assert!((solve_sigma(&k, 0.01).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.2941).abs() < 1e-4);
    }

    #[test]
    fn individual_terms() {
        let mut k = thirds();
        let b = failure_bound(&k, 0.5, 0.02, 10).unwrap();
        assert!((b.estimation_term - 0.2).abs() < 1e-15);
        k.c_lprime = 0.0;
        let b = failure_bound(&k, 0.5, 0.02, 20).unwrap();
        assert!((b.discretisation_term - 0.1).abs() < 1e-15);
        assert!((b.total - (b.temperature_term + b.estimation_term + b.discretisation_term)).abs() == 0.0);
    }

    #[test]
    fn limit_vanishes() {
        let k = thirds();
        let b = failure_bound(&k, 1e-9, 1e-18, 1_000_000_000).unwrap();
        assert!(b.total <= 1e-3 * (k.c_tail + k.lprime + 1.0));
        let coarse = failure_bound(&k, 1e-3, 1e-12, 1_000_000).unwrap();
        assert!(b.total < coarse.total);
    }

    #[test]
    fn range_guards_name_the_violation() {
        let k = thirds();
        let msg = |r: Result<BoundBreakdown>| match r {
            Err(Error::InvalidArgument(m)) => m,
            other => panic!("expected invalid argument, got {other:?}"),
        };
        assert!(msg(failure_bound(&k, 1.0, 0.1, 1)).contains("sigma"));
        assert!(msg(failure_bound(&k, 0.5, 16.0, 1)).contains("eps_hat"));
        assert!(msg(failure_bound(&k, 0.5, 0.1, 0)).contains("T"));
        let bad_c = BoundConstants { c: 1.5, ..k };
        assert!(msg(failure_bound(&bad_c, 0.5, 0.1, 1)).contains("lower-bound"));
        let bad_eps = BoundConstants { eps: 1.0, ..k };
        assert!(msg(failure_bound(&bad_eps, 0.5, 0.1, 1)).contains("(0, tau)"));
        let bad_split = BoundConstants {
            splits: (0.5, 0.5, 0.5),
            ..k
        };
        assert!(bad_split.validate().is_err());
    }

    #[test]
    fn sigma_solver_rejects_large_delta() {
        let k = BoundConstants {
            c_tail: 0.1,
            splits: (0.8, 0.1, 0.1),
            ..thirds()
        };
        assert!(matches!(solve_sigma(&k, 0.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn simplified_step_count_can_miss_budget() {
        let k = BoundConstants {
            c_lprime: 5.0,
            ..thirds()
        };
        let delta: f64 = 0.01;
        let budget = k.splits.2 * delta.sqrt();
        let simplified = solve_t_simplified(&k, delta).unwrap();
        assert!(discretisation_term(&k, simplified) > budget);
        let exact = solve_t(&k, delta).unwrap();
        assert!(discretisation_term(&k, exact) <= budget);
        assert!(discretisation_term(&k, exact - 1) > budget);
    }

    #[test]
    fn corollary_at_one_percent() {
        for splits in [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), (0.5, 0.25, 0.25)] {
            let k = BoundConstants { splits, ..thirds() };
            let r = verify_corollary(&k, 0.01).unwrap();
            assert!(r.breakdown.total <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn halving_delta_tightens_parameters() {
        let k = thirds();
        let a = verify_corollary(&k, 0.02).unwrap();
        let b = verify_corollary(&k, 0.01).unwrap();
        assert!(b.sigma_max < a.sigma_max);
        assert!(b.eps_hat < a.eps_hat);
        assert!(b.t_steps > a.t_steps);
    }

    #[test]
    fn report_csv_and_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let r = verify_corollary(&thirds(), 0.01).unwrap();
        write_reports_csv(&[r, r], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("delta,"));
        assert!(r.table().contains("T_min"));
    }

    fn constants() -> impl Strategy<Value = BoundConstants> {
        (0.1f64..10.0, 0.0f64..5.0, 0.1f64..5.0, 0.05f64..1.0, 0.1f64..3.0, 0.05f64..0.95, 0.1f64..1.0, 0.1f64..1.0)
            .prop_map(|(c_tail, c_lprime, lprime, c, tau, eps_frac, s1, s2)| {
                let total = s1 + s2 + 1.0;
                BoundConstants {
                    c_tail,
                    c_lprime,
                    lprime,
                    l: 1.0,
                    c,
                    r: 1.0,
                    tau,
                    eps: tau * eps_frac,
                    splits: (s1 / total, s2 / total, 1.0 - s1 / total - s2 / total),
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip_meets_budget(k in constants(), delta in 1e-4f64..0.04) {
            if let Ok(r) = verify_corollary(&k, delta) {
                prop_assert!(r.breakdown.total <= r.sqrt_delta + 1e-12);
            } else {
                // only a too-large delta for the tail split may refuse
                prop_assert!(k.splits.0 * k.splits.0 * delta / (k.c_tail * k.c_tail) >= 1.0);
            }
        }

        #[test]
        fn terms_are_monotone(k in constants(), s in 0.01f64..0.49, e in 1e-6f64..0.1, t in 1u64..10_000) {
            let base = failure_bound(&k, s, e, t).unwrap();
            let hotter = failure_bound(&k, 2.0 * s, e, t).unwrap();
            let looser = failure_bound(&k, s, 2.0 * e, t).unwrap();
            let finer = failure_bound(&k, s, e, 2 * t).unwrap();
            prop_assert!(hotter.temperature_term >= base.temperature_term);
            prop_assert!(looser.estimation_term > base.estimation_term);
            prop_assert!(finer.discretisation_term < base.discretisation_term);
        }
    }
}
