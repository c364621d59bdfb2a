//! Closed-form privacy and stability bounds plus a Gaussian-DP accountant.
//!
//! The accountant uses the central-limit approximation for Poisson-subsampled
//! Gaussian noise, μ = p·√(T·(e^{1/σ²} − 1)). For non-uniform subsampling only
//! the largest inclusion probability p* enters, which is why
//! [`gdp_mu_dpis`] delegates to [`gdp_mu_dpsgd`] unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::numerics::std_normal_cdf;
use crate::sampling::SamplingPlan;

pub const MU_FORMULA: &str = "CLT-approx: mu = p * sqrt(T * (exp(1/sigma^2) - 1))";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpBudget {
    pub eps: f64,
    pub delta: f64,
}

impl DpBudget {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return param_err(format!("eps must be nonnegative, got {eps}"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return param_err(format!("delta must lie in [0, 1], got {delta}"));
        }
        Ok(Self { eps, delta })
    }

    pub fn pure(eps: f64) -> Result<Self> {
        Self::new(eps, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpGuarantee {
    pub mu: f64,
}

/// Tight TV-stability parameter implied by (ε, δ)-DP:
/// (e^ε − 1 + 2δ) / (e^ε + 1).
pub fn tv_from_dp(b: DpBudget) -> f64 {
    if b.eps.is_infinite() {
        return 1.0;
    }
    let e = b.eps.exp();
    let tv = (b.eps.exp_m1() + 2.0 * b.delta) / (e + 1.0);
    debug_assert!((0.0..=1.0 + 1e-15).contains(&tv));
    tv
}

/// Loose bound e^ε − 1 + δ. Not capped; see [`is_vacuous`].
pub fn tv_from_dp_loose(b: DpBudget) -> f64 {
    b.eps.exp_m1() + b.delta
}

/// A TV/DG bound above one says nothing.
pub fn is_vacuous(bound: f64) -> bool {
    bound > 1.0
}

/// The conditional-mutual-information comparison line: the generalization
/// bound for (ε, 0)-DP is ε itself.
pub fn dg_bound_cmi(eps: f64) -> f64 {
    eps
}

/// Amplification of an (ε, δ)-DP mechanism by Poisson subsampling with
/// per-example rates at most `p_star`: (ln(1 − p* + p* e^ε), p* δ).
pub fn amplify_subsampled_dp(b: DpBudget, p_star: f64) -> Result<DpBudget> {
    if !(0.0..=1.0).contains(&p_star) {
        return param_err(format!("p_star must lie in [0, 1], got {p_star}"));
    }
    let eps = (p_star * b.eps.exp_m1()).ln_1p();
    Ok(DpBudget {
        eps,
        delta: p_star * b.delta,
    })
}

/// μ-GDP of DP-SGD with sampling rate `pbar`, noise multiplier `sigma` and
/// `steps` noisy gradient steps. The clipping norm cancels.
pub fn gdp_mu_dpsgd(pbar: f64, sigma: f64, steps: usize) -> Result<GdpGuarantee> {
    if !(sigma > 0.0) {
        return param_err(format!("sigma must be positive, got {sigma}"));
    }
    if steps == 0 {
        return param_err("steps must be at least 1");
    }
    if !(0.0..=1.0).contains(&pbar) {
        return param_err(format!("sampling rate must lie in [0, 1], got {pbar}"));
    }
    let mu = pbar * (steps as f64 * (1.0 / (sigma * sigma)).exp_m1()).sqrt();
    Ok(GdpGuarantee { mu })
}

/// μ-GDP of DP-IS-SGD: the DP-SGD guarantee evaluated at p*.
pub fn gdp_mu_dpis(plan: &SamplingPlan, sigma: f64, steps: usize) -> Result<GdpGuarantee> {
    gdp_mu_dpsgd(plan.p_star(), sigma, steps)
}

/// δ(ε) = Φ(−ε/μ + μ/2) − e^ε Φ(−ε/μ − μ/2), clamped to [0, 1].
pub fn gdp_to_delta(g: GdpGuarantee, eps: f64) -> f64 {
    if g.mu <= 0.0 {
        return 0.0;
    }
    let mu = g.mu;
    let first = std_normal_cdf(-eps / mu + mu / 2.0);
    let tail = std_normal_cdf(-eps / mu - mu / 2.0);
    let second = if tail > 0.0 {
        (eps + tail.ln()).exp()
    } else {
        0.0
    };
    (first - second).clamp(0.0, 1.0)
}

/// Smallest ε ≥ 0 with δ(ε) ≤ `delta`, by bisection to 1e-10.
pub fn gdp_to_eps(g: GdpGuarantee, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return param_err(format!("delta must lie in (0, 1), got {delta}"));
    }
    if gdp_to_delta(g, 0.0) <= delta {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while gdp_to_delta(g, hi) > delta {
        lo = hi;
        hi *= 2.0;
        if hi > 700.0 {
            return param_err("eps exceeds the representable range for this mu");
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if gdp_to_delta(g, mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The μ whose (ε, δ) curve passes through `target`.
pub fn mu_for_budget(target: DpBudget) -> Result<GdpGuarantee> {
    if !(target.delta > 0.0 && target.delta < 1.0) {
        return param_err("target delta must lie in (0, 1)");
    }
    let at = |mu: f64| gdp_to_delta(GdpGuarantee { mu }, target.eps);
    let (mut lo, mut hi) = (0.0, 1.0);
    while at(hi) < target.delta {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return param_err("no mu reaches the target budget");
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < target.delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GdpGuarantee { mu: lo })
}

/// Noise multiplier that makes `steps` steps at rate `p` exactly `target`-DP
/// under the accountant.
pub fn sigma_for_budget(p: f64, steps: usize, target: DpBudget) -> Result<f64> {
    if !(p > 0.0) || steps == 0 {
        return param_err("rate and steps must be positive");
    }
    let mu = mu_for_budget(target)?.mu;
    let ratio = mu / (p * (steps as f64).sqrt());
    Ok(1.0 / (ratio * ratio).ln_1p().sqrt())
}

/// Kairouz et al. hypothesis-testing region: a test with type I error α and
/// type II error β is possible under (ε, δ)-DP iff α + e^ε β ≥ 1 − δ and
/// e^ε α + β ≥ 1 − δ.
pub fn ht_region_ok(alpha: f64, beta: f64, b: DpBudget) -> bool {
    let e = b.eps.exp();
    let floor = 1.0 - b.delta - 1e-12;
    alpha + e * beta >= floor && e * alpha + beta >= floor
}

/// Privacy outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub budget: DpBudget,
    pub gdp: Option<GdpGuarantee>,
    pub tv_stability: f64,
    pub dg_bound: f64,
    pub accounting_steps: usize,
    /// Expected passes over the data, `steps · pbar`.
    pub epochs_equivalent: f64,
    pub sampling_rate: f64,
    pub sigma: f64,
    /// Which formula produced each field.
    pub provenance: BTreeMap<String, String>,
}

impl PrivacyReport {
    /// Report for a Poisson-subsampled Gaussian run with maximal inclusion
    /// probability `p_star` and nominal rate `pbar`, evaluated at `delta`.
    pub fn for_gaussian_run(
        p_star: f64,
        pbar: f64,
        sigma: f64,
        steps: usize,
        delta: f64,
    ) -> Result<Self> {
        let gdp = gdp_mu_dpsgd(p_star, sigma, steps)?;
        let eps = gdp_to_eps(gdp, delta)?;
        let budget = DpBudget::new(eps, delta)?;
        let tv = tv_from_dp(budget);
        let mut provenance = BTreeMap::new();
        provenance.insert("gdp".into(), format!("{MU_FORMULA}, p = p* = {p_star}"));
        provenance.insert(
            "budget".into(),
            "eps = min{eps : Phi(-eps/mu + mu/2) - e^eps Phi(-eps/mu - mu/2) <= delta}".into(),
        );
        provenance.insert(
            "tv_stability".into(),
            "tight: (e^eps - 1 + 2 delta)/(e^eps + 1)".into(),
        );
        provenance.insert(
            "dg_bound".into(),
            "TV stability implies DG with the same parameter".into(),
        );
        Ok(Self {
            budget,
            gdp: Some(gdp),
            tv_stability: tv,
            dg_bound: tv,
            accounting_steps: steps,
            epochs_equivalent: steps as f64 * pbar,
            sampling_rate: p_star,
            sigma,
            provenance,
        })
    }
}
