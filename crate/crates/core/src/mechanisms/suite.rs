//! Numerical checks of the generalization and privacy bounds, each reported
//! as a named claim with its two sides and tolerance.

use serde::{Deserialize, Serialize};

use super::toy::{
    calibration_bound_check, dg_exact, dg_monte_carlo, rr_majority_learner, rr_mean_learner,
    strong_dg_samples, subgroup_dg_monte_carlo, TestFn, ToyDistribution,
};
use super::{error_pairs, reduced_mechanism, verify_dp, DiscreteMechanism};
use crate::error::Result;
use crate::numerics::{mean_se, RngStream};
use crate::privacy::{
    amplify_subsampled_dp, dg_bound_cmi, gdp_mu_dpis, gdp_mu_dpsgd, gdp_to_delta, gdp_to_eps,
    ht_region_ok, tv_from_dp, tv_from_dp_loose, DpBudget, GdpGuarantee,
};
use crate::sampling::is_sampling_probs;

const EPS_GRID: [f64; 6] = [0.01, 0.1, 0.5, 1.0, 2.0, 3.0];
const DELTA_GRID: [f64; 3] = [0.0, 0.01, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    /// Multiplies ε on the budget side of the tightness claims; 1 checks the
    /// true budget, anything smaller must make them fail.
    pub tightness_eps_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10_000,
            tightness_eps_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub id: String,
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub claims: Vec<ClaimResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&ClaimResult> {
        self.claims.iter().find(|c| !c.pass)
    }
}

fn claim(
    id: &str,
    description: &str,
    lhs: f64,
    rhs: f64,
    tolerance: f64,
    pass: bool,
) -> ClaimResult {
    ClaimResult {
        id: id.into(),
        description: description.into(),
        lhs,
        rhs,
        tolerance,
        pass,
    }
}

/// Runs every claim. Claims are independent: each Monte-Carlo claim draws
/// from its own stream derived from `opts.seed`.
pub fn verify_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    let root = RngStream::new(opts.seed);
    let mut claims = Vec::new();
    let scale = opts.tightness_eps_scale;

    // reduced mechanism attains the tight TV bound
    let mut worst = 0.0f64;
    let mut worst_pair = (0.0, 0.0);
    for &eps in &EPS_GRID {
        for &delta in &DELTA_GRID {
            let m = reduced_mechanism(eps, delta)?;
            let err = (m.tv() - tv_from_dp(DpBudget::new(scale * eps, delta)?)).abs();
            if err > worst {
                worst = err;
                worst_pair = (m.tv(), tv_from_dp(DpBudget::new(scale * eps, delta)?));
            }
        }
    }
    claims.push(claim(
        "tv_tightness",
        "TV distance of the reduced mechanism equals (e^eps - 1 + 2 delta)/(e^eps + 1)",
        worst_pair.0,
        worst_pair.1,
        1e-12,
        worst <= 1e-12,
    ));

    // the reduced mechanism is exactly (eps, delta)-DP and no better
    let mut dp_ok = true;
    let mut below_fails = true;
    for &eps in &EPS_GRID {
        for &delta in &DELTA_GRID {
            let m = reduced_mechanism(eps, delta)?;
            dp_ok &= verify_dp(&m, DpBudget::new(scale * eps, delta)?)?;
            below_fails &= !verify_dp(&m, DpBudget::new(0.99 * eps, 0.99 * delta)?)?;
        }
    }
    claims.push(claim(
        "reduced_is_dp",
        "reduced mechanism satisfies (eps, delta)-DP on every subset",
        f64::from(u8::from(dp_ok)),
        1.0,
        0.0,
        dp_ok,
    ));
    claims.push(claim(
        "reduced_is_tight",
        "reduced mechanism violates (0.99 eps, 0.99 delta)-DP",
        f64::from(u8::from(below_fails)),
        1.0,
        0.0,
        below_fails,
    ));

    // every test of the reduced mechanism lies in the hypothesis-testing region
    let mut region_ok = true;
    for &eps in &EPS_GRID {
        for &delta in &DELTA_GRID {
            let b = DpBudget::new(eps, delta)?;
            region_ok &= error_pairs(&reduced_mechanism(eps, delta)?)?
                .into_iter()
                .all(|(a, be)| ht_region_ok(a, be, b));
        }
    }
    claims.push(claim(
        "ht_region",
        "all (alpha, beta) of the reduced mechanism satisfy alpha + e^eps beta >= 1 - delta and symmetrically",
        f64::from(u8::from(region_ok)),
        1.0,
        1e-12,
        region_ok,
    ));

    // DP implies the tight TV bound on random mechanisms
    let mut rng = root.derive(1);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    while checked < 500 {
        let k = 2 + rng.below(5);
        let draw = |rng: &mut RngStream| {
            let raw: Vec<f64> = (0..k).map(|_| -rng.uniform().max(1e-300).ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let m = DiscreteMechanism::new(draw(&mut rng), draw(&mut rng))?;
        let b = DpBudget::new(3.0 * rng.uniform(), 0.3 * rng.uniform())?;
        if verify_dp(&m, b)? {
            worst_excess = worst_excess.max(m.tv() - tv_from_dp(b));
            checked += 1;
        }
    }
    claims.push(claim(
        "dp_implies_tv",
        "max over 500 random DP mechanisms of TV minus the tight bound",
        worst_excess,
        0.0,
        1e-12,
        worst_excess <= 1e-12,
    ));

    // bound ordering on (0, 5], delta = 0
    let mut order_ok = true;
    for i in 1..=500 {
        let eps = 0.01 * f64::from(i);
        let b = DpBudget::pure(eps)?;
        let (t, l, c) = (tv_from_dp(b), tv_from_dp_loose(b), dg_bound_cmi(eps));
        order_ok &= t <= c && t <= l;
        if eps > 0.01 {
            order_ok &= t < c && t < l;
        }
    }
    claims.push(claim(
        "bound_ordering",
        "tight bound below the loose bound and the CMI line on eps in (0, 5]",
        f64::from(u8::from(order_ok)),
        1.0,
        0.0,
        order_ok,
    ));

    // DG of the randomized-response majority learner
    let eps = 3f64.ln();
    let learner = rr_majority_learner(eps, 3)?;
    let half = ToyDistribution::single(0.5)?;
    let exact = dg_exact(&learner, &half, TestFn::ZeroOneLoss)?;
    let bound = tv_from_dp(DpBudget::pure(eps)?);
    claims.push(claim(
        "dg_exact_below_tv",
        "exact DG gap of the RR majority learner (eps = ln 3, n = 3) is below tanh(eps/2)",
        exact,
        bound,
        1e-12,
        exact <= bound + 1e-12 && (exact - 0.125).abs() < 1e-12,
    ));
    let mc = dg_monte_carlo(
        &learner,
        &half,
        opts.trials,
        TestFn::ZeroOneLoss,
        &mut root.derive(2),
    )?;
    claims.push(claim(
        "dg_monte_carlo",
        "Monte-Carlo DG estimate agrees with enumeration",
        mc.gap(),
        exact,
        3.0 * mc.se,
        (mc.gap() - exact).abs() <= 3.0 * mc.se,
    ));

    // strong DG and its Markov tail
    let learner5 = rr_majority_learner(1.0, 5)?;
    let samples = strong_dg_samples(
        &learner5,
        &half,
        opts.trials,
        TestFn::ZeroOneLoss,
        &mut root.derive(3),
    )?;
    let (strong, _) = mean_se(&samples);
    let lambda = 4.0;
    let tail: Vec<f64> = samples
        .iter()
        .map(|&x| f64::from(u8::from(x > lambda * strong)))
        .collect();
    let (frac, se) = mean_se(&tail);
    claims.push(claim(
        "strong_dg_markov",
        "fraction of datasets with gap above 4x the strong-DG value is at most 1/4",
        frac,
        1.0 / lambda,
        3.0 * se,
        frac <= 1.0 / lambda + 3.0 * se,
    ));

    // subgroup DG on a two-group mixture
    let mixture = ToyDistribution::new(vec![0.8, 0.2], vec![0.3, 0.9])?;
    let sub = subgroup_dg_monte_carlo(
        &learner5,
        &mixture,
        1,
        opts.trials,
        TestFn::ZeroOneLoss,
        &mut root.derive(4),
    )?;
    let sub_bound = tv_from_dp(DpBudget::pure(1.0)?);
    claims.push(claim(
        "subgroup_dg",
        "minority-group DG gap of an eps = 1 learner is below tanh(1/2)",
        sub.gap(),
        sub_bound,
        3.0 * sub.se,
        sub.gap() <= sub_bound + 3.0 * sub.se,
    ));

    // calibration generalization
    let cal = calibration_bound_check(
        &rr_mean_learner(1.0, 9)?,
        &ToyDistribution::single(0.7)?,
        0.25,
        opts.trials,
        &mut root.derive(5),
    )?;
    claims.push(claim(
        "calibration_gap",
        "train/test binned calibration gap difference is below delta/tau (tau = 0.25)",
        cal.lhs,
        cal.rhs,
        3.0 * cal.se,
        cal.pass,
    ));

    // accountant
    let d = gdp_to_delta(GdpGuarantee { mu: 1.0 }, 0.0);
    claims.push(claim(
        "gdp_conversion",
        "delta(eps = 0) of 1-GDP is 2 Phi(1/2) - 1",
        d,
        0.38292,
        1e-4,
        (d - 0.38292).abs() <= 1e-4,
    ));
    let mut rng = root.derive(6);
    let mut gdp_ok = true;
    for _ in 0..100 {
        let m = 1 + rng.below(6);
        let raw: Vec<f64> = (0..m).map(|_| 0.2 + rng.uniform()).collect();
        let s: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let groups: Vec<usize> = (0..50).map(|i| i % m).collect();
        let pbar = 0.01 * rng.uniform() + 1e-4;
        let plan = is_sampling_probs(&groups, &q, pbar)?;
        let sigma = 0.5 + 3.0 * rng.uniform();
        let steps = 1 + rng.below(5000);
        gdp_ok &= gdp_mu_dpis(&plan, sigma, steps)?.mu.to_bits()
            == gdp_mu_dpsgd(plan.p_star(), sigma, steps)?.mu.to_bits();
    }
    claims.push(claim(
        "gdp_black_box",
        "non-uniform Poisson accountant equals the uniform one at p*",
        f64::from(u8::from(gdp_ok)),
        1.0,
        0.0,
        gdp_ok,
    ));
    let g = GdpGuarantee { mu: 0.8 };
    let e = gdp_to_eps(g, 1e-5)?;
    let back = gdp_to_delta(g, e);
    claims.push(claim(
        "gdp_round_trip",
        "delta(eps(delta)) recovers delta",
        back,
        1e-5,
        1e-6,
        (back - 1e-5).abs() <= 1e-6,
    ));
    let b = DpBudget::new(1.0, 1e-5)?;
    let amp = amplify_subsampled_dp(b, 0.01)?;
    claims.push(claim(
        "amplification",
        "subsampling at rate 0.01 shrinks (1, 1e-5)-DP",
        amp.eps,
        b.eps,
        0.0,
        amp.eps < b.eps && amp.delta < b.delta,
    ));

    Ok(VerifyReport {
        options: *opts,
        claims,
    })
}
