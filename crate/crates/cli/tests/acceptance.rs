//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when a criterion fails that is not listed in
//! `DOCUMENTED_FAILURES`.
//!
//! The ADULT table is read from `data/adult/adult.csv` at the workspace root
//! unless `DPDG_ADULT_CSV` points elsewhere.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dpdg_cli::commands::sweep::{run_sweep_cells, SweepResult};
use dpdg_cli::config::{read_sweep_file, DataSource, SweepFile};
use dpdg_core::data::Dataset;
use dpdg_core::mechanisms::{
    calibration_bound_check, dg_exact, dg_monte_carlo, reduced_mechanism, rr_majority_learner,
    rr_mean_learner, verify_dp, TestFn, ToyDistribution,
};
use dpdg_core::models::{Arch, ModelParams};
use dpdg_core::numerics::{Matrix, RngStream};
use dpdg_core::privacy::{
    dg_bound_cmi, gdp_mu_dpis, gdp_mu_dpsgd, gdp_to_delta, gdp_to_eps, tv_from_dp,
    tv_from_dp_loose, DpBudget, GdpGuarantee,
};
use dpdg_core::sampling::{is_sampling_probs, poisson_sample, SamplingPlan};
use dpdg_core::trainers::{
    clip_grad, train, Algorithm, ModelSpec, PgdConfig, TrainConfig, TrainData,
};

/// Criteria that cannot be met at desk scale; see the README. They still
/// print FAIL when they fail.
const DOCUMENTED_FAILURES: &[u32] = &[12];

type Check = fn() -> Result<String, String>;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config_path(name: &str) -> PathBuf {
    workspace_root().join("configs").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tightness() -> Result<String, String> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for eps in [0.01, 0.1, 0.5, 1.0, 2.0, 3.0] {
        for delta in [0.0, 0.01, 0.1] {
            let m = reduced_mechanism(eps, delta).map_err(|e| e.to_string())?;
            let closed = (f64::exp(eps) - 1.0 + 2.0 * delta) / (f64::exp(eps) + 1.0);
            worst = worst.max((m.tv() - closed).abs());
            let at = DpBudget::new(eps, delta).unwrap();
            let below = DpBudget::new(0.99 * eps, 0.99 * delta).unwrap();
            ensure(verify_dp(&m, at).unwrap(), || {
                format!("not ({eps}, {delta})-DP")
            })?;
            ensure(!verify_dp(&m, below).unwrap(), || {
                format!("({eps}, {delta}) is not tight")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-12, || format!("TV off by {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "max |TV - closed form| = {worst:.1e}, 18 budgets exact, {elapsed:.2?}"
    ))
}

fn bound_ordering() -> Result<String, String> {
    for i in 1..=500 {
        let eps = 0.01 * f64::from(i);
        let b = DpBudget::pure(eps).unwrap();
        let (tight, loose, cmi) = (tv_from_dp(b), tv_from_dp_loose(b), dg_bound_cmi(eps));
        ensure((tight - (eps / 2.0).tanh()).abs() <= 1e-12, || {
            format!("tight != tanh(eps/2) at {eps}")
        })?;
        ensure(
            (loose - eps.exp_m1()).abs() <= 1e-12 * loose.max(1.0),
            || format!("loose != e^eps - 1 at {eps}"),
        )?;
        ensure(cmi == eps, || format!("cmi line != eps at {eps}"))?;
        ensure(tight <= cmi && tight <= loose, || {
            format!("ordering broken at {eps}")
        })?;
        if eps > 0.01 + 1e-12 {
            ensure(tight < cmi && tight < loose, || {
                format!("not strict at {eps}")
            })?;
        }
    }
    Ok("tight < min(cmi, loose) on 500 points of (0, 5]".into())
}

/// Train/test zero-one gap of randomized-response majority on Bernoulli(½)
/// labels, by enumerating the 2^n label vectors and the flip coin.
fn rr_majority_gap_oracle(eps: f64, n: usize) -> f64 {
    let flip = 1.0 / (1.0 + eps.exp());
    let mut train = 0.0;
    for mask in 0u32..(1 << n) {
        let ones = mask.count_ones() as f64;
        let maj = if 2.0 * ones > n as f64 { 1.0 } else { 0.0 };
        let err = |out: f64| {
            if out == 1.0 {
                (n as f64 - ones) / n as f64
            } else {
                ones / n as f64
            }
        };
        train += 0.5f64.powi(n as i32) * ((1.0 - flip) * err(maj) + flip * err(1.0 - maj));
    }
    (train - 0.5).abs()
}

fn toy_dg() -> Result<String, String> {
    let start = Instant::now();
    let eps = 3f64.ln();
    let learner = rr_majority_learner(eps, 3).map_err(|e| e.to_string())?;
    let dist = ToyDistribution::single(0.5).unwrap();
    let oracle = rr_majority_gap_oracle(eps, 3);
    ensure((oracle - 0.125).abs() < 1e-15, || {
        format!("oracle gives {oracle}")
    })?;
    let exact = dg_exact(&learner, &dist, TestFn::ZeroOneLoss).map_err(|e| e.to_string())?;
    ensure((exact - oracle).abs() <= 1e-12, || {
        format!("dg_exact {exact} vs {oracle}")
    })?;
    ensure(exact <= (eps / 2.0).tanh(), || "above tanh(eps/2)".into())?;
    let mc = dg_monte_carlo(
        &learner,
        &dist,
        10_000,
        TestFn::ZeroOneLoss,
        &mut RngStream::new(3),
    )
    .unwrap();
    ensure((mc.gap() - oracle).abs() <= 3.0 * mc.se, || {
        format!("MC {:.4} +/- {:.4} vs {oracle}", mc.gap(), mc.se)
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "exact {exact:.6} <= tanh = 0.5, MC {:.4} +/- {:.4}, {elapsed:.2?}",
        mc.gap(),
        mc.se
    ))
}

fn calibration() -> Result<String, String> {
    let start = Instant::now();
    let learner = rr_mean_learner(1.0, 9).unwrap();
    let dist = ToyDistribution::single(0.7).unwrap();
    let c = calibration_bound_check(&learner, &dist, 0.25, 10_000, &mut RngStream::new(4))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(c.lhs <= c.delta / c.tau + 3.0 * c.se, || {
        format!("lhs {:.4} > delta/tau {:.4} + 3 SE", c.lhs, c.delta / c.tau)
    })?;
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "lhs {:.4} <= delta/tau {:.4} (SE {:.4}), {elapsed:.2?}",
        c.lhs,
        c.delta / c.tau,
        c.se
    ))
}

fn gdp_black_box() -> Result<String, String> {
    let mut rng = RngStream::new(5);
    for _ in 0..100 {
        let m = 1 + rng.below(5);
        let raw: Vec<f64> = (0..m).map(|_| 0.1 + rng.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let groups: Vec<usize> = (0..200).map(|i| i % m).collect();
        let pbar = 1e-4 + 0.02 * rng.uniform();
        let plan = is_sampling_probs(&groups, &q, pbar).map_err(|e| e.to_string())?;
        let sigma = 0.5 + 4.0 * rng.uniform();
        let steps = 1 + rng.below(10_000);
        let a = gdp_mu_dpis(&plan, sigma, steps).unwrap().mu;
        let b = gdp_mu_dpsgd(plan.p_star(), sigma, steps).unwrap().mu;
        ensure(a.to_bits() == b.to_bits(), || format!("{a} vs {b}"))?;
        let p_star = q
            .iter()
            .map(|&qg| pbar / (m as f64 * qg))
            .fold(0.0, f64::max);
        let formula = p_star * (steps as f64 * ((1.0 / (sigma * sigma)).exp() - 1.0)).sqrt();
        ensure((a - formula).abs() <= 1e-12 * formula, || {
            format!("mu {a} vs formula {formula}")
        })?;
    }
    let uniform = SamplingPlan::uniform(1000, 0.01).unwrap();
    let a = gdp_mu_dpis(&uniform, 1.1, 500).unwrap().mu;
    let b = gdp_mu_dpsgd(0.01, 1.1, 500).unwrap().mu;
    ensure(a.to_bits() == b.to_bits(), || "uniform plan differs".into())?;
    Ok("100 random plans bit-identical, uniform plan exact".into())
}

/// Φ by composite Simpson quadrature of the density on [-12, x].
fn phi_quadrature(x: f64) -> f64 {
    let (a, n) = (-12.0, 20_000);
    let h = (x - a) / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(a) + pdf(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(a + i as f64 * h);
    }
    s * h / 3.0
}

fn gdp_conversion() -> Result<String, String> {
    let d = gdp_to_delta(GdpGuarantee { mu: 1.0 }, 0.0);
    let oracle = 2.0 * phi_quadrature(0.5) - 1.0;
    ensure((d - oracle).abs() <= 1e-9, || {
        format!("{d} vs quadrature {oracle}")
    })?;
    ensure((d - 0.38292).abs() <= 1e-4, || format!("{d} vs 0.38292"))?;
    let mut worst = 0.0f64;
    for mu in [0.3, 0.8, 1.0, 2.0, 4.0] {
        for delta in [1e-6, 1e-5, 1e-3, 0.05] {
            let g = GdpGuarantee { mu };
            let eps = gdp_to_eps(g, delta).map_err(|e| e.to_string())?;
            worst = worst.max((gdp_to_delta(g, eps) - delta).abs());
            let eps_back = gdp_to_eps(g, gdp_to_delta(g, eps)).map_err(|e| e.to_string())?;
            worst = worst.max((eps_back - eps).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("round trip off by {worst:e}"))?;
    Ok(format!(
        "delta(1, 0) = {d:.6}, round-trip error {worst:.1e}"
    ))
}

fn central_difference(p: &ModelParams<f64>, batch: &[(Vec<f64>, usize)], h: f64) -> Vec<f64> {
    let loss = |theta: &[f64]| {
        let q = ModelParams::from_theta(p.arch, theta.to_vec()).unwrap();
        batch
            .iter()
            .map(|(x, y)| q.loss(x, *y).unwrap())
            .sum::<f64>()
            / batch.len() as f64
    };
    let mut theta = p.theta.clone();
    (0..theta.len())
        .map(|j| {
            let orig = theta[j];
            theta[j] = orig + h;
            let up = loss(&theta);
            theta[j] = orig - h;
            let down = loss(&theta);
            theta[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradients() -> Result<String, String> {
    let mut rng = RngStream::new(7);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let dim = 2 + rng.below(5);
        let classes = 2 + rng.below(2);
        let arch = if k % 2 == 0 {
            Arch::Logreg { dim, classes }
        } else {
            Arch::Mlp {
                dim,
                hidden: 3 + rng.below(4),
                classes,
            }
        };
        let theta: Vec<f64> = (0..arch.num_params()).map(|_| rng.normal()).collect();
        let p = ModelParams::from_theta(arch, theta).unwrap();
        let batch: Vec<(Vec<f64>, usize)> = (0..4)
            .map(|_| ((0..dim).map(|_| rng.normal()).collect(), rng.below(classes)))
            .collect();
        let mut analytic = vec![0.0; arch.num_params()];
        for (x, y) in &batch {
            let (_, g) = p.loss_and_grad(x, *y).map_err(|e| e.to_string())?;
            for (a, gi) in analytic.iter_mut().zip(g) {
                *a += gi / batch.len() as f64;
            }
        }
        let fd = central_difference(&p, &batch, 1e-6);
        for (a, f) in analytic.iter().zip(&fd) {
            worst = worst.max((a - f).abs() / f.abs().max(1e-3));
        }
    }
    ensure(worst < 1e-5, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "20 configs (logreg and MLP), max relative error {worst:.1e}"
    ))
}

fn clipping_and_sampling() -> Result<String, String> {
    let mut rng = RngStream::new(8);
    for _ in 0..1000 {
        let d = 1 + rng.below(20);
        let scale = 10f64.powf(4.0 * rng.uniform() - 2.0);
        let g: Vec<f64> = (0..d).map(|_| scale * rng.normal()).collect();
        let c = 0.01 + 5.0 * rng.uniform();
        let norm = clip_grad(&g, c).iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(norm <= c + 1e-12, || format!("clipped norm {norm} > {c}"))?;
    }
    let q = [0.7, 0.2, 0.1];
    let groups: Vec<usize> = (0..1000)
        .map(|i| {
            if i < 700 {
                0
            } else if i < 900 {
                1
            } else {
                2
            }
        })
        .collect();
    let pbar = 0.02;
    let plan = is_sampling_probs(&groups, &q, pbar).unwrap();
    let draws = 10_000;
    let mean = (0..draws)
        .map(|_| poisson_sample(&plan, &mut rng).len() as f64)
        .sum::<f64>()
        / draws as f64;
    let var: f64 = plan.probs().iter().map(|p| p * (1.0 - p)).sum();
    let se = (var / draws as f64).sqrt();
    let target = pbar * groups.len() as f64;
    ensure((mean - target).abs() <= 3.0 * se, || {
        format!("mean batch {mean} vs {target} (SE {se:.4})")
    })?;
    Ok(format!(
        "1000 clips within C, mean batch {mean:.3} vs {target} (SE {se:.3})"
    ))
}

fn toy_dataset(n: usize, groups: usize, seed: u64) -> Dataset<f64> {
    let mut rng = RngStream::new(seed);
    let dim = 3;
    let mut feats = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut gs = Vec::with_capacity(n);
    for i in 0..n {
        let y = rng.below(2);
        for j in 0..dim {
            feats.push(rng.normal() + if j == 0 { 2.0 * y as f64 - 1.0 } else { 0.0 });
        }
        labels.push(y);
        gs.push(i % groups);
    }
    Dataset::new(
        Matrix::from_vec(n, dim, feats).unwrap(),
        labels,
        gs,
        2,
        groups,
    )
    .unwrap()
}

fn run(ds: &Dataset<f64>, cfg: &TrainConfig, seed: u64) -> Result<(Vec<f64>, String), String> {
    let (p, rec) = train::<f64>(TrainData::new(ds, None), cfg, &RngStream::new(seed))
        .map_err(|e| e.to_string())?;
    Ok((p.theta, serde_json::to_string(&rec.trajectory).unwrap()))
}

fn reductions() -> Result<String, String> {
    let single = toy_dataset(300, 1, 9).with_group_probs(vec![1.0]).unwrap();
    let mut dp = TrainConfig::new(Algorithm::DpSgd, 0.3, 200);
    dp.pbar = Some(0.05);
    dp.clip = Some(1.0);
    dp.sigma = Some(1.3);
    dp.eval_every = Some(25);
    let mut dpis = dp.clone();
    dpis.algorithm = Algorithm::DpIsSgd;
    let (a, ta) = run(&single, &dp, 11)?;
    let (b, tb) = run(&single, &dpis, 11)?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(&a) == bits(&b) && ta == tb, || {
        "DP-IS-SGD with one group differs from DP-SGD".into()
    })?;

    let two = toy_dataset(300, 2, 10)
        .with_group_probs(vec![0.5, 0.5])
        .unwrap();
    let mut sgd = TrainConfig::new(Algorithm::Sgd, 0.2, 300);
    sgd.batch_size = Some(16);
    sgd.sigma_n = Some(0.0);
    sgd.model = ModelSpec::Mlp { hidden: 4 };
    let mut iw = sgd.clone();
    iw.algorithm = Algorithm::IwSgd;
    let (s, _) = run(&two, &sgd, 12)?;
    let (w, _) = run(&two, &iw, 12)?;
    let iw_err = s
        .iter()
        .zip(&w)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure(iw_err <= 1e-12, || {
        format!("IW with unit weights differs by {iw_err:e}")
    })?;

    let mut adv = sgd.clone();
    adv.algorithm = Algorithm::AdvPgd;
    adv.pgd = Some(PgdConfig {
        gamma: 0.0,
        attack_steps: 3,
        attack_step_size: 0.1,
        random_start: false,
    });
    let (v, _) = run(&two, &adv, 12)?;
    let adv_err = s
        .iter()
        .zip(&v)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure(adv_err <= 1e-9, || {
        format!("ADV with gamma = 0 differs by {adv_err:e}")
    })?;
    Ok(format!(
        "DP-IS(m=1) == DP-SGD bitwise, IW err {iw_err:.1e}, ADV err {adv_err:.1e}"
    ))
}

fn load_sweep(name: &str) -> Result<SweepFile, String> {
    read_sweep_file(&config_path(name)).map_err(|e| e.to_string())
}

fn summary(r: &SweepResult, level: usize, metric: &str) -> Result<(f64, f64), String> {
    r.summary_of(level, metric)
        .map(|s| (s.mean, s.se))
        .ok_or_else(|| format!("missing {metric} at level {level}"))
}

fn adult() -> Result<String, String> {
    let mut file = load_sweep("adult_algorithms_sweep.json")?;
    if let Some(p) = std::env::var_os("DPDG_ADULT_CSV") {
        if let DataSource::Adult { path, .. } = &mut file.data {
            *path = PathBuf::from(p);
        }
    }
    ensure(file.seeds.len() == 5, || "expected 5 seeds".into())?;
    let r = run_sweep_cells(&file).map_err(|e| e.to_string())?;
    let (sgd_acc, _) = summary(&r, 0, "accuracy_test")?;
    let (dp_eps, _) = summary(&r, 1, "eps")?;
    let (dp_disp, _) = summary(&r, 1, "disparity_test")?;
    let (is_eps, _) = summary(&r, 2, "eps")?;
    let (is_disp, _) = summary(&r, 2, "disparity_test")?;
    let (is_acc, _) = summary(&r, 2, "accuracy_test")?;
    let detail = format!(
        "SGD acc {sgd_acc:.3}; DP-SGD eps {dp_eps:.4} disp {dp_disp:.3}; DP-IS-SGD eps {is_eps:.4} disp {is_disp:.3} acc {is_acc:.3}"
    );
    let checks = [
        (
            (sgd_acc - 0.836).abs() <= 0.02,
            "SGD accuracy outside 0.836 +/- 0.02",
        ),
        (
            (0.60..=0.72).contains(&dp_eps),
            "DP-SGD eps outside [0.60, 0.72]",
        ),
        (dp_disp >= 0.6, "DP-SGD disparity below 0.6"),
        (
            (0.63..=0.78).contains(&is_eps),
            "DP-IS-SGD eps outside [0.63, 0.78]",
        ),
        (is_disp <= 0.45, "DP-IS-SGD disparity above 0.45"),
        (is_acc >= 0.70, "DP-IS-SGD accuracy below 0.70"),
        (
            (dp_disp - 0.852).abs() <= 0.1,
            "DP-SGD disparity not within 0.1 of 0.852",
        ),
        (
            (is_disp - 0.246).abs() <= 0.1,
            "DP-IS-SGD disparity not within 0.1 of 0.246",
        ),
        (
            (is_acc - 0.766).abs() <= 0.05,
            "DP-IS-SGD accuracy not within 0.05 of 0.766",
        ),
        (
            dp_disp - is_disp >= 0.3,
            "IS does not lower disparity by 0.3",
        ),
    ];
    for (ok, msg) in checks {
        ensure(ok, || format!("{msg}: {detail}"))?;
    }
    Ok(detail)
}

fn eps_direction() -> Result<String, String> {
    let file = load_sweep("mixture_eps_sweep.json")?;
    let r = run_sweep_cells(&file).map_err(|e| e.to_string())?;
    let levels: Vec<(f64, f64)> = (0..3)
        .map(|l| summary(&r, l, "wggap"))
        .collect::<Result<_, _>>()?;
    let detail = levels
        .iter()
        .zip(["no-DP", "eps=8", "eps=1"])
        .map(|((m, s), name)| format!("{name} {m:.3}+/-{s:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    for w in levels.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        ensure(m1 <= m0 + 2.0 * (s0 * s0 + s1 * s1).sqrt(), || {
            format!("wggap increases: {detail}")
        })?;
    }
    Ok(format!("wggap {detail}"))
}

fn noise_direction() -> Result<String, String> {
    let file = load_sweep("margin_noise_sweep.json")?;
    let r = run_sweep_cells(&file).map_err(|e| e.to_string())?;
    let clean = r.values(0, "robust_gap");
    let noisy = r.values(1, "robust_gap");
    ensure(clean.len() == 5 && noisy.len() == 5, || {
        "expected 5 paired seeds".into()
    })?;
    let wins = clean.iter().zip(&noisy).filter(|(c, n)| n < c).count();
    let detail = format!(
        "noisy gap smaller in {wins}/5 seeds (sigma_n=0: {:?}, 5e-4: {:?})",
        clean.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
        noisy.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
    );
    ensure(wins >= 4, || detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [(u32, &str, Check); 12] = [
        (1, "reduced-mechanism tightness", tightness),
        (2, "bound ordering", bound_ordering),
        (3, "DG of enumerable learner", toy_dg),
        (4, "calibration bound", calibration),
        (5, "GDP black box", gdp_black_box),
        (6, "GDP conversion", gdp_conversion),
        (7, "gradient correctness", gradients),
        (8, "clipping and sampling", clipping_and_sampling),
        (9, "reduction lattice", reductions),
        (10, "ADULT reproduction", adult),
        (11, "eps vs worst-group gap", eps_direction),
        (12, "noise vs robust gap", noise_direction),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => {
                passed += 1;
                println!("criterion {id:>2} PASS  {name:<28} [{secs:6.2}s] {detail}");
            }
            Err(detail) => {
                let note = if DOCUMENTED_FAILURES.contains(&id) {
                    " (documented)"
                } else {
                    unexpected.push(id);
                    ""
                };
                println!("criterion {id:>2} FAIL{note} {name:<28} [{secs:6.2}s] {detail}");
            }
        }
    }
    println!("acceptance: {passed}/12 pass");
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
