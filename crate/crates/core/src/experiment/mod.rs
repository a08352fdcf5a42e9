//! Config-driven experiment runner: one table row per sweep point, analytic
//! columns always, Monte Carlo columns (with standard errors) when `shots > 0`.

mod config;
mod table;
mod verify;

pub use config::{ExperimentConfig, Params, Protocol, Sweep};
pub use table::{Column, ResultTable, Row, TableMetadata, MC_PREFIX, SE_SUFFIX};
pub use verify::{run_verify, CheckResult, CheckStatus};

use rand::Rng;

use crate::detection::RngStream;
use crate::error::{UiError, UiResult};
use crate::noise::{
    averaged_rates_closed, gaussian_integral_im, gaussian_integral_numeric_m1,
    gaussian_integral_recursive, mc_rates_with,
};
use crate::optics::Amplitude;
use crate::optimality::{optimize_lambda1, two_detector_p, two_detector_p_nominal, LambdaOptimum};
use crate::parallel::{map_ordered, map_replicas, Execution};
use crate::protocols::{
    analytic_multi_ref_p, analytic_two_ref, build_multi_ref_setup, build_two_ref_setup,
    weak_ui_frequency, weak_ui_success_p, Hypothesis, OutcomeCounts, UISetup,
};
use crate::recovery::{
    compare_strategies, cumulative_success, run_recovery_rounds, same_unknown_second_round,
    LambdaRecursion,
};
use crate::stats::Estimate;

/// Upper bound on sweep points, to catch typos like `steps: 1e9`.
pub const MAX_SWEEP_STEPS: usize = 100_000;

/// Runs `cfg` with the default execution mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> UiResult<ResultTable> {
    run_experiment_with(Execution::default(), cfg)
}

/// Runs `cfg`; the table is identical for every `exec`.
pub fn run_experiment_with(exec: Execution, cfg: &ExperimentConfig) -> UiResult<ResultTable> {
    cfg.validate()?;
    let (axis, points) = match &cfg.sweep {
        Some(s) => {
            if s.steps > MAX_SWEEP_STEPS {
                return Err(UiError::config(
                    "sweep.steps",
                    format!("at most {MAX_SWEEP_STEPS} steps"),
                ));
            }
            (
                s.parameter.clone(),
                s.points().into_iter().map(Some).collect(),
            )
        }
        None => (cfg.protocol.sweepable()[0].to_string(), vec![None]),
    };
    let indexed: Vec<(u64, Option<f64>)> = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| (i as u64, p))
        .collect();
    let rows = map_ordered(exec, &indexed, |&(i, value)| {
        let mut params = Params::new(&cfg.parameters);
        if let Some(v) = value {
            params = params.with_override(&axis, v);
        }
        let ctx = PointCtx {
            exec,
            shots: cfg.shots,
            seed: point_seed(cfg.seed, i),
            axis: &axis,
        };
        evaluate(cfg.protocol, &params, &ctx)
    });
    let rows = rows.into_iter().collect::<UiResult<Vec<_>>>()?;
    ResultTable::from_rows(cfg.clone(), rows)
}

/// SplitMix64 finaliser, used to give every sweep point and sub-run its own seed.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn point_seed(seed: u64, index: u64) -> u64 {
    mix_seed(seed ^ mix_seed(index))
}

fn sub_seed(seed: u64, part: u64) -> u64 {
    mix_seed(seed.wrapping_add(part.wrapping_mul(0xd1b5_4a32_d192_ed03)))
}

struct PointCtx<'a> {
    exec: Execution,
    shots: u64,
    seed: u64,
    axis: &'a str,
}

impl PointCtx<'_> {
    fn mc(&self) -> bool {
        self.shots > 0
    }
}

fn evaluate(protocol: Protocol, p: &Params, ctx: &PointCtx) -> UiResult<Row> {
    let mut row = Row::default();
    match protocol {
        Protocol::TwoRef => two_ref(p, ctx, &mut row)?,
        Protocol::MultiRef => multi_ref(p, ctx, &mut row)?,
        Protocol::Weak => weak(p, ctx, &mut row)?,
        Protocol::RecoveryRounds => recovery_rounds(p, ctx, &mut row)?,
        Protocol::SameUnknown => same_unknown(p, ctx, &mut row)?,
        Protocol::SplittingCompare => splitting_compare(p, &mut row)?,
        Protocol::NoiseRates => noise_rates(p, ctx, &mut row)?,
        Protocol::OptimalitySweep => optimality_sweep(p, &mut row)?,
        Protocol::GaussianIntegralCheck => gaussian_check(p, ctx, &mut row)?,
    }
    Ok(row)
}

fn delta_refs(p: &Params) -> UiResult<[Amplitude; 2]> {
    let delta = p.f64_or("delta", 1.0)?;
    if delta.is_nan() || delta < 0.0 {
        return Err(UiError::config(
            "parameters.delta",
            format!("must be >= 0, got {delta}"),
        ));
    }
    Ok([Amplitude::new(0.0, 0.0), Amplitude::new(delta, 0.0)])
}

fn recursion(p: &Params) -> UiResult<LambdaRecursion> {
    let name = p.string_or("recursion", "network")?;
    serde_json::from_value(serde_json::Value::String(name.clone())).map_err(|_| {
        UiError::config(
            "parameters.recursion",
            format!("expected `network` or `nominal`, got `{name}`"),
        )
    })
}

fn rate(counts: &OutcomeCounts, hits: u64) -> Estimate {
    Estimate::proportion(hits, counts.total())
}

/// Success and error estimates pooled over equally likely hypotheses.
fn pooled(setup: &UISetup, refs: &[Amplitude], ctx: &PointCtx) -> UiResult<(Estimate, Estimate)> {
    let mut pool = OutcomeCounts::new(refs.len());
    let (mut correct, mut wrong) = (0, 0);
    for k in 1..=refs.len() {
        let hyp = Hypothesis::new(k, refs.to_vec())?;
        let counts =
            setup.sample_outcomes_with(ctx.exec, &hyp, ctx.shots, sub_seed(ctx.seed, k as u64))?;
        correct += counts.correct(k);
        wrong += counts.wrong(k);
        pool.merge(&counts);
    }
    Ok((rate(&pool, correct), rate(&pool, wrong)))
}

fn two_ref(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let n_a = p.usize_or("n_a", 1)?;
    let n_b = p.usize_or("n_b", 1)?;
    let n_c = p.usize_or("n_c", 1)?;
    let t1 = p.f64_or("t1", 0.5)?;
    let refs = if p.has("alpha1") || p.has("alpha2") {
        if ctx.axis == "delta" && p.has("delta") {
            return Err(UiError::config(
                "parameters.delta",
                "give either delta or alpha1/alpha2",
            ));
        }
        [p.amp("alpha1")?, p.amp("alpha2")?]
    } else {
        delta_refs(p)?
    };
    let priors = p.f64_list_or("priors", &[0.5, 0.5])?;
    let priors: [f64; 2] = priors
        .try_into()
        .map_err(|_| UiError::config("parameters.priors", "expected two numbers"))?;
    let ana = analytic_two_ref(
        n_a as f64, n_b as f64, n_c as f64, t1, refs[0], refs[1], priors,
    )?;
    row.push("t1", t1)
        .push("delta", (refs[0] - refs[1]).norm())
        .push("p1", ana.p1)
        .push("p2", ana.p2)
        .push("p_total", ana.total);
    if ctx.mc() {
        let setup = build_two_ref_setup(n_a, n_b, n_c, t1)?;
        let mut ests = Vec::new();
        let mut wrong = 0;
        for k in 1..=2 {
            let hyp = Hypothesis::new(k, refs.to_vec())?;
            let c = setup.sample_outcomes_with(
                ctx.exec,
                &hyp,
                ctx.shots,
                sub_seed(ctx.seed, k as u64),
            )?;
            wrong += c.wrong(k);
            ests.push(rate(&c, c.correct(k)));
        }
        let total = Estimate {
            mean: priors[0] * ests[0].mean + priors[1] * ests[1].mean,
            std_err: (priors[0].powi(2) * ests[0].std_err.powi(2)
                + priors[1].powi(2) * ests[1].std_err.powi(2))
            .sqrt(),
            trials: 2 * ctx.shots,
        };
        row.push_estimate("p1", ests[0])
            .push_estimate("p2", ests[1])
            .push_estimate("p_total", total)
            .push_estimate("error", Estimate::proportion(wrong, 2 * ctx.shots));
    }
    Ok(())
}

fn multi_ref(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let m = p.usize_or("m", 3)?;
    let n_a = p.usize_or("n_a", 1)?;
    let n_b = p.usize_or("n_b", 1)?;
    let scale = p.f64_or("scale", 1.0)?;
    let base = if p.has("ref_amps") {
        p.amp_list("ref_amps")?
    } else {
        (0..m)
            .map(|k| Amplitude::from_polar(2.0, std::f64::consts::TAU * k as f64 / m as f64))
            .collect()
    };
    if base.len() != m {
        return Err(UiError::config(
            "parameters.ref_amps",
            format!("{} amplitudes for m = {m}", base.len()),
        ));
    }
    let refs: Vec<Amplitude> = base.iter().map(|a| a * scale).collect();
    row.push("scale", scale)
        .push("p", analytic_multi_ref_p(m, n_a as f64, n_b as f64, &refs)?);
    if ctx.mc() {
        let setup = build_multi_ref_setup(m, n_a, n_b)?;
        let (ok, bad) = pooled(&setup, &refs, ctx)?;
        row.push_estimate("p", ok).push_estimate("error", bad);
    }
    Ok(())
}

fn weak(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let refs = delta_refs(p)?;
    let delta = refs[1].re;
    let rounds = p.usize_list_or("rounds", &[1, 4, 16])?;
    row.push("delta", delta)
        .push("p", weak_ui_success_p(1, delta)?);
    if ctx.mc() {
        for (j, &n) in rounds.iter().enumerate() {
            if n == 0 {
                return Err(UiError::config(
                    "parameters.rounds",
                    "round counts must be >= 1",
                ));
            }
            let hyp = Hypothesis::new(1 + j % 2, refs.to_vec())?;
            let c = weak_ui_frequency(n, &hyp, ctx.shots, sub_seed(ctx.seed, j as u64), ctx.exec)?;
            row.push_estimate(&format!("p_n{n}"), rate(&c, c.correct(hyp.index())));
            row.push_estimate(&format!("error_n{n}"), rate(&c, c.wrong(hyp.index())));
        }
    }
    Ok(())
}

fn recovery_rounds(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let refs = delta_refs(p)?;
    let delta = refs[1].re;
    let rec = recursion(p)?;
    let rounds = p.usize_list_or("rounds", &[1, 20, 40, 60, 80])?;
    if rounds.contains(&0) {
        return Err(UiError::config(
            "parameters.rounds",
            "round numbers start at 1",
        ));
    }
    row.push("delta", delta);
    for &k in &rounds {
        row.push(format!("p_round{k}"), cumulative_success(k, delta, rec)?);
    }
    if ctx.mc() {
        let max = rounds.iter().copied().max().unwrap_or(1);
        let parts = map_replicas(ctx.exec, ctx.shots, |replica, n| -> UiResult<Vec<u64>> {
            let mut rng = RngStream::new(ctx.seed, replica);
            let mut reached = vec![0u64; max + 1];
            for _ in 0..n {
                let unknowns: Vec<usize> = (0..max).map(|_| rng.random_range(1..=2)).collect();
                let results = run_recovery_rounds(refs, &unknowns, rec, &mut rng)?;
                let concluded = results
                    .iter()
                    .take_while(|r| r.outcome.is_conclusive())
                    .count();
                reached[concluded] += 1;
            }
            Ok(reached)
        });
        let mut reached = vec![0u64; max + 1];
        for part in parts {
            for (t, x) in reached.iter_mut().zip(part?) {
                *t += x;
            }
        }
        for &k in &rounds {
            let hits: u64 = reached[k..].iter().sum();
            row.push_estimate(
                &format!("p_round{k}"),
                Estimate::proportion(hits, ctx.shots),
            );
        }
    }
    Ok(())
}

fn same_unknown(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let refs = delta_refs(p)?;
    let s = same_unknown_second_round(refs[1].re)?;
    row.push("delta", refs[1].re)
        .push("conditional_p", s.conditional_p)
        .push("overall_p", s.overall_p);
    if ctx.mc() {
        let (ok, bad) = pooled(&s.setup, &refs, ctx)?;
        row.push_estimate("overall_p", ok)
            .push_estimate("error", bad);
    }
    Ok(())
}

fn splitting_compare(p: &Params, row: &mut Row) -> UiResult<()> {
    let delta = delta_refs(p)?[1].re;
    let rec = recursion(p)?;
    let rounds = p.usize_list_or("rounds", &[1, 2, 5, 10])?;
    row.push("delta", delta);
    for &n in &rounds {
        let c = compare_strategies(n, delta, rec).map_err(|e| match e {
            UiError::InvalidShotCount(_) => {
                UiError::config("parameters.rounds", "round counts must be >= 1")
            }
            other => other,
        })?;
        row.push(format!("recovery_p_n{n}"), c.recovery_p)
            .push(format!("splitting_p_n{n}"), c.splitting_p)
            .push(format!("difference_n{n}"), c.difference);
    }
    Ok(())
}

fn noise_rates(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let n_a = p.usize_or("n_a", 1)?;
    let n_b = p.usize_or("n_b", 1)?;
    let sigma = p.f64_or("sigma", 0.25)?;
    let xi = p.f64_or("xi", 1.0)?;
    let r = averaged_rates_closed(n_a as f64, n_b as f64, sigma, xi)?;
    row.push("sigma", sigma)
        .push("xi", xi)
        .push("reliability", r.reliability)
        .push("p_success", r.p_success)
        .push("p_error", r.p_error)
        .push("p_failure", r.p_failure)
        .push("theta", r.theta);
    if ctx.mc() {
        let e = mc_rates_with(ctx.exec, n_a, n_b, sigma, xi, ctx.shots, ctx.seed)?;
        row.push_estimate("reliability", e.reliability)
            .push_estimate("p_success", e.p_success)
            .push_estimate("p_error", e.p_error)
            .push_estimate("p_failure", e.p_failure);
    }
    Ok(())
}

fn optimality_sweep(p: &Params, row: &mut Row) -> UiResult<()> {
    let delta = delta_refs(p)?[1].re;
    let (l1, p_opt) = match optimize_lambda1(delta)? {
        LambdaOptimum::Optimum { lambda1_sq, p } => (lambda1_sq, p),
        LambdaOptimum::Degenerate => (f64::NAN, 0.0),
    };
    row.push("delta", delta)
        .push("lambda1_sq_opt", l1)
        .push("p_opt", p_opt)
        .push("p_third", two_detector_p(1.0 / 3.0, delta)?)
        .push("p_nominal_third", two_detector_p_nominal(1.0 / 3.0, delta)?);
    Ok(())
}

fn gaussian_check(p: &Params, ctx: &PointCtx, row: &mut Row) -> UiResult<()> {
    let a = p.f64_or("a", 1.0)?;
    let b = p.f64_or("b", 1.0)?;
    let sigma = p.f64_or("sigma", 0.5)?;
    let x = if p.has("x") {
        p.amp("x")?
    } else {
        Amplitude::new(0.3, 0.2)
    };
    let m_max = p.usize_or("m_max", 6)?;
    let grid = p.usize_or("grid", 400)?;
    if m_max == 0 || m_max > 64 {
        return Err(UiError::config("parameters.m_max", "must lie in 1..=64"));
    }
    row.push(ctx.axis, p.f64_or(ctx.axis, 0.5)?);
    let mut worst = 0.0f64;
    for m in 1..=m_max as u32 {
        let closed = gaussian_integral_im(m, a, b, x, sigma)?;
        let rec = gaussian_integral_recursive(m, a, b, x, sigma)?;
        worst = worst.max((closed - rec).abs());
        row.push(format!("closed_m{m}"), closed);
    }
    let numeric = gaussian_integral_numeric_m1(a, b, x, sigma, grid)?;
    let closed1 = gaussian_integral_im(1, a, b, x, sigma)?;
    row.push("recursion_max_diff", worst)
        .push("numeric_m1", numeric)
        .push("numeric_m1_diff", (numeric - closed1).abs());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_only_tables_have_no_mc_columns() {
        for p in Protocol::ALL {
            let cfg = ExperimentConfig::default_for(p);
            let t = run_experiment(&cfg).unwrap();
            t.check().unwrap();
            assert!(t.rows() >= 1, "{p}");
            assert!(
                t.names().iter().all(|n| !n.starts_with(MC_PREFIX)),
                "{p}: {:?}",
                t.names()
            );
        }
    }

    #[test]
    fn recovery_sweep_shape() {
        let t = run_experiment(&ExperimentConfig::default_for(Protocol::RecoveryRounds)).unwrap();
        assert_eq!(t.rows(), 121);
        assert_eq!(
            t.names(),
            [
                "delta",
                "p_round1",
                "p_round20",
                "p_round40",
                "p_round60",
                "p_round80"
            ]
        );
        let p1 = t.column("p_round1").unwrap();
        assert!((p1[120] - (1.0 - (-12.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn noise_sweep_rows_sum_to_one() {
        let t = run_experiment(&ExperimentConfig::default_for(Protocol::NoiseRates)).unwrap();
        let (s, e, f) = (
            t.column("p_success").unwrap(),
            t.column("p_error").unwrap(),
            t.column("p_failure").unwrap(),
        );
        for i in 0..t.rows() {
            assert!((s[i] + e[i] + f[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_is_deterministic_and_schedule_free() {
        let cfg = ExperimentConfig::new(Protocol::TwoRef)
            .with_sweep("delta", 0.5, 2.0, 3)
            .with_param("n_a", 2);
        let cfg = ExperimentConfig {
            shots: 20_000,
            seed: 11,
            ..cfg
        };
        let a = run_experiment_with(Execution::Sequential, &cfg).unwrap();
        let b = run_experiment_with(Execution::Parallel, &cfg).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.column("mc_error").unwrap(), &[0.0; 4]);
        let other = ExperimentConfig { seed: 12, ..cfg };
        assert_ne!(
            run_experiment(&other).unwrap().to_csv().unwrap(),
            a.to_csv().unwrap()
        );
    }

    #[test]
    fn mc_tracks_closed_forms() {
        let cfg = ExperimentConfig {
            shots: 50_000,
            seed: 3,
            ..ExperimentConfig::new(Protocol::RecoveryRounds)
                .with_param("delta", 2.0)
                .with_param("rounds", serde_json::json!([1, 2, 3]))
        };
        let t = run_experiment(&cfg).unwrap();
        for k in [1, 2, 3] {
            let want = t.column(&format!("p_round{k}")).unwrap()[0];
            let est = Estimate::proportion(
                (t.column(&format!("mc_p_round{k}")).unwrap()[0] * 50_000.0).round() as u64,
                50_000,
            );
            assert!(est.within_sigmas(want, 4.0), "round {k}: {est:?} vs {want}");
        }
    }

    #[test]
    fn errors_name_keys() {
        let bad = ExperimentConfig::new(Protocol::RecoveryRounds).with_param("recursion", "fast");
        match run_experiment(&bad) {
            Err(UiError::Config { key, .. }) => assert_eq!(key, "parameters.recursion"),
            other => panic!("{other:?}"),
        }
        let bad = ExperimentConfig::new(Protocol::MultiRef)
            .with_param("m", 3)
            .with_param("ref_amps", serde_json::json!([[0, 0]]));
        match run_experiment(&bad) {
            Err(UiError::Config { key, .. }) => assert_eq!(key, "parameters.ref_amps"),
            other => panic!("{other:?}"),
        }
        let bad = ExperimentConfig::new(Protocol::NoiseRates).with_param("sigma", -1.0);
        assert!(matches!(run_experiment(&bad), Err(UiError::Domain(_))));
    }

    #[test]
    fn seeds_differ_per_point() {
        assert_ne!(point_seed(0, 0), point_seed(0, 1));
        assert_ne!(sub_seed(5, 1), sub_seed(5, 2));
        assert_eq!(mix_seed(0), mix_seed(0));
    }
}
