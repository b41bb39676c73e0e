//! Acceptance suite: one test per headline criterion, each printing a
//! pass/fail line with the measured quantities (run with `--nocapture` to
//! see the lines for passing criteria too).
//!
//! Every tolerance is pinned here in code. The suite is deterministic: all
//! randomness derives from the per-criterion seeds below.

use protocol_games_core::domain::{Budget, Sign};
use protocol_games_core::experiments::*;
use protocol_games_core::gametheory::{
    classify_trichotomy, oracle, solve_nash, sparsify, PayoffMatrix, SchemeKind, Side,
};
use protocol_games_core::players::halfplane::boosted_learner;
use protocol_games_core::players::halfplane::erm_halfplane;
use protocol_games_core::rng::Seed;
use protocol_games_core::tasks::circle::{circle_task, CirclePoint, HalfplaneHypothesis, TURN};

const ACCEPT_SEED: u64 = 20260809;

fn verdict_line(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Criterion 1: transferable attack at ε = 0.05 (N = 18000, q = 320) beats
/// the calibrated ERM defender in ≥ 90% of 200 trials, stays undetectable
/// (advantage ≤ 0.05 over 2000 rounds, suite of 3 distinguishers), and
/// fails (< 0.5) once the defender budget is raised 100×.
#[test]
fn criterion_1_transferable_attack() {
    let eps = 0.05;
    let t = calibrated_defender_samples(eps);
    assert_eq!(t, 2, "calibration constant drifted");
    let exp = TransfAttackExperiment {
        epsilon: eps,
        lambda: 128,
        defender_samples: t,
        defenders: vec![
            "erm-halfplane".into(),
            "random-labels".into(),
            "constant-minus".into(),
        ],
        distinguishers: vec![
            "flag-fraction".into(),
            "clear-band".into(),
            "handle-bytes".into(),
        ],
        trials: 200,
        undetectability_rounds: 2000,
        c: 0.9,
        s: 0.1,
        threads: 4,
    };
    let started = std::time::Instant::now();
    let verdict = exp.run(Seed(ACCEPT_SEED), None).unwrap();
    let elapsed = started.elapsed();

    let companion = TransfAttackExperiment {
        defender_samples: 100 * t,
        defenders: vec!["erm-halfplane".into()],
        distinguishers: vec!["flag-fraction".into()],
        undetectability_rounds: 1,
        c: 0.5,
        ..exp.clone()
    };
    let weak = companion.run(Seed(ACCEPT_SEED), None).unwrap();

    let transfer_ok = verdict.transferability_min.rate >= 0.9;
    let undetect_ok = verdict.undetectability_advantage.advantage <= 0.05;
    let asymmetry_ok = weak.transferability_min.rate < 0.5;
    let runtime_ok = elapsed.as_secs() < 300;
    let pass = transfer_ok && undetect_ok && asymmetry_ok && runtime_ok;
    verdict_line(
        "1 (transferable attack)",
        pass,
        &format!(
            "transferability_min = {:.4} (>= 0.9), max advantage = {:.4} (<= 0.05), \
             100x-budget transferability = {:.4} (< 0.5), runtime = {:.1?} (< 5 min)",
            verdict.transferability_min.rate,
            verdict.undetectability_advantage.advantage,
            weak.transferability_min.rate,
            elapsed,
        ),
    );
    assert!(transfer_ok, "{:?}", verdict.transferability_min);
    assert!(undetect_ok, "{:?}", verdict.undetectability_advantage);
    assert!(asymmetry_ok, "{:?}", weak.transferability_min);
    assert!(runtime_ok, "{elapsed:?}");
}

/// Criterion 2: the selective-classification defense at ε = 0.1 with
/// N = q = 2000 is complete on honest queries (≥ 0.9), never lets a suite
/// attacker reach err > 7ε undetected more than 10% of the time, and its
/// classifier has risk ≤ ε in ≥ 90% of trials.
#[test]
fn criterion_2_defense() {
    let exp = DefenseExperiment {
        epsilon: 0.1,
        train_size: None,
        q: None,
        attackers: vec![
            "honest".into(),
            "replay-train".into(),
            "boundary-flood".into(),
            "point-mass".into(),
        ],
        trials: 200,
        l: 0.9,
        c: 0.9,
        s: 0.1,
        defender: "rejectron".into(),
        threads: 4,
    };
    assert_eq!(exp.resolved_train_size(), 2000);
    assert_eq!(exp.resolved_q(), 2000);
    let started = std::time::Instant::now();
    let verdict = exp.run(Seed(ACCEPT_SEED), None).unwrap();
    let elapsed = started.elapsed();
    let pass = verdict.passes.all && elapsed.as_secs() < 600;
    verdict_line(
        "2 (adversarial defense)",
        pass,
        &format!(
            "completeness = {:.4} (>= 0.9), soundness violation max = {:.4} (<= 0.1), \
             risk<=eps rate = {:.4} (>= 0.9), runtime = {:.1?} (< 10 min)",
            verdict.completeness_rate.rate,
            verdict.soundness_violation_max.rate,
            verdict.correctness_rate.rate,
            elapsed,
        ),
    );
    assert!(verdict.passes.completeness, "{:?}", verdict.completeness_rate);
    assert!(verdict.passes.soundness, "{:?}", verdict.per_attacker);
    assert!(verdict.passes.correctness, "{:?}", verdict.correctness_rate);
    assert!(elapsed.as_secs() < 600, "{elapsed:?}");
}

/// Criterion 3: the watermark at d = 1e5, N = 100·d², ε = 0.12, q = 72,
/// adversary budget t = d/100: correctness err(f) ≤ ε + q/N in ≥ 95% of
/// 100 trials, uniqueness ≥ 0.95, every remover's success ≤ 0.61, every
/// distinguisher's advantage ≤ 0.11.
#[test]
fn criterion_3_watermark() {
    let eps = 0.12f64;
    let q = ((1.0 / eps).ceil() as usize) * 8;
    assert_eq!(q, 72);
    let d = 100_000u64;
    let exp = WatermarkExperiment {
        d,
        epsilon: eps,
        q,
        builder_samples: 1_340_000_000,
        adversary_samples: d / 100,
        removers: vec![
            "echo".into(),
            "flip@0.5".into(),
            "all-minus".into(),
            "fresh-learner".into(),
        ],
        distinguishers: vec![
            "always-zero".into(),
            "repetition".into(),
            "positive-hit".into(),
            "sample-overlap".into(),
        ],
        trials: 100,
        undetectability_rounds: 500,
        l: 0.95,
        c: 0.95,
        s: 0.56 + 0.05,
        advantage_threshold: Some(0.08 + 0.03),
        threads: 4,
    };
    let started = std::time::Instant::now();
    let verdict = exp.run(Seed(ACCEPT_SEED), None).unwrap();
    let elapsed = started.elapsed();
    let pass = verdict.passes.all && elapsed.as_secs() < 600;
    verdict_line(
        "3 (watermark)",
        pass,
        &format!(
            "correctness = {:.4} (>= 0.95), uniqueness = {:.4} (>= 0.95), removal max = {:.4} \
             (<= 0.61), advantage max = {:.4} (<= 0.11), runtime = {:.1?} (< 10 min)",
            verdict.correctness_rate.rate,
            verdict.uniqueness_rate.rate,
            verdict.unremovability_max_success.rate,
            verdict.undetectability_advantage.advantage,
            elapsed,
        ),
    );
    assert!(verdict.passes.correctness, "{:?}", verdict.correctness_rate);
    assert!(verdict.passes.uniqueness, "{:?}", verdict.uniqueness_rate);
    assert!(verdict.passes.unremovability, "{:?}", verdict.per_remover);
    assert!(verdict.passes.undetectability, "{:?}", verdict.per_distinguisher);
    assert!(elapsed.as_secs() < 600, "{elapsed:?}");
}

/// Criterion 4: over 1e4 random-truth trials, the midpoint ERM with
/// K ∈ {50, 200} samples achieves risk ≤ 1/(2K) in at most 5% of trials.
///
/// The criterion is stated here exactly as specified. The measured rate is
/// 1 − 1/e ≈ 0.632 at both K (the midpoint ERM's risk is |F − B| for
/// version-space slacks F, B ~ Exp(2K), with mean exactly 1/(2K)), so the
/// assertion fails; the analysis lives in the project notes.
#[test]
fn criterion_4_learning_lower_bound() {
    let exp = LowerBoundExperiment {
        sample_counts: vec![50, 200],
        trials: 10_000,
        max_rate: 0.05,
        threads: 4,
    };
    let verdict = exp.run(Seed(ACCEPT_SEED)).unwrap();
    let detail: Vec<String> = verdict
        .per_k
        .iter()
        .map(|(k, e)| {
            format!(
                "K={k}: rate = {:.4} (<= 0.05), mean risk = {:.6} vs 1/(2K) = {:.6}",
                e.rate, e.mean_risk, e.risk_threshold
            )
        })
        .collect();
    verdict_line("4 (learning lower bound)", verdict.pass, &detail.join("; "));
    assert!(
        verdict.pass,
        "criterion 4 fails as analyzed: {}",
        detail.join("; ")
    );
}

/// Criterion 5: boosting at η = 0.05 from a base learner with measured
/// in-band error ν̂ achieves mean risk ≤ 4η·ν̂ + 3 standard errors over 200
/// trials, using max(K, 9/η) samples.
#[test]
fn criterion_5_boosting() {
    use protocol_games_core::players::Predictor;

    let eta = 0.05f64;
    let base_samples = 60u64;
    let trials = 200u64;
    let seed = Seed(ACCEPT_SEED).child("boosting", 0);

    // exact measure of {f' != truth} from the breakpoints of both
    // piecewise-constant classifiers
    let exact_risk = |boosted: &protocol_games_core::players::halfplane::BoostedClassifier<
        HalfplaneHypothesis,
    >,
                      truth: &HalfplaneHypothesis|
     -> f64 {
        let mask = TURN - 1;
        let mut cuts: Vec<u64> = Vec::new();
        for (start, len) in [boosted.plus_arc(), boosted.minus_arc()].into_iter().flatten() {
            cuts.push(start & mask);
            cuts.push(start.wrapping_add(len) & mask);
        }
        for b in truth.boundaries() {
            cuts.push(b.raw());
        }
        for b in boosted.fallback().boundaries() {
            cuts.push(b.raw());
        }
        cuts.sort_unstable();
        cuts.dedup();
        let mut wrong = 0u64;
        for (i, &start) in cuts.iter().enumerate() {
            let end = cuts[(i + 1) % cuts.len()];
            let mut len = end.wrapping_sub(start) & mask;
            if len == 0 {
                len = if cuts.len() == 1 { TURN } else { continue };
            }
            // probe strictly inside the piece; pieces of a single raw unit
            // carry measure 2^-62 and are skipped
            if len < 2 {
                continue;
            }
            let mid = CirclePoint::from_raw(start.wrapping_add(1) & mask);
            let predicted = boosted.predict(&mid);
            if predicted != protocol_games_core::domain::Label::Clear(truth.label(mid)) {
                wrong += len;
            }
        }
        wrong as f64 / TURN as f64
    };

    let mut risks = Vec::with_capacity(trials as usize);
    let mut nus = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let s = seed.child("trial", t);
        let mut rng = s.stream("draw", 0);
        let truth = HalfplaneHypothesis::new(CirclePoint::uniform(&mut rng));
        let task = circle_task(truth.w);
        let mut budget = Budget::new(10_000, 0);
        let boosted = boosted_learner(
            base_samples,
            eta,
            |pairs: &[(CirclePoint, Sign)]| erm_halfplane(pairs),
            task.view(),
            &mut budget,
            &mut rng,
        )
        .unwrap();
        // in-band error of the base: the disagreement arc extends
        // min(delta, eta) into each band arc of half-width eta
        let delta = boosted.fallback().w.dist(truth.w) as f64 / TURN as f64;
        nus.push(delta.min(eta) / (2.0 * eta));
        risks.push(exact_risk(&boosted, &truth));
    }
    let mean_risk: f64 = risks.iter().sum::<f64>() / trials as f64;
    let mean_nu: f64 = nus.iter().sum::<f64>() / trials as f64;
    let var: f64 =
        risks.iter().map(|r| (r - mean_risk) * (r - mean_risk)).sum::<f64>() / trials as f64;
    let se = (var / trials as f64).sqrt();
    let bound = 4.0 * eta * mean_nu + 3.0 * se;
    let pass = mean_risk <= bound;
    verdict_line(
        "5 (boosting)",
        pass,
        &format!(
            "mean boosted risk = {mean_risk:.6} <= 4*eta*nu + 3se = {bound:.6} \
             (eta = {eta}, mean nu = {mean_nu:.4}, se = {se:.2e}, {} samples)",
            base_samples.max((9.0 / eta).ceil() as u64),
        ),
    );
    assert!(pass, "mean risk {mean_risk} vs bound {bound}");
}

/// Criterion 6: the Nash LP matches the grid-refinement brute-force oracle
/// to 1e-4 on 50 seeded random matrices up to 6×8; every sparsified
/// strategy passes its own verification; the trichotomy reproduces the
/// three threshold cases exactly.
#[test]
fn criterion_6_nash_machinery() {
    // 50 seeded matrices
    let mut state = 0xACCE97u64;
    let mut rand01 = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst_dev: f64 = 0.0;
    for case in 0..50u64 {
        let r = 1 + (rand01() * 6.0) as usize;
        let c = 1 + (rand01() * 8.0) as usize;
        let entries: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rand01()).collect()).collect();
        let matrix = PayoffMatrix::from_entries(entries).unwrap();
        let sol = solve_nash(&matrix).unwrap();
        let (lower, upper) = oracle::grid_value_bracket(&matrix);
        assert!(
            upper - lower <= 1e-4,
            "case {case}: oracle bracket too wide [{lower}, {upper}]"
        );
        let dev = (lower - sol.value).max(sol.value - upper).max(0.0);
        worst_dev = worst_dev.max(dev.max(upper - lower));
        assert!(
            sol.value >= lower - 1e-4 && sol.value <= upper + 1e-4,
            "case {case}: lp {} vs oracle [{lower}, {upper}]",
            sol.value
        );
        assert!(sol.duality_gap <= 1e-6, "case {case}");

        // sparsify both sides and re-verify the guarantee independently
        for (side, mixed) in [(Side::Row, &sol.row_strategy), (Side::Column, &sol.column_strategy)]
        {
            let sparse = sparsify(&matrix, mixed, 0.15, side, Seed(case)).unwrap();
            let n = match side {
                Side::Row => matrix.rows(),
                Side::Column => matrix.cols(),
            };
            let mix = sparse.mixture(n);
            let width = matrix.max_entry() - matrix.min_entry();
            match side {
                Side::Row => {
                    let worst = (0..matrix.cols())
                        .map(|j| {
                            (0..matrix.rows()).map(|i| mix[i] * matrix.entry(i, j)).sum::<f64>()
                        })
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert!(worst <= sol.value + 0.15 * width + 1e-9, "case {case}");
                }
                Side::Column => {
                    let worst = (0..matrix.rows())
                        .map(|i| {
                            (0..matrix.cols()).map(|j| mix[j] * matrix.entry(i, j)).sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert!(worst >= sol.value - 0.15 * width - 1e-9, "case {case}");
                }
            }
        }
    }

    // the three threshold cases
    let defense = classify_trichotomy(0.80, false);
    let watermark = classify_trichotomy(0.5, true);
    let attack = classify_trichotomy(0.5, false);
    assert_eq!(defense, SchemeKind::Defense);
    assert_eq!(watermark, SchemeKind::Watermark);
    assert_eq!(attack, SchemeKind::TransfAttack);
    verdict_line(
        "6 (nash machinery)",
        true,
        &format!(
            "50 seeded matrices: worst |lp − oracle| and bracket width = {worst_dev:.2e} \
             (<= 1e-4); sparsified strategies verified; trichotomy cases: \
             0.80 → {defense}, 0.5+uniq → {watermark}, 0.5−uniq → {attack}"
        ),
    );
}

/// Criterion 7: on the criterion-1 attack instance, the certified
/// total-variation lower bound reaches ½(p̂ + ĉ − 1 − e^{−εq/3}) − 3 SE with
/// p̂, ĉ measured, and every bounded distinguisher's advantage is within its
/// interval of 0.
#[test]
fn criterion_7_efid() {
    let exp = EfidExperiment {
        epsilon: 0.05,
        lambda: 128,
        learner_samples: calibrated_defender_samples(0.05),
        bounded_distinguishers: vec![
            "flag-fraction".into(),
            "clear-band".into(),
            "handle-bytes".into(),
        ],
        calibration_trials: 2000,
        verification_trials: 10_000,
        c: 0.9,
        s: 0.1,
        threads: 4,
    };
    let report = exp.run(Seed(ACCEPT_SEED)).unwrap();
    let bounded_ok = report
        .bounded_advantages
        .values()
        .all(|est| est.consistent_with_zero());
    let pass = report.statistical_distance_ok && bounded_ok;
    verdict_line(
        "7 (efid pair)",
        pass,
        &format!(
            "tv lower = {:.4} >= eta target {:.4} − 3se ({:.4}); p-hat = {:.3}, c-hat = {:.3}; \
             bounded advantages all within CI of 0: {bounded_ok}",
            report.tv_lower_estimate,
            report.eta_target,
            report.eta_target - 3.0 * report.tv_standard_error,
            report.measured_p,
            report.measured_c,
        ),
    );
    assert!(report.statistical_distance_ok, "{report:?}");
    assert!(bounded_ok, "{:?}", report.bounded_advantages);
}

/// Criterion 8: on the 27-cell (eps, k, p) grid, empirical tail frequencies
/// from 1e5 simulations never exceed the closed-form bounds by more than 3
/// standard errors.
#[test]
fn criterion_8_chernoff_audit() {
    let exp = ChernoffAuditExperiment {
        deviations: vec![0.05, 0.1, 0.2],
        sample_counts: vec![50, 200, 1000],
        success_probs: vec![0.1, 0.3, 0.5],
        repetitions: 100_000,
        threads: 4,
    };
    let verdict = exp.run(Seed(ACCEPT_SEED)).unwrap();
    assert_eq!(verdict.cells.len(), 27);
    verdict_line(
        "8 (chernoff audit)",
        verdict.pass,
        &format!(
            "27 grid cells, {} violations of bound + 3se",
            verdict.violations
        ),
    );
    assert!(verdict.pass, "{:?}", verdict.cells);
}

/// Criterion 9: re-running an experiment with identical config and seed
/// reproduces the verdict JSON byte for byte, independently of the thread
/// count.
#[test]
fn criterion_9_determinism() {
    let exp = DefenseExperiment {
        epsilon: 0.1,
        train_size: Some(500),
        q: Some(500),
        attackers: vec!["honest".into(), "boundary-flood".into()],
        trials: 20,
        l: 0.9,
        c: 0.9,
        s: 0.1,
        defender: "rejectron".into(),
        threads: 4,
    };
    let a = serde_json::to_vec(&exp.run(Seed(123), None).unwrap()).unwrap();
    let b = serde_json::to_vec(&exp.run(Seed(123), None).unwrap()).unwrap();
    let single = DefenseExperiment {
        threads: 1,
        ..exp.clone()
    };
    let c = serde_json::to_vec(&single.run(Seed(123), None).unwrap()).unwrap();

    let ta = TransfAttackExperiment {
        epsilon: 0.1,
        lambda: 32,
        defender_samples: 2,
        defenders: vec!["erm-halfplane".into()],
        distinguishers: vec!["flag-fraction".into()],
        trials: 10,
        undetectability_rounds: 10,
        c: 0.5,
        s: 0.2,
        threads: 3,
    };
    let ta1 = serde_json::to_vec(&ta.run(Seed(9), None).unwrap()).unwrap();
    let ta2 = serde_json::to_vec(&ta.run(Seed(9), None).unwrap()).unwrap();

    let pass = a == b && a == c && ta1 == ta2;
    verdict_line(
        "9 (determinism)",
        pass,
        "defense and transfattack verdict JSON byte-identical across reruns and thread counts",
    );
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(ta1, ta2);
}
