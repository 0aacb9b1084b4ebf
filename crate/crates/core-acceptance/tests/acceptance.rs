//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write as _;
use std::time::Instant;

use rtb_core::bidding::{kpi_score, CampaignSpec, StrategyFamily, StrategySpec, TuneSettings};
use rtb_core::logdata::{parse_record, serialize_record, LogSchema, Strictness};
use rtb_core::models::{auc, lr_gradient, lr_loss, train_ctr_model, train_gbrt, CtrConfig, CtrModelKind, GbrtHyper, LrHyper, LrModel};
use rtb_core::features::{DenseFeatureVector, SparseFeatureVector};
use rtb_core::replay::{make_budget, run_experiment, simulate_scored, BudgetFraction, CampaignData, StrategyColumn};
use rtb_core::stats::CampaignTotals;
use rtb_core::synthgen::{generate, SynthConfig};
use rtb_core::Exec;
use rand::Rng;

/// Written straight to stdout so the line shows without `--nocapture`.
fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} - {detail}").unwrap();
    out.flush().unwrap();
}

fn finish(n: u32, failures: &[String], detail: String) {
    report(n, failures.is_empty(), &detail);
    assert!(failures.is_empty(), "criterion {n}: {}", failures.join("; "));
}

// (advertiser, bids, imps, clicks, convs, cost, win %, ctr %, cvr %, cpm, ecpc)
type Row = (u32, u64, u64, u64, u64, u64, Option<f64>, f64, f64, f64, f64);

const TRAIN: [Row; 9] = [
    (1458, 14_701_496, 3_083_056, 2_454, 1, 212_400, Some(20.97), 0.080, 0.041, 68.89, 86.55),
    (2259, 2_987_731, 835_556, 280, 89, 77_754, Some(27.97), 0.034, 31.786, 93.06, 277.70),
    (2261, 2_159_708, 687_617, 207, 0, 61_610, Some(31.84), 0.030, 0.000, 89.60, 297.64),
    (2821, 5_292_053, 1_322_561, 843, 450, 118_082, Some(24.99), 0.064, 53.381, 89.28, 140.07),
    (2997, 1_017_927, 312_437, 1_386, 0, 19_689, Some(30.69), 0.444, 0.000, 63.02, 14.21),
    (3358, 3_751_016, 1_742_104, 1_358, 369, 160_943, Some(46.44), 0.078, 27.172, 92.38, 118.51),
    (3386, 14_091_931, 2_847_802, 2_076, 0, 219_066, Some(20.21), 0.073, 0.000, 76.92, 105.52),
    (3427, 14_032_619, 2_593_765, 1_926, 0, 210_239, Some(18.48), 0.074, 0.000, 81.06, 109.16),
    (3476, 6_712_268, 1_970_360, 1_027, 26, 156_088, Some(29.35), 0.052, 2.532, 79.22, 151.98),
];

// test rows publish no bid counts, hence no win ratio
const TEST: [Row; 9] = [
    (1458, 0, 614_638, 543, 0, 45_216, None, 0.088, 0.000, 73.57, 83.27),
    (2259, 0, 417_197, 131, 32, 43_497, None, 0.031, 24.427, 104.26, 332.04),
    (2261, 0, 343_862, 97, 0, 28_795, None, 0.028, 0.000, 83.74, 296.87),
    (2821, 0, 661_964, 394, 217, 68_257, None, 0.060, 55.076, 103.11, 173.24),
    (2997, 0, 156_063, 533, 0, 8_617, None, 0.342, 0.000, 55.22, 16.17),
    (3358, 0, 300_928, 339, 58, 34_159, None, 0.113, 17.109, 113.51, 100.77),
    (3386, 0, 545_421, 496, 0, 45_715, None, 0.091, 0.000, 83.82, 92.17),
    (3427, 0, 536_795, 395, 0, 46_356, None, 0.074, 0.000, 86.36, 117.36),
    (3476, 0, 523_848, 302, 11, 43_627, None, 0.058, 3.642, 83.28, 144.46),
];

#[test]
fn criterion_1_table_formulas() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for (split, rows) in [("train", &TRAIN), ("test", &TEST)] {
        for &(adv, bids, imps, clicks, convs, cost, win, ctr, cvr, cpm, ecpc) in rows.iter() {
            let s = CampaignTotals { bids, imps, clicks, convs, cost_milli: cost * 1000 }.summary();
            let mut cells = vec![
                ("CTR", s.ctr.map(|v| 100.0 * v), ctr),
                ("CVR", s.cvr.map(|v| 100.0 * v), cvr),
                ("CPM", s.cpm_fen, cpm),
                ("eCPC", s.ecpc_fen, ecpc),
            ];
            if let Some(w) = win {
                cells.push(("Win Ratio", s.win_ratio.map(|v| 100.0 * v), w));
            }
            for (name, got, want) in cells {
                checked += 1;
                match got {
                    Some(g) if (g - want).abs() <= 0.01 => {}
                    other => failures.push(format!("{split} {adv} {name}: computed {other:?}, expected {want}")),
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 1.0 {
        failures.push(format!("runtime {elapsed:.2}s"));
    }
    finish(1, &failures, format!("{} of {checked} cells within 0.01 {}", checked - failures.len(), failures.join("; ")));
}

#[test]
fn criterion_2_kpi_vector() {
    let camp = CampaignSpec::known(3476).unwrap();
    let score = camp.kpi_score(205, 3);
    let mut failures = Vec::new();
    if score != 235 || kpi_score(205, 3, 10) != 235 || camp.conversion_weight != 10 {
        failures.push(format!("score {score}"));
    }
    finish(2, &failures, format!("3476: 205 clicks + 10 x 3 convs = {score}"));
}

#[test]
fn criterion_3_replay_oracle() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut runs = 0;
    for seed in 0..50u64 {
        let mut r = common::rng(seed);
        let n = r.gen_range(1..=1000);
        let cases = common::campaign(seed, n);
        let pctr: Vec<f64> = cases.iter().map(|c| if c.clicked { 0.03 } else { 0.01 } * r.gen_range(0.2..2.0)).collect();
        let total = make_budget(&cases, BudgetFraction::ONE).unwrap();
        let budget = total * r.gen_range(1..=32) / 32;
        let camp = CampaignSpec::for_advertiser(9001, 2);
        for spec in [
            StrategySpec::Const { price: r.gen_range(0..300) },
            StrategySpec::Rand { lower: 0, upper: r.gen_range(0..300), seed },
            StrategySpec::Mcpc { max_ecpc_fen: r.gen_range(0.0..10_000.0) },
            StrategySpec::Lin { base_bid: r.gen_range(0..300), avg_ctr: 0.015 },
        ] {
            runs += 1;
            let got = simulate_scored(&cases, &spec, budget, &camp, Some(&pctr), None).unwrap();
            let want = common::reference_replay(&cases, &spec, budget, &pctr);
            if (got.wins, got.clicks, got.convs, got.cost_milli) != (want.wins, want.clicks, want.convs, want.cost) {
                failures.push(format!("seed {seed} {spec}"));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        failures.push(format!("runtime {elapsed:.1}s"));
    }
    finish(3, &failures, format!("{runs} runs, {} mismatches, {elapsed:.2}s", failures.len()));
}

#[test]
fn criterion_4_budget_monotonicity() {
    let start = Instant::now();
    let fractions = [BudgetFraction::ONE_32, BudgetFraction::ONE_8, BudgetFraction::ONE_HALF, BudgetFraction::ONE];
    let mut failures = Vec::new();
    let mut checks = 0;
    for seed in 0..10u64 {
        let cases = common::campaign(100 + seed, 5_000);
        let pctr: Vec<f64> = cases.iter().map(|c| if c.clicked { 0.04 } else { 0.02 }).collect();
        let camp = CampaignSpec::for_advertiser(9001, 1);
        for spec in [
            StrategySpec::Const { price: 80 },
            StrategySpec::Rand { lower: 0, upper: 200, seed },
            StrategySpec::Mcpc { max_ecpc_fen: 3000.0 },
            StrategySpec::Lin { base_bid: 60, avg_ctr: 0.025 },
        ] {
            let mut prev: Option<(rtb_core::replay::ReplayResult, Vec<usize>)> = None;
            for &f in &fractions {
                let mut trace = Vec::new();
                let budget = make_budget(&cases, f).unwrap();
                let r = simulate_scored(&cases, &spec, budget, &camp, Some(&pctr), Some(&mut trace)).unwrap();
                let won: Vec<usize> = trace.iter().filter(|t| t.won).map(|t| t.index).collect();
                if let Some((p, pw)) = &prev {
                    checks += 1;
                    let counts_ok = p.wins <= r.wins
                        && p.clicks <= r.clicks
                        && p.convs <= r.convs
                        && p.cost_milli <= r.cost_milli
                        && p.score <= r.score;
                    if !counts_ok || !pw.iter().all(|i| won.binary_search(i).is_ok()) {
                        failures.push(format!("campaign {seed} {spec} at {f}"));
                    }
                }
                prev = Some((r, won));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        failures.push(format!("runtime {elapsed:.1}s"));
    }
    finish(4, &failures, format!("{checks} budget steps, {} violations, {elapsed:.2}s", failures.len()));
}

#[test]
fn criterion_5_gradient_check() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..25u64 {
        let mut r = common::rng(1000 + seed);
        let dim = r.gen_range(1..40);
        let batch = r.gen_range(1..30);
        let mut model = LrModel::zeros(dim + 1, LrHyper { lambda: r.gen_range(0.0..0.05), ..LrHyper::default() });
        for w in &mut model.weights {
            *w = r.gen_range(-2.0..2.0);
        }
        let data: Vec<(SparseFeatureVector, f64)> = (0..batch)
            .map(|_| {
                let indices = (1..=dim as u32).filter(|_| r.gen_bool(0.3)).collect();
                (SparseFeatureVector { indices }, if r.gen_bool(0.3) { 1.0 } else { 0.0 })
            })
            .collect();
        let g = lr_gradient(&model, &data);
        let h = 1e-5;
        for (j, &gj) in g.iter().enumerate() {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.weights[j] += h;
            minus.weights[j] -= h;
            let numeric = (lr_loss(&plus, &data) - lr_loss(&minus, &data)) / (2.0 * h);
            worst = worst.max((numeric - gj).abs() / numeric.abs().max(gj.abs()).max(1e-6));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut failures = Vec::new();
    if worst >= 1e-4 {
        failures.push(format!("max relative error {worst:e}"));
    }
    if elapsed >= 10.0 {
        failures.push(format!("runtime {elapsed:.1}s"));
    }
    finish(5, &failures, format!("25 configurations, max relative error {worst:.2e}"));
}

fn bayes_and_models(seed: u64) -> (f64, f64, f64, Vec<f64>) {
    let config = SynthConfig { seed, n_train: 100_000, n_test: 20_000, bias: -4.5, ..SynthConfig::default() };
    let data = generate(&config, Exec::Parallel).unwrap();
    let labels: Vec<bool> = data.test.iter().map(|c| c.clicked).collect();
    let scored = |p: &[f64]| auc(&p.iter().copied().zip(labels.iter().copied()).collect::<Vec<_>>()).unwrap();
    let bayes = scored(&data.truth.test_probs);
    let ctr = CtrConfig::default();
    let lr = train_ctr_model(CtrModelKind::Lr, &data.train, &ctr, Exec::Parallel).unwrap();
    let gbrt = train_ctr_model(CtrModelKind::Gbrt, &data.train, &ctr, Exec::Parallel).unwrap();
    let lr_auc = scored(&lr.predict_cases(&data.test, Exec::Parallel).unwrap());
    let gbrt_auc = scored(&gbrt.predict_cases(&data.test, Exec::Parallel).unwrap());
    let trace = match gbrt {
        rtb_core::models::CtrPredictor::Gbrt { model, .. } => model.training_mse,
        _ => unreachable!(),
    };
    (bayes, lr_auc, gbrt_auc, trace)
}

#[test]
fn criterion_6_ctr_recovery() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for seed in 1..=3 {
        let (bayes, lr, gbrt, _) = bayes_and_models(seed);
        parts.push(format!("seed {seed}: bayes {bayes:.4} lr {lr:.4} gbrt {gbrt:.4}"));
        if lr < bayes - 0.03 {
            failures.push(format!("seed {seed}: LR {lr:.4} < Bayes {bayes:.4} - 0.03"));
        }
        if (gbrt - lr).abs() > 0.05 {
            failures.push(format!("seed {seed}: GBRT {gbrt:.4} vs LR {lr:.4}"));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 120.0 {
        failures.push(format!("runtime {elapsed:.0}s"));
    }
    finish(6, &failures, format!("{}; {elapsed:.1}s", parts.join("; ")));
}

#[test]
fn criterion_7_gbrt_mse_monotone() {
    let mut failures = Vec::new();
    let mut fixtures = 0;
    let monotone = |t: &[f64]| t.windows(2).all(|w| w[1] <= w[0]);
    // synthetic campaigns through the full featurizer
    for seed in [1u64, 5] {
        let config = SynthConfig { seed, n_train: 20_000, n_test: 1, bias: -4.0, ..SynthConfig::default() };
        let data = generate(&config, Exec::Parallel).unwrap();
        let model = train_ctr_model(CtrModelKind::Gbrt, &data.train, &CtrConfig::default(), Exec::Parallel).unwrap();
        if let rtb_core::models::CtrPredictor::Gbrt { model, .. } = model {
            fixtures += 1;
            if model.training_mse.len() != 51 || !monotone(&model.training_mse) {
                failures.push(format!("synthetic seed {seed}"));
            }
        }
    }
    // raw noisy regression problems
    for seed in 0..4u64 {
        let mut r = common::rng(seed);
        let data: Vec<(DenseFeatureVector, f64)> = (0..2_000)
            .map(|_| {
                let values: Vec<f64> = (0..6).map(|_| r.gen_range(0.0..1.0)).collect();
                let p = if values[0] + 0.5 * values[3] > 0.8 { 0.6 } else { 0.1 };
                (DenseFeatureVector { values }, if r.gen_bool(p) { 1.0 } else { 0.0 })
            })
            .collect();
        let model = train_gbrt(&data, &GbrtHyper::default(), Exec::Parallel).unwrap();
        fixtures += 1;
        if model.training_mse.len() != 51 || !monotone(&model.training_mse) {
            failures.push(format!("noisy seed {seed}"));
        }
    }
    finish(7, &failures, format!("{fixtures} fixtures x 50 rounds, {} non-monotone", failures.len()));
}

#[test]
fn criterion_8_auc_brute_force() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut r = common::rng(seed);
        let n = r.gen_range(2..=200);
        // coarse scores force ties
        let levels = r.gen_range(2..50);
        let mut scored: Vec<(f64, bool)> =
            (0..n).map(|_| (r.gen_range(0..levels) as f64 / levels as f64, r.gen_bool(0.3))).collect();
        scored[0].1 = true;
        scored[1].1 = false;
        let (mut credit, mut pairs) = (0.0, 0.0);
        for a in scored.iter().filter(|s| s.1) {
            for b in scored.iter().filter(|s| !s.1) {
                pairs += 1.0;
                credit += if a.0 > b.0 {
                    1.0
                } else if a.0 == b.0 {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let diff = (auc(&scored).unwrap() - credit / pairs).abs();
        worst = worst.max(diff);
        if diff > 1e-12 {
            failures.push(format!("instance {seed}: diff {diff:e}"));
        }
    }
    finish(8, &failures, format!("100 instances, max difference {worst:e}"));
}

#[test]
fn criterion_9_lin_beats_const() {
    let start = Instant::now();
    let config = SynthConfig { seed: 11, n_train: 100_000, n_test: 20_000, bias: -4.5, ..SynthConfig::default() };
    let data = generate(&config, Exec::Parallel).unwrap();
    let campaign = CampaignData {
        campaign: CampaignSpec::for_advertiser(config.advertiser_id, 0),
        train: data.train,
        test: data.test,
    };
    let columns = [
        StrategyColumn { family: StrategyFamily::Const, model: None },
        StrategyColumn { family: StrategyFamily::Lin, model: Some(CtrModelKind::Lr) },
    ];
    let table = run_experiment(
        &[campaign],
        &columns,
        &[BudgetFraction::ONE_32],
        &CtrConfig::default(),
        &TuneSettings::default(),
        Exec::Parallel,
    )
    .unwrap();
    let clicks = |k| table.cell(0, k, BudgetFraction::ONE_32).unwrap().result.clicks;
    let (c, l) = (clicks(0), clicks(1));
    let mut failures = Vec::new();
    if (l as f64) < 1.5 * c as f64 {
        failures.push(format!("Lin {l} < 1.5 x Const {c}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 120.0 {
        failures.push(format!("runtime {elapsed:.0}s"));
    }
    let ratio = l as f64 / c.max(1) as f64;
    finish(9, &failures, format!("test clicks at 1/32: Lin {l}, Const {c} (ratio {ratio:.2}); {elapsed:.1}s"));
}

#[test]
fn criterion_10_parser_round_trip() {
    let mut failures = Vec::new();
    for (schema, seed) in [(LogSchema::EventLog, 1u64), (LogSchema::BidLog, 2)] {
        let mut r = common::rng(seed);
        let mut mismatches = 0;
        for _ in 0..10_000 {
            let record = common::random_record(&mut r, schema);
            let line = serialize_record(&record, schema, Strictness::Strict).unwrap();
            let ok = match parse_record(&line, schema) {
                Ok(back) => back == record && serialize_record(&back, schema, Strictness::Strict).as_deref() == Ok(&line),
                Err(_) => false,
            };
            mismatches += usize::from(!ok);
        }
        if mismatches > 0 {
            failures.push(format!("{schema:?}: {mismatches} mismatches"));
        }
    }
    finish(10, &failures, "10000 lines per schema".to_string());
}
