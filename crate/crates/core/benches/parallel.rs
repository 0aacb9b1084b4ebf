use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rtb_core::bidding::{tune, CampaignSpec, StrategyFamily, TuneSettings};
use rtb_core::models::{train_ctr_model, CtrConfig, CtrModelKind, GbrtHyper};
use rtb_core::replay::BudgetFraction;
use rtb_core::stats::{feature_breakdown, FeatureKey, Metric};
use rtb_core::synthgen::{generate, SynthConfig};
use rtb_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn config() -> SynthConfig {
    SynthConfig { n_train: 20_000, n_test: 2_000, bias: -4.0, ..SynthConfig::default() }
}

fn bench(c: &mut Criterion) {
    let cfg = config();
    let data = generate(&cfg, Exec::Parallel).expect("valid config");
    let camp = CampaignSpec::for_advertiser(cfg.advertiser_id, 0);

    let mut g = c.benchmark_group("generate");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| generate(black_box(&cfg), exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("breakdown_user_tag");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| feature_breakdown(black_box(&data.train), FeatureKey::UserTag, Metric::Ctr, exec).unwrap())
        });
    }
    g.finish();

    let gbrt = CtrConfig { gbrt: GbrtHyper { rounds: 10, ..GbrtHyper::default() }, ..CtrConfig::default() };
    let mut g = c.benchmark_group("train_gbrt");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_ctr_model(CtrModelKind::Gbrt, black_box(&data.train), &gbrt, exec).unwrap())
        });
    }
    g.finish();

    let settings = TuneSettings::default();
    let mut g = c.benchmark_group("tune_const");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                tune(StrategyFamily::Const, black_box(&data.train), BudgetFraction::ONE_8, &settings, &camp, None, exec)
                    .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
