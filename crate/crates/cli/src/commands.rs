use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rtb_core::bidding::{self, BiddingError, CampaignSpec, StrategyFamily, TuneSettings, DEFAULT_GRID};
use rtb_core::logdata::{AuctionCase, LogSchema, Strictness};
use rtb_core::models::{scored_csv, train_ctr_model, CtrConfig, CtrModelKind, EvalReport};
use rtb_core::replay::{run_experiment, BudgetFraction, CampaignData, StrategyColumn, TableMetric};
use rtb_core::stats::{campaign_summary, feature_breakdown, summary_csv, summary_markdown, FeatureKey, Metric};
use rtb_core::synthgen::{generate, write_dataset, SynthConfig};
use rtb_core::Exec;

use crate::data::{load_split, load_splits, Layout, Split};
use crate::{InputArgs, ModelArgs, ReplayArgs, StatsArgs, SynthArgs, TrainArgs, TuneArgs};

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

impl InputArgs {
    fn strictness(&self) -> Strictness {
        if self.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        }
    }

    fn bid_schema(&self) -> Result<LogSchema> {
        self.schema.parse().map_err(|e: String| anyhow!(e))
    }

    fn layout(&self) -> Result<Layout> {
        match (&self.input, &self.real_data) {
            (_, Some(root)) => Layout::real_data(root),
            (Some(root), None) => Layout::dataset(root),
            (None, None) => bail!("one of --input or --real-data is required"),
        }
    }

    /// Train and test splits, loaded after every path has been checked.
    fn load(&self) -> Result<(Split, Split)> {
        let layout = self.layout()?;
        let schema = self.bid_schema()?;
        let train = load_splits(&layout.train, schema, self.strictness(), &self.advertiser)?;
        let test = load_splits(&layout.test, schema, self.strictness(), &self.advertiser)?;
        if train.cases.is_empty() || test.cases.is_empty() {
            bail!("no cases left after filtering (train {}, test {})", train.cases.len(), test.cases.len());
        }
        Ok((train, test))
    }
}

impl ModelArgs {
    fn kind(&self) -> Result<CtrModelKind> {
        self.model.parse().map_err(|e: String| anyhow!(e))
    }

    fn config(&self) -> CtrConfig {
        let mut c = CtrConfig::default();
        c.lr.seed = self.seed;
        if let Some(e) = self.epochs {
            c.lr.epochs = e;
        }
        if let Some(r) = self.rounds {
            c.gbrt.rounds = r;
        }
        c
    }
}

fn parse_grid(grid: &Option<String>) -> Result<Vec<u64>> {
    match grid {
        None => Ok(DEFAULT_GRID.to_vec()),
        Some(s) => s
            .split(',')
            .map(|v| v.trim().parse::<u64>().with_context(|| format!("bad grid value {v:?}")))
            .collect(),
    }
}

fn single_campaign(input: &InputArgs, train: &Split, weight: u64) -> Result<CampaignSpec> {
    match train.advertisers().as_slice() {
        [id] => Ok(CampaignSpec::for_advertiser(*id, weight)),
        ids => bail!("training data holds {} advertisers; pick one with --advertiser {:?}", ids.len(), input.advertiser),
    }
}

pub fn synth(a: &SynthArgs, exec: Exec) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SynthConfig::from_kv(&text)?
        }
        None => SynthConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got {o:?}"))?;
        config.set(k.trim(), v.trim()).map_err(|e| anyhow!("--set {o}: {e}"))?;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.n_train {
        config.n_train = n;
    }
    if let Some(n) = a.n_test {
        config.n_test = n;
    }
    if let Some(id) = a.advertiser {
        config.advertiser_id = id;
    }
    create_out(&a.out)?;
    let data = generate(&config, exec)?;
    write_dataset(&data.train, &a.out.join("train"))?;
    write_dataset(&data.test, &a.out.join("test"))?;
    write(a.out.join("synth.kv"), &config.to_kv())?;
    let mut truth = String::from("split,bid_id,p\n");
    for (split, cases, probs) in
        [("train", &data.train, &data.truth.train_probs), ("test", &data.test, &data.truth.test_probs)]
    {
        for (c, p) in cases.iter().zip(probs.iter()) {
            writeln!(truth, "{split},{},{p:?}", c.record.bid_id)?;
        }
    }
    write(a.out.join("truth.csv"), &truth)?;
    println!(
        "wrote {} train and {} test cases to {} (train CTR {:.4}%)",
        data.train.len(),
        data.test.len(),
        a.out.display(),
        100.0 * data.truth.train_ctr
    );
    Ok(())
}

pub fn stats(a: &StatsArgs, exec: Exec) -> Result<()> {
    let keys = if a.feature.is_empty() {
        FeatureKey::ALL.to_vec()
    } else {
        a.feature.iter().map(|k| k.parse()).collect::<Result<Vec<FeatureKey>, _>>()?
    };
    let metrics = if a.metric.is_empty() {
        vec![Metric::Ctr, Metric::MarketPrice, Metric::Ecpc]
    } else {
        a.metric.iter().map(|m| m.parse()).collect::<Result<Vec<Metric>, _>>()?
    };
    let input = &a.input;
    // a bare split directory is summarised as one split
    let splits: Vec<(&str, Vec<PathBuf>)> = match (&input.input, &input.real_data) {
        (Some(dir), None) if !dir.join("train").is_dir() => vec![("all", vec![dir.clone()])],
        _ => {
            let layout = input.layout()?;
            vec![("train", layout.train), ("test", layout.test)]
        }
    };
    create_out(&a.out)?;
    let breakdown_dir = a.out.join("breakdowns");
    create_out(&breakdown_dir)?;
    let schema = input.bid_schema()?;
    let mut rows = Vec::new();
    for (name, dirs) in &splits {
        let split = if dirs.len() == 1 {
            load_split(&dirs[0], schema, input.strictness(), &input.advertiser)?
        } else {
            load_splits(dirs, schema, input.strictness(), &input.advertiser)?
        };
        for adv in split.advertisers() {
            let cases = split.cases_of(adv);
            let bids = split.bids.get(&adv).copied().unwrap_or(0);
            rows.push((format!("{adv} {name}"), campaign_summary(bids, &cases, exec)));
            for &key in &keys {
                for &metric in &metrics {
                    let b = feature_breakdown(&cases, key, metric, exec)?;
                    let file = format!("{adv}_{name}_{}_{}.csv", key.name(), metric.name());
                    write(breakdown_dir.join(file), &b.to_csv())?;
                }
            }
        }
    }
    if rows.is_empty() {
        bail!("no cases after filtering");
    }
    let md = summary_markdown(&rows);
    write(a.out.join("summary.md"), &md)?;
    write(a.out.join("summary.csv"), &summary_csv(&rows))?;
    print!("{md}");
    Ok(())
}

fn report_line(split: &str, r: &EvalReport) -> String {
    format!("{split},{},{:?},{:?}\n", r.n, r.auc, r.rmse)
}

pub fn train_ctr(a: &TrainArgs, exec: Exec) -> Result<()> {
    let kind = a.model.kind()?;
    let (train, test) = a.input.load()?;
    create_out(&a.out)?;
    let model = train_ctr_model(kind, &train.cases, &a.model.config(), exec)?;
    let train_report = model.evaluate(&train.cases, exec)?;
    let test_report = model.evaluate(&test.cases, exec)?;
    let pctr = model.predict_cases(&test.cases, exec)?;
    write(a.out.join("model.txt"), &model.to_text())?;
    write(a.out.join("scores.csv"), &scored_csv(&test.cases, &pctr))?;
    let eval = format!("split,n,auc,rmse\n{}{}", report_line("train", &train_report), report_line("test", &test_report));
    write(a.out.join("eval.csv"), &eval)?;
    println!(
        "{}: test AUC {:.4}, RMSE {:.4} over {} cases",
        a.model.model, test_report.auc, test_report.rmse, test_report.n
    );
    Ok(())
}

fn scores(kind: CtrModelKind, cases: &[AuctionCase], config: &CtrConfig, exec: Exec) -> Result<Vec<f64>> {
    let model = train_ctr_model(kind, cases, config, exec)?;
    Ok(model.predict_cases(cases, exec)?)
}

pub fn tune(a: &TuneArgs, exec: Exec) -> Result<()> {
    let family: StrategyFamily = a.strategy.parse()?;
    if family == StrategyFamily::Mcpc {
        return Err(BiddingError::NotTunable(family).into());
    }
    let fraction: BudgetFraction = a.budget_fraction.parse()?;
    let settings = TuneSettings { grid: parse_grid(&a.grid)?, rand_lower: 0, rand_seed: a.model.seed };
    let kind = if family.needs_pctr() { Some(a.model.kind()?) } else { None };
    let (train, _) = a.input.load()?;
    let campaign = single_campaign(&a.input, &train, a.conversion_weight)?;
    create_out(&a.out)?;
    let pctr = match kind {
        Some(k) => Some(scores(k, &train.cases, &a.model.config(), exec)?),
        None => None,
    };
    let outcome = bidding::tune(family, &train.cases, fraction, &settings, &campaign, pctr.as_deref(), exec)?;
    write(a.out.join("strategy.kv"), &outcome.best.to_kv())?;
    write(a.out.join("grid.csv"), &outcome.to_csv())?;
    println!("best for advertiser {} at budget {fraction}: {}", campaign.advertiser_id, outcome.best);
    Ok(())
}

fn parse_column(s: &str, default_model: CtrModelKind) -> Result<StrategyColumn> {
    let lower = s.to_ascii_lowercase();
    let (family, suffix) = match lower.split_once('-') {
        Some((f, m)) => (f, Some(m)),
        None => (lower.as_str(), None),
    };
    let family: StrategyFamily = family.parse()?;
    let model = match (family.needs_pctr(), suffix) {
        (false, None) => None,
        (false, Some(_)) => bail!("strategy {s:?} takes no CTR model"),
        (true, None) => Some(default_model),
        (true, Some("l") | Some("lr")) => Some(CtrModelKind::Lr),
        (true, Some("g") | Some("gbrt")) => Some(CtrModelKind::Gbrt),
        (true, Some(other)) => bail!("unknown model suffix {other:?} in {s:?}"),
    };
    Ok(StrategyColumn { family, model })
}

pub fn replay(a: &ReplayArgs, exec: Exec) -> Result<()> {
    let fractions = if a.budget_fraction.is_empty() {
        BudgetFraction::STANDARD.to_vec()
    } else {
        a.budget_fraction.iter().map(|f| f.parse()).collect::<Result<Vec<BudgetFraction>, _>>()?
    };
    let default_model = a.model.kind()?;
    let columns = if a.strategy.is_empty() {
        StrategyColumn::standard()
    } else {
        a.strategy.iter().map(|s| parse_column(s, default_model)).collect::<Result<Vec<_>>>()?
    };
    let settings = TuneSettings { grid: parse_grid(&a.grid)?, rand_lower: 0, rand_seed: a.model.seed };
    let (train, test) = a.input.load()?;
    create_out(&a.out)?;
    let mut data = Vec::new();
    for adv in train.advertisers() {
        let test_cases = test.cases_of(adv);
        if test_cases.is_empty() {
            log::warn!("advertiser {adv} has no test cases; skipped");
            continue;
        }
        data.push(CampaignData {
            campaign: CampaignSpec::for_advertiser(adv, a.conversion_weight),
            train: train.cases_of(adv),
            test: test_cases,
        });
    }
    let table = run_experiment(&data, &columns, &fractions, &a.model.config(), &settings, exec)?;
    write(a.out.join("clicks.md"), &table.to_markdown(TableMetric::Clicks))?;
    write(a.out.join("conversions.md"), &table.to_markdown(TableMetric::Conversions))?;
    let score = table.to_markdown(TableMetric::Score);
    write(a.out.join("score.md"), &score)?;
    write(a.out.join("results.csv"), &table.to_csv())?;
    print!("{score}");
    Ok(())
}
