//! Campaign x strategy x budget experiment grid.

use std::fmt::Write as _;

use super::{make_budget, simulate_scored, BudgetFraction, ReplayError, ReplayResult};
use crate::bidding::{estimate_max_ecpc, tune, CampaignSpec, StrategyFamily, StrategySpec, TuneSettings};
use crate::exec::Exec;
use crate::logdata::AuctionCase;
use crate::models::{train_ctr_model, CtrConfig, CtrModelKind};

/// One campaign's training and test cases, both time-sorted.
#[derive(Debug, Clone)]
pub struct CampaignData {
    pub campaign: CampaignSpec,
    pub train: Vec<AuctionCase>,
    pub test: Vec<AuctionCase>,
}

/// A strategy family, paired with the CTR model it uses if it needs one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyColumn {
    pub family: StrategyFamily,
    pub model: Option<CtrModelKind>,
}

impl StrategyColumn {
    /// Const, Rand, then Mcpc and Lin each with LR and GBRT.
    pub fn standard() -> Vec<StrategyColumn> {
        let plain = |family| StrategyColumn { family, model: None };
        let with = |family, kind| StrategyColumn { family, model: Some(kind) };
        vec![
            plain(StrategyFamily::Const),
            plain(StrategyFamily::Rand),
            with(StrategyFamily::Mcpc, CtrModelKind::Lr),
            with(StrategyFamily::Mcpc, CtrModelKind::Gbrt),
            with(StrategyFamily::Lin, CtrModelKind::Lr),
            with(StrategyFamily::Lin, CtrModelKind::Gbrt),
        ]
    }

    pub fn label(&self) -> String {
        let base = match self.family {
            StrategyFamily::Const => "Const",
            StrategyFamily::Rand => "Rand",
            StrategyFamily::Mcpc => "Mcpc",
            StrategyFamily::Lin => "Lin",
        };
        match self.model {
            None => base.to_string(),
            Some(CtrModelKind::Lr) => format!("{base}-L"),
            Some(CtrModelKind::Gbrt) => format!("{base}-G"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCell {
    pub campaign: usize,
    pub column: usize,
    pub fraction: BudgetFraction,
    /// The strategy chosen on training data.
    pub strategy: StrategySpec,
    /// Its replay on test data.
    pub result: ReplayResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Clicks,
    Conversions,
    Score,
}

impl TableMetric {
    fn of(self, r: &ReplayResult) -> u64 {
        match self {
            TableMetric::Clicks => r.clicks,
            TableMetric::Conversions => r.convs,
            TableMetric::Score => r.score,
        }
    }

    fn name(self) -> &'static str {
        match self {
            TableMetric::Clicks => "clicks",
            TableMetric::Conversions => "conversions",
            TableMetric::Score => "KPI score",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub campaigns: Vec<CampaignSpec>,
    pub columns: Vec<StrategyColumn>,
    pub fractions: Vec<BudgetFraction>,
    /// Ordered by fraction, then campaign, then column.
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentTable {
    pub fn cell(&self, campaign: usize, column: usize, fraction: BudgetFraction) -> Option<&ExperimentCell> {
        self.cells.iter().find(|c| c.campaign == campaign && c.column == column && c.fraction == fraction)
    }

    /// Sum of `metric` over the campaigns matching `keep`.
    pub fn total(
        &self,
        column: usize,
        fraction: BudgetFraction,
        metric: TableMetric,
        keep: impl Fn(&CampaignSpec) -> bool,
    ) -> u64 {
        self.cells
            .iter()
            .filter(|c| c.column == column && c.fraction == fraction && keep(&self.campaigns[c.campaign]))
            .map(|c| metric.of(&c.result))
            .sum()
    }

    /// One block per budget: a row per campaign, then season subtotals and the total.
    pub fn to_markdown(&self, metric: TableMetric) -> String {
        let mut s = String::new();
        let labels: Vec<String> = self.columns.iter().map(|c| c.label()).collect();
        for &fraction in &self.fractions {
            writeln!(s, "### Test {} under budget {fraction}\n", metric.name()).unwrap();
            writeln!(s, "| Campaign | {} |", labels.join(" | ")).unwrap();
            writeln!(s, "|---|{}", "---:|".repeat(labels.len())).unwrap();
            let mut row = |name: String, values: Vec<u64>| {
                let v: Vec<String> = values.iter().map(u64::to_string).collect();
                writeln!(s, "| {name} | {} |", v.join(" | ")).unwrap();
            };
            for (ci, camp) in self.campaigns.iter().enumerate() {
                let values = (0..self.columns.len())
                    .map(|k| self.cell(ci, k, fraction).map_or(0, |c| metric.of(&c.result)))
                    .collect();
                row(camp.advertiser_id.to_string(), values);
            }
            let mut seasons: Vec<u8> = self.campaigns.iter().filter_map(|c| c.season).collect();
            seasons.sort_unstable();
            seasons.dedup();
            for season in seasons {
                let values = (0..self.columns.len())
                    .map(|k| self.total(k, fraction, metric, |c| c.season == Some(season)))
                    .collect();
                row(format!("S{season}"), values);
            }
            let values = (0..self.columns.len()).map(|k| self.total(k, fraction, metric, |_| true)).collect();
            row("Total".to_string(), values);
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("budget,advertiser,strategy,parameter,wins,clicks,convs,cost_fen,score\n");
        for c in &self.cells {
            let parameter = match &c.strategy {
                StrategySpec::Mcpc { max_ecpc_fen } => format!("{max_ecpc_fen:?}"),
                other => other.parameter().map_or(String::new(), |p| p.to_string()),
            };
            writeln!(
                s,
                "{},{},{},{parameter},{},{},{},{:?},{}",
                c.fraction,
                self.campaigns[c.campaign].advertiser_id,
                self.columns[c.column].label(),
                c.result.wins,
                c.result.clicks,
                c.result.convs,
                c.result.cost_fen(),
                c.result.score
            )
            .unwrap();
        }
        s
    }
}

struct Scores {
    train: Vec<f64>,
    test: Vec<f64>,
}

/// Trains the CTR models the columns need, tunes every strategy on training
/// data under each budget fraction, then replays it on test data with the same
/// fraction of test cost.
pub fn run_experiment(
    data: &[CampaignData],
    columns: &[StrategyColumn],
    fractions: &[BudgetFraction],
    ctr: &CtrConfig,
    settings: &TuneSettings,
    exec: Exec,
) -> Result<ExperimentTable, ReplayError> {
    if data.is_empty() || columns.is_empty() || fractions.is_empty() {
        return Err(ReplayError::EmptyInput);
    }
    let mut kinds: Vec<CtrModelKind> = Vec::new();
    for col in columns {
        if col.family.needs_pctr() {
            let kind = col.model.ok_or(ReplayError::MissingCtrModel)?;
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
    }
    // scores[campaign][kind index]
    let mut scores: Vec<Vec<Scores>> = Vec::with_capacity(data.len());
    for d in data {
        let mut per_kind = Vec::new();
        for &kind in &kinds {
            let model = train_ctr_model(kind, &d.train, ctr, exec)?;
            per_kind.push(Scores { train: model.predict_cases(&d.train, exec)?, test: model.predict_cases(&d.test, exec)? });
        }
        log::debug!("campaign {}: CTR models ready", d.campaign.advertiser_id);
        scores.push(per_kind);
    }

    let mut jobs = Vec::new();
    for &fraction in fractions {
        for ci in 0..data.len() {
            for k in 0..columns.len() {
                jobs.push((fraction, ci, k));
            }
        }
    }
    let run = |&(fraction, ci, k): &(BudgetFraction, usize, usize)| -> Result<ExperimentCell, ReplayError> {
        let d = &data[ci];
        let col = columns[k];
        let s = col
            .model
            .filter(|_| col.family.needs_pctr())
            .map(|m| &scores[ci][kinds.iter().position(|&x| x == m).expect("trained above")]);
        let strategy = match col.family {
            StrategyFamily::Mcpc => StrategySpec::Mcpc { max_ecpc_fen: estimate_max_ecpc(&d.train)? },
            family => {
                tune(family, &d.train, fraction, settings, &d.campaign, s.map(|s| s.train.as_slice()), exec)?.best
            }
        };
        let budget = make_budget(&d.test, fraction)?;
        let result = simulate_scored(&d.test, &strategy, budget, &d.campaign, s.map(|s| s.test.as_slice()), None)?;
        Ok(ExperimentCell { campaign: ci, column: k, fraction, strategy, result })
    };
    let cells = exec.map(&jobs, run).into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentTable {
        campaigns: data.iter().map(|d| d.campaign).collect(),
        columns: columns.to_vec(),
        fractions: fractions.to_vec(),
        cells,
    })
}
