//! Campaign summaries and per-feature breakdowns.
//!
//! All accumulation uses integer counters (milli-fen for money) so partial
//! results merge exactly, whatever the chunking.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::exec::Exec;
use crate::features::{derive_fields, weekday_name};
use crate::logdata::AuctionCase;

const CHUNK: usize = 8192;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("unknown feature key {0:?}")]
    UnknownFeatureKey(String),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("no cases to break down")]
    EmptyInput,
}

/// Raw campaign counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CampaignTotals {
    pub bids: u64,
    pub imps: u64,
    pub clicks: u64,
    pub convs: u64,
    /// Sum of paying prices, fen x 1000.
    pub cost_milli: u64,
}

/// Derived campaign statistics. Ratios are fractions (not percentages);
/// money is in fen. A ratio is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignSummary {
    pub bids: u64,
    pub imps: u64,
    pub clicks: u64,
    pub convs: u64,
    pub cost_fen: f64,
    pub win_ratio: Option<f64>,
    pub ctr: Option<f64>,
    pub cvr: Option<f64>,
    pub cpm_fen: Option<f64>,
    pub ecpc_fen: Option<f64>,
}

fn ratio(num: f64, den: u64) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

impl CampaignTotals {
    pub fn add_case(&mut self, case: &AuctionCase) {
        self.imps += 1;
        self.clicks += case.clicked as u64;
        self.convs += case.converted as u64;
        self.cost_milli += case.paying_price();
    }

    pub fn merge(self, other: CampaignTotals) -> CampaignTotals {
        CampaignTotals {
            bids: self.bids + other.bids,
            imps: self.imps + other.imps,
            clicks: self.clicks + other.clicks,
            convs: self.convs + other.convs,
            cost_milli: self.cost_milli + other.cost_milli,
        }
    }

    /// Totals over impression cases; `bids` is taken as given (0 when unknown).
    pub fn from_cases(bids: u64, cases: &[AuctionCase], exec: Exec) -> CampaignTotals {
        let t = exec.fold_chunks(
            cases,
            CHUNK,
            CampaignTotals::default,
            |acc, c| acc.add_case(c),
            CampaignTotals::merge,
        );
        CampaignTotals { bids, ..t }
    }

    pub fn cost_fen(&self) -> f64 {
        self.cost_milli as f64 / 1000.0
    }

    pub fn summary(&self) -> CampaignSummary {
        let cost_fen = self.cost_fen();
        CampaignSummary {
            bids: self.bids,
            imps: self.imps,
            clicks: self.clicks,
            convs: self.convs,
            cost_fen,
            win_ratio: ratio(self.imps as f64, self.bids),
            ctr: ratio(self.clicks as f64, self.imps),
            cvr: ratio(self.convs as f64, self.clicks),
            cpm_fen: ratio(1000.0 * cost_fen, self.imps),
            ecpc_fen: ratio(cost_fen, self.clicks),
        }
    }
}

/// Table-style summary of impression cases. Pass `bid_count = 0` when the bid
/// log is unavailable; the win ratio is then absent.
pub fn campaign_summary(bid_count: u64, cases: &[AuctionCase], exec: Exec) -> CampaignSummary {
    CampaignTotals::from_cases(bid_count, cases, exec).summary()
}

fn opt(v: Option<f64>, scale: f64, digits: usize, suffix: &str) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.*}{suffix}", digits, x * scale))
}

/// Markdown table in the column order Adv, Bids, Imps, Clicks, Convs, Cost,
/// Win Ratio, CTR, CVR, CPM, eCPC.
pub fn summary_markdown(rows: &[(String, CampaignSummary)]) -> String {
    let mut s = String::from(
        "| Adv. | Bids | Imps | Clicks | Convs | Cost | Win Ratio | CTR | CVR | CPM | eCPC |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for (name, r) in rows {
        let bids = if r.bids > 0 { r.bids.to_string() } else { "-".into() };
        writeln!(
            s,
            "| {name} | {bids} | {} | {} | {} | {:.0} | {} | {} | {} | {} | {} |",
            r.imps,
            r.clicks,
            r.convs,
            r.cost_fen,
            opt(r.win_ratio, 100.0, 2, "%"),
            opt(r.ctr, 100.0, 3, "%"),
            opt(r.cvr, 100.0, 3, "%"),
            opt(r.cpm_fen, 1.0, 2, ""),
            opt(r.ecpc_fen, 1.0, 2, ""),
        )
        .unwrap();
    }
    s
}

/// CSV with the same columns as [`summary_markdown`]; ratios as fractions.
pub fn summary_csv(rows: &[(String, CampaignSummary)]) -> String {
    let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    let mut s = String::from("advertiser,bids,imps,clicks,convs,cost_fen,win_ratio,ctr,cvr,cpm_fen,ecpc_fen\n");
    for (name, r) in rows {
        writeln!(
            s,
            "{name},{},{},{},{},{:?},{},{},{},{},{}",
            r.bids,
            r.imps,
            r.clicks,
            r.convs,
            r.cost_fen,
            f(r.win_ratio),
            f(r.ctr),
            f(r.cvr),
            f(r.cpm_fen),
            f(r.ecpc_fen)
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKey {
    Weekday,
    Hour,
    Os,
    Browser,
    Region,
    SlotSize,
    Visibility,
    Format,
    Exchange,
    UserTag,
}

impl FeatureKey {
    pub const ALL: [FeatureKey; 10] = [
        FeatureKey::Weekday,
        FeatureKey::Hour,
        FeatureKey::Os,
        FeatureKey::Browser,
        FeatureKey::Region,
        FeatureKey::SlotSize,
        FeatureKey::Visibility,
        FeatureKey::Format,
        FeatureKey::Exchange,
        FeatureKey::UserTag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKey::Weekday => "weekday",
            FeatureKey::Hour => "hour",
            FeatureKey::Os => "os",
            FeatureKey::Browser => "browser",
            FeatureKey::Region => "region",
            FeatureKey::SlotSize => "slot_size",
            FeatureKey::Visibility => "visibility",
            FeatureKey::Format => "format",
            FeatureKey::Exchange => "exchange",
            FeatureKey::UserTag => "user_tag",
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKey {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StatsError::UnknownFeatureKey(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ctr,
    MarketPrice,
    Ecpc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ctr => "ctr",
            Metric::MarketPrice => "market_price",
            Metric::Ecpc => "ecpc",
        }
    }
}

impl FromStr for Metric {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Metric::Ctr, Metric::MarketPrice, Metric::Ecpc]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StatsError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub label: String,
    pub n: u64,
    /// `None` for eCPC groups without clicks.
    pub mean: Option<f64>,
    pub standard_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBreakdown {
    pub key: FeatureKey,
    pub metric: Metric,
    pub rows: Vec<BreakdownRow>,
}

/// Sort key: numeric groups order numerically, the rest lexicographically.
type GroupKey = (i64, String);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct GroupAcc {
    n: u64,
    clicks: u64,
    price_sum: u64,
    price_sq_sum: u128,
}

impl GroupAcc {
    fn add(&mut self, case: &AuctionCase) {
        let p = case.paying_price();
        self.n += 1;
        self.clicks += case.clicked as u64;
        self.price_sum += p;
        self.price_sq_sum += p as u128 * p as u128;
    }

    fn merge(&mut self, o: &GroupAcc) {
        self.n += o.n;
        self.clicks += o.clicks;
        self.price_sum += o.price_sum;
        self.price_sq_sum += o.price_sq_sum;
    }
}

fn groups_of(case: &AuctionCase, key: FeatureKey) -> Vec<GroupKey> {
    let r = &case.record;
    let text = |s: String| (0i64, s);
    let single = match key {
        FeatureKey::UserTag => return r.user_tags.iter().map(|&t| (t as i64, t.to_string())).collect(),
        FeatureKey::Weekday => {
            let d = r.timestamp.weekday();
            (d.num_days_from_monday() as i64, weekday_name(d).to_string())
        }
        FeatureKey::Hour => {
            let h = r.timestamp.hour();
            (h as i64, h.to_string())
        }
        FeatureKey::Os => text(derive_fields(r).os.as_str().to_string()),
        FeatureKey::Browser => text(derive_fields(r).browser.as_str().to_string()),
        FeatureKey::Region => (r.region, r.region.to_string()),
        FeatureKey::Exchange => (r.ad_exchange, r.ad_exchange.to_string()),
        FeatureKey::SlotSize => text(r.slot_size()),
        FeatureKey::Visibility => text(r.slot_visibility.as_str().to_string()),
        FeatureKey::Format => text(r.slot_format.as_str().to_string()),
    };
    vec![single]
}

fn row(label: String, g: &GroupAcc, metric: Metric) -> BreakdownRow {
    let n = g.n as f64;
    let (mean, standard_error) = match metric {
        Metric::Ctr => {
            let m = g.clicks as f64 / n;
            (Some(m), Some((m * (1.0 - m) / n).sqrt()))
        }
        Metric::MarketPrice => {
            let m = g.price_sum as f64 / n;
            let se = (g.n > 1).then(|| {
                // exact integer centred sum of squares: n Σp² - (Σp)²
                let ss = g.n as u128 * g.price_sq_sum - g.price_sum as u128 * g.price_sum as u128;
                let var = ss as f64 / (n * (n - 1.0));
                (var / n).sqrt()
            });
            (Some(m), se)
        }
        Metric::Ecpc => (ratio(g.price_sum as f64 / 1000.0, g.clicks), None),
    };
    BreakdownRow { label, n: g.n, mean, standard_error }
}

/// Mean and standard error of `metric` per group of `key`. Tags are ordered by
/// descending frequency (ties by tag id); other keys by group label.
pub fn feature_breakdown(
    cases: &[AuctionCase],
    key: FeatureKey,
    metric: Metric,
    exec: Exec,
) -> Result<FeatureBreakdown, StatsError> {
    if cases.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let groups: HashMap<GroupKey, GroupAcc> = exec.fold_chunks(
        cases,
        CHUNK,
        HashMap::new,
        |acc: &mut HashMap<GroupKey, GroupAcc>, c| {
            for g in groups_of(c, key) {
                acc.entry(g).or_default().add(c);
            }
        },
        |mut a, b| {
            for (k, g) in b {
                a.entry(k).or_default().merge(&g);
            }
            a
        },
    );
    let mut ordered: Vec<(GroupKey, GroupAcc)> = groups.into_iter().collect::<BTreeMap<_, _>>().into_iter().collect();
    if key == FeatureKey::UserTag {
        ordered.sort_by(|a, b| b.1.n.cmp(&a.1.n).then(a.0.cmp(&b.0)));
    }
    let rows = ordered.into_iter().map(|((_, label), g)| row(label, &g, metric)).collect();
    Ok(FeatureBreakdown { key, metric, rows })
}

impl FeatureBreakdown {
    /// `rank,group,n,mean,standard_error`; absent values are empty fields.
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        let mut s = String::from("rank,group,n,mean,standard_error\n");
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(s, "{},{},{},{},{}", i + 1, r.label, r.n, f(r.mean), f(r.standard_error)).unwrap();
        }
        s
    }
}
