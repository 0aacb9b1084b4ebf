//! The four baseline bidding strategies and their parameter tuning.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Exec;
use crate::logdata::AuctionCase;
use crate::replay::{make_budget, simulate_scored, BudgetFraction, ReplayError};

/// Default tuning grid for Const price, Rand upper bound and Lin base bid.
pub const DEFAULT_GRID: [u64; 11] = [2, 5, 10, 20, 30, 50, 75, 100, 150, 200, 300];

#[derive(Debug, Error, PartialEq)]
pub enum BiddingError {
    #[error("training data has no clicks")]
    NoClicks,
    #[error("{0} needs a pCTR for every case")]
    MissingPctr(StrategyFamily),
    #[error("invalid strategy: {0}")]
    InvalidSpec(String),
    #[error("{0} has no tunable parameter")]
    NotTunable(StrategyFamily),
    #[error("empty tuning grid")]
    EmptyGrid,
    #[error(transparent)]
    Replay(#[from] Box<ReplayError>),
}

impl From<ReplayError> for BiddingError {
    fn from(e: ReplayError) -> Self {
        BiddingError::Replay(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyFamily {
    Const,
    Rand,
    Mcpc,
    Lin,
}

impl StrategyFamily {
    pub const ALL: [StrategyFamily; 4] =
        [StrategyFamily::Const, StrategyFamily::Rand, StrategyFamily::Mcpc, StrategyFamily::Lin];

    pub fn name(self) -> &'static str {
        match self {
            StrategyFamily::Const => "const",
            StrategyFamily::Rand => "rand",
            StrategyFamily::Mcpc => "mcpc",
            StrategyFamily::Lin => "lin",
        }
    }

    pub fn needs_pctr(self) -> bool {
        matches!(self, StrategyFamily::Mcpc | StrategyFamily::Lin)
    }
}

impl fmt::Display for StrategyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyFamily {
    type Err = BiddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        StrategyFamily::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| BiddingError::InvalidSpec(format!("unknown strategy {s:?}")))
    }
}

/// A fully parameterised strategy. Prices are in CPM log units (fen x 1000).
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Const { price: u64 },
    /// Uniform integer in `[lower, upper]`, one draw per case while budget remains.
    Rand { lower: u64, upper: u64, seed: u64 },
    Mcpc { max_ecpc_fen: f64 },
    Lin { base_bid: u64, avg_ctr: f64 },
}

impl StrategySpec {
    pub fn family(&self) -> StrategyFamily {
        match self {
            StrategySpec::Const { .. } => StrategyFamily::Const,
            StrategySpec::Rand { .. } => StrategyFamily::Rand,
            StrategySpec::Mcpc { .. } => StrategyFamily::Mcpc,
            StrategySpec::Lin { .. } => StrategyFamily::Lin,
        }
    }

    pub fn validate(&self) -> Result<(), BiddingError> {
        let bad = |m: &str| Err(BiddingError::InvalidSpec(m.to_string()));
        match *self {
            StrategySpec::Rand { lower, upper, .. } if lower > upper => bad("rand lower bound exceeds upper bound"),
            StrategySpec::Mcpc { max_ecpc_fen } if !(max_ecpc_fen >= 0.0 && max_ecpc_fen.is_finite()) => {
                bad("max_ecpc_fen must be finite and >= 0")
            }
            StrategySpec::Lin { avg_ctr, .. } if !(avg_ctr > 0.0 && avg_ctr <= 1.0) => bad("avg_ctr must lie in (0, 1]"),
            _ => Ok(()),
        }
    }

    /// The draw stream for one replay run. Only Rand consumes it.
    pub fn rand_stream(&self) -> ChaCha8Rng {
        let seed = match self {
            StrategySpec::Rand { seed, .. } => *seed,
            _ => 0,
        };
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// The tuned parameter, if any.
    pub fn parameter(&self) -> Option<u64> {
        match *self {
            StrategySpec::Const { price } => Some(price),
            StrategySpec::Rand { upper, .. } => Some(upper),
            StrategySpec::Lin { base_bid, .. } => Some(base_bid),
            StrategySpec::Mcpc { .. } => None,
        }
    }

    pub fn to_kv(&self) -> String {
        let mut s = format!("strategy = {}\n", self.family());
        match self {
            StrategySpec::Const { price } => writeln!(s, "price = {price}"),
            StrategySpec::Rand { lower, upper, seed } => {
                writeln!(s, "lower = {lower}\nupper = {upper}\nseed = {seed}")
            }
            StrategySpec::Mcpc { max_ecpc_fen } => writeln!(s, "max_ecpc_fen = {max_ecpc_fen:?}"),
            StrategySpec::Lin { base_bid, avg_ctr } => writeln!(s, "base_bid = {base_bid}\navg_ctr = {avg_ctr:?}"),
        }
        .unwrap();
        s
    }

    /// Parses `key = value` lines (`#` comments) written by [`StrategySpec::to_kv`].
    pub fn from_kv(text: &str) -> Result<Self, BiddingError> {
        let mut pairs = Vec::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BiddingError::InvalidSpec(format!("expected key = value, got {line:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| -> Result<&str, BiddingError> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| BiddingError::InvalidSpec(format!("missing {key}")))
        };
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, BiddingError> {
            v.parse().map_err(|_| BiddingError::InvalidSpec(format!("{key}: cannot parse {v:?}")))
        }
        let spec = match get("strategy")?.parse::<StrategyFamily>()? {
            StrategyFamily::Const => StrategySpec::Const { price: num("price", get("price")?)? },
            StrategyFamily::Rand => StrategySpec::Rand {
                lower: get("lower").map_or(Ok(0), |v| num("lower", v))?,
                upper: num("upper", get("upper")?)?,
                seed: get("seed").map_or(Ok(0), |v| num("seed", v))?,
            },
            StrategyFamily::Mcpc => StrategySpec::Mcpc { max_ecpc_fen: num("max_ecpc_fen", get("max_ecpc_fen")?)? },
            StrategyFamily::Lin => StrategySpec::Lin {
                base_bid: num("base_bid", get("base_bid")?)?,
                avg_ctr: num("avg_ctr", get("avg_ctr")?)?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Const { price } => write!(f, "const({price})"),
            StrategySpec::Rand { lower, upper, seed } => write!(f, "rand([{lower},{upper}], seed {seed})"),
            StrategySpec::Mcpc { max_ecpc_fen } => write!(f, "mcpc({max_ecpc_fen:.4} fen)"),
            StrategySpec::Lin { base_bid, avg_ctr } => write!(f, "lin({base_bid}, avg_ctr {avg_ctr:.6})"),
        }
    }
}

/// Per-advertiser evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignSpec {
    pub advertiser_id: u32,
    /// KPI weight N in `clicks + N * conversions`.
    pub conversion_weight: u64,
    pub season: Option<u8>,
}

/// (advertiser, N, season) for the nine benchmark campaigns.
pub const KNOWN_CAMPAIGNS: [(u32, u64, u8); 9] = [
    (1458, 0, 2),
    (2259, 1, 3),
    (2261, 0, 3),
    (2821, 1, 3),
    (2997, 0, 3),
    (3358, 2, 2),
    (3386, 0, 2),
    (3427, 0, 2),
    (3476, 10, 2),
];

impl CampaignSpec {
    /// Benchmark settings for a known advertiser.
    pub fn known(advertiser_id: u32) -> Option<CampaignSpec> {
        KNOWN_CAMPAIGNS.iter().find(|c| c.0 == advertiser_id).map(|&(advertiser_id, n, season)| CampaignSpec {
            advertiser_id,
            conversion_weight: n,
            season: Some(season),
        })
    }

    /// Known settings, or N = `default_weight` and no season for other ids.
    pub fn for_advertiser(advertiser_id: u32, default_weight: u64) -> CampaignSpec {
        CampaignSpec::known(advertiser_id).unwrap_or(CampaignSpec {
            advertiser_id,
            conversion_weight: default_weight,
            season: None,
        })
    }

    pub fn kpi_score(&self, clicks: u64, convs: u64) -> u64 {
        kpi_score(clicks, convs, self.conversion_weight)
    }
}

/// `clicks + N * conversions`.
pub fn kpi_score(clicks: u64, convs: u64, conversion_weight: u64) -> u64 {
    clicks + conversion_weight * convs
}

/// Training eCPC in fen: (sum of paying prices / 1000) / clicks.
pub fn estimate_max_ecpc(train: &[AuctionCase]) -> Result<f64, BiddingError> {
    let (cost, clicks) = train.iter().fold((0u64, 0u64), |(c, k), case| (c + case.paying_price(), k + case.clicked as u64));
    if clicks == 0 {
        return Err(BiddingError::NoClicks);
    }
    Ok(cost as f64 / 1000.0 / clicks as f64)
}

/// Training click-through rate, the `avg_ctr` of Lin.
pub fn estimate_avg_ctr(train: &[AuctionCase]) -> Result<f64, BiddingError> {
    let clicks = train.iter().filter(|c| c.clicked).count();
    if clicks == 0 {
        return Err(BiddingError::NoClicks);
    }
    Ok(clicks as f64 / train.len() as f64)
}

fn round_bid(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        0
    } else {
        // saturating float-to-int cast
        (x + 0.5).floor() as u64
    }
}

/// Bid for one case. `rng` is the run's draw stream (see [`StrategySpec::rand_stream`]).
pub fn compute_bid(spec: &StrategySpec, pctr: Option<f64>, rng: &mut ChaCha8Rng) -> Result<u64, BiddingError> {
    let need = || pctr.ok_or(BiddingError::MissingPctr(spec.family()));
    Ok(match *spec {
        StrategySpec::Const { price } => price,
        StrategySpec::Rand { lower, upper, .. } => rng.gen_range(lower..=upper),
        StrategySpec::Mcpc { max_ecpc_fen } => round_bid(max_ecpc_fen * need()? * 1000.0),
        StrategySpec::Lin { base_bid, avg_ctr } => round_bid(base_bid as f64 * need()? / avg_ctr),
    })
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub parameter: u64,
    pub clicks: u64,
    pub convs: u64,
    pub cost_fen: f64,
    pub score: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: StrategySpec,
    pub points: Vec<GridPoint>,
}

impl TuneOutcome {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,clicks,convs,cost_fen,score\n");
        for p in &self.points {
            writeln!(s, "{},{},{},{:?},{}", p.parameter, p.clicks, p.convs, p.cost_fen, p.score).unwrap();
        }
        s
    }
}

/// Settings shared by every tuning run.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneSettings {
    pub grid: Vec<u64>,
    pub rand_lower: u64,
    pub rand_seed: u64,
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings { grid: DEFAULT_GRID.to_vec(), rand_lower: 0, rand_seed: 1 }
    }
}

/// Replays `train` once per grid point with budget `fraction` of the training
/// cost and keeps the best KPI score; ties go to the smaller parameter.
pub fn tune(
    family: StrategyFamily,
    train: &[AuctionCase],
    fraction: BudgetFraction,
    settings: &TuneSettings,
    campaign: &CampaignSpec,
    pctr: Option<&[f64]>,
    exec: Exec,
) -> Result<TuneOutcome, BiddingError> {
    if family == StrategyFamily::Mcpc {
        return Err(BiddingError::NotTunable(family));
    }
    let mut grid = settings.grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(BiddingError::EmptyGrid);
    }
    let avg_ctr = if family == StrategyFamily::Lin { estimate_avg_ctr(train)? } else { 0.0 };
    let budget = make_budget(train, fraction)?;
    let make = |parameter: u64| match family {
        StrategyFamily::Const => StrategySpec::Const { price: parameter },
        StrategyFamily::Rand => StrategySpec::Rand {
            lower: settings.rand_lower.min(parameter),
            upper: parameter,
            seed: settings.rand_seed,
        },
        StrategyFamily::Lin => StrategySpec::Lin { base_bid: parameter, avg_ctr },
        StrategyFamily::Mcpc => unreachable!("rejected above"),
    };
    let results = exec.map(&grid, |&parameter| {
        simulate_scored(train, &make(parameter), budget, campaign, pctr, None).map(|r| GridPoint {
            parameter,
            clicks: r.clicks,
            convs: r.convs,
            cost_fen: r.cost_fen(),
            score: r.score,
        })
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut best = &points[0];
    for p in &points[1..] {
        if p.score > best.score {
            best = p;
        }
    }
    Ok(TuneOutcome { best: make(best.parameter), points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn bid_formulas() {
        let mut r = rng();
        assert_eq!(compute_bid(&StrategySpec::Const { price: 300 }, None, &mut r), Ok(300));
        let lin = StrategySpec::Lin { base_bid: 69, avg_ctr: 0.0008 };
        assert_eq!(compute_bid(&lin, Some(0.0008), &mut r), Ok(69));
        let mcpc = StrategySpec::Mcpc { max_ecpc_fen: 86.55 };
        assert_eq!(compute_bid(&mcpc, Some(0.0008), &mut r), Ok(69));
        assert_eq!(compute_bid(&mcpc, None, &mut r), Err(BiddingError::MissingPctr(StrategyFamily::Mcpc)));
        // half rounds up
        let lin = StrategySpec::Lin { base_bid: 5, avg_ctr: 0.5 };
        assert_eq!(compute_bid(&lin, Some(0.25), &mut r), Ok(3));
    }

    #[test]
    fn rand_mean_and_reproducibility() {
        let spec = StrategySpec::Rand { lower: 0, upper: 300, seed: 9 };
        let draw = |n: usize| {
            let mut r = spec.rand_stream();
            (0..n).map(|_| compute_bid(&spec, None, &mut r).unwrap()).collect::<Vec<_>>()
        };
        let a = draw(100_000);
        assert_eq!(a, draw(100_000));
        let mean = a.iter().sum::<u64>() as f64 / a.len() as f64;
        assert!((mean - 150.0).abs() < 1.5, "{mean}");
        assert!(a.iter().all(|&b| b <= 300));
    }

    #[test]
    fn max_ecpc() {
        use crate::logdata::{codec::tests::EXAMPLE, parse_record, LogSchema, MoneyMilli};
        let mut record = parse_record(EXAMPLE, LogSchema::EventLog).unwrap();
        record.paying_price = Some(MoneyMilli(1000));
        let clicked = AuctionCase { record, clicked: true, converted: false };
        assert_eq!(estimate_max_ecpc(std::slice::from_ref(&clicked)), Ok(1.0));
        let unclicked = AuctionCase { clicked: false, ..clicked };
        assert_eq!(estimate_max_ecpc(&[unclicked]), Err(BiddingError::NoClicks));
    }

    #[test]
    fn table_campaigns() {
        assert_eq!(CampaignSpec::known(3476).unwrap().conversion_weight, 10);
        assert_eq!(CampaignSpec::known(2259).unwrap().season, Some(3));
        assert_eq!(CampaignSpec::known(3476).unwrap().kpi_score(205, 3), 235);
        assert_eq!(CampaignSpec::for_advertiser(9001, 0).season, None);
    }

    #[test]
    fn kv_round_trip() {
        for spec in [
            StrategySpec::Const { price: 80 },
            StrategySpec::Rand { lower: 0, upper: 120, seed: 4 },
            StrategySpec::Mcpc { max_ecpc_fen: 86.55 },
            StrategySpec::Lin { base_bid: 50, avg_ctr: 0.0008 },
        ] {
            assert_eq!(StrategySpec::from_kv(&spec.to_kv()), Ok(spec));
        }
        assert!(StrategySpec::from_kv("strategy = lin\nbase_bid = 5\navg_ctr = 0").is_err());
        assert!(StrategySpec::from_kv("strategy = bogus").is_err());
        assert!(StrategySpec::from_kv("strategy = rand\nlower = 9\nupper = 3").is_err());
    }

    fn tune_fixture() -> Vec<AuctionCase> {
        use crate::replay::tests::case;
        // expensive unclicked traffic first, then cheap clicks
        (0..10).map(|i| if i < 5 { case(i, 200, 0, false, false) } else { case(i, 40, 0, true, false) }).collect()
    }

    fn settings(grid: &[u64]) -> TuneSettings {
        TuneSettings { grid: grid.to_vec(), ..TuneSettings::default() }
    }

    #[test]
    fn tune_picks_best_point() {
        let cases = tune_fixture();
        let camp = CampaignSpec::for_advertiser(1, 0);
        let half = BudgetFraction::ONE_HALF;
        let out = tune(StrategyFamily::Const, &cases, half, &settings(&[300, 10, 50]), &camp, None, Exec::Parallel)
            .unwrap();
        assert_eq!(out.best, StrategySpec::Const { price: 50 });
        let clicks: Vec<u64> = out.points.iter().map(|p| p.clicks).collect();
        // 300 spends the budget on the first three expensive cases
        assert_eq!(clicks, [0, 5, 0]);
        assert_eq!(out.to_csv().lines().count(), 4);
    }

    #[test]
    fn tune_ties_and_single_point() {
        let cases = tune_fixture();
        let camp = CampaignSpec::for_advertiser(1, 0);
        let half = BudgetFraction::ONE_HALF;
        let out = tune(StrategyFamily::Const, &cases, half, &settings(&[60, 50]), &camp, None, Exec::Sequential).unwrap();
        assert_eq!(out.best, StrategySpec::Const { price: 50 });
        let out = tune(StrategyFamily::Const, &cases, half, &settings(&[10]), &camp, None, Exec::Sequential).unwrap();
        assert_eq!(out.best, StrategySpec::Const { price: 10 });
        assert_eq!(out.points[0].score, 0);
    }

    #[test]
    fn tune_errors_and_lin() {
        let cases = tune_fixture();
        let camp = CampaignSpec::for_advertiser(1, 0);
        let one = BudgetFraction::ONE;
        let s = TuneSettings::default();
        assert_eq!(
            tune(StrategyFamily::Mcpc, &cases, one, &s, &camp, None, Exec::Sequential),
            Err(BiddingError::NotTunable(StrategyFamily::Mcpc))
        );
        assert_eq!(tune(StrategyFamily::Const, &cases, one, &settings(&[]), &camp, None, Exec::Sequential), Err(BiddingError::EmptyGrid));
        assert!(tune(StrategyFamily::Lin, &cases, one, &s, &camp, None, Exec::Sequential).is_err());
        // a perfect predictor lets Lin reach every click while skipping the expensive cases
        let pctr: Vec<f64> = cases.iter().map(|c| if c.clicked { 0.9 } else { 0.01 }).collect();
        let out = tune(StrategyFamily::Lin, &cases, BudgetFraction::ONE_HALF, &s, &camp, Some(&pctr), Exec::Sequential)
            .unwrap();
        assert_eq!(out.points.iter().map(|p| p.clicks).max(), Some(5));
        let StrategySpec::Lin { avg_ctr, .. } = out.best else { panic!() };
        assert_eq!(avg_ctr, 0.5);
    }
}
