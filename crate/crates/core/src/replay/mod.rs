//! Offline auction replay.
//!
//! Cases are replayed in time order. Each case gets a bid (zero once the
//! budget is spent); the bid wins when it is strictly above both the logged
//! paying price and the floor, and a win pays the logged paying price and
//! collects the logged click and conversion.

mod experiment;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bidding::{compute_bid, BiddingError, CampaignSpec, StrategySpec};
use crate::exec::Exec;
use crate::logdata::AuctionCase;
use crate::models::{CtrPredictor, ModelError};

pub use experiment::{
    run_experiment, CampaignData, ExperimentCell, ExperimentTable, StrategyColumn, TableMetric,
};

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("budget fraction {0} is outside (0, 1]")]
    FractionOutOfRange(String),
    #[error("cases are not sorted by timestamp (case {index})")]
    UnsortedInput { index: usize },
    #[error("strategy needs a CTR model")]
    MissingCtrModel,
    #[error("got {found} pCTR values for {expected} cases")]
    PctrLength { expected: usize, found: usize },
    #[error("no cases to replay")]
    EmptyInput,
    #[error(transparent)]
    Bidding(#[from] Box<BiddingError>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<BiddingError> for ReplayError {
    fn from(e: BiddingError) -> Self {
        ReplayError::Bidding(Box::new(e))
    }
}

/// A budget as an exact fraction of total cost, at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BudgetFraction {
    num: u64,
    den: u64,
}

impl BudgetFraction {
    pub const ONE_32: BudgetFraction = BudgetFraction { num: 1, den: 32 };
    pub const ONE_8: BudgetFraction = BudgetFraction { num: 1, den: 8 };
    pub const ONE_HALF: BudgetFraction = BudgetFraction { num: 1, den: 2 };
    pub const ONE: BudgetFraction = BudgetFraction { num: 1, den: 1 };
    /// The three standard budget fractions.
    pub const STANDARD: [BudgetFraction; 3] = [Self::ONE_32, Self::ONE_8, Self::ONE_HALF];

    pub fn new(num: u64, den: u64) -> Result<Self, ReplayError> {
        if den == 0 || num == 0 || num > den {
            return Err(ReplayError::FractionOutOfRange(format!("{num}/{den}")));
        }
        Ok(BudgetFraction { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `floor(self * total)`, exact.
    pub fn of(self, total: u64) -> u64 {
        (total as u128 * self.num as u128 / self.den as u128) as u64
    }
}

impl fmt::Display for BudgetFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == self.den {
            f.write_str("1")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for BudgetFraction {
    type Err = ReplayError;

    /// Accepts `a/b`, a decimal such as `0.125`, or `1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ReplayError::FractionOutOfRange(s.to_string());
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse().map_err(|_| bad())?;
            let den = b.trim().parse().map_err(|_| bad())?;
            return BudgetFraction::new(num, den).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_num: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|x| x.checked_add(frac_num)).ok_or_else(bad)?;
        let g = gcd(num, den);
        BudgetFraction::new(num / g.max(1), den / g.max(1)).map_err(|_| bad())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Budget in milli-fen: `floor(fraction * sum of paying prices)`.
pub fn make_budget(cases: &[AuctionCase], fraction: BudgetFraction) -> Result<u64, ReplayError> {
    if cases.is_empty() {
        return Err(ReplayError::EmptyInput);
    }
    Ok(fraction.of(cases.iter().map(|c| c.paying_price()).sum()))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplayResult {
    pub wins: u64,
    pub clicks: u64,
    pub convs: u64,
    /// Sum of paying prices of won cases, fen x 1000.
    pub cost_milli: u64,
    /// `clicks + N * convs`.
    pub score: u64,
    /// Cases that received a bid computed with budget remaining.
    pub bids_submitted: u64,
    /// First case at which the budget was found spent.
    pub exhausted_at: Option<usize>,
    /// Won cases carrying a conversion without a click.
    pub converted_without_click: u64,
}

impl ReplayResult {
    pub fn cost_fen(&self) -> f64 {
        self.cost_milli as f64 / 1000.0
    }
}

/// One replayed case, for trace files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub index: usize,
    pub bid: u64,
    pub won: bool,
    /// Spend after this case.
    pub spent: u64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("index,bid,won,spent\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.index, r.bid, r.won as u8, r.spent));
    }
    s
}

fn check_sorted(cases: &[AuctionCase]) -> Result<(), ReplayError> {
    match cases.windows(2).position(|w| w[1].record.timestamp < w[0].record.timestamp) {
        Some(i) => Err(ReplayError::UnsortedInput { index: i + 1 }),
        None => Ok(()),
    }
}

/// Replays `cases` with precomputed pCTRs (required iff the strategy uses them).
pub fn simulate_scored(
    cases: &[AuctionCase],
    strategy: &StrategySpec,
    budget: u64,
    campaign: &CampaignSpec,
    pctr: Option<&[f64]>,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<ReplayResult, ReplayError> {
    check_sorted(cases)?;
    strategy.validate()?;
    if strategy.family().needs_pctr() {
        match pctr {
            None => return Err(ReplayError::MissingCtrModel),
            Some(p) if p.len() != cases.len() => {
                return Err(ReplayError::PctrLength { expected: cases.len(), found: p.len() })
            }
            _ => {}
        }
    }
    let mut rng = strategy.rand_stream();
    let mut r = ReplayResult::default();
    for (index, case) in cases.iter().enumerate() {
        let bid = if r.cost_milli >= budget {
            r.exhausted_at.get_or_insert(index);
            0
        } else {
            r.bids_submitted += 1;
            compute_bid(strategy, pctr.map(|p| p[index]), &mut rng)?
        };
        let won = bid > case.paying_price() && bid > case.floor_price();
        if won {
            r.wins += 1;
            r.cost_milli += case.paying_price();
            r.clicks += case.clicked as u64;
            r.convs += case.converted as u64;
            r.converted_without_click += (case.converted && !case.clicked) as u64;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow { index, bid, won, spent: r.cost_milli });
        }
    }
    r.score = campaign.kpi_score(r.clicks, r.convs);
    Ok(r)
}

/// Replays `cases`, scoring them with `model` when the strategy needs pCTR.
pub fn simulate(
    cases: &[AuctionCase],
    strategy: &StrategySpec,
    budget: u64,
    campaign: &CampaignSpec,
    model: Option<&CtrPredictor>,
    exec: Exec,
) -> Result<ReplayResult, ReplayError> {
    let pctr = match (strategy.family().needs_pctr(), model) {
        (true, None) => return Err(ReplayError::MissingCtrModel),
        (true, Some(m)) => Some(m.predict_cases(cases, exec)?),
        (false, _) => None,
    };
    simulate_scored(cases, strategy, budget, campaign, pctr.as_deref(), None)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::logdata::codec::tests::EXAMPLE;
    use crate::logdata::{parse_record, LogSchema, MoneyMilli, Timestamp};

    pub(crate) fn case(i: usize, paying: u64, floor: u64, clicked: bool, converted: bool) -> AuctionCase {
        let mut record = parse_record(EXAMPLE, LogSchema::EventLog).unwrap();
        record.timestamp = Timestamp::from_epoch_millis(1_370_000_000_000 + i as i64 * 1000).unwrap();
        record.paying_price = Some(MoneyMilli(paying));
        record.bid_price = MoneyMilli(paying + 1);
        record.slot_floor_price = MoneyMilli(floor);
        AuctionCase { record, clicked, converted }
    }

    fn campaign(n: u64) -> CampaignSpec {
        CampaignSpec { advertiser_id: 1, conversion_weight: n, season: None }
    }

    #[test]
    fn const_hand_simulation() {
        let cases = vec![case(0, 10, 0, false, false), case(1, 20, 0, false, false), case(2, 30, 0, false, false)];
        let r = simulate_scored(&cases, &StrategySpec::Const { price: 25 }, u64::MAX, &campaign(0), None, None).unwrap();
        assert_eq!((r.wins, r.cost_milli), (2, 30));
        assert_eq!(r.cost_fen(), 0.03);
        let r = simulate_scored(&cases, &StrategySpec::Const { price: 25 }, 0, &campaign(0), None, None).unwrap();
        assert_eq!((r.wins, r.cost_milli, r.bids_submitted, r.exhausted_at), (0, 0, 0, Some(0)));
    }

    #[test]
    fn strict_comparisons_and_overshoot() {
        let cases = vec![
            case(0, 25, 0, true, false),  // tie with paying price: loss
            case(1, 10, 25, true, false), // tie with floor: loss
            case(2, 24, 0, true, true),   // win, overshoots budget 5
            case(3, 1, 0, true, false),   // budget spent: bid 0
        ];
        let mut trace = Vec::new();
        let r = simulate_scored(&cases, &StrategySpec::Const { price: 25 }, 5, &campaign(2), None, Some(&mut trace))
            .unwrap();
        assert_eq!((r.wins, r.clicks, r.convs, r.score, r.cost_milli), (1, 1, 1, 3, 24));
        assert_eq!(r.exhausted_at, Some(3));
        assert_eq!(trace.iter().map(|t| t.bid).collect::<Vec<_>>(), [25, 25, 25, 0]);
        assert_eq!(trace_csv(&trace).lines().count(), 5);
    }

    #[test]
    fn errors() {
        let cases = vec![case(1, 10, 0, false, false), case(0, 10, 0, false, false)];
        let spec = StrategySpec::Const { price: 5 };
        assert_eq!(
            simulate_scored(&cases, &spec, 10, &campaign(0), None, None),
            Err(ReplayError::UnsortedInput { index: 1 })
        );
        let lin = StrategySpec::Lin { base_bid: 5, avg_ctr: 0.1 };
        assert_eq!(
            simulate_scored(&cases[..1], &lin, 10, &campaign(0), None, None),
            Err(ReplayError::MissingCtrModel)
        );
        assert_eq!(simulate(&cases[..1], &lin, 10, &campaign(0), None, Exec::Sequential), Err(ReplayError::MissingCtrModel));
    }

    #[test]
    fn budgets() {
        let cases: Vec<_> = (0..32).map(|i| case(i, 100_000, 0, false, false)).collect();
        assert_eq!(make_budget(&cases, BudgetFraction::ONE_32), Ok(100_000));
        assert_eq!(make_budget(&cases, BudgetFraction::ONE), Ok(3_200_000));
        assert!(matches!("2".parse::<BudgetFraction>(), Err(ReplayError::FractionOutOfRange(_))));
        assert!(BudgetFraction::new(2, 1).is_err());
        assert_eq!("1/32".parse::<BudgetFraction>(), Ok(BudgetFraction::ONE_32));
        assert_eq!("0.125".parse::<BudgetFraction>(), Ok(BudgetFraction::ONE_8));
        assert_eq!("1".parse::<BudgetFraction>(), Ok(BudgetFraction::ONE));
        assert!("0".parse::<BudgetFraction>().is_err());
        assert!("abc".parse::<BudgetFraction>().is_err());
        assert_eq!(BudgetFraction::ONE_32.to_string(), "1/32");
        assert_eq!(make_budget(&[], BudgetFraction::ONE), Err(ReplayError::EmptyInput));
    }

    #[test]
    fn sum_rule() {
        let cases: Vec<_> = (0..50).map(|i| case(i, 10 + i as u64, i as u64 % 7, i % 3 == 0, i % 9 == 0)).collect();
        let budget = make_budget(&cases, BudgetFraction::ONE).unwrap();
        let r = simulate_scored(&cases, &StrategySpec::Const { price: 1000 }, budget, &campaign(1), None, None).unwrap();
        assert_eq!(r.wins, 50);
        assert_eq!(r.clicks, cases.iter().filter(|c| c.clicked).count() as u64);
        assert_eq!(r.convs, cases.iter().filter(|c| c.converted).count() as u64);
    }
}
