#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtb_core::bidding::StrategySpec;
use rtb_core::logdata::{AuctionCase, LogRecord, LogSchema, LogType, MoneyMilli, SlotFormat, SlotVisibility, Timestamp};
use rtb_core::synthgen::{generate, SynthConfig};
use rtb_core::Exec;

/// A small synthetic campaign, time-sorted.
pub fn campaign(seed: u64, n: usize) -> Vec<AuctionCase> {
    let config = SynthConfig { seed, n_train: n, n_test: 1, bias: -3.0, floor_rate: 0.3, ..SynthConfig::default() };
    generate(&config, Exec::Sequential).expect("valid config").train
}

fn word(rng: &mut ChaCha8Rng, alphabet: &[u8], len: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.gen_range(len);
    (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char).collect()
}

const HEX: &[u8] = b"0123456789abcdef";
const TEXT: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ;:/.()_-*";

/// A random record valid for `schema`.
pub fn random_record(rng: &mut ChaCha8Rng, schema: LogSchema) -> LogRecord {
    let timestamp = Timestamp::from_epoch_millis(rng.gen_range(1_300_000_000_000..1_400_000_000_000)).unwrap();
    let visibility = match rng.gen_range(0..4) {
        0 => SlotVisibility::FirstView,
        1 => SlotVisibility::Na,
        2 => SlotVisibility::Other(rng.gen_range(0..300).to_string()),
        _ => SlotVisibility::TenthView,
    };
    let format = match rng.gen_range(0..4) {
        0 => SlotFormat::Fixed,
        1 => SlotFormat::Pop,
        2 => SlotFormat::Other(rng.gen_range(0..9).to_string()),
        _ => SlotFormat::Na,
    };
    let optional = |rng: &mut ChaCha8Rng| rng.gen_bool(0.5).then(|| word(rng, HEX, 8..=20));
    let anonymous_url_id = optional(rng);
    let bid_price = rng.gen_range(1..400u64);
    let (log_type, paying_price, key_page_url) = match schema {
        LogSchema::BidLog => (None, None, None),
        LogSchema::EventLog => {
            let kind = [LogType::Impression, LogType::Click, LogType::Conversion][rng.gen_range(0..3)];
            let paying = if kind == LogType::Impression { rng.gen_range(0..bid_price) } else { rng.gen_range(0..500) };
            (Some(kind), Some(MoneyMilli(paying)), optional(rng))
        }
    };
    let tags = rng.gen_range(0..5);
    LogRecord {
        bid_id: word(rng, HEX, 10..=32),
        timestamp,
        log_type,
        ipinyou_id: word(rng, HEX, 1..=24),
        user_agent: word(rng, TEXT, 1..=60),
        ip: format!("{}.{}.{}.*", rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256)),
        region: rng.gen_range(0..400),
        city: rng.gen_range(0..400),
        ad_exchange: rng.gen_range(1..4),
        domain: word(rng, HEX, 5..=20),
        url: word(rng, HEX, 5..=32),
        anonymous_url_id,
        slot_id: word(rng, TEXT, 1..=20).replace(' ', "_"),
        slot_width: rng.gen_range(0..1000),
        slot_height: rng.gen_range(0..1000),
        slot_visibility: visibility,
        slot_format: format,
        slot_floor_price: MoneyMilli(rng.gen_range(0..200)),
        creative_id: word(rng, HEX, 8..=32),
        bid_price: MoneyMilli(bid_price),
        paying_price,
        key_page_url,
        advertiser_id: rng.gen_range(1000..4000),
        user_tags: (0..tags).map(|_| rng.gen_range(10000..20000)).collect(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub wins: u64,
    pub clicks: u64,
    pub convs: u64,
    pub cost: u64,
    pub won: Vec<usize>,
}

/// Straight-line replay written without the library's bidding code.
pub fn reference_replay(cases: &[AuctionCase], spec: &StrategySpec, budget: u64, pctr: &[f64]) -> Outcome {
    let mut out = Outcome::default();
    let mut draws = match spec {
        StrategySpec::Rand { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    for (i, c) in cases.iter().enumerate() {
        if out.cost >= budget {
            continue;
        }
        let bid: u64 = match *spec {
            StrategySpec::Const { price } => price,
            StrategySpec::Rand { lower, upper, .. } => draws.as_mut().unwrap().gen_range(lower..=upper),
            StrategySpec::Mcpc { max_ecpc_fen } => half_up(max_ecpc_fen * pctr[i] * 1000.0),
            StrategySpec::Lin { base_bid, avg_ctr } => half_up(base_bid as f64 * pctr[i] / avg_ctr),
        };
        let paying = c.record.paying_price.unwrap().0;
        if bid > paying && bid > c.record.slot_floor_price.0 {
            out.wins += 1;
            out.cost += paying;
            out.clicks += u64::from(c.clicked);
            out.convs += u64::from(c.converted);
            out.won.push(i);
        }
    }
    out
}

fn half_up(x: f64) -> u64 {
    if x > 0.0 {
        (x + 0.5).floor() as u64
    } else {
        0
    }
}
