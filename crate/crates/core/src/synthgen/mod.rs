//! Synthetic train/test logs with a known click model.
//!
//! Clicks are drawn from a logistic model over one-hot categories (region,
//! city, ad exchange, slot size, user tags); market prices from a truncated
//! log-normal. Every sampling decision uses integer-seeded ChaCha streams and
//! `libm` transcendental functions, so output is identical across platforms
//! and across sequential and parallel generation.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Exec;
use crate::logdata::{
    write_record, AuctionCase, LogError, LogRecord, LogSchema, LogType, MoneyMilli, SlotFormat, SlotVisibility,
    Strictness, Timestamp,
};

pub use config::{SynthConfig, TrueWeights, WeightDomain};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("degenerate config: {0}")]
    DegenerateConfig(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Slot sizes offered by the generator, most common first.
pub const SLOT_SIZES: [(u32, u32); 12] = [
    (300, 250),
    (728, 90),
    (1000, 90),
    (160, 600),
    (336, 280),
    (950, 90),
    (200, 200),
    (360, 300),
    (468, 60),
    (120, 600),
    (250, 250),
    (960, 90),
];

const USER_AGENTS: [&str; 8] = [
    "Mozilla/5.0 (compatible; MSIE 9.0; Windows NT 6.1; WOW64; Trident/5.0)",
    "Mozilla/5.0 (Windows NT 6.1) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/28.0.1500.95 Safari/537.36",
    "Mozilla/4.0 (compatible; MSIE 8.0; Windows NT 5.1; Trident/4.0)",
    "Mozilla/5.0 (Windows NT 6.1; rv:22.0) Gecko/20100101 Firefox/22.0",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 10_8_4) AppleWebKit/536.30.1 (KHTML, like Gecko) Version/6.0.5 Safari/536.30.1",
    "Mozilla/5.0 (iPhone; CPU iPhone OS 6_1_4 like Mac OS X) AppleWebKit/536.26 (KHTML, like Gecko) Version/6.0 Mobile/10B350 Safari/8536.25",
    "Mozilla/5.0 (Linux; U; Android 4.0.4; zh-cn; MI 1S Build/IMM76D) AppleWebKit/534.30 (KHTML, like Gecko) Version/4.0 Mobile Safari/534.30",
    "Mozilla/4.0 (compatible; MSIE 7.0; Windows NT 5.1; Trident/4.0; SE 2.X MetaSr 1.0)",
];

const ZIPF_EXPONENT: f64 = 1.1;
const CHUNK: usize = 4096;
const N_DOMAINS: usize = 40;
const N_CREATIVES: usize = 4;
const TAG_BASE: u64 = 10_000;

const STREAM_WEIGHTS: u64 = 0;
const STREAM_POOLS: u64 = 1;
const STREAM_CHUNKS: u64 = 16;

/// Known click model behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Weights in [`SynthConfig::weight_index`] layout (bias excluded).
    pub weights: Vec<f64>,
    pub bias: f64,
    pub train_probs: Vec<f64>,
    pub test_probs: Vec<f64>,
    pub train_ctr: f64,
    pub test_ctr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Vec<AuctionCase>,
    pub test: Vec<AuctionCase>,
    pub truth: GroundTruth,
}

/// Cumulative-weight sampler for a Zipf-skewed categorical.
#[derive(Debug, Clone)]
struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize) -> Self {
        let mut total = 0.0;
        let cdf = (0..n)
            .map(|k| {
                total += 1.0 / libm::pow((k + 1) as f64, ZIPF_EXPONENT);
                total
            })
            .collect();
        Zipf { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cdf.last().expect("non-empty domain");
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(std::f64::consts::TAU * u2)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

fn hex_id(rng: &mut ChaCha8Rng, len: usize) -> String {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    (0..len).map(|_| HEX[rng.gen_range(0..16)] as char).collect()
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Pools {
    domains: Vec<String>,
    creatives: Vec<Vec<String>>,
    key_page: String,
}

struct Samplers {
    region: Zipf,
    city: Zipf,
    exchange: Zipf,
    size: Zipf,
    tag: Zipf,
    agent: Zipf,
    domain: Zipf,
    visibility: Zipf,
    format: Zipf,
}

struct Generator<'a> {
    config: &'a SynthConfig,
    weights: Vec<f64>,
    pools: Pools,
    samplers: Samplers,
    start_ms: i64,
    step_ms: i64,
}

impl Generator<'_> {
    fn case(&self, index: usize, rng: &mut ChaCha8Rng) -> (AuctionCase, f64) {
        let cfg = self.config;
        let s = &self.samplers;
        let region = s.region.sample(rng);
        let city = s.city.sample(rng);
        let exchange = s.exchange.sample(rng);
        let size = s.size.sample(rng);
        let n_tags = rng.gen_range(0..=cfg.max_tags_per_user);
        let mut tags: Vec<usize> = Vec::with_capacity(n_tags);
        for _ in 0..n_tags {
            let t = s.tag.sample(rng);
            if !tags.contains(&t) {
                tags.push(t);
            }
        }

        let w = |d: WeightDomain, k: usize| self.weights[cfg.weight_index(d, k)];
        let mut signal = w(WeightDomain::Region, region)
            + w(WeightDomain::City, city)
            + w(WeightDomain::Exchange, exchange)
            + w(WeightDomain::SlotSize, size);
        for &t in &tags {
            signal += w(WeightDomain::Tag, t);
        }
        let p = sigmoid(cfg.bias + signal).clamp(1e-12, 1.0 - 1e-12);
        let clicked = rng.gen::<f64>() < p;
        let converted = clicked && rng.gen::<f64>() < cfg.conversion_given_click;

        let location = cfg.price_location + cfg.price_click_coupling * signal;
        let mut price = 0u64;
        for attempt in 0..64 {
            let x = libm::exp(location + cfg.price_scale * standard_normal(rng)).round();
            if (1.0..=cfg.max_price as f64).contains(&x) || attempt == 63 {
                price = x.clamp(1.0, cfg.max_price as f64) as u64;
                break;
            }
        }
        let floor = if rng.gen::<f64>() < cfg.floor_rate {
            rng.gen_range(1..=(price + price / 4).min(cfg.max_price))
        } else {
            0
        };

        let jitter = if self.step_ms > 1 { rng.gen_range(0..self.step_ms) } else { 0 };
        let ts = Timestamp::from_epoch_millis(self.start_ms + index as i64 * self.step_ms + jitter)
            .expect("timestamp in range");
        let (width, height) = SLOT_SIZES[size];
        let domain_ix = s.domain.sample(rng);
        let creative = &self.pools.creatives[size][rng.gen_range(0..N_CREATIVES)];
        let visibility = [SlotVisibility::FirstView, SlotVisibility::SecondView, SlotVisibility::ThirdView, SlotVisibility::Na]
            [s.visibility.sample(rng)]
        .clone();
        let format = [SlotFormat::Fixed, SlotFormat::Na, SlotFormat::Pop, SlotFormat::Float][s.format.sample(rng)].clone();

        let record = LogRecord {
            bid_id: hex_id(rng, 32),
            timestamp: ts,
            log_type: Some(LogType::Impression),
            ipinyou_id: hex_id(rng, 24),
            user_agent: USER_AGENTS[s.agent.sample(rng)].to_string(),
            ip: format!("{}.{}.{}.*", rng.gen_range(1..224), rng.gen_range(0..256), rng.gen_range(0..256)),
            region: cfg.region_code(region),
            city: cfg.city_code(city),
            ad_exchange: exchange as i64 + 1,
            domain: self.pools.domains[domain_ix].clone(),
            url: hex_id(rng, 32),
            anonymous_url_id: None,
            slot_id: format!("mm_{}_{}x{}", domain_ix, width, height),
            slot_width: width,
            slot_height: height,
            slot_visibility: visibility,
            slot_format: format,
            slot_floor_price: MoneyMilli(floor),
            creative_id: creative.clone(),
            bid_price: MoneyMilli(cfg.max_price + 1),
            paying_price: Some(MoneyMilli(price)),
            key_page_url: Some(self.pools.key_page.clone()),
            advertiser_id: cfg.advertiser_id,
            user_tags: tags.iter().map(|&t| TAG_BASE + t as u64).collect(),
        };
        (AuctionCase { record, clicked, converted }, p)
    }
}

/// Generates a dataset. Deterministic in `config.seed`; `exec` only changes speed.
pub fn generate(config: &SynthConfig, exec: Exec) -> Result<SynthDataset, SynthError> {
    config.validate()?;

    let weights = match &config.true_weights {
        TrueWeights::Explicit(w) => w.clone(),
        TrueWeights::Random { scale } => {
            let mut rng = chunk_rng(config.seed, STREAM_WEIGHTS);
            (0..config.weight_dim()).map(|_| scale * standard_normal(&mut rng)).collect()
        }
    };

    let mut pool_rng = chunk_rng(config.seed, STREAM_POOLS);
    let pools = Pools {
        domains: (0..N_DOMAINS).map(|_| hex_id(&mut pool_rng, 20)).collect(),
        creatives: SLOT_SIZES.iter().map(|_| (0..N_CREATIVES).map(|_| hex_id(&mut pool_rng, 18)).collect()).collect(),
        key_page: hex_id(&mut pool_rng, 18),
    };

    let total = config.n_train + config.n_test;
    let span_ms = config.span_days as i64 * 86_400_000;
    let generator = Generator {
        config,
        weights,
        pools,
        samplers: Samplers {
            region: Zipf::new(config.n_regions),
            city: Zipf::new(config.n_cities),
            exchange: Zipf::new(config.n_exchanges),
            size: Zipf::new(config.n_slot_sizes),
            tag: Zipf::new(config.n_tags.max(1)),
            agent: Zipf::new(USER_AGENTS.len()),
            domain: Zipf::new(N_DOMAINS),
            visibility: Zipf::new(4),
            format: Zipf::new(4),
        },
        start_ms: config.start.epoch_millis(),
        step_ms: (span_ms / total as i64).max(1),
    };

    let n_chunks = total.div_ceil(CHUNK);
    let chunks = exec.map_range(n_chunks, |c| {
        let mut rng = chunk_rng(config.seed, STREAM_CHUNKS + c as u64);
        let end = ((c + 1) * CHUNK).min(total);
        (c * CHUNK..end).map(|i| generator.case(i, &mut rng)).collect::<Vec<_>>()
    });

    let mut cases = Vec::with_capacity(total);
    let mut probs = Vec::with_capacity(total);
    for (case, p) in chunks.into_iter().flatten() {
        cases.push(case);
        probs.push(p);
    }

    if probs.iter().all(|&p| p <= 1e-12) || probs.iter().all(|&p| p >= 1.0 - 1e-12) {
        return Err(SynthError::DegenerateConfig(
            "click probabilities are numerically 0 or 1 for every case".into(),
        ));
    }

    let test = cases.split_off(config.n_train);
    let test_probs = probs.split_off(config.n_train);
    let ctr = |c: &[AuctionCase]| c.iter().filter(|c| c.clicked).count() as f64 / c.len() as f64;
    let truth = GroundTruth {
        weights: generator.weights,
        bias: config.bias,
        train_probs: probs,
        test_probs,
        train_ctr: ctr(&cases),
        test_ctr: ctr(&test),
    };
    Ok(SynthDataset { train: cases, test, truth })
}

/// Paths of the three event files of one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFiles {
    pub impressions: PathBuf,
    pub clicks: PathBuf,
    pub conversions: PathBuf,
}

impl DatasetFiles {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetFiles {
            impressions: dir.join("imp.txt"),
            clicks: dir.join("clk.txt"),
            conversions: dir.join("cnv.txt"),
        }
    }
}

/// Writes `imp.txt`, `clk.txt` and `cnv.txt` event logs for `cases` into `dir`.
pub fn write_dataset(cases: &[AuctionCase], dir: &Path) -> Result<DatasetFiles, SynthError> {
    fs::create_dir_all(dir)?;
    let files = DatasetFiles::in_dir(dir);
    let mut imp = BufWriter::new(fs::File::create(&files.impressions)?);
    let mut clk = BufWriter::new(fs::File::create(&files.clicks)?);
    let mut cnv = BufWriter::new(fs::File::create(&files.conversions)?);
    let mut line = String::with_capacity(512);

    let mut emit = |out: &mut BufWriter<fs::File>, record: &LogRecord| -> Result<(), SynthError> {
        line.clear();
        write_record(&mut line, record, LogSchema::EventLog, Strictness::Strict)?;
        line.push('\n');
        out.write_all(line.as_bytes())?;
        Ok(())
    };

    for case in cases {
        emit(&mut imp, &case.record)?;
        let later = |kind: LogType, offset_ms: i64| {
            let mut r = case.record.clone();
            r.log_type = Some(kind);
            r.timestamp = Timestamp::from_epoch_millis(r.timestamp.epoch_millis() + offset_ms).unwrap_or(r.timestamp);
            r
        };
        if case.clicked {
            emit(&mut clk, &later(LogType::Click, 5_000))?;
        }
        if case.converted {
            emit(&mut cnv, &later(LogType::Conversion, 600_000))?;
        }
    }
    imp.flush()?;
    clk.flush()?;
    cnv.flush()?;
    Ok(files)
}
