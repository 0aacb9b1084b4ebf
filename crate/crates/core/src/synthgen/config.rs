use std::fmt::Write as _;

use super::{SynthError, SLOT_SIZES};
use crate::logdata::Timestamp;

/// Feature domains carrying click-model weights, in weight-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightDomain {
    Region,
    City,
    Exchange,
    SlotSize,
    Tag,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrueWeights {
    /// Independent N(0, scale^2) draws from the seed.
    Random { scale: f64 },
    /// One weight per category in [`SynthConfig::weight_index`] layout.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_regions: usize,
    pub n_cities: usize,
    pub n_exchanges: usize,
    pub n_slot_sizes: usize,
    pub n_tags: usize,
    pub max_tags_per_user: usize,
    pub true_weights: TrueWeights,
    pub bias: f64,
    /// Log-normal location (log of the untruncated median price).
    pub price_location: f64,
    pub price_scale: f64,
    pub max_price: u64,
    /// Fraction of cases with a nonzero floor price.
    pub floor_rate: f64,
    pub conversion_given_click: f64,
    /// Shifts the price location by `coupling * click-logit signal`; 0 keeps
    /// prices independent of the click model.
    pub price_click_coupling: f64,
    pub advertiser_id: u32,
    pub start: Timestamp,
    pub span_days: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_train: 100_000,
            n_test: 20_000,
            n_regions: 30,
            n_cities: 120,
            n_exchanges: 3,
            n_slot_sizes: 8,
            n_tags: 60,
            max_tags_per_user: 6,
            true_weights: TrueWeights::Random { scale: 0.7 },
            bias: -6.0,
            price_location: 70f64.ln(),
            price_scale: 0.6,
            max_price: 300,
            floor_rate: 0.3,
            conversion_given_click: 0.1,
            price_click_coupling: 0.0,
            advertiser_id: 9001,
            start: Timestamp::parse("20130606000000000").expect("valid literal"),
            span_days: 10,
        }
    }
}

impl SynthConfig {
    pub fn domain_size(&self, domain: WeightDomain) -> usize {
        match domain {
            WeightDomain::Region => self.n_regions,
            WeightDomain::City => self.n_cities,
            WeightDomain::Exchange => self.n_exchanges,
            WeightDomain::SlotSize => self.n_slot_sizes,
            WeightDomain::Tag => self.n_tags,
        }
    }

    pub fn weight_dim(&self) -> usize {
        self.n_regions + self.n_cities + self.n_exchanges + self.n_slot_sizes + self.n_tags
    }

    /// Position of category `k` of `domain` in the weight vector.
    pub fn weight_index(&self, domain: WeightDomain, k: usize) -> usize {
        use WeightDomain::*;
        let offset: usize = [Region, City, Exchange, SlotSize, Tag]
            .iter()
            .take_while(|d| **d != domain)
            .map(|d| self.domain_size(*d))
            .sum();
        offset + k
    }

    pub fn region_code(&self, k: usize) -> i64 {
        k as i64 + 1
    }

    pub fn city_code(&self, k: usize) -> i64 {
        k as i64 + 101
    }

    /// Tag id written to logs for tag category `k`.
    pub fn tag_id(&self, k: usize) -> u64 {
        super::TAG_BASE + k as u64
    }

    pub fn set_median_price(&mut self, median: f64) {
        self.price_location = median.ln();
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be at least 1".into());
        }
        for (name, n) in [
            ("n_regions", self.n_regions),
            ("n_cities", self.n_cities),
            ("n_exchanges", self.n_exchanges),
            ("n_slot_sizes", self.n_slot_sizes),
        ] {
            if n == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.n_slot_sizes > SLOT_SIZES.len() {
            return bad(format!("n_slot_sizes is at most {}", SLOT_SIZES.len()));
        }
        if self.n_tags == 0 && self.max_tags_per_user > 0 {
            return bad("max_tags_per_user needs n_tags > 0".into());
        }
        for (name, p) in [
            ("floor_rate", self.floor_rate),
            ("conversion_given_click", self.conversion_given_click),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !self.price_scale.is_finite() || self.price_scale <= 0.0 {
            return bad("price_scale must be positive".into());
        }
        if self.max_price == 0 {
            return bad("max_price must be at least 1".into());
        }
        if !self.bias.is_finite() || !self.price_location.is_finite() || !self.price_click_coupling.is_finite() {
            return bad("bias, price_location and price_click_coupling must be finite".into());
        }
        match &self.true_weights {
            TrueWeights::Explicit(w) if w.len() != self.weight_dim() => {
                return bad(format!("expected {} weights, got {}", self.weight_dim(), w.len()))
            }
            TrueWeights::Explicit(w) if w.iter().any(|x| !x.is_finite()) => return bad("weights must be finite".into()),
            TrueWeights::Random { scale } if scale.is_nan() || *scale < 0.0 => return bad("weight_scale must be >= 0".into()),
            _ => {}
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep defaults.
    pub fn from_kv(text: &str) -> Result<Self, SynthError> {
        let mut cfg = SynthConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| SynthError::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key, value).map_err(|m| SynthError::InvalidConfig(format!("line {}: {m}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one field by its key-value name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "n_train" => self.n_train = num(key, value)?,
            "n_test" => self.n_test = num(key, value)?,
            "n_regions" => self.n_regions = num(key, value)?,
            "n_cities" => self.n_cities = num(key, value)?,
            "n_exchanges" => self.n_exchanges = num(key, value)?,
            "n_slot_sizes" => self.n_slot_sizes = num(key, value)?,
            "n_tags" => self.n_tags = num(key, value)?,
            "max_tags_per_user" => self.max_tags_per_user = num(key, value)?,
            "weight_scale" => self.true_weights = TrueWeights::Random { scale: num(key, value)? },
            "weights" => {
                self.true_weights = TrueWeights::Explicit(
                    value.split(',').map(|w| num::<f64>(key, w.trim())).collect::<Result<_, _>>()?,
                )
            }
            "bias" => self.bias = num(key, value)?,
            "price_location" => self.price_location = num(key, value)?,
            "median_price" => self.set_median_price(num(key, value)?),
            "price_scale" => self.price_scale = num(key, value)?,
            "max_price" => self.max_price = num(key, value)?,
            "floor_rate" => self.floor_rate = num(key, value)?,
            "conversion_given_click" => self.conversion_given_click = num(key, value)?,
            "price_click_coupling" => self.price_click_coupling = num(key, value)?,
            "advertiser_id" => self.advertiser_id = num(key, value)?,
            "start" => self.start = Timestamp::parse(value).map_err(|e| e.to_string())?,
            "span_days" => self.span_days = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Renders the config in the format read by [`SynthConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("n_train", self.n_train.to_string());
        kv("n_test", self.n_test.to_string());
        kv("n_regions", self.n_regions.to_string());
        kv("n_cities", self.n_cities.to_string());
        kv("n_exchanges", self.n_exchanges.to_string());
        kv("n_slot_sizes", self.n_slot_sizes.to_string());
        kv("n_tags", self.n_tags.to_string());
        kv("max_tags_per_user", self.max_tags_per_user.to_string());
        match &self.true_weights {
            TrueWeights::Random { scale } => kv("weight_scale", format!("{scale:?}")),
            TrueWeights::Explicit(w) => {
                kv("weights", w.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","))
            }
        }
        kv("bias", format!("{:?}", self.bias));
        kv("price_location", format!("{:?}", self.price_location));
        kv("price_scale", format!("{:?}", self.price_scale));
        kv("max_price", self.max_price.to_string());
        kv("floor_rate", format!("{:?}", self.floor_rate));
        kv("conversion_given_click", format!("{:?}", self.conversion_given_click));
        kv("price_click_coupling", format!("{:?}", self.price_click_coupling));
        kv("advertiser_id", self.advertiser_id.to_string());
        kv("start", self.start.to_string());
        kv("span_days", self.span_days.to_string());
        s
    }
}
