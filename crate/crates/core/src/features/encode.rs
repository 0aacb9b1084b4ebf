use std::collections::HashMap;
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_fields, FeatureError, Field, ENCODED_FIELDS};
use crate::logdata::{AuctionCase, LogRecord};

const HEADER: &str = "# rtb-encodings v1";

/// Numeric columns passed through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawField {
    SlotWidth,
    SlotHeight,
    FloorPrice,
    Hour,
}

impl RawField {
    const ALL: [RawField; 4] = [RawField::SlotWidth, RawField::SlotHeight, RawField::FloorPrice, RawField::Hour];

    fn name(self) -> &'static str {
        match self {
            RawField::SlotWidth => "slot_width",
            RawField::SlotHeight => "slot_height",
            RawField::FloorPrice => "floor_price",
            RawField::Hour => "hour",
        }
    }

    fn value(self, r: &LogRecord) -> f64 {
        match self {
            RawField::SlotWidth => r.slot_width as f64,
            RawField::SlotHeight => r.slot_height as f64,
            RawField::FloorPrice => r.slot_floor_price.0 as f64,
            RawField::Hour => r.timestamp.hour() as f64,
        }
    }
}

/// One position of a dense feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenseSlot {
    Freq(Field),
    Ctr(Field),
    /// Mean smoothed CTR over the record's tags.
    TagCtr,
    Raw(RawField),
}

impl fmt::Display for DenseSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenseSlot::Freq(field) => write!(f, "{field}:freq"),
            DenseSlot::Ctr(field) => write!(f, "{field}:ctr"),
            DenseSlot::TagCtr => f.write_str("user_tag:ctr"),
            DenseSlot::Raw(r) => f.write_str(r.name()),
        }
    }
}

impl std::str::FromStr for DenseSlot {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::Format(format!("unknown dense slot {s:?}"));
        if s == "user_tag:ctr" {
            return Ok(DenseSlot::TagCtr);
        }
        if let Some(raw) = RawField::ALL.into_iter().find(|r| r.name() == s) {
            return Ok(DenseSlot::Raw(raw));
        }
        let (name, kind) = s.split_once(':').ok_or_else(bad)?;
        let field = Field::from_name(name).ok_or_else(bad)?;
        match kind {
            "freq" => Ok(DenseSlot::Freq(field)),
            "ctr" => Ok(DenseSlot::Ctr(field)),
            _ => Err(bad()),
        }
    }
}

/// Ordered list of dense slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub slots: Vec<DenseSlot>,
}

impl Default for Manifest {
    fn default() -> Self {
        let mut slots = Vec::new();
        for f in ENCODED_FIELDS {
            slots.push(DenseSlot::Freq(f));
            slots.push(DenseSlot::Ctr(f));
        }
        slots.push(DenseSlot::TagCtr);
        slots.extend(RawField::ALL.map(DenseSlot::Raw));
        Manifest { slots }
    }
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFeatureVector {
    pub values: Vec<f64>,
}

/// Beta-prior smoothing for per-category CTR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// `alpha + beta = pseudo_count`, centred on the subset's global CTR.
    Prior { pseudo_count: f64 },
    Explicit { alpha: f64, beta: f64 },
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Prior { pseudo_count: 20.0 }
    }
}

/// Which training cases feed the encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingSubset {
    /// Earliest half by time (cases are time-sorted).
    #[default]
    FirstHalf,
    /// A seeded random half.
    RandomHalf { seed: u64 },
    All,
}

pub fn select_encoding_subset(train: &[AuctionCase], subset: EncodingSubset) -> Vec<&AuctionCase> {
    let half = train.len().div_ceil(2);
    match subset {
        EncodingSubset::FirstHalf => train[..half].iter().collect(),
        EncodingSubset::All => train.iter().collect(),
        EncodingSubset::RandomHalf { seed } => {
            let mut idx: Vec<usize> = (0..train.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            idx.truncate(half);
            idx.sort_unstable();
            idx.into_iter().map(|i| &train[i]).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Counts {
    imps: u64,
    clicks: u64,
}

/// Per-category frequency and smoothed CTR, fitted on a training subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEncodings {
    prior: f64,
    alpha: f64,
    beta: f64,
    manifest: Manifest,
    tables: HashMap<Field, HashMap<String, Counts>>,
}

impl CategoryEncodings {
    /// Global CTR of the fitting subset.
    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Training frequency of a category value (0 if unseen). Always 0 for tags.
    pub fn frequency(&self, field: Field, value: &str) -> u64 {
        if field == Field::UserTag {
            return 0;
        }
        self.tables.get(&field).and_then(|t| t.get(value)).map_or(0, |c| c.imps)
    }

    /// Smoothed CTR of a category value; the prior if unseen.
    pub fn ctr(&self, field: Field, value: &str) -> f64 {
        match self.tables.get(&field).and_then(|t| t.get(value)) {
            Some(c) => {
                let denom = c.imps as f64 + self.alpha + self.beta;
                if denom > 0.0 {
                    (c.clicks as f64 + self.alpha) / denom
                } else {
                    self.prior
                }
            }
            None => self.prior,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        writeln!(s, "prior\t{:?}", self.prior).unwrap();
        writeln!(s, "alpha\t{:?}", self.alpha).unwrap();
        writeln!(s, "beta\t{:?}", self.beta).unwrap();
        writeln!(s, "manifest\t{}", self.manifest.names().join(",")).unwrap();
        let mut fields: Vec<_> = self.tables.keys().copied().collect();
        fields.sort();
        for f in fields {
            let mut rows: Vec<_> = self.tables[&f].iter().collect();
            rows.sort_by(|a, b| a.0.cmp(b.0));
            for (v, c) in rows {
                writeln!(s, "{f}\t{v}\t{}\t{}", c.imps, c.clicks).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let bad = |m: String| FeatureError::Format(m);
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("missing encodings header".into()));
        }
        let mut kv = |key: &str| -> Result<String, FeatureError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('\t'))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {key}, got {line:?}")))
        };
        let num = |s: String| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let prior = num(kv("prior")?)?;
        let alpha = num(kv("alpha")?)?;
        let beta = num(kv("beta")?)?;
        let manifest = Manifest {
            slots: kv("manifest")?.split(',').map(str::parse).collect::<Result<_, _>>()?,
        };
        let mut tables: HashMap<Field, HashMap<String, Counts>> = HashMap::new();
        for line in lines {
            let parts: Vec<&str> = line.split('\t').collect();
            let [field, value, imps, clicks] = parts[..] else {
                return Err(bad(format!("bad row {line:?}")));
            };
            let field = Field::from_name(field).ok_or_else(|| bad(format!("unknown field {field:?}")))?;
            let parse = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad count {s:?}")));
            tables
                .entry(field)
                .or_default()
                .insert(value.to_string(), Counts { imps: parse(imps)?, clicks: parse(clicks)? });
        }
        Ok(CategoryEncodings { prior, alpha, beta, manifest, tables })
    }
}

/// Counts impressions and clicks per category value over `subset`.
pub fn build_encodings<'a>(
    subset: impl IntoIterator<Item = &'a AuctionCase>,
    smoothing: Smoothing,
) -> Result<CategoryEncodings, FeatureError> {
    let mut tables: HashMap<Field, HashMap<String, Counts>> = HashMap::new();
    let (mut imps, mut clicks) = (0u64, 0u64);
    for case in subset {
        let r = &case.record;
        let derived = derive_fields(r);
        let click = u64::from(case.clicked);
        imps += 1;
        clicks += click;
        for f in ENCODED_FIELDS {
            let v = f.value(r, &derived).expect("single-valued field");
            let c = tables.entry(f).or_default().entry(v).or_default();
            c.imps += 1;
            c.clicks += click;
        }
        let tags = tables.entry(Field::UserTag).or_default();
        for t in &r.user_tags {
            let c = tags.entry(t.to_string()).or_default();
            c.imps += 1;
            c.clicks += click;
        }
    }
    if imps == 0 {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let prior = clicks as f64 / imps as f64;
    let (alpha, beta) = match smoothing {
        Smoothing::Prior { pseudo_count } => (pseudo_count * prior, pseudo_count * (1.0 - prior)),
        Smoothing::Explicit { alpha, beta } => (alpha, beta),
    };
    Ok(CategoryEncodings { prior, alpha, beta, manifest: Manifest::default(), tables })
}

/// Dense encoding of `record` in `manifest` order. The manifest must be the
/// one the encodings were built with.
pub fn densify(
    record: &LogRecord,
    encodings: &CategoryEncodings,
    manifest: &Manifest,
) -> Result<DenseFeatureVector, FeatureError> {
    if manifest != &encodings.manifest {
        return Err(FeatureError::ManifestMismatch(format!(
            "manifest has {} slots, encodings were built for {}",
            manifest.len(),
            encodings.manifest.len()
        )));
    }
    let derived = derive_fields(record);
    let mut values = Vec::with_capacity(manifest.len());
    for slot in &manifest.slots {
        let v = match *slot {
            DenseSlot::Freq(f) | DenseSlot::Ctr(f) => {
                let value = f
                    .value(record, &derived)
                    .ok_or_else(|| FeatureError::ManifestMismatch(format!("{slot} is not a single-valued field")))?;
                if matches!(slot, DenseSlot::Freq(_)) {
                    encodings.frequency(f, &value) as f64
                } else {
                    encodings.ctr(f, &value)
                }
            }
            DenseSlot::TagCtr => {
                if record.user_tags.is_empty() {
                    encodings.prior
                } else {
                    let sum: f64 =
                        record.user_tags.iter().map(|t| encodings.ctr(Field::UserTag, &t.to_string())).sum();
                    sum / record.user_tags.len() as f64
                }
            }
            DenseSlot::Raw(raw) => raw.value(record),
        };
        values.push(v);
    }
    Ok(DenseFeatureVector { values })
}
