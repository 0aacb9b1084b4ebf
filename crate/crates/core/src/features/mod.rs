//! Model inputs built from log records.
//!
//! Logistic regression consumes sparse one-hot vectors over a [`Vocabulary`];
//! the tree model consumes dense vectors of per-category frequency and
//! smoothed click-through rate ([`CategoryEncodings`]) plus a few raw numeric
//! columns.

mod derive;
mod encode;
mod vocab;

use std::fmt;

use thiserror::Error;

use crate::logdata::LogRecord;

pub use derive::{
    classify_browser, classify_os, derive_fields, weekday_name, Browser, DerivedFields, FloorBucket, Os,
};
pub use encode::{
    build_encodings, densify, select_encoding_subset, CategoryEncodings, DenseFeatureVector, DenseSlot,
    EncodingSubset, Manifest, RawField, Smoothing,
};
pub use vocab::{binarize, build_vocabulary, SparseFeatureVector, Vocabulary};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("bad feature file: {0}")]
    Format(String),
}

/// Categorical fields a record can be described by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Weekday,
    Hour,
    Os,
    Browser,
    Region,
    City,
    AdExchange,
    Domain,
    SlotId,
    SlotWidth,
    SlotHeight,
    SlotSize,
    SlotVisibility,
    SlotFormat,
    FloorBucket,
    CreativeId,
    UserTag,
}

/// Vocabulary fields for logistic regression, in index-assignment order.
pub const LR_FIELDS: [Field; 16] = [
    Field::Weekday,
    Field::Hour,
    Field::Os,
    Field::Browser,
    Field::Region,
    Field::City,
    Field::AdExchange,
    Field::Domain,
    Field::SlotId,
    Field::SlotWidth,
    Field::SlotHeight,
    Field::SlotVisibility,
    Field::SlotFormat,
    Field::FloorBucket,
    Field::CreativeId,
    Field::UserTag,
];

/// Single-valued fields that get (frequency, CTR) encodings for the tree model.
pub const ENCODED_FIELDS: [Field; 14] = [
    Field::Weekday,
    Field::Hour,
    Field::Os,
    Field::Browser,
    Field::Region,
    Field::City,
    Field::AdExchange,
    Field::Domain,
    Field::SlotId,
    Field::SlotSize,
    Field::SlotVisibility,
    Field::SlotFormat,
    Field::FloorBucket,
    Field::CreativeId,
];

impl Field {
    pub const ALL: [Field; 17] = [
        Field::Weekday,
        Field::Hour,
        Field::Os,
        Field::Browser,
        Field::Region,
        Field::City,
        Field::AdExchange,
        Field::Domain,
        Field::SlotId,
        Field::SlotWidth,
        Field::SlotHeight,
        Field::SlotSize,
        Field::SlotVisibility,
        Field::SlotFormat,
        Field::FloorBucket,
        Field::CreativeId,
        Field::UserTag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Weekday => "weekday",
            Field::Hour => "hour",
            Field::Os => "os",
            Field::Browser => "browser",
            Field::Region => "region",
            Field::City => "city",
            Field::AdExchange => "ad_exchange",
            Field::Domain => "domain",
            Field::SlotId => "slot_id",
            Field::SlotWidth => "slot_width",
            Field::SlotHeight => "slot_height",
            Field::SlotSize => "slot_size",
            Field::SlotVisibility => "slot_visibility",
            Field::SlotFormat => "slot_format",
            Field::FloorBucket => "floor_bucket",
            Field::CreativeId => "creative_id",
            Field::UserTag => "user_tag",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Value of a single-valued field; `None` for [`Field::UserTag`].
    pub fn value(self, record: &LogRecord, derived: &DerivedFields) -> Option<String> {
        Some(match self {
            Field::Weekday => weekday_name(derived.weekday).to_string(),
            Field::Hour => derived.hour.to_string(),
            Field::Os => derived.os.as_str().to_string(),
            Field::Browser => derived.browser.as_str().to_string(),
            Field::Region => record.region.to_string(),
            Field::City => record.city.to_string(),
            Field::AdExchange => record.ad_exchange.to_string(),
            Field::Domain => record.domain.clone(),
            Field::SlotId => record.slot_id.clone(),
            Field::SlotWidth => record.slot_width.to_string(),
            Field::SlotHeight => record.slot_height.to_string(),
            Field::SlotSize => record.slot_size(),
            Field::SlotVisibility => record.slot_visibility.as_str().to_string(),
            Field::SlotFormat => record.slot_format.as_str().to_string(),
            Field::FloorBucket => derived.floor_bucket.as_str().to_string(),
            Field::CreativeId => record.creative_id.clone(),
            Field::UserTag => return None,
        })
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_round_trip() {
        for f in Field::ALL {
            assert_eq!(Field::from_name(f.name()), Some(f));
        }
        assert_eq!(Field::from_name("bid_id"), None);
    }
}
