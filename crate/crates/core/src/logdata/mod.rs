//! Bid and event log records.
//!
//! One row per record, tab separated. Event logs (impressions, clicks,
//! conversions) carry 24 columns; bid logs carry 21 because the log type,
//! paying price and key page URL are only known once an auction was won.
//! All money columns are integers in fen x 1000 (CPM convention).

pub(crate) mod codec;
mod join;
mod reader;

use std::fmt;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};
use thiserror::Error;

pub use codec::{parse_record, serialize_record, write_record};
pub use join::{join_events, AuctionCase, JoinReport, OrphanEvent};
pub use reader::{load_log, read_from, read_log, LoadReport, LogReader};

/// Number of columns in an event log row.
pub const EVENT_COLUMNS: usize = 24;
/// Number of columns in a bid log row.
pub const BID_COLUMNS: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("expected {expected} columns, found {found}")]
    ColumnCountMismatch { expected: usize, found: usize },
    /// `column` is the 1-based column number of the event log layout.
    #[error("column {column}: {reason}")]
    FieldParse { column: usize, reason: String },
    #[error("bad timestamp {0:?}: expected 17 digits yyyyMMddHHmmssSSS")]
    TimestampFormat(String),
    #[error("record does not fit schema {schema:?}: {reason}")]
    SchemaMismatch { schema: LogSchema, reason: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for LogError {
    fn from(e: std::io::Error) -> Self {
        LogError::Io(e.to_string())
    }
}

/// A parse error tied to its 1-based line number.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {error}")]
pub struct LineError {
    pub line: usize,
    pub error: LogError,
}

/// Column layout of a log file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogSchema {
    /// Bid logs: columns 3, 21 and 22 are absent.
    BidLog,
    /// Impression, click and conversion logs: all 24 columns.
    EventLog,
}

impl LogSchema {
    pub fn column_count(self) -> usize {
        match self {
            LogSchema::BidLog => BID_COLUMNS,
            LogSchema::EventLog => EVENT_COLUMNS,
        }
    }

    /// Event-log column numbers (1-based) present in this schema, in file order.
    pub fn columns(self) -> impl Iterator<Item = usize> {
        (1..=EVENT_COLUMNS).filter(move |c| match self {
            LogSchema::EventLog => true,
            LogSchema::BidLog => !matches!(c, 3 | 21 | 22),
        })
    }
}

impl std::str::FromStr for LogSchema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bid" | "bidlog" => Ok(LogSchema::BidLog),
            "event" | "eventlog" | "imp" => Ok(LogSchema::EventLog),
            other => Err(format!("unknown schema {other:?} (expected bid or event)")),
        }
    }
}

/// How the reader reacts to a malformed line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Stop at the first bad line.
    Strict,
    /// Skip bad lines and collect their errors.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogType {
    Bid,
    Impression,
    Click,
    Conversion,
}

impl LogType {
    /// The log-type column value; bids have no code.
    pub fn code(self) -> Option<u8> {
        match self {
            LogType::Bid => None,
            LogType::Impression => Some(1),
            LogType::Click => Some(2),
            LogType::Conversion => Some(3),
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(LogType::Impression),
            2 => Some(LogType::Click),
            3 => Some(LogType::Conversion),
            _ => None,
        }
    }
}

/// A logged price in fen x 1000, i.e. the price of a thousand impressions in fen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MoneyMilli(pub u64);

impl MoneyMilli {
    pub const ZERO: MoneyMilli = MoneyMilli(0);

    pub fn value(self) -> u64 {
        self.0
    }

    /// The same amount in fen, as used for cost, CPM and eCPC.
    pub fn fen(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for MoneyMilli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Millisecond timestamp in the log's naive local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(NaiveDateTime);

impl Timestamp {
    pub fn parse(s: &str) -> Result<Self, LogError> {
        let bad = || LogError::TimestampFormat(s.to_string());
        if s.len() != 17 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let num = |a: usize, b: usize| s[a..b].parse::<u32>().map_err(|_| bad());
        let date = NaiveDate::from_ymd_opt(num(0, 4)? as i32, num(4, 6)?, num(6, 8)?).ok_or_else(bad)?;
        let dt = date
            .and_hms_milli_opt(num(8, 10)?, num(10, 12)?, num(12, 14)?, num(14, 17)?)
            .ok_or_else(bad)?;
        Ok(Timestamp(dt))
    }

    pub fn from_datetime(dt: NaiveDateTime) -> Self {
        // Truncate to millisecond precision so the value round-trips.
        let ms = dt.and_utc().timestamp_subsec_millis();
        Timestamp(dt.with_nanosecond(ms * 1_000_000).unwrap_or(dt))
    }

    pub fn datetime(self) -> NaiveDateTime {
        self.0
    }

    pub fn weekday(self) -> Weekday {
        self.0.weekday()
    }

    pub fn hour(self) -> u32 {
        self.0.hour()
    }

    /// Milliseconds since the Unix epoch, treating the value as UTC.
    pub fn epoch_millis(self) -> i64 {
        self.0.and_utc().timestamp_millis()
    }

    pub fn from_epoch_millis(ms: i64) -> Option<Self> {
        chrono::DateTime::from_timestamp_millis(ms).map(|d| Timestamp(d.naive_utc()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.0;
        write!(
            f,
            "{:04}{:02}{:02}{:02}{:02}{:02}{:03}",
            d.year(),
            d.month(),
            d.day(),
            d.hour(),
            d.minute(),
            d.second(),
            d.and_utc().timestamp_subsec_millis()
        )
    }
}

/// Ad slot position relative to the fold.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotVisibility {
    /// Above the fold.
    FirstView,
    SecondView,
    ThirdView,
    FourthView,
    FifthView,
    SixthView,
    SeventhView,
    EighthView,
    NinthView,
    TenthView,
    Na,
    /// Codes seen in some public dumps (e.g. `0`, `255`, `OtherView`); kept verbatim.
    Other(String),
}

const VIEW_NAMES: [&str; 10] = [
    "FirstView",
    "SecondView",
    "ThirdView",
    "FourthView",
    "FifthView",
    "SixthView",
    "SeventhView",
    "EighthView",
    "NinthView",
    "TenthView",
];

impl SlotVisibility {
    pub fn parse(s: &str) -> Self {
        use SlotVisibility::*;
        match VIEW_NAMES.iter().position(|v| *v == s) {
            Some(i) => [
                FirstView, SecondView, ThirdView, FourthView, FifthView, SixthView, SeventhView, EighthView,
                NinthView, TenthView,
            ][i]
                .clone(),
            None if s == "Na" => Na,
            None => Other(s.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        use SlotVisibility::*;
        match self {
            FirstView => VIEW_NAMES[0],
            SecondView => VIEW_NAMES[1],
            ThirdView => VIEW_NAMES[2],
            FourthView => VIEW_NAMES[3],
            FifthView => VIEW_NAMES[4],
            SixthView => VIEW_NAMES[5],
            SeventhView => VIEW_NAMES[6],
            EighthView => VIEW_NAMES[7],
            NinthView => VIEW_NAMES[8],
            TenthView => VIEW_NAMES[9],
            Na => "Na",
            Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotFormat {
    Fixed,
    Pop,
    Background,
    Float,
    Na,
    Other(String),
}

impl SlotFormat {
    pub fn parse(s: &str) -> Self {
        match s {
            "Fixed" => SlotFormat::Fixed,
            "Pop" => SlotFormat::Pop,
            "Background" => SlotFormat::Background,
            "Float" => SlotFormat::Float,
            "Na" => SlotFormat::Na,
            other => SlotFormat::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            SlotFormat::Fixed => "Fixed",
            SlotFormat::Pop => "Pop",
            SlotFormat::Background => "Background",
            SlotFormat::Float => "Float",
            SlotFormat::Na => "Na",
            SlotFormat::Other(s) => s,
        }
    }
}

/// One parsed log row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub bid_id: String,
    pub timestamp: Timestamp,
    /// Absent on bid logs.
    pub log_type: Option<LogType>,
    pub ipinyou_id: String,
    pub user_agent: String,
    pub ip: String,
    pub region: i64,
    pub city: i64,
    pub ad_exchange: i64,
    pub domain: String,
    pub url: String,
    pub anonymous_url_id: Option<String>,
    pub slot_id: String,
    pub slot_width: u32,
    pub slot_height: u32,
    pub slot_visibility: SlotVisibility,
    pub slot_format: SlotFormat,
    pub slot_floor_price: MoneyMilli,
    pub creative_id: String,
    pub bid_price: MoneyMilli,
    /// Market price; absent on bid logs.
    pub paying_price: Option<MoneyMilli>,
    pub key_page_url: Option<String>,
    pub advertiser_id: u32,
    /// Tag ids in file order.
    pub user_tags: Vec<u64>,
}

impl LogRecord {
    /// The kind of log row this record came from.
    pub fn kind(&self) -> LogType {
        self.log_type.unwrap_or(LogType::Bid)
    }

    pub fn slot_size(&self) -> String {
        format!("{}x{}", self.slot_width, self.slot_height)
    }
}
