use std::fmt::Write as _;

use super::{
    LogError, LogRecord, LogSchema, LogType, MoneyMilli, SlotFormat, SlotVisibility, Strictness, Timestamp,
};

const NULL_TOKEN: &str = "Null";
const EMPTY_TAGS: &str = "null";

fn is_null(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case(NULL_TOKEN)
}

fn field_err(column: usize, reason: impl Into<String>) -> LogError {
    LogError::FieldParse { column, reason: reason.into() }
}

fn parse_int<T: std::str::FromStr>(s: &str, column: usize) -> Result<T, LogError> {
    s.parse::<T>().map_err(|_| field_err(column, format!("not an integer: {s:?}")))
}

fn parse_money(s: &str, column: usize) -> Result<MoneyMilli, LogError> {
    parse_int::<u64>(s, column).map(MoneyMilli)
}

fn optional(s: &str) -> Option<String> {
    (!is_null(s)).then(|| s.to_string())
}

fn parse_tags(s: &str) -> Result<Vec<u64>, LogError> {
    if is_null(s) {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_int::<u64>(t, 24)).collect()
}

/// Parses one tab-separated line (without its line terminator).
pub fn parse_record(line: &str, schema: LogSchema) -> Result<LogRecord, LogError> {
    let mut fields: [&str; super::EVENT_COLUMNS] = [""; super::EVENT_COLUMNS];
    let mut found = 0usize;
    let mut columns = schema.columns();
    for part in line.split('\t') {
        found += 1;
        if let Some(col) = columns.next() {
            fields[col - 1] = part;
        }
    }
    if found != schema.column_count() {
        return Err(LogError::ColumnCountMismatch { expected: schema.column_count(), found });
    }
    let f = |col: usize| fields[col - 1];

    let (log_type, paying_price, key_page_url) = match schema {
        LogSchema::BidLog => (None, None, None),
        LogSchema::EventLog => {
            let code = parse_int::<u8>(f(3), 3)?;
            let log_type =
                LogType::from_code(code).ok_or_else(|| field_err(3, format!("unknown log type {code}")))?;
            (Some(log_type), Some(parse_money(f(21), 21)?), optional(f(22)))
        }
    };

    let record = LogRecord {
        bid_id: f(1).to_string(),
        timestamp: Timestamp::parse(f(2))?,
        log_type,
        ipinyou_id: f(4).to_string(),
        user_agent: f(5).to_string(),
        ip: f(6).to_string(),
        region: parse_int(f(7), 7)?,
        city: parse_int(f(8), 8)?,
        ad_exchange: parse_int(f(9), 9)?,
        domain: f(10).to_string(),
        url: f(11).to_string(),
        anonymous_url_id: optional(f(12)),
        slot_id: f(13).to_string(),
        slot_width: parse_int(f(14), 14)?,
        slot_height: parse_int(f(15), 15)?,
        slot_visibility: SlotVisibility::parse(f(16)),
        slot_format: SlotFormat::parse(f(17)),
        slot_floor_price: parse_money(f(18), 18)?,
        creative_id: f(19).to_string(),
        bid_price: parse_money(f(20), 20)?,
        paying_price,
        key_page_url,
        advertiser_id: parse_int(f(23), 23)?,
        user_tags: parse_tags(f(24))?,
    };

    if record.log_type == Some(LogType::Impression) {
        let paying = record.paying_price.unwrap_or_default();
        if record.bid_price <= paying {
            return Err(field_err(
                21,
                format!("impression paying price {paying} is not below bid price {}", record.bid_price),
            ));
        }
    }
    Ok(record)
}

/// Renders a record as one line; the inverse of [`parse_record`].
pub fn serialize_record(record: &LogRecord, schema: LogSchema, strictness: Strictness) -> Result<String, LogError> {
    let mut out = String::with_capacity(256);
    write_record(&mut out, record, schema, strictness)?;
    Ok(out)
}

/// Appends the serialized record (no line terminator) to `out`.
pub fn write_record(
    out: &mut String,
    record: &LogRecord,
    schema: LogSchema,
    strictness: Strictness,
) -> Result<(), LogError> {
    let mismatch = |reason: String| LogError::SchemaMismatch { schema, reason };

    match schema {
        LogSchema::BidLog => {
            let carries_event_fields =
                record.log_type.is_some() || record.paying_price.is_some() || record.key_page_url.is_some();
            if carries_event_fields && strictness == Strictness::Strict {
                return Err(mismatch("event-only fields would be dropped".into()));
            }
        }
        LogSchema::EventLog => {
            if record.log_type.and_then(LogType::code).is_none() {
                return Err(mismatch("event log rows need a log type".into()));
            }
            if record.paying_price.is_none() {
                return Err(mismatch("event log rows need a paying price".into()));
            }
        }
    }

    let start = out.len();
    for col in schema.columns() {
        if col > 1 {
            out.push('\t');
        }
        let text_ok = |s: &str| !s.contains(['\t', '\n', '\r']);
        let opt = |o: &Option<String>| -> Result<String, LogError> {
            match o {
                None => Ok(NULL_TOKEN.to_string()),
                Some(s) if is_null(s) => Err(mismatch(format!("column {col}: present value {s:?} reads back as absent"))),
                Some(s) => Ok(s.clone()),
            }
        };
        let text = |s: &str| -> Result<(), LogError> {
            if text_ok(s) {
                Ok(())
            } else {
                Err(mismatch(format!("column {col} contains a tab or newline")))
            }
        };
        match col {
            1 => {
                text(&record.bid_id)?;
                out.push_str(&record.bid_id)
            }
            2 => write!(out, "{}", record.timestamp).unwrap(),
            3 => write!(out, "{}", record.log_type.and_then(LogType::code).unwrap_or_default()).unwrap(),
            4 => {
                text(&record.ipinyou_id)?;
                out.push_str(&record.ipinyou_id)
            }
            5 => {
                text(&record.user_agent)?;
                out.push_str(&record.user_agent)
            }
            6 => {
                text(&record.ip)?;
                out.push_str(&record.ip)
            }
            7 => write!(out, "{}", record.region).unwrap(),
            8 => write!(out, "{}", record.city).unwrap(),
            9 => write!(out, "{}", record.ad_exchange).unwrap(),
            10 => {
                text(&record.domain)?;
                out.push_str(&record.domain)
            }
            11 => {
                text(&record.url)?;
                out.push_str(&record.url)
            }
            12 => {
                let s = opt(&record.anonymous_url_id)?;
                text(&s)?;
                out.push_str(&s)
            }
            13 => {
                text(&record.slot_id)?;
                out.push_str(&record.slot_id)
            }
            14 => write!(out, "{}", record.slot_width).unwrap(),
            15 => write!(out, "{}", record.slot_height).unwrap(),
            16 => out.push_str(record.slot_visibility.as_str()),
            17 => out.push_str(record.slot_format.as_str()),
            18 => write!(out, "{}", record.slot_floor_price).unwrap(),
            19 => {
                text(&record.creative_id)?;
                out.push_str(&record.creative_id)
            }
            20 => write!(out, "{}", record.bid_price).unwrap(),
            21 => write!(out, "{}", record.paying_price.unwrap_or_default()).unwrap(),
            22 => {
                let s = opt(&record.key_page_url)?;
                text(&s)?;
                out.push_str(&s)
            }
            23 => write!(out, "{}", record.advertiser_id).unwrap(),
            24 => {
                if record.user_tags.is_empty() {
                    out.push_str(EMPTY_TAGS);
                } else {
                    for (i, t) in record.user_tags.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        write!(out, "{t}").unwrap();
                    }
                }
            }
            _ => unreachable!("column {col} out of range"),
        }
    }
    debug_assert!(out.len() > start);
    Ok(())
}
