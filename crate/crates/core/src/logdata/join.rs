use std::collections::{HashMap, HashSet};

use super::{LogRecord, LogType};

/// An impression joined with its (deduplicated) click and conversion outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionCase {
    pub record: LogRecord,
    pub clicked: bool,
    pub converted: bool,
}

impl AuctionCase {
    /// Logged market price; impressions always carry one.
    pub fn paying_price(&self) -> u64 {
        self.record.paying_price.map_or(0, |p| p.0)
    }

    pub fn floor_price(&self) -> u64 {
        self.record.slot_floor_price.0
    }

    pub fn label(&self) -> u8 {
        u8::from(self.clicked)
    }
}

/// A click or conversion whose bid id has no impression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrphanEvent {
    pub bid_id: String,
    pub kind: LogType,
}

#[derive(Debug, Clone, Default)]
pub struct JoinReport {
    /// Sorted by timestamp, ties by bid id.
    pub cases: Vec<AuctionCase>,
    pub orphans: Vec<OrphanEvent>,
    /// Bid ids of impression rows dropped because an earlier row had the same id.
    pub duplicate_impressions: Vec<String>,
    /// Cases flagged converted without a logged click.
    pub converted_without_click: usize,
}

/// Joins impressions with click and conversion rows on bid id.
///
/// Repeated events count once. Rows in `impressions` that are not impression
/// records are ignored.
pub fn join_events<'a, I, C, V>(impressions: I, clicks: C, conversions: V) -> JoinReport
where
    I: IntoIterator<Item = LogRecord>,
    C: IntoIterator<Item = &'a LogRecord>,
    V: IntoIterator<Item = &'a LogRecord>,
{
    let mut report = JoinReport::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in impressions {
        if record.paying_price.is_none() {
            continue;
        }
        if index.contains_key(&record.bid_id) {
            report.duplicate_impressions.push(record.bid_id);
            continue;
        }
        index.insert(record.bid_id.clone(), report.cases.len());
        report.cases.push(AuctionCase { record, clicked: false, converted: false });
    }

    let mark = |events: &mut dyn Iterator<Item = &LogRecord>, kind: LogType, cases: &mut [AuctionCase]| {
        let mut orphan_seen = HashSet::new();
        let mut orphans = Vec::new();
        for e in events {
            match index.get(&e.bid_id) {
                Some(&i) => match kind {
                    LogType::Click => cases[i].clicked = true,
                    _ => cases[i].converted = true,
                },
                None => {
                    if orphan_seen.insert(e.bid_id.clone()) {
                        orphans.push(OrphanEvent { bid_id: e.bid_id.clone(), kind });
                    }
                }
            }
        }
        orphans
    };
    let o1 = mark(&mut clicks.into_iter(), LogType::Click, &mut report.cases);
    let o2 = mark(&mut conversions.into_iter(), LogType::Conversion, &mut report.cases);
    report.orphans.extend(o1);
    report.orphans.extend(o2);

    report
        .cases
        .sort_by(|a, b| a.record.timestamp.cmp(&b.record.timestamp).then_with(|| a.record.bid_id.cmp(&b.record.bid_id)));
    report.converted_without_click = report.cases.iter().filter(|c| c.converted && !c.clicked).count();
    report
}
