use chrono::Weekday;

use crate::logdata::LogRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Os {
    Windows,
    Mac,
    Ios,
    Android,
    Linux,
    Other,
}

impl Os {
    pub fn as_str(self) -> &'static str {
        match self {
            Os::Windows => "windows",
            Os::Mac => "mac",
            Os::Ios => "ios",
            Os::Android => "android",
            Os::Linux => "linux",
            Os::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Browser {
    Chrome,
    Ie,
    Firefox,
    Safari,
    Opera,
    Maxthon,
    Sogou,
    TheWorld,
    Other,
}

impl Browser {
    pub fn as_str(self) -> &'static str {
        match self {
            Browser::Chrome => "chrome",
            Browser::Ie => "ie",
            Browser::Firefox => "firefox",
            Browser::Safari => "safari",
            Browser::Opera => "opera",
            Browser::Maxthon => "maxthon",
            Browser::Sogou => "sogou",
            Browser::TheWorld => "theworld",
            Browser::Other => "other",
        }
    }
}

/// Floor price bucket: 0, [1,10], [11,50], [51,100], [101,inf).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FloorBucket {
    Zero,
    UpTo10,
    UpTo50,
    UpTo100,
    Above100,
}

impl FloorBucket {
    pub fn of(price: u64) -> Self {
        match price {
            0 => FloorBucket::Zero,
            1..=10 => FloorBucket::UpTo10,
            11..=50 => FloorBucket::UpTo50,
            51..=100 => FloorBucket::UpTo100,
            _ => FloorBucket::Above100,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FloorBucket::Zero => "0",
            FloorBucket::UpTo10 => "[1,10]",
            FloorBucket::UpTo50 => "[11,50]",
            FloorBucket::UpTo100 => "[51,100]",
            FloorBucket::Above100 => "[101,inf)",
        }
    }
}

pub fn weekday_name(day: Weekday) -> &'static str {
    match day {
        Weekday::Mon => "Mon",
        Weekday::Tue => "Tue",
        Weekday::Wed => "Wed",
        Weekday::Thu => "Thu",
        Weekday::Fri => "Fri",
        Weekday::Sat => "Sat",
        Weekday::Sun => "Sun",
    }
}

/// Categorical fields computed from raw columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedFields {
    pub weekday: Weekday,
    pub hour: u32,
    pub os: Os,
    pub browser: Browser,
    pub floor_bucket: FloorBucket,
}

// First match wins. Android UAs mention Linux and iOS UAs mention Mac OS X,
// so the mobile systems are checked first.
const OS_RULES: &[(&[&str], Os)] = &[
    (&["android"], Os::Android),
    (&["iphone", "ipad", "ipod", "ios"], Os::Ios),
    (&["windows"], Os::Windows),
    (&["mac os", "macintosh"], Os::Mac),
    (&["linux", "x11"], Os::Linux),
];

// Maxthon, Sogou and TheWorld embed an MSIE token; Opera (OPR) and Chrome
// embed a Safari token.
const BROWSER_RULES: &[(&[&str], Browser)] = &[
    (&["maxthon"], Browser::Maxthon),
    (&["metasr", "sogou"], Browser::Sogou),
    (&["theworld"], Browser::TheWorld),
    (&["opera", "opr/"], Browser::Opera),
    (&["msie", "trident"], Browser::Ie),
    (&["firefox"], Browser::Firefox),
    (&["chrome", "crios"], Browser::Chrome),
    (&["safari"], Browser::Safari),
];

fn classify<T: Copy>(ua: &str, rules: &[(&[&str], T)], other: T) -> T {
    let ua = ua.to_ascii_lowercase();
    rules
        .iter()
        .find(|(needles, _)| needles.iter().any(|n| ua.contains(n)))
        .map_or(other, |(_, v)| *v)
}

pub fn classify_os(user_agent: &str) -> Os {
    classify(user_agent, OS_RULES, Os::Other)
}

pub fn classify_browser(user_agent: &str) -> Browser {
    classify(user_agent, BROWSER_RULES, Browser::Other)
}

pub fn derive_fields(record: &LogRecord) -> DerivedFields {
    DerivedFields {
        weekday: record.timestamp.weekday(),
        hour: record.timestamp.hour(),
        os: classify_os(&record.user_agent),
        browser: classify_browser(&record.user_agent),
        floor_bucket: FloorBucket::of(record.slot_floor_price.0),
    }
}
