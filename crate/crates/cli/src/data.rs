//! Locating and loading log files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rtb_core::logdata::{join_events, load_log, AuctionCase, LogRecord, LogSchema, Strictness};

/// Log files of one split, grouped by kind.
#[derive(Debug, Default)]
pub struct SplitFiles {
    pub impressions: Vec<PathBuf>,
    pub clicks: Vec<PathBuf>,
    pub conversions: Vec<PathBuf>,
    pub bids: Vec<PathBuf>,
}

impl SplitFiles {
    /// Classifies the files directly inside `dir` by name prefix
    /// (`imp`, `clk`, `cnv`/`conv`, `bid`). Compressed `.bz2` files are refused.
    pub fn scan(dir: &Path) -> Result<SplitFiles> {
        let mut files = SplitFiles::default();
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for path in entries {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_ascii_lowercase();
            let slot = if name.starts_with("imp") {
                &mut files.impressions
            } else if name.starts_with("clk") {
                &mut files.clicks
            } else if name.starts_with("cnv") || name.starts_with("conv") {
                &mut files.conversions
            } else if name.starts_with("bid") {
                &mut files.bids
            } else {
                continue;
            };
            if name.ends_with(".bz2") {
                bail!("{}: bzip2 input is not supported, decompress it first", path.display());
            }
            slot.push(path);
        }
        if files.impressions.is_empty() {
            bail!("no impression logs (imp*) in {}", dir.display());
        }
        Ok(files)
    }
}

/// Joined cases and bid counts of one split.
#[derive(Debug, Default)]
pub struct Split {
    pub cases: Vec<AuctionCase>,
    pub bids: BTreeMap<u32, u64>,
}

impl Split {
    pub fn advertisers(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.cases.iter().map(|c| c.record.advertiser_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn cases_of(&self, advertiser: u32) -> Vec<AuctionCase> {
        self.cases.iter().filter(|c| c.record.advertiser_id == advertiser).cloned().collect()
    }
}

fn read_all(paths: &[PathBuf], schema: LogSchema, strictness: Strictness, keep: &dyn Fn(&LogRecord) -> bool) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for path in paths {
        let mut reader = load_log(path, schema, strictness).with_context(|| format!("opening {}", path.display()))?;
        for item in reader.by_ref() {
            let record = item.with_context(|| format!("parsing {}", path.display()))?;
            if keep(&record) {
                out.push(record);
            }
        }
        let skipped = reader.errors().len();
        if skipped > 0 {
            log::warn!("{}: skipped {skipped} malformed lines (first: {})", path.display(), reader.errors()[0]);
        }
    }
    Ok(out)
}

/// Loads and joins a split directory, keeping only `advertisers` if non-empty.
pub fn load_split(dir: &Path, bid_schema: LogSchema, strictness: Strictness, advertisers: &[u32]) -> Result<Split> {
    let files = SplitFiles::scan(dir)?;
    let keep = |r: &LogRecord| advertisers.is_empty() || advertisers.contains(&r.advertiser_id);
    let imps = read_all(&files.impressions, LogSchema::EventLog, strictness, &keep)?;
    let clicks = read_all(&files.clicks, LogSchema::EventLog, strictness, &keep)?;
    let convs = read_all(&files.conversions, LogSchema::EventLog, strictness, &keep)?;
    let report = join_events(imps, &clicks, &convs);
    if !report.orphans.is_empty() {
        log::warn!("{}: {} click/conversion rows without an impression", dir.display(), report.orphans.len());
    }
    if !report.duplicate_impressions.is_empty() {
        log::warn!("{}: {} duplicate impressions dropped", dir.display(), report.duplicate_impressions.len());
    }
    let mut bids = BTreeMap::new();
    for r in read_all(&files.bids, bid_schema, strictness, &keep)? {
        *bids.entry(r.advertiser_id).or_insert(0) += 1;
    }
    Ok(Split { cases: report.cases, bids })
}

/// Train and test split directories of a dataset.
#[derive(Debug, Clone)]
pub struct Layout {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

impl Layout {
    /// `root/train` and `root/test`, as written by `rtb synth`.
    pub fn dataset(root: &Path) -> Result<Layout> {
        let (train, test) = (root.join("train"), root.join("test"));
        for d in [&train, &test] {
            if !d.is_dir() {
                bail!("{} is not a directory (expected <input>/train and <input>/test)", d.display());
            }
        }
        Ok(Layout { train: vec![train], test: vec![test] })
    }

    /// The season directories of the public release that exist under `root`:
    /// `training2nd`, `training3rd`, `testing2nd`, `testing3rd`.
    pub fn real_data(root: &Path) -> Result<Layout> {
        let pick = |names: [&str; 2]| -> Vec<PathBuf> {
            names.iter().map(|n| root.join(n)).filter(|p| p.is_dir()).collect()
        };
        let layout = Layout { train: pick(["training2nd", "training3rd"]), test: pick(["testing2nd", "testing3rd"]) };
        if layout.train.is_empty() || layout.test.is_empty() {
            bail!("{}: expected training2nd/training3rd and testing2nd/testing3rd directories", root.display());
        }
        Ok(layout)
    }
}

/// Loads and concatenates several split directories, re-sorting by time.
pub fn load_splits(dirs: &[PathBuf], bid_schema: LogSchema, strictness: Strictness, advertisers: &[u32]) -> Result<Split> {
    let mut all = Split::default();
    for dir in dirs {
        let s = load_split(dir, bid_schema, strictness, advertisers)?;
        all.cases.extend(s.cases);
        for (k, v) in s.bids {
            *all.bids.entry(k).or_insert(0) += v;
        }
    }
    if dirs.len() > 1 {
        all.cases.sort_by(|a, b| (a.record.timestamp, &a.record.bid_id).cmp(&(b.record.timestamp, &b.record.bid_id)));
    }
    Ok(all)
}
