use std::fmt::Write as _;

use super::{evaluate_scores, train_gbrt, train_lr, EvalReport, GbrtHyper, GbrtModel, LrHyper, LrModel, ModelError};
use crate::exec::Exec;
use crate::features::{
    binarize, build_encodings, build_vocabulary, densify, select_encoding_subset, CategoryEncodings, EncodingSubset,
    Smoothing, Vocabulary,
};
use crate::logdata::{AuctionCase, LogRecord};

const HEADER: &str = "# rtb-ctr-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrModelKind {
    Lr,
    Gbrt,
}

impl std::str::FromStr for CtrModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(CtrModelKind::Lr),
            "gbrt" => Ok(CtrModelKind::Gbrt),
            other => Err(format!("unknown model kind {other:?} (expected lr or gbrt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CtrConfig {
    pub lr: LrHyper,
    pub gbrt: GbrtHyper,
    pub smoothing: Smoothing,
    pub encoding_subset: EncodingSubset,
}

/// A trained model together with the featurizer it expects.
#[derive(Debug, Clone, PartialEq)]
pub enum CtrPredictor {
    Lr { model: LrModel, vocab: Vocabulary },
    Gbrt { model: GbrtModel, encodings: CategoryEncodings },
}

impl CtrPredictor {
    pub fn kind(&self) -> CtrModelKind {
        match self {
            CtrPredictor::Lr { .. } => CtrModelKind::Lr,
            CtrPredictor::Gbrt { .. } => CtrModelKind::Gbrt,
        }
    }

    pub fn predict(&self, record: &LogRecord) -> Result<f64, ModelError> {
        match self {
            CtrPredictor::Lr { model, vocab } => model.predict(&binarize(record, vocab)),
            CtrPredictor::Gbrt { model, encodings } => {
                model.predict(&densify(record, encodings, encodings.manifest())?)
            }
        }
    }

    pub fn predict_cases(&self, cases: &[AuctionCase], exec: Exec) -> Result<Vec<f64>, ModelError> {
        exec.map(cases, |c| self.predict(&c.record)).into_iter().collect()
    }

    pub fn evaluate(&self, cases: &[AuctionCase], exec: Exec) -> Result<EvalReport, ModelError> {
        let preds = self.predict_cases(cases, exec)?;
        let scored: Vec<(f64, bool)> = preds.into_iter().zip(cases).map(|(p, c)| (p, c.clicked)).collect();
        evaluate_scores(&scored)
    }

    pub fn to_text(&self) -> String {
        let (kind, model, featurizer) = match self {
            CtrPredictor::Lr { model, vocab } => ("lr", model.to_text(), vocab.to_text()),
            CtrPredictor::Gbrt { model, encodings } => ("gbrt", model.to_text(), encodings.to_text()),
        };
        let mut s = format!("{HEADER}\t{kind}\n");
        writeln!(s, "model_lines\t{}", model.lines().count()).unwrap();
        s.push_str(&model);
        s.push_str(&featurizer);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Format(m.to_string());
        let mut lines = text.lines();
        let kind: CtrModelKind = lines
            .next()
            .and_then(|h| h.strip_prefix(HEADER))
            .and_then(|k| k.trim().parse().ok())
            .ok_or_else(|| bad("missing CTR model header"))?;
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("model_lines\t"))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing model_lines"))?;
        let model: Vec<&str> = lines.by_ref().take(n).collect();
        if model.len() != n {
            return Err(bad("truncated model section"));
        }
        let model = model.join("\n");
        let featurizer = lines.collect::<Vec<_>>().join("\n");
        Ok(match kind {
            CtrModelKind::Lr => CtrPredictor::Lr {
                model: LrModel::from_text(&model)?,
                vocab: Vocabulary::from_text(&featurizer)?,
            },
            CtrModelKind::Gbrt => CtrPredictor::Gbrt {
                model: GbrtModel::from_text(&model)?,
                encodings: CategoryEncodings::from_text(&featurizer)?,
            },
        })
    }
}

/// Builds the featurizer on `train` and fits the requested model.
pub fn train_ctr_model(
    kind: CtrModelKind,
    train: &[AuctionCase],
    config: &CtrConfig,
    exec: Exec,
) -> Result<CtrPredictor, ModelError> {
    let label = |c: &AuctionCase| if c.clicked { 1.0 } else { 0.0 };
    match kind {
        CtrModelKind::Lr => {
            let vocab = build_vocabulary(train)?;
            let data = exec.map(train, |c| (binarize(&c.record, &vocab), label(c)));
            let model = train_lr(&data, vocab.dimension(), &config.lr)?;
            Ok(CtrPredictor::Lr { model, vocab })
        }
        CtrModelKind::Gbrt => {
            let subset = select_encoding_subset(train, config.encoding_subset);
            let encodings = build_encodings(subset, config.smoothing)?;
            let manifest = encodings.manifest().clone();
            let data = exec
                .map(train, |c| densify(&c.record, &encodings, &manifest).map(|x| (x, label(c))))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let model = train_gbrt(&data, &config.gbrt, exec)?;
            Ok(CtrPredictor::Gbrt { model, encodings })
        }
    }
}

/// `bid_id,pctr` rows for scored cases.
pub fn scored_csv(cases: &[AuctionCase], pctr: &[f64]) -> String {
    let mut s = String::from("bid_id,pctr\n");
    for (c, p) in cases.iter().zip(pctr) {
        writeln!(s, "{},{p:?}", c.record.bid_id).unwrap();
    }
    s
}
