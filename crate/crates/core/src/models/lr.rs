use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::features::SparseFeatureVector;

const HEADER: &str = "# rtb-lr v1";
const P_MIN: f64 = 1e-15;

/// Step size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    /// `rate / sqrt(t)` with `t` the 1-based update count.
    InvSqrtStep,
    /// `rate / sqrt(e)` with `e` the 1-based epoch.
    InvSqrtEpoch,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasInit {
    Zero,
    /// Logit of the training click rate.
    BaseRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrHyper {
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub bias_init: BiasInit,
}

impl Default for LrHyper {
    fn default() -> Self {
        LrHyper {
            learning_rate: 0.01,
            schedule: LrSchedule::InvSqrtEpoch,
            lambda: 1e-6,
            epochs: 5,
            batch_size: 1,
            seed: 1,
            bias_init: BiasInit::BaseRate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrModel {
    /// Index 0 is the bias.
    pub weights: Vec<f64>,
    pub hyper: LrHyper,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_indices(x: &SparseFeatureVector, dim: usize) -> Result<(), ModelError> {
    match x.indices.last() {
        Some(&i) if i as usize >= dim => Err(ModelError::DimensionMismatch { expected: dim, found: i as usize + 1 }),
        _ => Ok(()),
    }
}

impl LrModel {
    pub fn zeros(dimension: usize, hyper: LrHyper) -> Self {
        LrModel { weights: vec![0.0; dimension.max(1)], hyper }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    fn margin(&self, x: &SparseFeatureVector) -> f64 {
        self.weights[0] + x.indices.iter().map(|&i| self.weights[i as usize]).sum::<f64>()
    }

    /// Click probability, strictly inside (0, 1).
    pub fn predict(&self, x: &SparseFeatureVector) -> Result<f64, ModelError> {
        check_indices(x, self.dimension())?;
        Ok(sigmoid(self.margin(x)).clamp(P_MIN, 1.0 - P_MIN))
    }

    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let mut s = format!("{HEADER}\n");
        writeln!(s, "dimension\t{}", self.dimension()).unwrap();
        writeln!(s, "learning_rate\t{:?}", h.learning_rate).unwrap();
        let schedule = match h.schedule {
            LrSchedule::InvSqrtStep => "inv_sqrt_step",
            LrSchedule::InvSqrtEpoch => "inv_sqrt_epoch",
            LrSchedule::Constant => "constant",
        };
        writeln!(s, "schedule\t{schedule}").unwrap();
        writeln!(s, "lambda\t{:?}", h.lambda).unwrap();
        writeln!(s, "epochs\t{}", h.epochs).unwrap();
        writeln!(s, "batch_size\t{}", h.batch_size).unwrap();
        writeln!(s, "seed\t{}", h.seed).unwrap();
        let init = match h.bias_init {
            BiasInit::Zero => "zero",
            BiasInit::BaseRate => "base_rate",
        };
        writeln!(s, "bias_init\t{init}").unwrap();
        for (i, w) in self.weights.iter().enumerate() {
            if i == 0 || *w != 0.0 {
                writeln!(s, "{i}\t{w:?}").unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let bad = |m: String| ModelError::Format(m);
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("missing LR header".into()));
        }
        let mut field = |key: &str| -> Result<String, ModelError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            match line.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(bad(format!("expected {key}, got {line:?}"))),
            }
        };
        fn num<T: std::str::FromStr>(v: String) -> Result<T, ModelError> {
            v.parse().map_err(|_| ModelError::Format(format!("cannot parse {v:?}")))
        }
        let dim: usize = num(field("dimension")?)?;
        let learning_rate = num(field("learning_rate")?)?;
        let schedule = match field("schedule")?.as_str() {
            "inv_sqrt_step" => LrSchedule::InvSqrtStep,
            "inv_sqrt_epoch" => LrSchedule::InvSqrtEpoch,
            "constant" => LrSchedule::Constant,
            other => return Err(bad(format!("unknown schedule {other:?}"))),
        };
        let lambda = num(field("lambda")?)?;
        let epochs = num(field("epochs")?)?;
        let batch_size = num(field("batch_size")?)?;
        let seed = num(field("seed")?)?;
        let bias_init = match field("bias_init")?.as_str() {
            "zero" => BiasInit::Zero,
            "base_rate" => BiasInit::BaseRate,
            other => return Err(bad(format!("unknown bias_init {other:?}"))),
        };
        let hyper = LrHyper { learning_rate, schedule, lambda, epochs, batch_size, seed, bias_init };
        let mut model = LrModel::zeros(dim, hyper);
        for line in lines {
            let (i, w) = line.split_once('\t').ok_or_else(|| bad(format!("bad weight line {line:?}")))?;
            let i: usize = num(i.to_string())?;
            let w: f64 = num(w.to_string())?;
            if i >= dim || !w.is_finite() {
                return Err(bad(format!("bad weight line {line:?}")));
            }
            model.weights[i] = w;
        }
        Ok(model)
    }
}

/// Mean cross-entropy over `batch` plus `(lambda/2)‖w‖²` with the bias excluded.
pub fn lr_loss(model: &LrModel, batch: &[(SparseFeatureVector, f64)]) -> f64 {
    let mut ce = 0.0;
    for (x, y) in batch {
        let z = model.margin(x);
        // log(1 + e^z) - y z, written to avoid overflow
        ce += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
    }
    let reg: f64 = model.weights[1..].iter().map(|w| w * w).sum();
    ce / batch.len() as f64 + 0.5 * model.hyper.lambda * reg
}

/// Analytic gradient of [`lr_loss`]: `(1/B) Σ (p - y) x + lambda w` (no decay on the bias).
pub fn lr_gradient(model: &LrModel, batch: &[(SparseFeatureVector, f64)]) -> Vec<f64> {
    let lambda = model.hyper.lambda;
    let mut g: Vec<f64> = model.weights.iter().map(|w| lambda * w).collect();
    g[0] = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let err = (sigmoid(model.margin(x)) - y) * scale;
        g[0] += err;
        for &i in &x.indices {
            g[i as usize] += err;
        }
    }
    g
}

/// Minibatch SGD over a seeded shuffle. Each step is the proximal update
/// `w <- (w - eta g) / (1 + eta lambda)`, with the division kept in a shared
/// scale factor so an update only touches the active features.
pub fn train_lr(
    data: &[(SparseFeatureVector, f64)],
    dimension: usize,
    hyper: &LrHyper,
) -> Result<LrModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let dimension = dimension.max(1);
    let mut positives = 0usize;
    for (index, (x, y)) in data.iter().enumerate() {
        if *y != 0.0 && *y != 1.0 {
            return Err(ModelError::NonBinaryLabel { index, label: *y });
        }
        positives += (*y == 1.0) as usize;
        check_indices(x, dimension)?;
    }

    let mut bias = match hyper.bias_init {
        BiasInit::Zero => 0.0,
        BiasInit::BaseRate => {
            let rate = (positives as f64 / data.len() as f64).clamp(1e-6, 1.0 - 1e-6);
            (rate / (1.0 - rate)).ln()
        }
    };
    // Feature weights are `scale * v`.
    let mut v = vec![0.0; dimension];
    let mut scale = 1.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch_size = hyper.batch_size.max(1);
    let mut t = 0u64;
    let mut errs = Vec::with_capacity(batch_size);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            t += 1;
            let eta = match hyper.schedule {
                LrSchedule::InvSqrtStep => hyper.learning_rate / (t as f64).sqrt(),
                LrSchedule::InvSqrtEpoch => hyper.learning_rate / ((epoch + 1) as f64).sqrt(),
                LrSchedule::Constant => hyper.learning_rate,
            };
            errs.clear();
            for &k in batch {
                let (x, y) = &data[k];
                let z = bias + scale * x.indices.iter().map(|&i| v[i as usize]).sum::<f64>();
                errs.push((sigmoid(z) - y) / batch.len() as f64);
            }
            for (&k, &err) in batch.iter().zip(&errs) {
                bias -= eta * err;
                for &i in &data[k].0.indices {
                    v[i as usize] -= eta * err / scale;
                }
            }
            scale /= 1.0 + eta * hyper.lambda;
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        if !bias.is_finite() || !scale.is_finite() || v.iter().any(|w| !(w * scale).is_finite()) {
            return Err(ModelError::DivergenceDetected { epoch: epoch + 1 });
        }
    }

    let mut weights: Vec<f64> = v.into_iter().map(|w| w * scale).collect();
    weights[0] = bias;
    Ok(LrModel { weights, hyper: hyper.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(indices: &[u32]) -> SparseFeatureVector {
        SparseFeatureVector { indices: indices.to_vec() }
    }

    #[test]
    fn closed_form_predictions() {
        let m = LrModel::zeros(5, LrHyper::default());
        assert_eq!(m.predict(&sv(&[1, 3])).unwrap(), 0.5);
        let mut m = LrModel::zeros(2, LrHyper::default());
        m.weights[1] = 2.0;
        assert!((m.predict(&sv(&[1])).unwrap() - 0.880797).abs() < 1e-6);
        assert!(matches!(m.predict(&sv(&[2])), Err(ModelError::DimensionMismatch { .. })));
        m.weights[1] = 1e6;
        let p = m.predict(&sv(&[1])).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn gradient_at_zero() {
        let hyper = LrHyper { lambda: 0.0, ..LrHyper::default() };
        let m = LrModel::zeros(4, hyper);
        let g = lr_gradient(&m, &[(sv(&[1, 3]), 1.0)]);
        assert_eq!(g, vec![-0.5, -0.5, 0.0, -0.5]);
        let g = lr_gradient(&m, &[(sv(&[]), 0.0)]);
        assert_eq!(g, vec![0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn separable_singleton() {
        let hyper = LrHyper { learning_rate: 0.5, epochs: 200, bias_init: BiasInit::Zero, ..LrHyper::default() };
        let m = train_lr(&[(sv(&[1]), 1.0)], 2, &hyper).unwrap();
        assert!(m.predict(&sv(&[1])).unwrap() > 0.9);
    }

    #[test]
    fn heavy_regularisation_pins_weights() {
        let data: Vec<_> = (0..400u32).map(|i| (sv(&[1 + i % 7]), if i % 10 == 0 { 1.0 } else { 0.0 })).collect();
        let hyper = LrHyper { lambda: 1e6, epochs: 3, ..LrHyper::default() };
        let m = train_lr(&data, 8, &hyper).unwrap();
        assert!(m.weights[1..].iter().all(|w| w.abs() < 1e-4), "{:?}", m.weights);
        let p = m.predict(&sv(&[3])).unwrap();
        assert!((p - 0.1).abs() < 0.02, "{p}");
    }

    #[test]
    fn input_checks() {
        let hyper = LrHyper::default();
        assert_eq!(
            train_lr(&[(sv(&[1]), 0.5)], 2, &hyper),
            Err(ModelError::NonBinaryLabel { index: 0, label: 0.5 })
        );
        assert_eq!(train_lr(&[], 2, &hyper), Err(ModelError::EmptyInput));
        assert!(matches!(train_lr(&[(sv(&[5]), 1.0)], 2, &hyper), Err(ModelError::DimensionMismatch { .. })));
        let wild = LrHyper { learning_rate: f64::INFINITY, schedule: LrSchedule::Constant, bias_init: BiasInit::Zero, ..hyper };
        let data: Vec<_> = (0..50).map(|i| (sv(&[1]), (i % 2) as f64)).collect();
        assert!(matches!(train_lr(&data, 2, &wild), Err(ModelError::DivergenceDetected { .. })));
    }

    #[test]
    fn deterministic_and_serializable() {
        let data: Vec<_> = (0..300u32).map(|i| (sv(&[1 + i % 5, 6 + i % 3]), ((i % 7) == 0) as u8 as f64)).collect();
        let hyper = LrHyper { epochs: 2, batch_size: 4, ..LrHyper::default() };
        let a = train_lr(&data, 9, &hyper).unwrap();
        assert_eq!(a, train_lr(&data, 9, &hyper).unwrap());
        assert_eq!(LrModel::from_text(&a.to_text()).unwrap(), a);
        assert!(LrModel::from_text("# rtb-lr v1\ndimension\tx").is_err());
    }

    #[test]
    fn loss_matches_gradient_direction() {
        let data: Vec<_> = (0..20u32).map(|i| (sv(&[1 + i % 3]), (i % 4 == 0) as u8 as f64)).collect();
        let mut m = LrModel::zeros(4, LrHyper { lambda: 0.1, ..LrHyper::default() });
        m.weights = vec![0.3, -0.2, 0.5, 0.1];
        let g = lr_gradient(&m, &data);
        let before = lr_loss(&m, &data);
        for (w, gi) in m.weights.iter_mut().zip(&g) {
            *w -= 1e-3 * gi;
        }
        assert!(lr_loss(&m, &data) < before);
    }
}
