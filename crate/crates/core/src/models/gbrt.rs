use std::fmt::Write as _;

use super::ModelError;
use crate::exec::Exec;
use crate::features::DenseFeatureVector;

const HEADER: &str = "# rtb-gbrt v1";
const P_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GbrtHyper {
    pub rounds: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbrtHyper {
    fn default() -> Self {
        GbrtHyper { rounds: 50, shrinkage: 0.05, max_depth: 5, min_leaf: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(f64),
}

/// Node arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf(_) => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    /// Re-lays an arena out in preorder; also returns old index -> new index.
    fn preorder(nodes: &[TreeNode]) -> (RegressionTree, Vec<usize>) {
        fn walk(nodes: &[TreeNode], at: usize, out: &mut Vec<TreeNode>, relabel: &mut [usize]) -> usize {
            let me = out.len();
            relabel[at] = me;
            out.push(nodes[at]);
            if let TreeNode::Split { feature, threshold, left, right } = nodes[at] {
                let left = walk(nodes, left, out, relabel);
                let right = walk(nodes, right, out, relabel);
                out[me] = TreeNode::Split { feature, threshold, left, right };
            }
            me
        }
        let mut out = Vec::with_capacity(nodes.len());
        let mut relabel = vec![0; nodes.len()];
        walk(nodes, 0, &mut out, &mut relabel);
        (RegressionTree { nodes: out }, relabel)
    }

    fn write_preorder(&self, at: usize, out: &mut String) {
        match self.nodes[at] {
            TreeNode::Leaf(v) => writeln!(out, "leaf\t{v:?}").unwrap(),
            TreeNode::Split { feature, threshold, left, right } => {
                writeln!(out, "split\t{feature}\t{threshold:?}").unwrap();
                self.write_preorder(left, out);
                self.write_preorder(right, out);
            }
        }
    }

    fn read_preorder<'a>(
        lines: &mut impl Iterator<Item = &'a str>,
        nodes: &mut Vec<TreeNode>,
        n_features: usize,
    ) -> Result<usize, ModelError> {
        let bad = |m: String| ModelError::Format(m);
        let line = lines.next().ok_or_else(|| bad("truncated tree".into()))?;
        let parts: Vec<&str> = line.split('\t').collect();
        let at = nodes.len();
        match parts[..] {
            ["leaf", v] => {
                let v: f64 = v.parse().map_err(|_| bad(format!("bad leaf {line:?}")))?;
                nodes.push(TreeNode::Leaf(v));
            }
            ["split", f, t] => {
                let feature: usize = f.parse().map_err(|_| bad(format!("bad split {line:?}")))?;
                let threshold: f64 = t.parse().map_err(|_| bad(format!("bad split {line:?}")))?;
                if feature >= n_features {
                    return Err(bad(format!("split on feature {feature} of {n_features}")));
                }
                nodes.push(TreeNode::Leaf(0.0));
                let left = Self::read_preorder(lines, nodes, n_features)?;
                let right = Self::read_preorder(lines, nodes, n_features)?;
                nodes[at] = TreeNode::Split { feature, threshold, left, right };
            }
            _ => return Err(bad(format!("bad node line {line:?}"))),
        }
        Ok(at)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbrtModel {
    pub base: f64,
    pub shrinkage: f64,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
    /// Training MSE of the unclamped boosted sum: before the first tree,
    /// then after each round.
    pub training_mse: Vec<f64>,
}

impl GbrtModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &DenseFeatureVector) -> Result<f64, ModelError> {
        if x.values.len() != self.n_features {
            return Err(ModelError::DimensionMismatch { expected: self.n_features, found: x.values.len() });
        }
        Ok(self.raw_score(&x.values).clamp(P_MIN, 1.0 - P_MIN))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        writeln!(s, "base\t{:?}", self.base).unwrap();
        writeln!(s, "shrinkage\t{:?}", self.shrinkage).unwrap();
        writeln!(s, "n_features\t{}", self.n_features).unwrap();
        let trace: Vec<String> = self.training_mse.iter().map(|m| format!("{m:?}")).collect();
        writeln!(s, "training_mse\t{}", trace.join(",")).unwrap();
        writeln!(s, "trees\t{}", self.trees.len()).unwrap();
        for (i, t) in self.trees.iter().enumerate() {
            writeln!(s, "tree\t{i}").unwrap();
            t.write_preorder(0, &mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let bad = |m: String| ModelError::Format(m);
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("missing GBRT header".into()));
        }
        let mut field = |key: &str| -> Result<String, ModelError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            match line.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(bad(format!("expected {key}, got {line:?}"))),
            }
        };
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, ModelError> {
            v.parse().map_err(|_| ModelError::Format(format!("cannot parse {v:?}")))
        }
        let base = num(&field("base")?)?;
        let shrinkage = num(&field("shrinkage")?)?;
        let n_features = num(&field("n_features")?)?;
        let trace = field("training_mse")?;
        let training_mse =
            if trace.is_empty() { Vec::new() } else { trace.split(',').map(num).collect::<Result<_, _>>()? };
        let n_trees: usize = num(&field("trees")?)?;
        let mut trees = Vec::with_capacity(n_trees);
        for i in 0..n_trees {
            if lines.next() != Some(format!("tree\t{i}").as_str()) {
                return Err(bad(format!("expected tree {i}")));
            }
            let mut nodes = Vec::new();
            RegressionTree::read_preorder(&mut lines, &mut nodes, n_features)?;
            trees.push(RegressionTree { nodes });
        }
        if lines.next().is_some() {
            return Err(bad("trailing lines after last tree".into()));
        }
        Ok(GbrtModel { base, shrinkage, n_features, trees, training_mse })
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
}

/// Split point between two consecutive distinct sorted values.
fn midpoint(prev: f64, cur: f64) -> f64 {
    let mid = prev / 2.0 + cur / 2.0;
    if mid >= cur || mid < prev {
        prev
    } else {
        mid
    }
}

fn mse(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64
}

/// Best split of every frontier node on one feature. `slot[node]` is the
/// frontier position of a tree node or `usize::MAX`.
fn scan_feature(
    sorted: &[(f64, u32)],
    node_of: &[usize],
    slot: &[usize],
    residuals: &[f64],
    totals: &[(f64, usize)],
    min_leaf: usize,
) -> Vec<Option<Candidate>> {
    let k = totals.len();
    let mut left_sum = vec![0.0; k];
    let mut left_n = vec![0usize; k];
    let mut last = vec![f64::NAN; k];
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    for &(value, row) in sorted {
        let row = row as usize;
        let s = slot[node_of[row]];
        if s == usize::MAX {
            continue;
        }
        let (total, n) = totals[s];
        let nl = left_n[s];
        if nl >= min_leaf && n - nl >= min_leaf && value > last[s] {
            let sl = left_sum[s];
            let sr = total - sl;
            let gain = sl * sl / nl as f64 + sr * sr / (n - nl) as f64 - total * total / n as f64;
            if gain > best[s].map_or(0.0, |c| c.gain) {
                best[s] = Some(Candidate { gain, threshold: midpoint(last[s], value) });
            }
        }
        left_sum[s] += residuals[row];
        left_n[s] += 1;
        last[s] = value;
    }
    best
}

fn grow_tree(
    columns: &[Vec<f64>],
    sorted: &[Vec<(f64, u32)>],
    residuals: &[f64],
    hyper: &GbrtHyper,
    exec: Exec,
) -> (RegressionTree, Vec<usize>) {
    let n = residuals.len();
    let mut nodes = vec![TreeNode::Leaf(0.0)];
    let mut node_of = vec![0usize; n];
    let mut frontier = vec![0usize];

    for _depth in 0..hyper.max_depth {
        let mut totals = vec![(0.0, 0usize); nodes.len()];
        for (row, &node) in node_of.iter().enumerate() {
            totals[node].0 += residuals[row];
            totals[node].1 += 1;
        }
        frontier.retain(|&node| totals[node].1 >= 2 * hyper.min_leaf);
        if frontier.is_empty() {
            break;
        }
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &node) in frontier.iter().enumerate() {
            slot[node] = s;
        }
        let frontier_totals: Vec<(f64, usize)> = frontier.iter().map(|&node| totals[node]).collect();
        let per_feature = exec.map_range(columns.len(), |f| {
            scan_feature(&sorted[f], &node_of, &slot, residuals, &frontier_totals, hyper.min_leaf)
        });

        // Lowest feature wins ties; within a feature the scan already kept the lowest threshold.
        let mut next = Vec::new();
        let mut chosen = vec![None; nodes.len()];
        for (s, &node) in frontier.iter().enumerate() {
            let mut best: Option<(usize, Candidate)> = None;
            for (f, cands) in per_feature.iter().enumerate() {
                if let Some(c) = cands[s] {
                    if best.is_none_or(|(_, b)| c.gain > b.gain) {
                        best = Some((f, c));
                    }
                }
            }
            if let Some((feature, c)) = best {
                let left = nodes.len();
                nodes.push(TreeNode::Leaf(0.0));
                nodes.push(TreeNode::Leaf(0.0));
                nodes[node] = TreeNode::Split { feature, threshold: c.threshold, left, right: left + 1 };
                chosen[node] = Some((feature, c.threshold, left));
                next.extend([left, left + 1]);
            }
        }
        if next.is_empty() {
            break;
        }
        for (row, node) in node_of.iter_mut().enumerate() {
            if let Some((feature, threshold, left)) = chosen[*node] {
                *node = if columns[feature][row] <= threshold { left } else { left + 1 };
            }
        }
        frontier = next;
    }

    let mut sums = vec![(0.0, 0usize); nodes.len()];
    for (row, &node) in node_of.iter().enumerate() {
        sums[node].0 += residuals[row];
        sums[node].1 += 1;
    }
    for (node, &(sum, count)) in nodes.iter_mut().zip(&sums) {
        if let TreeNode::Leaf(v) = node {
            *v = if count > 0 { sum / count as f64 } else { 0.0 };
        }
    }
    let (tree, relabel) = RegressionTree::preorder(&nodes);
    node_of.iter_mut().for_each(|n| *n = relabel[*n]);
    (tree, node_of)
}

/// Squared-loss gradient boosting on 0/1 labels with exact greedy splits.
/// `exec` only parallelises the per-feature split search; the result is the same either way.
pub fn train_gbrt(
    data: &[(DenseFeatureVector, f64)],
    hyper: &GbrtHyper,
    exec: Exec,
) -> Result<GbrtModel, ModelError> {
    let needed = hyper.min_leaf.max(1);
    if data.len() < needed {
        return Err(ModelError::InsufficientData { needed, got: data.len() });
    }
    let n_features = data[0].0.values.len();
    for (index, (x, y)) in data.iter().enumerate() {
        if *y != 0.0 && *y != 1.0 {
            return Err(ModelError::NonBinaryLabel { index, label: *y });
        }
        if x.values.len() != n_features {
            return Err(ModelError::DimensionMismatch { expected: n_features, found: x.values.len() });
        }
    }
    let columns: Vec<Vec<f64>> = (0..n_features).map(|f| data.iter().map(|(x, _)| x.values[f]).collect()).collect();
    let sorted: Vec<Vec<(f64, u32)>> = exec.map(&columns, |col| {
        let mut s: Vec<(f64, u32)> = col.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        s
    });

    let base = data.iter().map(|(_, y)| y).sum::<f64>() / data.len() as f64;
    let mut residuals: Vec<f64> = data.iter().map(|(_, y)| y - base).collect();
    let mut training_mse = vec![mse(&residuals)];
    let mut trees = Vec::with_capacity(hyper.rounds);
    for _ in 0..hyper.rounds {
        let (tree, node_of) = grow_tree(&columns, &sorted, &residuals, hyper, exec);
        for (r, &node) in residuals.iter_mut().zip(&node_of) {
            if let TreeNode::Leaf(v) = tree.nodes[node] {
                *r -= hyper.shrinkage * v;
            }
        }
        training_mse.push(mse(&residuals));
        trees.push(tree);
    }
    Ok(GbrtModel { base, shrinkage: hyper.shrinkage, n_features, trees, training_mse })
}
