//! Maximum-entropy (binary logistic) ensemble trained on balanced subsets.
//!
//! Negatives are shuffled and split into `ceil(neg / pos)` near-equal slices;
//! each slice plus all positives trains one member. Ranking uses the mean
//! member probability, classification a majority vote.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, parse_error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    pub label: bool,
}

impl TrainingExample {
    pub fn new(features: Vec<f64>, label: bool) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// L2 penalty on the weights (the bias is not penalized).
    pub l2: f64,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            seed: 0,
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl Member {
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + dot(&self.weights, x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub feature_names: Vec<String>,
    pub members: Vec<Member>,
    pub config: TrainConfig,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Splits example indices into balanced subsets: every subset holds all
/// positives plus one disjoint slice of the shuffled negatives, slice sizes
/// differing by at most one.
pub fn partition_balanced(examples: &[TrainingExample], seed: u64) -> Result<Vec<Vec<usize>>> {
    let positives: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].label).collect();
    let mut negatives: Vec<usize> = (0..examples.len()).filter(|&i| !examples[i].label).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(invalid(format!(
            "balanced partition needs positives and negatives (got {} / {})",
            positives.len(),
            negatives.len()
        )));
    }
    negatives.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = negatives.len().div_ceil(positives.len());
    let (base, extra) = (negatives.len() / n, negatives.len() % n);
    let mut subsets = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        let mut subset = positives.clone();
        subset.extend_from_slice(&negatives[start..start + size]);
        start += size;
        subsets.push(subset);
    }
    Ok(subsets)
}

/// Negative L2-regularized log-likelihood and its gradient.
///
/// `params[0]` is the bias, `params[1..]` the weights.
pub fn objective(params: &[f64], examples: &[&TrainingExample], l2: f64) -> (f64, Vec<f64>) {
    let (bias, weights) = (params[0], &params[1..]);
    let mut value = 0.5 * l2 * dot(weights, weights);
    let mut grad = vec![0.0; params.len()];
    for (g, w) in grad[1..].iter_mut().zip(weights) {
        *g = l2 * w;
    }
    for ex in examples {
        let z = bias + dot(weights, &ex.features);
        let y = if ex.label { 1.0 } else { 0.0 };
        value += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        grad[0] += r;
        for (g, x) in grad[1..].iter_mut().zip(&ex.features) {
            *g += r * x;
        }
    }
    (value, grad)
}

fn objective_value(params: &[f64], examples: &[&TrainingExample], l2: f64) -> f64 {
    let (bias, weights) = (params[0], &params[1..]);
    let mut value = 0.5 * l2 * dot(weights, weights);
    for ex in examples {
        let z = bias + dot(weights, &ex.features);
        value += softplus(z) - if ex.label { z } else { 0.0 };
    }
    value
}

/// Full-batch gradient descent with a Barzilai-Borwein trial step and
/// Armijo backtracking.
fn fit_member(examples: &[&TrainingExample], dim: usize, config: &TrainConfig) -> Member {
    const ARMIJO: f64 = 1e-4;
    let mut params = vec![0.0; dim + 1];
    let (mut value, mut grad) = objective(&params, examples, config.l2);
    let mut step = 1.0 / (examples.len() as f64).max(1.0);
    for _ in 0..config.max_iterations {
        let gnorm2 = dot(&grad, &grad);
        if gnorm2.sqrt() < config.tolerance {
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - t * g).collect();
            let trial_value = objective_value(&trial, examples, config.l2);
            if trial_value <= value - ARMIJO * t * gnorm2 {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else { break };
        let (next_value, next_grad) = objective(&next, examples, config.l2);
        let s: Vec<f64> = next.iter().zip(&params).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-10, 1e10) } else { t * 2.0 };
        params = next;
        value = next_value;
        grad = next_grad;
    }
    Member {
        bias: params[0],
        weights: params[1..].to_vec(),
    }
}

/// Trains one logistic member per balanced subset.
pub fn train_ensemble(
    examples: &[TrainingExample],
    feature_names: &[String],
    config: &TrainConfig,
) -> Result<EnsembleModel> {
    let dim = feature_names.len();
    for (i, ex) in examples.iter().enumerate() {
        if ex.features.len() != dim {
            return Err(invalid(format!(
                "example {i} has {} features, expected {dim}",
                ex.features.len()
            )));
        }
        if ex.features.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("example {i} has a non-finite feature value")));
        }
    }
    let subsets = partition_balanced(examples, config.seed)?;
    let members = std::thread::scope(|scope| {
        let handles: Vec<_> = subsets
            .iter()
            .map(|subset| {
                scope.spawn(move || {
                    let refs: Vec<&TrainingExample> = subset.iter().map(|&i| &examples[i]).collect();
                    fit_member(&refs, dim, config)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("member training panicked")).collect()
    });
    Ok(EnsembleModel {
        feature_names: feature_names.to_vec(),
        members,
        config: *config,
    })
}

impl EnsembleModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_names.len() {
            return Err(invalid(format!(
                "feature dimensionality {} does not match model ({})",
                x.len(),
                self.feature_names.len()
            )));
        }
        Ok(())
    }

    pub fn member_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.members.iter().map(|m| m.probability(x)).collect())
    }

    /// Mean member probability.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let probs = self.member_probabilities(x)?;
        Ok(probs.iter().sum::<f64>() / probs.len() as f64)
    }

    /// Majority vote at 0.5; an even split goes to relevant iff the mean
    /// probability is at least 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        let probs = self.member_probabilities(x)?;
        let votes = probs.iter().filter(|&&p| p >= 0.5).count();
        let m = probs.len();
        Ok(match (2 * votes).cmp(&m) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => probs.iter().sum::<f64>() / m as f64 >= 0.5,
        })
    }

    pub fn score_features(&self, fv: &FeatureVector) -> Result<f64> {
        self.score(&fv.project(&self.feature_names)?)
    }

    pub fn predict_features(&self, fv: &FeatureVector) -> Result<bool> {
        self.predict(&fv.project(&self.feature_names)?)
    }
}

/// Model file: a `features` line, a `config` line, then one
/// `bias \t w1 \t w2 ...` line per member.
pub fn write_model(model: &EnsembleModel) -> String {
    let mut out = String::new();
    out.push_str("features");
    for n in &model.feature_names {
        out.push('\t');
        out.push_str(n);
    }
    let c = &model.config;
    let _ = writeln!(
        out,
        "\nconfig\tl2={}\tseed={}\tmax_iterations={}\ttolerance={}",
        c.l2, c.seed, c.max_iterations, c.tolerance
    );
    for m in &model.members {
        out.push_str(&m.bias.to_string());
        for w in &m.weights {
            let _ = write!(out, "\t{w}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_model(text: &str, source_name: &str) -> Result<EnsembleModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_error(source_name, 1, "empty model file"))?;
    let mut fields = header.split('\t');
    if fields.next() != Some("features") {
        return Err(parse_error(source_name, 1, "expected 'features' header"));
    }
    let feature_names: Vec<String> = fields.map(str::to_string).collect();
    let (n, config_line) = lines.next().ok_or_else(|| parse_error(source_name, 2, "missing config line"))?;
    let mut config = TrainConfig::default();
    let mut fields = config_line.split('\t');
    if fields.next() != Some("config") {
        return Err(parse_error(source_name, n + 1, "expected 'config' line"));
    }
    for kv in fields {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_error(source_name, n + 1, format!("bad config entry '{kv}'")))?;
        let bad = || parse_error(source_name, n + 1, format!("bad value for {k}"));
        match k {
            "l2" => config.l2 = v.parse().map_err(|_| bad())?,
            "seed" => config.seed = v.parse().map_err(|_| bad())?,
            "max_iterations" => config.max_iterations = v.parse().map_err(|_| bad())?,
            "tolerance" => config.tolerance = v.parse().map_err(|_| bad())?,
            _ => return Err(parse_error(source_name, n + 1, format!("unknown config key '{k}'"))),
        }
    }
    let mut members = Vec::new();
    for (n, line) in lines {
        let values: Vec<f64> = line
            .split('\t')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_error(source_name, n + 1, "bad member line"))?;
        if values.len() != feature_names.len() + 1 {
            return Err(parse_error(source_name, n + 1, "member dimensionality does not match features"));
        }
        members.push(Member {
            bias: values[0],
            weights: values[1..].to_vec(),
        });
    }
    if members.is_empty() {
        return Err(parse_error(source_name, 3, "model has no members"));
    }
    Ok(EnsembleModel {
        feature_names,
        members,
        config,
    })
}

pub fn load_model(path: &Path) -> Result<EnsembleModel> {
    parse_model(&fs::read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn labelled(pos: usize, neg: usize) -> Vec<TrainingExample> {
        (0..pos)
            .map(|_| TrainingExample::new(vec![0.9], true))
            .chain((0..neg).map(|_| TrainingExample::new(vec![0.1], false)))
            .collect()
    }

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    fn constant_model(probs: &[f64]) -> EnsembleModel {
        EnsembleModel {
            feature_names: names(1),
            members: probs.iter().map(|&p| Member { bias: logit(p), weights: vec![0.0] }).collect(),
            config: TrainConfig::default(),
        }
    }

    #[test]
    fn partition_ceiling_split() {
        let ex = labelled(10, 25);
        let subsets = partition_balanced(&ex, 3).unwrap();
        let mut neg_counts: Vec<usize> = subsets.iter().map(|s| s.iter().filter(|&&i| !ex[i].label).count()).collect();
        neg_counts.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(neg_counts, [9, 8, 8]);
        assert!(subsets.iter().all(|s| s.iter().filter(|&&i| ex[i].label).count() == 10));
        let mut all_neg: Vec<usize> = subsets.iter().flatten().copied().filter(|&i| !ex[i].label).collect();
        all_neg.sort_unstable();
        assert_eq!(all_neg, (10..35).collect::<Vec<_>>());
    }

    #[test]
    fn partition_equal_counts_single_subset() {
        let subsets = partition_balanced(&labelled(10, 10), 0).unwrap();
        assert_eq!(subsets.len(), 1);
        assert_eq!(subsets[0].len(), 20);
    }

    #[test]
    fn partition_requires_both_classes() {
        assert!(partition_balanced(&labelled(0, 5), 0).is_err());
        assert!(partition_balanced(&labelled(5, 0), 0).is_err());
    }

    #[test]
    fn separable_toy_set() {
        let ex = labelled(10, 30);
        let model = train_ensemble(&ex, &names(1), &TrainConfig::default()).unwrap();
        assert_eq!(model.members.len(), 3);
        for m in &model.members {
            for e in &ex {
                assert_eq!(m.probability(&e.features) >= 0.5, e.label);
            }
        }
    }

    #[test]
    fn zero_features_predict_base_rate() {
        let ex: Vec<_> = (0..30).map(|i| TrainingExample::new(vec![0.0, 0.0], i < 10)).collect();
        let model = train_ensemble(&ex, &names(2), &TrainConfig::default()).unwrap();
        assert_eq!(model.members.len(), 2);
        for m in &model.members {
            assert!((m.probability(&[0.0, 0.0]) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ex: Vec<TrainingExample> = (0..30)
            .map(|_| TrainingExample::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen()))
            .collect();
        let refs: Vec<&TrainingExample> = ex.iter().collect();
        let params: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grad) = objective(&params, &refs, 0.7);
        let h = 1e-5;
        for k in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (objective(&up, &refs, 0.7).0 - objective(&down, &refs, 0.7).0) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6 * grad[k].abs().max(1.0), "{k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn score_is_mean_probability() {
        let model = constant_model(&[0.9, 0.6, 0.2]);
        assert!((model.score(&[0.3]).unwrap() - 1.7 / 3.0).abs() < 1e-12);
        let zero = constant_model(&[0.5]);
        assert_eq!(zero.score(&[4.0]).unwrap(), 0.5);
        let same = constant_model(&[0.3, 0.3]);
        assert!((same.score(&[0.0]).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let model = constant_model(&[0.5]);
        assert!(model.score(&[1.0, 2.0]).is_err());
        assert!(model.predict(&[]).is_err());
    }

    #[test]
    fn majority_vote() {
        assert!(constant_model(&[0.8, 0.7, 0.1]).predict(&[0.0]).unwrap());
        assert!(!constant_model(&[0.55, 0.35]).predict(&[0.0]).unwrap());
        assert!(constant_model(&[0.51]).predict(&[0.0]).unwrap());
        assert!(constant_model(&[0.9, 0.2]).predict(&[0.0]).unwrap());
    }

    #[test]
    fn rejects_non_finite_features() {
        let mut ex = labelled(2, 2);
        ex[0].features[0] = f64::NAN;
        assert!(train_ensemble(&ex, &names(1), &TrainConfig::default()).is_err());
    }

    #[test]
    fn retraining_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ex: Vec<TrainingExample> = (0..80)
            .map(|_| {
                let x: f64 = rng.gen();
                TrainingExample::new(vec![x, rng.gen()], rng.gen::<f64>() < x * 0.5)
            })
            .collect();
        let config = TrainConfig { seed: 17, ..TrainConfig::default() };
        let a = train_ensemble(&ex, &names(2), &config).unwrap();
        let b = train_ensemble(&ex, &names(2), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn informative_feature_sign_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ex: Vec<TrainingExample> = (0..400)
            .map(|_| {
                let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let p = sigmoid(-1.5 - 4.0 * x[0]);
                TrainingExample::new(x, rng.gen::<f64>() < p)
            })
            .collect();
        let model = train_ensemble(&ex, &names(2), &TrainConfig::default()).unwrap();
        assert!(model.members.len() > 1);
        assert!(model.members.iter().all(|m| m.weights[0] < 0.0));
    }

    #[test]
    fn model_file_round_trip() {
        let model = train_ensemble(&labelled(4, 9), &names(1), &TrainConfig { seed: 2, ..Default::default() }).unwrap();
        let parsed = parse_model(&write_model(&model), "t").unwrap();
        assert_eq!(parsed, model);
    }
}
