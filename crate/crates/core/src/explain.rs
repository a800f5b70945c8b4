//! Model-agnostic Shapley attributions (KernelSHAP) and feature-importance
//! summaries.
//!
//! Absent features are filled from background rows (interventional
//! conditioning): the value of a coalition `S` for instance `x` is the mean
//! of `f(x_S, b_{S̄})` over all background rows `b`. Attributions solve the
//! Shapley-kernel weighted least-squares problem with the empty and full
//! coalitions imposed as constraints, so `φ₀ = E_b[f(b)]` and
//! `φ₀ + Σφ = f(x)` hold exactly. In exact mode all `2^M` coalitions enter
//! the regression and the solution coincides with the Shapley values.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::model::Predictor;
use crate::rng::{child_rng, rng_from_seed};

pub const MAX_EXACT_FEATURES: usize = 10;
pub const MAX_FEATURES: usize = 16;
pub const DEFAULT_BACKGROUND_SIZE: usize = 100;
const BACKGROUND_STRATA: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMode {
    /// Enumerate every coalition.
    Exact,
    /// Draw this many coalitions from the Shapley kernel.
    Sampled(usize),
}

impl std::str::FromStr for ShapMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(ShapMode::Exact);
        }
        if let Some(n) = s.strip_prefix("sampled:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::config(format!("bad coalition count in '{s}'")))?;
            if n == 0 {
                return Err(Error::config("sampled mode needs at least one coalition"));
            }
            return Ok(ShapMode::Sampled(n));
        }
        Err(Error::config(format!(
            "unknown SHAP mode '{s}' (use exact or sampled:N)"
        )))
    }
}

/// Attribution of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapRow {
    pub values: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    /// The regression was singular and was solved by pseudo-inverse.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub feature_names: Vec<String>,
    /// `instances × features`
    pub shap_values: Vec<Vec<f64>>,
    pub base_value: f64,
    pub predictions: Vec<f64>,
    pub degenerate_rows: Vec<usize>,
}

impl AttributionResult {
    /// Largest `|φ₀ + Σφ − f(x)|` over the instances.
    pub fn max_efficiency_gap(&self) -> f64 {
        self.shap_values
            .iter()
            .zip(&self.predictions)
            .map(|(row, f)| (self.base_value + row.iter().sum::<f64>() - f).abs())
            .fold(0.0, f64::max)
    }
}

/// Shapley kernel weight of a coalition of size `s` out of `m` features.
pub fn shapley_kernel_weight(m: usize, s: usize) -> f64 {
    if s == 0 || s == m {
        return f64::INFINITY;
    }
    (m as f64 - 1.0) / (binomial(m, s) * s as f64 * (m - s) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_inputs(model: &dyn Predictor, background: &[Vec<f64>], m: usize) -> Result<()> {
    if background.is_empty() {
        return Err(Error::config("background must contain at least one row"));
    }
    check_len("model input width", model.n_features(), m)?;
    for b in background {
        check_len("background row", m, b.len())?;
    }
    if m == 0 || m > MAX_FEATURES {
        return Err(Error::config(format!(
            "KernelSHAP supports 1..={MAX_FEATURES} features, got {m}"
        )));
    }
    Ok(())
}

/// Mean model output over the background.
pub fn background_mean(model: &dyn Predictor, background: &[Vec<f64>]) -> Result<f64> {
    let sum = background.iter().map(|b| model.predict(b)).sum::<Result<f64>>()?;
    Ok(sum / background.len() as f64)
}

fn coalition_value(
    model: &dyn Predictor,
    background: &[Vec<f64>],
    instance: &[f64],
    mask: u32,
    buf: &mut Vec<f64>,
) -> Result<f64> {
    let mut sum = 0.0;
    for b in background {
        buf.clear();
        buf.extend(
            instance
                .iter()
                .zip(b)
                .enumerate()
                .map(|(j, (x, bj))| if mask >> j & 1 == 1 { *x } else { *bj }),
        );
        sum += model.predict(buf)?;
    }
    Ok(sum / background.len() as f64)
}

/// Solves `min Σ w_k (v_k − φ₀ − z_k·φ)²` subject to `Σφ = total`.
///
/// The last attribution is eliminated through the constraint and the
/// remaining normal equations are solved by Cholesky, falling back to an
/// SVD pseudo-inverse when singular.
fn constrained_wls(
    m: usize,
    masks: &[u32],
    weights: &[f64],
    values: &[f64],
    base: f64,
    total: f64,
) -> (Vec<f64>, bool) {
    if m == 1 {
        return (vec![total], false);
    }
    let k = m - 1;
    let last = 1u32 << k;
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut x = vec![0.0; k];
    for ((&mask, &w), &v) in masks.iter().zip(weights).zip(values) {
        let z_last = if mask & last != 0 { 1.0 } else { 0.0 };
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (mask >> j & 1) as f64 - z_last;
        }
        let y = v - base - z_last * total;
        for i in 0..k {
            if x[i] == 0.0 {
                continue;
            }
            rhs[i] += w * x[i] * y;
            for j in 0..k {
                a[(i, j)] += w * x[i] * x[j];
            }
        }
    }
    let (solution, degenerate) = match a.clone().cholesky() {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let svd = a.svd(true, true);
            let sol = svd.solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(k));
            (sol, true)
        }
    };
    let mut phi: Vec<f64> = solution.iter().copied().collect();
    let rest: f64 = phi.iter().sum();
    phi.push(total - rest);
    (phi, degenerate)
}

fn sample_coalitions(m: usize, n: usize, seed: u64) -> Vec<u32> {
    let mut rng = rng_from_seed(seed);
    let size_weights: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
    let total: f64 = size_weights.iter().sum();
    let mut features: Vec<usize> = (0..m).collect();
    (0..n)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut size = m - 1;
            for (i, w) in size_weights.iter().enumerate() {
                if u < *w {
                    size = i + 1;
                    break;
                }
                u -= w;
            }
            features.shuffle(&mut rng);
            features[..size].iter().fold(0u32, |acc, &j| acc | 1 << j)
        })
        .collect()
}

fn kernel_shap_with_base(
    model: &dyn Predictor,
    background: &[Vec<f64>],
    instance: &[f64],
    mode: ShapMode,
    seed: u64,
    base: f64,
) -> Result<ShapRow> {
    let m = instance.len();
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let (masks, weights): (Vec<u32>, Vec<f64>) = match mode {
        ShapMode::Exact => {
            if m > MAX_EXACT_FEATURES {
                return Err(Error::config(format!(
                    "exact mode supports at most {MAX_EXACT_FEATURES} features, got {m}"
                )));
            }
            (1..full)
                .map(|mask| (mask, shapley_kernel_weight(m, mask.count_ones() as usize)))
                .unzip()
        }
        ShapMode::Sampled(n) => {
            let masks = if m == 1 {
                Vec::new()
            } else {
                sample_coalitions(m, n, seed)
            };
            let w = vec![1.0; masks.len()];
            (masks, w)
        }
    };
    let prediction = model.predict(instance)?;
    let mut buf = Vec::with_capacity(m);
    let values = masks
        .iter()
        .map(|&mask| coalition_value(model, background, instance, mask, &mut buf))
        .collect::<Result<Vec<_>>>()?;
    let (phi, degenerate) = constrained_wls(m, &masks, &weights, &values, base, prediction - base);
    Ok(ShapRow {
        values: phi,
        base_value: base,
        prediction,
        degenerate,
    })
}

/// Attributions for one instance against a background set.
pub fn kernel_shap(
    model: &dyn Predictor,
    background: &[Vec<f64>],
    instance: &[f64],
    mode: ShapMode,
    seed: u64,
) -> Result<ShapRow> {
    check_inputs(model, background, instance.len())?;
    let base = background_mean(model, background)?;
    kernel_shap_with_base(model, background, instance, mode, seed, base)
}

/// Attributions for every row of `test`. Row `i` in sampled mode uses a
/// coalition stream derived from `(seed, i)`.
pub fn explain_dataset(
    model: &dyn Predictor,
    background: &Dataset,
    test: &Dataset,
    mode: ShapMode,
    seed: u64,
) -> Result<AttributionResult> {
    check_len("test width", background.n_features(), test.n_features())?;
    check_inputs(model, &background.features, background.n_features())?;
    let base = background_mean(model, &background.features)?;
    let total = test.len();
    let step = (total / 10).max(1);
    let rows = (0..total)
        .into_par_iter()
        .map(|i| {
            let s = crate::rng::derive_seed(seed, &[i as u64]);
            let row = kernel_shap_with_base(model, &background.features, &test.features[i], mode, s, base);
            if (i + 1) % step == 0 {
                log::info!("explained {}/{total} instances", i + 1);
            }
            row
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.degenerate)
        .map(|(i, _)| i)
        .collect();
    Ok(AttributionResult {
        feature_names: test.feature_names.clone(),
        predictions: rows.iter().map(|r| r.prediction).collect(),
        shap_values: rows.into_iter().map(|r| r.values).collect(),
        base_value: base,
        degenerate_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub feature_names: Vec<String>,
    /// Mean `|φ_j|` over instances.
    pub importance: Vec<f64>,
    /// 1 = most important; ties go to the lower feature index.
    pub rank: Vec<usize>,
}

pub fn importance_summary(result: &AttributionResult) -> Result<ImportanceSummary> {
    if result.shap_values.is_empty() {
        return Err(Error::validation(None, "attribution result has no instances"));
    }
    let m = result.feature_names.len();
    let n = result.shap_values.len() as f64;
    let mut importance = vec![0.0; m];
    for row in &result.shap_values {
        for (imp, v) in importance.iter_mut().zip(row) {
            *imp += v.abs() / n;
        }
    }
    Ok(ImportanceSummary {
        feature_names: result.feature_names.clone(),
        rank: ranks(&importance),
        importance,
    })
}

fn ranks(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let mut rank = vec![0; importance.len()];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos + 1;
    }
    rank
}

/// Importances of several models on shared background and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub feature_names: Vec<String>,
    pub per_model: Vec<ImportanceSummary>,
    pub mean_importance: Vec<f64>,
    /// Across-model sample standard deviation of each feature's importance.
    pub std_importance: Vec<f64>,
}

pub fn ensemble_importance_stability(
    models: &[&dyn Predictor],
    background: &Dataset,
    test: &Dataset,
    mode: ShapMode,
    seed: u64,
) -> Result<(Vec<AttributionResult>, StabilityReport)> {
    if models.len() < 2 {
        return Err(Error::config("stability analysis needs at least two models"));
    }
    let results = models
        .iter()
        .map(|m| explain_dataset(*m, background, test, mode, seed))
        .collect::<Result<Vec<_>>>()?;
    let per_model = results.iter().map(importance_summary).collect::<Result<Vec<_>>>()?;
    let m = test.n_features();
    let k = per_model.len() as f64;
    let mut mean = vec![0.0; m];
    let mut std = vec![0.0; m];
    for j in 0..m {
        let vals: Vec<f64> = per_model.iter().map(|s| s.importance[j]).collect();
        mean[j] = vals.iter().sum::<f64>() / k;
        std[j] = (vals.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    }
    Ok((
        results,
        StabilityReport {
            feature_names: test.feature_names.clone(),
            per_model,
            mean_importance: mean,
            std_importance: std,
        },
    ))
}

/// Deterministic target-stratified draw: rows are ordered by target, cut
/// into ten equal strata, and an equal share of `size` is drawn from each.
pub fn stratified_background(data: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    if size == 0 || size > data.len() {
        return Err(Error::config(format!(
            "background size {size} must be in 1..={}",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.targets[a].total_cmp(&data.targets[b]).then(a.cmp(&b)));
    let strata_count = BACKGROUND_STRATA.min(data.len());
    let stratum_sizes = equal_parts(data.len(), strata_count);
    let quotas = equal_parts(size, strata_count);

    let mut picked = Vec::with_capacity(size);
    let mut carry = 0;
    let mut start = 0;
    for (s, (&len, &quota)) in stratum_sizes.iter().zip(&quotas).enumerate() {
        let mut stratum = order[start..start + len].to_vec();
        start += len;
        stratum.shuffle(&mut child_rng(seed, &[s as u64]));
        let want = quota + carry;
        let take = want.min(stratum.len());
        carry = want - take;
        picked.extend_from_slice(&stratum[..take]);
    }
    // Leftover quota from undersized strata is filled from the top stratum backwards.
    let mut remaining: Vec<usize> = order.iter().rev().copied().filter(|i| !picked.contains(i)).collect();
    remaining.truncate(carry);
    picked.extend(remaining);
    picked.sort_unstable();
    Ok(data.subset(&picked))
}

fn equal_parts(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// CSV `instance_id,feature_name,shap_value`, prefixed by `model_id` when
/// more than one result is written.
pub fn write_attributions_csv<W: Write>(results: &[(String, &AttributionResult)], writer: W) -> Result<()> {
    let tagged = results.len() > 1;
    let mut w = csv::Writer::from_writer(writer);
    if tagged {
        w.write_record(["model_id", "instance_id", "feature_name", "shap_value"])?;
    } else {
        w.write_record(["instance_id", "feature_name", "shap_value"])?;
    }
    for (model_id, result) in results {
        for (i, row) in result.shap_values.iter().enumerate() {
            for (name, v) in result.feature_names.iter().zip(row) {
                let mut rec = Vec::with_capacity(4);
                if tagged {
                    rec.push(model_id.clone());
                }
                rec.extend([i.to_string(), name.clone(), v.to_string()]);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// CSV `feature_name,mean_abs_shap,rank`, prefixed by `model_id` when more
/// than one summary is written.
pub fn write_summary_csv<W: Write>(summaries: &[(String, &ImportanceSummary)], writer: W) -> Result<()> {
    let tagged = summaries.len() > 1;
    let mut w = csv::Writer::from_writer(writer);
    if tagged {
        w.write_record(["model_id", "feature_name", "mean_abs_shap", "rank"])?;
    } else {
        w.write_record(["feature_name", "mean_abs_shap", "rank"])?;
    }
    for (model_id, s) in summaries {
        for ((name, imp), rank) in s.feature_names.iter().zip(&s.importance).zip(&s.rank) {
            let mut rec = Vec::with_capacity(4);
            if tagged {
                rec.push(model_id.clone());
            }
            rec.extend([name.clone(), imp.to_string(), rank.to_string()]);
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// CSV `feature_name,mean_importance,std_importance,variance_importance`.
pub fn write_stability_csv<W: Write>(report: &StabilityReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "feature_name",
        "mean_importance",
        "std_importance",
        "variance_importance",
    ])?;
    for ((name, mean), std) in report
        .feature_names
        .iter()
        .zip(&report.mean_importance)
        .zip(&report.std_importance)
    {
        w.write_record([name.clone(), mean.to_string(), std.to_string(), (std * std).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
