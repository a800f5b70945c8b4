//! Tabular cloud-cover data: CSV ingestion, min-max scaling to rotation
//! angles, seeded splits, and a synthetic generator.
//!
//! Feature order is fixed: `qv, qc, qi, ta, pa, hw, zg, lat`, so qubit `n`
//! always reads feature `n` of the selected subset.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::xu_randall::{saturation_specific_humidity, xu_randall_cloud_cover, XuRandallConstants};
use crate::error::{check_len, Error, Result};
use crate::rng::rng_from_seed;

pub const FEATURE_NAMES: [&str; 8] = ["qv", "qc", "qi", "ta", "pa", "hw", "zg", "lat"];
pub const TARGET_NAME: &str = "clc";
pub const GENERATOR_VERSION: &str = "synth-cloud-1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// All eight features.
    #[default]
    Full,
    /// Everything except height and latitude.
    Reduced,
    Custom(Vec<String>),
}

impl FeatureSet {
    pub fn names(&self) -> Vec<String> {
        match self {
            FeatureSet::Full => FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            FeatureSet::Reduced => FEATURE_NAMES[..6].iter().map(|s| s.to_string()).collect(),
            FeatureSet::Custom(names) => names.clone(),
        }
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FeatureSet::Full),
            "reduced" => Ok(FeatureSet::Reduced),
            list => {
                let names: Vec<String> = list.split(',').map(|n| n.trim().to_string()).collect();
                for n in &names {
                    if !FEATURE_NAMES.contains(&n.as_str()) {
                        return Err(Error::config(format!("unknown feature '{n}'")));
                    }
                }
                Ok(FeatureSet::Custom(names))
            }
        }
    }
}

/// Immutable table of feature rows and cloud-cover targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        check_len("target count", features.len(), targets.len())?;
        for row in &features {
            check_len("feature row", feature_names.len(), row.len())?;
        }
        Ok(Self {
            feature_names,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn target_mean(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.len().max(1) as f64
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_features(&self, set: &FeatureSet) -> Result<Dataset> {
        let names = set.names();
        let idx = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Schema(format!("dataset has no column '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            feature_names: names,
            features: self
                .features
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
            targets: self.targets.clone(),
        })
    }

    /// `(features, target)` pairs, convenient for batch gradients.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features
            .iter()
            .map(Vec::as_slice)
            .zip(self.targets.iter().copied())
    }
}

fn validate_row(names: &[String], row: &[f64], clc: f64, row_no: usize) -> Result<()> {
    for (name, &v) in names.iter().zip(row) {
        if !v.is_finite() {
            return Err(Error::validation(Some(row_no), format!("{name} is not finite")));
        }
        match name.as_str() {
            "qv" | "qc" | "qi" if v < 0.0 => {
                return Err(Error::validation(Some(row_no), format!("{name} = {v} is negative")));
            }
            "pa" if v <= 0.0 => {
                return Err(Error::validation(Some(row_no), format!("pa = {v} is not positive")));
            }
            _ => {}
        }
    }
    if !(0.0..=1.0).contains(&clc) {
        return Err(Error::validation(Some(row_no), format!("clc = {clc} outside [0, 1]")));
    }
    Ok(())
}

/// Reads a CSV with header `qv,qc,qi,ta,pa,hw,zg,lat,clc` (column order is
/// free, extra columns are ignored). Row numbers in errors count data rows
/// from 1.
pub fn read_csv<R: Read>(reader: R, set: &FeatureSet) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let mut all_idx = Vec::with_capacity(FEATURE_NAMES.len());
    for name in FEATURE_NAMES {
        all_idx.push(find(name)?);
    }
    let target_idx = find(TARGET_NAME)?;
    let all_names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        let parse = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| Error::validation(Some(row_no), format!("cannot parse {name} value '{raw}'")))
        };
        let row = all_idx
            .iter()
            .zip(&all_names)
            .map(|(&c, n)| parse(c, n))
            .collect::<Result<Vec<_>>>()?;
        let clc = parse(target_idx, TARGET_NAME)?;
        validate_row(&all_names, &row, clc, row_no)?;
        features.push(row);
        targets.push(clc);
    }
    let full = Dataset::new(all_names, features, targets)?;
    log::info!("loaded {} rows", full.len());
    full.select_features(set)
}

pub fn load_csv(path: impl AsRef<Path>, set: &FeatureSet) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, set)
}

/// Writes the dataset with its own columns followed by `clc`.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(TARGET_NAME);
    w.write_record(&header)?;
    for (row, y) in dataset.features.iter().zip(&dataset.targets) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

static EXTRAPOLATION_WARNINGS: AtomicUsize = AtomicUsize::new(0);
const MAX_EXTRAPOLATION_WARNINGS: usize = 10;

/// Per-feature min-max map onto `[lo, hi]` radians, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub feature_names: Vec<String>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl FeatureScaling {
    pub fn fit(train: &Dataset, lo: f64, hi: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::validation(None, "cannot fit scaling on an empty dataset"));
        }
        if !(hi > lo) {
            return Err(Error::config(format!("scaling interval [{lo}, {hi}] is empty")));
        }
        let n = train.n_features();
        let mut mins = vec![f64::INFINITY; n];
        let mut maxs = vec![f64::NEG_INFINITY; n];
        for row in &train.features {
            for j in 0..n {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        }
        for j in 0..n {
            if !(maxs[j] > mins[j]) {
                return Err(Error::validation(
                    None,
                    format!("feature '{}' is constant on the training split", train.feature_names[j]),
                ));
            }
        }
        Ok(Self {
            feature_names: train.feature_names.clone(),
            mins,
            maxs,
            lo,
            hi,
        })
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// Affine map to angles; values outside the fitted range extrapolate.
    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_len("scaled feature row", self.n_features(), features.len())?;
        let span = self.hi - self.lo;
        Ok(features
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if (x < self.mins[j] || x > self.maxs[j])
                    && EXTRAPOLATION_WARNINGS.fetch_add(1, Ordering::Relaxed) < MAX_EXTRAPOLATION_WARNINGS
                {
                    log::warn!(
                        "feature '{}' value {x} outside training range [{}, {}]; extrapolating",
                        self.feature_names[j],
                        self.mins[j],
                        self.maxs[j]
                    );
                }
                self.lo + (x - self.mins[j]) * span / (self.maxs[j] - self.mins[j])
            })
            .collect())
    }

    pub fn invert(&self, angles: &[f64]) -> Result<Vec<f64>> {
        check_len("angle row", self.n_features(), angles.len())?;
        let span = self.hi - self.lo;
        Ok(angles
            .iter()
            .enumerate()
            .map(|(j, &a)| self.mins[j] + (a - self.lo) * (self.maxs[j] - self.mins[j]) / span)
            .collect())
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.feature_names != self.feature_names {
            return Err(Error::Schema(format!(
                "scaling fitted on {:?} but dataset has {:?}",
                self.feature_names, dataset.feature_names
            )));
        }
        let features = dataset.features.iter().map(|r| self.apply(r)).collect::<Result<_>>()?;
        Ok(Dataset {
            feature_names: dataset.feature_names.clone(),
            features,
            targets: dataset.targets.clone(),
        })
    }

    /// SHA-256 of the serialized record, for checking that the same scaling
    /// is used across phases.
    pub fn checksum(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scaling serializes");
        hex_digest(&bytes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn fit_scaling(train: &Dataset, lo: f64, hi: f64) -> Result<FeatureScaling> {
    FeatureScaling::fit(train, lo, hi)
}

pub fn apply_scaling(scaling: &FeatureScaling, features: &[f64]) -> Result<Vec<f64>> {
    scaling.apply(features)
}

/// Part sizes for `n` rows: floor of each share, then the leftover rows go
/// to the parts with the largest fractional remainders (earlier part wins
/// ties).
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::config(format!(
            "split fractions must be non-negative: {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions sum to {sum}, not 1")));
    }
    let exact = fractions.map(|f| f * n as f64);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            sizes[i] += 1;
            left -= 1;
        }
    }
    Ok(sizes)
}

/// Seeded permutation split into disjoint train/validation/test parts.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let idx = split_indices(dataset.len(), fractions, seed)?;
    Ok((
        dataset.subset(&idx[0]),
        dataset.subset(&idx[1]),
        dataset.subset(&idx[2]),
    ))
}

pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let sizes = split_sizes(n, fractions)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let test = perm.split_off(sizes[0] + sizes[1]);
    let val = perm.split_off(sizes[0]);
    Ok([perm, val, test])
}

/// Provenance of a synthetic dataset, written as a sidecar document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub generator_version: String,
    pub n: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub xu_randall: XuRandallConstants,
}

const SCALE_HEIGHT_M: f64 = 7500.0;
const MAX_HEIGHT_M: f64 = 16_000.0;

/// Synthetic stand-in for coarse-grained storm-resolving output.
///
/// Ranges: latitude uniform in [−90, 90]°, height uniform in [0, 16] km,
/// pressure `10⁵·exp(−z/7.5 km)` with 2 % log-normal jitter clamped to
/// [10⁴, 10⁵] Pa, temperature from a latitude-dependent surface value and a
/// 6.5 K/km lapse rate clamped to [200, 310] K, wind uniform in [0, 40] m/s.
/// Vapour is a log-uniform fraction in [0.2, 1.1] of saturation; condensate
/// appears with probability RH², with log-uniform magnitude in
/// [10⁻⁶, 10⁻³] kg/kg split into ice below 0 °C (all ice below −38 °C).
/// The target is Xu-Randall cloud fraction plus smooth height, latitude and
/// wind terms and Gaussian noise, clamped to [0, 1].
pub fn synthesize_dataset(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset> {
    synthesize_with_constants(n, seed, noise_sd, &XuRandallConstants::default())
}

pub fn synthesize_with_constants(
    n: usize,
    seed: u64,
    noise_sd: f64,
    constants: &XuRandallConstants,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::config("synthetic dataset needs n >= 1"));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::config(format!("noise_sd must be non-negative, got {noise_sd}")));
    }
    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let lat: f64 = rng.random_range(-90.0..=90.0);
        let zg: f64 = rng.random_range(0.0..=MAX_HEIGHT_M);
        let pa = (1e5 * (-zg / SCALE_HEIGHT_M + 0.02 * std_normal.sample(&mut rng)).exp()).clamp(1e4, 1e5);
        let lat_rad = lat.to_radians();
        let t_surface = 300.0 - 40.0 * lat_rad.sin().powi(2);
        let ta = (t_surface - 6.5e-3 * zg + 2.0 * std_normal.sample(&mut rng)).clamp(200.0, 310.0);
        let hw: f64 = rng.random_range(0.0..=40.0);

        let q_sat = saturation_specific_humidity(ta, pa)?;
        let ratio = (rng.random_range(0.2f64.ln()..=1.1f64.ln())).exp();
        let qv = ratio * q_sat;
        let rh = ratio.min(1.0);

        let (qc, qi) = if rng.random::<f64>() < rh * rh {
            let q_l = rng.random_range(1e-6f64.ln()..=1e-3f64.ln()).exp();
            let ice = ((273.15 - ta) / 38.0).clamp(0.0, 1.0);
            (q_l * (1.0 - ice), q_l * ice)
        } else {
            (0.0, 0.0)
        };

        let xr = xu_randall_cloud_cover(qv, qc, qi, ta, pa, constants)?;
        let smooth = 0.12 * rh * (std::f64::consts::PI * zg / 8000.0).sin() + 0.05 * (2.0 * lat_rad).cos() - 0.04
            + 0.03 * ((hw - 20.0) / 10.0).tanh() * rh;
        let noise = noise_sd * std_normal.sample(&mut rng);
        let clc = (xr + smooth + noise).clamp(0.0, 1.0);

        features.push(vec![qv, qc, qi, ta, pa, hw, zg, lat]);
        targets.push(clc);
    }
    Dataset::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), features, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "qv,qc,qi,ta,pa,hw,zg,lat,clc\n\
        0.005,0.0001,0,280,90000,5,1000,45,0.3\n\
        0.002,0,0.00002,250,50000,12,5500,-10,0.0\n\
        0.010,0.0002,0,295,100000,2,100,5,1\n";

    #[test]
    fn reads_well_formed_file() {
        let d = read_csv(GOOD.as_bytes(), &FeatureSet::Full).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_features(), 8);
        assert_eq!(d.features[1][3], 250.0);
        let r = read_csv(GOOD.as_bytes(), &FeatureSet::Reduced).unwrap();
        assert_eq!(r.feature_names, vec!["qv", "qc", "qi", "ta", "pa", "hw"]);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "qv,qc,qi,ta,pa,hw,zg,lat\n0.005,0,0,280,90000,5,1000,45\n";
        let err = read_csv(text.as_bytes(), &FeatureSet::Full).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("clc")), "{err}");
    }

    #[test]
    fn invalid_target_reports_row() {
        let mut text = String::from("qv,qc,qi,ta,pa,hw,zg,lat,clc\n");
        for i in 1..=8 {
            let clc = if i == 7 { "1.2" } else { "0.5" };
            text.push_str(&format!("0.005,0,0,280,90000,5,1000,45,{clc}\n"));
        }
        match read_csv(text.as_bytes(), &FeatureSet::Full).unwrap_err() {
            Error::Validation { row, .. } => assert_eq!(row, Some(7)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unparsable_and_negative_values_rejected() {
        let text = "qv,qc,qi,ta,pa,hw,zg,lat,clc\n0.005,x,0,280,90000,5,1000,45,0.1\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &FeatureSet::Full),
            Err(Error::Validation { row: Some(1), .. })
        ));
        let text = "qv,qc,qi,ta,pa,hw,zg,lat,clc\n-0.005,0,0,280,90000,5,1000,45,0.1\n";
        assert!(read_csv(text.as_bytes(), &FeatureSet::Full).is_err());
        let text = "qv,qc,qi,ta,pa,hw,zg,lat,clc\n0.005,0,0,280,0,5,1000,45,0.1\n";
        assert!(read_csv(text.as_bytes(), &FeatureSet::Full).is_err());
    }

    #[test]
    fn scaling_endpoints_and_inverse() {
        let d = read_csv(GOOD.as_bytes(), &FeatureSet::Full).unwrap();
        let s = fit_scaling(&d, 0.0, std::f64::consts::PI).unwrap();
        let lo_row: Vec<f64> = s.mins.clone();
        let hi_row: Vec<f64> = s.maxs.clone();
        assert!(s.apply(&lo_row).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(s
            .apply(&hi_row)
            .unwrap()
            .iter()
            .all(|v| (v - std::f64::consts::PI).abs() < 1e-12));
        for row in &d.features {
            let back = s.invert(&s.apply(row).unwrap()).unwrap();
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn scaling_extrapolates_linearly() {
        let d = Dataset::new(vec!["qv".into()], vec![vec![0.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        let s = fit_scaling(&d, 0.0, 1.0).unwrap();
        assert_eq!(s.apply(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn constant_feature_rejected() {
        let d = Dataset::new(vec!["qv".into()], vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        assert!(fit_scaling(&d, 0.0, 1.0).is_err());
    }

    #[test]
    fn split_size_rules() {
        assert_eq!(split_sizes(10, [1.0, 0.0, 0.0]).unwrap(), [10, 0, 0]);
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]).unwrap(), [8, 1, 1]);
        assert_eq!(split_sizes(11, [0.7, 0.1, 0.2]).unwrap(), [8, 1, 2]);
        assert!(split_sizes(10, [0.5, 0.1, 0.1]).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let d = synthesize_dataset(50, 1, 0.05).unwrap();
        let (a, _, _) = split(&d, [0.7, 0.1, 0.2], 3).unwrap();
        let (b, _, _) = split(&d, [0.7, 0.1, 0.2], 3).unwrap();
        let (c, _, _) = split(&d, [0.7, 0.1, 0.2], 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), c.len());
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_is_reproducible_and_bounded() {
        let a = synthesize_dataset(1000, 7, 0.05).unwrap();
        let b = synthesize_dataset(1000, 7, 0.05).unwrap();
        assert_eq!(a, b);
        assert!(a.targets.iter().all(|y| (0.0..=1.0).contains(y)));
        for row in &a.features {
            assert!((200.0..=310.0).contains(&row[3]));
            assert!((1e4..=1e5).contains(&row[4]));
        }
        assert!(synthesize_dataset(0, 1, 0.0).is_err());
    }

    #[test]
    fn zero_condensate_rows_have_no_scheme_cloud() {
        let d = synthesize_dataset(500, 2, 0.0).unwrap();
        let c = XuRandallConstants::default();
        let mut seen = 0;
        for r in d.features.iter().filter(|r| r[1] == 0.0 && r[2] == 0.0) {
            assert_eq!(xu_randall_cloud_cover(r[0], r[1], r[2], r[3], r[4], &c).unwrap(), 0.0);
            seen += 1;
        }
        assert!(seen > 0);
    }

    #[test]
    fn synthetic_clamps_at_both_bounds() {
        let d = synthesize_dataset(10_000, 11, 0.05).unwrap();
        let n = d.len() as f64;
        let zeros = d.targets.iter().filter(|&&y| y == 0.0).count() as f64 / n;
        let ones = d.targets.iter().filter(|&&y| y == 1.0).count() as f64 / n;
        let interior = d.targets.iter().filter(|&&y| y > 0.0 && y < 1.0).count();
        assert!(zeros > 0.0 && zeros < 0.9, "zeros {zeros}");
        assert!(ones > 0.0 && ones < 0.9, "ones {ones}");
        assert!(interior > 0);
    }

    #[test]
    fn csv_round_trip() {
        let d = synthesize_dataset(20, 5, 0.05).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(&buf[..], &FeatureSet::Full).unwrap();
        assert_eq!(back, d);
    }
}
