//! Dataset ingestion, rescaling and quantile binning.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-major numeric dataset with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    /// `features[j][i]` is feature `j` of row `i`.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl RawDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        for col in &features {
            if col.len() != labels.len() {
                return Err(Error::LengthMismatch { left: col.len(), right: labels.len() });
            }
        }
        for (j, col) in features.iter().enumerate() {
            if let Some((i, &v)) = col.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, column: j, value: v });
            }
        }
        Ok(RawDataset { features, labels })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.iter().map(|col| col[i]).collect()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            features: self.features.iter().map(|col| idx.iter().map(|&i| col[i]).collect()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Checks that every label is 0 or 1.
    pub fn check_binary_labels(&self) -> Result<()> {
        match self.labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            Some(row) => Err(Error::InvalidLabel { row, value: self.labels[row] }),
            None => Ok(()),
        }
    }
}

/// Reads a comma-separated file. Every cell must parse as a finite number.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: usize) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, has_header, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, has_header: bool, label_column: usize) -> Result<RawDataset> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(has_header).flexible(true).trim(csv::Trim::All).from_reader(reader);

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut n_columns = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if row == 0 {
            n_columns = record.len();
            if label_column >= n_columns {
                return Err(Error::LabelColumn { column: label_column, n_columns });
            }
            columns = vec![Vec::new(); n_columns];
        } else if record.len() != n_columns {
            return Err(Error::RaggedRow { row, expected: n_columns, found: record.len() });
        }
        for (column, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse { row, column, value: cell.to_string() })?;
            if !value.is_finite() {
                return Err(Error::NonFinite { row, column, value });
            }
            columns[column].push(value);
        }
    }
    if columns.is_empty() || columns[0].is_empty() {
        return Err(Error::EmptyData);
    }
    let labels = columns.remove(label_column);
    Ok(RawDataset { features: columns, labels })
}

/// Per-feature min/max fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScale {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn transform(&self, feature: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[feature], self.max[feature]);
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    /// Rescales a single raw row in place.
    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = self.transform(j, *v);
        }
    }
}

pub fn fit_scale(train: &RawDataset) -> Result<FeatureScale> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let (min, max) = train
        .features
        .iter()
        .map(|col| col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
        .unzip();
    Ok(FeatureScale { min, max })
}

/// Maps each value to `(v - min) / (max - min)` without clamping; constant features map to 0.
pub fn apply_scale(data: &RawDataset, scale: &FeatureScale) -> Result<RawDataset> {
    if data.n_features() != scale.n_features() {
        return Err(Error::FeatureMismatch { expected: scale.n_features(), found: data.n_features() });
    }
    let features =
        data.features.iter().enumerate().map(|(j, col)| col.iter().map(|&v| scale.transform(j, v)).collect()).collect();
    Ok(RawDataset { features, labels: data.labels.clone() })
}

/// Quantile bins of a single feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBins {
    /// Inclusive upper edge of each bin; the last entry is `+inf`.
    pub upper_bounds: Vec<f64>,
    /// Mean of the training values that fall in each bin.
    pub bin_avg: Vec<f64>,
}

impl FeatureBins {
    pub fn n_bins(&self) -> usize {
        self.upper_bounds.len()
    }

    /// First bin whose upper bound is `>= v`.
    #[inline]
    pub fn bin_of(&self, v: f64) -> u8 {
        let finite = &self.upper_bounds[..self.upper_bounds.len() - 1];
        finite.partition_point(|&ub| ub < v) as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    pub features: Vec<FeatureBins>,
}

impl BinMapper {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.features[feature].n_bins()
    }

    #[inline]
    pub fn bin_avg(&self, feature: usize, bin: u8) -> f64 {
        self.features[feature].bin_avg[bin as usize]
    }
}

/// Equal-frequency bins for one column: cut points at sorted ranks `ceil(N*k/B)`,
/// duplicates merged, at most `max_bin` bins.
pub fn build_feature_bins(values: &[f64], max_bin: usize) -> FeatureBins {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return FeatureBins { upper_bounds: vec![f64::INFINITY], bin_avg: vec![0.0] };
    }
    let top = sorted[n - 1];

    let mut distinct = sorted.clone();
    distinct.dedup();
    let mut cuts: Vec<f64> = if distinct.len() <= max_bin {
        distinct[..distinct.len() - 1].to_vec()
    } else {
        let mut cuts = Vec::with_capacity(max_bin - 1);
        for k in 1..max_bin {
            let rank = (n * k).div_ceil(max_bin);
            let c = sorted[rank - 1];
            if c < top && cuts.last().is_none_or(|&last| c > last) {
                cuts.push(c);
            }
        }
        cuts
    };
    cuts.push(f64::INFINITY);

    // mean as offset from the smallest member, so constant bins average exactly
    let mut lows = vec![f64::NAN; cuts.len()];
    let mut sums = vec![0.0; cuts.len()];
    let mut counts = vec![0usize; cuts.len()];
    let mut b = 0;
    for &v in &sorted {
        while v > cuts[b] {
            b += 1;
        }
        if counts[b] == 0 {
            lows[b] = v;
        }
        sums[b] += v - lows[b];
        counts[b] += 1;
    }
    let bin_avg = (0..cuts.len()).map(|b| lows[b] + sums[b] / counts[b] as f64).collect();
    FeatureBins { upper_bounds: cuts, bin_avg }
}

pub fn build_bins(train: &RawDataset, max_bin: usize) -> Result<BinMapper> {
    if !(2..=255).contains(&max_bin) {
        return Err(Error::InvalidConfig(format!("max_bin must be in [2, 255], got {max_bin}")));
    }
    let features = train.features.par_iter().map(|col| build_feature_bins(col, max_bin)).collect();
    Ok(BinMapper { features })
}

/// One byte per (feature, row), laid out column by column.
#[derive(Debug, Clone)]
pub struct BinnedDataset {
    pub bins: Vec<Vec<u8>>,
    pub labels: Vec<f64>,
    pub mapper: BinMapper,
}

impl BinnedDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    /// Bin-averaged value of `feature` for row `i`.
    #[inline]
    pub fn value(&self, feature: usize, i: usize) -> f64 {
        self.mapper.bin_avg(feature, self.bins[feature][i])
    }
}

pub fn bin_dataset(data: &RawDataset, mapper: &BinMapper) -> Result<BinnedDataset> {
    if data.n_features() != mapper.n_features() {
        return Err(Error::FeatureMismatch { expected: mapper.n_features(), found: data.n_features() });
    }
    let bins = data
        .features
        .par_iter()
        .zip(mapper.features.par_iter())
        .map(|(col, fb)| col.iter().map(|&v| fb.bin_of(v)).collect())
        .collect();
    Ok(BinnedDataset { bins, labels: data.labels.clone(), mapper: mapper.clone() })
}

/// Seeded shuffle; the first part keeps `ceil((1 - fraction) * n)` rows.
pub fn holdout_split(data: &RawDataset, fraction: f64, seed: u64) -> Result<(RawDataset, RawDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let n = data.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_first = (((1.0 - fraction) * n as f64).ceil() as usize).min(n);
    Ok((data.select(&idx[..n_first]), data.select(&idx[n_first..])))
}
