use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Matrix;

/// Bin index reserved for missing values; value bins are `0..n_bins`.
pub const MISSING_BIN: u8 = u8::MAX;

/// Upper-inclusive bin edges for one feature: value `x` lands in the first
/// bin whose edge is `>= x`, values above the last edge in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub edges: Vec<f64>,
}

/// Rows used to place edges on very tall columns.
const EDGE_SAMPLE: usize = 200_000;

impl BinMapper {
    pub fn fit(values: &[f64], max_bins: usize) -> BinMapper {
        let stride = (values.len() / EDGE_SAMPLE).max(1);
        let mut v: Vec<f64> = values
            .iter()
            .step_by(stride)
            .copied()
            .filter(|x| !x.is_nan())
            .collect();
        if v.is_empty() {
            return BinMapper { edges: Vec::new() };
        }
        v.sort_unstable_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for x in v.iter().copied() {
            match distinct.last_mut() {
                Some((d, c)) if *d == x => *c += 1,
                _ => distinct.push((x, 1)),
            }
        }
        if distinct.len() <= max_bins {
            return BinMapper {
                edges: distinct.into_iter().map(|(x, _)| x).collect(),
            };
        }
        // Greedy equal-frequency cuts; the last edge is always the maximum.
        let n = v.len() as f64;
        let per_bin = n / max_bins as f64;
        let mut edges = Vec::with_capacity(max_bins);
        let mut cum = 0usize;
        let last = distinct.len() - 1;
        for (i, &(x, c)) in distinct.iter().enumerate() {
            cum += c;
            if i == last {
                edges.push(x);
                break;
            }
            if edges.len() + 1 < max_bins && cum as f64 >= per_bin * (edges.len() + 1) as f64 {
                edges.push(x);
            }
        }
        BinMapper { edges }
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn bin(&self, x: f64) -> u8 {
        if x.is_nan() || self.edges.is_empty() {
            return MISSING_BIN;
        }
        let b = self.edges.partition_point(|&e| e < x);
        b.min(self.edges.len() - 1) as u8
    }

    /// Raw-value threshold equivalent to "bin <= b".
    pub fn threshold(&self, b: u8) -> f64 {
        self.edges[b as usize]
    }
}

/// Column-major binned feature matrix.
#[derive(Debug, Clone)]
pub struct BinnedData {
    pub n_rows: usize,
    pub bins: Vec<Vec<u8>>,
    pub mappers: Vec<BinMapper>,
    pub names: Vec<String>,
}

impl BinnedData {
    pub fn from_matrix(x: &Matrix, max_bins: usize) -> BinnedData {
        let max_bins = max_bins.clamp(2, 255);
        let (mappers, bins): (Vec<_>, Vec<_>) = x
            .columns
            .par_iter()
            .map(|col| {
                let m = BinMapper::fit(col, max_bins);
                let b = col.iter().map(|&v| m.bin(v)).collect::<Vec<u8>>();
                (m, b)
            })
            .unzip();
        BinnedData {
            n_rows: x.n_rows(),
            bins,
            mappers,
            names: x.names.clone(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    /// Copy of the given rows (all features keep their mappers).
    pub fn take_rows(&self, rows: &[u32]) -> BinnedData {
        let bins = self
            .bins
            .par_iter()
            .map(|col| rows.iter().map(|&r| col[r as usize]).collect())
            .collect();
        BinnedData {
            n_rows: rows.len(),
            bins,
            mappers: self.mappers.clone(),
            names: self.names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_distinct_values_get_one_bin_each() {
        let m = BinMapper::fit(&[3.0, 1.0, 2.0, 1.0, f64::NAN], 255);
        assert_eq!(m.edges, vec![1.0, 2.0, 3.0]);
        assert_eq!(m.bin(1.0), 0);
        assert_eq!(m.bin(1.5), 1);
        assert_eq!(m.bin(99.0), 2);
        assert_eq!(m.bin(f64::NAN), MISSING_BIN);
    }

    #[test]
    fn quantile_edges_respect_bin_cap() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        let m = BinMapper::fit(&v, 16);
        assert_eq!(m.n_bins(), 16);
        assert_eq!(*m.edges.last().unwrap(), 9999.0);
        let mut counts = [0usize; 16];
        for &x in &v {
            counts[m.bin(x) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c > 500 && c < 800), "{counts:?}");
    }

    #[test]
    fn bin_and_threshold_agree() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5).collect();
        let m = BinMapper::fit(&v, 20);
        for &x in &v {
            for b in 0..m.n_bins() as u8 {
                assert_eq!(m.bin(x) <= b, x <= m.threshold(b));
            }
        }
    }

    #[test]
    fn all_missing_column_has_no_bins() {
        let m = BinMapper::fit(&[f64::NAN; 4], 255);
        assert_eq!(m.n_bins(), 0);
        assert_eq!(m.bin(1.0), MISSING_BIN);
    }
}
