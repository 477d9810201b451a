use rayon::prelude::*;

use super::binning::{BinnedData, MISSING_BIN};

/// Slots per feature histogram: value bins use `0..n_bins`, missing uses 255.
pub(crate) const SLOTS: usize = 256;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradPair {
    pub g: f64,
    pub h: f64,
}

impl std::ops::AddAssign for GradPair {
    fn add_assign(&mut self, o: GradPair) {
        self.g += o.g;
        self.h += o.h;
    }
}

impl std::ops::Sub for GradPair {
    type Output = GradPair;
    fn sub(self, o: GradPair) -> GradPair {
        GradPair {
            g: self.g - o.g,
            h: self.h - o.h,
        }
    }
}

/// Logistic-loss gradient and hessian with respect to the raw score.
#[inline]
pub fn logistic_grad_hess(label: f64, raw: f64, weight: f64) -> (f64, f64) {
    let p = sigmoid(raw);
    (weight * (p - label), weight * p * (1.0 - p))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted logistic loss of one row at raw score `raw`.
#[inline]
pub fn logloss(label: f64, raw: f64, weight: f64) -> f64 {
    // log(1 + e^raw) - label * raw, computed stably
    let softplus = if raw > 0.0 {
        raw + (-raw).exp().ln_1p()
    } else {
        raw.exp().ln_1p()
    };
    weight * (softplus - label * raw)
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Loss reduction of splitting a node with sums (g, h) into (gl, hl) / rest.
#[inline]
pub fn split_gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64) -> f64 {
    0.5 * (score(gl, hl, lambda) + score(g - gl, h - hl, lambda) - score(g, h, lambda))
}

/// Newton step for a leaf.
#[inline]
pub fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    /// Index into the feature list of the binned data.
    pub feature: usize,
    /// Rows with bin `<= bin` go left.
    pub bin: u8,
    pub default_left: bool,
    pub gain: f64,
    pub left: GradPair,
    pub right: GradPair,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitConfig {
    pub lambda: f64,
    pub min_child_weight: f64,
}

/// Flat histogram: `SLOTS` gradient pairs per feature in `features` order.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub slots: Vec<GradPair>,
}

impl Histogram {
    pub fn zeros(n_features: usize) -> Self {
        Histogram {
            slots: vec![GradPair::default(); n_features * SLOTS],
        }
    }

    pub fn feature(&self, k: usize) -> &[GradPair] {
        &self.slots[k * SLOTS..(k + 1) * SLOTS]
    }

    /// Accumulate `rows` of every listed feature. Each feature fills its own
    /// slice, so the result does not depend on the worker count.
    pub fn build(
        data: &BinnedData,
        features: &[usize],
        rows: &[u32],
        grad: &[f64],
        hess: &[f64],
    ) -> Self {
        let mut hist = Histogram::zeros(features.len());
        // gather gradients once so the per-feature loops read contiguously
        let (og, oh): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .map(|&r| (grad[r as usize], hess[r as usize]))
            .unzip();
        let fill = |(k, out): (usize, &mut [GradPair])| {
            let col = &data.bins[features[k]];
            for (i, &r) in rows.iter().enumerate() {
                let slot = &mut out[col[r as usize] as usize];
                slot.g += og[i];
                slot.h += oh[i];
            }
        };
        if rows.len() * features.len() >= 32_768 {
            hist.slots.par_chunks_mut(SLOTS).enumerate().for_each(fill);
        } else {
            hist.slots.chunks_mut(SLOTS).enumerate().for_each(fill);
        }
        hist
    }

    /// `self - other`, slot-wise.
    pub fn subtract(&self, other: &Histogram) -> Histogram {
        Histogram {
            slots: self
                .slots
                .iter()
                .zip(&other.slots)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn totals(&self) -> GradPair {
        let mut t = GradPair::default();
        if !self.slots.is_empty() {
            for s in self.feature(0) {
                t += *s;
            }
        }
        t
    }
}

/// Best split over all listed features of one node histogram. Features are
/// scanned in order, bins ascending, missing-right before missing-left; a
/// later candidate replaces the incumbent only on strictly larger gain.
pub fn best_split(
    data: &BinnedData,
    features: &[usize],
    hist: &Histogram,
    total: GradPair,
    cfg: SplitConfig,
) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    for (k, &f) in features.iter().enumerate() {
        let nb = data.mappers[f].n_bins();
        if nb == 0 {
            continue;
        }
        let h = hist.feature(k);
        let miss = h[MISSING_BIN as usize];
        let directions: &[bool] = if miss.h > 0.0 || miss.g != 0.0 {
            &[false, true]
        } else {
            &[false]
        };
        for &default_left in directions {
            let mut left = if default_left {
                miss
            } else {
                GradPair::default()
            };
            for (b, slot) in h.iter().enumerate().take(nb) {
                left += *slot;
                let right = total - left;
                if left.h < cfg.min_child_weight || right.h < cfg.min_child_weight {
                    continue;
                }
                let gain = split_gain(left.g, left.h, total.g, total.h, cfg.lambda);
                if gain > best.map_or(0.0, |c| c.gain) {
                    best = Some(SplitCandidate {
                        feature: f,
                        bin: b as u8,
                        default_left,
                        gain,
                        left,
                        right,
                    });
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_finite_differences() {
        let eps = 1e-4;
        for &(y, raw, w) in &[
            (0.0, 0.3, 1.0),
            (1.0, -2.0, 2.5),
            (1.0, 4.0, 0.1),
            (0.0, -0.7, 7.0),
        ] {
            let (g, h) = logistic_grad_hess(y, raw, w);
            let fd_g = (logloss(y, raw + eps, w) - logloss(y, raw - eps, w)) / (2.0 * eps);
            let fd_h = (logloss(y, raw + eps, w) - 2.0 * logloss(y, raw, w)
                + logloss(y, raw - eps, w))
                / (eps * eps);
            assert!((g - fd_g).abs() <= 1e-6 * g.abs(), "g {g} vs {fd_g}");
            assert!((h - fd_h).abs() <= 1e-6 * h.abs(), "h {h} vs {fd_h}");
        }
    }

    #[test]
    fn gain_of_pure_split_is_positive() {
        // two rows with opposite gradients separate perfectly
        let gain = split_gain(-1.0, 0.25, 0.0, 0.5, 1.0);
        assert!(gain > 0.0);
        assert!((gain - 0.5 * (1.0 / 1.25 + 1.0 / 1.25)).abs() < 1e-15);
    }
}
