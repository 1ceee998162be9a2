//! Per-channel histograms over `[0, 1]` and CDF-based histogram matching.

/// Default number of histogram bins.
pub const BINS: usize = 1024;

/// Normalized histogram of one channel. Values outside `[0, 1]` fall into the
/// end bins.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelHistogram {
    counts: Vec<u64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

impl ChannelHistogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        assert!(bins > 0, "histogram needs at least one bin");
        let mut counts = vec![0u64; bins];
        for &v in values {
            counts[bin_of(v, bins)] += 1;
        }
        let n = values.len().max(1) as f64;
        let pdf: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        // cumulative counts keep the CDF monotone and ending exactly at one
        let mut acc = 0u64;
        let cdf: Vec<f64> = counts
            .iter()
            .map(|c| {
                acc += c;
                acc as f64 / n
            })
            .collect();
        Self { counts, pdf, cdf }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn pdf(&self) -> &[f64] {
        &self.pdf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Number of bins holding any sample.
    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Piecewise-linear CDF at value `v` (mass spread uniformly inside bins).
    pub fn cdf_at(&self, v: f64) -> f64 {
        let l = self.bins();
        let x = (v * l as f64).clamp(0.0, l as f64);
        let b = (x.floor() as usize).min(l - 1);
        let below = if b == 0 { 0.0 } else { self.cdf[b - 1] };
        below + (x - b as f64) * self.pdf[b]
    }

    /// Inverse of [`cdf_at`](Self::cdf_at): smallest value whose CDF reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let l = self.bins();
        let p = p.clamp(0.0, 1.0);
        // first bin whose cumulative mass reaches p
        let b = self.cdf.partition_point(|&c| c < p).min(l - 1);
        let below = if b == 0 { 0.0 } else { self.cdf[b - 1] };
        let frac = if self.pdf[b] > 0.0 {
            ((p - below) / self.pdf[b]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (b as f64 + frac) / l as f64
    }
}

/// Output of [`hist_match`].
#[derive(Clone, Debug, PartialEq)]
pub struct Matched {
    pub values: Vec<f64>,
    /// The source occupied a single bin and was mapped to the target median.
    pub degenerate: bool,
}

/// Maps every source value through its own CDF and the target's inverse CDF.
pub fn hist_match(src: &[f64], target: &ChannelHistogram) -> Matched {
    let source = ChannelHistogram::from_values(src, target.bins());
    if source.occupied() <= 1 {
        let median = target.quantile(0.5);
        return Matched {
            values: vec![median; src.len()],
            degenerate: true,
        };
    }
    Matched {
        values: src.iter().map(|&v| target.quantile(source.cdf_at(v))).collect(),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_sums_to_one_and_cdf_ends_at_one() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).fract()).collect();
        let h = ChannelHistogram::from_values(&v, BINS);
        assert!((h.pdf().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(*h.cdf().last().unwrap(), 1.0);
        assert!(h.cdf().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn out_of_range_values_clamp_into_end_bins() {
        let h = ChannelHistogram::from_values(&[-0.5, 1.5, 1.0], 4);
        assert_eq!(h.counts(), &[1, 0, 0, 2]);
    }

    #[test]
    fn identity_match_within_one_bin() {
        let v: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 5000) as f64 / 5000.0).collect();
        let h = ChannelHistogram::from_values(&v, BINS);
        let m = hist_match(&v, &h);
        for (a, b) in v.iter().zip(&m.values) {
            assert!((a - b).abs() <= 1.0 / BINS as f64);
        }
    }

    #[test]
    fn uniform_shift_by_half() {
        let n = 20000;
        let src: Vec<f64> = (0..n).map(|i| 0.5 * (i as f64 + 0.5) / n as f64).collect();
        let tgt: Vec<f64> = src.iter().map(|v| v + 0.5).collect();
        let m = hist_match(&src, &ChannelHistogram::from_values(&tgt, BINS));
        for (a, b) in src.iter().zip(&m.values) {
            assert!((b - a - 0.5).abs() <= 1.0 / BINS as f64, "{a} -> {b}");
        }
    }

    #[test]
    fn single_bin_source_maps_to_target_median() {
        let tgt: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let h = ChannelHistogram::from_values(&tgt, BINS);
        let m = hist_match(&[0.3; 10], &h);
        assert!(m.degenerate);
        assert!(m.values.iter().all(|&v| (v - h.quantile(0.5)).abs() < 1e-12));
    }
}
