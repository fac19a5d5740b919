//! Metric aggregation: sorted sample series with percentile access and
//! empirical-CDF CSV emission.

use std::io::Write;
use std::path::Path;

/// A named, sorted sample series.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    pub name: String,
    values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>, mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { name: name.into(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nearest-rank percentile, `p` in [0, 100].
    pub fn percentile(&self, p: f64) -> f64 {
        assert!(!self.values.is_empty(), "percentile of empty series");
        let n = self.values.len();
        let rank = ((p / 100.0) * n as f64).ceil() as usize;
        self.values[rank.clamp(1, n) - 1]
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Writes sorted (value, empirical CDF) rows. Series above 10^5 samples are
/// thinned to every 10th row (the last row is always kept).
pub fn emit_cdf(series: &MetricSeries, path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "value,cdf")?;
    let n = series.values.len();
    let stride = if n > 100_000 { 10 } else { 1 };
    for (i, v) in series.values.iter().enumerate() {
        if i % stride == 0 || i == n - 1 {
            writeln!(out, "{},{}", v, (i + 1) as f64 / n as f64)?;
        }
    }
    Ok(())
}

/// Companion gnuplot script for a CDF CSV.
pub fn emit_cdf_plot_script(
    series_names: &[&str],
    xlabel: &str,
    title: &str,
    path: &Path,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "set datafile separator comma")?;
    writeln!(out, "set key bottom right")?;
    writeln!(out, "set xlabel \"{xlabel}\"")?;
    writeln!(out, "set ylabel \"CDF\"")?;
    writeln!(out, "set title \"{title}\"")?;
    writeln!(out, "set grid")?;
    let plots: Vec<String> = series_names
        .iter()
        .map(|n| format!("\"{n}.csv\" using 1:2 with lines title \"{n}\""))
        .collect();
    writeln!(out, "plot {}", plots.join(", \\\n     "))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_series_cdf() {
        let s = MetricSeries::new("x", vec![2.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        emit_cdf(&s, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "value,cdf\n2,1\n");
    }

    #[test]
    fn three_sample_cdf_values() {
        let s = MetricSeries::new("x", vec![3.0, 1.0, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        emit_cdf(&s, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows[0], format!("1,{}", 1.0 / 3.0));
        assert_eq!(rows[1], format!("2,{}", 2.0 / 3.0));
        assert_eq!(rows[2], "3,1");
    }

    #[test]
    fn uniform_samples_match_identity() {
        // Glivenko-Cantelli: the empirical CDF of uniform(0,1) samples
        // stays within 0.01 of the identity for n = 1e5.
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(17, crate::rng::Stream::ErrorDraw, 4, 0, 0);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let s = MetricSeries::new("u", samples);
        let mut worst: f64 = 0.0;
        for (i, v) in s.values().iter().enumerate() {
            let cdf = (i + 1) as f64 / s.len() as f64;
            worst = worst.max((cdf - v).abs());
        }
        assert!(worst < 0.01, "sup deviation {worst}");
    }

    #[test]
    fn percentile_is_monotone() {
        let s = MetricSeries::new("m", (0..1000).map(|i| (i as f64 * 0.37).sin()).collect());
        let mut prev = f64::NEG_INFINITY;
        for p in [1.0, 10.0, 50.0, 90.0, 95.0, 99.0, 100.0] {
            let v = s.percentile(p);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn large_series_thinned() {
        let s = MetricSeries::new("big", (0..200_000).map(|i| i as f64).collect());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.csv");
        emit_cdf(&s, &p).unwrap();
        let n_rows = std::fs::read_to_string(&p).unwrap().lines().count() - 1;
        assert!(n_rows <= 200_000 / 10 + 2);
    }
}
