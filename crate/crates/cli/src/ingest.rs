//! Pixel-intensity histograms binarized at a threshold.

use std::path::Path;

use seqadv::prob::{empirical_distribution, Distribution};
use seqadv::seqtest::fmt_real;

use crate::error::{CliError, CliResult};

/// Pools whitespace-separated intensities in `0..=255` into a two-symbol
/// distribution: symbol 1 for values strictly above `threshold`.
pub fn binarized_histogram(text: &str, threshold: u8, path: &Path) -> CliResult<Distribution> {
    let mut counts = [0u64; 2];
    for (i, token) in text.split_whitespace().enumerate() {
        let v: u8 = token.parse().map_err(|_| CliError::Format {
            path: path.to_path_buf(),
            message: format!("value {} ('{token}') is not an integer in 0..=255", i + 1),
        })?;
        counts[usize::from(v > threshold)] += 1;
    }
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(CliError::EmptyData(path.to_path_buf()));
    }
    Ok(empirical_distribution(&counts, n)?)
}

pub fn ingest_histogram(path: &Path, threshold: u8) -> CliResult<Distribution> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    binarized_histogram(&text, threshold, path)
}

/// `symbol,probability` rows for the intensities 0 and 255.
pub fn histogram_csv(d: &Distribution) -> String {
    format!("symbol,probability\n0,{}\n255,{}\n", fmt_real(d[0]), fmt_real(d[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(text: &str, t: u8) -> CliResult<Distribution> {
        binarized_histogram(text, t, Path::new("mem"))
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(hist("60 40", 50).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(hist("50", 50).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(hist("255\n255\t255", 50).unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn malformed_data() {
        assert!(matches!(hist(" \n ", 50), Err(CliError::EmptyData(_))));
        for bad in ["1 256", "-1", "3.5", "12 x"] {
            let e = hist(bad, 50).unwrap_err();
            assert!(matches!(e, CliError::Format { .. }), "{bad}");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn csv_layout() {
        assert_eq!(histogram_csv(&hist("0 0 0 99", 50).unwrap()), "symbol,probability\n0,0.75\n255,0.25\n");
    }
}
