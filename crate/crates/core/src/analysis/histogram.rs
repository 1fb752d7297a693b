use std::io::Write;

use crate::error::{Result, SalError};

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` equally spaced edges over `[0, s_max]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram of stress values over `[0, s_max]`. The top edge is
/// inclusive.
pub fn stress_histogram(stress: &[f64], s_max: f64, bins: usize) -> Result<Histogram> {
    if stress.is_empty() {
        return Err(SalError::Invalid("stress trace is empty".into()));
    }
    if bins == 0 {
        return Err(SalError::Invalid("bin count must be >= 1".into()));
    }
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(SalError::Invalid(format!("s_max must be > 0, got {s_max}")));
    }
    let mut counts = vec![0usize; bins];
    for &s in stress {
        if !(0.0..=s_max).contains(&s) {
            return Err(SalError::Invalid(format!("stress {s} outside [0, {s_max}]")));
        }
        let idx = ((s / s_max) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let edges = (0..=bins).map(|i| s_max * i as f64 / bins as f64).collect();
    Ok(Histogram { edges, counts })
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# bin_lo,bin_hi,count  (global stress histogram)")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_land_in_first_bin() {
        let h = stress_histogram(&[0.0; 25], 1.0, 10).unwrap();
        assert_eq!(h.counts[0], 25);
        assert_eq!(h.total(), 25);
    }

    #[test]
    fn top_edge_is_inclusive() {
        let h = stress_histogram(&[1.0, 0.999, 0.5], 1.0, 4).unwrap();
        assert_eq!(h.counts, vec![0, 0, 1, 2]);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(stress_histogram(&[1.5], 1.0, 4).is_err());
        assert!(stress_histogram(&[], 1.0, 4).is_err());
    }
}
