use serde::{Deserialize, Serialize};

use super::buckets::BucketReport;

/// Default critical |z| for a single tested bucket.
pub const DEFAULT_Z_CRIT: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationVerdict {
    pub pass: bool,
    pub z_crit: f64,
    /// Buckets that carried a z-score.
    pub tested_buckets: usize,
    pub failing_buckets: usize,
    /// Tested bucket with the largest |z|.
    pub worst: Option<BucketReport>,
}

/// Fails when any unflagged bucket exceeds `z_crit` in absolute z-score.
pub fn calibration_verdict(reports: &[BucketReport], z_crit: f64) -> CalibrationVerdict {
    let tested: Vec<(&BucketReport, f64)> = reports
        .iter()
        .filter(|r| !r.flagged_low_count)
        .filter_map(|r| r.z_score.map(|z| (r, z.abs())))
        .collect();
    let failing_buckets = tested.iter().filter(|(_, z)| *z > z_crit).count();
    let worst = tested
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, _)| (*r).clone());
    CalibrationVerdict {
        pass: failing_buckets == 0,
        z_crit,
        tested_buckets: tested.len(),
        failing_buckets,
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bucket(lo: f64, z: Option<f64>, flagged: bool) -> BucketReport {
        BucketReport {
            lo,
            hi: lo + 1.0,
            count: 100,
            mean_prediction: Some(lo + 0.5),
            mean_outcome: Some(lo + 0.5),
            outcome_stderr: 0.1,
            z_score: z,
            flagged_low_count: flagged,
        }
    }

    #[test]
    fn small_z_passes() {
        let reports = [
            bucket(0.0, Some(0.5), false),
            bucket(1.0, Some(-1.0), false),
        ];
        let v = calibration_verdict(&reports, DEFAULT_Z_CRIT);
        assert!(v.pass);
        assert_eq!(v.tested_buckets, 2);
        assert_eq!(v.worst.unwrap().lo, 1.0);
    }

    #[test]
    fn one_large_z_fails_and_is_reported() {
        let reports = [
            bucket(0.0, Some(0.5), false),
            bucket(1.0, Some(6.0), false),
            bucket(2.0, None, true),
        ];
        let v = calibration_verdict(&reports, DEFAULT_Z_CRIT);
        assert!(!v.pass);
        assert_eq!(v.failing_buckets, 1);
        assert_eq!(v.worst.unwrap().z_score, Some(6.0));
    }

    #[test]
    fn flagged_buckets_are_ignored() {
        let v = calibration_verdict(&[bucket(0.0, Some(9.0), true)], DEFAULT_Z_CRIT);
        assert!(v.pass);
        assert_eq!(v.tested_buckets, 0);
        assert!(v.worst.is_none());
    }
}
