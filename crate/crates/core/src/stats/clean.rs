use serde::{Deserialize, Serialize};

use super::{mean, HumanResponse, StatsError, Task};

/// Outlier cut-off, in standard deviations above the mean.
pub const OUTLIER_SD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub total: usize,
    pub spoiled: usize,
    pub errors: usize,
    pub outliers: usize,
    /// Mean and sample SD of the times left after the flag exclusions.
    pub mean: f64,
    pub sd: f64,
    /// Times above this were dropped.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedNaming {
    pub kept: Vec<HumanResponse>,
    pub report: ExclusionReport,
}

/// Drops spoiled trials, then error trials, then, in a single pass, trials
/// slower than `mean + 3·SD` of what is left. Fast trials are never
/// dropped. Input order is preserved.
pub fn clean_naming(times: &[HumanResponse]) -> Result<CleanedNaming, StatsError> {
    if times.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some(r) = times.iter().find(|r| r.task != Task::Naming) {
        return Err(StatsError::WrongTask {
            expected: Task::Naming,
            found: r.task,
        });
    }
    let spoiled = times.iter().filter(|r| r.spoiled).count();
    let errors = times.iter().filter(|r| !r.spoiled && r.error).count();
    let flagged_ok: Vec<&HumanResponse> = times.iter().filter(|r| !r.spoiled && !r.error).collect();
    let ms: Vec<f64> = flagged_ok.iter().map(|r| r.naming_ms().expect("validated naming row")).collect();
    let (m, sd) = match ms.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (ms[0], 0.0),
        n => {
            let m = mean(&ms);
            let var = ms.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
            (m, var.sqrt())
        }
    };
    let threshold = m + OUTLIER_SD * sd;
    let kept: Vec<HumanResponse> = flagged_ok
        .into_iter()
        .zip(&ms)
        .filter(|(_, &t)| !(t > threshold))
        .map(|(r, _)| r.clone())
        .collect();
    let outliers = ms.len() - kept.len();
    Ok(CleanedNaming {
        kept,
        report: ExclusionReport {
            total: times.len(),
            spoiled,
            errors,
            outliers,
            mean: m,
            sd,
            threshold,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ObjectType;
    use crate::stats::{ResponseValue, SimpType};

    fn t(ms: f64) -> HumanResponse {
        HumanResponse {
            participant: 0,
            object: "o".into(),
            object_type: ObjectType::Artifact,
            task: Task::Naming,
            simp_type: SimpType::None,
            simp_level: 0,
            value: ResponseValue::NamingMs(ms),
            spoiled: false,
            error: false,
            variant: String::new(),
        }
    }

    #[test]
    fn equal_times_kept() {
        let rows = vec![t(700.0); 20];
        let c = clean_naming(&rows).unwrap();
        assert_eq!(c.kept.len(), 20);
        assert_eq!(c.report.outliers, 0);
    }

    #[test]
    fn long_tail_trial_dropped() {
        let mut rows = vec![t(1000.0); 99];
        rows.push(t(10_000.0));
        let c = clean_naming(&rows).unwrap();
        // mean 1090, sample SD 900, threshold 3790
        assert!((c.report.mean - 1090.0).abs() < 1e-9);
        assert!((c.report.sd - 900.0).abs() < 1e-9);
        assert!((c.report.threshold - 3790.0).abs() < 1e-9);
        assert_eq!(c.kept.len(), 99);
        assert_eq!(c.report.outliers, 1);
    }

    #[test]
    fn fast_trial_retained() {
        let mut rows: Vec<_> = (0..50).map(|i| t(1000.0 + (i % 5) as f64 * 10.0)).collect();
        rows.push(t(10.0));
        let c = clean_naming(&rows).unwrap();
        assert_eq!(c.kept.len(), 51);
    }

    #[test]
    fn flags_and_errors() {
        let mut rows = vec![t(800.0), t(900.0), t(850.0)];
        rows[0].spoiled = true;
        rows[1].error = true;
        let c = clean_naming(&rows).unwrap();
        assert_eq!((c.report.spoiled, c.report.errors, c.kept.len()), (1, 1, 1));
        assert!(clean_naming(&[]).is_err());
        let mut r = t(1.0);
        r.task = Task::Rating;
        assert!(matches!(clean_naming(&[r]), Err(StatsError::WrongTask { .. })));
    }

    #[test]
    fn reapplying_the_cut_removes_nothing() {
        let mut rows: Vec<_> = (0..200).map(|i| t(600.0 + ((i * 37) % 101) as f64 * 4.0)).collect();
        rows.push(t(9000.0));
        rows[5].spoiled = true;
        let c = clean_naming(&rows).unwrap();
        assert!(c.kept.iter().all(|r| !r.spoiled && !r.error && r.naming_ms().unwrap() <= c.report.threshold));
    }
}
