//! Pass/fail checks embedded in scenario files.

use std::fmt;

use crate::analysis::rmse;
use crate::config::{AssertionSpec, Metric};
use crate::log::RunLog;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionResult {
    pub name: String,
    /// Metric value, one per window.
    pub values: Vec<f64>,
    pub below: Option<f64>,
    pub above: Option<f64>,
    pub passed: bool,
}

impl fmt::Display for AssertionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let values: Vec<String> = self.values.iter().map(|v| format!("{v:.5}")).collect();
        write!(f, "{verdict} {}: [{}]", self.name, values.join(", "))?;
        if let Some(b) = self.below {
            write!(f, " < {b}")?;
        }
        if let Some(a) = self.above {
            write!(f, " > {a}")?;
        }
        Ok(())
    }
}

/// Metric over a set of rows.
pub fn metric(log: &RunLog, metric: Metric, column: &str, reference: Option<&str>) -> Result<f64, HarnessError> {
    let x = log.require(column)?;
    if x.is_empty() {
        return Err(HarnessError::Log(format!("no samples for `{column}`")));
    }
    let n = x.len() as f64;
    Ok(match metric {
        Metric::MaxAbs => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        Metric::Max => x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Metric::Min => x.iter().cloned().fold(f64::INFINITY, f64::min),
        Metric::Mean => x.iter().sum::<f64>() / n,
        Metric::Rmse => {
            let r = log.require(reference.ok_or_else(|| HarnessError::Config("rmse needs a reference".into()))?)?;
            rmse(&x, &r)?
        }
        Metric::LongestRun => {
            let t = log.require("time_s")?;
            let dt = if t.len() > 1 { t[1] - t[0] } else { 0.0 };
            let (mut best, mut run) = (0usize, 0usize);
            for v in &x {
                run = if *v != 0.0 { run + 1 } else { 0 };
                best = best.max(run);
            }
            best as f64 * dt
        }
        Metric::FractionPositive => x.iter().filter(|v| **v > 0.0).count() as f64 / n,
        Metric::Change => x[x.len() - 1] - x[0],
        Metric::Rate => {
            let t = log.require("time_s")?;
            let span = t[t.len() - 1] - t[0];
            if span > 0.0 {
                (x[x.len() - 1] - x[0]) / span
            } else {
                0.0
            }
        }
    })
}

pub fn evaluate(spec: &AssertionSpec, log: &RunLog) -> Result<AssertionResult, HarnessError> {
    let windows = if spec.windows.is_empty() { vec![[f64::NEG_INFINITY, f64::INFINITY]] } else { spec.windows.clone() };
    let mut values = Vec::with_capacity(windows.len());
    for [from, to] in windows {
        values.push(metric(&log.window(from, to), spec.metric, &spec.column, spec.reference.as_deref())?);
    }
    let passed = values
        .iter()
        .all(|v| v.is_finite() && spec.below.is_none_or(|b| *v < b) && spec.above.is_none_or(|a| *v > a));
    Ok(AssertionResult { name: spec.name.clone(), values, below: spec.below, above: spec.above, passed })
}

/// Evaluates every assertion; a failure to evaluate counts as a failed check.
pub fn evaluate_all(specs: &[AssertionSpec], log: &RunLog) -> Vec<AssertionResult> {
    specs
        .iter()
        .map(|s| {
            evaluate(s, log).unwrap_or_else(|_| AssertionResult {
                name: s.name.clone(),
                values: vec![f64::NAN],
                below: s.below,
                above: s.above,
                passed: false,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log() -> RunLog {
        RunLog {
            columns: vec!["time_s".into(), "a".into(), "b".into()],
            rows: (0..10).map(|i| vec![i as f64 * 0.5, if (3..7).contains(&i) { 1.0 } else { 0.0 }, -(i as f64)]).collect(),
        }
    }

    fn spec(metric: Metric, column: &str) -> AssertionSpec {
        AssertionSpec {
            name: "t".into(),
            metric,
            column: column.into(),
            reference: None,
            windows: Vec::new(),
            below: None,
            above: None,
        }
    }

    #[test]
    fn metrics() {
        let l = log();
        assert_eq!(metric(&l, Metric::MaxAbs, "b", None).unwrap(), 9.0);
        assert_eq!(metric(&l, Metric::Min, "b", None).unwrap(), -9.0);
        assert_eq!(metric(&l, Metric::LongestRun, "a", None).unwrap(), 2.0);
        assert_eq!(metric(&l, Metric::FractionPositive, "a", None).unwrap(), 0.4);
        assert_eq!(metric(&l, Metric::Rate, "b", None).unwrap(), -2.0);
        assert_eq!(metric(&l, Metric::Rmse, "a", Some("a")).unwrap(), 0.0);
    }

    #[test]
    fn windows_and_bounds() {
        let l = log();
        let mut s = spec(Metric::MaxAbs, "b");
        s.windows = vec![[0.0, 1.0], [2.0, 3.0]];
        s.below = Some(5.0);
        let r = evaluate(&s, &l).unwrap();
        assert_eq!(r.values, vec![2.0, 6.0]);
        assert!(!r.passed);
        s.below = Some(7.0);
        assert!(evaluate(&s, &l).unwrap().passed);
        let missing = evaluate_all(&[spec(Metric::Max, "nope")], &l);
        assert!(!missing[0].passed);
    }
}
