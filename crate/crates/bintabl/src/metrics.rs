//! Confusion-matrix metrics and the multi-run evaluation report.
//!
//! Per class k: precision = TP/(TP+FP), recall = TP/(TP+FN), F1 their
//! harmonic mean, all with the 0/0 → 0 convention. The headline numbers
//! are macro averages (unweighted mean over the 3 classes) in percent;
//! support-weighted averages are available behind a switch. Across runs,
//! the median is taken per metric independently.

use crate::error::{Error, Result};

/// confusion[actual][predicted].
pub type Confusion = [[u64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    Macro,
    Weighted,
}

impl std::fmt::Display for Averaging {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Averaging::Macro => write!(f, "macro"),
            Averaging::Weighted => write!(f, "weighted"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub confusion: Confusion,
    /// Percent.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub averaging: Averaging,
    pub runs: Vec<RunMetrics>,
    pub median: SummaryMetrics,
}

pub fn compute_metrics(confusion: &Confusion) -> RunMetrics {
    compute_metrics_avg(confusion, Averaging::Macro)
}

pub fn compute_metrics_avg(confusion: &Confusion, averaging: Averaging) -> RunMetrics {
    let mut precision = [0.0f64; 3];
    let mut recall = [0.0f64; 3];
    let mut f1 = [0.0f64; 3];
    let mut support = [0u64; 3];
    let mut total = 0u64;
    let mut correct = 0u64;
    for k in 0..3 {
        let tp = confusion[k][k];
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (i, row) in confusion.iter().enumerate() {
            if i != k {
                fp += row[k];
                fn_ += confusion[k][i];
            }
            total += confusion[k][i];
            support[k] += confusion[k][i];
        }
        correct += tp;
        precision[k] = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        recall[k] = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        f1[k] = if precision[k] + recall[k] > 0.0 {
            2.0 * precision[k] * recall[k] / (precision[k] + recall[k])
        } else {
            0.0
        };
    }
    let avg = |values: &[f64; 3]| -> f64 {
        match averaging {
            Averaging::Macro => (values[0] + values[1] + values[2]) / 3.0,
            Averaging::Weighted => {
                if total == 0 {
                    0.0
                } else {
                    (values[0] * support[0] as f64
                        + values[1] * support[1] as f64
                        + values[2] * support[2] as f64)
                        / total as f64
                }
            }
        }
    };
    let accuracy = if total > 0 {
        correct as f64 / total as f64
    } else {
        0.0
    };
    RunMetrics {
        confusion: *confusion,
        accuracy: 100.0 * accuracy,
        precision: 100.0 * avg(&precision),
        recall: 100.0 * avg(&recall),
        f1: 100.0 * avg(&f1),
    }
}

/// Median with the usual midpoint rule for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

impl EvalReport {
    pub fn from_runs(runs: Vec<RunMetrics>, averaging: Averaging) -> Self {
        assert!(!runs.is_empty(), "report needs at least one run");
        let collect = |f: fn(&RunMetrics) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        let median = SummaryMetrics {
            accuracy: median(&collect(|r| r.accuracy)),
            precision: median(&collect(|r| r.precision)),
            recall: median(&collect(|r| r.recall)),
            f1: median(&collect(|r| r.f1)),
        };
        EvalReport {
            averaging,
            runs,
            median,
        }
    }

    /// Index of the run whose F1 sits closest to the median F1 (earliest
    /// on ties) — the run worth checkpointing.
    pub fn median_run_index(&self) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, r) in self.runs.iter().enumerate() {
            let dist = (r.f1 - self.median.f1).abs();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    }

    /// Line-delimited key-value records. f64 values render in the shortest
    /// form that parses back to the same bits, so the encoding is lossless.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        out.push_str("report bintabl.eval.v1\n");
        out.push_str(&format!("averaging {}\n", self.averaging));
        out.push_str(&format!("runs {}\n", self.runs.len()));
        for (i, r) in self.runs.iter().enumerate() {
            let flat: Vec<String> = r
                .confusion
                .iter()
                .flatten()
                .map(|v| v.to_string())
                .collect();
            out.push_str(&format!("run.{i}.confusion {}\n", flat.join(" ")));
            out.push_str(&format!("run.{i}.accuracy {}\n", r.accuracy));
            out.push_str(&format!("run.{i}.precision {}\n", r.precision));
            out.push_str(&format!("run.{i}.recall {}\n", r.recall));
            out.push_str(&format!("run.{i}.f1 {}\n", r.f1));
        }
        out.push_str(&format!("median.accuracy {}\n", self.median.accuracy));
        out.push_str(&format!("median.precision {}\n", self.median.precision));
        out.push_str(&format!("median.recall {}\n", self.median.recall));
        out.push_str(&format!("median.f1 {}\n", self.median.f1));
        out
    }

    pub fn parse(text: &str) -> Result<EvalReport> {
        let mut fields = std::collections::BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(' ').ok_or_else(|| {
                Error::Format {
                    path: "<report>".to_string(),
                    what: format!("record without a value: {line:?}"),
                }
            })?;
            fields.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| -> Result<&String> {
            fields.get(key).ok_or_else(|| Error::Format {
                path: "<report>".to_string(),
                what: format!("missing record {key:?}"),
            })
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|_| Error::Format {
                path: "<report>".to_string(),
                what: format!("record {key:?} is not a number"),
            })
        };
        if get("report")? != "bintabl.eval.v1" {
            return Err(Error::Format {
                path: "<report>".to_string(),
                what: "unknown report version".to_string(),
            });
        }
        let averaging = match get("averaging")?.as_str() {
            "macro" => Averaging::Macro,
            "weighted" => Averaging::Weighted,
            other => {
                return Err(Error::Format {
                    path: "<report>".to_string(),
                    what: format!("unknown averaging {other:?}"),
                })
            }
        };
        let n: usize = get("runs")?.parse().map_err(|_| Error::Format {
            path: "<report>".to_string(),
            what: "runs is not a count".to_string(),
        })?;
        let mut runs = Vec::with_capacity(n);
        for i in 0..n {
            let conf_text = get(&format!("run.{i}.confusion"))?;
            let cells: Vec<u64> = conf_text
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format {
                    path: "<report>".to_string(),
                    what: format!("run {i} confusion is not 9 integers"),
                })?;
            if cells.len() != 9 {
                return Err(Error::Format {
                    path: "<report>".to_string(),
                    what: format!("run {i} confusion has {} cells", cells.len()),
                });
            }
            let mut confusion = [[0u64; 3]; 3];
            for (idx, &v) in cells.iter().enumerate() {
                confusion[idx / 3][idx % 3] = v;
            }
            runs.push(RunMetrics {
                confusion,
                accuracy: parse_f64(&format!("run.{i}.accuracy"))?,
                precision: parse_f64(&format!("run.{i}.precision"))?,
                recall: parse_f64(&format!("run.{i}.recall"))?,
                f1: parse_f64(&format!("run.{i}.f1"))?,
            });
        }
        let median = SummaryMetrics {
            accuracy: parse_f64("median.accuracy")?,
            precision: parse_f64("median.precision")?,
            recall: parse_f64("median.recall")?,
            f1: parse_f64("median.f1")?,
        };
        Ok(EvalReport {
            averaging,
            runs,
            median,
        })
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("run   accuracy%  precision%  recall%    f1%\n");
        for (i, r) in self.runs.iter().enumerate() {
            out.push_str(&format!(
                "{:<5} {:>9.2} {:>11.2} {:>8.2} {:>8.2}\n",
                i, r.accuracy, r.precision, r.recall, r.f1
            ));
        }
        out.push_str(&format!(
            "med   {:>9.2} {:>11.2} {:>8.2} {:>8.2}\n",
            self.median.accuracy, self.median.precision, self.median.recall, self.median.f1
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_diagonal_is_all_hundred() {
        let m = compute_metrics(&[[5, 0, 0], [0, 7, 0], [0, 0, 9]]);
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.precision, 100.0);
        assert_eq!(m.recall, 100.0);
        assert_eq!(m.f1, 100.0);
    }

    #[test]
    fn hand_computed_degenerate_case() {
        // Class 1 never predicted correctly, class 2 precision 50%.
        let m = compute_metrics(&[[5, 0, 0], [0, 0, 5], [0, 0, 5]]);
        let want_f1 = (100.0 + 0.0 + 200.0 / 3.0) / 3.0;
        assert!((m.f1 - want_f1).abs() < 1e-9, "{} vs {want_f1}", m.f1);
        assert!((m.accuracy - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_predicted_class_has_zero_precision() {
        // Nothing is ever predicted as class 0.
        let m = compute_metrics(&[[0, 3, 0], [0, 3, 0], [0, 0, 3]]);
        assert!(m.precision.is_finite());
        assert!(m.f1.is_finite());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0, 5.0, 4.0]), 3.0);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn medians_are_per_metric_independent() {
        let mk = |acc: f64, f1: f64| RunMetrics {
            confusion: [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            accuracy: acc,
            precision: 0.0,
            recall: 0.0,
            f1,
        };
        // Median accuracy comes from run 1, median f1 from run 2.
        let report =
            EvalReport::from_runs(vec![mk(10.0, 9.0), mk(20.0, 1.0), mk(30.0, 5.0)], Averaging::Macro);
        assert_eq!(report.median.accuracy, 20.0);
        assert_eq!(report.median.f1, 5.0);
        assert_eq!(report.median_run_index(), 2);
    }

    #[test]
    fn records_round_trip_losslessly() {
        let runs = vec![
            compute_metrics(&[[50, 3, 2], [8, 40, 7], [1, 2, 60]]),
            compute_metrics(&[[33, 13, 2], [9, 41, 17], [11, 2, 6]]),
        ];
        let report = EvalReport::from_runs(runs, Averaging::Macro);
        let text = report.to_records();
        let parsed = EvalReport::parse(&text).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(parsed.to_records(), text);
    }

    #[test]
    fn weighted_averaging_uses_support() {
        // Majority class 0 dominates the weighted precision: per-class
        // precisions are [1, 1/3, 1] with supports [100, 5, 5].
        let confusion = [[90, 10, 0], [0, 5, 0], [0, 0, 5]];
        let macro_m = compute_metrics_avg(&confusion, Averaging::Macro);
        let weighted = compute_metrics_avg(&confusion, Averaging::Weighted);
        let want = 100.0 * (100.0 + 5.0 / 3.0 + 5.0) / 110.0;
        assert!((weighted.precision - want).abs() < 1e-9);
        assert!(weighted.precision > macro_m.precision);
    }
}
