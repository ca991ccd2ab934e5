use super::design::McDesign;
use super::output::SCHEMA_VERSION;
use super::run::RepRecord;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub median: f64,
    /// Divisor R.
    pub std: f64,
    pub rmse: f64,
    pub mean_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BindingRow {
    pub label: String,
    pub binding_pct: f64,
    pub func_violation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub n: usize,
    pub boundary_pct: f64,
    pub params: Vec<ParamSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTestSummary {
    pub n: usize,
    pub rejection_rate_5pct: f64,
    pub mean_xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub schema_version: u32,
    pub design: String,
    pub t: usize,
    pub reps: usize,
    pub h: usize,
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub failed: usize,
    pub valid: bool,
    pub wall_seconds: f64,
    pub bindings: Vec<BindingRow>,
    pub estimators: Vec<EstimatorSummary>,
    pub score_test: Option<ScoreTestSummary>,
}

impl McSummary {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.name == name)
    }

    pub fn binding(&self, label: &str) -> Option<&BindingRow> {
        self.bindings.iter().find(|b| b.label == label)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median, STD (divisor R), RMSE about the truth and mean bias, per coordinate.
pub fn summarize_params(samples: &[Vec<f64>], truth: &[f64], names: &[String]) -> Vec<ParamSummary> {
    let n = samples.len() as f64;
    (0..truth.len())
        .map(|i| {
            let mut col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let std = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            let rmse = (col.iter().map(|x| (x - truth[i]).powi(2)).sum::<f64>() / n).sqrt();
            ParamSummary {
                name: names.get(i).cloned().unwrap_or_else(|| format!("theta{}", i + 1)),
                truth: truth[i],
                median: median(&mut col),
                std,
                rmse,
                mean_bias: mean - truth[i],
            }
        })
        .collect()
}

pub fn summarize(design: &McDesign, records: &[RepRecord], labels: &[String], names: &[String]) -> McSummary {
    let ok: Vec<&RepRecord> = records.iter().filter(|r| r.ok()).collect();
    let n = ok.len().max(1) as f64;
    let bindings = labels
        .iter()
        .enumerate()
        .map(|(j, label)| BindingRow {
            label: label.clone(),
            binding_pct: 100.0 * ok.iter().filter(|r| r.binding.get(j) == Some(&true)).count() as f64 / n,
            func_violation_pct: 100.0 * ok.iter().filter(|r| r.func_violation.get(j) == Some(&true)).count() as f64 / n,
        })
        .collect();
    let mut est_names: Vec<String> = Vec::new();
    for r in &ok {
        for e in &r.estimates {
            if !est_names.contains(&e.name) {
                est_names.push(e.name.clone());
            }
        }
    }
    let estimators = est_names
        .iter()
        .map(|name| {
            let hits: Vec<_> = ok.iter().filter_map(|r| r.estimates.iter().find(|e| &e.name == name)).collect();
            let samples: Vec<Vec<f64>> = hits.iter().map(|e| e.theta.clone()).collect();
            EstimatorSummary {
                name: name.clone(),
                n: hits.len(),
                boundary_pct: 100.0 * hits.iter().filter(|e| e.on_boundary).count() as f64 / hits.len().max(1) as f64,
                params: if samples.is_empty() { vec![] } else { summarize_params(&samples, &design.theta0, names) },
            }
        })
        .collect();
    let tests: Vec<_> = ok.iter().filter_map(|r| r.score_test).collect();
    let score_test = (!tests.is_empty()).then(|| ScoreTestSummary {
        n: tests.len(),
        rejection_rate_5pct: tests.iter().filter(|s| s.p_value < 0.05).count() as f64 / tests.len() as f64,
        mean_xi: tests.iter().map(|s| s.xi).sum::<f64>() / tests.len() as f64,
    });
    McSummary {
        schema_version: SCHEMA_VERSION,
        design: design.name.clone(),
        t: design.t,
        reps: design.reps,
        h: design.h,
        seed: design.seed,
        theta0: design.theta0.clone(),
        failed: records.len() - ok.len(),
        valid: (records.len() - ok.len()) as f64 <= super::MAX_FAILURE_FRACTION * records.len() as f64,
        wall_seconds: 0.0,
        bindings,
        estimators,
        score_test,
    }
}
