use serde::Serialize;

use crate::sampling::LifetimeSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KaplanMeierStep {
    pub n: u64,
    pub survival: f64,
    pub at_risk: u64,
    pub deaths: u64,
}

/// Product-limit survival estimate, one step per distinct failure value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KaplanMeierCurve {
    pub steps: Vec<KaplanMeierStep>,
}

impl KaplanMeierCurve {
    /// Estimated `P[N > n]` (right-continuous step function).
    pub fn survival_at(&self, n: u64) -> f64 {
        match self.steps.partition_point(|s| s.n <= n) {
            0 => 1.0,
            k => self.steps[k - 1].survival,
        }
    }
}

/// Kaplan-Meier estimator. Records censored at `n` remain at risk for
/// failures at `n`.
pub fn kaplan_meier(sample: &LifetimeSample) -> KaplanMeierCurve {
    let mut records: Vec<_> = sample.records().iter().map(|r| (r.value, r.is_failure())).collect();
    records.sort_unstable();
    let mut at_risk = records.len() as u64;
    let mut survival = 1.0;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let n = records[i].0;
        let mut j = i;
        let mut deaths = 0u64;
        while j < records.len() && records[j].0 == n {
            deaths += records[j].1 as u64;
            j += 1;
        }
        if deaths > 0 {
            survival *= 1.0 - deaths as f64 / at_risk as f64;
            steps.push(KaplanMeierStep {
                n,
                survival,
                at_risk,
                deaths,
            });
        }
        at_risk -= (j - i) as u64;
        i = j;
    }
    KaplanMeierCurve { steps }
}
