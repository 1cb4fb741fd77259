//! Aggregate metrics over the runs of one method.

use serde::Serialize;

use crate::study::{Archive, Method, Regime, RunRecord, EQUILIBRIUM_TOLERANCE};

/// Entries are `None` where a metric is undefined: no reference results,
/// too few runs, or a zero true value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub method: String,
    pub runs: usize,
    pub diverged: usize,
    /// Completed runs whose noise variances were still moving at the end.
    pub unsettled: usize,
    pub clamp_events: usize,
    /// Per parameter: mean estimate over the true value.
    pub theta_ratio: Vec<Option<f64>>,
    /// Per parameter: mean of `√CRB / √P_Θ`.
    pub crb_ratio: Vec<Option<f64>>,
    /// Per parameter: across-run spread over mean reported deviation.
    pub consistency_ekf: Vec<Option<f64>>,
    pub consistency_nr: Vec<Option<f64>>,
    /// Per parameter, percent.
    pub spread_ekf: Vec<Option<f64>>,
    pub spread_nr: Vec<Option<f64>>,
    /// Per state: mean of `√bound / √P_x` at the last sample.
    pub pcrb_ratio: Vec<Option<f64>>,
    pub r_ratio_true: Vec<Option<f64>>,
    /// Per channel: mean of the tuned `R` over the output-error `R`.
    pub r_ratio_nr: Vec<Option<f64>>,
    pub q_ratio: Vec<Option<f64>>,
    /// `J1..=J8`.
    pub cost_mean: Vec<Option<f64>>,
    pub cost_std: Vec<Option<f64>>,
    /// Share of runs whose smoothed residues pass the whiteness band at 90%
    /// of lags.
    pub whiteness: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0)
        .then(|| sum / count as f64)
        .filter(|v| v.is_finite())
}

/// Standard deviation with `1/S` normalisation; needs two values.
fn spread(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mu = mean(values.iter().copied())?;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt())
}

fn ratio(num: Option<f64>, den: f64) -> Option<f64> {
    num.filter(|_| den != 0.0).map(|v| v / den)
}

/// Pairs of (estimate, variance) for parameter `i`.
fn consistency(pairs: &[(f64, f64)]) -> Option<f64> {
    let estimates: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sigma = spread(&estimates)?;
    let avg = mean(pairs.iter().map(|p| p.1.sqrt()))?;
    ratio(Some(sigma), avg)
}

fn spread_factor(truth: f64, pairs: &[(f64, f64)]) -> Option<f64> {
    let m = mean(
        pairs
            .iter()
            .map(|(est, var)| ((truth - est).powi(2) + var).sqrt()),
    )?;
    ratio(Some(m * 100.0), truth.abs())
}

pub fn compute_metrics(archive: &Archive, method: Method) -> MetricsTable {
    let all: Vec<&RunRecord> = archive
        .records
        .iter()
        .filter(|r| r.method == method)
        .collect();
    let ok: Vec<&RunRecord> = all
        .iter()
        .copied()
        .filter(|r| r.diverged.is_none())
        .collect();
    let with_nr: Vec<(&RunRecord, &crate::study::NrRecord)> = ok
        .iter()
        .filter_map(|r| r.nr.as_ref().map(|nr| (*r, nr)))
        .collect();
    let p = archive.theta_true.len();

    let ekf_pairs =
        |i: usize| -> Vec<(f64, f64)> { ok.iter().map(|r| (r.theta[i], r.p_theta[i])).collect() };
    let nr_pairs = |i: usize| -> Vec<(f64, f64)> {
        with_nr
            .iter()
            .map(|(_, nr)| (nr.theta[i], nr.crb[i]))
            .collect()
    };

    let theta_ratio = (0..p)
        .map(|i| ratio(mean(ok.iter().map(|r| r.theta[i])), archive.theta_true[i]))
        .collect();
    let crb_ratio = (0..p)
        .map(|i| {
            mean(
                with_nr
                    .iter()
                    .map(|(r, nr)| nr.crb[i].sqrt() / r.p_theta[i].sqrt()),
            )
        })
        .collect();
    let consistency_ekf = (0..p).map(|i| consistency(&ekf_pairs(i))).collect();
    let consistency_nr = (0..p).map(|i| consistency(&nr_pairs(i))).collect();
    let spread_ekf = (0..p)
        .map(|i| spread_factor(archive.theta_true[i], &ekf_pairs(i)))
        .collect();
    let spread_nr = (0..p)
        .map(|i| spread_factor(archive.theta_true[i], &nr_pairs(i)))
        .collect();

    let pcrb_ratio = (0..archive.n())
        .map(|j| {
            let bound = archive.pcrb.as_ref()?[j];
            mean(ok.iter().map(|r| bound.sqrt() / r.p_state[j].sqrt()))
        })
        .collect();
    let r_ratio_true = (0..archive.m())
        .map(|c| ratio(mean(ok.iter().map(|r| r.r_hat[c])), archive.r_true[c]))
        .collect();
    let r_ratio_nr = (0..archive.m())
        .map(|c| mean(with_nr.iter().map(|(r, nr)| r.r_hat[c] / nr.r_hat[c])))
        .collect();
    let q_ratio = (0..archive.n())
        .map(|j| match archive.regime {
            Regime::Zero => None,
            Regime::Positive => ratio(mean(ok.iter().map(|r| r.q_hat[j])), archive.q_true[j]),
        })
        .collect();

    let cost_values = |idx: usize| -> Vec<f64> {
        ok.iter()
            .filter_map(|r| r.costs.get(idx).copied().flatten())
            .collect()
    };
    let cost_mean = (1..=8).map(|i| mean(cost_values(i))).collect();
    let cost_std = (1..=8).map(|i| spread(&cost_values(i))).collect();
    let whiteness =
        mean(
            ok.iter()
                .filter_map(|r| r.whiteness)
                .map(|w| if w >= 0.9 { 1.0 } else { 0.0 }),
        );

    MetricsTable {
        method: method.name().to_string(),
        runs: all.len(),
        diverged: all.len() - ok.len(),
        unsettled: ok
            .iter()
            .filter(|r| {
                r.drift
                    .is_some_and(|d| d.is_nan() || d > EQUILIBRIUM_TOLERANCE)
            })
            .count(),
        clamp_events: all.iter().map(|r| r.clamp_events).sum(),
        theta_ratio,
        crb_ratio,
        consistency_ekf,
        consistency_nr,
        spread_ekf,
        spread_nr,
        pcrb_ratio,
        r_ratio_true,
        r_ratio_nr,
        q_ratio,
        cost_mean,
        cost_std,
        whiteness,
    }
}
