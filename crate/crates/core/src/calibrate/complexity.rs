use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::event::Event;
use crate::fuzzer::{execute_on, Flag, FuzzReport};
use crate::testbed::{Controller, ServiceRegistry};

use super::CalibrateError;

/// Residuals closer than this count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityClass {
    Constant,
    Linear,
    Exponential,
}

impl ComplexityClass {
    pub const ALL: [ComplexityClass; 3] = [
        ComplexityClass::Constant,
        ComplexityClass::Linear,
        ComplexityClass::Exponential,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComplexityClass::Constant => "constant",
            ComplexityClass::Linear => "linear",
            ComplexityClass::Exponential => "exponential",
        }
    }
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub length: usize,
    pub path_length: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    /// Intercept and slope; for the exponential model these are in log space.
    pub a: f64,
    pub b: f64,
    /// Root-mean-square error divided by the mean measurement (at least 1).
    pub residual: f64,
    /// `1 / (1 + residual)`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityVerdict {
    pub class: ComplexityClass,
    /// Models that could be fitted; the exponential model needs positive
    /// measurements and a positive growth rate.
    pub fits: BTreeMap<ComplexityClass, ModelFit>,
    pub measurements: Vec<Measurement>,
}

impl ComplexityVerdict {
    pub fn residual(&self) -> f64 {
        self.fits[&self.class].residual
    }

    pub fn fit_scores(&self) -> BTreeMap<ComplexityClass, f64> {
        self.fits.iter().map(|(&c, f)| (c, f.score)).collect()
    }

    /// Measurements as `length,path_length` rows with a header.
    pub fn measurements_csv(&self) -> String {
        let mut out = String::from("length,path_length\n");
        for m in &self.measurements {
            out.push_str(&format!("{},{}\n", m.length, m.path_length));
        }
        out
    }
}

/// `⌈N/4⌉, ⌈N/2⌉, ⌈3N/4⌉, N`, deduplicated.
pub fn default_probe_lengths(n: usize) -> Vec<usize> {
    let mut lengths: Vec<usize> = [n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n]
        .into_iter()
        .filter(|&l| l >= 1)
        .collect();
    lengths.dedup();
    lengths
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (my - b * mx, b)
}

fn fit(a: f64, b: f64, ys: &[f64], predict: impl Fn(usize) -> f64) -> ModelFit {
    let n = ys.len() as f64;
    let rmse = (ys
        .iter()
        .enumerate()
        .map(|(i, y)| (y - predict(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mean = ys.iter().sum::<f64>() / n;
    let residual = rmse / mean.max(1.0);
    ModelFit {
        a,
        b,
        residual,
        score: 1.0 / (1.0 + residual),
    }
}

/// Fits the three models to measurements and picks the best; a tie goes to
/// the simpler model.
pub fn classify_measurements(
    measurements: &[Measurement],
) -> Result<ComplexityVerdict, CalibrateError> {
    let distinct: std::collections::BTreeSet<usize> =
        measurements.iter().map(|m| m.length).collect();
    if distinct.len() < 4 {
        return Err(CalibrateError::TooFewLengths(distinct.len()));
    }
    let xs: Vec<f64> = measurements.iter().map(|m| m.length as f64).collect();
    let ys: Vec<f64> = measurements.iter().map(|m| m.path_length as f64).collect();
    let mut fits = BTreeMap::new();

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    fits.insert(ComplexityClass::Constant, fit(mean, 0.0, &ys, |_| mean));

    let (a, b) = least_squares(&xs, &ys);
    fits.insert(ComplexityClass::Linear, fit(a, b, &ys, |i| a + b * xs[i]));

    if ys.iter().all(|&y| y > 0.0) {
        let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let (a, b) = least_squares(&xs, &logs);
        if b > 0.0 {
            fits.insert(
                ComplexityClass::Exponential,
                fit(a, b, &ys, |i| (a + b * xs[i]).exp()),
            );
        }
    }

    let mut class = ComplexityClass::Constant;
    for candidate in [ComplexityClass::Linear, ComplexityClass::Exponential] {
        if let Some(f) = fits.get(&candidate) {
            if f.residual < fits[&class].residual - TIE_TOLERANCE {
                class = candidate;
            }
        }
    }
    Ok(ComplexityVerdict {
        class,
        fits,
        measurements: measurements.to_vec(),
    })
}

/// For each length L, replays the first L−1 events of `events` followed by
/// its final event and measures the final event's cost.
pub fn measure_prefixes(
    controller: &mut Controller,
    events: &[Event],
    lengths: &[usize],
) -> Result<Vec<Measurement>, CalibrateError> {
    let Some(last) = events.last() else {
        return Err(CalibrateError::EmptySequence);
    };
    let mut out = Vec::with_capacity(lengths.len());
    for &length in lengths {
        if length == 0 || length > events.len() {
            return Err(CalibrateError::BadLength {
                length,
                max: events.len(),
            });
        }
        let mut seq: Vec<Event> = events[..length - 1].to_vec();
        seq.push(last.clone());
        let trace = execute_on(controller, &seq).map_err(|e| CalibrateError::Dispatch {
            index: e.index(),
            message: e.to_string(),
        })?;
        out.push(Measurement {
            length,
            path_length: trace.path_length,
        });
    }
    Ok(out)
}

/// Classifies how a flagged sequence's final-event cost grows with the
/// length of its priming prefix.
pub fn classify_complexity(
    registry: &ServiceRegistry,
    members: &std::collections::BTreeSet<String>,
    flag: &Flag,
    probe_lengths: &[usize],
) -> Result<ComplexityVerdict, CalibrateError> {
    if !flag.triage.is_candidate() {
        return Err(CalibrateError::NotCandidate);
    }
    let mut controller = Controller::with_services(registry.clone(), members)
        .map_err(|e| CalibrateError::Registry(e.to_string()))?;
    let measurements = measure_prefixes(&mut controller, &flag.events, probe_lengths)?;
    classify_measurements(&measurements)
}

/// Attaches a verdict to every true-positive candidate in `report` that can
/// be classified, using `probe_lengths` or the defaults for the campaign's
/// sequence length. Returns how many flags got a verdict.
pub fn classify_candidates(report: &mut FuzzReport, probe_lengths: Option<&[usize]>) -> usize {
    let lengths = probe_lengths
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| default_probe_lengths(report.config.seq_len));
    let Ok(mut controller) =
        Controller::with_services(report.registry.clone(), &report.dependency.members)
    else {
        return 0;
    };
    let mut classified = 0;
    for flag in report.flags.iter_mut().filter(|f| f.triage.is_candidate()) {
        flag.complexity = measure_prefixes(&mut controller, &flag.events, &lengths)
            .and_then(|m| classify_measurements(&m))
            .ok();
        classified += usize::from(flag.complexity.is_some());
    }
    classified
}

/// The fastest-growing class among the report's classified candidates.
pub fn most_severe(report: &FuzzReport) -> Option<ComplexityClass> {
    report
        .flags
        .iter()
        .filter_map(|f| f.complexity.as_ref().map(|v| v.class))
        .max()
}
