use serde::{Deserialize, Serialize};

use crate::event::{Event, EventKind};
use crate::testbed::{Controller, DispatchError, ServiceRegistry};

use super::CalibrateError;

/// Events dropped from the start of a baseline run.
pub const DEFAULT_WARMUP: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSample {
    pub event_index: usize,
    pub kind: EventKind,
    pub path_length: u64,
}

/// Dispatches `workload` from a fresh state with every service enabled,
/// tracing each event, and returns the samples after the first `warmup`.
pub fn run_baseline(
    registry: &ServiceRegistry,
    workload: &[Event],
    warmup: usize,
) -> Result<Vec<BaselineSample>, CalibrateError> {
    let mut controller = Controller::new(registry.clone());
    let mut samples = Vec::with_capacity(workload.len().saturating_sub(warmup));
    for (event_index, event) in workload.iter().enumerate() {
        let (_, trace) = controller
            .dispatch_traced(event)
            .map_err(|e: DispatchError| CalibrateError::Dispatch {
                index: event_index,
                message: e.to_string(),
            })?;
        if event_index >= warmup {
            samples.push(BaselineSample {
                event_index,
                kind: event.kind,
                path_length: trace.path_length,
            });
        }
    }
    if samples.is_empty() {
        return Err(CalibrateError::NoSamples);
    }
    Ok(samples)
}

/// `μ + 3σ` with the population standard deviation, before rounding.
pub fn threshold_value(samples: &[u64]) -> Result<f64, CalibrateError> {
    if samples.len() < 2 {
        return Err(CalibrateError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(mean + 3.0 * var.sqrt())
}

/// `⌈μ + 3σ⌉` over path lengths, population standard deviation.
///
/// The ceiling is computed exactly when the sums fit in 128 bits, so a
/// constant sample set returns the constant itself.
pub fn compute_threshold(samples: &[u64]) -> Result<u64, CalibrateError> {
    let estimate = threshold_value(samples)?;
    Ok(exact_ceiling(samples).unwrap_or_else(|| estimate.ceil() as u64))
}

/// Smallest integer t with `t·n − S ≥ 3·sqrt(n·Q − S²)`, where S and Q are
/// the sum and the sum of squares.
fn exact_ceiling(samples: &[u64]) -> Option<u64> {
    let n = samples.len() as u128;
    let mut sum = 0u128;
    let mut squares = 0u128;
    for &x in samples {
        let x = u128::from(x);
        sum = sum.checked_add(x)?;
        squares = squares.checked_add(x.checked_mul(x)?)?;
    }
    let spread = n.checked_mul(squares)?.checked_sub(sum.checked_mul(sum)?)?;
    let nine_spread = spread.checked_mul(9)?;
    let holds = |t: u128| -> Option<bool> {
        let lhs = t.checked_mul(n)?;
        if lhs < sum {
            return Some(false);
        }
        let d = lhs - sum;
        Some(d.checked_mul(d)? >= nine_spread)
    };
    let guess = ((sum as f64 + 3.0 * (spread as f64).sqrt()) / n as f64).ceil() as u128;
    let mut t = guess.saturating_sub(2);
    while !holds(t)? {
        t += 1;
    }
    while t > 0 && holds(t - 1)? {
        t -= 1;
    }
    u64::try_from(t).ok()
}

/// Samples as `event_index,kind,path_length` rows with a header.
pub fn samples_csv(samples: &[BaselineSample]) -> String {
    let mut out = String::from("event_index,kind,path_length\n");
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.event_index, s.kind, s.path_length));
    }
    out
}
