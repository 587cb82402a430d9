use std::time::Instant;

use super::{fixed_episode, Adapters, MethodId};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TimingResult {
    pub method: MethodId,
    pub k: usize,
    /// Per-feature milliseconds: batch wall time divided by batch size.
    pub mean_ms: f64,
    pub std_ms: f64,
    pub batch_size: usize,
    pub repetitions: usize,
}

/// Times head production for batches of `batch_size` features, cycling
/// through the meta-test episodes to fill each batch. Episodes are staged
/// beforehand, and the base model encodes every context row afresh (no
/// cached encodings). One untimed warm-up batch precedes the measurements.
pub fn time_initialization(
    adapters: &Adapters<'_>,
    method: MethodId,
    features: &[usize],
    k: usize,
    batch_size: usize,
    repetitions: usize,
    rng: &Rng,
) -> Result<TimingResult> {
    if repetitions == 0 {
        return Err(Error::invalid("timing needs at least one repetition"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    adapters.check(method)?;
    let fresh = adapters.uncached();
    let ds = adapters.view.dataset;
    let episodes = features
        .iter()
        .filter(|&&f| ds.observed_count(f) > 0)
        .map(|&f| fixed_episode(adapters, f, k, rng))
        .collect::<Result<Vec<_>>>()?;
    if episodes.is_empty() {
        return Err(Error::invalid("no observed feature to time"));
    }
    let batch: Vec<_> = episodes.iter().cycle().take(batch_size).collect();
    let method_rng = rng.derive("timing-methods");
    let run_batch = |rep: u64| -> Result<f64> {
        let mut r = method_rng.derive_index(rep);
        let start = Instant::now();
        for ep in &batch {
            std::hint::black_box(fresh.produce(method, ep.feature, &ep.context, &mut r)?);
        }
        Ok(start.elapsed().as_secs_f64() * 1e3 / batch_size as f64)
    };
    run_batch(u64::MAX)?;
    let samples = (0..repetitions as u64)
        .map(run_batch)
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(TimingResult {
        method,
        k,
        mean_ms: mean,
        std_ms: std,
        batch_size,
        repetitions,
    })
}
