//! Scoped-thread fan-out with results returned in input order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rivalfit_core::mc::{self, McAccumulator, McModel, McReport};

/// Applies `f` to every item on up to `workers` threads. The output order
/// matches `items` whatever the scheduling.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::with_capacity(items.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                done.lock().expect("worker panicked").push((i, r));
            });
        }
    });
    let mut done = done.into_inner().expect("worker panicked");
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, r)| r).collect()
}

/// Monte Carlo with one generator stream per worker. Streams are merged in
/// stream order, so the result depends on `(seed, workers)` only.
pub fn mc_parallel(
    model: &McModel,
    samples: u64,
    seed: u64,
    workers: usize,
) -> rivalfit_core::Result<McReport> {
    mc::check_samples(samples)?;
    let streams: Vec<(u64, u64)> = mc::stream_sizes(samples, workers.max(1) as u32)
        .into_iter()
        .enumerate()
        .map(|(s, n)| (s as u64, n))
        .collect();
    let accs: Vec<McAccumulator> = ordered_map(&streams, workers, |&(stream, n)| {
        mc::sample_stream(model, seed, stream, n)
    });
    Ok(mc::finish(&accs, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rivalfit_core::{FeatureRegime, SymmetricStrategyPair};

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..50).collect();
        let out = ordered_map(&items, 4, |&x| x * x);
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(ordered_map(&[] as &[u64], 3, |&x| x).is_empty());
    }

    #[test]
    fn threaded_mc_matches_sequential() {
        let regime = FeatureRegime::new(0.4, 0.6, 0.24).unwrap();
        let model =
            McModel::from_regime(&regime, &SymmetricStrategyPair::THEORETICAL, 1000).unwrap();
        let threaded = mc_parallel(&model, 20_000, 9, 3).unwrap();
        let sequential = mc::mc_reward(&model, 20_000, 9, 3).unwrap();
        assert_eq!(threaded, sequential);
    }
}
