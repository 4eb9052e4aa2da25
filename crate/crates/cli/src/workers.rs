//! Bounded worker fan-out with ordered result collection.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Worker count: `--threads` beats `BAKER_COPULA_THREADS` (a cap), which
/// beats the machine's parallelism.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    if let Some(t) = flag {
        return t.max(1);
    }
    let avail = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("BAKER_COPULA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => avail.min(cap),
        _ => avail,
    }
}

/// Apply `f` to every item on up to `threads` workers; results come back in
/// input order, so the output is identical for any worker count.
pub fn ordered_parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results_regardless_of_workers() {
        let items: Vec<usize> = (0..100).collect();
        let one = ordered_parallel_map(&items, 1, |&x| x * x);
        let many = ordered_parallel_map(&items, 8, |&x| x * x);
        assert_eq!(one, many);
        assert_eq!(one[99], 99 * 99);
    }
}
