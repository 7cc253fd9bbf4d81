//! Bounded worker pool for independent cells: scoped threads pulling indices
//! from an atomic counter. `COEVO_THREADS` caps the pool size.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub fn thread_count() -> usize {
    if let Ok(raw) = std::env::var("COEVO_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run `f(0..n)` on up to `threads` workers; results returned in index order.
pub fn run_indexed<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let mut slots: Vec<Option<T>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    let slots = Mutex::new(slots);
    let next = AtomicUsize::new(0);
    let workers = threads.min(n).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let result = f(k);
                slots.lock().unwrap()[k] = Some(result);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker filled every slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_order() {
        let out = run_indexed(100, 7, |k| k * k);
        assert_eq!(out.len(), 100);
        for (k, v) in out.iter().enumerate() {
            assert_eq!(*v, k * k);
        }
    }

    #[test]
    fn single_thread_works() {
        let out = run_indexed(5, 1, |k| k + 1);
        assert_eq!(out, vec![1, 2, 3, 4, 5]);
    }
}
