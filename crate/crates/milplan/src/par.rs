//! Tiny work-stealing map used by the batch drivers (`--jobs N`).
//!
//! Results land in input order and every work item runs exactly once, so a
//! parallel run is indistinguishable from a sequential one as long as the
//! closure itself is deterministic per index — which all our per-instance
//! drivers are (their RNGs are seeded from the instance index, never from
//! scheduling order).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Apply `f` to every item, on up to `jobs` threads. `jobs <= 1` runs
/// inline with no thread machinery at all.
pub(crate) fn par_map_indexed<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let jobs = jobs.min(items.len());
    if jobs <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(i, &items[i]);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_matches_sequential_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = par_map_indexed(&items, 1, |i, &x| (i as u64) * 1000 + x * x);
        for jobs in [2, 3, 8, 200] {
            let par = par_map_indexed(&items, jobs, |i, &x| (i as u64) * 1000 + x * x);
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn empty_and_tiny_inputs_are_fine() {
        let empty: Vec<u32> = Vec::new();
        assert_eq!(par_map_indexed(&empty, 4, |_, &x| x), Vec::<u32>::new());
        assert_eq!(par_map_indexed(&[7u32], 4, |i, &x| x + i as u32), vec![7]);
    }
}
