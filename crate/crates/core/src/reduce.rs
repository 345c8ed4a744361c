//! Deterministic parallel reduction.
//!
//! An index range is cut into fixed-size chunks. Chunks are mapped in
//! parallel a batch at a time, and their results are merged pairwise in
//! index order through a binary counter, so the floating-point result is
//! the same for every thread count.

use std::ops::Range;

use rayon::prelude::*;

/// Chunks mapped in parallel before merging.
const BATCH: usize = 64;

pub fn deterministic_reduce<T, F, M>(len: u64, chunk: u64, map: F, merge: M) -> Option<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
    M: Fn(T, T) -> T,
{
    let chunk = chunk.max(1);
    let chunks = len.div_ceil(chunk);
    let mut stack: Vec<(u32, T)> = Vec::new();
    let mut start = 0u64;
    while start < chunks {
        let end = (start + BATCH as u64).min(chunks);
        let results: Vec<T> = (start..end)
            .into_par_iter()
            .map(|c| map(c * chunk..((c + 1) * chunk).min(len)))
            .collect();
        for value in results {
            let mut level = 0u32;
            let mut value = value;
            while let Some((top_level, _)) = stack.last() {
                if *top_level != level {
                    break;
                }
                let (_, older) = stack.pop().expect("checked non-empty");
                value = merge(older, value);
                level += 1;
            }
            stack.push((level, value));
        }
        start = end;
    }
    let mut acc: Option<T> = None;
    while let Some((_, older)) = stack.pop() {
        acc = Some(match acc {
            None => older,
            Some(newer) => merge(older, newer),
        });
    }
    acc
}

/// Runs `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}
