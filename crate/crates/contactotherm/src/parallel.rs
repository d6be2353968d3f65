//! Order-preserving parallel map over point sweeps.

use anyhow::{bail, Result};

pub const THREADS_ENV: &str = "CONTACTOTHERM_THREADS";

/// `--threads`, else `CONTACTOTHERM_THREADS`, else 1.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    let t = match flag {
        Some(t) => t,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) if !s.trim().is_empty() => match s.trim().parse::<usize>() {
                Ok(t) => t,
                Err(_) => bail!("{THREADS_ENV}='{s}' is not a positive integer"),
            },
            _ => 1,
        },
    };
    if t == 0 {
        bail!("thread count must be at least 1");
    }
    Ok(t)
}

/// Applies `f(index, item)` to every item. Each result depends only on its
/// own index, so the output is identical for any thread count.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || part.iter().enumerate().map(|(k, x)| f(c * chunk + k, x)).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
