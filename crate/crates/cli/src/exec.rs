//! Trajectory pool: one coordinator, `N` workers pulling whole trajectories
//! from a shared counter and streaming results back over a channel.
//!
//! Results are slotted by `(point, trajectory)`, so the output never depends
//! on the worker count or on completion order.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

/// Outcome of a pool run. `results[point][trajectory]` is `None` for work
/// that never finished.
pub struct PoolOutput<T> {
    pub results: Vec<Vec<Option<T>>>,
    pub failure: Option<String>,
}

impl<T> PoolOutput<T> {
    pub fn point_complete(&self, point: usize) -> bool {
        self.results[point].iter().all(Option::is_some)
    }
}

pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Runs `job(point, trajectory)` for every trajectory of every point.
/// `order` lists points in the order their jobs are queued (largest first
/// keeps the tail short); it does not affect the results.
pub fn run_pool<T, F>(trajectories: &[usize], order: &[usize], workers: usize, job: F) -> PoolOutput<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    let queue: Vec<(usize, u64)> = order
        .iter()
        .flat_map(|&pt| (0..trajectories[pt] as u64).map(move |t| (pt, t)))
        .collect();
    let mut results: Vec<Vec<Option<T>>> = trajectories
        .iter()
        .map(|&n| (0..n).map(|_| None).collect())
        .collect();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut failure = None;
    let workers = workers.max(1).min(queue.len().max(1));
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, u64, Result<T, String>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (queue, next, stop, job) = (&queue, &next, &stop, &job);
            scope.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(pt, t)) = queue.get(i) else { break };
                    let out = catch_unwind(AssertUnwindSafe(|| job(pt, t))).map_err(panic_message);
                    let failed = out.is_err();
                    if tx.send((pt, t, out)).is_err() || failed {
                        stop.store(true, Ordering::Relaxed);
                        break;
                    }
                }
            });
        }
        drop(tx);
        for (pt, t, out) in rx {
            match out {
                Ok(v) => results[pt][t as usize] = Some(v),
                Err(msg) => {
                    failure.get_or_insert(format!("point {pt}, trajectory {t}: {msg}"));
                }
            }
        }
    });
    PoolOutput { results, failure }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}
