//! Fixed-size worker pool for scenario fan-out.
//!
//! Workers pull task indices from a shared counter and each owns one piece
//! of scratch state (typically an LP backend). Results come back in task
//! order whatever the completion order, so every reduction over them is
//! bit-identical for any worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Executor {
    workers: usize,
}

impl Default for Executor {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Executor {
    /// A pool of `workers` threads; zero is treated as one.
    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `task(state, i)` for `i in 0..n` and returns the results in
    /// index order. `init` is called once per worker thread.
    pub fn map<S, R, I, F>(&self, n: usize, init: I, task: F) -> Vec<R>
    where
        I: Fn() -> S + Sync,
        F: Fn(&mut S, usize) -> R + Sync,
        R: Send,
    {
        let threads = self.workers.min(n);
        if threads <= 1 {
            let mut state = init();
            return (0..n).map(|i| task(&mut state, i)).collect();
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
        let parts: Vec<Vec<(usize, R)>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|_| {
                    scope.spawn(|| {
                        let mut state = init();
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= n {
                                break;
                            }
                            done.push((i, task(&mut state, i)));
                        }
                        done
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
                .collect()
        });
        for (i, r) in parts.into_iter().flatten() {
            slots[i] = Some(r);
        }
        slots.into_iter().map(|r| r.expect("every task ran")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_in_task_order() {
        for w in [1, 2, 4, 8] {
            let ex = Executor::new(w);
            let out = ex.map(37, || 0usize, |calls, i| {
                *calls += 1;
                i * i
            });
            assert_eq!(out, (0..37).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn one_state_per_worker() {
        let ex = Executor::new(3);
        let inits = AtomicUsize::new(0);
        ex.map(10, || inits.fetch_add(1, Ordering::SeqCst), |_, i| i);
        assert_eq!(inits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn float_reduction_independent_of_workers() {
        let f = |_: &mut (), i: usize| 1.0 / (1.0 + i as f64).powi(3);
        let sum = |w| Executor::new(w).map(500, || (), f).iter().sum::<f64>();
        let one = sum(1);
        for w in [2, 4, 8] {
            assert_eq!(sum(w).to_bits(), one.to_bits());
        }
    }
}
