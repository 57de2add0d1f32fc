use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

/// What a worker reports back for one job.
pub enum Step<T> {
    Done(T),
    /// Keep this result but stop handing out new jobs.
    Halt(T),
}

/// Runs `f` over `jobs` on at most `workers` threads. New jobs stop being
/// handed out once `cancel` is set or a job halts; jobs already started are
/// allowed to finish. Results come back in job order, only for jobs that ran.
pub fn run_bounded<J: Sync, T: Send>(
    jobs: &[J],
    workers: usize,
    cancel: &AtomicBool,
    f: impl Fn(&J) -> Step<T> + Sync,
) -> Vec<(usize, T)> {
    let next = AtomicUsize::new(0);
    let halted = AtomicBool::new(false);
    let results = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                if cancel.load(Ordering::SeqCst) || halted.load(Ordering::SeqCst) {
                    break;
                }
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(k) else { break };
                let value = match f(job) {
                    Step::Done(v) => v,
                    Step::Halt(v) => {
                        halted.store(true, Ordering::SeqCst);
                        v
                    }
                };
                results.lock().expect("results lock").push((k, value));
            });
        }
    });
    let mut out = results.into_inner().expect("results lock");
    out.sort_by_key(|(k, _)| *k);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_everything_in_order() {
        let jobs: Vec<u32> = (0..50).collect();
        let out = run_bounded(&jobs, 4, &AtomicBool::new(false), |j| Step::Done(j * 2));
        assert_eq!(out.len(), 50);
        assert!(out.iter().all(|(k, v)| *v == jobs[*k] * 2));
    }

    #[test]
    fn halt_stops_new_work() {
        let jobs: Vec<u32> = (0..100).collect();
        let out = run_bounded(&jobs, 1, &AtomicBool::new(false), |j| {
            if *j == 5 {
                Step::Halt(*j)
            } else {
                Step::Done(*j)
            }
        });
        assert_eq!(out.len(), 6);
    }

    #[test]
    fn cancelled_before_start_runs_nothing() {
        let out = run_bounded(&[1, 2, 3], 2, &AtomicBool::new(true), |j| Step::Done(*j));
        assert!(out.is_empty());
    }
}
