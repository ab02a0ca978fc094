//! Statically allocated worker pool.
//!
//! Jobs are split into contiguous index ranges before any outcome is
//! observed and results are concatenated in range order, so the output is a
//! pure function of the job function and count: completion order and worker
//! count can never bias or reorder results.

/// Runs `count` jobs on `workers` threads and returns their results in job
/// order. `workers == 1` runs inline.
pub fn run_jobs<T, F>(workers: usize, count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    run_jobs_scratch(workers, count, || (), |(), i| job(i))
}

/// As [`run_jobs`], with a per-worker scratch value created once per chunk
/// so jobs can reuse buffers.
pub fn run_jobs_scratch<T, C, F, I>(workers: usize, count: usize, init: I, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut C, usize) -> T + Sync,
    I: Fn() -> C + Sync,
{
    let workers = workers.max(1).min(count.max(1));
    if workers == 1 {
        let mut scratch = init();
        return (0..count).map(|i| job(&mut scratch, i)).collect();
    }
    // Chunk bounds fixed up front: the first `rem` chunks get one extra job.
    let base = count / workers;
    let rem = count % workers;
    let mut bounds = Vec::with_capacity(workers + 1);
    let mut start = 0;
    bounds.push(0);
    for w in 0..workers {
        start += base + usize::from(w < rem);
        bounds.push(start);
    }
    let (job, init) = (&job, &init);
    let mut chunks: Vec<Vec<T>> = Vec::with_capacity(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (lo, hi) = (bounds[w], bounds[w + 1]);
                scope.spawn(move || {
                    let mut scratch = init();
                    (lo..hi).map(|i| job(&mut scratch, i)).collect::<Vec<T>>()
                })
            })
            .collect();
        for h in handles {
            chunks.push(h.join().expect("worker panicked"));
        }
    });
    chunks.into_iter().flatten().collect()
}
