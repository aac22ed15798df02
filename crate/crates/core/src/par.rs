//! Data-parallel kernels with a sequential fallback.
//!
//! Every reduction splits its index range into fixed-size chunks, sums each
//! chunk with compensated summation and combines the chunk partials in index
//! order. The split does not depend on the thread count, so the `parallel`
//! and `sequential` paths return bit-identical results and solver output is
//! reproducible whether or not the `parallel` feature is enabled.

/// Number of indices summed per chunk.
pub const CHUNK: usize = 2048;

/// Ranges shorter than this are always processed on the calling thread.
pub const PARALLEL_THRESHOLD: usize = 4 * CHUNK;

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn chunk_sum<F: Fn(usize) -> f64>(start: usize, end: usize, f: &F) -> f64 {
    let mut acc = Neumaier::default();
    for i in start..end {
        acc.add(f(i));
    }
    acc.value()
}

fn combine(partials: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for p in partials {
        acc.add(p);
    }
    acc.value()
}

fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK)
}

pub mod sequential {
    use super::*;

    /// `Σ_{i<n} f(i)` on the calling thread.
    pub fn sum_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
        combine((0..chunk_count(n)).map(|c| chunk_sum(c * CHUNK, ((c + 1) * CHUNK).min(n), &f)))
    }

    pub fn fill<F: Fn(usize) -> f64>(out: &mut [f64], f: F) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }

    pub fn map_collect<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
        (0..n).map(f).collect()
    }

    pub fn join3<A, B, C>(
        a: impl FnOnce() -> A,
        b: impl FnOnce() -> B,
        c: impl FnOnce() -> C,
    ) -> (A, B, C) {
        (a(), b(), c())
    }

    pub fn join<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
        (a(), b())
    }
}

#[cfg(feature = "parallel")]
pub mod parallel {
    use super::*;
    use rayon::prelude::*;

    pub fn sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
        let partials: Vec<f64> = (0..chunk_count(n))
            .into_par_iter()
            .map(|c| chunk_sum(c * CHUNK, ((c + 1) * CHUNK).min(n), &f))
            .collect();
        combine(partials)
    }

    pub fn fill<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }

    pub fn map_collect<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
        (0..n).into_par_iter().map(&f).collect()
    }

    pub fn join3<A: Send, B: Send, C: Send>(
        a: impl FnOnce() -> A + Send,
        b: impl FnOnce() -> B + Send,
        c: impl FnOnce() -> C + Send,
    ) -> (A, B, C) {
        let (a, (b, c)) = rayon::join(a, || rayon::join(b, c));
        (a, b, c)
    }

    pub fn join<A: Send, B: Send>(
        a: impl FnOnce() -> A + Send,
        b: impl FnOnce() -> B + Send,
    ) -> (A, B) {
        rayon::join(a, b)
    }
}

/// Deterministic `Σ_{i<n} f(i)`.
pub fn sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    #[cfg(feature = "parallel")]
    if n >= PARALLEL_THRESHOLD {
        return parallel::sum_by(n, f);
    }
    sequential::sum_by(n, f)
}

/// `out[i] = f(i)` for every index.
pub fn fill<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
    #[cfg(feature = "parallel")]
    if out.len() >= PARALLEL_THRESHOLD {
        return parallel::fill(out, f);
    }
    sequential::fill(out, f)
}

/// Collects `f(0), …, f(n-1)`; `f` is expected to be expensive per index.
pub fn map_collect<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if n > 1 {
        return parallel::map_collect(n, f);
    }
    sequential::map_collect(n, f)
}

/// Runs three independent tasks, concurrently when `parallel` is enabled.
pub fn join3<A: Send, B: Send, C: Send>(
    a: impl FnOnce() -> A + Send,
    b: impl FnOnce() -> B + Send,
    c: impl FnOnce() -> C + Send,
) -> (A, B, C) {
    #[cfg(feature = "parallel")]
    return parallel::join3(a, b, c);
    #[cfg(not(feature = "parallel"))]
    sequential::join3(a, b, c)
}

pub fn join<A: Send, B: Send>(
    a: impl FnOnce() -> A + Send,
    b: impl FnOnce() -> B + Send,
) -> (A, B) {
    #[cfg(feature = "parallel")]
    return parallel::join(a, b);
    #[cfg(not(feature = "parallel"))]
    sequential::join(a, b)
}

/// Dot product with deterministic chunked summation.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    sum_by(x.len(), |i| x[i] * y[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sequential::sum_by(v.len(), |i| v[i]), 2.0);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(sum_by(0, |_| 1.0), 0.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_sums_are_bit_identical() {
        let n = 50_000;
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let s = sequential::sum_by(n, f);
        let p = parallel::sum_by(n, f);
        assert_eq!(s.to_bits(), p.to_bits());
    }
}
