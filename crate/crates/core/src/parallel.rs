//! Deterministic chunked Monte Carlo.
//!
//! Samples are split into fixed-size chunks and chunk `c` draws from its own
//! stream `(root, c)`. Chunks run in parallel in fixed-size waves and partial
//! results are merged in chunk order, so output is bit-identical for any
//! thread count.

use rayon::prelude::*;

use crate::gaussian::RandomStream;

pub(crate) const CHUNK: usize = 1024;
const WAVE: usize = 16;

/// Runs `work(len, stream)` on every chunk of `total` samples and feeds the
/// results to `merge` in chunk order.
pub(crate) fn run_chunked<T, W, M>(total: usize, stream: &mut RandomStream, work: W, mut merge: M)
where
    T: Send,
    W: Fn(usize, &mut RandomStream) -> T + Sync,
    M: FnMut(T),
{
    let root = stream.fork_root();
    let chunks = total.div_ceil(CHUNK);
    let mut start = 0;
    while start < chunks {
        let end = (start + WAVE).min(chunks);
        let parts: Vec<T> = (start..end)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(total - c * CHUNK);
                let mut s = RandomStream::new(root, c as u64);
                work(len, &mut s)
            })
            .collect();
        parts.into_iter().for_each(&mut merge);
        start = end;
    }
}
