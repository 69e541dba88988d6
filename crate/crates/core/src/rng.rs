//! Reproducible stream splitting.
//!
//! A batch of `n` draws is cut into fixed blocks of [`BLOCK_LEN`] draws. Block
//! `b` always consumes the ChaCha8 stream `b` keyed by the master seed, so a
//! draw depends only on `(seed, index)`. Lanes own contiguous runs of blocks
//! and are concatenated in lane order, which makes the output independent of
//! both the lane count and the number of physical threads.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

pub const BLOCK_LEN: usize = 1024;

/// Independent stream `stream_id` derived from `seed`.
pub fn stream(seed: u64, stream_id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

fn block_count(n: usize) -> usize {
    n.div_ceil(BLOCK_LEN)
}

/// Draw-index ranges owned by each lane. Ranges are block aligned, contiguous
/// and in lane order; trailing lanes may be empty.
pub fn lane_ranges(n: usize, lanes: usize) -> Vec<Range<usize>> {
    let lanes = lanes.max(1);
    let blocks = block_count(n);
    (0..lanes)
        .map(|lane| {
            let b0 = blocks * lane / lanes;
            let b1 = blocks * (lane + 1) / lanes;
            (b0 * BLOCK_LEN).min(n)..(b1 * BLOCK_LEN).min(n)
        })
        .collect()
}

/// Produces `n` draws of `draw`, lane-parallel, in draw-index order.
pub fn generate<T, F>(n: usize, seed: u64, lanes: usize, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream) -> T + Sync,
{
    let per_lane: Vec<Vec<T>> = lane_ranges(n, lanes)
        .into_par_iter()
        .map(|range| {
            let mut out = Vec::with_capacity(range.len());
            let mut start = range.start;
            while start < range.end {
                let block = start / BLOCK_LEN;
                let end = ((block + 1) * BLOCK_LEN).min(range.end);
                let mut rng = stream(seed, block as u64);
                out.extend((start..end).map(|_| draw(&mut rng)));
                start = end;
            }
            out
        })
        .collect();
    per_lane.into_iter().flatten().collect()
}
