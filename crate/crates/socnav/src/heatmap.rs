//! Heatmap computation across threads and file export.
//!
//! Both exports put the highest-y row first, so the text matrix reads like
//! the image.

use rayon::prelude::*;
use socnav_core::metrics::{heatmap_row, Heatmap, HeatmapField};
use socnav_core::reward::RewardParams;
use socnav_core::World;

/// Same grid as the sequential core routine, with rows computed in
/// parallel.
pub fn compute(world: &World, field: &HeatmapField, params: &RewardParams, n: usize) -> Heatmap {
    assert!(n >= 2, "heatmap needs N >= 2");
    let (lo, hi) = world.room.bounds();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|row| heatmap_row(world, field, params, n, row))
        .collect();
    Heatmap {
        n,
        lo,
        hi,
        values: rows.concat(),
    }
}

/// One line per row, values separated by single spaces.
pub fn to_text(h: &Heatmap) -> String {
    let mut out = String::with_capacity(h.n * h.n * 8);
    for row in (0..h.n).rev() {
        let line: Vec<String> = (0..h.n).map(|col| h.get(row, col).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses [`to_text`] output back into row-major values, lowest row first.
pub fn parse_text(text: &str) -> Option<Vec<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| {
            l.split_whitespace()
                .map(|v| v.parse().ok())
                .collect::<Option<Vec<f64>>>()
        })
        .collect::<Option<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(rows.into_iter().rev().flatten().collect())
}

/// 8-bit binary PGM, linearly scaled so the grid minimum is black and the
/// maximum white. A comment line records the value range.
pub fn to_pgm(h: &Heatmap) -> Vec<u8> {
    let lo = h.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = h.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n# range {lo} {hi}\n{} {}\n255\n", h.n, h.n).into_bytes();
    for row in (0..h.n).rev() {
        for col in 0..h.n {
            let v = h.get(row, col);
            let level = if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round()
            } else {
                255.0
            };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    out
}
