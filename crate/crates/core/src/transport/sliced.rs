use crate::engine::noise::stream;
use crate::engine::{Ensemble, NoisePolicy};
use crate::error::{Error, Result};

/// `W_p^p` between two sorted 1-D samples with uniform weights, any sizes.
pub fn wpp_sorted_1d(a: &[f64], b: &[f64], p: u8) -> f64 {
    let pow = |x: f64| if p == 1 { x.abs() } else { x * x };
    let (n, m) = (a.len(), b.len());
    if n == m {
        return a.iter().zip(b).map(|(x, y)| pow(x - y)).sum::<f64>() / n as f64;
    }
    // quantile cells in units of 1/(n·m): a_i covers [i·m, (i+1)·m), b_j covers [j·n, (j+1)·n)
    let (mut i, mut j, mut prev) = (0usize, 0usize, 0usize);
    let mut total = 0.0;
    while i < n && j < m {
        let (ea, eb) = ((i + 1) * m, (j + 1) * n);
        let end = ea.min(eb);
        total += (end - prev) as f64 * pow(a[i] - b[j]);
        prev = end;
        if ea == end {
            i += 1;
        }
        if eb == end {
            j += 1;
        }
    }
    total / (n * m) as f64
}

/// Sliced `W_p`: `(mean over random unit directions θ of W_p^p(θ·A, θ·B))^{1/p}`.
///
/// Directions depend only on the seed of `noise` (even a silent policy yields
/// directions), so the result is reproducible.
pub fn ot_sliced(a: &Ensemble, b: &Ensemble, p: u8, n_proj: usize, noise: &NoisePolicy) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Transport(format!("dimension mismatch: {} vs {}", a.dim, b.dim)));
    }
    if !matches!(p, 1 | 2) {
        return Err(Error::Transport(format!("sliced distance needs p in {{1, 2}}, got {p}")));
    }
    if n_proj == 0 {
        return Err(Error::Transport("at least one projection is needed".into()));
    }
    let d = a.dim;
    let dirs = NoisePolicy::new(noise.seed);
    let mut theta = vec![0.0; d];
    let mut pa = vec![0.0; a.len()];
    let mut pb = vec![0.0; b.len()];
    let mut acc = 0.0;
    for k in 0..n_proj {
        if d == 1 {
            theta[0] = 1.0;
        } else {
            loop {
                dirs.normals(stream::DIRECTIONS, k as u32, 0, &mut theta);
                let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    theta.iter_mut().for_each(|v| *v /= norm);
                    break;
                }
            }
        }
        let project = |e: &Ensemble, out: &mut [f64]| {
            for (o, x) in out.iter_mut().zip(e.points()) {
                *o = x.iter().zip(&theta).map(|(u, v)| u * v).sum();
            }
            out.sort_by(f64::total_cmp);
        };
        project(a, &mut pa);
        project(b, &mut pb);
        acc += wpp_sorted_1d(&pa, &pb, p);
        if d == 1 {
            // every direction is ±1 and gives the same value
            acc *= n_proj as f64;
            break;
        }
    }
    let mean = acc / n_proj as f64;
    Ok(if p == 2 { mean.sqrt() } else { mean })
}
