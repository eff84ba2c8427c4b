//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use periodic_mv::engine::{Ensemble, NoisePolicy};

/// Smallest `D₁` of `2ψ″ + D₀ψ′ = −D₁ψ`, `ψ(0) = 0`, `ψ′(l) = 0`, from a
/// finite-volume discretisation of the self-adjoint form
/// `−(pψ′)′ = (D₁/2) p ψ`, `p = e^{D₀r/2}`, with `cells` cells.
pub fn eigen_fd(d0: f64, l: f64, cells: usize) -> f64 {
    let h = l / cells as f64;
    let p = |r: f64| (0.5 * d0 * r).exp();
    // unknowns ψ_1..ψ_n at r_i = i h; the last cell is a half cell
    let n = cells;
    let mut mass = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for i in 1..=n {
        let r = i as f64 * h;
        let left = p(r - 0.5 * h) / h;
        let right = if i < n { p(r + 0.5 * h) / h } else { 0.0 };
        diag[i - 1] = left + right;
        if i < n {
            off[i - 1] = -right;
        }
        mass[i - 1] = p(r) * if i < n { h } else { 0.5 * h };
    }
    // symmetric tridiagonal M^{-1/2} A M^{-1/2}
    let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a: Vec<f64> = (0..n).map(|i| diag[i] * s[i] * s[i]).collect();
    let b: Vec<f64> = (0..n - 1).map(|i| off[i] * s[i] * s[i + 1]).collect();
    // Sturm count of eigenvalues below x
    let below = |x: f64| {
        let mut count = 0;
        let mut q = a[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let prev = if q == 0.0 { 1e-300 } else { q };
            q = a[i] - x - b[i - 1] * b[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while below(hi) == 0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // μ = D₁/2
    lo + hi
}

/// Richardson-extrapolated [`eigen_fd`] (second order in `h`).
pub fn eigen_oracle(d0: f64, l: f64) -> f64 {
    let (c, f) = (eigen_fd(d0, l, 2000), eigen_fd(d0, l, 4000));
    (4.0 * f - c) / 3.0
}

/// Minimum of `Σ cost(i, σ(i))` over all permutations `σ` (Heap's algorithm).
pub fn brute_force_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for_each_permutation(n, |p| {
        let s: f64 = (0..n).map(|i| cost(i, p[i])).sum();
        if s < best {
            best = s;
        }
    });
    best
}

pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// `n` points of a standard Gaussian in `d` dimensions, shifted and scaled.
pub fn gaussian_cloud(n: usize, d: usize, seed: u64, mean: &[f64], scale: f64) -> Ensemble {
    let noise = NoisePolicy::new(seed);
    let mut pos = vec![0.0; n * d];
    for (i, row) in pos.chunks_exact_mut(d).enumerate() {
        noise.normals(0, i as u32, 0, row);
        for (x, m) in row.iter_mut().zip(mean) {
            *x = m + scale * *x;
        }
    }
    Ensemble::new(pos, d, 0.0).unwrap()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `K(r) = ∫_r^∞ t e^{Γ(t) − Γ(r)} dt` by Simpson on a long, fine interval.
pub fn slope_oracle(theta1: f64, theta2: f64, radius: f64, r: f64) -> f64 {
    let prim = |s: f64| {
        if s <= radius {
            0.5 * theta1 * s * s
        } else {
            let u = s - radius;
            0.5 * theta1 * radius * radius + theta1 * radius * u - 0.5 * theta2 * u * u
        }
    };
    let peak = radius + theta1 * radius / theta2;
    let top = r.max(peak) + 12.0 / theta2.sqrt() + 10.0;
    let g = |t: f64| t * (prim(t) - prim(r)).exp();
    if r < radius {
        simpson(g, r, radius, 20_000) + simpson(g, radius, top, 200_000)
    } else {
        simpson(g, r, top, 200_000)
    }
}
