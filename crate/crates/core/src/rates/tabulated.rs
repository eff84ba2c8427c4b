use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiTag {
    Example31,
    Eigen,
    Power,
    Custom,
}

/// A radial cost `ψ` on `[0, ∞)` known on a grid together with `ψ′` and `ψ″`.
///
/// Between nodes `ψ` and `ψ′` are cubic Hermite interpolants (of `(ψ, ψ′)` and
/// `(ψ′, ψ″)` respectively) and `ψ″` is linear. Past the last node the cost
/// continues linearly with the last slope, which for the eigen family is zero,
/// i.e. `ψ(r) = ψ(r ∧ l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCostFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// `inf ψ′` over the table.
    pub c1: f64,
    /// `sup ψ′` over the table.
    pub c2: f64,
    /// `sup r ψ′(r) / ψ(r)`.
    pub c_psi: f64,
    /// Smallest `C` with `ψ′(t) ≤ C ψ′(s)` for all tabulated `t ≥ s`
    /// (infinite if `ψ′` vanishes and later becomes positive).
    pub monotone_c: f64,
    pub tag: PsiTag,
    /// Construction parameters by name, e.g. `theta1`, `d0`, `d1`.
    pub params: Vec<(String, f64)>,
    pub flatten: Option<f64>,
}

fn hermite(h: f64, s: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * m1
}

fn hermite_slope(h: f64, s: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s2 = s * s;
    ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * h * m0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * h * m1)
        / h
}

impl TabulatedCostFunction {
    pub fn from_table(
        grid: Vec<f64>,
        values: Vec<f64>,
        d1: Vec<f64>,
        d2: Vec<f64>,
        tag: PsiTag,
        params: Vec<(String, f64)>,
        flatten: Option<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        if n < 2 || values.len() != n || d1.len() != n || d2.len() != n {
            return Err(Error::Cost("a cost table needs at least two nodes and equal column lengths".into()));
        }
        if grid[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Cost("a cost table must start at r = 0 with ψ(0) = 0".into()));
        }
        for i in 1..n {
            if !(grid[i] > grid[i - 1]) {
                return Err(Error::Cost(format!("grid is not strictly increasing at node {i}")));
            }
            if values[i] < values[i - 1] {
                return Err(Error::Cost(format!("ψ decreases at node {i}")));
            }
        }
        if values.iter().chain(&d1).chain(&d2).any(|v| !v.is_finite()) {
            return Err(Error::Cost("cost table holds non-finite entries".into()));
        }
        if d1.iter().any(|v| *v < 0.0) {
            return Err(Error::Cost("ψ′ is negative somewhere on the table".into()));
        }
        let c1 = d1.iter().copied().fold(f64::INFINITY, f64::min);
        let c2 = d1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut c_psi = if d1[0] > 0.0 { 1.0 } else { 0.0 };
        for i in 1..n {
            if values[i] > 0.0 {
                c_psi = f64::max(c_psi, grid[i] * d1[i] / values[i]);
            }
        }
        let mut monotone_c: f64 = 1.0;
        let mut tail_max = 0.0f64;
        for i in (0..n).rev() {
            tail_max = tail_max.max(d1[i]);
            if d1[i] > 0.0 {
                monotone_c = monotone_c.max(tail_max / d1[i]);
            } else if tail_max > 0.0 {
                monotone_c = f64::INFINITY;
            }
        }
        Ok(TabulatedCostFunction {
            grid,
            values,
            d1,
            d2,
            c1,
            c2,
            c_psi,
            monotone_c,
            tag,
            params,
            flatten,
        })
    }

    /// `ψ(r) = r`, tabulated on `[0, 1]` and extended linearly.
    pub fn linear() -> Self {
        Self::from_table(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            PsiTag::Power,
            vec![("p".into(), 1.0)],
            None,
        )
        .expect("valid table")
    }

    /// `ψ` sampled from closures on a uniform grid over `[0, r_max]`.
    pub fn from_fn(
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        ddf: impl Fn(f64) -> f64,
        r_max: f64,
        nodes: usize,
        flatten: Option<f64>,
    ) -> Result<Self> {
        let grid: Vec<f64> = (0..nodes).map(|i| r_max * i as f64 / (nodes - 1) as f64).collect();
        Self::from_table(
            grid.clone(),
            grid.iter().map(|&r| f(r)).collect(),
            grid.iter().map(|&r| df(r)).collect(),
            grid.iter().map(|&r| ddf(r)).collect(),
            PsiTag::Custom,
            Vec::new(),
            flatten,
        )
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn r_max(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    fn locate(&self, r: f64) -> usize {
        match self.grid.binary_search_by(|g| g.total_cmp(&r)) {
            Ok(i) => i.min(self.grid.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.grid.len() - 2),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let last = self.grid.len() - 1;
        if r >= self.grid[last] {
            return self.values[last] + self.d1[last] * (r - self.grid[last]);
        }
        let i = self.locate(r);
        let h = self.grid[i + 1] - self.grid[i];
        let s = (r - self.grid[i]) / h;
        hermite(h, s, self.values[i], self.values[i + 1], self.d1[i], self.d1[i + 1])
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let last = self.grid.len() - 1;
        if r >= self.grid[last] {
            return self.d1[last];
        }
        let i = self.locate(r);
        let h = self.grid[i + 1] - self.grid[i];
        let s = (r - self.grid[i]) / h;
        hermite(h, s, self.d1[i], self.d1[i + 1], self.d2[i], self.d2[i + 1])
    }

    pub fn second(&self, r: f64) -> f64 {
        let last = self.grid.len() - 1;
        if r >= self.grid[last] {
            return 0.0;
        }
        let i = self.locate(r);
        let h = self.grid[i + 1] - self.grid[i];
        let s = (r - self.grid[i]) / h;
        self.d2[i] + s * (self.d2[i + 1] - self.d2[i])
    }

    /// Slope of the `ψ` interpolant itself (differs from `deriv` by the
    /// interpolation error only).
    pub fn interpolant_slope(&self, r: f64) -> f64 {
        let last = self.grid.len() - 1;
        if r >= self.grid[last] {
            return self.d1[last];
        }
        let i = self.locate(r);
        let h = self.grid[i + 1] - self.grid[i];
        let s = (r - self.grid[i]) / h;
        hermite_slope(h, s, self.values[i], self.values[i + 1], self.d1[i], self.d1[i + 1])
    }
}
