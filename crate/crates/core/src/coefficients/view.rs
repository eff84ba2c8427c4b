/// Read-only view of the particle ensemble that a drift evaluates against.
///
/// Positions are stored row-major (`n × d`). When `subsample` is set, the
/// pairwise averages run over those indices only; moment queries always use
/// the full ensemble.
#[derive(Debug, Clone, Copy)]
pub struct MeasureView<'a> {
    positions: &'a [f64],
    dim: usize,
    subsample: Option<&'a [usize]>,
}

impl<'a> MeasureView<'a> {
    pub fn new(positions: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && positions.len() % dim == 0);
        MeasureView {
            positions,
            dim,
            subsample: None,
        }
    }

    pub fn with_subsample(mut self, indices: &'a [usize]) -> Self {
        self.subsample = Some(indices);
        self
    }

    /// A view of the Dirac mass at `x`.
    pub fn dirac(x: &'a [f64]) -> Self {
        Self::new(x, x.len())
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.positions.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// `μ(f)` for a scalar point function.
    pub fn mean_of(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points().map(f).sum::<f64>() / self.len() as f64
    }

    /// `(1/N) Σ_j k(x, X_j)` accumulated into `out`, for a vector-valued kernel
    /// that writes into its third argument.
    pub fn pairwise_mean(&self, x: &[f64], kernel: impl Fn(&[f64], &[f64], &mut [f64]), out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; out.len()];
        let mut count = 0usize;
        let mut add = |y: &[f64]| {
            kernel(x, y, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
            count += 1;
        };
        match self.subsample {
            Some(idx) => idx.iter().for_each(|&j| add(self.point(j))),
            None => self.points().for_each(&mut add),
        }
        let c = count as f64;
        out.iter_mut().for_each(|v| *v /= c);
    }
}
