//! The hierarchy generator `L = A + B` acting on grid families.
//!
//! Per order `n`:
//!
//! ```text
//! (A k)^(n) = -alpha n k^(n)
//! (B k)^(n) = sum_{i=1..n} (a *_i k^(n))
//! ```
//!
//! where `*_i` is the periodic convolution `h^d sum_y a(x_i - y) k(.., y, ..)`
//! in coordinate `i`. Orders never mix, so a truncated family evolves exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::kernel::JumpKernel;
use crate::spectral::AxisConvolver;

/// How coordinate convolutions are computed. Both agree to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionBackend {
    #[default]
    Spectral,
    /// Dense sums with the `S x S` circulant matrix; `O(S^{n+1})` per coordinate.
    Direct,
}

struct Worker {
    /// `None` for the direct backend.
    conv: Option<AxisConvolver>,
}

/// Reusable evaluator of the generator for one kernel.
pub struct Generator<'k> {
    kernel: &'k JumpKernel,
    backend: ConvolutionBackend,
    workers: Vec<Worker>,
    matrix: Option<Vec<f64>>,
}

impl<'k> Generator<'k> {
    pub fn new(kernel: &'k JumpKernel) -> Self {
        Self::with_backend(kernel, ConvolutionBackend::Spectral)
    }

    pub fn with_backend(kernel: &'k JumpKernel, backend: ConvolutionBackend) -> Self {
        let matrix = (backend == ConvolutionBackend::Direct).then(|| kernel.convolution_matrix());
        Self {
            kernel,
            backend,
            workers: Vec::new(),
            matrix,
        }
    }

    pub fn kernel(&self) -> &JumpKernel {
        self.kernel
    }

    pub fn backend(&self) -> ConvolutionBackend {
        self.backend
    }

    fn check(&self, k: &Family) -> Result<()> {
        if k.grid() != self.kernel.grid() {
            return Err(Error::GridMismatch("family and kernel live on different grids".into()));
        }
        if !k.window().is_full() {
            return Err(Error::GridMismatch(
                "the generator acts on families over the whole grid".into(),
            ));
        }
        Ok(())
    }

    fn ensure_workers(&mut self, count: usize) {
        while self.workers.len() < count {
            self.workers.push(Worker {
                conv: (self.backend == ConvolutionBackend::Spectral)
                    .then(|| AxisConvolver::new(self.kernel.grid())),
            });
        }
    }

    /// `L k`.
    pub fn apply(&mut self, k: &Family) -> Result<Family> {
        let mut out = k.clone();
        self.apply_into(k, &mut out)?;
        Ok(out)
    }

    /// `out <- L k`; `out` must share window and order with `k`.
    pub fn apply_into(&mut self, k: &Family, out: &mut Family) -> Result<()> {
        self.run(k, out, true, true)
    }

    /// `(A v, B v)`.
    pub fn apply_parts(&mut self, v: &Family) -> Result<(Family, Family)> {
        let mut a = v.clone();
        let mut b = v.clone();
        self.run(v, &mut a, true, false)?;
        self.run(v, &mut b, false, true)?;
        Ok((a, b))
    }

    fn run(&mut self, k: &Family, out: &mut Family, with_a: bool, with_b: bool) -> Result<()> {
        self.check(k)?;
        k.check_compatible(out)?;
        self.ensure_workers(k.order() + 1);
        let alpha = self.kernel.alpha();
        let mult = self.kernel.multiplier_re();
        let matrix = self.matrix.as_deref();
        let s = k.grid().site_count();
        out.components_mut()
            .par_iter_mut()
            .zip(self.workers.par_iter_mut())
            .enumerate()
            .for_each(|(n, (dst, worker))| {
                let src = k.component(n);
                let diag = if with_a { -alpha * n as f64 } else { 0.0 };
                for (d, &x) in dst.iter_mut().zip(src) {
                    *d = diag * x;
                }
                if !with_b {
                    return;
                }
                for axis in 0..n {
                    match (&mut worker.conv, matrix) {
                        (Some(conv), _) => conv.apply(src, n, axis, mult, dst, true),
                        (None, Some(matrix)) => direct_axis(matrix, s, src, n, axis, dst),
                        (None, None) => unreachable!("direct backend owns a matrix"),
                    }
                }
            });
        Ok(())
    }
}

fn direct_axis(matrix: &[f64], s: usize, src: &[f64], n: usize, axis: usize, dst: &mut [f64]) {
    let inner = s.pow((n - 1 - axis) as u32);
    let block = s * inner;
    for (src_block, dst_block) in src.chunks_exact(block).zip(dst.chunks_exact_mut(block)) {
        for x in 0..s {
            let row = &matrix[x * s..(x + 1) * s];
            let out = &mut dst_block[x * inner..(x + 1) * inner];
            for (y, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let input = &src_block[y * inner..(y + 1) * inner];
                for (o, &i) in out.iter_mut().zip(input) {
                    *o += c * i;
                }
            }
        }
    }
}

/// One-shot `L k` with the spectral backend.
pub fn apply_generator(kernel: &JumpKernel, k: &Family) -> Result<Family> {
    Generator::new(kernel).apply(k)
}
