//! Periodic convolution along single tensor coordinates via FFT.
//!
//! A coordinate of a grid tensor ranges over `S = M^d` sites; convolving along
//! it is a `d`-dimensional periodic convolution, done as a `d`-dimensional DFT,
//! a pointwise product with a real multiplier, and the inverse DFT. All
//! multipliers used here are real (symmetric kernels), so two real lines are
//! packed into one complex transform.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

const BATCH_PAIRS: usize = 32;

/// In-place `d`-dimensional DFT over consecutive site blocks of a buffer.
pub(crate) struct SiteFft {
    dim: usize,
    m: usize,
    sites: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl SiteFft {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let m = grid.sites_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            dim: grid.dimension(),
            m,
            sites: grid.site_count(),
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            line: vec![Complex64::default(); m],
        }
    }

    pub(crate) fn sites(&self) -> usize {
        self.sites
    }

    /// Unnormalized transform of every `S`-block of `buf`.
    pub(crate) fn transform(&mut self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len() % self.sites, 0);
        let fft = if inverse { &self.inverse } else { &self.forward };
        let m = self.m;
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(buf, &mut self.scratch);
                continue;
            }
            let outer = self.sites / (m * stride);
            for block in buf.chunks_exact_mut(self.sites) {
                for o in 0..outer {
                    for inner in 0..stride {
                        let base = o * m * stride + inner;
                        for (j, c) in self.line.iter_mut().enumerate() {
                            *c = block[base + j * stride];
                        }
                        fft.process_with_scratch(&mut self.line, &mut self.scratch);
                        for (j, c) in self.line.iter().enumerate() {
                            block[base + j * stride] = *c;
                        }
                    }
                }
            }
        }
    }
}

/// Convolves grid tensors along one coordinate with a real spectral multiplier.
pub(crate) struct AxisConvolver {
    fft: SiteFft,
    batch: Vec<Complex64>,
    scaled: Vec<f64>,
}

impl AxisConvolver {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let fft = SiteFft::new(grid);
        let s = fft.sites();
        Self {
            fft,
            batch: vec![Complex64::default(); BATCH_PAIRS * s],
            scaled: vec![0.0; s],
        }
    }

    /// `out (+)= IDFT(mult * DFT(data))` along coordinate `axis` of an order-`n` tensor.
    pub(crate) fn apply(
        &mut self,
        data: &[f64],
        n: usize,
        axis: usize,
        mult: &[f64],
        out: &mut [f64],
        accumulate: bool,
    ) {
        let s = self.fft.sites();
        debug_assert!(axis < n);
        debug_assert_eq!(data.len(), s.pow(n as u32));
        self.apply_strided(data, s.pow((n - 1 - axis) as u32), mult, out, accumulate);
    }

    /// Overwrites `out` with the convolution of every consecutive `S`-block of `data`.
    pub(crate) fn apply_lines(&mut self, data: &[f64], mult: &[f64], out: &mut [f64]) {
        debug_assert_eq!(data.len() % self.fft.sites(), 0);
        self.apply_strided(data, 1, mult, out, false);
    }

    /// Lines run over `S` sites with stride `inner`.
    fn apply_strided(&mut self, data: &[f64], inner: usize, mult: &[f64], out: &mut [f64], accumulate: bool) {
        let s = self.fft.sites();
        debug_assert_eq!(out.len(), data.len());
        let inv = 1.0 / s as f64;
        for (dst, &src) in self.scaled.iter_mut().zip(mult) {
            *dst = src * inv;
        }
        let lines = data.len() / s;
        let start_of = |line: usize| (line / inner) * s * inner + line % inner;

        let mut line = 0;
        while line < lines {
            let pairs = ((lines - line).div_ceil(2)).min(BATCH_PAIRS);
            let buf = &mut self.batch[..pairs * s];
            for p in 0..pairs {
                let a = start_of(line + 2 * p);
                let b = (line + 2 * p + 1 < lines).then(|| start_of(line + 2 * p + 1));
                let chunk = &mut buf[p * s..(p + 1) * s];
                match b {
                    Some(b) if inner == 1 => {
                        for ((c, &re), &im) in chunk.iter_mut().zip(&data[a..a + s]).zip(&data[b..b + s]) {
                            *c = Complex64::new(re, im);
                        }
                    }
                    _ => {
                        for (x, c) in chunk.iter_mut().enumerate() {
                            let re = data[a + x * inner];
                            let im = b.map_or(0.0, |b| data[b + x * inner]);
                            *c = Complex64::new(re, im);
                        }
                    }
                }
            }
            self.fft.transform(buf, false);
            for chunk in buf.chunks_exact_mut(s) {
                for (c, &w) in chunk.iter_mut().zip(&self.scaled) {
                    *c *= w;
                }
            }
            self.fft.transform(buf, true);
            for p in 0..pairs {
                let a = start_of(line + 2 * p);
                let b = (line + 2 * p + 1 < lines).then(|| start_of(line + 2 * p + 1));
                let chunk = &buf[p * s..(p + 1) * s];
                if let (Some(b), 1, false) = (b, inner, accumulate) {
                    for (x, c) in chunk.iter().enumerate() {
                        out[a + x] = c.re;
                        out[b + x] = c.im;
                    }
                    continue;
                }
                for (x, c) in chunk.iter().enumerate() {
                    if accumulate {
                        out[a + x * inner] += c.re;
                    } else {
                        out[a + x * inner] = c.re;
                    }
                    if let Some(b) = b {
                        if accumulate {
                            out[b + x * inner] += c.im;
                        } else {
                            out[b + x * inner] = c.im;
                        }
                    }
                }
            }
            line += 2 * pairs;
        }
    }
}

/// Forward DFT of one grid function.
pub(crate) fn dft(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut fft = SiteFft::new(grid);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.transform(&mut buf, false);
    buf
}
