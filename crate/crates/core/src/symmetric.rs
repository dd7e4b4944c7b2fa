//! The generator on symmetric families stored once per sorted tuple.
//!
//! For symmetric `k` the convolution in coordinate `i` only needs the lines
//! `y -> k(q, y)` with `q` a sorted `(n-1)`-tuple:
//!
//! ```text
//! (B k)(x_1..x_n) = sum_i C[x without x_i](x_i),   C[q] = a * k(q, .)
//! ```
//!
//! and removing a coordinate from a sorted tuple leaves it sorted, so both the
//! inputs and the outputs of the line convolutions are indexed by sorted tuples.

use crate::error::{Error, Result};
use crate::family::{for_each_tuple, Family};
use crate::generator::{ConvolutionBackend, Generator};
use crate::grid::Window;
use crate::spectral::AxisConvolver;

struct OrderLayout {
    /// Flat tensor index of every sorted tuple, in storage order.
    sorted_flat: Vec<usize>,
    /// Packed index of every tensor entry.
    full_to_packed: Vec<u32>,
    /// Packed index of `sort(q, y)` at `q * S + y`, for `q` a packed `(n-1)`-tuple.
    line_src: Vec<u32>,
    /// Position in the line convolutions of each term, `n` per packed tuple.
    terms: Vec<u32>,
}

fn is_sorted(t: &[usize]) -> bool {
    t.windows(2).all(|w| w[0] <= w[1])
}

fn flat_of(s: usize, t: &[usize]) -> usize {
    t.iter().fold(0, |acc, &i| acc * s + i)
}

fn digits(s: usize, n: usize, mut flat: usize) -> Vec<usize> {
    let mut t = vec![0; n];
    for slot in t.iter_mut().rev() {
        *slot = flat % s;
        flat /= s;
    }
    t
}

impl OrderLayout {
    fn build(s: usize, n: usize, prev: Option<&OrderLayout>) -> Result<Self> {
        let len = s.pow(n as u32);
        if len > u32::MAX as usize {
            return Err(Error::Capacity(format!("order-{n} tensor too large for packed indexing")));
        }
        let mut sorted_flat = Vec::new();
        let mut full_to_packed = vec![0u32; len];
        for_each_tuple(s, n, |flat, t| {
            if is_sorted(t) {
                full_to_packed[flat] = sorted_flat.len() as u32;
                sorted_flat.push(flat);
            }
        });
        let mut key = vec![0; n];
        for_each_tuple(s, n, |flat, t| {
            if !is_sorted(t) {
                key.copy_from_slice(t);
                key.sort_unstable();
                full_to_packed[flat] = full_to_packed[flat_of(s, &key)];
            }
        });
        let (line_src, terms) = match prev {
            None => (Vec::new(), Vec::new()),
            Some(prev) => {
                let mut line_src = Vec::with_capacity(prev.sorted_flat.len() * s);
                for &q in &prev.sorted_flat {
                    for y in 0..s {
                        line_src.push(full_to_packed[q * s + y]);
                    }
                }
                let mut terms = Vec::with_capacity(sorted_flat.len() * n);
                let mut rest = Vec::with_capacity(n);
                for &flat in &sorted_flat {
                    let t = digits(s, n, flat);
                    for i in 0..n {
                        rest.clear();
                        rest.extend(t.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
                        let q = prev.full_to_packed[flat_of(s, &rest)] as usize;
                        terms.push((q * s + t[i]) as u32);
                    }
                }
                (line_src, terms)
            }
        };
        Ok(Self {
            sorted_flat,
            full_to_packed,
            line_src,
            terms,
        })
    }
}

/// `L` on packed symmetric families of a fixed order.
pub(crate) struct SymmetricGenerator {
    sites: usize,
    alpha: f64,
    mult: Vec<f64>,
    conv: Option<AxisConvolver>,
    matrix: Option<Vec<f64>>,
    layouts: Vec<OrderLayout>,
    lines: Vec<f64>,
    convolved: Vec<f64>,
}

impl SymmetricGenerator {
    pub(crate) fn new(generator: &Generator<'_>, order: usize) -> Result<Self> {
        let kernel = generator.kernel();
        let s = kernel.grid().site_count();
        let mut layouts: Vec<OrderLayout> = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let layout = OrderLayout::build(s, n, layouts.last())?;
            layouts.push(layout);
        }
        let spectral = generator.backend() == ConvolutionBackend::Spectral;
        Ok(Self {
            sites: s,
            alpha: kernel.alpha(),
            mult: kernel.multiplier_re().to_vec(),
            conv: spectral.then(|| AxisConvolver::new(kernel.grid())),
            matrix: (!spectral).then(|| kernel.convolution_matrix()),
            layouts,
            lines: Vec::new(),
            convolved: Vec::new(),
        })
    }

    pub(crate) fn pack(&self, family: &Family) -> Vec<Vec<f64>> {
        self.layouts
            .iter()
            .enumerate()
            .map(|(n, layout)| {
                let comp = family.component(n);
                layout.sorted_flat.iter().map(|&f| comp[f]).collect()
            })
            .collect()
    }

    pub(crate) fn unpack(&self, packed: &[Vec<f64>], window: Window) -> Result<Family> {
        let components = self
            .layouts
            .iter()
            .zip(packed)
            .map(|(layout, p)| layout.full_to_packed.iter().map(|&j| p[j as usize]).collect())
            .collect();
        Family::from_components(window, components)
    }

    /// `out <- L x` on packed components.
    pub(crate) fn apply(&mut self, x: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let s = self.sites;
        out[0][0] = 0.0;
        for n in 1..self.layouts.len() {
            let layout = &self.layouts[n];
            let src = &x[n];
            self.lines.clear();
            self.lines.extend(layout.line_src.iter().map(|&j| src[j as usize]));
            self.convolved.resize(self.lines.len(), 0.0);
            match (&mut self.conv, &self.matrix) {
                (Some(conv), _) => conv.apply_lines(&self.lines, &self.mult, &mut self.convolved),
                (None, Some(matrix)) => {
                    for (line, dst) in self.lines.chunks_exact(s).zip(self.convolved.chunks_exact_mut(s)) {
                        for (row, d) in matrix.chunks_exact(s).zip(dst.iter_mut()) {
                            *d = row.iter().zip(line).map(|(a, b)| a * b).sum();
                        }
                    }
                }
                (None, None) => unreachable!("direct backend owns a matrix"),
            }
            let diag = -self.alpha * n as f64;
            let c = &self.convolved;
            for ((o, &v), terms) in out[n].iter_mut().zip(src).zip(layout.terms.chunks_exact(n)) {
                *o = diag * v + terms.iter().map(|&t| c[t as usize]).sum::<f64>();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::kernel::{make_kernel, KernelShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn packed_generator_matches_full_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (d, m, order) in [(1, 8, 4), (2, 4, 3), (1, 5, 1)] {
            let grid = GridSpec::with_extent(d, m, 1.0).unwrap();
            let kernel = make_kernel(&KernelShape::Gaussian { sigma: 0.1 }, 0.9, grid).unwrap();
            let k = Family::random_symmetric(Window::full(grid), order, -1.0, 1.0, false, &mut rng).unwrap();
            for backend in [ConvolutionBackend::Spectral, ConvolutionBackend::Direct] {
                let mut gen = Generator::with_backend(&kernel, backend);
                let full = gen.apply(&k).unwrap();
                let mut sym = SymmetricGenerator::new(&gen, order).unwrap();
                let x = sym.pack(&k);
                let mut out = x.clone();
                sym.apply(&x, &mut out);
                let back = sym.unpack(&out, Window::full(grid)).unwrap();
                assert!(back.sup_diff(&full).unwrap() < 1e-13);
            }
        }
    }

    #[test]
    fn pack_unpack_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = GridSpec::with_extent(1, 6, 1.0).unwrap();
        let kernel = make_kernel(&KernelShape::Gaussian { sigma: 0.05 }, 1.0, grid).unwrap();
        let k = Family::random_symmetric(Window::full(grid), 3, 0.0, 1.0, false, &mut rng).unwrap();
        let sym = SymmetricGenerator::new(&Generator::new(&kernel), 3).unwrap();
        let packed = sym.pack(&k);
        assert_eq!(packed[3].len(), 56);
        assert_eq!(sym.unpack(&packed, Window::full(grid)).unwrap(), k);
    }
}
