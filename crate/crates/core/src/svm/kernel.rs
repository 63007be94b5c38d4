use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Kernels up to this many distinct samples keep every column once computed.
pub const FULL_GRAM_LIMIT: usize = 5000;
/// Column cache budget, in f64 entries, for larger problems.
const CACHE_BUDGET: usize = 32 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn is_valid(&self) -> bool {
        match *self {
            KernelSpec::Linear => true,
            KernelSpec::Rbf { gamma } => gamma > 0.0 && gamma.is_finite(),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                libm::exp(-gamma * d2)
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lazily computed kernel columns over a fixed sample set. Small problems
/// keep all columns; larger ones evict the least recently used column.
#[derive(Debug)]
pub(crate) struct KernelCache<'a> {
    kernel: KernelSpec,
    x: &'a [Vec<f64>],
    diag: Vec<f64>,
    slot_of: Vec<Option<usize>>,
    slots: Vec<(usize, u64, Box<[f64]>)>,
    capacity: usize,
    clock: u64,
}

impl<'a> KernelCache<'a> {
    pub fn new(kernel: KernelSpec, x: &'a [Vec<f64>]) -> Self {
        let n = x.len();
        let capacity = if n <= FULL_GRAM_LIMIT { n } else { (CACHE_BUDGET / n).max(2) };
        KernelCache {
            kernel,
            x,
            diag: x.iter().map(|r| kernel.eval(r, r)).collect(),
            slot_of: alloc::vec![None; n],
            slots: Vec::new(),
            capacity,
            clock: 0,
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// Column `i` of the kernel matrix.
    pub fn column(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        if let Some(s) = self.slot_of[i] {
            self.slots[s].1 = self.clock;
            return &self.slots[s].2;
        }
        let col: Box<[f64]> = self.x.iter().map(|r| self.kernel.eval(&self.x[i], r)).collect();
        let s = if self.slots.len() < self.capacity {
            self.slots.push((i, self.clock, col));
            self.slots.len() - 1
        } else {
            let (s, _) = self
                .slots
                .iter()
                .enumerate()
                .min_by_key(|(_, (_, used, _))| *used)
                .expect("capacity is at least 2");
            self.slot_of[self.slots[s].0] = None;
            self.slots[s] = (i, self.clock, col);
            s
        };
        self.slot_of[i] = Some(s);
        &self.slots[s].2
    }
}
