//! Compensated accumulation in a fixed order.

use crate::C64;

/// Neumaier's variant of Kahan summation.
///
/// Terms must be pushed in a fixed order for results to be reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
    abs: f64,
    count: usize,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
        self.count += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Sum of absolute values of all pushed terms.
    pub fn abs_total(&self) -> f64 {
        self.abs
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Rounding bound for the accumulated value, assuming each pushed term
    /// carries a relative error of at most `term_rel`.
    pub fn error_bound(&self, term_rel: f64) -> f64 {
        let eps = f64::EPSILON;
        (2.0 * eps + term_rel) * self.abs + 2.0 * (self.count as f64) * eps * eps * self.abs
            + eps * self.value().abs()
    }
}

impl Extend<f64> for Compensated {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum over complex terms, real and imaginary parts separately.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedC {
    re: Compensated,
    im: Compensated,
}

impl CompensatedC {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }

    pub fn abs_total(&self) -> f64 {
        self.re.abs_total() + self.im.abs_total()
    }
}

/// Compensated sum of an iterator of reals, in iteration order.
pub fn sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Compensated::new();
    acc.extend(iter);
    acc.value()
}
