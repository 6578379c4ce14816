//! Weighted bilateral lattice spaces `ℓ²_w(ℤ)`.
//!
//! Vectors are stored as a finite core on a [`Window`] plus polynomial tails
//! of degree at most two on either side. The exponential weights make every
//! tail summable, and the tail contributions to norms and inner products are
//! evaluated in closed form, so no truncation error enters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{Compensated, CompensatedC};
use crate::C64;

/// Highest tail polynomial degree a [`TailVector`] may carry.
pub const TAIL_DEGREE_CAP: usize = 2;

/// Exponential rates of `w(l) = e^{-a|l|}`, `w'(l) = e^{-b|l|}` and
/// `μ(l) = e^{-γl/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    a: f64,
    b: f64,
    gamma: f64,
}

/// Outcome of [`WeightParams::check_admissible`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    /// `γ > a > b`.
    pub hs_finite: bool,
    /// `γ > a > b` and `sum < 1`.
    pub admissible: bool,
    /// `e^{-(a-b)/2} + e^{-(γ+a)/2}`.
    pub sum: f64,
}

impl WeightParams {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be a positive finite number, got {v}")));
            }
        }
        Ok(Self { a, b, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The μ-ratio `μ(l+1)/μ(l) = e^{-γ/2}`.
    pub fn mu_ratio(&self) -> f64 {
        (-0.5 * self.gamma).exp()
    }

    /// Natural log of [`Self::mu_ratio`], computed without the round trip
    /// through `exp`.
    pub fn ln_mu_ratio(&self) -> f64 {
        -0.5 * self.gamma
    }

    pub fn hs_finite(&self) -> bool {
        self.gamma > self.a && self.a > self.b
    }

    pub fn admissible(&self) -> bool {
        self.check_admissible().admissible
    }

    pub fn check_admissible(&self) -> Admissibility {
        let sum = (-(self.a - self.b) / 2.0).exp() + (-(self.gamma + self.a) / 2.0).exp();
        let hs_finite = self.hs_finite();
        Admissibility { hs_finite, admissible: hs_finite && sum < 1.0, sum }
    }

    /// The first violated inequality of `γ > a > b`, if any.
    pub fn hs_violation(&self) -> Option<&'static str> {
        if !(self.gamma > self.a) {
            Some("γ > a")
        } else if !(self.a > self.b) {
            Some("a > b")
        } else {
            None
        }
    }

    /// Every violated condition of the admissibility hypothesis.
    pub fn admissibility_violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.gamma > self.a) {
            out.push("γ > a");
        }
        if !(self.a > self.b) {
            out.push("a > b");
        }
        if !(self.check_admissible().sum < 1.0) {
            out.push("e^{-(a-b)/2} + e^{-(γ+a)/2} < 1");
        }
        out
    }

    pub fn weight(&self, kind: WeightKind, l: i64) -> f64 {
        self.ln_weight(kind, l).exp()
    }

    pub fn ln_weight(&self, kind: WeightKind, l: i64) -> f64 {
        let l = l as f64;
        match kind {
            WeightKind::W => -self.a * l.abs(),
            WeightKind::WPrime => -self.b * l.abs(),
            WeightKind::Mu => -0.5 * self.gamma * l,
        }
    }
}

impl fmt::Display for WeightParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={}, b={}, γ={}", self.a, self.b, self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightKind {
    W,
    WPrime,
    Mu,
}

/// The two weights that define Hilbert space norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// Source space `ℓ²_w`.
    W,
    /// Target space `ℓ²_{w'}`.
    WPrime,
}

impl NormKind {
    fn rate(self, p: &WeightParams) -> f64 {
        match self {
            NormKind::W => p.a,
            NormKind::WPrime => p.b,
        }
    }

    pub fn weight_kind(self) -> WeightKind {
        match self {
            NormKind::W => WeightKind::W,
            NormKind::WPrime => WeightKind::WPrime,
        }
    }
}

/// Returns `w(l)`, `w'(l)` or `μ(l)`.
pub fn weight_value(p: &WeightParams, kind: WeightKind, l: i64) -> f64 {
    p.weight(kind, l)
}

pub fn check_admissible(p: &WeightParams) -> Admissibility {
    p.check_admissible()
}

/// Closed interval of lattice sites containing the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    l_min: i64,
    l_max: i64,
}

impl Window {
    pub fn new(l_min: i64, l_max: i64) -> Result<Self> {
        if l_min <= 0 && 0 <= l_max {
            Ok(Self { l_min, l_max })
        } else {
            Err(Error::InvalidWindow { l_min, l_max })
        }
    }

    /// `[-half, half]`.
    pub fn symmetric(half: u32) -> Self {
        let h = i64::from(half);
        Self { l_min: -h, l_max: h }
    }

    /// Smallest window containing `[lo, hi]` and the origin.
    pub fn covering(lo: i64, hi: i64) -> Self {
        Self { l_min: lo.min(0), l_max: hi.max(0) }
    }

    pub fn l_min(&self) -> i64 {
        self.l_min
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    pub fn len(&self) -> usize {
        (self.l_max - self.l_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, l: i64) -> bool {
        self.l_min <= l && l <= self.l_max
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.l_min <= other.l_min && other.l_max <= self.l_max
    }

    pub fn union(&self, other: &Window) -> Window {
        Window { l_min: self.l_min.min(other.l_min), l_max: self.l_max.max(other.l_max) }
    }

    pub fn grow(&self, by: i64) -> Window {
        Window { l_min: self.l_min - by, l_max: self.l_max + by }
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<i64> {
        self.l_min..=self.l_max
    }
}

/// Polynomial `c₀ + c₁l + c₂l²` describing a tail.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TailPoly {
    coeffs: [C64; TAIL_DEGREE_CAP + 1],
}

impl TailPoly {
    pub const ZERO: TailPoly = TailPoly { coeffs: [C64::new(0.0, 0.0); TAIL_DEGREE_CAP + 1] };

    pub fn new(coeffs: [C64; TAIL_DEGREE_CAP + 1]) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: C64) -> Self {
        let mut p = Self::ZERO;
        p.coeffs[0] = c;
        p
    }

    pub fn affine(c0: C64, c1: C64) -> Self {
        let mut p = Self::ZERO;
        p.coeffs[0] = c0;
        p.coeffs[1] = c1;
        p
    }

    /// Builds from an arbitrary-length coefficient list, rejecting nonzero
    /// coefficients above the cap.
    pub fn from_slice(coeffs: &[C64]) -> Result<Self> {
        let mut p = Self::ZERO;
        for (k, &c) in coeffs.iter().enumerate() {
            if k <= TAIL_DEGREE_CAP {
                p.coeffs[k] = c;
            } else if c != C64::new(0.0, 0.0) {
                let degree = coeffs.iter().rposition(|c| *c != C64::new(0.0, 0.0)).unwrap_or(0);
                return Err(Error::DegreeOverflow { degree, cap: TAIL_DEGREE_CAP });
            }
        }
        Ok(p)
    }

    pub fn coeffs(&self) -> &[C64; TAIL_DEGREE_CAP + 1] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C64::new(0.0, 0.0))
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != C64::new(0.0, 0.0)).unwrap_or(0)
    }

    pub fn eval(&self, l: i64) -> C64 {
        let l = l as f64;
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * l + c)
    }

    /// Magnitude scale `Σ |c_k| |l|^k`, used for rounding tolerances.
    pub fn scale_at(&self, l: i64) -> f64 {
        let l = (l as f64).abs();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * l + c.norm())
    }

    /// Coefficients of `i ↦ p(origin + dir·i)` as a dense vector.
    pub fn reparam(&self, origin: i64, dir: i64) -> Vec<C64> {
        let o = origin as f64;
        let d = dir as f64;
        let [c0, c1, c2] = self.coeffs;
        // p(o + d i) = c0 + c1 (o + d i) + c2 (o + d i)^2
        vec![c0 + c1 * o + c2 * o * o, c1 * d + c2 * 2.0 * o * d, c2 * d * d]
    }

    pub fn scale(&self, s: C64) -> TailPoly {
        TailPoly { coeffs: self.coeffs.map(|c| c * s) }
    }

    pub fn add(&self, other: &TailPoly) -> TailPoly {
        let mut out = *self;
        for (o, c) in out.coeffs.iter_mut().zip(other.coeffs) {
            *o += c;
        }
        out
    }

    pub fn sub(&self, other: &TailPoly) -> TailPoly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn conj(&self) -> TailPoly {
        TailPoly { coeffs: self.coeffs.map(|c| c.conj()) }
    }

    /// `l ↦ p(l + k)`.
    pub fn shift(&self, k: i64) -> TailPoly {
        let v = self.reparam(k, 1);
        TailPoly { coeffs: [v[0], v[1], v[2]] }
    }

    /// Full product with an affine polynomial `s·l + c`, as a dense list of
    /// length `TAIL_DEGREE_CAP + 2`.
    pub fn mul_affine(&self, s: f64, c: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); TAIL_DEGREE_CAP + 2];
        for (k, &a) in self.coeffs.iter().enumerate() {
            out[k] += a * c;
            out[k + 1] += a * s;
        }
        out
    }
}

/// `Σ_{i≥0} iᵏ xⁱ` for `k = 0..=max_k`.
///
/// Applying `(x d/dx)ᵏ` to `Σ xⁱ = 1/(1-x)` gives `x·Aₖ(x)/(1-x)^{k+1}` for
/// `k ≥ 1`, where `Aₖ` is the Eulerian polynomial with coefficients
/// `A(k, m) = (m+1)A(k-1, m) + (k-m)A(k-1, m-1)`.
pub fn power_geometric_sums(x: f64, max_k: usize) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&x));
    let mut sums = Vec::with_capacity(max_k + 1);
    sums.push(1.0 / (1.0 - x));
    let mut eulerian: Vec<f64> = vec![1.0];
    for k in 1..=max_k {
        if k > 1 {
            let mut next = vec![0.0; k];
            for (m, slot) in next.iter_mut().enumerate() {
                let keep = if m < eulerian.len() { (m as f64 + 1.0) * eulerian[m] } else { 0.0 };
                let carry = if m >= 1 { (k - m) as f64 * eulerian[m - 1] } else { 0.0 };
                *slot = keep + carry;
            }
            eulerian = next;
        }
        let poly = eulerian.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        sums.push(x * poly / (1.0 - x).powi(k as i32 + 1));
    }
    sums
}

/// `Σ_{i≥0} Q(i) xⁱ` for a complex polynomial `Q`, with a rounding bound.
pub fn poly_geometric_sum(q: &[C64], x: f64) -> (C64, f64) {
    if q.is_empty() {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let sums = power_geometric_sums(x, q.len() - 1);
    let mut acc = CompensatedC::new();
    let mut scale = 0.0;
    for (c, s) in q.iter().zip(&sums) {
        acc.add(c * s);
        scale += c.norm() * s;
    }
    let value = acc.value();
    let err = 16.0 * f64::EPSILON * (q.len() as f64 + 2.0) * scale + f64::EPSILON * value.norm();
    (value, err)
}

fn poly_conj_product(p: &[C64], q: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a.conj() * b;
        }
    }
    out
}

/// A value with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error: f64,
    pub squared: f64,
    pub squared_error: f64,
}

impl NormEstimate {
    pub(crate) fn from_squared(squared: f64, squared_error: f64) -> Self {
        let squared = squared.max(0.0);
        let value = squared.sqrt();
        let error = if value > 0.0 { squared_error / value } else { squared_error.sqrt() };
        Self { value, error: error.min(squared_error.sqrt()).max(0.0), squared, squared_error }
    }
}

/// A sequence on `ℤ`: explicit values on a window, polynomials outside.
///
/// The core value at each window edge coincides with the adjacent tail
/// polynomial evaluated there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailVector {
    window: Window,
    core: Vec<C64>,
    left: TailPoly,
    right: TailPoly,
}

impl TailVector {
    /// Validates length and edge continuity (relative tolerance `1e-12`).
    pub fn new(window: Window, core: Vec<C64>, left: TailPoly, right: TailPoly) -> Result<Self> {
        if core.len() != window.len() {
            return Err(Error::CoreLength { expected: window.len(), got: core.len() });
        }
        for (l, poly, value) in [
            (window.l_min, &left, core[0]),
            (window.l_max, &right, core[core.len() - 1]),
        ] {
            let diff = (poly.eval(l) - value).norm();
            let tol = 1e-12 * (1.0 + poly.scale_at(l).max(value.norm()));
            if diff > tol {
                return Err(Error::TailDiscontinuity { l, diff });
            }
        }
        Ok(Self { window, core, left, right })
    }

    /// Builds the vector from `f` on the window interior, with edge values
    /// taken from the tails.
    pub fn from_fn(window: Window, left: TailPoly, right: TailPoly, mut f: impl FnMut(i64) -> C64) -> Self {
        let mut core: Vec<C64> = window.sites().map(&mut f).collect();
        core[0] = left.eval(window.l_min);
        let last = core.len() - 1;
        core[last] = right.eval(window.l_max);
        Self { window, core, left, right }
    }

    pub fn zeros() -> Self {
        Self::constant(C64::new(0.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        let p = TailPoly::constant(c);
        Self { window: Window::symmetric(0), core: vec![c], left: p, right: p }
    }

    /// Value `v` at site `at`, zero elsewhere.
    pub fn spike(at: i64, v: C64) -> Self {
        let window = Window::covering(at - 1, at + 1);
        Self::from_fn(window, TailPoly::ZERO, TailPoly::ZERO, |l| if l == at { v } else { C64::new(0.0, 0.0) })
    }

    /// Finitely supported vector with `values[i]` at site `start + i`.
    pub fn finite(start: i64, values: &[C64]) -> Self {
        let end = start + values.len() as i64 - 1;
        let window = Window::covering(start - 1, end + 1);
        Self::from_fn(window, TailPoly::ZERO, TailPoly::ZERO, |l| {
            if (start..=end).contains(&l) {
                values[(l - start) as usize]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn core(&self) -> &[C64] {
        &self.core
    }

    pub fn left_tail(&self) -> &TailPoly {
        &self.left
    }

    pub fn right_tail(&self) -> &TailPoly {
        &self.right
    }

    pub fn tail_degree(&self) -> usize {
        self.left.degree().max(self.right.degree())
    }

    pub fn get(&self, l: i64) -> C64 {
        if l < self.window.l_min {
            self.left.eval(l)
        } else if l > self.window.l_max {
            self.right.eval(l)
        } else {
            self.core[(l - self.window.l_min) as usize]
        }
    }

    pub fn is_finitely_supported(&self) -> bool {
        self.left.is_zero() && self.right.is_zero()
    }

    /// First and last sites with a nonzero value, for finitely supported
    /// vectors.
    pub fn support(&self) -> Option<(i64, i64)> {
        if !self.is_finitely_supported() {
            return None;
        }
        let zero = C64::new(0.0, 0.0);
        let first = self.core.iter().position(|c| *c != zero)?;
        let last = self.core.iter().rposition(|c| *c != zero)?;
        Some((self.window.l_min + first as i64, self.window.l_min + last as i64))
    }

    /// Same vector on a larger window.
    pub fn expand(&self, window: Window) -> Self {
        let window = window.union(&self.window);
        if window == self.window {
            return self.clone();
        }
        let core = window.sites().map(|l| self.get(l)).collect();
        Self { window, core, left: self.left, right: self.right }
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            window: self.window,
            core: self.core.iter().map(|&c| f(c)).collect(),
            left: TailPoly::new(self.left.coeffs.map(&f)),
            right: TailPoly::new(self.right.coeffs.map(&f)),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            window: self.window,
            core: self.core.iter().map(|&c| c * s).collect(),
            left: self.left.scale(s),
            right: self.right.scale(s),
        }
    }

    fn zip_with(&self, other: &TailVector, sign: f64) -> Self {
        let window = self.window.union(&other.window);
        let left = self.left.add(&other.left.scale(C64::new(sign, 0.0)));
        let right = self.right.add(&other.right.scale(C64::new(sign, 0.0)));
        let core = window.sites().map(|l| self.get(l) + other.get(l) * sign).collect();
        Self { window, core, left, right }
    }

    pub fn add(&self, other: &TailVector) -> Self {
        self.zip_with(other, 1.0)
    }

    pub fn sub(&self, other: &TailVector) -> Self {
        self.zip_with(other, -1.0)
    }

    /// Largest absolute value over the core and the tail coefficients.
    pub fn sup_scale(&self) -> f64 {
        let core = self.core.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let tails = self.left.coeffs.iter().chain(self.right.coeffs.iter()).map(|c| c.norm()).fold(0.0, f64::max);
        core.max(tails)
    }

    /// `⟨self, other⟩ = Σ conj(self(l)) other(l) weight(l)` with closed-form
    /// tails, and a rounding bound.
    pub fn inner(&self, other: &TailVector, p: &WeightParams, kind: NormKind) -> (C64, f64) {
        let window = self.window.union(&other.window);
        let rate = kind.rate(p);
        let x = (-rate).exp();

        let mut core = CompensatedC::new();
        for l in window.sites() {
            core.add(self.get(l).conj() * other.get(l) * (-rate * (l as f64).abs()).exp());
        }
        let core_err = 8.0 * f64::EPSILON * core.abs_total();

        // Right tail: l = l_max + 1 + i with |l| = l.
        let r0 = window.l_max + 1;
        let q = poly_conj_product(&self.right.reparam(r0, 1), &other.right.reparam(r0, 1));
        let (rs, rerr) = poly_geometric_sum(&q, x);
        let rpref = (-rate * r0 as f64).exp();

        // Left tail: l = l_min - 1 - i with |l| = |l_min| + 1 + i.
        let l0 = window.l_min - 1;
        let q = poly_conj_product(&self.left.reparam(l0, -1), &other.left.reparam(l0, -1));
        let (ls, lerr) = poly_geometric_sum(&q, x);
        let lpref = (-rate * (l0 as f64).abs()).exp();

        let value = core.value() + rs * rpref + ls * lpref;
        let err = core_err + rerr * rpref + lerr * lpref + 4.0 * f64::EPSILON * value.norm();
        (value, err)
    }

    /// `‖v‖_w` or `‖v‖_{w'}` with closed-form tails.
    pub fn weighted_norm(&self, p: &WeightParams, kind: NormKind) -> NormEstimate {
        let (sq, err) = self.inner(self, p, kind);
        NormEstimate::from_squared(sq.re, err + sq.im.abs())
    }
}

/// Compensated `Σ_l |v(l)|² weight(l)` over a window only, for callers that
/// want to check the closed form against brute force.
pub fn windowed_norm_sq(v: &TailVector, p: &WeightParams, kind: NormKind, window: Window) -> f64 {
    let mut acc = Compensated::new();
    for l in window.sites() {
        acc.add(v.get(l).norm_sqr() * p.weight(kind.weight_kind(), l));
    }
    acc.value()
}

pub fn weighted_norm(v: &TailVector, p: &WeightParams, kind: NormKind) -> NormEstimate {
    v.weighted_norm(p, kind)
}
