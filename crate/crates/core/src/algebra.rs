//! The dense *-subalgebra of the quantum annulus.
//!
//! Elements are finite sums `Σ Vⁿ aₙ(L)` where each `aₙ: ℤ → ℂ` is constant
//! beyond a finite core on either side. The commutation relation
//! `a(L)Vᵐ = Vᵐa(L+m)` reduces products, adjoints and the derivation
//! `δ(a) = [Vβ(L), a]` to shifts and pointwise arithmetic on coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::C64;

/// A function `ℤ → T` that is constant for `l ≤ core_min` and for
/// `l ≥ core_max`.
///
/// The left and right constants are the first and last core values, so the
/// representation is canonical by construction once trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct EventuallyConstant<T> {
    core_min: i64,
    values: Vec<T>,
}

/// Coefficient of one Fourier mode of an algebra element.
pub type CoeffFunction = EventuallyConstant<C64>;

impl<T: Copy + PartialEq> EventuallyConstant<T> {
    pub fn constant(c: T) -> Self {
        Self { core_min: 0, values: vec![c] }
    }

    /// Function whose value is `values[i]` at `core_min + i`, extended by
    /// the first and last values.
    pub fn from_core(core_min: i64, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Malformed("eventually constant function needs a nonempty core".into()));
        }
        Ok(Self { core_min, values }.trimmed())
    }

    /// Validates that the boundary core values equal the stated constants.
    pub fn from_parts(left: T, right: T, core_min: i64, values: Vec<T>) -> Result<Self> {
        match (values.first(), values.last()) {
            (Some(&first), Some(&last)) if first == left && last == right => Self::from_core(core_min, values),
            (None, _) if left == right => Ok(Self::constant(left)),
            _ => Err(Error::Malformed("core boundary values must equal the tail constants".into())),
        }
    }

    /// `background` everywhere except `value` at `at`.
    pub fn spike(at: i64, value: T, background: T) -> Self {
        Self { core_min: at - 1, values: vec![background, value, background] }.trimmed()
    }

    /// Tabulates `f` on `[lo, hi]` and extends with the end values.
    pub fn tabulate(lo: i64, hi: i64, f: impl Fn(i64) -> T) -> Self {
        assert!(lo <= hi, "empty tabulation range");
        Self { core_min: lo, values: (lo..=hi).map(f).collect() }.trimmed()
    }

    fn trimmed(mut self) -> Self {
        let lead = self.values.windows(2).take_while(|w| w[0] == w[1]).count();
        if lead > 0 {
            self.values.drain(..lead);
            self.core_min += lead as i64;
        }
        while self.values.len() > 1 && self.values[self.values.len() - 1] == self.values[self.values.len() - 2] {
            self.values.pop();
        }
        if self.values.len() == 1 {
            self.core_min = 0;
        }
        self
    }

    pub fn core_min(&self) -> i64 {
        self.core_min
    }

    pub fn core_max(&self) -> i64 {
        self.core_min + self.values.len() as i64 - 1
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn left(&self) -> T {
        self.values[0]
    }

    pub fn right(&self) -> T {
        self.values[self.values.len() - 1]
    }

    pub fn get(&self, l: i64) -> T {
        let idx = (l - self.core_min).clamp(0, self.values.len() as i64 - 1);
        self.values[idx as usize]
    }

    /// `l ↦ self(l + k)`.
    pub fn shift(&self, k: i64) -> Self {
        Self { core_min: self.core_min - k, values: self.values.clone() }.trimmed()
    }

    pub fn map<U: Copy + PartialEq>(&self, f: impl Fn(T) -> U) -> EventuallyConstant<U> {
        EventuallyConstant { core_min: self.core_min, values: self.values.iter().map(|&v| f(v)).collect() }.trimmed()
    }

    pub fn zip_with<U: Copy + PartialEq, V: Copy + PartialEq>(
        &self,
        other: &EventuallyConstant<U>,
        f: impl Fn(T, U) -> V,
    ) -> EventuallyConstant<V> {
        let lo = self.core_min.min(other.core_min());
        let hi = self.core_max().max(other.core_max());
        EventuallyConstant::tabulate(lo, hi, |l| f(self.get(l), other.get(l)))
    }
}

impl CoeffFunction {
    pub fn is_zero(&self) -> bool {
        self.values.len() == 1 && self.values[0] == C64::new(0.0, 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffDoc {
    left: C64,
    right: C64,
    core_min: i64,
    values: Vec<C64>,
}

impl Serialize for CoeffFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoeffDoc { left: self.left(), right: self.right(), core_min: self.core_min, values: self.values.clone() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoeffFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CoeffDoc::deserialize(d)?;
        Self::from_parts(doc.left, doc.right, doc.core_min, doc.values).map_err(serde::de::Error::custom)
    }
}

/// The coefficient sequence `β` of the derivation, written as
/// `β(l) = slope·l + offset(l)` with an eventually constant offset.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFunction {
    slope: f64,
    offset: EventuallyConstant<f64>,
    canonical: bool,
}

impl BetaFunction {
    /// `β(l) = l + 1/2`.
    pub fn canonical() -> Self {
        Self { slope: 1.0, offset: EventuallyConstant::constant(0.5), canonical: true }
    }

    /// `β(l) = slope·l + table(l)`; fails if `β` vanishes anywhere on `ℤ`.
    pub fn perturbed(slope: f64, table: EventuallyConstant<f64>) -> Result<Self> {
        if !(slope.is_finite() && slope != 0.0) {
            return Err(Error::InvalidParams(format!("beta slope must be a nonzero finite number, got {slope}")));
        }
        if table.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("beta table entries must be finite".into()));
        }
        let beta = Self { slope, offset: table, canonical: false };
        beta.validate()?;
        Ok(beta)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.offset.core_min(), self.offset.core_max());
        for l in lo..=hi {
            if self.value(l) == 0.0 {
                return Err(Error::BetaVanishes { l });
            }
        }
        // Outside the core β is affine with one root; test the integers
        // next to it.
        for (c, in_tail) in [
            (self.offset.left(), Box::new(move |l: i64| l < lo) as Box<dyn Fn(i64) -> bool>),
            (self.offset.right(), Box::new(move |l: i64| l > hi)),
        ] {
            let root = -c / self.slope;
            if root.abs() < 9.0e15 {
                for l in [root.floor() as i64, root.ceil() as i64] {
                    if in_tail(l) && self.slope * l as f64 + c == 0.0 {
                        return Err(Error::BetaVanishes { l });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn offset(&self) -> &EventuallyConstant<f64> {
        &self.offset
    }

    pub fn value(&self, l: i64) -> f64 {
        self.slope * l as f64 + self.offset.get(l)
    }

    /// Scales `β` by a nonzero factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let table = self.offset.map(|v| v * factor);
        let mut out = Self::perturbed(self.slope * factor, table)?;
        out.canonical = false;
        Ok(out)
    }

    fn root(&self, c: f64) -> f64 {
        -c / self.slope
    }

    /// Largest `L` such that for every `k ≤ L`, `β(k)` is affine (left
    /// constant offset) and `|β(k)|` does not decrease as `k` decreases.
    pub fn left_regular_limit(&self) -> i64 {
        let r = self.root(self.offset.left());
        let below_root = if r.abs() < 9.0e15 { r.ceil() as i64 - 1 } else { i64::MAX };
        self.offset.core_min().min(below_root)
    }

    /// Smallest `R` such that for every `k ≥ R`, `β(k)` is affine and `|β(k)|`
    /// does not decrease as `k` increases.
    pub fn right_regular_limit(&self) -> i64 {
        let r = self.root(self.offset.right());
        let above_root = if r.abs() < 9.0e15 { r.floor() as i64 + 1 } else { i64::MIN };
        self.offset.core_max().max(above_root)
    }

    /// `sup_{k ≤ l} |β(k)/β(k+shift)|`, when `l` and `l+shift` are both in the
    /// left regular region (where the ratio is monotone and tends to 1).
    pub fn ratio_sup_left(&self, l: i64, shift: i64) -> Option<f64> {
        let lim = self.left_regular_limit();
        (l <= lim && l + shift <= lim).then(|| (self.value(l) / self.value(l + shift)).abs().max(1.0))
    }

    /// `sup_{k ≥ l} |β(k)/β(k+shift)|`, right-hand counterpart of
    /// [`Self::ratio_sup_left`].
    pub fn ratio_sup_right(&self, l: i64, shift: i64) -> Option<f64> {
        let lim = self.right_regular_limit();
        (l >= lim && l + shift >= lim).then(|| (self.value(l) / self.value(l + shift)).abs().max(1.0))
    }
}

/// Finite Fourier sum `Σ Vⁿ aₙ(L)`; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlgebraElement {
    modes: BTreeMap<i64, CoeffFunction>,
}

impl AlgebraElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::diagonal(CoeffFunction::constant(C64::new(1.0, 0.0)))
    }

    /// `Vⁿ`.
    pub fn v_power(n: i64) -> Self {
        Self::term(n, CoeffFunction::constant(C64::new(1.0, 0.0)))
    }

    /// `a(L)`.
    pub fn diagonal(a: CoeffFunction) -> Self {
        Self::term(0, a)
    }

    /// `Vⁿ a(L)`.
    pub fn term(n: i64, a: CoeffFunction) -> Self {
        let mut modes = BTreeMap::new();
        if !a.is_zero() {
            modes.insert(n, a);
        }
        Self { modes }
    }

    pub fn from_modes(modes: impl IntoIterator<Item = (i64, CoeffFunction)>) -> Self {
        let mut out = Self::zero();
        for (n, a) in modes {
            out.accumulate(n, a);
        }
        out
    }

    fn accumulate(&mut self, n: i64, a: CoeffFunction) {
        let merged = match self.modes.remove(&n) {
            Some(prev) => prev.zip_with(&a, |x, y| x + y),
            None => a,
        };
        if !merged.is_zero() {
            self.modes.insert(n, merged);
        }
    }

    pub fn modes(&self) -> &BTreeMap<i64, CoeffFunction> {
        &self.modes
    }

    pub fn coeff(&self, n: i64) -> Option<&CoeffFunction> {
        self.modes.get(&n)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&n, a) in &other.modes {
            out.accumulate(n, a.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_modes(self.modes.iter().map(|(&n, a)| (n, a.map(|v| v * s))))
    }

    /// Largest coefficient magnitude over all modes and sites.
    pub fn sup_norm(&self) -> f64 {
        self.modes.values().map(CoeffFunction::sup_norm).fold(0.0, f64::max)
    }

    /// `(Vⁿa(L))(Vᵐb(L)) = Vⁿ⁺ᵐ a(L+m) b(L)`, extended bilinearly.
    pub fn multiply(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&n, a) in &self.modes {
            for (&m, b) in &other.modes {
                out.accumulate(n + m, a.shift(m).zip_with(b, |x, y| x * y));
            }
        }
        out
    }

    /// `(Vⁿa(L))* = V⁻ⁿ ā(L-n)`.
    pub fn adjoint(&self) -> Self {
        Self::from_modes(self.modes.iter().map(|(&n, a)| (-n, a.shift(-n).map(|v| v.conj()))))
    }

    /// `δ(x) = [Vβ(L), x]`: mode `n` feeds mode `n+1` with coefficient
    /// `β(l+n)aₙ(l) − β(l)aₙ(l+1)`.
    pub fn delta(&self, beta: &BetaFunction) -> Self {
        Self::from_modes(self.modes.iter().map(|(&n, a)| (n + 1, delta_coeff(a, n, beta))))
    }

    /// `ρ_θ`: mode `n` picks up `e^{inθ}`.
    pub fn rotate(&self, theta: f64) -> Self {
        Self::from_modes(self.modes.iter().map(|(&n, a)| {
            let phase = C64::from_polar(1.0, n as f64 * theta);
            (n, a.map(|v| v * phase))
        }))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("algebra element serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Splitting `β(l) = s·l + b(l)` keeps the tails bit-exact constants:
/// `s·l·(a(l) − a(l+1)) + s·n·a(l) + b(l+n)a(l) − b(l)a(l+1)`.
fn delta_coeff(a: &CoeffFunction, n: i64, beta: &BetaFunction) -> CoeffFunction {
    let s = beta.slope();
    let off = beta.offset();
    let lo = [a.core_min() - 1, off.core_min(), off.core_min() - n].into_iter().min().unwrap();
    let hi = [a.core_max(), off.core_max(), off.core_max() - n].into_iter().max().unwrap();
    let sn = s * n as f64;
    CoeffFunction::tabulate(lo, hi, |l| {
        let (a0, a1) = (a.get(l), a.get(l + 1));
        (a0 - a1) * (s * l as f64) + a0 * sn + (a0 * off.get(l + n) - a1 * off.get(l))
    })
}

#[derive(Serialize, Deserialize)]
struct ElementDoc {
    modes: BTreeMap<String, CoeffFunction>,
}

impl Serialize for AlgebraElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementDoc { modes: self.modes.iter().map(|(n, a)| (n.to_string(), a.clone())).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ElementDoc::deserialize(d)?;
        let mut modes = Vec::with_capacity(doc.modes.len());
        for (key, a) in doc.modes {
            let n: i64 = key.parse().map_err(|_| serde::de::Error::custom(format!("mode key {key:?} is not an integer")))?;
            modes.push((n, a));
        }
        Ok(Self::from_modes(modes))
    }
}

pub fn multiply(x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
    x.multiply(y)
}

pub fn adjoint(x: &AlgebraElement) -> AlgebraElement {
    x.adjoint()
}

pub fn derivation_delta(x: &AlgebraElement, beta: &BetaFunction) -> AlgebraElement {
    x.delta(beta)
}

pub fn rotate(x: &AlgebraElement, theta: f64) -> AlgebraElement {
    x.rotate(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn spike(at: i64, v: f64) -> CoeffFunction {
        CoeffFunction::spike(at, c(v), c(0.0))
    }

    #[test]
    fn canonical_representation_trims() {
        let f = CoeffFunction::from_core(-3, vec![c(1.0), c(1.0), c(2.0), c(5.0), c(5.0)]).unwrap();
        assert_eq!(f.core_min(), -2);
        assert_eq!(f.core_max(), 0);
        assert_eq!(f.get(-100), c(1.0));
        assert_eq!(f.get(100), c(5.0));
        assert!(CoeffFunction::from_parts(c(0.0), c(5.0), 0, vec![c(1.0), c(5.0)]).is_err());
    }

    #[test]
    fn shift_composition() {
        let v = AlgebraElement::v_power(1);
        assert_eq!(v.multiply(&v), AlgebraElement::v_power(2));
    }

    #[test]
    fn diagonal_times_shift_moves_spike() {
        let a = AlgebraElement::diagonal(spike(0, 1.0));
        let prod = a.multiply(&AlgebraElement::v_power(1));
        assert_eq!(prod, AlgebraElement::term(1, spike(-1, 1.0)));
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(AlgebraElement::v_power(1).adjoint(), AlgebraElement::v_power(-1));
        let x = AlgebraElement::term(1, spike(0, 1.0));
        assert_eq!(x.adjoint(), AlgebraElement::term(-1, spike(1, 1.0)));
    }

    #[test]
    fn delta_examples() {
        let beta = BetaFunction::canonical();
        assert!(AlgebraElement::one().delta(&beta).is_zero());
        assert_eq!(AlgebraElement::v_power(1).delta(&beta), AlgebraElement::v_power(2));

        let d = AlgebraElement::diagonal(spike(0, 1.0)).delta(&beta);
        let coeff = d.coeff(1).expect("mode 1");
        assert_eq!(d.modes().len(), 1);
        assert_eq!(coeff.get(0), c(0.5));
        assert_eq!(coeff.get(-1), c(0.5));
        for l in [-5, -2, 1, 2, 7] {
            assert_eq!(coeff.get(l), c(0.0));
        }
    }

    #[test]
    fn delta_tails_are_exact_constants() {
        let beta = BetaFunction::canonical();
        let a = CoeffFunction::from_core(-2, vec![c(3.0), c(-1.0), c(0.25), c(7.0)]).unwrap();
        let d = AlgebraElement::term(2, a).delta(&beta);
        let coeff = d.coeff(3).unwrap();
        // β(l+2) − β(l) = 2 in both tails.
        assert_eq!(coeff.left(), c(6.0));
        assert_eq!(coeff.right(), c(14.0));
    }

    #[test]
    fn rotation_examples() {
        let a = AlgebraElement::diagonal(spike(2, 3.0));
        assert_eq!(a.rotate(0.7), a);
        let v = AlgebraElement::v_power(1).rotate(0.7);
        assert_eq!(v, AlgebraElement::v_power(1).scale(C64::from_polar(1.0, 0.7)));
        let x = AlgebraElement::term(-2, spike(1, 1.5)).add(&AlgebraElement::v_power(3));
        assert_eq!(x.rotate(0.0), x);
    }

    #[test]
    fn json_round_trip_and_schema() {
        let x = AlgebraElement::term(-1, CoeffFunction::from_core(0, vec![c(1.0), C64::new(0.0, 2.0), c(3.0)]).unwrap())
            .add(&AlgebraElement::v_power(2));
        let s = x.to_json();
        assert!(s.contains("\"-1\""));
        assert!(s.contains("core_min"));
        assert_eq!(AlgebraElement::from_json(&s).unwrap(), x);
        assert!(AlgebraElement::from_json(r#"{"modes":{"x":{"left":[0,0],"right":[0,0],"core_min":0,"values":[[0,0]]}}}"#).is_err());
        assert!(AlgebraElement::from_json(r#"{"modes":{"1":{"left":[1,0],"right":[0,0],"core_min":0,"values":[[0,0]]}}}"#).is_err());
    }

    #[test]
    fn perturbed_beta_validation() {
        let table = EventuallyConstant::tabulate(-3, 3, |l| if l == 0 { 0.0 } else { 0.5 });
        assert_eq!(BetaFunction::perturbed(1.0, table), Err(Error::BetaVanishes { l: 0 }));
        // Affine tail 2l + 4 vanishes at l = -2, outside the core.
        let table = EventuallyConstant::tabulate(0, 1, |l| if l == 0 { 4.0 } else { 4.5 });
        assert_eq!(BetaFunction::perturbed(2.0, table), Err(Error::BetaVanishes { l: -2 }));
        let table = EventuallyConstant::tabulate(-20, 20, |l| 0.5 + 0.3 * (l as f64).sin());
        assert!(BetaFunction::perturbed(1.0, table).is_ok());
    }

    #[test]
    fn ratio_sup_regions() {
        let beta = BetaFunction::canonical();
        assert_eq!(beta.left_regular_limit(), -1);
        assert_eq!(beta.right_regular_limit(), 0);
        // |β(-10)/β(-7)| = 9.5/6.5 and the ratio tends to 1 from above.
        let s = beta.ratio_sup_left(-10, 3).unwrap();
        assert!((s - 9.5 / 6.5).abs() < 1e-15);
        assert_eq!(beta.ratio_sup_left(-10, -3), Some(1.0));
        assert_eq!(beta.ratio_sup_left(-2, 3), None);
    }
}
