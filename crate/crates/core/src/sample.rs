//! Seeded generators for algebra elements, vectors and perturbed `β`.
//!
//! Everything draws from a `ChaCha8` stream, so a seed reproduces the same
//! samples on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraElement, BetaFunction, CoeffFunction, EventuallyConstant};
use crate::lattice::TailVector;
use crate::operator::FourierVector;
use crate::C64;

/// Largest `|n|` of a sampled Fourier mode.
pub const MAX_MODE: i64 = 3;
/// Largest core width of a sampled coefficient.
pub const MAX_CORE: usize = 8;

/// Generator behind every sampler.
pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the closed unit disk.
pub fn unit_disk<R: Rng>(rng: &mut R) -> C64 {
    let r: f64 = rng.gen::<f64>().sqrt();
    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    C64::from_polar(r, t)
}

/// Eventually constant coefficient with core width at most [`MAX_CORE`]
/// and all values in the unit disk.
pub fn random_coeff<R: Rng>(rng: &mut R) -> CoeffFunction {
    let width = rng.gen_range(1..=MAX_CORE);
    let core_min = rng.gen_range(-4..=4);
    let values: Vec<C64> = (0..width).map(|_| unit_disk(rng)).collect();
    EventuallyConstant::from_core(core_min, values).expect("nonempty core")
}

/// Element with one to three distinct modes in `[−3, 3]`.
pub fn random_element<R: Rng>(rng: &mut R) -> AlgebraElement {
    let count = rng.gen_range(1..=3);
    let mut modes = std::collections::BTreeMap::new();
    while modes.len() < count {
        let n = rng.gen_range(-MAX_MODE..=MAX_MODE);
        let a = random_coeff(rng);
        modes.entry(n).or_insert(a);
    }
    AlgebraElement::from_modes(modes)
}

/// Finitely supported vector on at most `max_width` sites near the origin.
pub fn random_finite_vector<R: Rng>(rng: &mut R, max_width: usize) -> TailVector {
    let width = rng.gen_range(1..=max_width.max(1));
    let start = rng.gen_range(-6..=6);
    let values: Vec<C64> = (0..width).map(|_| unit_disk(rng)).collect();
    TailVector::finite(start, &values)
}

/// Vector in the dense domain: an algebra element applied to the cyclic
/// vector, so its modes have constant tails.
pub fn random_fourier_vector<R: Rng>(rng: &mut R) -> FourierVector {
    FourierVector::from_algebra(&random_element(rng))
}

/// Finitely supported Fourier vector.
pub fn random_finite_fourier_vector<R: Rng>(rng: &mut R, max_width: usize) -> FourierVector {
    let count = rng.gen_range(1..=3);
    FourierVector::from_modes(
        (0..count).map(|_| (rng.gen_range(-MAX_MODE..=MAX_MODE), random_finite_vector(rng, max_width))).collect::<Vec<_>>(),
    )
}

/// `β(l) = l + ½ + 0.3 sin(φ + l)` on `[−4, 4]`, canonical outside.
pub fn random_beta<R: Rng>(rng: &mut R) -> BetaFunction {
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let values: Vec<f64> = (-4..=4).map(|l| 0.5 + 0.3 * (phase + l as f64).sin()).collect();
    let mut values = values;
    values.insert(0, 0.5);
    values.push(0.5);
    let table = EventuallyConstant::from_core(-5, values).expect("nonempty core");
    BetaFunction::perturbed(1.0, table).expect("offset stays in (0.2, 0.8), so beta never vanishes")
}

/// `β(l) = l + ½ + amplitude·sin(l)` for `|l| ≤ half`, canonical outside;
/// a bounded perturbation of the canonical `β`.
pub fn sine_beta(amplitude: f64, half: i64) -> crate::Result<BetaFunction> {
    let values: Vec<f64> =
        (-half - 1..=half + 1).map(|l| if l.abs() <= half { 0.5 + amplitude * (l as f64).sin() } else { 0.5 }).collect();
    BetaFunction::perturbed(1.0, EventuallyConstant::from_core(-half - 1, values)?)
}
