//! The implementation `D: H_w → H_{w'}` assembled from its modes.
//!
//! A vector `f = Σ Vⁿ fₙ(L)` of the GNS space is a finite family of lattice
//! sequences, with `‖f‖² = Σₙ ‖fₙ‖²_w`. `D` sends mode `n` to mode `n+1` via
//! `Dₙ`. Truncations are expressed in the orthonormal bases
//! `ε_l = w(l)^{−1/2}e_l` and `ε'_l = w'(l)^{−1/2}e_l`: if `T e_l = Σ t(l',l) e_{l'}`
//! then `T ε_l = Σ t(l',l) sqrt(w'(l')/w(l)) ε'_{l'}`, so the rescaled matrix
//! has the singular values of `T` between the weighted spaces.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{AlgebraElement, BetaFunction, CoeffFunction};
use crate::error::{Error, Result};
use crate::lattice::{NormEstimate, NormKind, TailPoly, TailVector, WeightKind, WeightParams, Window};
use crate::modes::{apply_dn, qn_kernel, ModeOperatorSpec};
use crate::C64;

/// Largest number of sites per mode block accepted for dense SVD.
pub const MAX_BLOCK_SITES: usize = 1201;

/// A finite family of mode coefficients `fₙ`; zero modes are dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierVector {
    modes: BTreeMap<i64, TailVector>,
}

impl FourierVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(n: i64, v: TailVector) -> Self {
        Self::from_modes([(n, v)])
    }

    pub fn from_modes(modes: impl IntoIterator<Item = (i64, TailVector)>) -> Self {
        let mut out = Self::zero();
        for (n, v) in modes {
            out.accumulate(n, v);
        }
        out
    }

    fn accumulate(&mut self, n: i64, v: TailVector) {
        let merged = match self.modes.remove(&n) {
            Some(prev) => prev.add(&v),
            None => v,
        };
        if merged.sup_scale() != 0.0 {
            self.modes.insert(n, merged);
        }
    }

    /// The vector `π(x)1` of an algebra element.
    pub fn from_algebra(x: &AlgebraElement) -> Self {
        Self::from_modes(x.modes().iter().map(|(&n, a)| (n, coeff_to_vector(a))))
    }

    pub fn modes(&self) -> &BTreeMap<i64, TailVector> {
        &self.modes
    }

    pub fn mode(&self, n: i64) -> Option<&TailVector> {
        self.modes.get(&n)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&n, v) in &other.modes {
            out.accumulate(n, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_modes(self.modes.iter().map(|(&n, v)| (n, v.scale(s))))
    }

    /// `sqrt(Σₙ ‖fₙ‖²)` in `ℓ²_w` or `ℓ²_{w'}`.
    pub fn norm(&self, p: &WeightParams, kind: NormKind) -> NormEstimate {
        let (mut sq, mut err) = (0.0, 0.0);
        for v in self.modes.values() {
            let e = v.weighted_norm(p, kind);
            sq += e.squared;
            err += e.squared_error;
        }
        NormEstimate::from_squared(sq, err + 2.0 * f64::EPSILON * sq)
    }

    /// `V_θ`: mode `n` picks up `e^{inθ}`.
    pub fn rotate(&self, theta: f64) -> Self {
        Self::from_modes(self.modes.iter().map(|(&n, v)| (n, v.scale(C64::from_polar(1.0, n as f64 * theta)))))
    }

    /// `π(x)f` with `(Vⁿa(L))(Vᵐh(L)) = Vⁿ⁺ᵐ a(L+m)h(L)`.
    pub fn left_multiply(&self, x: &AlgebraElement) -> Self {
        let mut out = Self::zero();
        for (&n, a) in x.modes() {
            for (&m, h) in &self.modes {
                out.accumulate(n + m, multiply_pointwise(h, &a.shift(m)));
            }
        }
        out
    }
}

/// Eventually constant coefficient as a vector with constant tails.
pub fn coeff_to_vector(a: &CoeffFunction) -> TailVector {
    let window = Window::covering(a.core_min(), a.core_max());
    TailVector::from_fn(window, TailPoly::constant(a.left()), TailPoly::constant(a.right()), |l| a.get(l))
}

/// `l ↦ h(l)a(l)`; the window covers the core of `a`, so the tails stay
/// polynomial of the same degree.
fn multiply_pointwise(h: &TailVector, a: &CoeffFunction) -> TailVector {
    let window = h.window().union(&Window::covering(a.core_min(), a.core_max()));
    let h = h.expand(window);
    TailVector::from_fn(window, h.left_tail().scale(a.left()), h.right_tail().scale(a.right()), |l| h.get(l) * a.get(l))
}

/// `Df = Σ V^{n+1} Dₙfₙ`.
pub fn apply_d(f: &FourierVector, beta: &BetaFunction, params: &WeightParams) -> Result<FourierVector> {
    let mut out = Vec::with_capacity(f.modes.len());
    for (&n, v) in &f.modes {
        out.push((n + 1, apply_dn(v, &ModeOperatorSpec::new(n, beta.clone(), *params))?));
    }
    Ok(FourierVector::from_modes(out))
}

/// The intertwiner: identity on coefficients, read in `H_{w'}` afterwards.
pub fn intertwine(f: &FourierVector) -> FourierVector {
    f.clone()
}

/// Residual of an identity check together with the size of the terms it
/// compares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub residual: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

/// `‖D(af) − a·Df − δ(a)·i(f)‖_{w'}` for `a, f` in the algebra.
pub fn check_implementation_identity(
    a: &AlgebraElement,
    f: &AlgebraElement,
    beta: &BetaFunction,
    params: &WeightParams,
) -> Result<Residual> {
    let fv = FourierVector::from_algebra(f);
    let lhs = apply_d(&FourierVector::from_algebra(&a.multiply(f)), beta, params)?;
    let a_df = apply_d(&fv, beta, params)?.left_multiply(a);
    let delta_f = intertwine(&fv).left_multiply(&a.delta(beta));
    let residual = lhs.sub(&a_df).sub(&delta_f).norm(params, NormKind::WPrime).value;
    let scale = [&lhs, &a_df, &delta_f].iter().map(|v| v.norm(params, NormKind::WPrime).value).sum();
    Ok(Residual { residual, scale })
}

/// `‖V_θ D V_θ^{−1} f − e^{iθ} D f‖_{w'}`.
pub fn check_covariance(f: &FourierVector, theta: f64, beta: &BetaFunction, params: &WeightParams) -> Result<Residual> {
    let df = apply_d(f, beta, params)?;
    let lhs = apply_d(&f.rotate(-theta), beta, params)?.rotate(theta);
    let rhs = df.scale(C64::from_polar(1.0, theta));
    let residual = lhs.sub(&rhs).norm(params, NormKind::WPrime).value;
    Ok(Residual { residual, scale: rhs.norm(params, NormKind::WPrime).value })
}

/// Which operator a truncation compresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    /// `Dₙ` from `ℓ²_w` to `ℓ²_{w'}`.
    D,
    /// `Qₙ` from `ℓ²_{w'}` to `ℓ²_w`.
    Q,
}

/// Block-diagonal compression over modes, one square block per mode on a
/// common set of sites, in orthonormal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    kind: OperatorKind,
    sites: RangeInclusive<i64>,
    blocks: Vec<(i64, DMatrix<f64>)>,
}

impl TruncatedOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn sites(&self) -> RangeInclusive<i64> {
        self.sites.clone()
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        self.blocks.iter().map(|(n, _)| *n)
    }

    pub fn block(&self, n: i64) -> Option<&DMatrix<f64>> {
        self.blocks.iter().find(|(m, _)| *m == n).map(|(_, b)| b)
    }

    pub fn blocks(&self) -> &[(i64, DMatrix<f64>)] {
        &self.blocks
    }

    /// Total rows (equal to total columns).
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(_, b)| b.nrows()).sum()
    }

    /// Entry of the mode-`n` block at sites `(row, col)`.
    pub fn entry(&self, n: i64, row: i64, col: i64) -> f64 {
        let lo = *self.sites.start();
        self.block(n).map_or(0.0, |b| b[((row - lo) as usize, (col - lo) as usize)])
    }
}

fn site_count(sites: &RangeInclusive<i64>) -> usize {
    if sites.is_empty() {
        0
    } else {
        (sites.end() - sites.start() + 1) as usize
    }
}

fn check_size(sites: &RangeInclusive<i64>) -> Result<usize> {
    let size = site_count(sites);
    if size > MAX_BLOCK_SITES {
        return Err(Error::TooLarge { size, cap: MAX_BLOCK_SITES, suggested: (MAX_BLOCK_SITES as i64 - 1) / 2 });
    }
    Ok(size)
}

fn assemble(
    kind: OperatorKind,
    sites: RangeInclusive<i64>,
    modes: RangeInclusive<i64>,
    entry: impl Fn(i64, i64, i64) -> f64 + Sync,
) -> Result<TruncatedOperator> {
    let size = check_size(&sites)?;
    let lo = *sites.start();
    let modes: Vec<i64> = modes.collect();
    let blocks = modes
        .par_iter()
        .map(|&n| (n, DMatrix::from_fn(size, size, |r, c| entry(n, lo + r as i64, lo + c as i64))))
        .collect();
    Ok(TruncatedOperator { kind, sites, blocks })
}

/// Compression of `⊕ₙ Dₙ` to `sites × sites` for each mode in `modes`.
pub fn assemble_d_matrix(
    sites: RangeInclusive<i64>,
    modes: RangeInclusive<i64>,
    beta: &BetaFunction,
    params: &WeightParams,
) -> Result<TruncatedOperator> {
    let x = params.mu_ratio();
    assemble(OperatorKind::D, sites, modes, |n, row, col| {
        let raw = if col == row {
            beta.value(row + n)
        } else if col == row + 1 {
            -x * beta.value(row)
        } else {
            return 0.0;
        };
        raw * (0.5 * (params.ln_weight(WeightKind::WPrime, row) - params.ln_weight(WeightKind::W, col))).exp()
    })
}

/// Compression of `⊕ₙ Qₙ` to `sites × sites` for each mode in `modes`.
pub fn assemble_q_matrix(
    sites: RangeInclusive<i64>,
    modes: RangeInclusive<i64>,
    beta: &BetaFunction,
    params: &WeightParams,
) -> Result<TruncatedOperator> {
    assemble(OperatorKind::Q, sites, modes, |n, row, col| {
        if col < row {
            return 0.0;
        }
        let spec = ModeOperatorSpec::new(n, beta.clone(), *params);
        let k = qn_kernel(&spec, row, col);
        let scale = 0.5 * (params.ln_weight(WeightKind::W, row) - params.ln_weight(WeightKind::WPrime, col));
        f64::from(k.sign) * (k.log_magnitude + scale).exp()
    })
}

/// Singular values of every block, merged in descending order.
pub fn singular_values(t: &TruncatedOperator) -> Vec<f64> {
    let mut out: Vec<f64> = t
        .blocks
        .par_iter()
        .flat_map_iter(|(_, b)| {
            if b.is_empty() {
                Vec::new()
            } else {
                b.clone().svd(false, false).singular_values.iter().copied().collect()
            }
        })
        .collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// `[[0, B], [B*, 0]]` per mode block, with grading `+1` on the source copy
/// and `−1` on the target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDirac {
    blocks: Vec<(i64, DMatrix<f64>)>,
}

impl BlockDirac {
    pub fn new(t: &TruncatedOperator) -> Self {
        let blocks = t
            .blocks
            .iter()
            .map(|(n, b)| {
                let (r, c) = b.shape();
                let mut m = DMatrix::zeros(r + c, r + c);
                m.view_mut((0, r), (r, c)).copy_from(b);
                m.view_mut((r, 0), (c, r)).copy_from(&b.transpose());
                (*n, m)
            })
            .collect();
        Self { blocks }
    }

    pub fn blocks(&self) -> &[(i64, DMatrix<f64>)] {
        &self.blocks
    }

    /// Diagonal of `Γ` for the block of mode `n`.
    pub fn grading(&self, n: i64) -> Vec<i8> {
        self.blocks
            .iter()
            .find(|(m, _)| *m == n)
            .map(|(_, b)| {
                let half = b.nrows() / 2;
                (0..b.nrows()).map(|i| if i < half { 1 } else { -1 }).collect()
            })
            .unwrap_or_default()
    }

    /// `‖ΓD + DΓ‖_max` and `‖D − Dᵀ‖_max` over all blocks.
    pub fn oddness_and_symmetry_defects(&self) -> (f64, f64) {
        let (mut odd, mut sym) = (0.0f64, 0.0f64);
        for (n, m) in &self.blocks {
            let g = self.grading(*n);
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    odd = odd.max((f64::from(g[r]) * m[(r, c)] + m[(r, c)] * f64::from(g[c])).abs());
                    sym = sym.max((m[(r, c)] - m[(c, r)]).abs());
                }
            }
        }
        (odd, sym)
    }

    /// All eigenvalues, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .blocks
            .par_iter()
            .flat_map_iter(|(_, m)| {
                if m.is_empty() {
                    Vec::new()
                } else {
                    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
                }
            })
            .collect();
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }
}

pub fn block_dirac_spectrum(t: &TruncatedOperator) -> Vec<f64> {
    BlockDirac::new(t).spectrum()
}

/// Largest distance between the spectrum and its negation, after sorting.
pub fn spectrum_asymmetry(spectrum: &[f64]) -> f64 {
    let k = spectrum.len();
    (0..k).map(|i| (spectrum[i] + spectrum[k - 1 - i]).abs()).fold(0.0, f64::max)
}

/// Largest distance between the block Dirac spectrum and `±σ`.
pub fn dirac_singular_mismatch(spectrum: &[f64], sigma: &[f64]) -> f64 {
    let mut expected: Vec<f64> = sigma.iter().flat_map(|&s| [s, -s]).collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    if expected.len() != spectrum.len() {
        return f64::INFINITY;
    }
    expected.iter().zip(spectrum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// One point of the closure experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosurePoint {
    pub n: i64,
    pub norm: f64,
    pub error: f64,
}

/// `‖D(χ_N) − D(1)‖_{w'}` for each `N`, where `χ_N` is the indicator of
/// `[−N, N]`.
pub fn closure_approx_check(ns: &[i64], beta: &BetaFunction, params: &WeightParams) -> Result<Vec<ClosurePoint>> {
    let spec = ModeOperatorSpec::new(0, beta.clone(), *params);
    ns.iter()
        .map(|&n| {
            if n < 0 {
                return Err(Error::OutOfRange { what: "closure cutoff", detail: format!("N = {n} must be nonnegative") });
            }
            // χ_N − 1 vanishes on [−N, N] and equals −1 outside.
            let minus_one = TailPoly::constant(C64::new(-1.0, 0.0));
            let window = Window::symmetric(n as u32 + 1);
            let diff = TailVector::from_fn(window, minus_one, minus_one, |l| {
                if l.abs() <= n {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(-1.0, 0.0)
                }
            });
            let est = apply_dn(&diff, &spec)?.weighted_norm(params, NormKind::WPrime);
            Ok(ClosurePoint { n, norm: est.value, error: est.error })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> WeightParams {
        WeightParams::new(2.0, 1.0, 3.0).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn d_of_one_and_v() {
        let p = params();
        let beta = BetaFunction::canonical();
        let x = p.mu_ratio();
        let d1 = apply_d(&FourierVector::from_algebra(&AlgebraElement::one()), &beta, &p).unwrap();
        assert_eq!(d1.modes().keys().copied().collect::<Vec<_>>(), vec![1]);
        for l in [-30, -1, 0, 4, 100] {
            assert_relative_eq!(d1.mode(1).unwrap().get(l).re, (1.0 - x) * (l as f64 + 0.5), max_relative = 1e-13);
        }
        let dv = apply_d(&FourierVector::from_algebra(&AlgebraElement::v_power(1)), &beta, &p).unwrap();
        for l in [-30, -1, 0, 4, 100] {
            assert_relative_eq!(dv.mode(2).unwrap().get(l).re, (l as f64 + 1.5) - x * (l as f64 + 0.5), max_relative = 1e-13);
        }
        assert!(apply_d(&FourierVector::zero(), &beta, &p).unwrap().is_zero());
    }

    #[test]
    fn intertwiner_changes_only_the_weight() {
        let p = params();
        let f = FourierVector::single(0, TailVector::spike(1, c(1.0)));
        let g = intertwine(&f);
        assert_eq!(f, g);
        assert_relative_eq!(f.norm(&p, NormKind::W).value, (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(g.norm(&p, NormKind::WPrime).value, (-0.5f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn implementation_identity_exact_example() {
        let r = check_implementation_identity(
            &AlgebraElement::v_power(1),
            &AlgebraElement::one(),
            &BetaFunction::canonical(),
            &params(),
        )
        .unwrap();
        assert!(r.residual <= 1e-15 * r.scale, "{r:?}");
    }

    #[test]
    fn covariance_single_mode_is_exact() {
        let f = FourierVector::single(3, TailVector::finite(-2, &[c(1.0), c(-0.5), c(2.0)]));
        let r = check_covariance(&f, 0.9, &BetaFunction::canonical(), &params()).unwrap();
        assert!(r.residual <= 1e-15 * r.scale);
    }

    #[test]
    fn d_matrix_examples() {
        let p = params();
        let beta = BetaFunction::canonical();
        let t = assemble_d_matrix(0..=0, 0..=0, &beta, &p).unwrap();
        assert_eq!(t.entry(0, 0, 0), 0.5);
        assert_eq!(singular_values(&t), vec![0.5]);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = assemble_d_matrix(1..=0, 0..=0, &beta, &p).unwrap();
        assert_eq!(empty.dim(), 0);
        assert!(singular_values(&empty).is_empty());
    }

    #[test]
    fn d_matrix_matches_dn_on_spikes() {
        let p = params();
        let beta = BetaFunction::canonical();
        let t = assemble_d_matrix(-4..=4, -2..=2, &beta, &p).unwrap();
        for n in -2..=2 {
            let spec = ModeOperatorSpec::new(n, beta.clone(), p);
            for col in -4..=4 {
                let img = apply_dn(&TailVector::spike(col, c(1.0)), &spec).unwrap();
                for row in -4..=4 {
                    let want = img.get(row).re * (p.weight(WeightKind::WPrime, row) / p.weight(WeightKind::W, col)).sqrt();
                    assert_relative_eq!(t.entry(n, row, col), want, max_relative = 1e-13, epsilon = 1e-300);
                }
            }
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let t = TruncatedOperator {
            kind: OperatorKind::D,
            sites: 0..=2,
            blocks: vec![(0, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0])))],
        };
        let s = singular_values(&t);
        for (got, want) in s.iter().zip([3.0, 2.0, 1.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn dirac_examples() {
        let p = params();
        let t = assemble_d_matrix(0..=0, 0..=0, &BetaFunction::canonical(), &p).unwrap();
        let spec = block_dirac_spectrum(&t);
        assert_eq!(spec.len(), 2);
        assert_relative_eq!(spec[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(spec[1], -0.5, max_relative = 1e-14);

        let zero = TruncatedOperator { kind: OperatorKind::D, sites: 0..=1, blocks: vec![(0, DMatrix::zeros(2, 2))] };
        assert!(block_dirac_spectrum(&zero).iter().all(|&e| e == 0.0));

        let d = BlockDirac::new(&t);
        assert_eq!(d.oddness_and_symmetry_defects(), (0.0, 0.0));
        assert_eq!(d.grading(0), vec![1, -1]);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let err = assemble_d_matrix(-700..=700, 0..=0, &BetaFunction::canonical(), &params()).unwrap_err();
        assert!(matches!(err, Error::TooLarge { suggested: 600, .. }));
    }

    #[test]
    fn closure_difference_is_local_and_decreasing() {
        let pts = closure_approx_check(&[4, 8, 16, 32, 64], &BetaFunction::canonical(), &params()).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].norm < w[0].norm);
        }
        assert!(pts[4].norm < 1e-6);
    }
}
