//! Fourier-mode operators `Dₙ` and the kernels of their inverses `Qₙ`.
//!
//! `(Dₙh)(l) = β(l+n)h(l) − xβ(l)h(l+1)` with `x = μ(l+1)/μ(l) = e^{−γ/2}`.
//! The matrix is upper bidiagonal, and its inverse is the upper triangular
//! kernel
//!
//! ```text
//! K(l, j) = x^{j−l} ∏_{k=l}^{j−1} β(k) / ∏_{k=l+n}^{j+n} β(k),   j ≥ l,
//! ```
//!
//! which after cancelling the common factors is the two-branch formula with
//! `n` (resp. `|n|−1`) factors upstairs and `n+1` (resp. `|n|`) downstairs.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::BetaFunction;
use crate::error::{Error, Result};
use crate::lattice::{NormKind, TailPoly, TailVector, WeightParams, Window};
use crate::sum::{Compensated, CompensatedC};
use crate::C64;

/// A single mode `n` of the implementation `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperatorSpec {
    pub n: i64,
    pub beta: BetaFunction,
    pub params: WeightParams,
}

impl ModeOperatorSpec {
    pub fn new(n: i64, beta: BetaFunction, params: WeightParams) -> Self {
        Self { n, beta, params }
    }

    pub fn canonical(n: i64, params: WeightParams) -> Self {
        Self::new(n, BetaFunction::canonical(), params)
    }

    /// The μ-ratio `x = e^{−γ/2}`.
    pub fn x(&self) -> f64 {
        self.params.mu_ratio()
    }

    pub fn with_mode(&self, n: i64) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Kernel entry stored as a sign and the natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub sign: i8,
    pub log_magnitude: f64,
}

impl KernelValue {
    pub const ZERO: KernelValue = KernelValue { sign: 0, log_magnitude: f64::NEG_INFINITY };

    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Sign equal and log-magnitudes within `tol` of an exact value.
    pub fn agrees_with(&self, exact: &BigRational, tol: f64) -> bool {
        let sign = if exact.is_zero() {
            0
        } else if exact.is_positive() {
            1
        } else {
            -1
        };
        if sign != self.sign {
            return false;
        }
        sign == 0 || (ln_abs(exact) - self.log_magnitude).abs() <= tol
    }
}

/// `ln |r|` for a nonzero rational of any size.
pub fn ln_abs(r: &BigRational) -> f64 {
    ln_big(r.numer()) - ln_big(r.denom())
}

fn ln_big(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return v.abs().to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigInt = v.abs() >> shift;
    top.to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Factor ranges `[num_lo, num_hi]` and `[den_lo, den_hi]` left after
/// cancelling the common part of `∏_{l}^{j−1}` and `∏_{l+n}^{j+n}`.
fn reduced_ranges(n: i64, l: i64, j: i64) -> ((i64, i64), (i64, i64)) {
    if n >= 0 {
        ((l, (l + n - 1).min(j - 1)), (j.max(l + n), j + n))
    } else {
        (((j + n + 1).max(l), j - 1), (l + n, (l - 1).min(j + n)))
    }
}

/// Parity of negative factors and `Σ ln|β(k)|` over `k ∈ [lo, hi]`.
fn log_product(beta: &BetaFunction, lo: i64, hi: i64) -> (bool, f64) {
    let mut negative = false;
    let mut acc = Compensated::new();
    for k in lo..=hi {
        let b = beta.value(k);
        negative ^= b < 0.0;
        acc.add(b.abs().ln());
    }
    (negative, acc.value())
}

/// `Qₙ` kernel entry `K(l, j)` in signed log space; exact zero for `j < l`.
pub fn qn_kernel(spec: &ModeOperatorSpec, l: i64, j: i64) -> KernelValue {
    if j < l {
        return KernelValue::ZERO;
    }
    let ((nl, nh), (dl, dh)) = reduced_ranges(spec.n, l, j);
    let (num_neg, num_log) = log_product(&spec.beta, nl, nh);
    let (den_neg, den_log) = log_product(&spec.beta, dl, dh);
    KernelValue {
        sign: if num_neg ^ den_neg { -1 } else { 1 },
        log_magnitude: (j - l) as f64 * spec.params.ln_mu_ratio() + num_log - den_log,
    }
}

/// Exact kernel entry for canonical `β` and rational μ-ratio `x`, using
/// `2β(k) = 2k + 1`.
pub fn exact_kernel(n: i64, l: i64, j: i64, x: &BigRational) -> BigRational {
    if j < l {
        return BigRational::zero();
    }
    let ((nl, nh), (dl, dh)) = reduced_ranges(n, l, j);
    let odd = |lo: i64, hi: i64| (lo..=hi).fold(BigInt::one(), |acc, k| acc * BigInt::from(2 * k + 1));
    // The denominator always carries exactly one more factor of 1/2.
    let ratio = BigRational::new(BigInt::from(2) * odd(nl, nh), odd(dl, dh));
    ratio * num_traits::pow(x.clone(), (j - l) as usize)
}

/// `Dₙh` with closed-form tails.
///
/// `β` is affine outside its offset core, so an eventually constant input
/// yields affine tails; tails of higher degree overflow the cap.
pub fn apply_dn(h: &TailVector, spec: &ModeOperatorSpec) -> Result<TailVector> {
    let n = spec.n;
    let x = spec.x();
    let beta = &spec.beta;
    let off = beta.offset();
    let s = beta.slope();
    let hw = h.window();

    let lo = [hw.l_min(), off.core_min(), off.core_min() - n].into_iter().min().unwrap() - 1;
    let hi = [hw.l_max(), off.core_max(), off.core_max() - n].into_iter().max().unwrap();
    let window = Window::covering(lo, hi);

    let tail = |p: &TailPoly, c: f64| -> Result<TailPoly> {
        let first = p.mul_affine(s, s * n as f64 + c);
        let second = p.shift(1).mul_affine(s, c);
        let diff: Vec<C64> = first.iter().zip(&second).map(|(a, b)| a - b * x).collect();
        TailPoly::from_slice(&diff)
    };
    let left = tail(h.left_tail(), off.left())?;
    let right = tail(h.right_tail(), off.right())?;

    Ok(TailVector::from_fn(window, left, right, |l| {
        h.get(l) * beta.value(l + n) - h.get(l + 1) * (x * beta.value(l))
    }))
}

/// Image of a finitely supported vector under `Qₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QnImage {
    /// Values on a window, zero outside.
    pub vector: TailVector,
    /// Bound on the `ℓ²_w` norm of the omitted part to the left.
    pub truncation_bound: f64,
    /// Bound on the largest omitted value.
    pub sup_bound: f64,
}

/// Relative size below which omitted values count as negligible.
const QN_TRUNCATION_REL: f64 = 1e-20;
const QN_MAX_SITES: i64 = 1_000_000;

/// `(Qₙg)(l) = Σ_{j≥l} K(l,j)g(j)` for finitely supported `g`.
///
/// The output is supported on `(−∞, max supp g]`. Values to the left of the
/// support shrink at least geometrically once `β` is in its affine regime, so
/// the image is truncated where the certified remainder is negligible.
pub fn apply_qn(g: &TailVector, spec: &ModeOperatorSpec) -> Result<QnImage> {
    if !g.is_finitely_supported() {
        return Err(Error::UnsupportedInput("apply_Qn needs a finitely supported input"));
    }
    let Some((s0, s1)) = g.support() else {
        return Ok(QnImage { vector: TailVector::zeros(), truncation_bound: 0.0, sup_bound: 0.0 });
    };
    let n = spec.n;
    let beta = &spec.beta;
    let ln_x = spec.params.ln_mu_ratio();
    let a = spec.params.a();
    let gvals: Vec<C64> = (s0..=s1).map(|j| g.get(j)).collect();

    // Per column j: sign and log|K(l, j)|, stepped downward in l.
    let mut sign = vec![0i8; gvals.len()];
    let mut logk = vec![f64::NEG_INFINITY; gvals.len()];
    let mut values: Vec<C64> = Vec::new();
    let mut peak = 0.0f64;
    let left_lim = beta.left_regular_limit();

    let mut l = s1;
    loop {
        let col = gvals.len();
        if l >= s0 {
            let idx = (l - s0) as usize;
            let k = qn_kernel(spec, l, l);
            sign[idx] = k.sign;
            logk[idx] = k.log_magnitude;
        }
        let mut acc = CompensatedC::new();
        let mut abs_sum = 0.0;
        let first = (l - s0).max(0) as usize;
        for idx in first..col {
            let kv = f64::from(sign[idx]) * logk[idx].exp();
            acc.add(gvals[idx] * kv);
            abs_sum += kv.abs() * gvals[idx].norm();
        }
        let v = acc.value();
        peak = peak.max(v.norm());
        values.push(v);

        if l < s0 && l - 1 <= left_lim && l - 1 + n <= left_lim {
            let rho = spec.x() * beta.ratio_sup_left(l - 1, n).expect("inside the regular region");
            let r = rho * rho * (-a).exp();
            if rho < 1.0 && r < 1.0 && abs_sum * rho <= QN_TRUNCATION_REL * peak.max(f64::MIN_POSITIVE) {
                let truncation_bound = (abs_sum * abs_sum * (-a * l.abs() as f64).exp() * r / (1.0 - r)).sqrt();
                values.reverse();
                let window = Window::covering(l - 1, s1.max(0) + 1);
                let vector = TailVector::from_fn(window, TailPoly::ZERO, TailPoly::ZERO, |site| {
                    if site >= l && site <= s1 {
                        values[(site - l) as usize]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                return Ok(QnImage { vector, truncation_bound, sup_bound: abs_sum * rho });
            }
        }
        if s1 - l > QN_MAX_SITES {
            return Err(Error::Uncertified { what: "Q_n image truncation", limit: format!("{QN_MAX_SITES} sites") });
        }

        // Step every active column from l to l - 1.
        let step = ln_x + (beta.value(l - 1) / beta.value(l - 1 + n)).abs().ln();
        let flip = (beta.value(l - 1) < 0.0) ^ (beta.value(l - 1 + n) < 0.0);
        for idx in first..col {
            logk[idx] += step;
            if flip {
                sign[idx] = -sign[idx];
            }
        }
        l -= 1;
    }
}

/// Relative residuals of both compositions on one finitely supported `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Roundtrip {
    /// `‖DₙQₙg − g‖_{w'} / ‖g‖_{w'}`.
    pub dq: f64,
    /// `‖QₙDₙg − g‖_w / ‖g‖_w`.
    pub qd: f64,
    /// Certified bound on the part of `qd` hidden by truncating `Qₙ`.
    pub qd_truncation: f64,
}

pub fn roundtrip_errors(g: &TailVector, spec: &ModeOperatorSpec) -> Result<Roundtrip> {
    let p = &spec.params;
    let gw = g.weighted_norm(p, NormKind::W).value;
    let gwp = g.weighted_norm(p, NormKind::WPrime).value;
    if gw == 0.0 {
        return Ok(Roundtrip { dq: 0.0, qd: 0.0, qd_truncation: 0.0 });
    }
    let q = apply_qn(g, spec)?;
    let dq = apply_dn(&q.vector, spec)?.sub(g).weighted_norm(p, NormKind::WPrime).value / gwp;
    let qdg = apply_qn(&apply_dn(g, spec)?, spec)?;
    let qd = qdg.vector.sub(g).weighted_norm(p, NormKind::W).value / gw;
    Ok(Roundtrip { dq, qd, qd_truncation: qdg.truncation_bound / gw })
}

/// One row of a kernel dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRow {
    pub n: i64,
    pub l: i64,
    pub j: i64,
    pub value: KernelValue,
}

/// Kernel entries for every `n` in `modes` and `l ≤ j` in `sites × sites`,
/// ordered by `(n, l, j)`.
pub fn kernel_table(
    beta: &BetaFunction,
    params: &WeightParams,
    modes: std::ops::RangeInclusive<i64>,
    sites: std::ops::RangeInclusive<i64>,
) -> Vec<KernelRow> {
    let cells: Vec<(i64, i64)> = modes.flat_map(|n| sites.clone().map(move |l| (n, l))).collect();
    cells
        .par_iter()
        .map(|&(n, l)| {
            let spec = ModeOperatorSpec::new(n, beta.clone(), *params);
            (l..=*sites.end()).map(|j| KernelRow { n, l, j, value: qn_kernel(&spec, l, j) }).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Writes `n,l,j,sign,log_magnitude` with a header row.
pub fn write_kernel_csv<W: Write>(out: W, rows: &[KernelRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Malformed(e.to_string());
    w.write_record(["n", "l", "j", "sign", "log_magnitude"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.l.to_string(),
            r.j.to_string(),
            r.value.sign.to_string(),
            format!("{:.16e}", r.value.log_magnitude),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Malformed(e.to_string()))
}
