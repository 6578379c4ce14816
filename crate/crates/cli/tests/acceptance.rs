//! Acceptance suite: one PASS/FAIL line per criterion, at the stated
//! tolerances and runtime limits. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qannulus::bounds::RationalScalar as BigRational;
use qannulus::bounds::{check_lem1, check_lem2, check_lem3, decay_experiment, region_bounds, BoundReport, DecayTable};
use qannulus::modes::roundtrip_errors;
use qannulus::operator::{
    assemble_q_matrix, block_dirac_spectrum, check_covariance, check_implementation_identity, closure_approx_check,
    dirac_singular_mismatch, singular_values,
};
use qannulus::sample::{random_element, random_finite_vector, rng, sine_beta};
use qannulus::{BetaFunction, FourierVector, ModeOperatorSpec, WeightParams, C64};
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn params() -> WeightParams {
    WeightParams::new(2.0, 1.0, 3.0).unwrap()
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

fn first_failure<'a>(reports: impl IntoIterator<Item = &'a BoundReport>) -> Option<&'a BoundReport> {
    reports.into_iter().find(|r| !r.satisfied)
}

fn describe(r: &BoundReport) -> String {
    format!("{} at {:?}: {:e} vs {:e}", r.name, r.indices, r.computed + r.error, r.majorant)
}

/// Exact q-ratio suite up to n = 40; the ratio estimate in its proof form
/// is required everywhere, including the diagonal l = n.
fn c1() -> Verdict {
    let reports = check_lem1(40).unwrap();
    let required = |r: &&BoundReport| match r.name.as_str() {
        "lem1.identity" | "lem1.lower" | "lem1.ratio_proof" => true,
        "lem1.upper" => r.indices[1] >= 1,
        _ => false,
    };
    let checked: Vec<&BoundReport> = reports.iter().filter(required).collect();
    let failures: Vec<&&BoundReport> = checked.iter().filter(|r| !r.satisfied).collect();
    match failures.first() {
        None => verdict(true, format!("{} exact checks hold", checked.len())),
        Some(r) => verdict(false, format!("{} of {} exact checks fail, first {}", failures.len(), checked.len(), describe(r))),
    }
}

/// I_m identities exact at x = 1/2 and the majorant with strictly positive
/// margin.
fn c2() -> Verdict {
    let reports = check_lem2(20, 20, &half()).unwrap();
    let exact = ["lem2.recurrence", "lem2.recursive", "lem2.parallel_sum"];
    if let Some(r) = first_failure(reports.iter().filter(|r| exact.contains(&r.name.as_str()))) {
        return verdict(false, format!("identity fails: {}", describe(r)));
    }
    let majorants: Vec<&BoundReport> = reports.iter().filter(|r| r.name == "lem2.majorant").collect();
    let tight: Vec<&&BoundReport> = majorants.iter().filter(|r| !(r.satisfied && r.margin > 0.0)).collect();
    if let Some(r) = tight.first() {
        return verdict(
            false,
            format!(
                "identities exact; majorant margin not positive in {} of {} cases, first at (m, j) = {:?} with margin {:e}",
                tight.len(),
                majorants.len(),
                r.indices,
                r.margin
            ),
        );
    }
    verdict(true, format!("identities exact, {} majorants with positive margin", majorants.len()))
}

fn c3() -> Verdict {
    let mut count = 0;
    for x in [0.5, (-1.5f64).exp()] {
        let reports = check_lem3(15, 20, x).unwrap();
        count += reports.len();
        if let Some(r) = first_failure(&reports) {
            return verdict(false, format!("x = {x}: {}", describe(r)));
        }
    }
    verdict(true, format!("{count} certified sums below the majorant"))
}

fn roundtrip_suite(beta: &BetaFunction) -> Result<usize, String> {
    let p = params();
    let results: Vec<Result<usize, String>> = (-10i64..=10)
        .into_par_iter()
        .map(|n| {
            let spec = ModeOperatorSpec::new(n, beta.clone(), p);
            let mut r = rng((1000 + n) as u64);
            for i in 0..100 {
                let g = random_finite_vector(&mut r, 12);
                let rt = roundtrip_errors(&g, &spec).map_err(|e| e.to_string())?;
                if !(rt.dq <= 1e-10 && rt.qd + rt.qd_truncation <= 1e-10) {
                    return Err(format!("n = {n}, sample {i}: DQ {:e}, QD {:e}", rt.dq, rt.qd));
                }
            }
            Ok(100)
        })
        .collect();
    results.into_iter().sum()
}

fn c4() -> Verdict {
    match roundtrip_suite(&BetaFunction::canonical()) {
        Ok(k) => verdict(true, format!("{k} samples, both compositions within 1e-10")),
        Err(e) => verdict(false, e),
    }
}

fn c5() -> Verdict {
    let (p, beta) = (params(), BetaFunction::canonical());
    let mut r = rng(5);
    let (mut worst_impl, mut worst_leibniz, mut worst_cov) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let a = random_element(&mut r);
        let f = random_element(&mut r);
        worst_impl = worst_impl.max(check_implementation_identity(&a, &f, &beta, &p).unwrap().relative());

        let lhs = a.multiply(&f).delta(&beta);
        let rhs = a.delta(&beta).multiply(&f).add(&a.multiply(&f.delta(&beta)));
        worst_leibniz = worst_leibniz.max(lhs.sub(&rhs).sup_norm() / (lhs.sup_norm() + rhs.sup_norm()).max(1e-300));

        for theta in [PI / 7.0, 1.0, 2.5] {
            let lhs = a.delta(&beta).rotate(theta);
            let rhs = a.rotate(theta).delta(&beta).scale(C64::from_polar(1.0, theta));
            worst_cov = worst_cov.max(lhs.sub(&rhs).sup_norm() / (lhs.sup_norm() + rhs.sup_norm()).max(1e-300));
        }
    }
    let pass = worst_impl <= 1e-10 && worst_leibniz <= 1e-12 && worst_cov <= 1e-12;
    verdict(pass, format!("implementation {worst_impl:e}, Leibniz {worst_leibniz:e}, covariance {worst_cov:e}"))
}

fn c6() -> Verdict {
    let (p, beta) = (params(), BetaFunction::canonical());
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let f = FourierVector::from_algebra(&random_element(&mut r));
        for theta in [PI / 7.0, 1.0, 2.5] {
            worst = worst.max(check_covariance(&f, theta, &beta, &p).unwrap().relative());
        }
    }
    verdict(worst <= 1e-12, format!("worst relative residual {worst:e}"))
}

/// Finiteness, two-sided onset of strict decrease at most 10, and the end
/// values below 1e-3 of the maximum.
fn decay_criterion(table: &DecayTable) -> Verdict {
    let rows = &table.rows;
    let finite = rows.iter().all(|r| r.hs_norm.is_finite() && r.bound.is_finite());
    let max = rows.iter().map(|r| r.hs_norm).fold(0.0, f64::max);
    let end = |n: i64| rows.iter().find(|r| r.n == n).map(|r| r.hs_norm / max).unwrap_or(f64::NAN);
    let (lo, hi) = (end(-25), end(25));
    let v = &table.verdict;
    let pass = finite && v.decaying && lo < 1e-3 && hi < 1e-3;
    verdict(
        pass,
        format!(
            "finite {finite}; onset n >= 0: {:?}, n <= 0: {:?} (cap {}); |Q_-25|/max = {lo:.3e}, |Q_25|/max = {hi:.3e}, max {max:.6e}",
            v.onset_positive, v.onset_negative, v.onset_cap
        ),
    )
}

fn c7() -> Verdict {
    let ns: Vec<i64> = (-25..=25).collect();
    decay_criterion(&decay_experiment(&params(), &BetaFunction::canonical(), &ns).unwrap())
}

fn c8() -> Verdict {
    let required = ["regions.dominance", "regions.C1", "regions.C2", "regions.C3", "regions.D1", "regions.D2"];
    let mut failures = Vec::new();
    for n in 0..=15 {
        let rb = region_bounds(n, &params()).unwrap();
        for r in rb.reports.iter().filter(|r| required.contains(&r.name.as_str())) {
            if !r.satisfied {
                failures.push(describe(r));
            }
        }
    }
    if failures.is_empty() {
        verdict(true, "dominance and all listed majorants hold for n in [0, 15]")
    } else {
        verdict(false, format!("{} failures: {}", failures.len(), failures.join("; ")))
    }
}

fn c9() -> Verdict {
    let (p, beta) = (params(), BetaFunction::canonical());
    let mut sigmas = Vec::new();
    let mut worst_dirac = 0.0f64;
    for w in [40i64, 60, 80] {
        let q = assemble_q_matrix(-w..=w, -15..=15, &beta, &p).unwrap();
        let s = singular_values(&q);
        worst_dirac = worst_dirac.max(dirac_singular_mismatch(&block_dirac_spectrum(&q), &s));
        sigmas.push(s);
    }
    let (s60, s80) = (&sigmas[1], &sigmas[2]);
    let stab = (0..50).map(|k| (s80[k] - s60[k]).abs() / s80[k]).fold(0.0, f64::max);
    let ratio = s80[49] / s80[0];
    let pass = stab < 1e-3 && ratio < 1e-2 && worst_dirac <= 1e-10;
    verdict(
        pass,
        format!("max relative change 60->80 (k <= 50) {stab:.3e}, sigma_50/sigma_1 {ratio:.3e}, Dirac mismatch {worst_dirac:.3e}"),
    )
}

fn c10() -> Verdict {
    let pts = closure_approx_check(&[4, 8, 16, 32, 64], &BetaFunction::canonical(), &params()).unwrap();
    let decreasing = pts.windows(2).all(|w| w[1].norm + w[1].error < w[0].norm - w[0].error);
    let last = pts.last().unwrap();
    let pass = decreasing && last.norm + last.error < 1e-6;
    let norms: Vec<String> = pts.iter().map(|p| format!("{:.3e}", p.norm)).collect();
    verdict(pass, format!("norms [{}], strictly decreasing {decreasing}", norms.join(", ")))
}

fn c11() -> Verdict {
    let beta = sine_beta(0.3, 8).unwrap();
    let rt = roundtrip_suite(&beta);
    let ns: Vec<i64> = (-25..=25).collect();
    let decay = decay_criterion(&decay_experiment(&params(), &beta, &ns).unwrap());
    match rt {
        Ok(k) => verdict(decay.pass, format!("roundtrips ok on {k} samples; decay: {}", decay.detail)),
        Err(e) => verdict(false, format!("roundtrip fails: {e}; decay: {}", decay.detail)),
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c12() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_qannulus");
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let dir = tmp.path().join(run);
        let status = Command::new(bin).args(["verify", "--seed", "7", "--out"]).arg(&dir).output().unwrap().status;
        if !status.success() {
            return verdict(false, format!("{run} verify run exited with {status}"));
        }
        outputs.push(csv_files(&dir));
    }
    let same = outputs[0] == outputs[1];
    verdict(same && !outputs[0].is_empty(), format!("{} CSV files, byte-identical {same}", outputs[0].len()))
}

/// Identifier, title, runtime limit in seconds and the check itself.
type Criterion = (&'static str, &'static str, u64, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 12] = [
        ("C1", "q-ratio exact suite", 30, c1),
        ("C2", "I_m exact suite at x = 1/2", 10, c2),
        ("C3", "J_n certified majorant", 30, c3),
        ("C4", "D_n/Q_n roundtrips", 60, c4),
        ("C5", "implementation, Leibniz and covariance identities", 30, c5),
        ("C6", "rotation covariance of D", 10, c6),
        ("C7", "Hilbert-Schmidt decay of Q_n", 120, c7),
        ("C8", "region dominance and majorants", 120, c8),
        ("C9", "singular values and block Dirac spectrum", 300, c9),
        ("C10", "closure approximation", 10, c10),
        ("C11", "perturbed beta", 120, c11),
        ("C12", "determinism of verify CSV output", 120, c12),
    ];
    let mut failed = 0;
    for (id, title, limit, run) in criteria {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time { String::new() } else { format!(" (over the {limit} s limit)") };
        println!(
            "{id} {} {title}: {}{timing} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
