//! A quick battery of invariant checks across all modules, for `selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive::{cara_feasible, cara_synthesize, pq_check, rec_check, total_derivative_direct, total_derivatives_mk, Variant};
use crate::displacement::{solve_exact, solve_series};
use crate::generate::{generate_cara, generate_displacement, generate_np, CaraParams, NpParams};
use crate::interpolate::{np_feasible, synthesize, verify_certificate, Settings};
use crate::linalg::{c, operator_norm, psd_factor, unitarity_defect, unitary_completion, CMatrix};
use crate::points::{closed_form_kernel, szego_kernel, OperatorTuple};
use crate::random::{random_matrix, scale_to_margin};
use crate::schur::{point_evaluation_identity, random_schur};
use crate::words::{enumerate_words, index_word, word_index, words_up_to};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, limit: f64) -> CheckOutcome {
    CheckOutcome { name, passed: worst <= limit, detail: format!("worst {worst:.3e} (limit {limit:.0e})") }
}

fn guarded(name: &'static str, f: impl FnOnce() -> crate::error::Result<CheckOutcome>) -> CheckOutcome {
    f().unwrap_or_else(|e| CheckOutcome { name, passed: false, detail: e.to_string() })
}

fn words_check() -> crate::error::Result<CheckOutcome> {
    let mut bad = 0;
    for n in 1..=3 {
        for k in 0..=5 {
            for w in enumerate_words(n, k)? {
                if index_word(word_index(&w, n)?, n)? != w {
                    bad += 1;
                }
            }
        }
    }
    Ok(CheckOutcome { name: "words: index round trip", passed: bad == 0, detail: format!("{bad} mismatches") })
}

fn factor_check() -> crate::error::Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 6, 4);
        let a = &m * m.adjoint();
        let l = psd_factor(&a, 1e-12)?;
        worst = worst.max(operator_norm(&(&l * l.adjoint() - &a)) / (1.0 + operator_norm(&a)));
    }
    Ok(outcome("linalg: psd factor", worst, 1e-10))
}

fn completion_check() -> crate::error::Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let b = random_matrix(&mut rng, 5, 3);
        let q = random_matrix(&mut rng, 4, 4).qr().q();
        // same Gram matrix R*R as b
        let a = q.columns(0, 3).into_owned() * b.clone().qr().r();
        let comp = unitary_completion(&b, &a, 1e-9)?;
        worst = worst.max(unitarity_defect(&comp.theta));
    }
    Ok(outcome("linalg: unitary completion", worst, 1e-10))
}

fn kernel_check() -> crate::error::Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let pt = |rng: &mut ChaCha8Rng| {
            let comps = (0..n).map(|_| random_matrix(rng, 1, 1)).collect();
            let rho = rng.random_range(0.0..0.64);
            OperatorTuple::new(scale_to_margin(comps, rho))
        };
        let (z, w) = (pt(&mut rng)?, pt(&mut rng)?);
        let k = szego_kernel(&z, &w, 1e-10, 200)?;
        worst = worst.max(operator_norm(&(k.value - closed_form_kernel(&z, &w)?)));
    }
    Ok(outcome("points: scalar kernel closed form", worst, 1e-8))
}

fn schur_check() -> crate::error::Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    for seed in 0..5 {
        let t = random_schur(seed, 2, 2, 4, 0.9)?;
        let comps = (0..2).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let z = OperatorTuple::new(scale_to_margin(comps, 0.5))?;
        for m in 0..=4 {
            ok &= point_evaluation_identity(&t, &z, m)?.holds;
        }
    }
    Ok(CheckOutcome { name: "schur: point evaluation identity", passed: ok, detail: String::new() })
}

fn displacement_check() -> crate::error::Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let sys = generate_displacement(seed, 8, 2, 2, 1, 0.7)?;
        let a = solve_series(&sys, 1e-9, 200)?.a;
        let b = solve_exact(&sys)?;
        worst = worst.max(operator_norm(&(a - b)));
    }
    Ok(outcome("displacement: series vs exact", worst, 1e-8))
}

fn np_check() -> crate::error::Result<CheckOutcome> {
    let s = Settings::default();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let (prob, _) = generate_np(&NpParams { seed, points: 2, alphabet: 2, dim: 2, ..NpParams::default() })?;
        let rep = np_feasible(&prob, &s)?;
        if !rep.feasible {
            return Ok(CheckOutcome { name: "interpolate: round trip", passed: false, detail: format!("seed {seed} infeasible") });
        }
        let cert = synthesize(&prob, &s)?;
        if !verify_certificate(&cert, &prob, &s)?.passed {
            return Ok(CheckOutcome { name: "interpolate: round trip", passed: false, detail: format!("seed {seed} failed verification") });
        }
        worst = worst.max(cert.max_residual());
    }
    Ok(outcome("interpolate: round trip", worst, 1e-6))
}

fn infeasible_check() -> crate::error::Result<CheckOutcome> {
    let prob = crate::interpolate::NPProblem::new(vec![OperatorTuple::zero(1, 1)], vec![CMatrix::from_element(1, 1, c(2.0, 0.0))])?;
    let rep = np_feasible(&prob, &Settings::default())?;
    Ok(CheckOutcome {
        name: "interpolate: infeasible witness",
        passed: !rep.feasible && rep.min_eig <= -2.9,
        detail: format!("min eig {:.6}", rep.min_eig),
    })
}

fn pq_battery() -> crate::error::Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let comps = (0..n).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let z = OperatorTuple::new(scale_to_margin(comps, 0.7))?;
        for sigma in words_up_to(n, 3)?.into_iter().skip(1) {
            let rep = pq_check(&z, &sigma, 2)?;
            worst = worst.max(rep.defect).max(rep.p_recursion_defect).max(rep.q_recursion_defect);
        }
        worst = worst.max(rec_check(&z, 3)?);
    }
    Ok(outcome("derive: P/Q recursions", worst, 1e-12))
}

fn total_check() -> crate::error::Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let t = random_schur(seed, 2, 2, 4, 0.9)?;
        let comps = (0..2).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let z = OperatorTuple::new(scale_to_margin(comps, 0.5))?;
        let mk = total_derivatives_mk(&t, &z, 2)?;
        for (k, m) in mk.iter().enumerate() {
            worst = worst.max(operator_norm(&(total_derivative_direct(&t, &z, k, 2)? - m)));
        }
    }
    Ok(outcome("derive: total derivative paths", worst, 1e-9))
}

fn cara_check() -> crate::error::Result<CheckOutcome> {
    let s = Settings::default();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        for variant in [Variant::Partial, Variant::Total] {
            let (prob, _) = generate_cara(&CaraParams { seed, order: 1, alphabet: 2, dim: 1, variant, ..CaraParams::default() })?;
            if !cara_feasible(&prob, &s)?.feasible || cara_feasible(&prob.scaled(10.0), &s)?.feasible {
                return Ok(CheckOutcome { name: "derive: caratheodory round trip", passed: false, detail: format!("seed {seed} verdict") });
            }
            worst = worst.max(cara_synthesize(&prob, &s)?.max_residual());
        }
    }
    Ok(outcome("derive: caratheodory round trip", worst, 1e-6))
}

/// Runs every check; never panics.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        guarded("words: index round trip", words_check),
        guarded("linalg: psd factor", factor_check),
        guarded("linalg: unitary completion", completion_check),
        guarded("points: scalar kernel closed form", kernel_check),
        guarded("schur: point evaluation identity", schur_check),
        guarded("displacement: series vs exact", displacement_check),
        guarded("interpolate: infeasible witness", infeasible_check),
        guarded("interpolate: round trip", np_check),
        guarded("derive: P/Q recursions", pq_battery),
        guarded("derive: total derivative paths", total_check),
        guarded("derive: caratheodory round trip", cara_check),
    ]
}
