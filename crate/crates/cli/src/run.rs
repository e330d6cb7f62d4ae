//! Command execution and CSV emission.
//!
//! Output is deterministic for a fixed config and seed: randomness is
//! ChaCha-seeded, computed floats print with 17 significant digits, and
//! parallel cells are collected in config order.

use std::fmt::Write as _;

use hermsob::{
    adjoint_defect, f_profile, gauss_hermite, mono_form, mono_p0_oracle, plateau_sweep,
    three_lines_from_profile, Family, MonoProblem, MultiplierSpec, RealCoeffVec, StripGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{format_complex, CommandKind, ProblemConfig, RunConfig};

/// Exit status of a run: checks pass, a check failed, or a hard error.
pub enum Outcome {
    Pass,
    CheckFailed(String),
    Error(String),
}

/// 17 significant digits, the fixed on-disk float format.
fn f17(v: f64) -> String {
    format!("{:.16e}", v)
}

fn problem_cols(p: &ProblemConfig) -> String {
    format!(
        "{},{},{},{},{}",
        p.sigma.kind_label(),
        p.sigma.params_label(),
        p.b.kind_label(),
        p.b.params_label(),
        p.p
    )
}

fn mono_problem(p: &ProblemConfig) -> MonoProblem {
    MonoProblem::new(p.sigma.clone(), p.b.clone(), p.p)
}

fn seeded_unit_vec(rng: &mut ChaCha8Rng, k: usize, alloc: usize) -> RealCoeffVec {
    let mut c = vec![0.0; alloc];
    for v in c.iter_mut().take(k) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in c.iter_mut() {
            *v /= norm;
        }
    } else {
        c[0] = 1.0;
    }
    RealCoeffVec::from_coeffs(c)
}

/// Run the configured command, returning the CSV text and the outcome.
pub fn run(config: &RunConfig) -> (String, Outcome) {
    match config.command {
        CommandKind::Sweep => run_sweep(config),
        CommandKind::Verify => run_verify(config),
        CommandKind::Sequences => run_sequences(config),
        CommandKind::Interpolate => run_interpolate(config),
    }
}

struct SweepRows {
    rows: String,
    converged: bool,
    index: usize,
}

fn run_sweep(config: &RunConfig) -> (String, Outcome) {
    if config.problems.is_empty() {
        return (
            String::new(),
            Outcome::Error("sweep needs at least one [problem.N]".into()),
        );
    }
    let results: Vec<Result<SweepRows, String>> = config
        .problems
        .par_iter()
        .map(|p| {
            let prob = mono_problem(p);
            let report = plateau_sweep(&prob, &config.k_schedule, config.tol)
                .map_err(|e| format!("problem {}: {e}", p.index))?;
            let mut rows = String::new();
            for &(k, lam) in &report.lambda_by_k {
                writeln!(
                    rows,
                    "{},{},{},{}",
                    problem_cols(p),
                    k,
                    f17(lam),
                    report.converged
                )
                .unwrap();
            }
            Ok(SweepRows {
                rows,
                converged: report.converged,
                index: p.index,
            })
        })
        .collect();

    let mut csv = format!("# seed={}\n", config.seed);
    csv.push_str("sigma_kind,sigma_params,b_kind,b_params,p,K,lambda_max,converged\n");
    let mut failed = None;
    for r in results {
        match r {
            Ok(sweep) => {
                // a non-converged sweep still reports its rows
                csv.push_str(&sweep.rows);
                if !sweep.converged {
                    failed
                        .get_or_insert(format!("problem {}: sweep did not converge", sweep.index));
                }
            }
            Err(msg) => return (csv, Outcome::Error(msg)),
        }
    }
    match failed {
        None => (csv, Outcome::Pass),
        Some(msg) => (csv, Outcome::CheckFailed(msg)),
    }
}

struct VerifyRow {
    check: &'static str,
    problem: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn run_verify(config: &RunConfig) -> (String, Outcome) {
    if config.problems.is_empty() {
        return (
            String::new(),
            Outcome::Error("verify needs at least one [problem.N]".into()),
        );
    }
    let results: Vec<Result<Vec<VerifyRow>, String>> = config
        .problems
        .par_iter()
        .map(|p| verify_problem(config, p).map_err(|e| format!("problem {}: {e}", p.index)))
        .collect();

    let mut csv = format!("# seed={}\n", config.seed);
    csv.push_str("check,sigma_kind,sigma_params,b_kind,b_params,p,value,threshold,pass\n");
    let mut all_pass = true;
    for r in results {
        match r {
            Ok(rows) => {
                for row in rows {
                    all_pass &= row.pass;
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        row.check,
                        row.problem,
                        f17(row.value),
                        f17(row.threshold),
                        row.pass
                    ));
                }
            }
            Err(msg) => return (csv, Outcome::Error(msg)),
        }
    }
    if all_pass {
        (csv, Outcome::Pass)
    } else {
        (csv, Outcome::CheckFailed("a verify check failed".into()))
    }
}

fn verify_problem(config: &RunConfig, p: &ProblemConfig) -> Result<Vec<VerifyRow>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(p.index as u64));
    let prob = mono_problem(p);
    let cols = problem_cols(p);
    let mut rows = Vec::new();

    // p = 0 integration-by-parts oracle, affine multipliers only (sampled
    // kinds carry compression error; higher-degree polynomials have
    // unbounded derivatives and are outside the inequality's class)
    let affine_class =
        p.sigma.degree().is_some_and(|d| d <= 1) && p.b.degree().is_some_and(|d| d <= 1);
    if affine_class {
        let rule = gauss_hermite(128).map_err(|e| e.to_string())?;
        let prob0 = MonoProblem::new(p.sigma.clone(), p.b.clone(), 0.0);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let phi = seeded_unit_vec(&mut rng, 24, 24 + prob0.growth_margin());
            let form = mono_form(&prob0, &phi).map_err(|e| e.to_string())?;
            let oracle = mono_p0_oracle(&p.sigma, &p.b, &phi, &rule).map_err(|e| e.to_string())?;
            worst = worst.max((form - oracle).abs() / form.abs().max(1.0));
        }
        rows.push(VerifyRow {
            check: "p0_oracle_agreement",
            problem: cols.clone(),
            value: worst,
            threshold: 1e-8,
            pass: worst <= 1e-8,
        });
    }

    // adjoint decomposition at q = p
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let phi = seeded_unit_vec(&mut rng, 24, 26);
        let psi = seeded_unit_vec(&mut rng, 24, 26);
        let d = adjoint_defect(p.p, &phi, &psi).map_err(|e| e.to_string())?;
        worst = worst.max(d.abs());
    }
    rows.push(VerifyRow {
        check: "adjoint_defect",
        problem: cols.clone(),
        value: worst,
        threshold: 1e-8,
        pass: worst <= 1e-8,
    });

    // plateau sweep
    let report = plateau_sweep(&prob, &config.k_schedule, config.tol).map_err(|e| e.to_string())?;
    let monotone = report
        .lambda_by_k
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 1e-10 * w[0].1.abs().max(1.0));
    rows.push(VerifyRow {
        check: "plateau_converged",
        problem: cols.clone(),
        value: report.plateau,
        threshold: config.tol,
        pass: report.converged && monotone,
    });

    // three-lines interpolation bound, affine problems only
    let affine = matches!(p.sigma, MultiplierSpec::Affine { .. })
        && matches!(p.b, MultiplierSpec::Affine { .. });
    if affine {
        let phi = seeded_unit_vec(&mut rng, 32, 40);
        let grid = StripGrid::new(config.interp_y_max, 21, config.interp_y_samples);
        let profile = f_profile(&prob, &phi, &grid).map_err(|e| e.to_string())?;
        let report = three_lines_from_profile(&profile);
        rows.push(VerifyRow {
            check: "three_lines",
            problem: cols.clone(),
            value: report.worst_margin,
            threshold: 0.0,
            pass: report.pass,
        });
    }
    Ok(rows)
}

fn run_sequences(config: &RunConfig) -> (String, Outcome) {
    let w = config.seq_w;
    let mut csv = format!("# seed={}\n", config.seed);
    csv.push_str("name,w,n,value_re,value_im,scaled_abs\n");
    for fam in Family::ALL {
        let first = fam.first_valid_n(w);
        // geometric index ladder plus the endpoint
        let mut ns: Vec<u64> = Vec::new();
        let mut n = first;
        while n < config.seq_n_max {
            ns.push(n);
            n = (n * 2).max(n + 1);
        }
        ns.push(config.seq_n_max);
        for n in ns {
            let v = match certified_value(fam, w, n) {
                Some(v) => v,
                None => continue,
            };
            let scaled = (n as f64).powf(fam.claimed_decay()) * v.norm();
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fam.name(),
                format_complex(w),
                n,
                f17(v.re),
                f17(v.im),
                f17(scaled)
            ));
        }
    }
    (csv, Outcome::Pass)
}

fn certified_value(
    fam: Family,
    w: num_complex::Complex64,
    n: u64,
) -> Option<num_complex::Complex64> {
    hermsob::seq_value(fam, w, n).ok()
}

fn run_interpolate(config: &RunConfig) -> (String, Outcome) {
    if config.problems.len() != 1 {
        return (
            String::new(),
            Outcome::Error("interpolate needs exactly one [problem.N]".into()),
        );
    }
    let p = &config.problems[0];
    let affine = matches!(p.sigma, MultiplierSpec::Affine { .. })
        && matches!(p.b, MultiplierSpec::Affine { .. });
    if !affine {
        return (
            String::new(),
            Outcome::Error("interpolate requires affine sigma and b".into()),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(p.index as u64));
    let phi = seeded_unit_vec(&mut rng, config.interp_phi_k, config.interp_phi_k + 8);
    let prob = mono_problem(p);
    let grid = StripGrid::new(config.interp_y_max, 21, config.interp_y_samples);
    let profile = match f_profile(&prob, &phi, &grid) {
        Ok(pr) => pr,
        Err(e) => return (String::new(), Outcome::Error(e.to_string())),
    };
    let report = three_lines_from_profile(&profile);

    let mut csv = format!("# seed={}\n", config.seed);
    csv.push_str("x,y,F_re,F_im,bound,margin\n");
    for (i, &x) in profile.grid.xs().iter().enumerate() {
        for (j, &y) in profile.grid.ys().iter().enumerate() {
            let f = profile.values[i][j];
            let bound = profile.m0.powf(1.0 - x) * profile.m1.powf(x);
            let margin = bound - f.norm();
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f17(x),
                f17(y),
                f17(f.re),
                f17(f.im),
                f17(bound),
                f17(margin)
            ));
        }
    }
    if report.pass {
        (csv, Outcome::Pass)
    } else {
        (
            csv,
            Outcome::CheckFailed(format!(
                "three-lines bound violated: margin {} at {:?}",
                report.worst_margin, report.worst_at
            )),
        )
    }
}
