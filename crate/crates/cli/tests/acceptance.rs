//! Acceptance run: one line per criterion, nonzero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use samurai_core::certify::{certify_efficient, Verdict};
use samurai_core::constructor::build_on_grid;
use samurai_core::lambda_space::classify_debt;
use samurai_core::mechanism::{check_feasible, check_ic};
use samurai_core::oracle::{
    bruteforce_deviation_loss, enumerate_feasible_ic, is_undominated, round_to_lattice,
    DiscreteInstance, Mode, OracleVerdict,
};
use samurai_core::random::{random_debt_lambda, random_ic_mechanism, random_lambda};
use samurai_core::tighten::{tighten_with, Menu, TightenOptions};
use samurai_core::{
    build_efficient, tighten, validate_lambda, AuditSchedule, CostFn, Environment, LossFunction,
    Mechanism, PwlFunction,
};

const TAUS: [f64; 3] = [0.0, 0.5, 1.0];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn rng(stream: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream * 1_000_003 + i as u64)
}

fn env_for(i: usize) -> Environment {
    Environment::unit(TAUS[i % 3])
}

fn linear_env(tau: f64) -> Environment {
    Environment::new(0.0, 1.0, tau, CostFn::linear(0.1)).unwrap()
}

fn sup_gap(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn first_error(results: Vec<std::result::Result<(), String>>) -> std::result::Result<(), String> {
    results.into_iter().find(|r| r.is_err()).unwrap_or(Ok(()))
}

fn c1_constructor() -> Outcome {
    let n = 1000;
    let res: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let env = env_for(i);
            let lam = random_lambda(&mut rng(1, i), &env).map_err(|e| e.to_string())?;
            let m = build_efficient(&lam, &env, 1001).map_err(|e| format!("#{i}: {e}"))?;
            if !check_feasible(&m, &env).passed || !check_ic(&m, &env).passed {
                return Err(format!("#{i}: not feasible and IC"));
            }
            let target: Vec<f64> = m.grid().iter().map(|&x| lam.eval(x).unwrap()).collect();
            let gap = sup_gap(&m.revenue_table(), &target);
            if gap > 1e-9 {
                return Err(format!("#{i}: sup |R - λ| = {gap:e}"));
            }
            let cert = certify_efficient(&m, &env).map_err(|e| e.to_string())?;
            if cert.verdict != Verdict::CertifiedEfficient {
                return Err(format!("#{i}: verdict {:?}", cert.verdict));
            }
            Ok(())
        })
        .collect();
    first_error(res)?;
    Ok(format!("{n} λ, τ in {{0, 0.5, 1}}, grid 1001"))
}

fn c2_tighten_guarantees() -> Outcome {
    let n = 500;
    let tol = 1e-9;
    let res: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let env = linear_env(TAUS[i % 3]);
            let m = random_ic_mechanism(&mut rng(2, i), &env, 201).map_err(|e| e.to_string())?;
            let r = tighten(&m, &env).map_err(|e| format!("#{i}: {e}"))?;
            let out = &r.mechanism_out;
            let p_in = m.profit_table(&env).unwrap();
            let p_out = out.profit_table(&env).unwrap();
            for (j, &k) in r.input_positions.iter().enumerate() {
                let x = m.grid()[j];
                let (a, a_star) = (m.a()[j], out.a()[k]);
                let (lm, rs, ls) = (r.lambda_m_in[j], out.revenue_at(k), r.lambda_m_out[k]);
                if a_star > a + tol {
                    return Err(format!("#{i}: a* > a at {x}"));
                }
                if lm > rs + tol || rs > ls + tol {
                    return Err(format!("#{i}: λ_m <= R* <= λ_m* fails at {x}"));
                }
                if p_in[j] > p_out[k] + tol {
                    return Err(format!("#{i}: Π > Π* at {x}"));
                }
                if a - a_star > tol && p_out[k] - p_in[j] <= 0.0 {
                    return Err(format!("#{i}: audit drops at {x} without profit gain"));
                }
            }
            Ok(r.audit_decreased as usize)
        })
        .collect::<Vec<_>>();
    let mut drops = 0;
    for r in res {
        drops += r?;
    }
    Ok(format!(
        "{n} mechanisms on 201 points, {drops} with strict audit drops"
    ))
}

fn c3_fixed_points() -> Outcome {
    let n = 200;
    let res: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let env = env_for(i);
            let lam = random_lambda(&mut rng(3, i), &env).map_err(|e| e.to_string())?;
            let m = build_efficient(&lam, &env, 1001).map_err(|e| e.to_string())?;
            let r = tighten(&m, &env).map_err(|e| format!("#{i}: {e}"))?;
            let dl = r.lambda_star.shape().sup_distance(lam.shape());
            let da = sup_gap(&r.a_out_on_input(), m.a());
            if dl > 1e-8 || da > 1e-8 {
                return Err(format!("#{i}: |λ* - λ| = {dl:e}, |a* - a| = {da:e}"));
            }
            let once = &r.mechanism_out;
            let r2 = tighten(once, &env).map_err(|e| format!("#{i} second pass: {e}"))?;
            let da2 = sup_gap(&r2.a_out_on_input(), once.a());
            let dr2 = sup_gap(&r2.revenue_out_on_input(), &once.revenue_table());
            if da2 > 1e-8 || dr2 > 1e-8 {
                return Err(format!("#{i}: not idempotent (a {da2:e}, R {dr2:e})"));
            }
            Ok(())
        })
        .collect();
    first_error(res)?;
    Ok(format!("{n} λ"))
}

fn c4_single_crossing() -> Outcome {
    let n = 1000;
    let res: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let env = env_for(i);
            let lam = random_lambda(&mut rng(4, i), &env).map_err(|e| e.to_string())?;
            let s = AuditSchedule::new(&lam, &env);
            let rep = s.check_single_crossing(1001).map_err(|e| e.to_string())?;
            let (a0, b0) = (s.alpha(env.x_lo).unwrap(), s.beta(env.x_lo).unwrap());
            if !rep.passed || a0 < b0 - 1e-12 {
                return Err(format!(
                    "#{i}: {rep:?}, alpha(x_lo) = {a0}, beta(x_lo) = {b0}"
                ));
            }
            Ok(())
        })
        .collect();
    first_error(res)?;
    Ok(format!("{n} λ, grid 1001"))
}

fn c5_suprema() -> Outcome {
    let n = 100;
    let fine = 100_001;
    let res: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let env = env_for(i);
            let lam = random_lambda(&mut rng(5, i), &env).map_err(|e| e.to_string())?;
            let s = AuditSchedule::new(&lam, &env);
            let xs = env.uniform_grid(fine).unwrap();
            let vs: Vec<f64> = xs.iter().map(|&x| lam.eval(x).unwrap()).collect();
            let mut worst = 0.0f64;
            for k in 0..=100 {
                let j = k * (fine - 1) / 100;
                let (y, ly) = (xs[j], vs[j]);
                let (mut alpha, mut beta) = (0.0f64, 0.0f64);
                for t in j + 1..fine {
                    alpha = alpha.max((vs[t] - y) / (xs[t] - y));
                    beta = beta.max((vs[t] - ly) / (xs[t] + env.tau));
                }
                let (alpha, beta) = (alpha.min(1.0), beta.min(1.0));
                worst = worst
                    .max((s.alpha(y).unwrap() - alpha).abs())
                    .max((s.beta(y).unwrap() - beta).abs());
            }
            if worst > 1e-9 {
                return Err(format!("#{i}: closed form off by {worst:e}"));
            }
            Ok(())
        })
        .collect();
    first_error(res)?;
    Ok(format!(
        "{n} λ, 101 points each against a {fine}-point scan"
    ))
}

/// Admissible λ whose slopes all lie strictly inside (0, 1), with 1 to 4 kinks.
fn strictly_concave(i: usize, env: &Environment) -> LossFunction {
    let mut r = rng(6, 10_000 + i);
    let k = r.gen_range(1..=4);
    let mut xs: Vec<f64> = (0..k)
        .map(|_| r.gen_range(1..1000) as f64 / 1000.0)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut slopes: Vec<f64> = (0..=xs.len()).map(|_| r.gen_range(1e-3..0.999)).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    xs.push(1.0);
    let mut pts = vec![(0.0, 0.0)];
    let (mut x0, mut v) = (0.0, 0.0);
    for (x, s) in xs.into_iter().zip(slopes) {
        v += s * (x - x0);
        pts.push((x, v));
        x0 = x;
    }
    validate_lambda(&PwlFunction::new(pts).unwrap(), env).unwrap()
}

fn c6_debt() -> Outcome {
    let per = 60;
    let mut corpus: Vec<(LossFunction, Environment, &str)> = Vec::new();
    for i in 0..per {
        let env = env_for(i);
        corpus.push((
            random_debt_lambda(&mut rng(6, i), &env).unwrap(),
            env,
            "debt",
        ));
        let env = env_for(i + 1);
        corpus.push((strictly_concave(i, &env), env, "concave"));
        let env = env_for(i + 2);
        corpus.push((
            random_lambda(&mut rng(6, 20_000 + i), &env).unwrap(),
            env,
            "mixed",
        ));
    }
    let res: Vec<_> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, (lam, env, kind))| {
            let m = build_efficient(lam, env, 1001).map_err(|e| e.to_string())?;
            let binary = m
                .a()
                .iter()
                .all(|&a| a.abs() <= 1e-12 || (a - 1.0).abs() <= 1e-12);
            let debt = classify_debt(lam).is_some();
            if binary != debt {
                return Err(format!(
                    "#{i} ({kind}): classify_debt {debt}, binary a {binary}"
                ));
            }
            if (*kind == "debt") != debt && *kind != "mixed" {
                return Err(format!("#{i} ({kind}): classify_debt {debt}"));
            }
            Ok(debt as usize)
        })
        .collect::<Vec<_>>();
    let mut debts = 0;
    for r in res {
        debts += r?;
    }
    Ok(format!(
        "{} λ ({per} debt, {per} strictly concave, {per} mixed), {debts} classified as debt",
        corpus.len()
    ))
}

/// Admissible λ on `types` whose values are multiples of 0.05.
fn lattice_lambdas(types: &[f64], env: &Environment) -> Vec<LossFunction> {
    fn extend(
        types: &[f64],
        pts: &mut Vec<(f64, f64)>,
        env: &Environment,
        out: &mut Vec<LossFunction>,
    ) {
        let i = pts.len();
        if i == types.len() {
            if let Ok(l) = validate_lambda(&PwlFunction::new(pts.clone()).unwrap(), env) {
                out.push(l);
            }
            return;
        }
        let (xp, vp) = pts[i - 1];
        for k in 0..=20 {
            let v = k as f64 * 0.05;
            if v < vp - 1e-12 || v > types[i] + 1e-12 {
                continue;
            }
            let s = (v - vp) / (types[i] - xp);
            if i >= 2 {
                let (xq, vq) = pts[i - 2];
                if s > (vp - vq) / (xp - xq) + 1e-12 {
                    continue;
                }
            }
            pts.push((types[i], v));
            extend(types, pts, env, out);
            pts.pop();
        }
    }
    let mut out = Vec::new();
    extend(types, &mut vec![(types[0], types[0])], env, &mut out);
    out
}

#[derive(Default)]
struct OracleTally {
    checked: usize,
    skipped: usize,
}

fn lattice_exact(m: &Mechanism, inst: &DiscreteInstance) -> bool {
    matches!(round_to_lattice(m, inst), Ok((_, err)) if err <= 1e-12)
}

fn oracle_instance(
    types: &[f64],
    q: usize,
    levels: usize,
    tau: f64,
) -> Result<(OracleTally, OracleTally), String> {
    let env = linear_env(tau);
    let inst = DiscreteInstance::new(types.to_vec(), q, levels, env).map_err(|e| e.to_string())?;

    let built: Vec<Mechanism> = lattice_lambdas(types, &env)
        .iter()
        .map(|l| build_on_grid(l, &env, types.to_vec()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let tightened: Vec<Mechanism> = enumerate_feasible_ic(&inst)
        .map_err(|e| e.to_string())?
        .step_by(97)
        .map(|m| {
            tighten_with(&m, &env, TightenOptions { menu: Menu::Grid })
                .map(|r| r.mechanism_out)
                .map_err(|e| format!("tighten: {e}"))
        })
        .collect::<Result<_, _>>()?;

    let check = |ms: &[Mechanism], mode: Mode| -> Result<OracleTally, String> {
        let verdicts: Vec<Option<Result<(), String>>> = ms
            .par_iter()
            .map(|m| {
                if !lattice_exact(m, &inst) {
                    return None;
                }
                Some(match is_undominated(m, &inst, mode) {
                    Ok(r) if r.verdict == OracleVerdict::UndominatedWithinLattice => Ok(()),
                    Ok(r) => Err(format!("{mode:?}: {:?} dominated by {:?}", m, r.witness)),
                    Err(e) => Err(format!("{mode:?}: {e}")),
                })
            })
            .collect();
        let mut tally = OracleTally::default();
        for v in verdicts {
            match v {
                None => tally.skipped += 1,
                Some(r) => {
                    r?;
                    tally.checked += 1;
                }
            }
        }
        Ok(tally)
    };
    Ok((
        check(&built, Mode::Efficiency)?,
        check(&tightened, Mode::Tightness)?,
    ))
}

const INSTANCES: &[(&[f64], usize, usize, f64)] = &[
    (&[0.0, 0.5, 1.0], 5, 6, 0.0),
    (&[0.0, 0.5, 1.0], 5, 6, 0.5),
    (&[0.0, 0.5, 1.0], 4, 5, 1.0),
    (&[0.0, 0.5, 1.0], 5, 6, 1.0),
    (&[0.0, 0.25, 0.5, 1.0], 2, 5, 0.0),
    (&[0.0, 0.5, 0.75, 1.0], 4, 4, 0.0),
    (&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 3, 4, 0.0),
    (&[0.0, 0.25, 0.5, 1.0], 4, 4, 0.5),
    (&[0.0, 0.5, 0.75, 1.0], 2, 5, 0.25),
    (&[0.0, 0.25, 0.75, 1.0], 3, 4, 0.25),
];

fn c7_bruteforce() -> Outcome {
    let mut lines = Vec::new();
    let mut slowest = Duration::ZERO;
    for (k, &(types, q, levels, tau)) in INSTANCES.iter().enumerate() {
        let start = Instant::now();
        let (built, tight) =
            oracle_instance(types, q, levels, tau).map_err(|e| format!("instance {k}: {e}"))?;
        let took = start.elapsed();
        slowest = slowest.max(took);
        if took > Duration::from_secs(60) {
            return Err(format!("instance {k} took {took:.1?}"));
        }
        if built.checked == 0 || tight.checked == 0 {
            return Err(format!("instance {k}: nothing lattice-exact to check"));
        }
        lines.push(format!(
            "    instance {k}: types {types:?} q={q} L={levels} τ={tau}: constructor {}/{} checked, tighten {}/{} checked ({took:.1?})",
            built.checked,
            built.checked + built.skipped,
            tight.checked,
            tight.checked + tight.skipped,
        ));
    }
    Ok(format!(
        "{} instances, slowest {slowest:.1?}\n{}",
        INSTANCES.len(),
        lines.join("\n")
    ))
}

fn c8_oracle_consistency() -> Outcome {
    let mut corpus: Vec<Mechanism> = Vec::new();
    for i in 0..100 {
        let env = env_for(i);
        corpus.push(random_ic_mechanism(&mut rng(8, i), &env, 2 + i % 60).unwrap());
        let lam = random_lambda(&mut rng(8, 1000 + i), &env).unwrap();
        corpus.push(build_efficient(&lam, &env, 101 + i).unwrap());
    }
    for &(types, q, levels, tau) in &INSTANCES[..2] {
        let inst = DiscreteInstance::new(types.to_vec(), q, levels, linear_env(tau)).unwrap();
        corpus.extend(enumerate_feasible_ic(&inst).unwrap().step_by(11));
    }
    for (i, m) in corpus.iter().enumerate() {
        let (fast, slow) = (m.deviation_loss_table(), bruteforce_deviation_loss(m));
        if fast
            .iter()
            .zip(&slow)
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err(format!("mechanism #{i} on {} points", m.len()));
        }
    }
    Ok(format!("{} mechanisms, bitwise equal", corpus.len()))
}

fn c9_cli() -> Outcome {
    let failures: Vec<String> = common::CASES
        .iter()
        .filter_map(|c| common::check(c).err())
        .collect();
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    Ok(format!(
        "{} golden cases, all seven commands",
        common::CASES.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("constructor soundness", c1_constructor, 60),
        ("tightening guarantees", c2_tighten_guarantees, 120),
        ("idempotence and fixed points", c3_fixed_points, 60),
        ("single crossing", c4_single_crossing, 30),
        ("supremum exactness", c5_suprema, 60),
        ("debt-contract equivalence", c6_debt, 10),
        ("brute-force undominatedness", c7_bruteforce, 600),
        ("oracle consistency", c8_oracle_consistency, 10),
        ("CLI contract", c9_cli, 10),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if took > Duration::from_secs(*budget) {
                Err(format!("took {took:.1?}, budget {budget} s ({detail})"))
            } else {
                Ok(detail)
            }
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name} [{took:.1?}]: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} [{took:.1?}]: {why}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
