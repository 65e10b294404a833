//! Subcommand implementations: file ingestion, core calls, and emission.

use crate::output::{csv, to_bits};
use crate::{Command, RunArgs};
use extremal_core::entropy::{
    knn_entropy, mixture_entropy, mixture_entropy_mc, mixture_entropy_quadrature,
    uniform_plus_gaussian_entropy, EstimatorConfig,
};
use extremal_core::exec::Parallelism;
use extremal_core::fisher::{cramer_rao_check, debruijn_check, fii_check};
use extremal_core::matrix::SymMatrix;
use extremal_core::mixture::GaussianMixture;
use extremal_core::solver::{solve, ExtremalInstance, KktSolution, SolverConfig};
use extremal_core::verify::{
    counterexample_construct, path_derivative_check, standard_battery, gaussian_optimality_harness,
    trace_path, Candidate, CounterexampleSpec, DEFAULT_LAMBDA_GRID,
};
use extremal_core::{capacity, enhance};
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub struct Settings {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub bits: bool,
    pub parallelism: Parallelism,
    pub points: Option<usize>,
    pub battery: String,
    pub tol: HashMap<String, f64>,
}

impl Settings {
    pub fn from_args(args: &RunArgs) -> Result<Self, String> {
        let seed = match args.seed {
            Some(s) => s,
            None => match std::env::var("EXTREMAL_SEED") {
                Ok(v) => v
                    .parse::<u64>()
                    .map_err(|_| format!("EXTREMAL_SEED is not an integer: {v}"))?,
                Err(_) => 0,
            },
        };
        let parallelism = Parallelism::parse(&args.parallelism)
            .ok_or_else(|| format!("bad --parallelism value: {}", args.parallelism))?;
        let mut tol = HashMap::new();
        for kv in &args.tol {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("bad --tol entry (expected KEY=VAL): {kv}"))?;
            let val: f64 = v.parse().map_err(|_| format!("bad tolerance value: {kv}"))?;
            if !["kkt", "quad", "quad2d", "check"].contains(&k) {
                return Err(format!("unknown tolerance key: {k}"));
            }
            tol.insert(k.to_string(), val);
        }
        Ok(Settings {
            seed,
            out: args.out.clone(),
            bits: args.bits,
            parallelism,
            points: args.points,
            battery: args.battery.clone(),
            tol,
        })
    }

    fn solver_cfg(&self) -> SolverConfig {
        SolverConfig {
            kkt_tol: self.tol.get("kkt").copied().unwrap_or(1e-8),
            seed: self.seed,
            parallelism: self.parallelism,
            ..Default::default()
        }
    }

    fn est_cfg(&self) -> EstimatorConfig {
        EstimatorConfig {
            quad_tol: self.tol.get("quad").copied().unwrap_or(1e-9),
            quad_tol_2d: self.tol.get("quad2d").copied().unwrap_or(1e-7),
            seed: self.seed,
            ..Default::default()
        }
    }

    fn check_tol(&self) -> f64 {
        self.tol.get("check").copied().unwrap_or(1e-7)
    }
}

pub struct Outcome {
    pub check_failed: bool,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(settings: &Settings, value: Value) -> Result<(), String> {
    let value = if settings.bits { to_bits(value) } else { value };
    let text = serde_json::to_string_pretty(&value).map_err(|e| e.to_string())?;
    write_text(settings, &format!("{text}\n"))
}

fn write_text(settings: &Settings, text: &str) -> Result<(), String> {
    match &settings.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn dispatch(cmd: &Command, settings: &Settings) -> Result<Outcome, String> {
    extremal_core::exec::scope(settings.parallelism, || run_command(cmd, settings))
}

fn run_command(cmd: &Command, settings: &Settings) -> Result<Outcome, String> {
    match cmd {
        Command::Solve { instance } => {
            let inst: ExtremalInstance = read_json(instance)?;
            let rep = solve(&inst, &settings.solver_cfg()).map_err(|e| e.to_string())?;
            let failed = !rep.certified;
            emit(settings, serde_json::to_value(&rep).map_err(|e| e.to_string())?)?;
            Ok(Outcome { check_failed: failed })
        }
        Command::Enhance { instance, solution } => {
            let inst: ExtremalInstance = read_json(instance)?;
            // accept either a bare solution or a whole solve report
            let sol: KktSolution = match read_json::<KktSolution>(solution) {
                Ok(s) => s,
                Err(first) => read_json::<extremal_core::solver::SolveReport>(solution)
                    .map(|r| r.solution)
                    .map_err(|_| first)?,
            };
            let e = enhance::enhance(&inst, &sol).map_err(|e| e.to_string())?;
            let tol = settings.check_tol();
            let orderings = enhance::check_orderings(&e, tol);
            let proportionality = if inst.mu > 1.0 {
                Some(enhance::check_proportionality(&e, tol).map_err(|e| e.to_string())?)
            } else {
                None
            };
            let value_equality =
                enhance::check_value_equality(&e, tol).map_err(|e| e.to_string())?;
            let failed = !orderings.pass
                || proportionality.as_ref().is_some_and(|p| !p.pass)
                || !value_equality.pass;
            emit(
                settings,
                json!({
                    "ktz1": e.ktz1,
                    "ktz2": e.ktz2,
                    "f_nats": e.f_nats,
                    "orderings": orderings,
                    "proportionality": proportionality,
                    "value_equality": value_equality,
                }),
            )?;
            Ok(Outcome { check_failed: failed })
        }
        Command::VerifyExtremal { instance } => {
            let inst: ExtremalInstance = read_json(instance)?;
            if settings.battery != "std" {
                return Err(format!("unknown battery: {}", settings.battery));
            }
            let cands: Vec<Candidate> = standard_battery(settings.seed)
                .into_iter()
                .filter(|c| c.dim() == inst.dim())
                .map(|c| c.fitted_to(&inst.s))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            if cands.is_empty() {
                return Err(format!(
                    "the {} battery has no candidates of dimension {}",
                    settings.battery,
                    inst.dim()
                ));
            }
            let rep = gaussian_optimality_harness(&inst, &cands, &settings.est_cfg(), &settings.solver_cfg())
                .map_err(|e| e.to_string())?;
            let failed = !rep.all_pass;
            emit(settings, serde_json::to_value(&rep).map_err(|e| e.to_string())?)?;
            Ok(Outcome { check_failed: failed })
        }
        Command::PathCheck { instance, start } => {
            let inst: ExtremalInstance = read_json(instance)?;
            let x0 = match start {
                Some(p) => read_json::<GaussianMixture>(p)?,
                None => {
                    let base = GaussianMixture::symmetric_pair(1.0, 0.5)
                        .map_err(|e| e.to_string())?;
                    match (Candidate::Mixture { mixture: base }).fitted_to(&inst.s) {
                        Ok(Candidate::Mixture { mixture }) => mixture,
                        Ok(_) => unreachable!("mixture candidates stay mixtures"),
                        Err(e) => return Err(e.to_string()),
                    }
                }
            };
            let trace = trace_path(
                &x0,
                &inst,
                &DEFAULT_LAMBDA_GRID,
                &settings.est_cfg(),
                &settings.solver_cfg(),
            )
            .map_err(|e| e.to_string())?;
            let mut pair_pass = true;
            for w in trace.points.windows(2) {
                let r = path_derivative_check(&w[0], &w[1], settings.check_tol())
                    .map_err(|e| e.to_string())?;
                if !r.pass && !r.inconclusive {
                    pair_pass = false;
                }
            }
            let failed = !trace.monotone_within_3_stderr || !pair_pass;
            if settings
                .out
                .as_ref()
                .is_some_and(|p| p.extension().is_some_and(|e| e == "csv"))
            {
                let unit = if settings.bits { "bits" } else { "nats" };
                let scale = if settings.bits {
                    1.0 / std::f64::consts::LN_2
                } else {
                    1.0
                };
                let header = [
                    "lambda".to_string(),
                    format!("gbar_{unit}"),
                    format!("gbar_stderr_{unit}"),
                    format!("dgbar_analytic_{unit}"),
                    format!("dgbar_fd_{unit}"),
                ];
                let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
                let rows: Vec<Vec<f64>> = trace
                    .points
                    .iter()
                    .map(|p| {
                        vec![
                            p.lambda,
                            p.gbar.value_nats * scale,
                            p.gbar.stderr_nats * scale,
                            p.gbar_prime_analytic * scale,
                            p.gbar_prime_fd * scale,
                        ]
                    })
                    .collect();
                write_text(settings, &csv(&hdr, &rows))?;
            } else {
                emit(settings, serde_json::to_value(&trace).map_err(|e| e.to_string())?)?;
            }
            Ok(Outcome { check_failed: failed })
        }
        Command::Counterexample { spec } => {
            let spec: CounterexampleSpec = read_json(spec)?;
            let rep = counterexample_construct(&spec, &settings.est_cfg())
                .map_err(|e| e.to_string())?;
            let failed = !rep.found;
            emit(settings, serde_json::to_value(&rep).map_err(|e| e.to_string())?)?;
            Ok(Outcome { check_failed: failed })
        }
        Command::BcRegion { instance } => {
            let inst: capacity::BcInstance = read_json(instance)?;
            let n = settings.points.unwrap_or(33);
            let pts = capacity::bc_region_sweep(&inst, n, &settings.solver_cfg())
                .map_err(|e| e.to_string())?;
            let unit = if settings.bits { "bits" } else { "nats" };
            let scale = if settings.bits {
                1.0 / std::f64::consts::LN_2
            } else {
                1.0
            };
            let header = [
                "theta".to_string(),
                "mu1".to_string(),
                "mu2".to_string(),
                format!("r1_{unit}"),
                format!("r2_{unit}"),
                format!("bound_{unit}"),
            ];
            let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| {
                    vec![
                        p.mu2.atan2(p.mu1),
                        p.mu1,
                        p.mu2,
                        p.r1_nats * scale,
                        p.r2_nats * scale,
                        p.weighted_sum_bound_nats * scale,
                    ]
                })
                .collect();
            write_text(settings, &csv(&hdr, &rows))?;
            Ok(Outcome { check_failed: false })
        }
        Command::DscBound { instance, mu1, mu2 } => {
            let inst: capacity::DscInstance = read_json(instance)?;
            let bound =
                capacity::dsc_weighted_bound(&inst, *mu1, *mu2).map_err(|e| e.to_string())?;
            let (r1, r2) =
                capacity::dsc_separation_rates(&inst, &bound.k).map_err(|e| e.to_string())?;
            emit(
                settings,
                json!({
                    "value_nats": bound.value_nats,
                    "k": bound.k,
                    "bite_flag": bound.bite_flag,
                    "separation_r1_nats": r1,
                    "separation_r2_nats": r2,
                }),
            )?;
            Ok(Outcome { check_failed: false })
        }
        Command::FiiCheck { spec } => {
            #[derive(Deserialize)]
            struct FiiSpec {
                u: GaussianMixture,
                v: GaussianMixture,
                a: Vec<Vec<f64>>,
            }
            let s: FiiSpec = read_json(spec)?;
            let n = s.u.dim();
            if s.a.len() != n || s.a.iter().any(|r| r.len() != n) {
                return Err("matrix a must be square and match the mixture dimension".into());
            }
            let flat: Vec<f64> = s.a.iter().flatten().copied().collect();
            let a = extremal_core::nalgebra::DMatrix::from_row_slice(n, n, &flat);
            let rep = fii_check(&s.u, &s.v, &a, &settings.est_cfg()).map_err(|e| e.to_string())?;
            let failed = !rep.pass;
            emit(settings, serde_json::to_value(&rep).map_err(|e| e.to_string())?)?;
            Ok(Outcome { check_failed: failed })
        }
        Command::CrbCheck { dist } => {
            let m: GaussianMixture = read_json(dist)?;
            let rep = cramer_rao_check(&m, &settings.est_cfg()).map_err(|e| e.to_string())?;
            let failed = !rep.pass;
            emit(settings, serde_json::to_value(&rep).map_err(|e| e.to_string())?)?;
            Ok(Outcome { check_failed: failed })
        }
        Command::DebruijnCheck { spec } => {
            #[derive(Deserialize)]
            struct DbSpec {
                x: GaussianMixture,
                kz: SymMatrix,
                t: f64,
            }
            let s: DbSpec = read_json(spec)?;
            let rep =
                debruijn_check(&s.x, &s.kz, s.t, &settings.est_cfg()).map_err(|e| e.to_string())?;
            let failed = !rep.pass && !rep.inconclusive;
            emit(settings, serde_json::to_value(&rep).map_err(|e| e.to_string())?)?;
            Ok(Outcome { check_failed: failed })
        }
        Command::EntropyEst {
            dist,
            samples,
            method,
        } => {
            let cfg = settings.est_cfg();
            let value = match method.as_str() {
                "knn" => {
                    let path = samples
                        .as_ref()
                        .ok_or("--method knn requires --samples FILE.csv")?;
                    let rows = read_samples(path)?;
                    let (est, jittered) =
                        knn_entropy(&rows, cfg.knn_k).map_err(|e| e.to_string())?;
                    json!({"estimate": est, "jittered": jittered})
                }
                m => {
                    let path = dist.as_ref().ok_or("--dist FILE.json is required")?;
                    let parsed: DistSpec = read_json(path)?;
                    let est = match (parsed, m) {
                        (DistSpec::Uniform { uniform }, _) => uniform_plus_gaussian_entropy(
                            uniform.half_width,
                            uniform.sigma2,
                            &cfg,
                        )
                        .map_err(|e| e.to_string())?,
                        (DistSpec::Mixture(mix), "quad") => {
                            if mix.dim() <= 2 {
                                mixture_entropy_quadrature(&mix, &cfg).map_err(|e| e.to_string())?
                            } else {
                                return Err("quadrature supports dimensions 1 and 2".into());
                            }
                        }
                        (DistSpec::Mixture(mix), "mc") => {
                            mixture_entropy_mc(&mix, &cfg).map_err(|e| e.to_string())?
                        }
                        (DistSpec::Mixture(mix), _) => {
                            mixture_entropy(&mix, &cfg).map_err(|e| e.to_string())?
                        }
                    };
                    json!({"estimate": est})
                }
            };
            emit(settings, value)?;
            Ok(Outcome { check_failed: false })
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistSpec {
    Uniform { uniform: UniformSpec },
    Mixture(GaussianMixture),
}

#[derive(Deserialize)]
struct UniformSpec {
    half_width: f64,
    sigma2: f64,
}

fn read_samples(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| format!("{}:{}: {e}", path.display(), ln + 1))?);
    }
    Ok(rows)
}
