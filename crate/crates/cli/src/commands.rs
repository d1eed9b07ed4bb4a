//! One function per subcommand.

use std::io::Write;
use std::path::{Path, PathBuf};

use dips_core::bounds::{
    bound_bennett, bound_corollary, bound_example, bound_hanson_wright, bound_main_tail, BennettForm, ExampleBound,
    Grid, HwVariant,
};
use dips_core::constants::{
    bennett_nu, bound_constants, corollary_constants, graph_constants, permuted_opnorm_b, regression_constants, BSearch,
};
use dips_core::linalg::{self, matrix_from_rows, matrix_to_rows};
use dips_core::perm::{evaluate_dips, exact_expectation, sample_uniform};
use dips_core::stats::{
    build_daniels, build_graph_gamma, build_mww, chatterjee_pair, chatterjee_permutation, chatterjee_xi, load_graph,
    pearson_bound_params, regression_bias_statistic,
};
use dips_core::tensor::{hoeffding_decompose, is_degenerate, DEGENERACY_TOL};
use dips_core::verify::{
    check_bennett_dominance, check_decomposition, check_decoupling_identity, check_main_dominance,
    check_randomization_mgf, check_statistic_bounds, check_supplied_decomposition, null_law, Mode, StatisticInput,
    EXACT_TAIL_CAP,
};
use dips_core::{
    Decomposition, KParameter, Permutation, RngSeed, Sample, ScoreKind, Status, TailCurve, Tensor4, VerificationReport,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{CheckKind, HwArg, ModeArg, RunConfig, StatisticArg, Theorem};
use crate::CliError;

/// Brute-force cross-check of `ν` below this size.
const NU_CHECK_CAP: usize = 5;
const DEFAULT_REPLICATES: u64 = 10_000;
const DEFAULT_LAMBDA: f64 = 0.01;
const RECONSTRUCTION_SAMPLES: u64 = 5;

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Pretty JSON to `path`, or to stdout.
fn emit(path: Option<&Path>, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn load_tensor(cfg: &RunConfig) -> Result<Tensor4, CliError> {
    Ok(Tensor4::load(cfg.require_input()?)?)
}

fn grid(cfg: &RunConfig) -> Result<Option<Vec<f64>>, CliError> {
    match &cfg.grid {
        Some(g) => Ok(Some(g.parse::<Grid>().map_err(|e| CliError::Usage(e.to_string()))?.values())),
        None => Ok(None),
    }
}

fn require_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    grid(cfg)?.map_or_else(|| usage("--grid tmin:tmax:points is required"), Ok)
}

fn k_param(cfg: &RunConfig) -> Result<Option<KParameter>, CliError> {
    cfg.k.map(KParameter::user).transpose().map_err(|e| CliError::Usage(e.to_string()))
}

fn require_k(cfg: &RunConfig) -> Result<KParameter, CliError> {
    k_param(cfg)?.map_or_else(|| usage("--k is required; the theory leaves K unspecified"), Ok)
}

fn search(cfg: &RunConfig) -> BSearch {
    BSearch::with_seed(cfg.seed_or_default())
}

/// Exact when small enough and not overridden, otherwise seeded Monte Carlo.
fn mode(cfg: &RunConfig, n: usize) -> Result<Mode, CliError> {
    match cfg.mode {
        Some(ModeArg::Exact) => Ok(Mode::Exact),
        Some(ModeArg::Mc) => {
            Ok(Mode::Mc { replicates: cfg.replicates.unwrap_or(DEFAULT_REPLICATES), seed: cfg.seed_or_default() })
        }
        None if n <= EXACT_TAIL_CAP => Ok(Mode::Exact),
        None => usage(format!("N = {n} is too large for exact mode; pass --mode mc --seed <s>")),
    }
}

fn degenerate_part(t: &Tensor4) -> Result<Tensor4, CliError> {
    Ok(if is_degenerate(t, DEGENERACY_TOL) { t.clone() } else { hoeffding_decompose(t)?.degenerate })
}

fn product_factors(t: &Tensor4) -> Result<(&dips_core::Matrix, &dips_core::Matrix), CliError> {
    t.factors().ok_or_else(|| CliError::Usage("this operation needs a product-form tensor (form: product)".into()))
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_tensor(cfg)?;
    let n = t.n()?;
    let dec = hoeffding_decompose(&t)?;
    let mut checks = Vec::new();
    for r in 0..RECONSTRUCTION_SAMPLES {
        let p = sample_uniform(n, RngSeed { seed: cfg.seed_or_default(), stream: r })?;
        checks.push(json!({
            "permutation": p,
            "statistic": evaluate_dips(&t, &p, true)?,
            "reconstruction": dec.reconstruct(&p)?,
        }));
    }
    let summary = json!({
        "n": n,
        "constant": dec.constant,
        "linear_max_abs": linalg::max_abs(&dec.linear),
        "degenerate_max_abs": dec.degenerate.max_abs(),
        "degenerate": is_degenerate(&dec.degenerate, DEGENERACY_TOL),
        "reconstruction": checks,
    });
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir)?;
        emit(Some(&dir.join("linear.json")), &json!(matrix_to_rows(&dec.linear)))?;
        emit(Some(&dir.join("degenerate.json")), &dec.degenerate.to_json_value()?)?;
        emit(Some(&dir.join("summary.json")), &summary)?;
    }
    emit(None, &summary)
}

/// Reads a directory written by `decompose`.
pub fn load_decomposition(dir: &Path) -> Result<Decomposition, CliError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(dir.join("linear.json"))?)?;
    let degenerate = Tensor4::load(dir.join("degenerate.json"))?;
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
    let constant = summary["constant"]
        .as_f64()
        .ok_or_else(|| CliError::Input(dips_core::DipsError::InvalidInput("summary.json has no constant".into())))?;
    Ok(Decomposition { linear: matrix_from_rows(&rows)?, degenerate, constant })
}

fn constants_value(t: &Tensor4, cfg: &RunConfig) -> Result<Value, CliError> {
    if is_degenerate(t, DEGENERACY_TOL) {
        return Ok(json!({"kind": "degenerate", "constants": bound_constants(t, &search(cfg), NU_CHECK_CAP)?}));
    }
    let mut out = json!({"kind": "general", "corollary": corollary_constants(t, &search(cfg))?});
    if let Some((c, a)) = t.factors() {
        out["bennett"] = json!({
            "nu": bennett_nu(c, a, NU_CHECK_CAP)?,
            "c_opnorm": linalg::operator_norm(c, linalg::OPNORM_TOL)?.value,
            "c_frob": linalg::frobenius(c),
            "a_frob": linalg::frobenius(a),
        });
    }
    Ok(out)
}

pub fn cmd_constants(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_tensor(cfg)?;
    emit(cfg.output.as_deref(), &constants_value(&t, cfg)?)
}

fn write_curve(cfg: &RunConfig, curve: &TailCurve) -> Result<(), CliError> {
    match &cfg.output {
        Some(prefix) => {
            curve.write_json(with_ext(prefix, "json"))?;
            curve.write_csv(with_ext(prefix, "csv"))?;
            Ok(())
        }
        None => emit(None, &serde_json::to_value(curve)?),
    }
}

pub fn cmd_bound(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_tensor(cfg)?;
    let grid = require_grid(cfg)?;
    let theorem = cfg.theorem.unwrap_or(Theorem::Main);
    let curve = match theorem {
        Theorem::Main => {
            if !is_degenerate(&t, DEGENERACY_TOL) {
                return Err(CliError::Input(dips_core::DipsError::NotDegenerate {
                    max_abs: dips_core::tensor::max_single_slot_average(&t)?,
                }));
            }
            let consts = bound_constants(&t, &search(cfg), NU_CHECK_CAP)?;
            let (v, b) = (consts.v.value, consts.b.upper);
            TailCurve::evaluate("main-explicit", serde_json::to_value(&consts)?, &grid, |x| bound_main_tail(v, b, x))?
        }
        Theorem::HansonWright => {
            let k = require_k(cfg)?;
            let (c, a) = product_factors(&t)?;
            let variant = match cfg.variant.unwrap_or(HwArg::General) {
                HwArg::Psd => HwVariant::Psd,
                HwArg::General => HwVariant::General { max_hadamard: permuted_opnorm_b(&t, &search(cfg))? },
            };
            let consts = json!({
                "variant": variant,
                "c_frob": linalg::frobenius(c),
                "c_opnorm": linalg::operator_norm(c, linalg::OPNORM_TOL)?.value,
                "a_max_abs": linalg::max_abs(a),
                "k": k,
            });
            TailCurve::evaluate("hanson-wright", consts, &grid, |x| bound_hanson_wright(c, &variant, &k, x))?
        }
        Theorem::Bennett => {
            let (c, a) = product_factors(&t)?;
            let form = k_param(cfg)?.map_or(BennettForm::Explicit, BennettForm::WithK);
            let nu = bennett_nu(c, a, NU_CHECK_CAP)?;
            let consts = json!({
                "nu": nu,
                "c_opnorm": linalg::operator_norm(c, linalg::OPNORM_TOL)?.value,
                "a_frob": linalg::frobenius(a),
                "form": form,
            });
            TailCurve::evaluate("bennett", consts, &grid, |x| bound_bennett(c, a, nu, x, &form))?
        }
        Theorem::Corollary => {
            let k = require_k(cfg)?;
            let consts = corollary_constants(&t, &search(cfg))?;
            TailCurve::evaluate("corollary", json!({"constants": consts, "k": k}), &grid, |x| {
                bound_corollary(&consts, &k, x)
            })?
        }
    };
    write_curve(cfg, &curve)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_tensor(cfg)?;
    let include_diagonal = cfg.require_include_diagonal()?;
    let mode = mode(cfg, t.n()?)?;
    let law = null_law(&t, mode, include_diagonal)?;
    let grid = match grid(cfg)? {
        Some(g) => g,
        None => Grid::new(0.0, law.max_abs_deviation(), 50)?.values(),
    };
    let tail = law.tail(&grid);
    match &cfg.output {
        Some(prefix) => {
            std::fs::write(with_ext(prefix, "json"), serde_json::to_string_pretty(&tail)? + "\n")?;
            tail.write_csv(with_ext(prefix, "csv"))?;
            Ok(())
        }
        None => emit(None, &serde_json::to_value(&tail)?),
    }
}

#[derive(Deserialize)]
struct TwoSamples {
    first: Vec<f64>,
    second: Vec<f64>,
}

#[derive(Deserialize)]
struct RegressionInput {
    x: Vec<Vec<f64>>,
    e: Vec<f64>,
    treated: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn statistic_input(cfg: &RunConfig, stat: StatisticArg) -> Result<StatisticInput, CliError> {
    let input = cfg.require_input()?;
    let daniels = |kind| -> Result<StatisticInput, CliError> {
        Ok(StatisticInput::Daniels { sample: Sample::from_csv(input)?, kind })
    };
    match stat {
        StatisticArg::Kendall => daniels(ScoreKind::Kendall),
        StatisticArg::Spearman => daniels(ScoreKind::Spearman),
        StatisticArg::Pearson => daniels(ScoreKind::Pearson),
        StatisticArg::Chatterjee => Ok(StatisticInput::Chatterjee { n: Sample::from_csv(input)?.n() }),
        StatisticArg::Mww => {
            let s: TwoSamples = read_json(input)?;
            let (m, n) = (s.first.len(), s.second.len());
            Ok(StatisticInput::Mww { m, n, pooled: s.first.into_iter().chain(s.second).collect() })
        }
        StatisticArg::Graph => {
            let second = cfg.input2.as_deref().ok_or_else(|| CliError::Usage("--input2 is required".into()))?;
            Ok(StatisticInput::Graph { ex: load_graph(input)?, ey: load_graph(second)? })
        }
        StatisticArg::Regression => usage("the regression statistic has no displayed tail bound to check"),
    }
}

fn report_checks(cfg: &RunConfig, reports: &[VerificationReport]) -> Result<(), CliError> {
    let mut text = String::new();
    for r in reports {
        text.push_str(&r.to_json_line()?);
        text.push('\n');
    }
    match &cfg.output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    let failed = reports.iter().filter(|r| r.status == Status::Fail).count();
    if failed > 0 {
        return Err(CliError::Failed(failed));
    }
    Ok(())
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let checks = cfg.check.clone().unwrap_or_else(|| vec![CheckKind::Decomposition]);
    if checks.contains(&CheckKind::Statistic) {
        if checks.len() > 1 {
            return usage("the statistic check reads a sample, not a tensor; run it on its own");
        }
        let stat = cfg.statistic.ok_or_else(|| CliError::Usage("--statistic is required".into()))?;
        let input = statistic_input(cfg, stat)?;
        let n = match &input {
            StatisticInput::Mww { m, n, .. } => m + n,
            StatisticInput::Daniels { sample, .. } => sample.n(),
            StatisticInput::Chatterjee { n } => *n,
            StatisticInput::Graph { ex, .. } => ex.n(),
        };
        let report = check_statistic_bounds(&input, Some(require_k(cfg)?), mode(cfg, n)?, &require_grid(cfg)?)?;
        return report_checks(cfg, &[report]);
    }
    let t = load_tensor(cfg)?;
    let mut reports = Vec::with_capacity(checks.len());
    for check in checks {
        let report = match check {
            CheckKind::Decomposition => match &cfg.decomposition {
                Some(dir) => check_supplied_decomposition(&t, &load_decomposition(dir)?)?,
                None => check_decomposition(&t)?,
            },
            CheckKind::Decoupling => {
                let d = degenerate_part(&t)?;
                let p: Permutation = sample_uniform(d.n()?, RngSeed::new(cfg.seed_or_default()))?;
                check_decoupling_identity(&d, &p)?
            }
            CheckKind::Dominance => {
                let d = degenerate_part(&t)?;
                let b = permuted_opnorm_b(&d, &search(cfg))?;
                check_main_dominance(&d, b.upper, mode(cfg, d.n()?)?, &require_grid(cfg)?)?
            }
            CheckKind::Bennett => {
                let (c, a) = product_factors(&t)?;
                check_bennett_dominance(c, a, mode(cfg, c.nrows())?, &require_grid(cfg)?)?
            }
            CheckKind::Randomization => check_randomization_mgf(
                &t,
                cfg.lambda.unwrap_or(DEFAULT_LAMBDA),
                cfg.replicates.unwrap_or(DEFAULT_REPLICATES),
                cfg.seed_or_default(),
            )?,
            CheckKind::Statistic => unreachable!("handled above"),
        };
        reports.push(report);
    }
    report_checks(cfg, &reports)
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<(), CliError> {
    let stat = cfg.statistic.ok_or_else(|| CliError::Usage("--statistic is required".into()))?;
    if stat == StatisticArg::Regression {
        return stats_regression(cfg);
    }
    let input = statistic_input(cfg, stat)?;
    let (pair, value, bound, extra) = match &input {
        StatisticInput::Daniels { sample, kind } => {
            let pair = build_daniels(sample, *kind)?;
            let bound = match kind {
                ScoreKind::Pearson => pearson_bound_params(sample)?,
                ScoreKind::Kendall => ExampleBound::Kendall { n: sample.n() },
                _ => ExampleBound::Spearman { n: sample.n() },
            };
            let value = pair.statistic(&Permutation::identity(sample.n()))?;
            (pair, value, bound, Value::Null)
        }
        StatisticInput::Chatterjee { n } => {
            let sample = Sample::from_csv(cfg.require_input()?)?;
            let p = chatterjee_permutation(&sample)?;
            (chatterjee_pair(*n)?, chatterjee_xi(&p)?, ExampleBound::Chatterjee { n: *n }, json!({"permutation": p}))
        }
        StatisticInput::Mww { m, n, pooled } => {
            let pair = build_mww(*m, *n, pooled)?;
            let value = pair.statistic(&Permutation::identity(m + n))?;
            (pair, value, ExampleBound::Mww { m: *m, n: *n }, Value::Null)
        }
        StatisticInput::Graph { ex, ey } => {
            let pair = build_graph_gamma(ex, ey)?;
            let value = pair.statistic(&Permutation::identity(ex.n()))?;
            let g = graph_constants(ex, ey, &search(cfg))?;
            let valid = g.printed_is_valid();
            (pair, value, ExampleBound::Graph { constants: g.printed }, json!({"graph": g, "printed_valid": valid}))
        }
    };
    let null_mean = pair.transform(exact_expectation(&pair.tensor()?, true)?);
    let mut out = json!({
        "statistic": stat,
        "n": pair.n(),
        "value": value,
        "null_mean": null_mean,
        "bound_parameters": bound,
    });
    if !extra.is_null() {
        out["details"] = extra;
    }
    if let (Some(grid), Some(k)) = (grid(cfg)?, k_param(cfg)?) {
        let curve =
            TailCurve::evaluate("example", serde_json::to_value(bound)?, &grid, |t| bound_example(&bound, &k, t))?;
        out["bound"] = serde_json::to_value(curve)?;
        out["conditional_on"] = json!(format!("supplied K = {}", k.value));
    }
    emit(cfg.output.as_deref(), &out)
}

fn stats_regression(cfg: &RunConfig) -> Result<(), CliError> {
    let input: RegressionInput = read_json(cfg.require_input()?)?;
    let x = matrix_from_rows(&input.x)?;
    let n = x.nrows();
    let bias = regression_bias_statistic(&x, &input.e, input.treated)?;
    let p1 = input.treated as f64 / n as f64;
    let consts = regression_constants(&x, &input.e, p1)?;
    let value = evaluate_dips(&bias.tensor, &Permutation::identity(n), true)?;
    emit(
        cfg.output.as_deref(),
        &json!({
            "statistic": StatisticArg::Regression,
            "n": n,
            "value": value,
            "null_mean": bias.expectation,
            "constants": consts,
        }),
    )
}
