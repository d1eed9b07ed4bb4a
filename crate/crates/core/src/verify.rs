//! Exact-enumeration and Monte Carlo checks of the decomposition, the
//! decoupling identity, the randomization inequality and bound dominance.

use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{bound_bennett, bound_example, bound_main_tail, BennettForm, ExampleBound, KParameter, TailCurve};
use crate::constants::{bennett_nu, graph_constants, variance_v, BSearch, EdgeSet};
use crate::error::{invalid, DipsError, Result};
use crate::linalg::{self, Matrix};
use crate::numeric::{rel_close, KahanSum};
use crate::perm::{enumerate_all, evaluate_dips, exact_expectation, sample_with, Permutation, RngSeed};
use crate::stats::{build_daniels, build_graph_gamma, build_mww, chatterjee_pair, Sample, ScoreKind, ScorePair};
use crate::tensor::{
    hoeffding_decompose, is_degenerate, partial_average, require_degenerate, tilde_d_restrict, Decomposition,
    IndexSplit, Slots, Tensor4, DEGENERACY_TOL,
};

/// Largest `N` for exact null laws.
pub const EXACT_TAIL_CAP: usize = 8;
/// Largest `N` for the enumerated decomposition check.
pub const DECOMPOSITION_CAP: usize = 6;
/// Largest `N` and `M` for the randomization check.
pub const RANDOMIZATION_CAP: usize = 5;
/// Confidence level parameter of the uniform band.
pub const DKW_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// One check result; serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub status: Status,
    /// The quantity the check is about (worst error, worst gap, ...).
    pub statistic: f64,
    /// Distance to the pass/fail boundary; negative on failure.
    pub margin: f64,
    /// Enumeration size or number of replicates.
    pub size: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub details: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<serde_json::Value>,
}

impl VerificationReport {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Exact enumeration or seeded Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Mode {
    Exact,
    Mc { replicates: u64, seed: u64 },
}

impl Mode {
    fn seed(&self) -> Option<u64> {
        match self {
            Mode::Exact => None,
            Mode::Mc { seed, .. } => Some(*seed),
        }
    }
}

/// Uniform half-width `√(ln(2/δ)/(2R))`.
pub fn dkw_half_width(replicates: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * replicates as f64)).sqrt()
}

/// The null law of `S(π) - E[S]`, exact or sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct NullLaw {
    sorted: Vec<f64>,
    pub mean: f64,
    pub half_width: f64,
    pub mode: Mode,
    slack: f64,
}

impl NullLaw {
    /// Builds the law of `deviation(π)` with `π` enumerated or sampled.
    /// Replicate `r` draws from stream `r`; results are kept in replicate
    /// order, so the law does not depend on the thread count.
    pub fn from_fn<F>(n: usize, mean: f64, mode: Mode, deviation: F) -> Result<Self>
    where
        F: Fn(&Permutation) -> Result<f64> + Sync,
    {
        let mut devs: Vec<f64> = match mode {
            Mode::Exact => {
                if n > EXACT_TAIL_CAP {
                    return invalid(format!("exact null law needs N <= {EXACT_TAIL_CAP}, got {n}"));
                }
                enumerate_all(n)?.map(|p| deviation(&p)).collect::<Result<_>>()?
            }
            Mode::Mc { replicates, seed } => {
                if replicates == 0 {
                    return invalid("replicates must be >= 1");
                }
                (0..replicates)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = RngSeed { seed, stream: r }.rng();
                        deviation(&sample_with(n, &mut rng)?)
                    })
                    .collect::<Result<_>>()?
            }
        };
        devs.sort_by(f64::total_cmp);
        let half_width = match mode {
            Mode::Exact => 0.0,
            Mode::Mc { replicates, .. } => dkw_half_width(replicates, DKW_DELTA),
        };
        Ok(Self { sorted: devs, mean, half_width, mode, slack: 1e-10 * 1f64.max(mean.abs()) })
    }

    pub fn size(&self) -> u64 {
        self.sorted.len() as u64
    }

    /// `P(S - E[S] >= t)`; deviations within rounding of `t` count as exceedances.
    pub fn survival(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|&d| d < t - self.slack);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    pub fn max_deviation(&self) -> f64 {
        self.sorted.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.sorted.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    pub fn tail(&self, grid: &[f64]) -> EmpiricalTail {
        EmpiricalTail {
            grid: grid.to_vec(),
            survival: grid.iter().map(|&t| self.survival(t)).collect(),
            half_width: self.half_width,
            mean: self.mean,
            size: self.size(),
            mode: self.mode,
        }
    }
}

/// Empirical survival function on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTail {
    pub grid: Vec<f64>,
    pub survival: Vec<f64>,
    /// Zero in exact mode.
    pub half_width: f64,
    pub mean: f64,
    pub size: u64,
    #[serde(flatten)]
    pub mode: Mode,
}

impl EmpiricalTail {
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "survival", "lower", "upper"])?;
        for (t, s) in self.grid.iter().zip(&self.survival) {
            let lo = (s - self.half_width).max(0.0);
            let hi = (s + self.half_width).min(1.0);
            w.write_record([t.to_string(), s.to_string(), lo.to_string(), hi.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Null law of `Q - E[Q]` for `Q = Σ w(i,j,π(i),π(j))`.
pub fn null_law(t: &Tensor4, mode: Mode, include_diagonal: bool) -> Result<NullLaw> {
    let n = t.n()?;
    let mean = exact_expectation(t, include_diagonal)?;
    NullLaw::from_fn(n, mean, mode, |p| Ok(evaluate_dips(t, p, include_diagonal)? - mean))
}

/// `P(Q - E[Q] >= t)` on `grid`, with a uniform band in Monte Carlo mode.
pub fn empirical_tail(t: &Tensor4, mode: Mode, include_diagonal: bool, grid: &[f64]) -> Result<EmpiricalTail> {
    Ok(null_law(t, mode, include_diagonal)?.tail(grid))
}

/// Compares a bound curve with an empirical tail on the same grid.
///
/// Exact tails pass iff the survival never exceeds the bound. Sampled tails
/// fail if even the lower band edge exceeds the bound somewhere, are
/// inconclusive if only the upper band edge does, and pass otherwise.
pub fn check_dominance(curve: &TailCurve, tail: &EmpiricalTail) -> Result<VerificationReport> {
    if curve.grid.len() != tail.grid.len() || curve.grid.iter().zip(&tail.grid).any(|(a, b)| !rel_close(*a, *b, 1e-12))
    {
        return invalid("bound and empirical tail are on different grids");
    }
    let hw = tail.half_width;
    let mut status = Status::Pass;
    let mut margin = f64::INFINITY;
    let mut worst = 0;
    let mut witness = None;
    for (p, (&b, &s)) in curve.bound.iter().zip(&tail.survival).enumerate() {
        let upper = (s + hw).min(1.0);
        if b - upper < margin {
            margin = b - upper;
            worst = p;
        }
        if s - hw > b {
            status = Status::Fail;
            witness.get_or_insert_with(|| json!({"t": curve.grid[p], "survival": s, "bound": b}));
        } else if upper > b && status == Status::Pass {
            status = Status::Inconclusive;
        }
    }
    Ok(VerificationReport {
        name: format!("dominance:{}", curve.label),
        status,
        statistic: tail.survival.get(worst).copied().unwrap_or(0.0),
        margin,
        size: tail.size,
        seed: tail.mode.seed(),
        details: json!({
            "worst_t": curve.grid.get(worst),
            "worst_bound": curve.bound.get(worst),
            "half_width": hw,
            "points": curve.grid.len(),
        }),
        witness,
    })
}

/// Enumerates `S_N` and checks a supplied decomposition of `t`.
pub fn check_supplied_decomposition(t: &Tensor4, dec: &Decomposition) -> Result<VerificationReport> {
    let n = t.n()?;
    if n > DECOMPOSITION_CAP {
        return invalid(format!("decomposition check needs N <= {DECOMPOSITION_CAP}, got {n}"));
    }
    if dec.linear.shape() != (n, n) || dec.degenerate.shape() != [n; 4] {
        return invalid("decomposition does not match the tensor size");
    }
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut count = 0u64;
    for p in enumerate_all(n)? {
        let lhs = evaluate_dips(t, &p, true)?;
        let rhs = dec.reconstruct(&p)?;
        let err = (lhs - rhs).abs() / 1f64.max(lhs.abs());
        if err > worst {
            worst = err;
            if err > 1e-10 {
                witness = Some(json!({"permutation": p, "statistic": lhs, "reconstruction": rhs}));
            }
        }
        count += 1;
    }
    let degenerate = is_degenerate(&dec.degenerate, DEGENERACY_TOL);
    let a_sum: f64 = dec.linear.iter().sum();
    let a_scale = 1f64.max(dec.linear.iter().map(|x| x.abs()).sum());
    let a_ok = a_sum.abs() <= 1e-10 * a_scale;
    let ok = worst <= 1e-10 && degenerate && a_ok;
    Ok(VerificationReport {
        name: "decomposition".into(),
        status: if ok { Status::Pass } else { Status::Fail },
        statistic: worst,
        margin: 1e-10 - worst,
        size: count,
        seed: None,
        details: json!({"degenerate": degenerate, "linear_sum": a_sum, "constant": dec.constant}),
        witness,
    })
}

/// Reconstruction identity over all of `S_N`, degeneracy of `d_w` and
/// `Σ a_w = 0`.
pub fn check_decomposition(t: &Tensor4) -> Result<VerificationReport> {
    check_supplied_decomposition(t, &hoeffding_decompose(t)?)
}

/// `α`, `β` of the decoupling inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingConstants {
    pub n: usize,
    pub n1: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl DecouplingConstants {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return invalid("decoupling constants need N >= 4");
        }
        let n1 = n.div_ceil(2);
        let a = ((n1 - 1) * (n - n1 - 1)) as f64;
        let nf = n as f64;
        let q = nf * nf - 3.0 * nf + 1.0;
        let d4 = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0);
        Ok(Self { n, n1, alpha: d4 / (a * q), beta: 1.0 / q })
    }

    /// `α <= 4 + 8/(N-2)`.
    pub fn alpha_within_ceiling(&self) -> bool {
        self.alpha <= 4.0 + 8.0 / (self.n as f64 - 2.0)
    }
}

fn diag_sum(d: &Tensor4, n: usize) -> f64 {
    (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| d.get(i, i, k, k)).sum()
}

/// `Δ(π)` from its first display: diagonal sum, swapped sum, full diagonal
/// slice and expectation terms.
fn delta_expanded(d: &Tensor4, p: &Permutation, n: usize, es: f64) -> f64 {
    let c = DecouplingConstants::new(n).expect("n >= 4");
    let nf = n as f64;
    let a = ((c.n1 - 1) * (n - c.n1 - 1)) as f64;
    let d4 = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0);
    let on_diag: f64 = (0..n).map(|i| d.get(i, i, p[i], p[i])).sum();
    let swapped = swapped_sum(d, p, n);
    2.0 * a / (nf * (nf - 2.0) * (nf - 3.0)) * on_diag
        - a / d4 * swapped
        - a / d4 * diag_sum(d, n)
        - a * (nf * nf - 3.0 * nf + 1.0) / d4 * es
}

/// `Δ(π)` from its centered display `Δ₁ + Δ₂`.
fn delta_centered(d: &Tensor4, p: &Permutation, n: usize, es: f64) -> f64 {
    let c = DecouplingConstants::new(n).expect("n >= 4");
    let nf = n as f64;
    let a = ((c.n1 - 1) * (n - c.n1 - 1)) as f64;
    let d4 = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0);
    let on_diag: f64 = (0..n).map(|i| d.get(i, i, p[i], p[i])).sum();
    let swapped = swapped_sum(d, p, n);
    let delta1 = -a / d4 * (swapped - es);
    let delta2 = 2.0 * a / (nf * (nf - 2.0) * (nf - 3.0)) * (on_diag - diag_sum(d, n) / nf);
    delta1 + delta2
}

fn swapped_sum(d: &Tensor4, p: &Permutation, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += d.get(i, j, p[j], p[i]);
            }
        }
    }
    s
}

/// Averages `Σ_{i∈I, j∈Iᶜ} d̃_{I,π(I)}(i,j,π(i),π(j))` over every `I` of size
/// `⌈N/2⌉` and checks `α(average + Δ(π)) = Σ_{i≠j} d(i,j,π(i),π(j)) - E[…]`.
pub fn check_decoupling_identity(d: &Tensor4, p: &Permutation) -> Result<VerificationReport> {
    let n = d.n()?;
    if !(4..=8).contains(&n) {
        return invalid(format!("decoupling identity check needs 4 <= N <= 8, got {n}"));
    }
    if p.n() != n {
        return Err(DipsError::DimensionMismatch { expected: n, got: p.n() });
    }
    require_degenerate(d, DEGENERACY_TOL)?;
    let consts = DecouplingConstants::new(n)?;
    let mut acc = KahanSum::new();
    let mut subsets = 0u64;
    for i_set in (0..n).combinations(consts.n1) {
        let mut j_set: Vec<usize> = i_set.iter().map(|&i| p[i]).collect();
        j_set.sort_unstable();
        let split = IndexSplit::new(n, i_set, j_set)?;
        let td = tilde_d_restrict(d, &split)?;
        let (ic, jc) = (split.i_complement(), split.j_complement());
        let pos = |set: &[usize], x: usize| set.binary_search(&x).expect("image lies in the target set");
        for (a, &i) in split.i_set().iter().enumerate() {
            for (b, &j) in ic.iter().enumerate() {
                acc.add(td.get(a, b, pos(split.j_set(), p[i]), pos(&jc, p[j])));
            }
        }
        subsets += 1;
    }
    let average = acc.value() / subsets as f64;
    let s = evaluate_dips(d, p, false)?;
    let es = exact_expectation(d, false)?;
    let d1 = delta_expanded(d, p, n, es);
    let d2 = delta_centered(d, p, n, es);
    let lhs = consts.alpha * (average + d1);
    let rhs = s - es;
    let err = (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs());
    let forms_agree = rel_close(d1, d2, 1e-9);
    let ok = err <= 1e-9 && forms_agree;
    Ok(VerificationReport {
        name: "decoupling-identity".into(),
        status: if ok { Status::Pass } else { Status::Fail },
        statistic: err,
        margin: 1e-9 - err,
        size: subsets,
        seed: None,
        details: json!({
            "alpha": consts.alpha,
            "beta": consts.beta,
            "lhs": lhs,
            "rhs": rhs,
            "delta_expanded": d1,
            "delta_centered": d2,
        }),
        witness: (!ok).then(|| json!({"permutation": p})),
    })
}

/// Checks `d(·,j,·,l) = 0` and `d(i,·,k,·) = 0` relative to `max(1, max|d|)`.
pub fn check_rectangular_degeneracy(d: &Tensor4) -> Result<()> {
    let scale = 1f64.max(d.max_abs());
    let worst =
        partial_average(d, Slots::I | Slots::K)?.max_abs().max(partial_average(d, Slots::J | Slots::L)?.max_abs());
    if worst > DEGENERACY_TOL * scale {
        return Err(DipsError::NotDegenerate { max_abs: worst });
    }
    Ok(())
}

const MGF_CHUNK: u64 = 4096;

/// `E exp(λ Σ d(i,j,π(i),τ(j)))` exactly over `(π, τ)` against a Monte Carlo
/// estimate of `E exp(12 λ Σ d(i,j,π(i),τ(j)) G_i G'_j)` (Gaussians sampled,
/// `(π, τ)` averaged exactly).
///
/// Passes if the left side is at most the estimate plus four standard
/// errors; a larger gap is inconclusive when the standard error exceeds a
/// tenth of it and a failure otherwise.
pub fn check_randomization_mgf(d: &Tensor4, lambda: f64, replicates: u64, seed: u64) -> Result<VerificationReport> {
    let [n, m, n2, m2] = d.shape();
    if n != n2 || m != m2 {
        return invalid(format!("shape {:?} is not [N, M, N, M]", d.shape()));
    }
    if n > RANDOMIZATION_CAP || m > RANDOMIZATION_CAP {
        return invalid(format!("randomization check needs N, M <= {RANDOMIZATION_CAP}"));
    }
    if lambda.is_nan() || lambda < 0.0 || lambda * d.max_abs() * (n * m) as f64 > 0.1 {
        return Err(DipsError::OutOfRange(format!("lambda = {lambda} (needs 0 <= λ·max|d|·N·M <= 0.1)")));
    }
    if replicates < 2 {
        return invalid("replicates must be >= 2");
    }
    check_rectangular_degeneracy(d)?;
    let pis: Vec<Permutation> = enumerate_all(n)?.collect();
    let taus: Vec<Permutation> = enumerate_all(m)?.collect();
    let slices: Vec<Matrix> = pis
        .iter()
        .cartesian_product(&taus)
        .map(|(p, t)| Matrix::from_fn(n, m, |i, j| d.get(i, j, p[i], t[j])))
        .collect();
    let pairs = slices.len() as f64;
    let lhs = slices.iter().map(|s| (lambda * s.sum()).exp()).sum::<f64>() / pairs;

    let chunks = replicates.div_ceil(MGF_CHUNK);
    let partial: Vec<(KahanSum, KahanSum)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut s1, mut s2) = (KahanSum::new(), KahanSum::new());
            for r in c * MGF_CHUNK..((c + 1) * MGF_CHUNK).min(replicates) {
                let mut rng = RngSeed { seed, stream: r }.rng();
                let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let h: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let v = slices
                    .iter()
                    .map(|s| {
                        let mut q = 0.0;
                        for i in 0..n {
                            for j in 0..m {
                                q += s[(i, j)] * g[i] * h[j];
                            }
                        }
                        (12.0 * lambda * q).exp()
                    })
                    .sum::<f64>()
                    / pairs;
                s1.add(v);
                s2.add(v * v);
            }
            (s1, s2)
        })
        .collect();
    let (mut s1, mut s2) = (KahanSum::new(), KahanSum::new());
    for (a, b) in &partial {
        s1.add(a.value());
        s2.add(b.value());
    }
    let r = replicates as f64;
    let mean = s1.value() / r;
    let var = ((s2.value() - r * mean * mean) / (r - 1.0)).max(0.0);
    let se = (var / r).sqrt();
    let gap = lhs - mean;
    let status = if lhs <= mean + 4.0 * se {
        Status::Pass
    } else if se > 0.1 * gap {
        Status::Inconclusive
    } else {
        Status::Fail
    };
    Ok(VerificationReport {
        name: "randomization-mgf".into(),
        status,
        statistic: lhs,
        margin: mean + 4.0 * se - lhs,
        size: replicates,
        seed: Some(seed),
        details: json!({"lambda": lambda, "lhs": lhs, "rhs_mean": mean, "rhs_se": se, "pairs": slices.len()}),
        witness: (status == Status::Fail).then(|| json!({"lambda": lambda})),
    })
}

/// Dominance of the explicit-constant tail bound for a degenerate tensor.
/// `B` enters through its certified upper end.
pub fn check_main_dominance(d: &Tensor4, b_upper: f64, mode: Mode, grid: &[f64]) -> Result<VerificationReport> {
    require_degenerate(d, DEGENERACY_TOL)?;
    let v = variance_v(d)?;
    let curve = TailCurve::evaluate("main-explicit", json!({"V": v, "B_upper": b_upper}), grid, |t| {
        bound_main_tail(v, b_upper, t)
    })?;
    check_dominance(&curve, &empirical_tail(d, mode, true, grid)?)
}

/// Dominance of the explicit-constant Bennett bound for `Σ c_ij a_{π(i)π(j)}`.
pub fn check_bennett_dominance(c: &Matrix, a: &Matrix, mode: Mode, grid: &[f64]) -> Result<VerificationReport> {
    let nu = bennett_nu(c, a, 0)?;
    let curve = TailCurve::evaluate(
        "bennett-explicit",
        json!({"nu": nu, "c_opnorm": linalg::operator_norm(c, linalg::OPNORM_TOL)?.value, "a_frob": linalg::frobenius(a)}),
        grid,
        |t| bound_bennett(c, a, nu, t, &BennettForm::Explicit),
    )?;
    let t = Tensor4::product(c.clone(), a.clone())?;
    check_dominance(&curve, &empirical_tail(&t, mode, true, grid)?)
}

/// Inputs for [`check_statistic_bounds`].
#[derive(Debug, Clone)]
pub enum StatisticInput {
    Mww { m: usize, n: usize, pooled: Vec<f64> },
    Daniels { sample: Sample, kind: ScoreKind },
    Chatterjee { n: usize },
    Graph { ex: EdgeSet, ey: EdgeSet },
}

fn statistic_setup(input: &StatisticInput) -> Result<(ScorePair, ExampleBound)> {
    Ok(match input {
        StatisticInput::Mww { m, n, pooled } => (build_mww(*m, *n, pooled)?, ExampleBound::Mww { m: *m, n: *n }),
        StatisticInput::Daniels { sample, kind } => {
            let pair = build_daniels(sample, *kind)?;
            let bound = match kind {
                ScoreKind::Pearson => crate::stats::pearson_bound_params(sample)?,
                ScoreKind::Kendall => ExampleBound::Kendall { n: sample.n() },
                ScoreKind::Spearman => ExampleBound::Spearman { n: sample.n() },
                _ => unreachable!("build_daniels accepts only correlation scores"),
            };
            (pair, bound)
        }
        StatisticInput::Chatterjee { n } => (chatterjee_pair(*n)?, ExampleBound::Chatterjee { n: *n }),
        StatisticInput::Graph { ex, ey } => {
            let g = graph_constants(ex, ey, &BSearch::default())?;
            (build_graph_gamma(ex, ey)?, ExampleBound::Graph { constants: g.printed })
        }
    })
}

/// Null law of the reported statistic (not the raw quadratic form).
pub fn statistic_null_law(pair: &ScorePair, mode: Mode) -> Result<NullLaw> {
    let t = pair.tensor()?;
    let mean = pair.transform(exact_expectation(&t, true)?);
    NullLaw::from_fn(pair.n(), mean, mode, |p| Ok(pair.transform(evaluate_dips(&t, p, true)?) - mean))
}

/// Dominance check of an example bound with a supplied `K`. The result is
/// conditional on that `K`, which the theory leaves unspecified.
pub fn check_statistic_bounds(
    input: &StatisticInput,
    k: Option<KParameter>,
    mode: Mode,
    grid: &[f64],
) -> Result<VerificationReport> {
    let k = k.ok_or_else(|| DipsError::InvalidInput("a value for K is required".into()))?;
    let (pair, bound) = statistic_setup(input)?;
    let curve = TailCurve::evaluate("example", serde_json::to_value(bound)?, grid, |t| bound_example(&bound, &k, t))?;
    let tail = statistic_null_law(&pair, mode)?.tail(grid);
    let mut report = check_dominance(&curve, &tail)?;
    report.name = format!("statistic:{:?}", pair.kind).to_lowercase();
    report.details["conditional_on"] = json!(format!("supplied K = {}", k.value));
    report.details["k"] = serde_json::to_value(k)?;
    Ok(report)
}
