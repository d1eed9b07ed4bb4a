//! Tail and moment-generating-function bounds as explicit functions of `t`
//! (or `λ`) and precomputed constants.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::{CorollaryConstants, Interval, PrintedGraphConstants};
use crate::error::{invalid, DipsError, Result};
use crate::linalg::{self, Matrix, OPNORM_TOL};
use crate::numeric::linspace;

/// Tolerance for the double-centering and zero-diagonal preconditions.
pub const CENTERING_TOL: f64 = 1e-9;

const MAIN_V: f64 = 400_000.0;
const MAIN_B: f64 = 10_800.0;
const MGF_V: f64 = 100_000.0;
const MGF_B: f64 = 5_400.0;
const BENNETT_SCALE: f64 = 120.0;
const BENNETT_VAR: f64 = 540.0;

/// A bound value. `raw` is the unclamped expression; `value = min(raw, 1)`.
/// `degenerate` marks a zero denominator, where the statistic is a.s.
/// constant and the bound is reported as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
    pub degenerate: bool,
}

impl BoundValue {
    pub fn from_raw(raw: f64) -> Self {
        Self { value: raw.min(1.0), raw, clamped: raw > 1.0, degenerate: false }
    }

    pub fn degenerate() -> Self {
        Self { value: 1.0, raw: 1.0, clamped: false, degenerate: true }
    }

    pub fn one() -> Self {
        Self::from_raw(1.0)
    }
}

/// Where the universal constant `K` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KSource {
    User,
    ExplicitMain,
    ExplicitBennett,
}

/// The universal constant `K > 0` of the `K`-parameterized bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KParameter {
    pub value: f64,
    pub source: KSource,
}

impl KParameter {
    pub fn user(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(DipsError::OutOfRange(format!("K = {value}")));
        }
        Ok(Self { value, source: KSource::User })
    }

    /// `K = 1/400000`: with this value `exp(-Kt²/(V+Bt))` is no smaller than
    /// the explicit-constant tail bound for a degenerate statistic.
    pub fn explicit_main() -> Self {
        Self { value: 1.0 / MAIN_V, source: KSource::ExplicitMain }
    }

    /// `K = 540`: with this value the `K`-form Bennett bound is no smaller
    /// than the explicit-constant form.
    pub fn explicit_bennett() -> Self {
        Self { value: BENNETT_VAR, source: KSource::ExplicitBennett }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(DipsError::OutOfRange(format!("t = {t}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(DipsError::OutOfRange(format!("{name} = {x}")));
    }
    Ok(())
}

/// `exp(-K t² / den)`, degenerate when `den == 0`.
fn subgamma(k: f64, t: f64, den: f64) -> BoundValue {
    if t == 0.0 {
        BoundValue::one()
    } else if den == 0.0 {
        BoundValue::degenerate()
    } else {
        BoundValue::from_raw((-k * t * t / den).exp())
    }
}

/// `exp(-t² / (400000 V + 10800 B t))` for a degenerate statistic.
pub fn bound_main_tail(v: f64, b_upper: f64, t: f64) -> Result<BoundValue> {
    check_nonneg("V", v)?;
    check_nonneg("B", b_upper)?;
    check_t(t)?;
    Ok(subgamma(1.0, t, MAIN_V * v + MAIN_B * b_upper * t))
}

/// `exp(100000 V λ² / (1 - 5400 B λ))` for `0 <= λ <= 1/(5400 B)`; infinite
/// at the right endpoint when `V > 0`.
pub fn bound_main_mgf(v: f64, b_upper: f64, lambda: f64) -> Result<f64> {
    check_nonneg("V", v)?;
    check_nonneg("B", b_upper)?;
    if !lambda.is_finite() || lambda < 0.0 || MGF_B * b_upper * lambda > 1.0 {
        return Err(DipsError::OutOfRange(format!("lambda = {lambda} (B = {b_upper})")));
    }
    if v == 0.0 || lambda == 0.0 {
        return Ok(1.0);
    }
    let gap = 1.0 - MGF_B * b_upper * lambda;
    if gap <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((MGF_V * v * lambda * lambda / gap).exp())
}

/// The two combinatorial Hanson-Wright variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum HwVariant {
    /// Bounded `A`: needs `max_σ ‖C ∘ A^σ‖_op` (upper end is used).
    General { max_hadamard: Interval },
    /// Positive semidefinite `A`.
    Psd,
}

/// `exp(-K t² / (‖C‖_F² + (‖C‖_op + M) t))` with `M` the Hadamard term
/// (general variant) or `0` (PSD variant).
pub fn bound_hanson_wright(c: &Matrix, variant: &HwVariant, k: &KParameter, t: f64) -> Result<BoundValue> {
    check_t(t)?;
    linalg::check_doubly_centered(c, CENTERING_TOL)?;
    let frob2 = linalg::frobenius(c).powi(2);
    let op = linalg::operator_norm(c, OPNORM_TOL)?.value;
    let slope = match variant {
        HwVariant::General { max_hadamard } => {
            check_nonneg("max Hadamard norm", max_hadamard.upper)?;
            op + max_hadamard.upper
        }
        HwVariant::Psd => op,
    };
    Ok(subgamma(k.value, t, frob2 + slope * t))
}

/// Explicit proof constants or a user `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BennettForm {
    Explicit,
    WithK(KParameter),
}

/// Checks the Bennett preconditions on `C`: square, zero diagonal, doubly centered.
pub fn check_bennett_matrix(c: &Matrix) -> Result<()> {
    if c.nrows() != c.ncols() {
        return invalid("C must be square");
    }
    let scale = 1f64.max(linalg::max_abs(c));
    let diag = c.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if diag > CENTERING_TOL * scale {
        return invalid(format!("C must have a zero diagonal (largest |c_ii| = {diag:e})"));
    }
    linalg::check_doubly_centered(c, CENTERING_TOL)
}

/// Bennett-type bound.
///
/// Explicit: `exp(-(t/(120ν)) ln(1 + ν t / ((540/N) ‖C‖_op² ‖A‖_F²)))`.
/// With `K`: `exp(-(t/(Kν)) ln(1 + N ν t / (K ‖C‖_op² ‖A‖_F²)))`.
pub fn bound_bennett(c: &Matrix, a: &Matrix, nu: f64, t: f64, form: &BennettForm) -> Result<BoundValue> {
    check_t(t)?;
    check_nonneg("nu", nu)?;
    if c.shape() != a.shape() {
        return Err(DipsError::DimensionMismatch { expected: c.len(), got: a.len() });
    }
    check_bennett_matrix(c)?;
    let n = c.nrows() as f64;
    let op = linalg::operator_norm(c, OPNORM_TOL)?.value;
    let scale = op * op * linalg::frobenius(a).powi(2);
    if t == 0.0 {
        return Ok(BoundValue::one());
    }
    if nu == 0.0 || scale == 0.0 {
        return Ok(BoundValue::degenerate());
    }
    let exponent = match form {
        BennettForm::Explicit => (t / (BENNETT_SCALE * nu)) * (nu * t / (BENNETT_VAR / n * scale)).ln_1p(),
        BennettForm::WithK(k) => (t / (k.value * nu)) * (n * nu * t / (k.value * scale)).ln_1p(),
    };
    Ok(BoundValue::from_raw((-exponent).exp()))
}

/// `exp(-K t²/(V_a + B_a t)) + exp(-K t²/(V_d + B_d t))`, clamped to 1 for
/// reporting. A term with zero constants is taken as 0 for `t > 0`.
pub fn bound_corollary(consts: &CorollaryConstants, k: &KParameter, t: f64) -> Result<BoundValue> {
    check_t(t)?;
    consts.validate()?;
    Ok(two_terms(term(k.value, t, consts.v_a, consts.b_a), term(k.value, t, consts.v_d, consts.b_d.upper)))
}

/// `exp(-K t² / (v + b t))`; `0` when `v = b = 0` and `t > 0`.
fn term(k: f64, t: f64, v: f64, b: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else if v == 0.0 && b == 0.0 {
        0.0
    } else {
        (-k * t * t / (v + b * t)).exp()
    }
}

fn two_terms(first: f64, second: f64) -> BoundValue {
    BoundValue::from_raw(first + second)
}

/// Parameters of the example statistics with displayed bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "statistic")]
pub enum ExampleBound {
    Mww { m: usize, n: usize },
    Pearson { n: usize, max_dev_x: f64, max_dev_y: f64, s_x: f64, s_y: f64 },
    Kendall { n: usize },
    Spearman { n: usize },
    Chatterjee { n: usize },
    Graph { constants: PrintedGraphConstants },
}

/// The displayed bound of an example statistic.
pub fn bound_example(stat: &ExampleBound, k: &KParameter, t: f64) -> Result<BoundValue> {
    check_t(t)?;
    let kv = k.value;
    let value = match *stat {
        ExampleBound::Mww { m, n } => {
            if m == 0 || n == 0 {
                return invalid("MWW needs m, n >= 1");
            }
            let (m, n) = (m as f64, n as f64);
            let big_n = m + n;
            two_terms(term(kv, t, big_n * m * n, big_n), term(kv, t, m * m * n * n / (big_n * big_n), (m * n).sqrt()))
        }
        ExampleBound::Pearson { n, max_dev_x, max_dev_y, s_x, s_y } => {
            if n == 0 || !(s_x > 0.0 && s_y > 0.0) {
                return invalid("Pearson needs n >= 1 and positive S_X, S_Y");
            }
            check_nonneg("max deviation of x", max_dev_x)?;
            check_nonneg("max deviation of y", max_dev_y)?;
            BoundValue::from_raw(term(kv, t, 1.0 / n as f64, max_dev_x * max_dev_y / (s_x * s_y)))
        }
        ExampleBound::Kendall { n } => {
            let n = positive_n(n)?;
            two_terms(term(kv * n, t, 1.0, 1.0), term(kv * n * n, t, 1.0, n))
        }
        ExampleBound::Spearman { n } => {
            let n = positive_n(n)?;
            BoundValue::from_raw(term(kv * n, t, 1.0, 1.0))
        }
        ExampleBound::Chatterjee { n } => {
            let n = positive_n(n)?;
            two_terms(term(kv * n * n, t, 1.0, n), term(kv * n, t, 1.0, n.sqrt()))
        }
        ExampleBound::Graph { constants: g } => {
            if g.v_d < 0.0 {
                return Err(DipsError::OutOfRange(format!(
                    "displayed V_d = {} is negative for this graph pair",
                    g.v_d
                )));
            }
            let consts = CorollaryConstants { v_a: g.v_a, b_a: g.b_a, v_d: g.v_d, b_d: g.b_d };
            return bound_corollary(&consts, k, t);
        }
    };
    Ok(value)
}

fn positive_n(n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("n must be positive");
    }
    Ok(n as f64)
}

/// An ascending grid of `points` values from `tmin` to `tmax`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub tmin: f64,
    pub tmax: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(tmin: f64, tmax: f64, points: usize) -> Result<Self> {
        if !(tmin.is_finite() && tmax.is_finite()) || tmin < 0.0 || tmax < tmin {
            return invalid(format!("grid needs 0 <= tmin <= tmax, got {tmin}:{tmax}"));
        }
        if points == 0 || (points == 1 && tmin != tmax) {
            return invalid("grid needs at least one point (two if tmin < tmax)");
        }
        Ok(Self { tmin, tmax, points })
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.tmin, self.tmax, self.points)
    }
}

impl FromStr for Grid {
    type Err = DipsError;

    /// Parses `tmin:tmax:points`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, pts] = parts.as_slice() else {
            return invalid(format!("grid must look like tmin:tmax:points, got {s:?}"));
        };
        let num =
            |x: &str| x.trim().parse::<f64>().map_err(|_| DipsError::InvalidInput(format!("bad number {x:?} in grid")));
        let points = pts
            .trim()
            .parse::<usize>()
            .map_err(|_| DipsError::InvalidInput(format!("bad point count {pts:?} in grid")))?;
        Grid::new(num(lo)?, num(hi)?, points)
    }
}

/// A bound evaluated on a grid of `t` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub label: String,
    pub constants: serde_json::Value,
    pub grid: Vec<f64>,
    pub bound: Vec<f64>,
    pub raw: Vec<f64>,
}

impl TailCurve {
    /// Evaluates `f` on every grid point.
    pub fn evaluate(
        label: impl Into<String>,
        constants: serde_json::Value,
        grid: &[f64],
        f: impl Fn(f64) -> Result<BoundValue>,
    ) -> Result<Self> {
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return invalid("grid must be ascending");
        }
        let vals: Vec<BoundValue> = grid.iter().map(|&t| f(t)).collect::<Result<_>>()?;
        Ok(Self {
            label: label.into(),
            constants,
            grid: grid.to_vec(),
            bound: vals.iter().map(|v| v.value).collect(),
            raw: vals.iter().map(|v| v.raw).collect(),
        })
    }

    pub fn is_non_increasing(&self) -> bool {
        self.bound.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "bound", "raw"])?;
        for ((t, b), r) in self.grid.iter().zip(&self.bound).zip(&self.raw) {
            w.write_record([t.to_string(), b.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
