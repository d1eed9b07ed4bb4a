//! Constants entering the tail bounds: norms, the permutation-maximized
//! operator norm `B`, the variance proxy `V`, the Bennett parameter `ν`, and
//! the per-statistic constants of the linear/degenerate split.

use itertools::Itertools;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DipsError, Result};
use crate::linalg::{self, Matrix, OPNORM_TOL};
use crate::numeric::ksum;
use crate::perm::{enumerate_all, sample_uniform, Permutation, RngSeed, ENUMERATION_CAP};
use crate::tensor::{hoeffding_decompose, Storage, Tensor4};

/// How a constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Computed exactly (numerical routines to their stated tolerance).
    Exact,
    /// Certified upper end, heuristic lower end.
    HeuristicInterval,
    /// Evaluated from a closed-form expression.
    ClosedForm,
}

/// A scalar constant with its method tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: f64,
    pub method: Method,
}

impl Scalar {
    pub fn exact(value: f64) -> Self {
        Self { value, method: Method::Exact }
    }

    pub fn closed_form(value: f64) -> Self {
        Self { value, method: Method::ClosedForm }
    }
}

/// `[lower, upper]` with `lower <= upper`; `lower == upper` when exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
}

impl Interval {
    pub fn exact(value: f64) -> Self {
        Self { lower: value, upper: value, method: Method::Exact }
    }

    pub fn closed_form(value: f64) -> Self {
        Self { lower: value, upper: value, method: Method::ClosedForm }
    }

    /// Heuristic lower end and certified upper end. A rounding-level
    /// inversion is absorbed into the upper end.
    pub fn heuristic(lower: f64, upper: f64) -> Self {
        Self { lower, upper: upper.max(lower), method: Method::HeuristicInterval }
    }

    pub fn contains(&self, x: f64, rel_tol: f64) -> bool {
        let slack = rel_tol * 1f64.max(x.abs());
        self.lower - slack <= x && x <= self.upper + slack
    }
}

/// Search settings for [`permuted_opnorm_b`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSearch {
    /// Exhaustive search over `S_N` when `N <= exact_cap`.
    pub exact_cap: usize,
    /// Local-search restarts otherwise.
    pub restarts: u64,
    pub seed: u64,
    pub tol: f64,
}

impl Default for BSearch {
    fn default() -> Self {
        Self { exact_cap: 7, restarts: 20, seed: 0, tol: OPNORM_TOL }
    }
}

impl BSearch {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

fn slice_norm(t: &Tensor4, sigma: &Permutation, tol: f64, warm: Option<&DVector<f64>>) -> Result<(f64, DVector<f64>)> {
    let m = t.slice_matrix(sigma.as_slice(), sigma.as_slice());
    let (r, v) = match warm {
        Some(v) => linalg::operator_norm_from(&m, tol, v)?,
        None => {
            let ones = DVector::from_element(m.ncols(), 1.0);
            linalg::operator_norm_from(&m, tol, &ones)?
        }
    };
    Ok((r.value, v))
}

/// `‖[t(i,j,σ(i),σ(j))]_{i,j}‖_op`.
pub fn slice_opnorm(t: &Tensor4, sigma: &Permutation, tol: f64) -> Result<f64> {
    if sigma.n() != t.n()? {
        return Err(DipsError::DimensionMismatch { expected: t.n()?, got: sigma.n() });
    }
    slice_norm(t, sigma, tol, None).map(|(v, _)| v)
}

/// `‖M‖_F` with `M_ij = max_{k,l} |t(i,j,k,l)|`; dominates every slice norm.
pub fn b_upper_bound(t: &Tensor4) -> Result<f64> {
    let n = t.n()?;
    let m = match t.storage() {
        Storage::Product { c, a } => c.abs() * linalg::max_abs(a),
        Storage::Dense(d) => {
            let n2 = n * n;
            Matrix::from_fn(n, n, |i, j| {
                let base = (i * n + j) * n2;
                d[base..base + n2].iter().fold(0.0, |acc, x| acc.max(x.abs()))
            })
        }
    };
    Ok(linalg::frobenius(&m))
}

/// Cheap bracket for large `N`: the identity slice norm below, [`b_upper_bound`] above.
pub fn b_quick_interval(t: &Tensor4) -> Result<Interval> {
    let n = t.n()?;
    let lower = slice_opnorm(t, &Permutation::identity(n), OPNORM_TOL)?;
    Ok(Interval::heuristic(lower, b_upper_bound(t)?))
}

fn local_search(t: &Tensor4, mut sigma: Permutation, tol: f64) -> Result<f64> {
    let n = sigma.n();
    let (mut best, mut v) = slice_norm(t, &sigma, tol, None)?;
    loop {
        let mut step: Option<(usize, usize, f64, DVector<f64>)> = None;
        for (a, b) in (0..n).tuple_combinations() {
            sigma.swap(a, b);
            let (val, w) = slice_norm(t, &sigma, tol, Some(&v))?;
            sigma.swap(a, b);
            let target = step.as_ref().map_or(best * (1.0 + 1e-12), |s| s.2);
            if val > target {
                step = Some((a, b, val, w));
            }
        }
        match step {
            Some((a, b, val, w)) => {
                sigma.swap(a, b);
                best = val;
                v = w;
            }
            None => break,
        }
    }
    // The warm start can in principle miss the top singular direction.
    let (cold, _) = slice_norm(t, &sigma, tol, None)?;
    Ok(best.max(cold))
}

/// `B = max_σ ‖[t(i,j,σ(i),σ(j))]_{i,j}‖_op` as an interval.
///
/// Exhaustive (`lower == upper`) when `N <= exact_cap`; otherwise the lower
/// end is the best of seeded steepest-ascent local searches over
/// transpositions and the upper end is [`b_upper_bound`].
pub fn permuted_opnorm_b(t: &Tensor4, search: &BSearch) -> Result<Interval> {
    let n = t.n()?;
    if t.max_abs() == 0.0 {
        return Ok(Interval::exact(0.0));
    }
    if n <= search.exact_cap.min(ENUMERATION_CAP) {
        let perms: Vec<Permutation> = enumerate_all(n)?.collect();
        let norms: Vec<f64> =
            perms.par_iter().map(|s| slice_norm(t, s, search.tol, None).map(|r| r.0)).collect::<Result<_>>()?;
        let best = norms.into_iter().fold(0.0, f64::max);
        return Ok(Interval::exact(best));
    }
    if search.restarts == 0 {
        return invalid("local search needs at least one restart");
    }
    let lows: Vec<f64> = (0..search.restarts)
        .into_par_iter()
        .map(|r| {
            let start = sample_uniform(n, RngSeed { seed: search.seed, stream: r })?;
            local_search(t, start, search.tol)
        })
        .collect::<Result<_>>()?;
    let lower = lows.into_iter().fold(0.0, f64::max);
    Ok(Interval::heuristic(lower, b_upper_bound(t)?))
}

/// `ξ(i,k)`: the double centering of `d(i,i,k,k)`.
pub fn xi_matrix(d: &Tensor4) -> Result<Matrix> {
    Ok(linalg::double_center(&d.diagonal_slice()?))
}

/// `V = (1/N) Σ ξ(i,k)² + (1/N²) Σ d(i,j,k,l)²`.
pub fn variance_v(d: &Tensor4) -> Result<f64> {
    let n = d.n()? as f64;
    let xi = xi_matrix(d)?;
    Ok(ksum(xi.iter().map(|x| x * x)) / n + d.sum_sq() / (n * n))
}

/// `Ṽ = (1/N²) Σ d(i,j,k,l)²`.
pub fn off_diagonal_variance(d: &Tensor4) -> Result<f64> {
    let n = d.n()? as f64;
    Ok(d.sum_sq() / (n * n))
}

/// Largest `Σ_t x_t y_t` over `m` pairs that use distinct entries of `x` and
/// distinct entries of `y`. Both inputs must be sorted in descending order.
///
/// After sorting, an optimal pairing of the chosen entries is order-preserving,
/// so the optimum is a non-crossing matching found by dynamic programming.
fn best_matching(x: &[f64], y: &[f64], m: usize) -> f64 {
    let (nx, ny) = (x.len(), y.len());
    let neg = f64::NEG_INFINITY;
    // f[p][q][k]: best over the first p entries of x, q of y, with k pairs.
    let idx = |p: usize, q: usize, k: usize| (p * (ny + 1) + q) * (m + 1) + k;
    let mut f = vec![neg; (nx + 1) * (ny + 1) * (m + 1)];
    for p in 0..=nx {
        for q in 0..=ny {
            f[idx(p, q, 0)] = 0.0;
        }
    }
    for p in 1..=nx {
        for q in 1..=ny {
            for k in 1..=m.min(p).min(q) {
                let skip = f[idx(p - 1, q, k)].max(f[idx(p, q - 1, k)]);
                let take = f[idx(p - 1, q - 1, k - 1)] + x[p - 1] * y[q - 1];
                f[idx(p, q, k)] = skip.max(take);
            }
        }
    }
    f[idx(nx, ny, m)]
}

fn sorted_desc(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut s: Vec<f64> = v.collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `max_{σ,σ̃} |Σ_{t<m} x_{σ(t)} y_{σ̃(t)}|` for `m = ⌊N/2⌋`.
fn row_pair_nu(x: &[f64], y: &[f64], m: usize) -> f64 {
    let neg_y: Vec<f64> = y.iter().rev().map(|v| -v).collect();
    best_matching(x, y, m).max(best_matching(x, &neg_y, m)).max(0.0)
}

fn injections(n: usize, m: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(m).collect()
}

fn brute_force_nu(c: &Matrix, a: &Matrix) -> f64 {
    let n = c.nrows();
    let m = n / 2;
    let inj = injections(n, m);
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for s in &inj {
                for u in &inj {
                    let v: f64 = s.iter().zip(u).map(|(&p, &q)| c[(i, p)] * a[(j, q)]).sum();
                    best = best.max(v.abs());
                }
            }
        }
    }
    best
}

/// The Bennett parameter
/// `ν = max_{i,j,σ,σ̃} |Σ_{k<⌊N/2⌋} c_{i,σ(k)} a_{j,σ̃(k)}|`.
///
/// Solved exactly for every row pair by an order-preserving matching over the
/// sorted rows. When `N <= exact_cap` the result is cross-checked against
/// enumeration of all index injections.
pub fn bennett_nu(c: &Matrix, a: &Matrix, exact_cap: usize) -> Result<f64> {
    if c.shape() != a.shape() {
        return Err(DipsError::DimensionMismatch { expected: c.len(), got: a.len() });
    }
    if c.nrows() != c.ncols() {
        return invalid("bennett_nu needs square matrices");
    }
    let n = c.nrows();
    let m = n / 2;
    if m == 0 {
        return Ok(0.0);
    }
    let rows_c: Vec<Vec<f64>> = (0..n).map(|i| sorted_desc(c.row(i).iter().copied())).collect();
    let rows_a: Vec<Vec<f64>> = (0..n).map(|j| sorted_desc(a.row(j).iter().copied())).collect();
    let nu = (0..n)
        .into_par_iter()
        .map(|i| rows_a.iter().map(|y| row_pair_nu(&rows_c[i], y, m)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    if n <= exact_cap {
        let brute = brute_force_nu(c, a);
        assert!(
            (nu - brute).abs() <= 1e-12 * 1f64.max(brute),
            "matching solution {nu} disagrees with enumeration {brute}"
        );
    }
    Ok(nu)
}

/// Constants for a degenerate tensor (and for its factors when product-form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub n: usize,
    /// `(Σ d²)^½`.
    pub frob: Scalar,
    /// `‖C‖_op` for a product-form tensor.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub opnorm: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_frob: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub a_frob: Option<Scalar>,
    pub b: Interval,
    pub v: Scalar,
    pub v_tilde: Scalar,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<Scalar>,
}

/// Every constant of a (degenerate) tensor. `ν` and the factor norms are
/// filled in only for product-form inputs.
pub fn bound_constants(d: &Tensor4, search: &BSearch, nu_cap: usize) -> Result<BoundConstants> {
    let n = d.n()?;
    let b = permuted_opnorm_b(d, search)?;
    let (opnorm, c_frob, a_frob, nu) = match d.factors() {
        Some((c, a)) => (
            Some(Scalar::exact(linalg::operator_norm(c, search.tol)?.value)),
            Some(Scalar::exact(linalg::frobenius(c))),
            Some(Scalar::exact(linalg::frobenius(a))),
            Some(Scalar::exact(bennett_nu(c, a, nu_cap)?)),
        ),
        None => (None, None, None, None),
    };
    Ok(BoundConstants {
        n,
        frob: Scalar::closed_form(d.sum_sq().sqrt()),
        opnorm,
        c_frob,
        a_frob,
        b,
        v: Scalar::closed_form(variance_v(d)?),
        v_tilde: Scalar::closed_form(off_diagonal_variance(d)?),
        nu,
    })
}

/// `V_a, B_a` of the linear part and `V_d, B_d` of the degenerate part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryConstants {
    pub v_a: f64,
    pub b_a: f64,
    pub v_d: f64,
    pub b_d: Interval,
}

impl CorollaryConstants {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.v_a, self.b_a, self.v_d, self.b_d.lower, self.b_d.upper];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) || self.b_d.lower > self.b_d.upper {
            return invalid(format!("corollary constants must be finite and non-negative: {self:?}"));
        }
        Ok(())
    }
}

/// `V_a = N Σ a_w²`, `B_a = N max|a_w|`, `V_d = V(d_w)`, `B_d = B(d_w)`.
pub fn corollary_constants(w: &Tensor4, search: &BSearch) -> Result<CorollaryConstants> {
    let n = w.n()? as f64;
    let dec = hoeffding_decompose(w)?;
    Ok(CorollaryConstants {
        v_a: n * ksum(dec.linear.iter().map(|x| x * x)),
        b_a: n * linalg::max_abs(&dec.linear),
        v_d: variance_v(&dec.degenerate)?,
        b_d: permuted_opnorm_b(&dec.degenerate, search)?,
    })
}

/// A directed graph on `0..n` without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    /// Ordered pairs over `0..n`; duplicates are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return invalid("a graph needs at least one vertex");
        }
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return invalid(format!("edge ({u}, {v}) is out of range for n = {n}"));
            }
            if u == v {
                return invalid(format!("self-loop at vertex {u}"));
            }
            list.push((u, v));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self { n, edges: list })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)));
        Self::new(n, edges.collect::<Vec<_>>()).expect("complete graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn adjacency(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for &(u, v) in &self.edges {
            m[(u, v)] = 1.0;
        }
        m
    }

    /// Out-degrees minus their mean.
    pub fn centered_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for &(u, _) in &self.edges {
            deg[u] += 1.0;
        }
        let mean = ksum(deg.iter().copied()) / self.n as f64;
        deg.into_iter().map(|d| d - mean).collect()
    }
}

/// Graph-correlation constants: the closed-form values exactly as displayed
/// for the graph example, alongside the general constants of the tensor
/// `1(i,j ∈ E_x) · 1(k,l ∈ E_y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConstants {
    /// May be negative in `v_d`; see [`GraphConstants::printed_is_valid`].
    pub printed: PrintedGraphConstants,
    pub general: CorollaryConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintedGraphConstants {
    pub v_a: f64,
    pub b_a: f64,
    pub v_d: f64,
    pub b_d: Interval,
}

impl GraphConstants {
    pub fn printed_is_valid(&self) -> bool {
        self.printed.v_d >= 0.0
    }
}

pub fn graph_constants(ex: &EdgeSet, ey: &EdgeSet, search: &BSearch) -> Result<GraphConstants> {
    if ex.n() != ey.n() {
        return Err(DipsError::DimensionMismatch { expected: ex.n(), got: ey.n() });
    }
    let n = ex.n() as f64;
    let (dx, dy) = (ex.centered_degrees(), ey.centered_degrees());
    let sx = ksum(dx.iter().map(|x| x * x));
    let sy = ksum(dy.iter().map(|x| x * x));
    let mx = dx.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let my = dy.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (ecx, ecy) = (ex.len() as f64, ey.len() as f64);
    let second = |e: f64, s: f64| e - s / n - 2.0 * e * e / (n * n);
    let w = Tensor4::product(ex.adjacency(), ey.adjacency())?;
    let dw = hoeffding_decompose(&w)?.degenerate;
    let b_d = permuted_opnorm_b(&dw, search)?;
    let printed = PrintedGraphConstants {
        v_a: sx * sy / n.powi(3),
        b_a: mx * my / n,
        v_d: sx * sy / n.powi(5) + second(ecx, sx) * second(ecy, sy) / (n * n),
        b_d,
    };
    let dec = hoeffding_decompose(&w)?;
    let general = CorollaryConstants {
        v_a: n * ksum(dec.linear.iter().map(|x| x * x)),
        b_a: n * linalg::max_abs(&dec.linear),
        v_d: variance_v(&dec.degenerate)?,
        b_d,
    };
    Ok(GraphConstants { printed, general })
}

/// Quadratic-form constants for the regression-adjustment bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConstants {
    pub n: usize,
    pub p1: f64,
    pub p0: f64,
    #[serde(skip)]
    pub hat: Matrix,
    #[serde(skip)]
    pub q: Matrix,
    /// `‖Q‖_F²`.
    pub q_frob_sq: f64,
    pub q_opnorm: Interval,
    /// `Σ e_i² h_ii`.
    pub sum_e2_h: f64,
    pub max_leverage: f64,
    pub max_abs_e: f64,
    /// `(p1 p0 ‖Q‖_F², max(p1², p0²) ‖Q‖_op)`.
    pub denominator_exact: (f64, f64),
    /// `(p1 p0 Σe² max h_ii, max(p1², p0²) max|e|)`.
    pub denominator_relaxed: (f64, f64),
}

/// `H = X(XᵀX)⁻¹Xᵀ` and `Q = H diag(e)`.
///
/// `X` must be column-centered and `Q` doubly centered (which additionally
/// needs `Xᵀe = 0`, as for regression residuals).
pub fn regression_q(x: &Matrix, e: &[f64]) -> Result<(Matrix, Matrix)> {
    let (n, p) = x.shape();
    if e.len() != n {
        return Err(DipsError::DimensionMismatch { expected: n, got: e.len() });
    }
    if p == 0 || n <= p {
        return invalid(format!("need more units than covariates (n = {n}, p = {p})"));
    }
    if let Some(pos) = x.iter().chain(e).position(|v| !v.is_finite()) {
        return Err(DipsError::NonFinite(pos));
    }
    let scale = 1f64.max(linalg::max_abs(x));
    let worst = linalg::col_means(x).into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst >= 1e-10 * scale {
        return invalid(format!("X is not column-centered (largest column mean {worst:e})"));
    }
    let gram = x.transpose() * x;
    let chol = gram.cholesky().ok_or_else(|| DipsError::Singular("XᵀX is not positive definite".into()))?;
    let hat = x * chol.solve(&x.transpose());
    let q = Matrix::from_fn(n, n, |i, j| hat[(i, j)] * e[j]);
    linalg::check_doubly_centered(&q, 1e-9)?;
    Ok((hat, q))
}

/// The regression quadratic form and the two bound denominators for an arm
/// with treated proportion `p1` (and `p0 = 1 - p1`).
pub fn regression_constants(x: &Matrix, e: &[f64], p1: f64) -> Result<RegressionConstants> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(DipsError::OutOfRange(format!("treated proportion {p1}")));
    }
    let (hat, q) = regression_q(x, e)?;
    let n = q.nrows();
    let q_op = linalg::operator_norm(&q, OPNORM_TOL)?.value;
    let leverage: Vec<f64> = (0..n).map(|i| hat[(i, i)]).collect();
    let max_leverage = leverage.iter().copied().fold(0.0, f64::max);
    let max_abs_e = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sum_e2 = ksum(e.iter().map(|v| v * v));
    let p0 = 1.0 - p1;
    let big = (p1 * p1).max(p0 * p0);
    let q_frob_sq = ksum(q.iter().map(|v| v * v));
    Ok(RegressionConstants {
        n,
        p1,
        p0,
        q_frob_sq,
        q_opnorm: Interval::exact(q_op),
        sum_e2_h: ksum(e.iter().zip(&leverage).map(|(v, h)| v * v * h)),
        max_leverage,
        max_abs_e,
        denominator_exact: (p1 * p0 * q_frob_sq, big * q_op),
        denominator_relaxed: (p1 * p0 * sum_e2 * max_leverage, big * max_abs_e),
        hat,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::perm::RngSeed;

    #[test]
    fn b_for_trivial_tensors() {
        let s = BSearch::default();
        assert_eq!(permuted_opnorm_b(&Tensor4::zeros(4).unwrap(), &s).unwrap(), Interval::exact(0.0));
        let b = permuted_opnorm_b(&Tensor4::constant(5, -0.5).unwrap(), &s).unwrap();
        assert!((b.lower - 2.5).abs() < 1e-9 && b.lower == b.upper);
        assert_eq!(b.method, Method::Exact);
    }

    #[test]
    fn heuristic_interval_is_ordered() {
        let mut rng = RngSeed::new(3).rng();
        let t = gen::degenerate_tensor(&mut rng, 8);
        let b = permuted_opnorm_b(&t, &BSearch { restarts: 3, ..BSearch::default() }).unwrap();
        assert_eq!(b.method, Method::HeuristicInterval);
        assert!(b.lower > 0.0 && b.lower <= b.upper);
        assert!(b.upper <= b_upper_bound(&t).unwrap() + 1e-12);
    }

    #[test]
    fn variance_special_cases() {
        assert_eq!(variance_v(&Tensor4::zeros(3).unwrap()).unwrap(), 0.0);
        // constant diagonal slice: xi vanishes
        let t =
            Tensor4::from_fn([3; 4], |i, j, k, l| if i == j && k == l { 2.0 } else { (i + j * k + l) as f64 }).unwrap();
        let want = t.sum_sq() / 9.0;
        assert!((variance_v(&t).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn nu_trivial_cases() {
        let ones = Matrix::from_element(4, 4, 1.0);
        assert_eq!(bennett_nu(&ones, &ones, 5).unwrap(), 2.0);
        assert_eq!(bennett_nu(&Matrix::zeros(4, 4), &ones, 5).unwrap(), 0.0);
        assert!(bennett_nu(&ones, &Matrix::zeros(3, 3), 5).is_err());
    }

    #[test]
    fn nu_handles_mixed_signs() {
        // The best pairing uses the smallest entries of x against the most
        // negative entries of y; a one-sided pairing misses it.
        let x = [0.46, 1.35, 1.68, 2.12];
        let y = [-1.86, -1.26, -0.71, 0.35];
        let c = Matrix::from_fn(4, 4, |_, j| x[j]);
        let a = Matrix::from_fn(4, 4, |_, j| y[j]);
        let nu = bennett_nu(&c, &a, 5).unwrap();
        assert!((nu - brute_force_nu(&c, &a)).abs() < 1e-12);
    }

    #[test]
    fn corollary_constants_trivial() {
        let s = BSearch::default();
        let k = corollary_constants(&Tensor4::constant(4, 3.0).unwrap(), &s).unwrap();
        assert!(k.v_a < 1e-20 && k.b_a < 1e-10 && k.v_d < 1e-20 && k.b_d.upper < 1e-9);
        let mut rng = RngSeed::new(4).rng();
        let k = corollary_constants(&gen::degenerate_tensor(&mut rng, 4), &s).unwrap();
        assert!(k.v_a < 1e-20 && k.b_a < 1e-10);
        k.validate().unwrap();
    }

    #[test]
    fn graph_trivial_cases() {
        let s = BSearch::default();
        let ex = EdgeSet::new(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let empty = EdgeSet::new(5, []).unwrap();
        let g = graph_constants(&ex, &empty, &s).unwrap();
        let p = g.printed;
        assert_eq!((p.v_a, p.b_a, p.v_d, p.b_d.upper), (0.0, 0.0, 0.0, 0.0));
        let full = EdgeSet::complete(5);
        let g = graph_constants(&full, &full, &s).unwrap();
        assert!(g.printed.v_a.abs() < 1e-12 && g.printed.b_a.abs() < 1e-12);
        // Dense against sparse: the two displayed factors of V_d differ in sign.
        let g = graph_constants(&full, &ex, &s).unwrap();
        assert!(g.printed.v_d < 0.0 && !g.printed_is_valid());
        assert!(g.general.v_d >= 0.0);
        assert!(EdgeSet::new(3, [(1, 1)]).is_err());
    }

    #[test]
    fn regression_rejects_bad_design() {
        let x = Matrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert!(regression_constants(&x, &[0.0; 4], 0.5).is_err());
        let x = Matrix::from_row_slice(4, 2, &[1.0, 2.0, -1.0, -2.0, 1.0, 2.0, -1.0, -2.0]);
        assert!(matches!(regression_constants(&x, &[0.0; 4], 0.5), Err(DipsError::Singular(_))));
    }

    #[test]
    fn regression_zero_residuals() {
        let x = Matrix::from_row_slice(4, 1, &[-1.5, -0.5, 0.5, 1.5]);
        let r = regression_constants(&x, &[0.0; 4], 0.5).unwrap();
        assert_eq!(r.q_frob_sq, 0.0);
        assert_eq!(r.q_opnorm.upper, 0.0);
        assert_eq!(r.denominator_relaxed, (0.0, 0.0));
    }
}
