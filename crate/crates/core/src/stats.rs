//! Score matrices for the example statistics and their direct formulas.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::ExampleBound;
use crate::constants::{regression_q, EdgeSet};
use crate::error::{invalid, DipsError, Result};
use crate::linalg::Matrix;
use crate::numeric::ksum;
use crate::perm::{evaluate_dips, exact_expectation, Permutation};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    Mww,
    Pearson,
    Kendall,
    Spearman,
    Chatterjee,
    Graph,
    Regression,
    Custom,
}

impl ScoreKind {
    fn is_daniels(self) -> bool {
        matches!(self, ScoreKind::Pearson | ScoreKind::Kendall | ScoreKind::Spearman)
    }
}

/// Score matrices `C`, `A` with `Q = Σ c_ij a_{π(i)π(j)}`.
///
/// The reported statistic is `Q / normalizer` for the correlation scores,
/// `1 - normalizer · Q` for Chatterjee's coefficient and `Q` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePair {
    pub c: Matrix,
    pub a: Matrix,
    pub kind: ScoreKind,
    pub normalizer: f64,
}

impl ScorePair {
    pub fn new(c: Matrix, a: Matrix, kind: ScoreKind, normalizer: f64) -> Result<Self> {
        if c.shape() != a.shape() || c.nrows() != c.ncols() {
            return invalid("score matrices must be square and of equal size");
        }
        if !normalizer.is_finite() || (kind.is_daniels() && normalizer <= 0.0) {
            return invalid(format!("bad normalizer {normalizer}"));
        }
        Ok(Self { c, a, kind, normalizer })
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn tensor(&self) -> Result<Tensor4> {
        Tensor4::product(self.c.clone(), self.a.clone())
    }

    /// `Σ_{i,j} c_ij a_{π(i)π(j)}`.
    pub fn raw(&self, p: &Permutation) -> Result<f64> {
        evaluate_dips(&self.tensor()?, p, true)
    }

    /// Maps a raw quadratic form to the reported statistic.
    pub fn transform(&self, raw: f64) -> f64 {
        match self.kind {
            ScoreKind::Pearson | ScoreKind::Kendall | ScoreKind::Spearman => raw / self.normalizer,
            ScoreKind::Chatterjee => 1.0 - self.normalizer * raw,
            _ => raw,
        }
    }

    pub fn statistic(&self, p: &Permutation) -> Result<f64> {
        Ok(self.transform(self.raw(p)?))
    }

    /// Scale from raw-form deviations to statistic deviations (`|dS/dQ|`).
    pub fn scale(&self) -> f64 {
        match self.kind {
            ScoreKind::Pearson | ScoreKind::Kendall | ScoreKind::Spearman => 1.0 / self.normalizer,
            ScoreKind::Chatterjee => self.normalizer,
            _ => 1.0,
        }
    }
}

/// Paired observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Deserialize)]
struct Row {
    x: f64,
    y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(DipsError::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if x.is_empty() {
            return invalid("sample is empty");
        }
        if let Some(pos) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(DipsError::NonFinite(pos));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Reads a CSV file with header `x,y`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader(r: impl std::io::Read) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return invalid(format!("expected CSV header \"x,y\", got {:?}", headers.iter().collect::<Vec<_>>()));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for row in rd.deserialize::<Row>() {
            let row = row?;
            x.push(row.x);
            y.push(row.y);
        }
        Self::new(x, y)
    }
}

/// 0-based ranks; ties are rejected.
pub fn ranks(v: &[f64], what: &'static str) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    if order.windows(2).any(|w| v[w[0]] == v[w[1]]) {
        return Err(DipsError::Ties(what));
    }
    let mut r = vec![0; v.len()];
    for (rank, &i) in order.iter().enumerate() {
        r[i] = rank;
    }
    Ok(r)
}

/// Mann-Whitney-Wilcoxon: the first `m` pooled values are the `X` sample.
pub fn build_mww(m: usize, n: usize, pooled: &[f64]) -> Result<ScorePair> {
    let big_n = m + n;
    if m == 0 || n == 0 {
        return invalid("both samples must be non-empty");
    }
    if pooled.len() != big_n {
        return Err(DipsError::DimensionMismatch { expected: big_n, got: pooled.len() });
    }
    ranks(pooled, "pooled sample")?;
    let c = Matrix::from_fn(big_n, big_n, |i, j| f64::from(u8::from(i < m && j >= m)));
    let a = Matrix::from_fn(big_n, big_n, |k, l| f64::from(u8::from(pooled[k] < pooled[l])));
    ScorePair::new(c, a, ScoreKind::Mww, 1.0)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Antisymmetric score matrix of one margin.
fn daniels_scores(v: &[f64], kind: ScoreKind, what: &'static str) -> Result<Matrix> {
    let n = v.len();
    Ok(match kind {
        ScoreKind::Pearson => Matrix::from_fn(n, n, |i, j| v[i] - v[j]),
        ScoreKind::Kendall => {
            ranks(v, what)?;
            Matrix::from_fn(n, n, |i, j| sign(v[i] - v[j]))
        }
        ScoreKind::Spearman => {
            let r = ranks(v, what)?;
            Matrix::from_fn(n, n, |i, j| r[i] as f64 - r[j] as f64)
        }
        _ => return invalid(format!("{kind:?} is not a correlation score")),
    })
}

/// Daniels' generalized correlation with Pearson, Kendall or Spearman scores.
pub fn build_daniels(sample: &Sample, kind: ScoreKind) -> Result<ScorePair> {
    let c = daniels_scores(&sample.x, kind, "x")?;
    let a = daniels_scores(&sample.y, kind, "y")?;
    let norm = ksum(c.iter().map(|v| v * v)).sqrt() * ksum(a.iter().map(|v| v * v)).sqrt();
    if norm == 0.0 {
        return invalid("constant sample: the correlation denominator is zero");
    }
    ScorePair::new(c, a, kind, norm)
}

/// `c_ij = 1(i - j = 1)`, `a_kl = |k - l|`, normalizer `3/(N²-1)`.
pub fn chatterjee_pair(n: usize) -> Result<ScorePair> {
    if n < 2 {
        return invalid("Chatterjee's coefficient needs N >= 2");
    }
    let c = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j + 1)));
    let a = Matrix::from_fn(n, n, |k, l| (k as f64 - l as f64).abs());
    let nf = n as f64;
    ScorePair::new(c, a, ScoreKind::Chatterjee, 3.0 / (nf * nf - 1.0))
}

/// `ξ_N = 1 - 3/(N²-1) Σ_i |π(i+1) - π(i)|`, checked against the
/// quadratic-form representation.
pub fn chatterjee_xi(p: &Permutation) -> Result<f64> {
    let pair = chatterjee_pair(p.n())?;
    let s = p.as_slice();
    let direct: f64 = s.windows(2).map(|w| (w[1] as f64 - w[0] as f64).abs()).sum();
    let via_form = pair.raw(p)?;
    assert_eq!(direct, via_form, "both index conventions give the same integer sum");
    Ok(pair.transform(direct))
}

/// The permutation realized by a sample: ranks of `y` listed in increasing `x`.
pub fn chatterjee_permutation(sample: &Sample) -> Result<Permutation> {
    let rx = ranks(&sample.x, "x")?;
    let ry = ranks(&sample.y, "y")?;
    let mut p = vec![0; sample.n()];
    for i in 0..sample.n() {
        p[rx[i]] = ry[i];
    }
    Permutation::new(p)
}

/// Friedman-Rafsky `Γ`: indicator matrices of two ordered edge sets.
pub fn build_graph_gamma(ex: &EdgeSet, ey: &EdgeSet) -> Result<ScorePair> {
    if ex.n() != ey.n() {
        return Err(DipsError::DimensionMismatch { expected: ex.n(), got: ey.n() });
    }
    ScorePair::new(ex.adjacency(), ey.adjacency(), ScoreKind::Graph, 1.0)
}

#[derive(Deserialize, Serialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

/// Parses `{"n": int, "edges": [[u, v], ...]}` with 1-based vertices.
pub fn graph_from_json_str(s: &str) -> Result<EdgeSet> {
    let g: GraphFile = serde_json::from_str(s)?;
    let mut edges = Vec::with_capacity(g.edges.len());
    for [u, v] in g.edges {
        if u == 0 || v == 0 {
            return invalid("graph vertices are numbered from 1");
        }
        edges.push((u - 1, v - 1));
    }
    EdgeSet::new(g.n, edges)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<EdgeSet> {
    graph_from_json_str(&std::fs::read_to_string(path)?)
}

/// The regression bias quadratic form and its exact null mean.
#[derive(Debug, Clone)]
pub struct RegressionBias {
    /// `1(i, j < N_ω) · q_kl`.
    pub tensor: Tensor4,
    pub expectation: f64,
}

pub fn regression_bias_statistic(x: &Matrix, e: &[f64], treated_count: usize) -> Result<RegressionBias> {
    let n = x.nrows();
    if treated_count == 0 || treated_count > n {
        return Err(DipsError::OutOfRange(format!("treated count {treated_count} for N = {n}")));
    }
    let (_, q) = regression_q(x, e)?;
    let c = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i < treated_count && j < treated_count)));
    let tensor = Tensor4::product(c, q)?;
    let expectation = exact_expectation(&tensor, true)?;
    Ok(RegressionBias { tensor, expectation })
}

/// Parameters of the displayed Pearson bound for a sample.
pub fn pearson_bound_params(sample: &Sample) -> Result<ExampleBound> {
    let n = sample.n() as f64;
    let dev = |v: &[f64]| {
        let mean = ksum(v.iter().copied()) / n;
        let max = v.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
        (max, ksum(v.iter().map(|x| (x - mean).powi(2))).sqrt())
    };
    let (max_dev_x, s_x) = dev(&sample.x);
    let (max_dev_y, s_y) = dev(&sample.y);
    Ok(ExampleBound::Pearson { n: sample.n(), max_dev_x, max_dev_y, s_x, s_y })
}
