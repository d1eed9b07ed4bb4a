//! Fourth-order tensors, partial averages, degeneracy and the Hoeffding-type
//! decomposition of a double-indexed permutation statistic.
//!
//! A tensor `w(i,j,k,l)` has shape `[n0, n1, n2, n3]`; the square case used by
//! the statistic `Σ_{i,j} w(i,j,π(i),π(j))` is `[N, N, N, N]` and the
//! rectangular decoupled case is `[N, M, N, M]`. Storage is either a dense
//! row-major array or a lazy product form `w(i,j,k,l) = c_ij · a_kl`.

use std::ops::BitOr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, DipsError, Result};
use crate::linalg::{self, Matrix};
use crate::numeric::{ksum, KahanSum};

/// Relative tolerance used for degeneracy checks.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Product-form tensors are never densified above this side length.
pub const DENSIFY_LIMIT: usize = 64;

/// A set of index slots (0-based internally: `i`, `j`, `k`, `l`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Slots(u8);

impl Slots {
    pub const I: Slots = Slots(1);
    pub const J: Slots = Slots(2);
    pub const K: Slots = Slots(4);
    pub const L: Slots = Slots(8);
    pub const NONE: Slots = Slots(0);
    pub const ALL: Slots = Slots(15);

    /// Builds a slot set from 1-based slot numbers.
    pub fn from_numbers(slots: &[usize]) -> Result<Slots> {
        let mut bits = 0u8;
        for &s in slots {
            if !(1..=4).contains(&s) {
                return invalid(format!("slot {s} is not in 1..=4"));
            }
            bits |= 1 << (s - 1);
        }
        Ok(Slots(bits))
    }

    pub fn single(slot: usize) -> Slots {
        assert!(slot < 4);
        Slots(1 << slot)
    }

    pub fn contains(self, slot: usize) -> bool {
        self.0 & (1 << slot) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..4).filter(move |&s| self.contains(s))
    }
}

impl BitOr for Slots {
    type Output = Slots;
    fn bitor(self, rhs: Slots) -> Slots {
        Slots(self.0 | rhs.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(Vec<f64>),
    Product { c: Matrix, a: Matrix },
}

/// A fourth-order real tensor. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    storage: Storage,
}

fn check_finite<'a>(vals: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    match vals.into_iter().position(|x| !x.is_finite()) {
        Some(pos) => Err(DipsError::NonFinite(pos)),
        None => Ok(()),
    }
}

impl Tensor4 {
    pub fn dense(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return invalid(format!("tensor shape {shape:?} has a zero extent"));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(DipsError::DimensionMismatch { expected: len, got: data.len() });
        }
        check_finite(&data)?;
        Ok(Self { shape, storage: Storage::Dense(data) })
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.iter().product());
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    for l in 0..shape[3] {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self::dense(shape, data)
    }

    /// `w(i,j,k,l) = c_ij · a_kl`.
    pub fn product(c: Matrix, a: Matrix) -> Result<Self> {
        if c.is_empty() || a.is_empty() {
            return invalid("product-form factors must be non-empty");
        }
        check_finite(c.iter())?;
        check_finite(a.iter())?;
        let shape = [c.nrows(), c.ncols(), a.nrows(), a.ncols()];
        Ok(Self { shape, storage: Storage::Product { c, a } })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::dense([n; 4], vec![value; n.pow(4)])
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_product(&self) -> bool {
        matches!(self.storage, Storage::Product { .. })
    }

    /// Product-form factors, if any.
    pub fn factors(&self) -> Option<(&Matrix, &Matrix)> {
        match &self.storage {
            Storage::Product { c, a } => Some((c, a)),
            Storage::Dense(_) => None,
        }
    }

    /// Row-major dense data, if dense.
    pub fn dense_data(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(d) => Some(d),
            Storage::Product { .. } => None,
        }
    }

    pub fn is_square(&self) -> bool {
        self.shape.iter().all(|&d| d == self.shape[0])
    }

    /// `N` for a square tensor.
    pub fn n(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.shape[0])
        } else {
            Err(DipsError::NotSquare(self.shape))
        }
    }

    /// True for the `[N, M, N, M]` layout used by decoupled statistics.
    pub fn is_bipartite(&self) -> bool {
        self.shape[0] == self.shape[2] && self.shape[1] == self.shape[3]
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let [_, s1, s2, s3] = self.shape;
        ((i * s1 + j) * s2 + k) * s3 + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[self.offset(i, j, k, l)],
            Storage::Product { c, a } => c[(i, j)] * a[(k, l)],
        }
    }

    /// Dense copy. Product forms larger than [`DENSIFY_LIMIT`] are refused.
    pub fn to_dense(&self) -> Result<Tensor4> {
        match &self.storage {
            Storage::Dense(_) => Ok(self.clone()),
            Storage::Product { .. } => {
                if self.shape.iter().any(|&d| d > DENSIFY_LIMIT) {
                    return invalid(format!(
                        "refusing to densify a product-form tensor of shape {:?} (limit {DENSIFY_LIMIT})",
                        self.shape
                    ));
                }
                Tensor4::from_fn(self.shape, |i, j, k, l| self.get(i, j, k, l))
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().fold(0.0, |m, x| m.max(x.abs())),
            Storage::Product { c, a } => linalg::max_abs(c) * linalg::max_abs(a),
        }
    }

    /// `Σ w(i,j,k,l)²`.
    pub fn sum_sq(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => ksum(d.iter().map(|x| x * x)),
            Storage::Product { c, a } => ksum(c.iter().map(|x| x * x)) * ksum(a.iter().map(|x| x * x)),
        }
    }

    /// `Σ |w(i,j,k,l)|`.
    pub fn sum_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => ksum(d.iter().map(|x| x.abs())),
            Storage::Product { c, a } => ksum(c.iter().map(|x| x.abs())) * ksum(a.iter().map(|x| x.abs())),
        }
    }

    /// `Σ w(i,j,k,l)`.
    pub fn sum(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => ksum(d.iter().copied()),
            Storage::Product { c, a } => ksum(c.iter().copied()) * ksum(a.iter().copied()),
        }
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor4> {
        match &self.storage {
            Storage::Dense(d) => Tensor4::dense(self.shape, d.iter().map(|x| x * factor).collect()),
            Storage::Product { c, a } => Tensor4::product(c * factor, a.clone()),
        }
    }

    /// The matrix `[w(i, j, row_map[i], col_map[j])]_{i,j}`.
    pub fn slice_matrix(&self, row_map: &[usize], col_map: &[usize]) -> Matrix {
        debug_assert_eq!(row_map.len(), self.shape[0]);
        debug_assert_eq!(col_map.len(), self.shape[1]);
        match &self.storage {
            Storage::Dense(_) => {
                Matrix::from_fn(self.shape[0], self.shape[1], |i, j| self.get(i, j, row_map[i], col_map[j]))
            }
            Storage::Product { c, a } => {
                Matrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * a[(row_map[i], col_map[j])])
            }
        }
    }

    /// The `N×N` matrix `D(i,k) = w(i,i,k,k)` of a square tensor.
    pub fn diagonal_slice(&self) -> Result<Matrix> {
        let n = self.n()?;
        Ok(Matrix::from_fn(n, n, |i, k| self.get(i, i, k, k)))
    }

    /// Sub-tensor on the given index lists (one list per slot).
    pub fn restrict(&self, idx: [&[usize]; 4]) -> Result<Tensor4> {
        for (s, list) in idx.iter().enumerate() {
            if list.is_empty() || list.iter().any(|&x| x >= self.shape[s]) {
                return invalid(format!("index list for slot {} out of range", s + 1));
            }
        }
        match &self.storage {
            Storage::Dense(_) => {
                let shape = [idx[0].len(), idx[1].len(), idx[2].len(), idx[3].len()];
                Tensor4::from_fn(shape, |i, j, k, l| self.get(idx[0][i], idx[1][j], idx[2][k], idx[3][l]))
            }
            Storage::Product { c, a } => Tensor4::product(
                c.select_rows(idx[0].iter()).select_columns(idx[1].iter()),
                a.select_rows(idx[2].iter()).select_columns(idx[3].iter()),
            ),
        }
    }

    /// Applies `(I - P_s)` for every slot `s` in `slots`, where `P_s` averages
    /// over slot `s`. With all four slots this is the full 16-term centering.
    pub fn center(&self, slots: Slots) -> Result<Tensor4> {
        match &self.storage {
            Storage::Dense(_) => {
                let mut out = self.clone();
                for s in slots.iter() {
                    let avg = partial_average(&out, Slots::single(s))?;
                    out = out.sub_broadcast(&avg);
                }
                Ok(out)
            }
            Storage::Product { c, a } => {
                let c = center_matrix(c, slots.contains(0), slots.contains(1));
                let a = center_matrix(a, slots.contains(2), slots.contains(3));
                Tensor4::product(c, a)
            }
        }
    }

    /// `self - other`, where `other` has extent 1 on averaged slots.
    fn sub_broadcast(&self, other: &Tensor4) -> Tensor4 {
        let os = other.shape;
        let pick = |x: usize, s: usize| if os[s] == 1 { 0 } else { x };
        let data = Tensor4::from_fn(self.shape, |i, j, k, l| {
            self.get(i, j, k, l) - other.get(pick(i, 0), pick(j, 1), pick(k, 2), pick(l, 3))
        });
        data.expect("difference of finite tensors is finite")
    }

    pub fn from_json_str(s: &str) -> Result<Tensor4> {
        let file: TensorFile = serde_json::from_str(s)?;
        file.into_tensor()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tensor4> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(TensorFile::from_tensor(self)?)?)
    }
}

fn center_matrix(m: &Matrix, rows: bool, cols: bool) -> Matrix {
    let mut out = m.clone();
    if rows {
        // average over the row index (slot i / k): subtract column means
        let cm = linalg::col_means(&out);
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] -= cm[j];
            }
        }
    }
    if cols {
        let rm = linalg::row_means(&out);
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                out[(i, j)] -= rm[i];
            }
        }
    }
    out
}

fn average_matrix(m: &Matrix, rows: bool, cols: bool) -> Matrix {
    match (rows, cols) {
        (false, false) => m.clone(),
        (true, false) => Matrix::from_row_slice(1, m.ncols(), &linalg::col_means(m)),
        (false, true) => Matrix::from_column_slice(m.nrows(), 1, &linalg::row_means(m)),
        (true, true) => Matrix::from_element(1, 1, linalg::mean(m)),
    }
}

/// Averages over the given slots. Averaged slots keep extent 1 so the result
/// broadcasts back against the input shape.
pub fn partial_average(t: &Tensor4, slots: Slots) -> Result<Tensor4> {
    if slots.is_empty() {
        return invalid("partial_average needs at least one slot");
    }
    match &t.storage {
        Storage::Product { c, a } => Tensor4::product(
            average_matrix(c, slots.contains(0), slots.contains(1)),
            average_matrix(a, slots.contains(2), slots.contains(3)),
        ),
        Storage::Dense(data) => {
            let s = t.shape;
            let out_shape: [usize; 4] = std::array::from_fn(|d| if slots.contains(d) { 1 } else { s[d] });
            let count: usize = (0..4).filter(|&d| slots.contains(d)).map(|d| s[d]).product();
            let mut acc = vec![KahanSum::new(); out_shape.iter().product()];
            let keep = |x: usize, d: usize| if slots.contains(d) { 0 } else { x };
            let mut pos = 0;
            for i in 0..s[0] {
                for j in 0..s[1] {
                    for k in 0..s[2] {
                        for l in 0..s[3] {
                            let o = ((keep(i, 0) * out_shape[1] + keep(j, 1)) * out_shape[2] + keep(k, 2))
                                * out_shape[3]
                                + keep(l, 3);
                            acc[o].add(data[pos]);
                            pos += 1;
                        }
                    }
                }
            }
            let inv = 1.0 / count as f64;
            Tensor4::dense(out_shape, acc.iter().map(|a| a.value() * inv).collect())
        }
    }
}

/// Largest absolute value over the four single-slot partial averages.
pub fn max_single_slot_average(t: &Tensor4) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in 0..4 {
        worst = worst.max(partial_average(t, Slots::single(s))?.max_abs());
    }
    Ok(worst)
}

/// True iff every single-slot partial average is at most
/// `tol · max(1, max|w|)` in absolute value.
pub fn is_degenerate(t: &Tensor4, tol: f64) -> bool {
    assert!(tol >= 0.0, "tolerance must be non-negative");
    let scale = 1f64.max(t.max_abs());
    max_single_slot_average(t).is_ok_and(|m| m <= tol * scale)
}

/// Errors with [`DipsError::NotDegenerate`] unless `t` passes [`is_degenerate`].
pub fn require_degenerate(t: &Tensor4, tol: f64) -> Result<()> {
    let worst = max_single_slot_average(t)?;
    if worst > tol * 1f64.max(t.max_abs()) {
        return Err(DipsError::NotDegenerate { max_abs: worst });
    }
    Ok(())
}

/// `Q_w = N·Σ a_w(i,π(i)) + Σ d_w(i,j,π(i),π(j)) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `a_w`, an `N×N` matrix summing to zero.
    pub linear: Matrix,
    /// `d_w`, a degenerate tensor.
    pub degenerate: Tensor4,
    /// `N² · w(·,·,·,·)`.
    pub constant: f64,
}

/// Splits a square tensor into its linear part `a_w`, degenerate part `d_w`
/// and constant.
pub fn hoeffding_decompose(t: &Tensor4) -> Result<Decomposition> {
    let n = t.n()?;
    let nf = n as f64;
    let grand = t.sum() / nf.powi(4);
    match &t.storage {
        Storage::Product { c, a } => {
            let (rc, cc, mc) = (linalg::row_means(c), linalg::col_means(c), linalg::mean(c));
            let (ra, ca, ma) = (linalg::row_means(a), linalg::col_means(a), linalg::mean(a));
            let linear = Matrix::from_fn(n, n, |i, j| (rc[i] - mc) * (ra[j] - ma) + (cc[i] - mc) * (ca[j] - ma));
            let degenerate = Tensor4::product(linalg::double_center(c), linalg::double_center(a))?;
            Ok(Decomposition { linear, degenerate, constant: nf * nf * grand })
        }
        Storage::Dense(_) => {
            // w(i,·,k,·) and w(·,j,·,l)
            let m13 = partial_average(t, Slots::J | Slots::L)?;
            let m24 = partial_average(t, Slots::I | Slots::K)?;
            let m13 = Matrix::from_fn(n, n, |i, k| m13.get(i, 0, k, 0));
            let m24 = Matrix::from_fn(n, n, |j, l| m24.get(0, j, 0, l));
            let linear = linalg::double_center(&m13) + linalg::double_center(&m24);
            let degenerate = t.center(Slots::ALL)?;
            Ok(Decomposition { linear, degenerate, constant: nf * nf * grand })
        }
    }
}

/// A pair of index subsets `I, J ⊂ [N]` with `|I| = |J| = ⌈N/2⌉`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSplit {
    n: usize,
    i_set: Vec<usize>,
    j_set: Vec<usize>,
}

impl IndexSplit {
    pub fn new(n: usize, mut i_set: Vec<usize>, mut j_set: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return invalid("an index split needs N >= 2");
        }
        let half = n.div_ceil(2);
        for (name, set) in [("I", &mut i_set), ("J", &mut j_set)] {
            set.sort_unstable();
            set.dedup();
            if set.len() != half {
                return invalid(format!("|{name}| must be ceil(N/2) = {half} distinct indices"));
            }
            if set.iter().any(|&x| x >= n) {
                return invalid(format!("{name} contains an index >= N = {n}"));
            }
        }
        Ok(Self { n, i_set, j_set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half(&self) -> usize {
        self.i_set.len()
    }

    pub fn i_set(&self) -> &[usize] {
        &self.i_set
    }

    pub fn j_set(&self) -> &[usize] {
        &self.j_set
    }

    pub fn i_complement(&self) -> Vec<usize> {
        complement(self.n, &self.i_set)
    }

    pub fn j_complement(&self) -> Vec<usize> {
        complement(self.n, &self.j_set)
    }
}

pub(crate) fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    (0..n).filter(|x| set.binary_search(x).is_err()).collect()
}

/// The centered restriction of `t` to `I × Iᶜ × J × Jᶜ`.
///
/// The result has shape `[|I|, |Iᶜ|, |J|, |Jᶜ|]`; position `p` in each slot
/// refers to the `p`-th smallest element of the corresponding index set. All
/// four restricted single-slot averages of the result vanish.
pub fn tilde_d_restrict(t: &Tensor4, split: &IndexSplit) -> Result<Tensor4> {
    let n = t.n()?;
    if split.n() != n {
        return Err(DipsError::DimensionMismatch { expected: n, got: split.n() });
    }
    let ic = split.i_complement();
    let jc = split.j_complement();
    t.restrict([split.i_set(), &ic, split.j_set(), &jc])?.center(Slots::ALL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Form {
    Dense,
    Product,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TensorData {
    Dense(Vec<f64>),
    Product { c: Vec<Vec<f64>>, a: Vec<Vec<f64>> },
}

/// On-disk JSON layout of a tensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    form: Form,
    data: TensorData,
}

impl TensorFile {
    fn into_tensor(self) -> Result<Tensor4> {
        let m = self.m.unwrap_or(self.n);
        let t = match (self.form, self.data) {
            (Form::Dense, TensorData::Dense(data)) => Tensor4::dense([self.n, m, self.n, m], data)?,
            (Form::Product, TensorData::Product { c, a }) => {
                Tensor4::product(linalg::matrix_from_rows(&c)?, linalg::matrix_from_rows(&a)?)?
            }
            (form, _) => return invalid(format!("\"data\" does not match form {form:?}")),
        };
        if t.shape() != [self.n, m, self.n, m] {
            return invalid(format!("declared size n={}, m={m} does not match data shape {:?}", self.n, t.shape()));
        }
        Ok(t)
    }

    fn from_tensor(t: &Tensor4) -> Result<Self> {
        if !t.is_bipartite() {
            return invalid(format!("shape {:?} cannot be serialized", t.shape()));
        }
        let [n, m, _, _] = t.shape();
        let m = (m != n).then_some(m);
        let (form, data) = match t.storage() {
            Storage::Dense(d) => (Form::Dense, TensorData::Dense(d.clone())),
            Storage::Product { c, a } => {
                (Form::Product, TensorData::Product { c: linalg::matrix_to_rows(c), a: linalg::matrix_to_rows(a) })
            }
        };
        Ok(Self { n, m, form, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn constant_and_zero_averages() {
        let t = Tensor4::constant(3, 2.5).unwrap();
        for slots in [Slots::I, Slots::J | Slots::L, Slots::ALL] {
            let avg = partial_average(&t, slots).unwrap();
            assert!(avg.dense_data().unwrap().iter().all(|&x| (x - 2.5).abs() < 1e-15));
        }
        let z = partial_average(&Tensor4::zeros(3).unwrap(), Slots::K).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn single_slot_average_matches_loop() {
        let t = gen::dense_tensor(&mut rng(1), 3);
        let avg = partial_average(&t, Slots::L).unwrap();
        assert_eq!(avg.shape(), [3, 3, 3, 1]);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let direct = (t.get(i, j, k, 0) + t.get(i, j, k, 1) + t.get(i, j, k, 2)) / 3.0;
                    assert!((avg.get(i, j, k, 0) - direct).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn empty_slot_set_is_an_error() {
        let t = Tensor4::zeros(2).unwrap();
        assert!(partial_average(&t, Slots::NONE).is_err());
        assert!(Slots::from_numbers(&[0]).is_err());
        assert_eq!(Slots::from_numbers(&[1, 3]).unwrap(), Slots::I | Slots::K);
    }

    #[test]
    fn degeneracy_basic_cases() {
        assert!(is_degenerate(&Tensor4::zeros(3).unwrap(), DEGENERACY_TOL));
        assert!(!is_degenerate(&Tensor4::constant(3, 0.7).unwrap(), DEGENERACY_TOL));
        let t = gen::dense_tensor(&mut rng(2), 4);
        let d = hoeffding_decompose(&t).unwrap().degenerate;
        assert!(is_degenerate(&d, DEGENERACY_TOL));
    }

    #[test]
    fn decomposition_of_special_inputs() {
        let c = Tensor4::constant(4, -1.5).unwrap();
        let dec = hoeffding_decompose(&c).unwrap();
        assert!(linalg::max_abs(&dec.linear) < 1e-14);
        assert!(dec.degenerate.max_abs() < 1e-14);
        assert!((dec.constant - 16.0 * -1.5).abs() < 1e-12);

        let d = gen::degenerate_tensor(&mut rng(3), 4);
        let dec = hoeffding_decompose(&d).unwrap();
        assert!(linalg::max_abs(&dec.linear) < 1e-12);
        assert!(dec.constant.abs() < 1e-12);
        let diff = d.dense_data().unwrap().iter().zip(dec.degenerate.dense_data().unwrap());
        assert!(diff.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn rectangular_input_is_rejected() {
        let t = Tensor4::dense([2, 3, 2, 3], vec![0.0; 36]).unwrap();
        assert!(matches!(hoeffding_decompose(&t), Err(DipsError::NotSquare(_))));
    }

    #[test]
    fn construction_validates() {
        assert!(Tensor4::dense([2, 2, 2, 2], vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::INFINITY;
        assert!(matches!(Tensor4::dense([2; 4], v), Err(DipsError::NonFinite(3))));
        let big = Tensor4::product(Matrix::zeros(65, 65), Matrix::zeros(65, 65)).unwrap();
        assert!(big.to_dense().is_err());
    }

    #[test]
    fn index_split_validation() {
        assert!(IndexSplit::new(5, vec![0, 1, 2], vec![2, 3, 4]).is_ok());
        assert!(IndexSplit::new(5, vec![0, 1], vec![2, 3, 4]).is_err());
        assert!(IndexSplit::new(4, vec![0, 4], vec![1, 2]).is_err());
        assert!(IndexSplit::new(4, vec![1, 1], vec![1, 2]).is_err());
        let s = IndexSplit::new(4, vec![3, 0], vec![1, 2]).unwrap();
        assert_eq!(s.i_set(), &[0, 3]);
        assert_eq!(s.i_complement(), vec![1, 2]);
    }

    #[test]
    fn centered_restriction_special_inputs() {
        let split = IndexSplit::new(6, vec![0, 2, 4], vec![1, 2, 3]).unwrap();
        let out = tilde_d_restrict(&Tensor4::constant(6, 3.0).unwrap(), &split).unwrap();
        assert!(out.max_abs() < 1e-14);
        assert_eq!(out.shape(), [3, 3, 3, 3]);

        // A tensor that is already centered over the restriction is unchanged.
        let inner = gen::degenerate_tensor(&mut rng(4), 3);
        let (ic, jc) = (split.i_complement(), split.j_complement());
        let t = Tensor4::from_fn([6; 4], |i, j, k, l| {
            let p = |set: &[usize], x: usize| set.iter().position(|&y| y == x);
            match (p(split.i_set(), i), p(&ic, j), p(split.j_set(), k), p(&jc, l)) {
                (Some(a), Some(b), Some(c), Some(d)) => inner.get(a, b, c, d),
                _ => (i + 2 * j + 3 * k + 5 * l) as f64,
            }
        })
        .unwrap();
        let out = tilde_d_restrict(&t, &split).unwrap();
        let diff = out.dense_data().unwrap().iter().zip(inner.dense_data().unwrap());
        assert!(diff.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn json_round_trip_both_forms() {
        let t = gen::dense_tensor(&mut rng(5), 2);
        let back = Tensor4::from_json_str(&t.to_json_value().unwrap().to_string()).unwrap();
        assert_eq!(back, t);
        let p = gen::product_tensor(&mut rng(6), 3);
        let back = Tensor4::from_json_str(&p.to_json_value().unwrap().to_string()).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"n": 2, "form": "dense", "data": {"c": [[1.0]], "a": [[1.0]]}}"#;
        assert!(Tensor4::from_json_str(bad).is_err());
        let wrong_n = r#"{"n": 3, "form": "dense", "data": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]}"#;
        assert!(Tensor4::from_json_str(wrong_n).is_err());
    }
}
