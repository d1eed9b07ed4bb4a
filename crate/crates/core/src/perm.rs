//! Permutations: sampling, lexicographic enumeration, split bijections and
//! evaluation of double-indexed permutation statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DipsError, Result};
use crate::numeric::ksum;
use crate::tensor::{complement, Decomposition, IndexSplit, Storage, Tensor4};

/// Largest `n` accepted by [`enumerate_all`].
pub const ENUMERATION_CAP: usize = 10;

/// A bijection of `{0, …, n-1}`; `p[i]` is the image of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &v in &mapping {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return invalid(format!("{mapping:?} is not a permutation of 0..{n}"));
            }
        }
        Ok(Self(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn reversal(n: usize) -> Self {
        Self((0..n).rev().collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.n()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.n() != other.n() {
            return Err(DipsError::DimensionMismatch { expected: self.n(), got: other.n() });
        }
        Ok(Self(other.0.iter().map(|&i| self.0[i]).collect()))
    }

    /// Swaps the images of `a` and `b`.
    pub fn swap(&mut self, a: usize, b: usize) {
        self.0.swap(a, b);
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = DipsError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.0
    }
}

/// `(seed, stream)` determines every draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Seed for replicate `r`: same master seed, stream `r`.
    pub fn replicate(self, r: u64) -> Self {
        Self { seed: self.seed, stream: r }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Inside-out Fisher-Yates shuffle of `0..n`.
pub fn shuffle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut a = vec![0; n];
    for i in 0..n {
        let j = rng.random_range(0..=i);
        if j != i {
            a[i] = a[j];
        }
        a[j] = i;
    }
    a
}

/// Uniform permutation drawn from `rng`.
pub fn sample_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n == 0 {
        return invalid("cannot sample a permutation of 0 elements");
    }
    Ok(Permutation(shuffle(n, rng)))
}

/// Uniform permutation of `0..n`, deterministic in `seed`.
pub fn sample_uniform(n: usize, seed: RngSeed) -> Result<Permutation> {
    sample_with(n, &mut seed.rng())
}

/// Lexicographic iterator over `S_n`.
#[derive(Debug, Clone)]
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        if next_lexicographic(&mut nxt) {
            self.next = Some(nxt);
        }
        Some(Permutation(cur))
    }
}

fn next_lexicographic(a: &mut [usize]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| a[i] < a[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| a[j] > a[i]).expect("successor exists");
    a.swap(i, j);
    a[i + 1..].reverse();
    true
}

/// All `n!` permutations in lexicographic order, starting at the identity.
pub fn enumerate_all(n: usize) -> Result<Permutations> {
    if n == 0 {
        return invalid("cannot enumerate permutations of 0 elements");
    }
    if n > ENUMERATION_CAP {
        return Err(DipsError::EnumerationCap { n, cap: ENUMERATION_CAP });
    }
    Ok(Permutations { next: Some((0..n).collect()) })
}

fn check_square_against(t: &Tensor4, n: usize) -> Result<usize> {
    let tn = t.n()?;
    if tn != n {
        return Err(DipsError::DimensionMismatch { expected: tn, got: n });
    }
    Ok(tn)
}

/// `Σ_{i,j} w(i,j,π(i),π(j))`, over all pairs or only `i ≠ j`.
pub fn evaluate_dips(t: &Tensor4, p: &Permutation, include_diagonal: bool) -> Result<f64> {
    let n = check_square_against(t, p.n())?;
    let pi = p.as_slice();
    let mut total = 0.0;
    match t.storage() {
        Storage::Dense(d) => {
            let n2 = n * n;
            for i in 0..n {
                let row = i * n * n2 + pi[i] * n;
                for j in 0..n {
                    if include_diagonal || i != j {
                        total += d[row + j * n2 + pi[j]];
                    }
                }
            }
        }
        Storage::Product { c, a } => {
            for i in 0..n {
                for j in 0..n {
                    if include_diagonal || i != j {
                        total += c[(i, j)] * a[(pi[i], pi[j])];
                    }
                }
            }
        }
    }
    Ok(total)
}

/// `Σ_{i,j} d(i,j,π(i),τ(j))` for a tensor of shape `[N, M, N, M]`.
pub fn evaluate_bilinear(t: &Tensor4, pi: &Permutation, tau: &Permutation) -> Result<f64> {
    let [n, m, n2, m2] = t.shape();
    if n != n2 || m != m2 {
        return invalid(format!("shape {:?} is not of the form [N, M, N, M]", t.shape()));
    }
    if pi.n() != n {
        return Err(DipsError::DimensionMismatch { expected: n, got: pi.n() });
    }
    if tau.n() != m {
        return Err(DipsError::DimensionMismatch { expected: m, got: tau.n() });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += t.get(i, j, pi[i], tau[j]);
        }
    }
    Ok(total)
}

/// Exact `E[Q]` under a uniform permutation.
///
/// Off-diagonal part: `(1/(N(N-1))) Σ_{i≠j} Σ_{k≠l} w(i,j,k,l)`.
/// Diagonal part: `(1/N) Σ_{i,k} w(i,i,k,k)`.
pub fn exact_expectation(t: &Tensor4, include_diagonal: bool) -> Result<f64> {
    let n = t.n()?;
    if n < 2 && !include_diagonal {
        return invalid("the off-diagonal expectation needs N >= 2");
    }
    let nf = n as f64;
    let (off, diag) = match t.storage() {
        Storage::Product { c, a } => {
            let (sc, tc) = (ksum(c.iter().copied()), ksum(c.diagonal().iter().copied()));
            let (sa, ta) = (ksum(a.iter().copied()), ksum(a.diagonal().iter().copied()));
            ((sc - tc) * (sa - ta), tc * ta)
        }
        Storage::Dense(_) => {
            let all = t.sum();
            let ij = ksum(
                (0..n)
                    .flat_map(|i| (0..n).flat_map(move |k| (0..n).map(move |l| (i, k, l))))
                    .map(|(i, k, l)| t.get(i, i, k, l)),
            );
            let kl = ksum(
                (0..n)
                    .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |k| (i, j, k))))
                    .map(|(i, j, k)| t.get(i, j, k, k)),
            );
            let both = ksum((0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| t.get(i, i, k, k)));
            ((all - ij) - (kl - both), both)
        }
    };
    let off = if n >= 2 { off / (nf * (nf - 1.0)) } else { 0.0 };
    Ok(if include_diagonal { off + diag / nf } else { off })
}

/// A pair of bijections `π₁: I → J`, `π₂: Iᶜ → Jᶜ`.
///
/// `pi1[p]` is the image of the `p`-th smallest element of `I`; likewise for
/// `pi2` over `Iᶜ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBijection {
    pub split: IndexSplit,
    pub pi1: Vec<usize>,
    pub pi2: Vec<usize>,
}

impl SplitBijection {
    pub fn new(split: IndexSplit, pi1: Vec<usize>, pi2: Vec<usize>) -> Result<Self> {
        let check = |name: &str, map: &[usize], target: &[usize]| -> Result<()> {
            let mut sorted = map.to_vec();
            sorted.sort_unstable();
            if sorted != target {
                return invalid(format!("{name} is not a bijection onto its target set"));
            }
            Ok(())
        };
        check("pi1", &pi1, split.j_set())?;
        check("pi2", &pi2, &split.j_complement())?;
        Ok(Self { split, pi1, pi2 })
    }

    /// The permutation of `[N]` that agrees with `π₁` on `I` and `π₂` on `Iᶜ`.
    pub fn as_permutation(&self) -> Permutation {
        let mut map = vec![0; self.split.n()];
        for (p, &i) in self.split.i_set().iter().enumerate() {
            map[i] = self.pi1[p];
        }
        for (p, i) in self.split.i_complement().into_iter().enumerate() {
            map[i] = self.pi2[p];
        }
        Permutation(map)
    }
}

fn random_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut s: Vec<usize> = shuffle(n, rng).into_iter().take(k).collect();
    s.sort_unstable();
    s
}

fn random_bijection<R: Rng + ?Sized>(target: &[usize], rng: &mut R) -> Vec<usize> {
    shuffle(target.len(), rng).into_iter().map(|p| target[p]).collect()
}

/// Independent uniform `I`, `J` of size `⌈n/2⌉` with independent uniform
/// bijections `I → J` and `Iᶜ → Jᶜ`.
pub fn sample_split(n: usize, seed: RngSeed) -> Result<SplitBijection> {
    if n < 2 {
        return invalid("a split bijection needs n >= 2");
    }
    let mut rng = seed.rng();
    let half = n.div_ceil(2);
    let i_set = random_subset(n, half, &mut rng);
    let j_set = random_subset(n, half, &mut rng);
    let split = IndexSplit::new(n, i_set, j_set)?;
    let pi1 = random_bijection(split.j_set(), &mut rng);
    let pi2 = random_bijection(&complement(n, split.j_set()), &mut rng);
    Ok(SplitBijection { split, pi1, pi2 })
}

impl Decomposition {
    /// `N·Σ a_w(i,π(i)) + Σ d_w(i,j,π(i),π(j)) + constant`.
    pub fn reconstruct(&self, p: &Permutation) -> Result<f64> {
        let n = self.linear.nrows();
        if p.n() != n {
            return Err(DipsError::DimensionMismatch { expected: n, got: p.n() });
        }
        let linear = ksum((0..n).map(|i| self.linear[(i, p[i])]));
        let quad = evaluate_dips(&self.degenerate, p, true)?;
        Ok(n as f64 * linear + quad + self.constant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use std::collections::HashSet;

    #[test]
    fn sample_trivial_cases() {
        assert_eq!(sample_uniform(1, RngSeed::new(9)).unwrap(), Permutation::identity(1));
        assert!(sample_uniform(0, RngSeed::new(9)).is_err());
        let s = RngSeed { seed: 17, stream: 3 };
        assert_eq!(sample_uniform(5, s).unwrap(), sample_uniform(5, s).unwrap());
        assert_ne!(sample_uniform(12, s).unwrap(), sample_uniform(12, s.replicate(4)).unwrap());
    }

    #[test]
    fn enumeration_order_and_count() {
        let all: Vec<_> = enumerate_all(3).unwrap().collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], Permutation::identity(3));
        assert_eq!(all[5].as_slice(), &[2, 1, 0]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let set: HashSet<_> = enumerate_all(4).unwrap().collect();
        assert_eq!(set.len(), 24);
        assert!(matches!(enumerate_all(11), Err(DipsError::EnumerationCap { .. })));
        assert!(enumerate_all(0).is_err());
    }

    #[test]
    fn permutation_validation_and_json() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let p: Permutation = serde_json::from_str("[2,0,1]").unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[2,0,1]");
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
        assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(3));
    }

    #[test]
    fn evaluate_trivial_tensors() {
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(evaluate_dips(&Tensor4::zeros(4).unwrap(), &p, true).unwrap(), 0.0);
        let c = Tensor4::constant(4, 1.5).unwrap();
        assert_eq!(evaluate_dips(&c, &p, true).unwrap(), 16.0 * 1.5);
        assert_eq!(evaluate_dips(&c, &p, false).unwrap(), 12.0 * 1.5);
        assert!(evaluate_dips(&c, &Permutation::identity(3), true).is_err());
    }

    #[test]
    fn product_and_dense_paths_agree() {
        let mut rng = RngSeed::new(5).rng();
        let t = gen::product_tensor(&mut rng, 5);
        let d = t.to_dense().unwrap();
        for p in enumerate_all(5).unwrap() {
            for diag in [true, false] {
                let a = evaluate_dips(&t, &p, diag).unwrap();
                let b = evaluate_dips(&d, &p, diag).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
        for diag in [true, false] {
            let a = exact_expectation(&t, diag).unwrap();
            let b = exact_expectation(&d, diag).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_special_cases() {
        let c = Tensor4::constant(4, -2.0).unwrap();
        assert!((exact_expectation(&c, true).unwrap() + 32.0).abs() < 1e-12);
        assert!(exact_expectation(&Tensor4::constant(1, 1.0).unwrap(), false).is_err());
        assert_eq!(exact_expectation(&Tensor4::constant(1, 3.0).unwrap(), true).unwrap(), 3.0);

        let mut rng = RngSeed::new(8).rng();
        let d = gen::degenerate_tensor(&mut rng, 5);
        let diag_sum: f64 = (0..5).flat_map(|i| (0..5).map(move |k| (i, k))).map(|(i, k)| d.get(i, i, k, k)).sum();
        let e = exact_expectation(&d, false).unwrap();
        assert!((e - diag_sum / 20.0).abs() < 1e-12);
    }

    #[test]
    fn split_bijection_contracts() {
        let s = sample_split(2, RngSeed::new(1)).unwrap();
        assert_eq!(s.split.half(), 1);
        assert_eq!(s.pi1, s.split.j_set());
        for r in 0..50 {
            let s = sample_split(7, RngSeed::new(3).replicate(r)).unwrap();
            let mut a = s.pi1.clone();
            a.sort_unstable();
            assert_eq!(a, s.split.j_set());
            let mut b = s.pi2.clone();
            b.sort_unstable();
            assert_eq!(b, s.split.j_complement());
            let p = s.as_permutation();
            for (k, &i) in s.split.i_set().iter().enumerate() {
                assert_eq!(p[i], s.pi1[k]);
            }
        }
        assert!(sample_split(1, RngSeed::new(1)).is_err());
    }

    #[test]
    fn bilinear_matches_definition() {
        let t = Tensor4::from_fn([2, 3, 2, 3], |i, j, k, l| (i + 2 * j + 5 * k + 7 * l) as f64).unwrap();
        let pi = Permutation::new(vec![1, 0]).unwrap();
        let tau = Permutation::new(vec![2, 0, 1]).unwrap();
        let mut want = 0.0;
        for i in 0..2 {
            for j in 0..3 {
                want += t.get(i, j, pi[i], tau[j]);
            }
        }
        assert_eq!(evaluate_bilinear(&t, &pi, &tau).unwrap(), want);
        assert!(evaluate_bilinear(&t, &tau, &pi).is_err());
    }
}
