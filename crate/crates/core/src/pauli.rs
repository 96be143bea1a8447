//! n-qubit Pauli words in symplectic (x, z) bitmask form.
//!
//! Site 1 is the leftmost letter of the text form and the most significant bit
//! of a computational-basis index, so `"XZ"` is the Kronecker product `X ⊗ Z`.
//! On a basis state the word acts as a signed permutation:
//!
//! ```text
//! σ |l⟩ = i^{#Y} · (-1)^{popcount(l & z)} · |l ⊕ x⟩
//! ```
//!
//! which is what [`PauliWord::apply_into`] and the drift kernel use instead of
//! a dense matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest qubit count [`PauliWord::materialize`] builds by default.
pub const DEFAULT_DENSE_LIMIT: usize = 12;

/// Masks are 64-bit.
pub const MAX_QUBITS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Letter::I),
            'X' => Ok(Letter::X),
            'Y' => Ok(Letter::Y),
            'Z' => Ok(Letter::Z),
            other => Err(Error::InvalidLetter(other)),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliWord {
    letters: Vec<Letter>,
    x_mask: u64,
    z_mask: u64,
}

impl PauliWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        let n = letters.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "Pauli word length must be in 1..={MAX_QUBITS}, got {n}"
            )));
        }
        let mut x_mask = 0u64;
        let mut z_mask = 0u64;
        for (site, letter) in letters.iter().enumerate() {
            let bit = 1u64 << (n - 1 - site);
            let (x, z) = letter.bits();
            if x {
                x_mask |= bit;
            }
            if z {
                z_mask |= bit;
            }
        }
        Ok(Self {
            letters,
            x_mask,
            z_mask,
        })
    }

    /// Word acting as `letter` on the given 0-based sites and identity elsewhere.
    pub fn from_sites(n: usize, sites: &[(usize, Letter)]) -> Result<Self> {
        let mut letters = vec![Letter::I; n];
        for &(site, letter) in sites {
            if site >= n {
                return Err(Error::InvalidArgument(format!(
                    "site {site} out of range for {n} qubits"
                )));
            }
            letters[site] = letter;
        }
        Self::new(letters)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![Letter::I; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.letters.len()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        (self.x_mask | self.z_mask).count_ones() as usize
    }

    pub fn commutes_with(&self, other: &PauliWord) -> bool {
        let overlap = (self.x_mask & other.z_mask).count_ones() + (self.z_mask & other.x_mask).count_ones();
        overlap % 2 == 0
    }

    /// Global factor `i^{#Y}`.
    pub fn y_phase(&self) -> Complex64 {
        match (self.x_mask & self.z_mask).count_ones() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// `(-1)^{popcount(l & z)}`.
    #[inline]
    pub fn sign(&self, l: usize) -> f64 {
        if (l as u64 & self.z_mask).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Matrix element `⟨l ⊕ x| σ |l⟩`, the only nonzero entry of column `l`.
    #[inline]
    pub fn phase(&self, l: usize) -> Complex64 {
        self.y_phase() * self.sign(l)
    }

    #[inline]
    pub fn flip(&self, l: usize) -> usize {
        l ^ self.x_mask as usize
    }

    /// Writes `σ · input` into `out` without materializing `σ`.
    pub fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let d = self.dim();
        if input.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: input.len(),
            });
        }
        if out.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: out.len(),
            });
        }
        let global = self.y_phase();
        let x = self.x_mask as usize;
        for (l, amp) in input.iter().enumerate() {
            out[l ^ x] = global * self.sign(l) * amp;
        }
        Ok(())
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        let mut out = CVector::zeros(v.len());
        self.apply_into(v.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// `tr(σ A)` for a dense `A`, in O(d).
    pub fn expectation(&self, a: &CMatrix) -> Result<Complex64> {
        let d = self.dim();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: a.nrows(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..d {
            acc += self.phase(l) * a[(l, self.flip(l))];
        }
        Ok(acc)
    }

    pub fn materialize(&self) -> Result<CMatrix> {
        self.materialize_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn materialize_with_limit(&self, limit: usize) -> Result<CMatrix> {
        let n = self.num_qubits();
        if n > limit {
            return Err(Error::DenseLimit { n, limit });
        }
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for l in 0..d {
            m[(self.flip(l), l)] = self.phase(l);
        }
        Ok(m)
    }

    /// Adds `coeff · σ` into a dense accumulator.
    pub fn add_scaled_into(&self, coeff: f64, acc: &mut CMatrix) -> Result<()> {
        let d = self.dim();
        if acc.nrows() != d || acc.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: acc.nrows(),
            });
        }
        for l in 0..d {
            acc[(self.flip(l), l)] += self.phase(l) * coeff;
        }
        Ok(())
    }

    /// Restricts the word to its support. The returned permutation lists
    /// original sites in their new order: support sites first, identity
    /// sites after, both in ascending order.
    pub fn strip_identity(&self) -> Result<(PauliWord, SitePermutation)> {
        if self.is_identity() {
            return Err(Error::AllIdentity);
        }
        let (support, rest): (Vec<usize>, Vec<usize>) =
            (0..self.num_qubits()).partition(|&s| self.letters[s] != Letter::I);
        let reduced = PauliWord::new(support.iter().map(|&s| self.letters[s]).collect())?;
        let order = support.into_iter().chain(rest).collect();
        Ok((reduced, SitePermutation { order }))
    }
}

/// Pauli `e^{s σ / 2} = cosh(s/2) I + sinh(s/2) σ`, exact because `σ² = I`.
pub fn pauli_exponential(word: &PauliWord, s: f64) -> Result<CMatrix> {
    let half = 0.5 * s;
    let mut m = CMatrix::identity(word.dim(), word.dim()) * Complex64::from(half.cosh());
    word.add_scaled_into(half.sinh(), &mut m)?;
    Ok(m)
}

/// A reordering of qubit sites; `order[p]` is the original site placed at position `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SitePermutation {
    order: Vec<usize>,
}

impl SitePermutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &s in &order {
            if s >= order.len() || seen[s] {
                return Err(Error::InvalidArgument(format!("{order:?} is not a permutation")));
            }
            seen[s] = true;
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(p, &s)| p == s)
    }

    /// Basis index in the permuted ordering of an original basis index.
    pub fn permute_index(&self, index: usize) -> usize {
        let n = self.order.len();
        let mut out = 0usize;
        for (p, &site) in self.order.iter().enumerate() {
            let bit = (index >> (n - 1 - site)) & 1;
            out |= bit << (n - 1 - p);
        }
        out
    }

    /// Rewrites an operator from the original site order into the permuted one.
    pub fn permute_operator(&self, m: &CMatrix) -> Result<CMatrix> {
        let d = 1usize << self.order.len();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.nrows(),
            });
        }
        let mut out = CMatrix::zeros(d, d);
        let map: Vec<usize> = (0..d).map(|i| self.permute_index(i)).collect();
        for k in 0..d {
            for i in 0..d {
                out[(map[i], map[k])] = m[(i, k)];
            }
        }
        Ok(out)
    }

    /// Maps an operator written in the permuted site order back to the original order.
    pub fn unpermute_operator(&self, m: &CMatrix) -> Result<CMatrix> {
        let d = 1usize << self.order.len();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.nrows(),
            });
        }
        let map: Vec<usize> = (0..d).map(|i| self.permute_index(i)).collect();
        Ok(CMatrix::from_fn(d, d, |i, k| m[(map[i], map[k])]))
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s.trim().chars().map(Letter::from_char).collect::<Result<Vec<_>>>()?;
        PauliWord::new(letters)
    }
}

impl Serialize for PauliWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliWord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent oracle: Kronecker product of the 2×2 Pauli matrices.
    fn kron_oracle(word: &str) -> CMatrix {
        let single = |ch: char| -> CMatrix {
            let (o, i) = (c(0.0, 0.0), c(1.0, 0.0));
            match ch {
                'I' => CMatrix::from_row_slice(2, 2, &[i, o, o, i]),
                'X' => CMatrix::from_row_slice(2, 2, &[o, i, i, o]),
                'Y' => CMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
                'Z' => CMatrix::from_row_slice(2, 2, &[i, o, o, -i]),
                _ => unreachable!(),
            }
        };
        word.chars()
            .fold(CMatrix::identity(1, 1), |acc, ch| acc.kronecker(&single(ch)))
    }

    fn max_dev(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_word(rng: &mut impl Rng, n: usize) -> String {
        (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect()
    }

    fn random_vector(rng: &mut impl Rng, d: usize) -> CVector {
        CVector::from_fn(d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn masks_follow_letters() {
        let w: PauliWord = "IXYZ".parse().unwrap();
        assert_eq!(w.x_mask(), 0b0110);
        assert_eq!(w.z_mask(), 0b0011);
        assert_eq!(w.to_string(), "IXYZ");
        assert_eq!(w.weight(), 3);
        assert!("IXQ".parse::<PauliWord>().is_err());
        assert!("".parse::<PauliWord>().is_err());
    }

    #[test]
    fn materialize_single_z() {
        let z = "Z".parse::<PauliWord>().unwrap().materialize().unwrap();
        assert_eq!(z, CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)])));
    }

    #[test]
    fn materialize_x_kron_z() {
        let m = "XZ".parse::<PauliWord>().unwrap().materialize().unwrap();
        // X ⊗ Z: off-diagonal 2×2 blocks equal to Z.
        let (o, i) = (c(0.0, 0.0), c(1.0, 0.0));
        let expected = CMatrix::from_row_slice(
            4,
            4,
            &[o, o, i, o, o, o, o, -i, i, o, o, o, o, -i, o, o],
        );
        assert_eq!(m, expected);
    }

    #[test]
    fn materialize_identity() {
        let m = PauliWord::identity(3).unwrap().materialize().unwrap();
        assert_eq!(m, CMatrix::identity(8, 8));
    }

    #[test]
    fn dense_limit_enforced() {
        let w = PauliWord::identity(13).unwrap();
        assert_eq!(w.materialize(), Err(Error::DenseLimit { n: 13, limit: 12 }));
        assert!(w.materialize_with_limit(13).is_ok());
    }

    #[test]
    fn materialize_matches_kronecker_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=5 {
            for _ in 0..20 {
                let s = random_word(&mut rng, n);
                let w: PauliWord = s.parse().unwrap();
                assert_eq!(w.materialize().unwrap(), kron_oracle(&s), "{s}");
            }
        }
    }

    #[test]
    fn apply_bit_flip_and_y() {
        let e0 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let x: PauliWord = "X".parse().unwrap();
        assert_eq!(x.apply(&e0).unwrap(), CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        let y: PauliWord = "Y".parse().unwrap();
        assert_eq!(y.apply(&e0).unwrap(), CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 1.0)]));
    }

    #[test]
    fn apply_length_mismatch() {
        let w: PauliWord = "XX".parse().unwrap();
        let v = CVector::zeros(3);
        assert_eq!(w.apply(&v), Err(Error::DimensionMismatch { expected: 4, found: 3 }));
    }

    #[test]
    fn apply_agrees_with_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cases = 0;
        for n in 1..=6 {
            for _ in 0..17 {
                let s = random_word(&mut rng, n);
                let w: PauliWord = s.parse().unwrap();
                let v = random_vector(&mut rng, 1 << n);
                let dense = kron_oracle(&s) * &v;
                let fast = w.apply(&v).unwrap();
                assert!((dense - fast).camax() < 1e-12);
                cases += 1;
            }
        }
        assert!(cases >= 100);
    }

    #[test]
    fn pauli_exponential_closed_forms() {
        let w: PauliWord = "XY".parse().unwrap();
        assert_abs_diff_eq!(max_dev(&pauli_exponential(&w, 0.0).unwrap(), &CMatrix::identity(4, 4)), 0.0);

        let z: PauliWord = "Z".parse().unwrap();
        let tau = 0.2;
        let e = pauli_exponential(&z, -2.0 * tau).unwrap();
        assert_abs_diff_eq!(e[(0, 0)].re, (-0.2f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(e[(1, 1)].re, 0.2f64.exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn pauli_exponential_matches_taylor_series() {
        // Independent of operators::expm_hermitian: direct power series of 0.15·σ.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let s = random_word(&mut rng, 2);
            let sigma = kron_oracle(&s);
            let a = &sigma * Complex64::from(0.15);
            let mut term = CMatrix::identity(4, 4);
            let mut sum = term.clone();
            for k in 1..30 {
                term = &term * &a / Complex64::from(k as f64);
                sum += &term;
            }
            let w: PauliWord = s.parse().unwrap();
            assert!(max_dev(&pauli_exponential(&w, 0.3).unwrap(), &sum) < 1e-12);
        }
    }

    #[test]
    fn strip_identity_examples() {
        let (w, p) = "IXI".parse::<PauliWord>().unwrap().strip_identity().unwrap();
        assert_eq!(w.to_string(), "X");
        assert_eq!(p.order(), &[1, 0, 2]);

        let (w, p) = "ZZ".parse::<PauliWord>().unwrap().strip_identity().unwrap();
        assert_eq!(w.to_string(), "ZZ");
        assert!(p.is_identity());

        let (w, p) = "IIYZ".parse::<PauliWord>().unwrap().strip_identity().unwrap();
        assert_eq!(w.to_string(), "YZ");
        assert_eq!(p.order(), &[2, 3, 0, 1]);

        assert_eq!("III".parse::<PauliWord>().unwrap().strip_identity(), Err(Error::AllIdentity));
    }

    #[test]
    fn expectation_matches_dense_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_word(&mut rng, 3);
            let w: PauliWord = s.parse().unwrap();
            let a = CMatrix::from_fn(8, 8, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let dense = (kron_oracle(&s) * &a).trace();
            assert!((dense - w.expectation(&a).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn commutation_matches_dense_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (s1, s2) = (random_word(&mut rng, 3), random_word(&mut rng, 3));
            let (a, b) = (kron_oracle(&s1), kron_oracle(&s2));
            let commute = (&a * &b - &b * &a).camax() < 1e-12;
            let (w1, w2): (PauliWord, PauliWord) = (s1.parse().unwrap(), s2.parse().unwrap());
            assert_eq!(w1.commutes_with(&w2), commute);
        }
    }

    fn word_strategy(max_n: usize) -> impl Strategy<Value = String> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], n)
                .prop_map(|v| v.into_iter().collect::<String>())
        })
    }

    proptest! {
        #[test]
        fn squares_to_identity_and_hermitian(s in word_strategy(6)) {
            let m = s.parse::<PauliWord>().unwrap().materialize().unwrap();
            let d = m.nrows();
            prop_assert!(max_dev(&(&m * &m), &CMatrix::identity(d, d)) < 1e-12);
            prop_assert!(max_dev(&m.adjoint(), &m) < 1e-12);
        }

        #[test]
        fn exponential_inverse_pair(s in word_strategy(4), t in -5.0f64..5.0) {
            let w: PauliWord = s.parse().unwrap();
            let prod = pauli_exponential(&w, t).unwrap() * pauli_exponential(&w, -t).unwrap();
            prop_assert!(max_dev(&prod, &CMatrix::identity(w.dim(), w.dim())) < 1e-12);
        }

        #[test]
        fn strip_identity_round_trip(s in word_strategy(5)) {
            let w: PauliWord = s.parse().unwrap();
            prop_assume!(!w.is_identity());
            let (reduced, perm) = w.strip_identity().unwrap();
            let pad = PauliWord::identity(w.num_qubits() - reduced.num_qubits() + 1).unwrap();
            let padded = if pad.num_qubits() > 1 {
                reduced.materialize().unwrap().kronecker(&CMatrix::identity(pad.dim() / 2, pad.dim() / 2))
            } else {
                reduced.materialize().unwrap()
            };
            let restored = perm.unpermute_operator(&padded).unwrap();
            prop_assert!(max_dev(&restored, &w.materialize().unwrap()) < 1e-12);
        }

        #[test]
        fn text_form_round_trips(s in word_strategy(10)) {
            let w: PauliWord = s.parse().unwrap();
            prop_assert_eq!(w.to_string(), s);
        }
    }
}
