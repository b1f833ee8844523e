//! Gossip matrices, their validation, and time-varying schedules.
//!
//! A gossip matrix `W` holds one round of mixing weights: agent `i` replaces
//! its value by `Σⱼ w_ij v_j`, and `w_ij = 0` means agent `i` does not hear
//! from agent `j` in that round. The spectral gap `‖W − 𝟙𝟙ᵀ/n‖` bounds how
//! fast disagreement between agents contracts.
//!
//! [`GossipMatrix`] is generic over its entry type so that configs written
//! with exact fractions can be validated without rounding (see
//! [`ExactGossipMatrix`]) before being converted to floating point.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{spectral_norm, Matrix};
use crate::scalar::Scalar;

/// Default tolerance for the doubly-stochastic check at schedule construction.
pub const DEFAULT_STOCHASTIC_TOL: f64 = 1e-9;

/// Gossip matrix with exact rational entries.
pub type ExactGossipMatrix = GossipMatrix<Rational64>;

/// Dense `n × n` matrix of mixing weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix<T> {
    n: usize,
    weights: Vec<T>,
}

impl<T: Clone> GossipMatrix<T> {
    pub fn new(n: usize, weights: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("gossip matrix needs at least one agent".into()));
        }
        check_dim(n * n, weights.len())?;
        Ok(Self { n, weights })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let mut weights = Vec::with_capacity(n * n);
        for row in rows {
            check_dim(n, row.len())?;
            weights.extend(row);
        }
        Self::new(n, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight agent `i` applies to the message from agent `j`.
    pub fn weight(&self, i: usize, j: usize) -> &T {
        &self.weights[i * self.n + j]
    }

    /// Row `i`: the only part of the matrix agent `i` ever needs.
    pub fn row(&self, i: usize) -> &[T] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let weights = (0..n * n).map(|idx| self.weights[(idx % n) * n + idx / n].clone()).collect();
        Self { n, weights }
    }
}

impl<T: Clone + Zero> GossipMatrix<T> {
    /// Number of directed links `j → i` (`i ≠ j`) with nonzero weight.
    pub fn off_diagonal_nnz(&self) -> usize {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && !self.weight(i, j).is_zero())
            .count()
    }
}

/// Row and column sum deviations of a candidate gossip matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticityReport<T> {
    /// `|Σⱼ w_ij − 1|` for each row `i`.
    pub row_deviations: Vec<T>,
    /// `|Σᵢ w_ij − 1|` for each column `j`.
    pub column_deviations: Vec<T>,
    pub max_deviation: T,
    pub tol: T,
    pub passed: bool,
}

impl<T: Num + Signed + PartialOrd + Clone> GossipMatrix<T> {
    /// Checks `W𝟙 = 𝟙` and `𝟙ᵀW = 𝟙ᵀ` up to `tol`.
    pub fn validate_doubly_stochastic(&self, tol: T) -> Result<StochasticityReport<T>> {
        if tol <= T::zero() {
            return Err(Error::Domain("tolerance must be positive".into()));
        }
        let n = self.n;
        let dev = |s: T| (s - T::one()).abs();
        let row_deviations: Vec<T> = (0..n)
            .map(|i| dev(self.row(i).iter().cloned().fold(T::zero(), |a, b| a + b)))
            .collect();
        let column_deviations: Vec<T> = (0..n)
            .map(|j| dev((0..n).fold(T::zero(), |a, i| a + self.weight(i, j).clone())))
            .collect();
        let max_deviation = row_deviations
            .iter()
            .chain(&column_deviations)
            .cloned()
            .fold(T::zero(), |a, b| if b > a { b } else { a });
        let passed = max_deviation <= tol;
        Ok(StochasticityReport { row_deviations, column_deviations, max_deviation, tol, passed })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|w| !w.is_negative())
    }
}

impl<T: ToPrimitive> GossipMatrix<T> {
    /// Converts every entry to the scalar type `F`.
    pub fn to_scalar<F: Scalar>(&self) -> Result<GossipMatrix<F>> {
        let weights = self
            .weights
            .iter()
            .map(|w| {
                w.to_f64()
                    .and_then(F::from_f64)
                    .ok_or_else(|| Error::Domain("weight not representable".into()))
            })
            .collect::<Result<Vec<F>>>()?;
        Ok(GossipMatrix { n: self.n, weights })
    }
}

impl<T: Scalar> GossipMatrix<T> {
    /// `𝟙𝟙ᵀ/n`: every agent averages everyone in one round.
    pub fn complete(n: usize) -> Result<Self> {
        let w = T::one() / T::lit(n as f64);
        Self::new(n, vec![w; n * n])
    }

    /// No communication at all.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, Matrix::identity(n).as_slice().to_vec())
    }

    /// Undirected ring with equal weights `1/3` on self and both neighbours.
    ///
    /// For `n ≤ 2` this degenerates to [`GossipMatrix::complete`].
    pub fn ring(n: usize) -> Result<Self> {
        if n <= 2 {
            return Self::complete(n);
        }
        let third = T::one() / T::lit(3.0);
        let mut weights = vec![T::zero(); n * n];
        for i in 0..n {
            for j in [(i + n - 1) % n, i, (i + 1) % n] {
                weights[i * n + j] = third;
            }
        }
        Self::new(n, weights)
    }

    pub fn as_matrix(&self) -> Matrix<T> {
        Matrix::from_row_major(self.n, self.n, self.weights.clone()).expect("square by construction")
    }

    /// `W − 𝟙𝟙ᵀ/n`.
    pub fn deviation(&self) -> Matrix<T> {
        let avg = T::one() / T::lit(self.n as f64);
        let data = self.weights.iter().map(|&w| w - avg).collect();
        Matrix::from_row_major(self.n, self.n, data).expect("square by construction")
    }

    /// `‖W − 𝟙𝟙ᵀ/n‖` in the induced 2-norm.
    pub fn spectral_gap(&self) -> T {
        spectral_norm(&self.deviation())
    }

    /// Matrix product `self · rhs`, i.e. `rhs` is applied first.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        let p = self.as_matrix().matmul(&rhs.as_matrix())?;
        Self::new(self.n, p.as_slice().to_vec())
    }
}

/// Parses a weight written as an integer, decimal (`0.125`, `-1.5e-2`) or
/// fraction (`3/8`), exactly.
pub fn parse_weight(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse weight `{s}`"));
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_weight(num)?;
        let den = parse_weight(den)?;
        if den.is_zero() {
            return Err(Error::Config(format!("zero denominator in `{s}`")));
        }
        return Ok(num / den);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], i32::from_str(&s[pos + 1..]).map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let numer = i64::from_str(if joined.is_empty() { "0" } else { &joined }).map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let pow10 = |k: u32| 10_i64.checked_pow(k).ok_or_else(bad);
    let mut value = Rational64::from_integer(numer);
    if scale >= 0 {
        value = Rational64::from_integer(numer.checked_mul(pow10(scale as u32)?).ok_or_else(bad)?);
    } else {
        value /= Rational64::from_integer(pow10((-scale) as u32)?);
    }
    Ok(if negative { -value } else { value })
}

/// Parses a whitespace- or comma-separated row of weights.
pub fn parse_row(s: &str) -> Result<Vec<Rational64>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(parse_weight)
        .collect()
}

/// How a schedule picks the matrix for each communication round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// One matrix for every round.
    Constant,
    /// Cycles through the list by global round index.
    Cyclic,
    /// Uniform choice from the list, keyed on `(seed, k, ℓ)`.
    SeededRandom,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Cyclic => "cyclic",
            ScheduleKind::SeededRandom => "random",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "cyclic" => Ok(Self::Cyclic),
            "random" | "seeded-random" => Ok(Self::SeededRandom),
            other => Err(Error::Config(format!("unknown schedule kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleOptions {
    pub tol: f64,
    /// Reject matrices with negative weights.
    pub require_nonnegative: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_STOCHASTIC_TOL, require_nonnegative: false }
    }
}

/// Source of the per-round matrices `W^{k,ℓ}`.
///
/// Every matrix is validated once, at construction. Queries are pure
/// functions of `(kind, matrices, seed, k, ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipSchedule<T> {
    kind: ScheduleKind,
    matrices: Vec<GossipMatrix<T>>,
    seed: u64,
}

impl<T: Scalar> GossipSchedule<T> {
    pub fn new(
        kind: ScheduleKind,
        matrices: Vec<GossipMatrix<T>>,
        seed: u64,
        options: ScheduleOptions,
    ) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Config("schedule needs at least one matrix".into()))?;
        if kind == ScheduleKind::Constant && matrices.len() != 1 {
            return Err(Error::Config(format!(
                "constant schedule takes exactly one matrix, got {}",
                matrices.len()
            )));
        }
        let n = first.n();
        let tol = T::lit(options.tol);
        for (idx, w) in matrices.iter().enumerate() {
            if w.n() != n {
                return Err(Error::Config(format!(
                    "matrix {idx} is {}x{}, expected {n}x{n}",
                    w.n(),
                    w.n()
                )));
            }
            let report = w.validate_doubly_stochastic(tol)?;
            if !report.passed {
                return Err(Error::Config(format!(
                    "matrix {idx} is not doubly stochastic (max deviation {})",
                    report.max_deviation
                )));
            }
            if options.require_nonnegative && !w.is_nonnegative() {
                return Err(Error::Config(format!("matrix {idx} has negative weights")));
            }
        }
        Ok(Self { kind, matrices, seed })
    }

    pub fn constant(w: GossipMatrix<T>) -> Result<Self> {
        Self::new(ScheduleKind::Constant, vec![w], 0, ScheduleOptions::default())
    }

    pub fn cyclic(matrices: Vec<GossipMatrix<T>>) -> Result<Self> {
        Self::new(ScheduleKind::Cyclic, matrices, 0, ScheduleOptions::default())
    }

    pub fn seeded_random(matrices: Vec<GossipMatrix<T>>, seed: u64) -> Result<Self> {
        Self::new(ScheduleKind::SeededRandom, matrices, seed, ScheduleOptions::default())
    }

    pub fn n(&self) -> usize {
        self.matrices[0].n()
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrices(&self) -> &[GossipMatrix<T>] {
        &self.matrices
    }

    /// Index into [`GossipSchedule::matrices`] used at iteration `k`, round
    /// `l ∈ 1..=m`.
    pub fn index_at(&self, k: usize, l: usize, m: usize) -> usize {
        assert!(l >= 1 && l <= m, "round index {l} outside 1..={m}");
        let len = self.matrices.len();
        match self.kind {
            ScheduleKind::Constant => 0,
            ScheduleKind::Cyclic => (k * m + (l - 1)) % len,
            ScheduleKind::SeededRandom => {
                let h = keyed_hash(self.seed, k as u64, l as u64);
                ((u128::from(h) * len as u128) >> 64) as usize
            }
        }
    }

    /// `W^{k,ℓ}` for a run performing `m` rounds per iteration.
    pub fn matrix_at(&self, k: usize, l: usize, m: usize) -> &GossipMatrix<T> {
        &self.matrices[self.index_at(k, l, m)]
    }

    /// `W^{k,m} ⋯ W^{k,1}`.
    pub fn product(&self, k: usize, m: usize) -> Result<GossipMatrix<T>> {
        if m == 0 {
            return Err(Error::Domain("m must be at least 1".into()));
        }
        let mut acc = self.matrix_at(k, 1, m).clone();
        for l in 2..=m {
            acc = self.matrix_at(k, l, m).compose(&acc)?;
        }
        Ok(acc)
    }

    /// Spectral gap of the `m`-round product at iteration `k`.
    pub fn product_gap(&self, k: usize, m: usize) -> Result<T> {
        Ok(self.product(k, m)?.spectral_gap())
    }

    /// Largest one-round spectral gap over the matrix list.
    pub fn max_gap(&self) -> T {
        self.matrices.iter().map(GossipMatrix::spectral_gap).fold(T::zero(), T::max)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based draw: independent of query order.
fn keyed_hash(seed: u64, k: u64, l: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ k) ^ l.rotate_left(32))
}
