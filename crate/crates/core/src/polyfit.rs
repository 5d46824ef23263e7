//! Interpolating moments `z_k(p, ell)` by `f(x, y) = sum c_{i,j} x^{i/2} y^j`
//! with `0 <= i <= k + 4`, `0 <= j <= 2k - 2`, and testing whether two
//! independent pair sets give the same coefficients.
//!
//! Linear algebra runs at 256-bit precision.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use astro_float::{BigFloat, RoundingMode};
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::make_field;
use crate::moments::moment_brute;
use crate::ntheory::{is_prime, prime_divisors};

/// Working precision in bits.
pub const PRECISION: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

/// Smallest prime `p` used by the deterministic pair selection.
pub const MIN_PRIME: u64 = 11;

/// Unit roundoff `2^-PRECISION`.
pub fn unit_roundoff() -> f64 {
    2f64.powi(-(PRECISION as i32))
}

fn hp_u64(x: u64) -> BigFloat {
    BigFloat::from_u64(x, PRECISION)
}

fn hp_int(x: &BigInt) -> BigFloat {
    x.to_string().parse::<BigFloat>().expect("decimal integer").add(
        &BigFloat::from_u64(0, PRECISION),
        PRECISION,
        RM,
    )
}

fn hp_abs(x: &BigFloat) -> BigFloat {
    if x.is_negative() {
        x.neg()
    } else {
        x.clone()
    }
}

fn hp_max(a: BigFloat, b: BigFloat) -> BigFloat {
    if b.cmp(&a) == Some(1) {
        b
    } else {
        a
    }
}

fn hp_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    x.to_string().parse::<f64>().unwrap_or(f64::NAN)
}

/// `x^{i/2}`.
fn half_power(x: u64, i: u32) -> BigFloat {
    let base = hp_u64(x).powi((i / 2) as usize, PRECISION, RM);
    if i % 2 == 1 {
        base.mul(&hp_u64(x).sqrt(PRECISION, RM), PRECISION, RM)
    } else {
        base
    }
}

/// `(k + 5)(2k - 1)`.
pub fn system_dimension(k: u32) -> usize {
    ((k + 5) * (2 * k - 1)) as usize
}

/// Exponents `(i, j)` of each unknown, `i` outer.
pub fn monomials(k: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(system_dimension(k));
    for i in 0..=k + 4 {
        for j in 0..=2 * k - 2 {
            out.push((i, j));
        }
    }
    out
}

fn basis_row(k: u32, p: u64, ell: u64) -> Vec<BigFloat> {
    let xs: Vec<BigFloat> = (0..=k + 4).map(|i| half_power(p, i)).collect();
    let ys: Vec<BigFloat> = (0..=2 * k - 2)
        .map(|j| hp_u64(ell).powi(j as usize, PRECISION, RM))
        .collect();
    monomials(k)
        .into_iter()
        .map(|(i, j)| xs[i as usize].mul(&ys[j as usize], PRECISION, RM))
        .collect()
}

fn check_pair(p: u64, ell: u64) -> Result<()> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if !is_prime(ell) {
        return Err(Error::NotPrime(ell));
    }
    if (p - 1) % ell != 0 {
        return Err(Error::CongruenceViolation {
            p,
            ell,
            reason: "ell does not divide p - 1".into(),
        });
    }
    Ok(())
}

/// Exact `k`-th moment over `F_p`.
pub fn exact_moment(p: u64, ell: u64, k: u32) -> Result<BigInt> {
    let field = make_field(p, 1)?;
    Ok(moment_brute(&field, ell as u32, k)?.value)
}

fn moments_for(pairs: &[(u64, u64)], k: u32) -> Result<Vec<BigInt>> {
    pairs
        .par_iter()
        .map(|&(p, ell)| exact_moment(p, ell, k))
        .collect()
}

/// Square system `M c = v` for moment order `k`.
#[derive(Debug, Clone)]
pub struct InterpolationSystem {
    pub k: u32,
    pub pairs: Vec<(u64, u64)>,
    pub matrix: Vec<Vec<BigFloat>>,
    pub rhs: Vec<BigInt>,
}

impl InterpolationSystem {
    pub fn dimension(&self) -> usize {
        self.pairs.len()
    }

    /// Reorders the rows by `perm`, where row `r` of the result is row
    /// `perm[r]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> InterpolationSystem {
        InterpolationSystem {
            k: self.k,
            pairs: perm.iter().map(|&r| self.pairs[r]).collect(),
            matrix: perm.iter().map(|&r| self.matrix[r].clone()).collect(),
            rhs: perm.iter().map(|&r| self.rhs[r].clone()).collect(),
        }
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("moment order must be >= 1".into()));
    }
    Ok(())
}

/// Builds the square system from exactly `(k + 5)(2k - 1)` distinct pairs.
pub fn build_system(k: u32, pairs: &[(u64, u64)]) -> Result<InterpolationSystem> {
    check_k(k)?;
    let dim = system_dimension(k);
    if pairs.len() != dim {
        return Err(Error::WrongCount {
            expected: dim,
            got: pairs.len(),
        });
    }
    build_rows(k, pairs)
}

fn build_rows(k: u32, pairs: &[(u64, u64)]) -> Result<InterpolationSystem> {
    let mut distinct = HashSet::new();
    for &(p, ell) in pairs {
        check_pair(p, ell)?;
        if !distinct.insert((p, ell)) {
            return Err(Error::InvalidInput(format!("duplicate pair ({p}, {ell})")));
        }
    }
    let rhs = moments_for(pairs, k)?;
    let matrix = pairs.iter().map(|&(p, ell)| basis_row(k, p, ell)).collect();
    Ok(InterpolationSystem {
        k,
        pairs: pairs.to_vec(),
        matrix,
        rhs,
    })
}

/// Solution of a square system.
#[derive(Debug, Clone)]
pub struct Solution {
    pub coefficients: Vec<BigFloat>,
    /// `||M||_inf ||M^-1||_inf`.
    pub condition: f64,
    /// `||M c - v||_inf / ||v||_inf` (absolute when `v = 0`).
    pub residual: f64,
}

impl Solution {
    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.coefficients.iter().map(hp_to_f64).collect()
    }
}

/// LU factorization with partial pivoting.
struct Lu {
    lu: Vec<Vec<BigFloat>>,
    perm: Vec<usize>,
}

/// Pivots below `2^-SINGULAR_BITS` times the largest entry of their
/// (column-equilibrated) column count as zero.
const SINGULAR_BITS: i32 = 224;

impl Lu {
    fn factor(mut a: Vec<Vec<BigFloat>>) -> Result<Lu> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = BigFloat::from_f64(2f64.powi(-SINGULAR_BITS), PRECISION);
        for col in 0..n {
            let mut best = col;
            let mut best_abs = hp_abs(&a[col][col]);
            for r in col + 1..n {
                let v = hp_abs(&a[r][col]);
                if v.cmp(&best_abs) == Some(1) {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs.cmp(&tiny) != Some(1) {
                return Err(Error::SingularMatrix { column: col });
            }
            a.swap(col, best);
            perm.swap(col, best);
            let pivot = a[col][col].clone();
            let (upper, lower) = a.split_at_mut(col + 1);
            let pivot_row = &upper[col];
            for row in lower.iter_mut() {
                let factor = row[col].div(&pivot, PRECISION, RM);
                if factor.is_zero() {
                    row[col] = factor;
                    continue;
                }
                for c in col + 1..n {
                    let t = factor.mul(&pivot_row[c], PRECISION, RM);
                    row[c] = row[c].sub(&t, PRECISION, RM);
                }
                row[col] = factor;
            }
        }
        Ok(Lu { lu: a, perm })
    }

    fn solve(&self, b: &[BigFloat]) -> Vec<BigFloat> {
        let n = self.lu.len();
        let mut y: Vec<BigFloat> = self.perm.iter().map(|&r| b[r].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[i][j].mul(&y[j], PRECISION, RM);
                y[i] = y[i].sub(&t, PRECISION, RM);
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[i][j].mul(&y[j], PRECISION, RM);
                y[i] = y[i].sub(&t, PRECISION, RM);
            }
            y[i] = y[i].div(&self.lu[i][i], PRECISION, RM);
        }
        y
    }
}

fn inf_norm_rows(rows: &[Vec<BigFloat>]) -> BigFloat {
    rows.iter().fold(hp_u64(0), |acc, row| {
        let s = row
            .iter()
            .fold(hp_u64(0), |s, v| s.add(&hp_abs(v), PRECISION, RM));
        hp_max(acc, s)
    })
}

fn inf_norm(v: &[BigFloat]) -> BigFloat {
    v.iter().fold(hp_u64(0), |acc, x| hp_max(acc, hp_abs(x)))
}

/// `M c - v` with products accumulated at twice the working precision.
fn residual_vector(matrix: &[Vec<BigFloat>], c: &[BigFloat], v: &[BigFloat]) -> Vec<BigFloat> {
    let wide = 2 * PRECISION;
    matrix
        .iter()
        .zip(v)
        .map(|(row, vi)| {
            let mut acc = vi.neg();
            for (m, x) in row.iter().zip(c) {
                acc = acc.add(&m.mul(x, wide, RM), wide, RM);
            }
            acc.set_precision(PRECISION, RM).expect("precision");
            acc
        })
        .collect()
}

/// Maximum tolerated relative residual.
pub const RESIDUAL_LIMIT: f64 = 1e-20;

/// Solves the square system with column equilibration, partial pivoting and
/// two steps of iterative refinement.
pub fn solve_coeffs(sys: &InterpolationSystem) -> Result<Solution> {
    let n = sys.dimension();
    if n == 0 || sys.matrix.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("system is not square".into()));
    }
    let scales: Vec<BigFloat> = (0..n)
        .map(|c| {
            let m = sys
                .matrix
                .iter()
                .fold(hp_u64(0), |acc, row| hp_max(acc, hp_abs(&row[c])));
            if m.is_zero() {
                hp_u64(1)
            } else {
                m
            }
        })
        .collect();
    let scaled: Vec<Vec<BigFloat>> = sys
        .matrix
        .iter()
        .map(|row| {
            row.iter()
                .zip(&scales)
                .map(|(v, s)| v.div(s, PRECISION, RM))
                .collect()
        })
        .collect();
    let lu = Lu::factor(scaled.clone())?;
    let v: Vec<BigFloat> = sys.rhs.iter().map(hp_int).collect();

    let mut y = lu.solve(&v);
    for _ in 0..2 {
        let r = residual_vector(&scaled, &y, &v);
        let d = lu.solve(&r);
        for (yi, di) in y.iter_mut().zip(&d) {
            *yi = yi.sub(di, PRECISION, RM);
        }
    }
    let coefficients: Vec<BigFloat> = y
        .iter()
        .zip(&scales)
        .map(|(yi, s)| yi.div(s, PRECISION, RM))
        .collect();

    // Condition number of the unscaled matrix: columns of M^-1 are the
    // scaled inverse columns divided row-wise by the scales.
    let mut inverse_rows = vec![vec![hp_u64(0); n]; n];
    for col in 0..n {
        let mut e = vec![hp_u64(0); n];
        e[col] = hp_u64(1);
        let x = lu.solve(&e);
        for (row, (xi, s)) in x.iter().zip(&scales).enumerate() {
            inverse_rows[row][col] = xi.div(s, PRECISION, RM);
        }
    }
    let cond = inf_norm_rows(&sys.matrix).mul(&inf_norm_rows(&inverse_rows), PRECISION, RM);

    let r = residual_vector(&sys.matrix, &coefficients, &v);
    let v_norm = inf_norm(&v);
    let r_norm = inf_norm(&r);
    let residual = if v_norm.is_zero() {
        hp_to_f64(&r_norm)
    } else {
        hp_to_f64(&r_norm.div(&v_norm, PRECISION, RM))
    };
    if !(residual < RESIDUAL_LIMIT) {
        return Err(Error::ResidualTooLarge(residual));
    }
    Ok(Solution {
        coefficients,
        condition: hp_to_f64(&cond),
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Inconsistent,
    Consistent,
    IllConditioned,
}

/// Coefficients keyed by exponent pair, rendered as decimal strings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub i: u32,
    pub j: u32,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitVerdict {
    pub k: u32,
    pub pair_sets: [Vec<(u64, u64)>; 2],
    pub coeff_sets: [Vec<CoefficientEntry>; 2],
    pub max_abs_diff: f64,
    pub condition_estimates: [f64; 2],
    pub residuals: [f64; 2],
    pub threshold: f64,
    pub verdict: Verdict,
}

fn coefficient_entries(k: u32, sol: &Solution) -> Vec<CoefficientEntry> {
    monomials(k)
        .into_iter()
        .zip(&sol.coefficients)
        .map(|((i, j), c)| CoefficientEntry {
            i,
            j,
            value: format!("{:.6e}", hp_to_f64(c)),
        })
        .collect()
}

/// `10^6 cond u`.
pub fn threshold(condition: f64) -> f64 {
    1e6 * condition * unit_roundoff()
}

/// Compares two already-built systems of the same order.
pub fn compare_systems(a: &InterpolationSystem, b: &InterpolationSystem) -> Result<FitVerdict> {
    if a.k != b.k {
        return Err(Error::InvalidInput("systems have different moment orders".into()));
    }
    let set_a: HashSet<_> = a.pairs.iter().collect();
    if b.pairs.iter().any(|pair| set_a.contains(pair)) {
        return Err(Error::InvalidInput("pair sets are not disjoint".into()));
    }
    let sa = solve_coeffs(a)?;
    let sb = solve_coeffs(b)?;
    let max_abs_diff = sa
        .coefficients
        .iter()
        .zip(&sb.coefficients)
        .map(|(x, y)| hp_to_f64(&hp_abs(&x.sub(y, PRECISION, RM))))
        .fold(0.0, f64::max);
    let theta = threshold(sa.condition.max(sb.condition));
    let verdict = if max_abs_diff > theta {
        Verdict::Inconsistent
    } else if max_abs_diff < theta / 1e6 {
        Verdict::Consistent
    } else {
        Verdict::IllConditioned
    };
    Ok(FitVerdict {
        k: a.k,
        pair_sets: [a.pairs.clone(), b.pairs.clone()],
        coeff_sets: [coefficient_entries(a.k, &sa), coefficient_entries(b.k, &sb)],
        max_abs_diff,
        condition_estimates: [sa.condition, sb.condition],
        residuals: [sa.residual, sb.residual],
        threshold: theta,
        verdict,
    })
}

/// Builds and solves both systems and compares the coefficient vectors.
pub fn consistency_test(k: u32, set1: &[(u64, u64)], set2: &[(u64, u64)]) -> Result<FitVerdict> {
    compare_systems(&build_system(k, set1)?, &build_system(k, set2)?)
}

/// Admissible pairs `(p, ell)` with `p >= MIN_PRIME`, ordered by `p` then
/// `ell`, where `ell >= 3` runs over the odd prime divisors of `p - 1`.
pub fn admissible_pairs() -> impl Iterator<Item = (u64, u64)> {
    (MIN_PRIME..)
        .filter(|&p| is_prime(p))
        .flat_map(|p| {
            prime_divisors(p - 1)
                .into_iter()
                .filter(|&l| l >= 3)
                .map(move |l| (p, l))
        })
}

/// Incremental row-space basis used to reject numerically dependent rows.
struct RowBasis {
    vectors: Vec<Vec<BigFloat>>,
    tol: BigFloat,
}

impl RowBasis {
    fn new() -> Self {
        RowBasis {
            vectors: Vec::new(),
            tol: BigFloat::from_f64(2f64.powi(-128), PRECISION),
        }
    }

    fn dot(a: &[BigFloat], b: &[BigFloat]) -> BigFloat {
        a.iter().zip(b).fold(hp_u64(0), |acc, (x, y)| {
            acc.add(&x.mul(y, PRECISION, RM), PRECISION, RM)
        })
    }

    /// Adds the row if its component orthogonal to the basis is not
    /// negligible relative to its norm.
    fn try_add(&mut self, row: &[BigFloat]) -> bool {
        let norm = Self::dot(row, row).sqrt(PRECISION, RM);
        if norm.is_zero() {
            return false;
        }
        let mut r: Vec<BigFloat> = row.iter().map(|x| x.div(&norm, PRECISION, RM)).collect();
        for _ in 0..2 {
            for b in &self.vectors {
                let d = Self::dot(&r, b);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri = ri.sub(&d.mul(bi, PRECISION, RM), PRECISION, RM);
                }
            }
        }
        let rest = Self::dot(&r, &r).sqrt(PRECISION, RM);
        if rest.cmp(&self.tol) != Some(1) {
            return false;
        }
        self.vectors
            .push(r.iter().map(|x| x.div(&rest, PRECISION, RM)).collect());
        true
    }
}

/// Basis row of `(p, ell)` divided entrywise by the row of `(100, 10)`.
fn selection_row(k: u32, p: u64, ell: u64) -> Vec<BigFloat> {
    let (x0, y0) = (100u64, 10u64);
    let row = basis_row(k, p, ell);
    let norm = basis_row(k, x0, y0);
    row.iter()
        .zip(&norm)
        .map(|(v, s)| v.div(s, PRECISION, RM))
        .collect()
}

/// Greedy deterministic choice of `count` admissible pairs, skipping those in
/// `exclude` and those whose row is numerically dependent on rows already
/// chosen. Once `system_dimension(k)` independent rows are held, further
/// pairs are appended without the independence test.
pub fn select_pairs(k: u32, count: usize, exclude: &HashSet<(u64, u64)>) -> Result<Vec<(u64, u64)>> {
    check_k(k)?;
    let dim = system_dimension(k);
    let per_ell_cap = (k + 5) as usize;
    let mut per_ell: HashMap<u64, usize> = HashMap::new();
    let mut basis = RowBasis::new();
    let mut out = Vec::with_capacity(count);
    for (p, ell) in admissible_pairs() {
        if out.len() == count {
            break;
        }
        if exclude.contains(&(p, ell)) {
            continue;
        }
        if out.len() >= dim {
            out.push((p, ell));
            continue;
        }
        // Rows sharing ell span at most k + 5 dimensions.
        let used = per_ell.entry(ell).or_insert(0);
        if *used >= per_ell_cap {
            continue;
        }
        if basis.try_add(&selection_row(k, p, ell)) {
            *used += 1;
            out.push((p, ell));
        }
    }
    Ok(out)
}

/// Two disjoint deterministic pair sets of size `system_dimension(k)`.
pub fn default_pair_sets(k: u32) -> Result<(Vec<(u64, u64)>, Vec<(u64, u64)>)> {
    let dim = system_dimension(k);
    let first = select_pairs(k, dim, &HashSet::new())?;
    let exclude: HashSet<_> = first.iter().copied().collect();
    let second = select_pairs(k, dim, &exclude)?;
    Ok((first, second))
}

#[derive(Debug, Deserialize)]
struct PairRow {
    p: u64,
    #[serde(alias = "ℓ", alias = "l")]
    ell: u64,
}

/// Reads a CSV pair set with header `p,ell`.
pub fn read_pairs_csv(path: &Path) -> Result<Vec<(u64, u64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<PairRow>() {
        let row = row?;
        out.push((row.p, row.ell));
    }
    Ok(out)
}

/// Overdetermined least-squares fit, reported alongside the square solves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeastSquaresReport {
    pub k: u32,
    pub rows: usize,
    pub unknowns: usize,
    pub coefficients: Vec<CoefficientEntry>,
    /// `||M c - v||_2 / ||v||_2`.
    pub relative_residual: f64,
}

fn sum_squares(xs: &[BigFloat]) -> BigFloat {
    xs.iter()
        .fold(hp_u64(0), |acc, x| acc.add(&x.mul(x, PRECISION, RM), PRECISION, RM))
}

/// Applies `I - 2 w w^T / |w|^2` to `target`.
fn reflect(w: &[BigFloat], wnorm2: &BigFloat, target: &mut [BigFloat]) {
    let dot = w.iter().zip(target.iter()).fold(hp_u64(0), |acc, (wi, t)| {
        acc.add(&wi.mul(t, PRECISION, RM), PRECISION, RM)
    });
    let f = dot.mul(&hp_u64(2), PRECISION, RM).div(wnorm2, PRECISION, RM);
    for (t, wi) in target.iter_mut().zip(w) {
        *t = t.sub(&f.mul(wi, PRECISION, RM), PRECISION, RM);
    }
}

/// Householder QR least squares on any number of rows `>= unknowns`.
pub fn least_squares_fit(k: u32, pairs: &[(u64, u64)]) -> Result<LeastSquaresReport> {
    check_k(k)?;
    let unknowns = system_dimension(k);
    if pairs.len() < unknowns {
        return Err(Error::WrongCount {
            expected: unknowns,
            got: pairs.len(),
        });
    }
    let sys = build_rows(k, pairs)?;
    let m = sys.pairs.len();
    let n = unknowns;
    let scales: Vec<BigFloat> = (0..n)
        .map(|c| {
            let s = sys
                .matrix
                .iter()
                .fold(hp_u64(0), |acc, row| hp_max(acc, hp_abs(&row[c])));
            if s.is_zero() {
                hp_u64(1)
            } else {
                s
            }
        })
        .collect();
    // Column-major copy of the equilibrated matrix.
    let mut cols: Vec<Vec<BigFloat>> = (0..n)
        .map(|c| {
            sys.matrix
                .iter()
                .map(|row| row[c].div(&scales[c], PRECISION, RM))
                .collect()
        })
        .collect();
    let v: Vec<BigFloat> = sys.rhs.iter().map(hp_int).collect();
    let mut b = v.clone();
    let tiny = BigFloat::from_f64(2f64.powi(-SINGULAR_BITS), PRECISION);
    for col in 0..n {
        let norm = sum_squares(&cols[col][col..]).sqrt(PRECISION, RM);
        if norm.cmp(&tiny) != Some(1) {
            return Err(Error::SingularMatrix { column: col });
        }
        let alpha = if cols[col][col].is_negative() { norm } else { norm.neg() };
        let mut w: Vec<BigFloat> = cols[col][col..].to_vec();
        w[0] = w[0].sub(&alpha, PRECISION, RM);
        let wnorm2 = sum_squares(&w);
        for c in cols.iter_mut().skip(col) {
            reflect(&w, &wnorm2, &mut c[col..]);
        }
        reflect(&w, &wnorm2, &mut b[col..]);
    }
    let mut y = vec![hp_u64(0); n];
    for i in (0..n).rev() {
        let mut s = b[i].clone();
        for j in i + 1..n {
            s = s.sub(&cols[j][i].mul(&y[j], PRECISION, RM), PRECISION, RM);
        }
        y[i] = s.div(&cols[i][i], PRECISION, RM);
    }
    let coefficients: Vec<BigFloat> = y
        .iter()
        .zip(&scales)
        .map(|(yi, s)| yi.div(s, PRECISION, RM))
        .collect();
    let r = residual_vector(&sys.matrix, &coefficients, &v);
    let two_norm = |xs: &[BigFloat]| sum_squares(xs).sqrt(PRECISION, RM);
    let (rn, vn) = (two_norm(&r), two_norm(&v));
    let relative_residual = if vn.is_zero() {
        hp_to_f64(&rn)
    } else {
        hp_to_f64(&rn.div(&vn, PRECISION, RM))
    };
    Ok(LeastSquaresReport {
        k,
        rows: m,
        unknowns: n,
        coefficients: coefficient_entries(
            k,
            &Solution {
                coefficients,
                condition: f64::NAN,
                residual: relative_residual,
            },
        ),
        relative_residual,
    })
}

/// Exact coefficients of `q (q - 1)^2 (ell - 1)(ell - 2)` in the `k = 2`
/// basis, keyed by `(i, j)`.
pub fn second_moment_coefficients() -> Vec<((u32, u32), i64)> {
    // (q^3 - 2 q^2 + q)(ell^2 - 3 ell + 2) with q = x^{2/2}.
    let q_part = [(6u32, 1i64), (4, -2), (2, 1)];
    let l_part = [(2u32, 1i64), (1, -3), (0, 2)];
    let mut out = Vec::new();
    for &(i, a) in &q_part {
        for &(j, b) in &l_part {
            out.push(((i, j), a * b));
        }
    }
    out.sort();
    out
}

/// Largest deviation of `sol` from the exact `k = 2` coefficients.
pub fn second_moment_error(sol: &Solution) -> f64 {
    let exact: HashMap<(u32, u32), i64> = second_moment_coefficients().into_iter().collect();
    monomials(2)
        .into_iter()
        .zip(sol.coefficients_f64())
        .map(|(ij, c)| (c - *exact.get(&ij).unwrap_or(&0) as f64).abs())
        .fold(0.0, f64::max)
}

/// Pairs in `a` but not in `b`, sorted.
pub fn pair_difference(a: &[(u64, u64)], b: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let bs: BTreeSet<_> = b.iter().collect();
    let mut out: Vec<_> = a.iter().filter(|x| !bs.contains(x)).copied().collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(system_dimension(1), 6);
        assert_eq!(system_dimension(2), 21);
        assert_eq!(system_dimension(3), 40);
        assert_eq!(system_dimension(4), 63);
        assert_eq!(monomials(3).len(), 40);
    }

    #[test]
    fn conversions() {
        assert_eq!(hp_to_f64(&hp_u64(12345)), 12345.0);
        assert_eq!(hp_to_f64(&hp_int(&BigInt::from(-7))), -7.0);
        let s = hp_to_f64(&half_power(11, 3));
        assert!((s - 11f64.powf(1.5)).abs() < 1e-9);
        let big = BigInt::from(10).pow(40) + 1;
        assert!((hp_to_f64(&hp_int(&big)) - 1e40).abs() / 1e40 < 1e-15);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(matches!(
            build_system(3, &[(11, 5); 39]),
            Err(Error::WrongCount { expected: 40, got: 39 })
        ));
        let mut pairs = select_pairs(1, 6, &HashSet::new()).unwrap();
        pairs[0] = (13, 5);
        assert!(matches!(build_system(1, &pairs), Err(Error::CongruenceViolation { .. })));
    }

    #[test]
    fn expansion_table() {
        let c = second_moment_coefficients();
        assert_eq!(c.len(), 9);
        let total: i64 = c.iter().map(|&(_, v)| v).sum();
        // Evaluating at q = 1 (x = 1, ell = 1) gives 0.
        assert_eq!(total, 0);
        // At q = 11, ell = 5 the expansion gives the second moment.
        let value: f64 = c
            .iter()
            .map(|&((i, j), v)| v as f64 * 11f64.powf(i as f64 / 2.0) * 5f64.powi(j as i32))
            .sum();
        assert_eq!(value, 13200.0);
    }

    #[test]
    fn second_moment_recovered() {
        let pairs = select_pairs(2, 21, &HashSet::new()).unwrap();
        let sys = build_system(2, &pairs).unwrap();
        let sol = solve_coeffs(&sys).unwrap();
        assert!(second_moment_error(&sol) < 1e-10);
        assert!(sol.residual < RESIDUAL_LIMIT);
    }

    #[test]
    fn first_moment_gives_zero_polynomial() {
        let pairs = select_pairs(1, 6, &HashSet::new()).unwrap();
        let sol = solve_coeffs(&build_system(1, &pairs).unwrap()).unwrap();
        assert!(sol.coefficients.iter().all(|c| c.is_zero() || hp_to_f64(c).abs() < 1e-60));
    }

    #[test]
    fn repeated_row_is_singular() {
        let pairs = select_pairs(1, 6, &HashSet::new()).unwrap();
        let mut sys = build_system(1, &pairs).unwrap();
        sys.matrix[5] = sys.matrix[0].clone();
        sys.rhs[5] = sys.rhs[0].clone();
        assert!(matches!(solve_coeffs(&sys), Err(Error::SingularMatrix { .. })));
        let mut dup = pairs.clone();
        dup[5] = dup[0];
        assert!(build_system(1, &dup).is_err());
    }

    #[test]
    fn second_moment_sets_consistent_and_permutation_invariant() {
        let (a, b) = default_pair_sets(2).unwrap();
        let sa = build_system(2, &a).unwrap();
        let sb = build_system(2, &b).unwrap();
        let verdict = compare_systems(&sa, &sb).unwrap();
        assert_eq!(verdict.verdict, Verdict::Consistent);
        let perm: Vec<usize> = (0..21).rev().collect();
        let permuted = compare_systems(&sa.permuted(&perm), &sb).unwrap();
        assert_eq!(permuted.verdict, verdict.verdict);
    }

    #[test]
    fn overdetermined_second_moment_fits_exactly() {
        let pairs = select_pairs(2, 42, &HashSet::new()).unwrap();
        let report = least_squares_fit(2, &pairs).unwrap();
        assert_eq!(report.rows, 42);
        assert!(report.relative_residual < 1e-40);
    }

    #[test]
    fn selection_is_disjoint_and_admissible() {
        let (a, b) = default_pair_sets(3).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(b.len(), 40);
        assert!(pair_difference(&a, &b).len() == 40);
        for &(p, l) in a.iter().chain(&b) {
            assert!(p >= MIN_PRIME && is_prime(p) && is_prime(l) && (p - 1) % l == 0);
        }
    }
}
