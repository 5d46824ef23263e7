//! Multiplicative characters of order dividing a prime `ell`, Gauss sums and
//! Jacobi sums, evaluated in `f64` complex arithmetic.
//!
//! `chi_j(g^m) = exp(2 pi i j m / ell)` and `chi(0) = 0` for every character,
//! including the trivial one. The additive character of `F_q` is
//! `psi(a) = exp(2 pi i Tr(a) / p)` with the absolute trace.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldSpec};
use crate::ntheory::is_prime;

/// Above this field size sums use compensated accumulation.
pub const COMPENSATED_SUM_THRESHOLD: u32 = 10_000;

/// JSON form of a complex value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

/// Absolute error budget for rounding a value of the given magnitude to an integer.
pub fn integer_budget(magnitude: f64) -> f64 {
    1e-6 * magnitude + 1e-9
}

/// Rounds `z` to an integer, failing if either part is off by more than the
/// budget for `magnitude`.
pub fn round_to_integer(z: Complex64, magnitude: f64) -> Result<i64> {
    let budget = integer_budget(magnitude);
    let rounded = z.re.round();
    let distance = (z.re - rounded).abs().max(z.im.abs());
    if distance > budget {
        return Err(Error::RoundingBudgetExceeded {
            value: z.re,
            distance,
            budget,
        });
    }
    Ok(rounded as i64)
}

/// `exp(2 pi i k / m)` with `k` reduced first.
#[inline]
pub fn root_of_unity(k: u64, m: u64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * (k % m) as f64 / m as f64)
}

/// Neumaier-compensated complex accumulator.
#[derive(Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: Complex64) {
        self.sum.re = neumaier_step(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = neumaier_step(self.sum.im, x.im, &mut self.comp.im);
    }

    pub(crate) fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

#[inline]
fn neumaier_step(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Sums in the given order, compensated when `compensated` is set.
fn accumulate(values: impl Iterator<Item = Complex64>, compensated: bool) -> Complex64 {
    if compensated {
        let mut acc = CompensatedSum::default();
        values.for_each(|v| acc.add(v));
        acc.value()
    } else {
        values.sum()
    }
}

/// The character `chi_j` of order dividing `ell` on a field.
#[derive(Clone, Copy, Debug)]
pub struct Character<'f> {
    field: &'f FieldSpec,
    ell: u32,
    j: u32,
}

/// Checks that `ell` is prime and divides `q - 1`.
pub fn check_order(field: &FieldSpec, ell: u32) -> Result<()> {
    if !is_prime(ell as u64) {
        return Err(Error::NotPrime(ell as u64));
    }
    if field.order() % ell != 0 {
        return Err(Error::OrderMismatch {
            ell: ell as u64,
            q_minus_one: field.order() as u64,
        });
    }
    Ok(())
}

/// `chi_j` on `field`; `j = 0` is the trivial character.
pub fn character(field: &FieldSpec, ell: u32, j: u32) -> Result<Character<'_>> {
    check_order(field, ell)?;
    if j >= ell {
        return Err(Error::InvalidInput(format!("exponent {j} not in [0, {ell})")));
    }
    Ok(Character { field, ell, j })
}

/// All `ell` characters `chi_0, ..., chi_{ell-1}`.
pub fn characters(field: &FieldSpec, ell: u32) -> Result<Vec<Character<'_>>> {
    check_order(field, ell)?;
    Ok((0..ell).map(|j| Character { field, ell, j }).collect())
}

impl<'f> Character<'f> {
    pub fn field(&self) -> &'f FieldSpec {
        self.field
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn exponent(&self) -> u32 {
        self.j
    }

    pub fn is_trivial(&self) -> bool {
        self.j == 0
    }

    pub fn conj(&self) -> Character<'f> {
        Character {
            j: (self.ell - self.j) % self.ell,
            ..*self
        }
    }

    /// Pointwise product; both characters must share field and `ell`.
    pub fn product(&self, other: &Character<'f>) -> Result<Character<'f>> {
        self.same_family(other)?;
        Ok(Character {
            j: (self.j + other.j) % self.ell,
            ..*self
        })
    }

    fn same_family(&self, other: &Character<'_>) -> Result<()> {
        if !std::ptr::eq(self.field, other.field) && self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.ell != other.ell {
            return Err(Error::InvalidInput("characters of different order".into()));
        }
        Ok(())
    }

    /// Value at `g^m` for a discrete log `m`.
    #[inline]
    pub fn at_log(&self, m: u32) -> Complex64 {
        root_of_unity(self.j as u64 * (m % self.ell) as u64, self.ell as u64)
    }

    pub fn eval(&self, x: FieldElement) -> Complex64 {
        match self.field.dlog(x) {
            Ok(m) => self.at_log(m),
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Values at every packed element, `table[0] = 0`.
    pub fn table(&self) -> Vec<Complex64> {
        let roots: Vec<Complex64> = (0..self.ell)
            .map(|k| root_of_unity(k as u64 * self.j as u64, self.ell as u64))
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.field.q() as usize];
        for (m, x) in self.field.units_by_log().enumerate() {
            out[x.index() as usize] = roots[m % self.ell as usize];
        }
        out
    }

    /// `chi(-1)`, which is always `+1` or `-1`.
    pub fn at_minus_one(&self) -> f64 {
        self.at_log(self.field.log_neg_one()).re.round()
    }
}

/// Gauss sum `sum_a chi(a) psi(a)`, summed in ascending discrete-log order.
pub fn gauss_sum(chi: &Character<'_>) -> Complex64 {
    let field = chi.field;
    let p = field.p() as u64;
    let additive: Vec<Complex64> = (0..p).map(|t| root_of_unity(t, p)).collect();
    let ell = chi.ell as u64;
    let roots: Vec<Complex64> = (0..ell).map(|k| root_of_unity(k * chi.j as u64, ell)).collect();
    let terms = field
        .units_by_log()
        .enumerate()
        .map(|(m, x)| roots[m % ell as usize] * additive[field.trace(x) as usize]);
    accumulate(terms, field.q() > COMPENSATED_SUM_THRESHOLD)
}

/// Gauss sums of `chi_0, ..., chi_{ell-1}`, sharing one pass over the field.
pub fn gauss_sums(field: &FieldSpec, ell: u32) -> Result<Vec<Complex64>> {
    check_order(field, ell)?;
    let p = field.p() as u64;
    let additive: Vec<Complex64> = (0..p).map(|t| root_of_unity(t, p)).collect();
    let ell64 = ell as u64;
    let roots: Vec<Complex64> = (0..ell64).map(|k| root_of_unity(k, ell64)).collect();
    let compensated = field.q() > COMPENSATED_SUM_THRESHOLD;
    let mut sums = vec![CompensatedSum::default(); ell as usize];
    let mut plain = vec![Complex64::new(0.0, 0.0); ell as usize];
    for (m, x) in field.units_by_log().enumerate() {
        let psi = additive[field.trace(x) as usize];
        let r = m as u64 % ell64;
        for j in 0..ell64 {
            let term = roots[((j * r) % ell64) as usize] * psi;
            if compensated {
                sums[j as usize].add(term);
            } else {
                plain[j as usize] += term;
            }
        }
    }
    Ok(if compensated {
        sums.iter().map(|s| s.value()).collect()
    } else {
        plain
    })
}

fn check_family(chis: &[Character<'_>]) -> Result<()> {
    if chis.len() < 2 {
        return Err(Error::InvalidInput(
            "Jacobi sums need at least two characters".into(),
        ));
    }
    for c in &chis[1..] {
        chis[0].same_family(c)?;
    }
    Ok(())
}

/// `F(s) = sum over a_1 + ... + a_k = s of prod chi_i(a_i)`, for every `s`,
/// by iterated additive convolution.
fn additive_distribution(chis: &[Character<'_>]) -> Vec<Complex64> {
    let field = chis[0].field;
    let q = field.q() as usize;
    let mut dist = chis[0].table();
    for chi in &chis[1..] {
        let values = chi.table();
        let mut next = vec![Complex64::new(0.0, 0.0); q];
        for (a, &va) in values.iter().enumerate() {
            if va == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ae = field.element(a as u64).expect("in range");
            for (s, &ds) in dist.iter().enumerate() {
                let se = field.element(s as u64).expect("in range");
                next[field.add(se, ae).index() as usize] += ds * va;
            }
        }
        dist = next;
    }
    dist
}

/// Sum over tuples with `a_1 + ... + a_k = target` of `prod chi_i(a_i)`.
fn jacobi_at(chis: &[Character<'_>], target: FieldElement) -> Complex64 {
    let field = chis[0].field;
    let last = chis[chis.len() - 1];
    let head = &chis[..chis.len() - 1];
    let compensated = field.q() > COMPENSATED_SUM_THRESHOLD;
    if head.len() == 1 {
        let first = head[0];
        let terms = field.units_by_log().map(|a| {
            let rest = field.sub(target, a);
            first.eval(a) * last.eval(rest)
        });
        return accumulate(terms, compensated);
    }
    let dist = additive_distribution(head);
    let terms = field.units_by_log().map(|a| {
        let rest = field.sub(target, a);
        dist[rest.index() as usize] * last.eval(a)
    });
    accumulate(terms, compensated)
}

/// `J(chi_1, ..., chi_k)`: sum over `a_1 + ... + a_k = 1`.
pub fn jacobi_j(chis: &[Character<'_>]) -> Result<Complex64> {
    check_family(chis)?;
    Ok(jacobi_at(chis, FieldElement::ONE))
}

/// `J_0(chi_1, ..., chi_k)`: sum over `a_1 + ... + a_k = 0`.
pub fn jacobi_j0(chis: &[Character<'_>]) -> Result<Complex64> {
    check_family(chis)?;
    Ok(jacobi_at(chis, FieldElement::ZERO))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn order_mismatch_and_trivial_character() {
        let f = make_field(11, 1).unwrap();
        assert!(matches!(character(&f, 3, 1), Err(Error::OrderMismatch { .. })));
        let eps = character(&f, 5, 0).unwrap();
        for x in f.elements().skip(1) {
            assert_eq!(eps.eval(x), Complex64::new(1.0, 0.0));
        }
        assert_eq!(eps.eval(FieldElement::ZERO), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn character_values() {
        let f = make_field(11, 1).unwrap();
        let chi1 = character(&f, 5, 1).unwrap();
        assert!(close(chi1.eval(f.generator()), root_of_unity(1, 5), 1e-15));
        assert!(close(chi1.eval(f.from_int(8)), root_of_unity(3, 5), 1e-15));
        for j in 0..5 {
            let chi = character(&f, 5, j).unwrap();
            assert!(close(chi.eval(FieldElement::ONE), Complex64::new(1.0, 0.0), 1e-15));
        }
    }

    #[test]
    fn gauss_sum_of_trivial_character_is_minus_one() {
        for (p, n, ell) in [(11, 1, 5), (3, 2, 2), (2, 4, 3)] {
            let f = make_field(p, n).unwrap();
            let eps = character(&f, ell, 0).unwrap();
            assert!(close(gauss_sum(&eps), Complex64::new(-1.0, 0.0), 1e-12));
        }
    }

    #[test]
    fn quadratic_gauss_sum_over_f5_is_sqrt5() {
        let f = make_field(5, 1).unwrap();
        let chi = character(&f, 2, 1).unwrap();
        // Direct summation: sum_a (a/5) exp(2 pi i a / 5).
        let legendre = [0.0, 1.0, -1.0, -1.0, 1.0];
        let direct: Complex64 = (0..5u64)
            .map(|a| root_of_unity(a, 5) * legendre[a as usize])
            .sum();
        let g = gauss_sum(&chi);
        assert!(close(g, direct, 1e-12));
        assert!(close(g, Complex64::new(5f64.sqrt(), 0.0), 1e-12));
    }

    #[test]
    fn gauss_sum_modulus_f11() {
        let f = make_field(11, 1).unwrap();
        let chi = character(&f, 5, 1).unwrap();
        assert!((gauss_sum(&chi).norm_sqr() - 11.0).abs() < 1e-9);
    }

    #[test]
    fn jacobi_small_cases_match_direct_summation() {
        let f = make_field(11, 1).unwrap();
        let chi1 = character(&f, 5, 1).unwrap();
        let chi2 = character(&f, 5, 2).unwrap();
        // J(chi, conj chi) = -chi(-1)
        let j = jacobi_j(&[chi1, chi1.conj()]).unwrap();
        assert!(close(j, Complex64::new(-chi1.at_minus_one(), 0.0), 1e-12));
        // g(chi1) g(chi2) = J(chi1, chi2) g(chi1 chi2).
        let ratio = gauss_sum(&chi1) * gauss_sum(&chi2) / gauss_sum(&chi1.product(&chi2).unwrap());
        assert!(close(ratio, jacobi_j(&[chi1, chi2]).unwrap(), 1e-9));
        // J(eps, eps) = q - 2, J_0(eps, eps) = q - 1 with eps(0) = 0.
        let eps = character(&f, 5, 0).unwrap();
        assert!(close(jacobi_j(&[eps, eps]).unwrap(), Complex64::new(9.0, 0.0), 1e-12));
        let j0 = jacobi_j0(&[eps, eps]).unwrap();
        let brute = (1..11u64).filter(|a| (11 - a) % 11 != 0).count() as f64;
        assert!(close(j0, Complex64::new(brute, 0.0), 1e-12));
        assert!(jacobi_j(&[chi1]).is_err());
    }

    #[test]
    fn zero_sum_jacobi_reduces_to_shorter_sum() {
        let f = make_field(11, 1).unwrap();
        let chi1 = character(&f, 5, 1).unwrap();
        let chi2 = character(&f, 5, 2).unwrap();
        let chi3 = chi1.product(&chi2).unwrap().conj();
        let lhs = jacobi_j0(&[chi1, chi2, chi3]).unwrap();
        let rhs = jacobi_j(&[chi1, chi2]).unwrap() * chi3.at_minus_one() * 10.0;
        assert!(close(lhs, rhs, 1e-9));
    }

    #[test]
    fn three_fold_jacobi_matches_literal_double_loop() {
        let f = make_field(13, 1).unwrap();
        let chis = [
            character(&f, 3, 1).unwrap(),
            character(&f, 3, 1).unwrap(),
            character(&f, 3, 2).unwrap(),
        ];
        let mut literal = Complex64::new(0.0, 0.0);
        for a in f.elements() {
            for b in f.elements() {
                let c = f.sub(f.sub(FieldElement::ONE, a), b);
                literal += chis[0].eval(a) * chis[1].eval(b) * chis[2].eval(c);
            }
        }
        assert!(close(jacobi_j(&chis).unwrap(), literal, 1e-9));
    }

    #[test]
    fn field_mismatch_detected() {
        let f = make_field(11, 1).unwrap();
        let g = make_field(31, 1).unwrap();
        let a = character(&f, 5, 1).unwrap();
        let b = character(&g, 5, 1).unwrap();
        assert_eq!(jacobi_j(&[a, b]), Err(Error::FieldMismatch));
        assert_eq!(jacobi_j0(&[a, b]), Err(Error::FieldMismatch));
    }

    #[test]
    fn conjugate_indexing_consistent() {
        let f = make_field(31, 1).unwrap();
        for j in 1..5 {
            let chi = character(&f, 5, j).unwrap();
            let via_conj_index = gauss_sum(&chi.conj());
            let via_conj_values: Complex64 = f
                .elements()
                .map(|x| chi.eval(x).conj() * root_of_unity(f.trace(x) as u64, 31))
                .sum();
            assert!(close(via_conj_index, via_conj_values, 1e-9));
        }
    }

    #[test]
    fn batch_gauss_sums_match_single() {
        let f = make_field(2, 6).unwrap();
        let all = gauss_sums(&f, 7).unwrap();
        for (j, g) in all.iter().enumerate() {
            let chi = character(&f, 7, j as u32).unwrap();
            assert!(close(*g, gauss_sum(&chi), 1e-9));
        }
    }

    #[test]
    fn rounding_budget() {
        assert_eq!(round_to_integer(Complex64::new(-12.0000001, 1e-8), 100.0), Ok(-12));
        assert!(matches!(
            round_to_integer(Complex64::new(3.4, 0.0), 10.0),
            Err(Error::RoundingBudgetExceeded { .. })
        ));
    }
}
