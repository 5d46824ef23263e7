//! Moments `sum_{A,B in F_q^x} a(A, B)^k` of the diagonal family, their
//! closed forms for `k <= 2`, the general upper bound, the character-tuple
//! count `S(m)` behind it, and fibre-product point counts.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::charsum::check_order;
use crate::curve::{count_brute_with, power_table, ClassTable, CurveId};
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    Brute,
    Closed,
    Geometric,
}

pub(crate) fn ser_bigint<S: Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRecord {
    pub q: u64,
    pub ell: u32,
    pub k: u32,
    #[serde(serialize_with = "ser_bigint")]
    pub value: BigInt,
    pub method: MomentMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FibreCount {
    pub q: u64,
    pub ell: u32,
    pub k: u32,
    pub smooth_only: bool,
    #[serde(serialize_with = "ser_bigint")]
    pub count: BigInt,
}

/// Moments `k = 1..=k_max` from a class table: every class pair stands for
/// `((q - 1) / ell)^2` coefficient pairs.
pub fn moments_from_table(table: &ClassTable, k_max: u32) -> Vec<BigInt> {
    let weight = BigInt::from(table.class_weight());
    let mut sums = vec![BigInt::zero(); k_max as usize];
    for (alpha, beta, _) in table.iter() {
        let a = BigInt::from(table.a(alpha, beta));
        let mut power = BigInt::one();
        for s in sums.iter_mut() {
            power *= &a;
            *s += &power;
        }
    }
    sums.into_iter().map(|s| s * &weight).collect()
}

/// Exact `k`-th moment by counting points on every curve class.
pub fn moment_brute(field: &FieldSpec, ell: u32, k: u32) -> Result<MomentRecord> {
    if k == 0 {
        return Err(Error::InvalidInput("moment order must be >= 1".into()));
    }
    let table = ClassTable::cyclotomic(field, ell)?;
    let value = moments_from_table(&table, k).pop().expect("k >= 1");
    Ok(MomentRecord {
        q: field.q() as u64,
        ell,
        k,
        value,
        method: MomentMethod::Brute,
    })
}

/// `q (q - 1)^2 (ell - 1)(ell - 2)`.
pub fn second_moment_formula(q: u64, ell: u64) -> BigInt {
    let q = BigInt::from(q);
    let l = BigInt::from(ell);
    let one = BigInt::one();
    &q * (&q - &one) * (&q - &one) * (&l - &one) * (&l - BigInt::from(2))
}

/// Closed forms for `k = 1, 2`.
pub fn moment_closed(q: u64, ell: u32, k: u32) -> Result<MomentRecord> {
    let value = match k {
        1 => BigInt::zero(),
        2 => second_moment_formula(q, ell as u64),
        _ => {
            return Err(Error::Unsupported(format!(
                "no polynomial closed form for moment k = {k}"
            )))
        }
    };
    Ok(MomentRecord {
        q,
        ell,
        k,
        value,
        method: MomentMethod::Closed,
    })
}

/// Fractional bits used for the upper rational bound on `sqrt(q)`.
const SQRT_BITS: usize = 96;

/// Smallest `n / 2^SQRT_BITS >= sqrt(q)`; exact when `q` is a perfect square.
fn sqrt_upper(q: u64) -> BigRational {
    let scale = BigUint::one() << SQRT_BITS;
    let scaled = BigUint::from(q) * &scale * &scale;
    let mut root = scaled.sqrt();
    if &root * &root != scaled {
        root += 1u32;
    }
    BigRational::new(BigInt::from(root), BigInt::from(scale))
}

/// `q^{k/2} (q-1)^2 (ell-1)(ell-2)^{k-1} ((ell-1)^{k-1} - (-1)^{k-1}) / ell`,
/// exact for even `k` and rounded up for odd `k`.
pub fn moment_bound(q: u64, ell: u32, k: u32) -> Result<BigRational> {
    if k == 0 {
        return Err(Error::InvalidInput("moment order must be >= 1".into()));
    }
    let l = BigInt::from(ell);
    let one = BigInt::one();
    let qb = BigInt::from(q);
    let sign = if (k - 1) % 2 == 0 { one.clone() } else { -one.clone() };
    let tuple_factor = (num_traits::pow(&l - &one, (k - 1) as usize) - sign) / &l;
    let integral = (&qb - &one).pow(2u32)
        * (&l - &one)
        * num_traits::pow(&l - BigInt::from(2), (k - 1) as usize)
        * tuple_factor
        * num_traits::pow(qb.clone(), (k / 2) as usize);
    let mut bound = BigRational::from_integer(integral);
    if k % 2 == 1 {
        bound *= sqrt_upper(q);
    }
    Ok(bound)
}

/// `|value| / bound` as a float; `0` when the value is zero.
pub fn bound_ratio(value: &BigInt, bound: &BigRational) -> f64 {
    if value.is_zero() {
        return 0.0;
    }
    if bound.is_zero() {
        return f64::INFINITY;
    }
    (BigRational::from_integer(value.abs()) / bound)
        .to_f64()
        .unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TupleCountMethod {
    Enumerate,
    Closed,
    Recurrence,
}

/// Cap on `(ell - 1)^m` for [`TupleCountMethod::Enumerate`].
pub const ENUMERATION_LIMIT: u128 = 1_000_000_000;

/// `S(m)`: the number of `m`-tuples of nontrivial characters of order `ell`
/// whose product is nontrivial.
pub fn count_char_tuples(ell: u32, m: u32, method: TupleCountMethod) -> Result<BigInt> {
    if m == 0 {
        return Err(Error::InvalidInput("tuple length must be >= 1".into()));
    }
    if !crate::ntheory::is_prime(ell as u64) {
        return Err(Error::NotPrime(ell as u64));
    }
    let l = BigInt::from(ell);
    let one = BigInt::one();
    Ok(match method {
        TupleCountMethod::Closed => {
            // (-1)^m (ell - 1) ((1 - ell)^m - 1) / ell
            let s = (&l - &one) * (num_traits::pow(&one - &l, m as usize) - &one) / &l;
            if m % 2 == 0 {
                s
            } else {
                -s
            }
        }
        TupleCountMethod::Recurrence => {
            // S(0) = 0, S(1) = ell - 1, S(m) = (ell - 1) S(m - 2) + (ell - 2) S(m - 1).
            let mut prev = BigInt::zero();
            let mut cur = &l - &one;
            for _ in 1..m {
                let next = (&l - &one) * &prev + (&l - BigInt::from(2)) * &cur;
                prev = cur;
                cur = next;
            }
            cur
        }
        TupleCountMethod::Enumerate => BigInt::from(enumerate_tuples(ell, m)?),
    })
}

/// Walks every tuple of exponents in `[1, ell)` with an odometer over the
/// first `m - 1` coordinates and an inner loop over the last one.
fn enumerate_tuples(ell: u32, m: u32) -> Result<u64> {
    let size = (ell as u128 - 1).checked_pow(m).unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    if ell == 2 {
        return Ok(if m % 2 == 1 { 1 } else { 0 });
    }
    let l = ell as u64;
    let prefix_len = (m - 1) as usize;
    let mut digits = vec![1u64; prefix_len];
    let mut prefix_sum = prefix_len as u64 % l;
    let mut count = 0u64;
    loop {
        let forbidden = (l - prefix_sum) % l;
        for last in 1..l {
            count += (last != forbidden) as u64;
        }
        // Advance the odometer.
        let mut i = 0;
        loop {
            if i == prefix_len {
                return Ok(count);
            }
            if digits[i] + 1 < l {
                digits[i] += 1;
                prefix_sum = (prefix_sum + 1) % l;
                break;
            }
            prefix_sum = (prefix_sum + l - (digits[i] - 1) % l) % l;
            digits[i] = 1;
            i += 1;
        }
    }
}

/// `sum over [A:B:C] in P^2 of N(A, B, C)^k`, restricted to `ABC != 0` when
/// `smooth_only`. Every curve is counted by enumeration. Smooth
/// representatives are taken with `C = -1`, so the smooth part runs over the
/// affine pairs `(A, B) in (F_q^x)^2`.
pub fn fibre_count(field: &FieldSpec, ell: u32, k: u32, smooth_only: bool) -> Result<FibreCount> {
    check_order(field, ell)?;
    let powers = power_table(field, ell);
    let minus_one = field.neg(FieldElement::ONE);
    let mut total = BigInt::zero();
    let mut add = |a, b, c| -> Result<()> {
        let id = CurveId::with_c(field, ell, a, b, c)?;
        let n = count_brute_with(&id, &powers)?.n;
        total += num_traits::pow(BigInt::from(n), k as usize);
        Ok(())
    };
    for a in field.elements().skip(1) {
        for b in field.elements().skip(1) {
            add(a, b, minus_one)?;
        }
    }
    if !smooth_only {
        let one = FieldElement::ONE;
        let zero = FieldElement::ZERO;
        // [A:B:1] with AB = 0, [A:1:0], [1:0:0].
        for a in field.elements() {
            for b in field.elements() {
                if a.is_zero() || b.is_zero() {
                    add(a, b, one)?;
                }
            }
            add(a, one, zero)?;
        }
        add(one, zero, zero)?;
    }
    Ok(FibreCount {
        q: field.q() as u64,
        ell,
        k,
        smooth_only,
        count: total,
    })
}

/// `#V_0(1)` counted from the point side: for each `[x:y:z]` in `P^2`, the
/// number of `(A, B) in (F_q^x)^2` with `A x^ell + B y^ell = z^ell`.
pub fn smooth_fibre_points_k1(field: &FieldSpec, ell: u32) -> Result<BigInt> {
    check_order(field, ell)?;
    let l = ell as u64;
    let one = FieldElement::ONE;
    let zero = FieldElement::ZERO;
    let mut points = Vec::new();
    for x in field.elements() {
        for y in field.elements() {
            points.push((x, y, one));
        }
        points.push((x, one, zero));
    }
    points.push((one, zero, zero));
    let mut total = 0u64;
    for (x, y, z) in points {
        let (xl, yl, zl) = (field.pow(x, l), field.pow(y, l), field.pow(z, l));
        for a in field.elements().skip(1) {
            // B y^ell = z^ell - A x^ell
            let rhs = field.sub(zl, field.mul(a, xl));
            total += if yl.is_zero() {
                if rhs.is_zero() {
                    field.order() as u64
                } else {
                    0
                }
            } else {
                (!rhs.is_zero()) as u64
            };
        }
    }
    Ok(BigInt::from(total))
}

/// `k`-th moment recovered from the smooth fibre counts `#V_0(j)`, `j <= k`,
/// by inverting the binomial relation between `N^j` and `a^j`.
pub fn moment_geometric(field: &FieldSpec, ell: u32, k: u32) -> Result<MomentRecord> {
    if k == 0 {
        return Err(Error::InvalidInput("moment order must be >= 1".into()));
    }
    let q = field.q() as u64;
    let shift = -BigInt::from(q + 1);
    let mut value = BigInt::zero();
    let mut binom = BigInt::one();
    for j in 0..=k {
        let v_j = if j == 0 {
            BigInt::from((q - 1) * (q - 1))
        } else {
            fibre_count(field, ell, j, true)?.count
        };
        value += &binom * num_traits::pow(shift.clone(), (k - j) as usize) * v_j;
        binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
    }
    Ok(MomentRecord {
        q,
        ell,
        k,
        value,
        method: MomentMethod::Geometric,
    })
}

/// The three pieces of `#V_0(2)` by where the two points sit: both at
/// infinity (`z_1 = z_2 = 0`), one affine and one at infinity (counted once
/// per ordering), and both affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SecondMomentCases {
    pub both_infinite: u64,
    pub affine_infinite: u64,
    pub both_affine: u64,
}

impl SecondMomentCases {
    /// `both_infinite + 2 affine_infinite + both_affine`.
    pub fn total(&self) -> u64 {
        self.both_infinite + 2 * self.affine_infinite + self.both_affine
    }
}

/// Splits `sum N(A, B)^2` by point location, with every curve enumerated.
pub fn second_moment_cases(field: &FieldSpec, ell: u32) -> Result<SecondMomentCases> {
    check_order(field, ell)?;
    let powers = power_table(field, ell);
    let mut cases = SecondMomentCases {
        both_infinite: 0,
        affine_infinite: 0,
        both_affine: 0,
    };
    for a in field.elements().skip(1) {
        for b in field.elements().skip(1) {
            let id = CurveId::new(field, ell, a, b)?;
            let total = count_brute_with(&id, &powers)?.n;
            let minus_b = field.neg(b);
            let at_infinity = powers
                .iter()
                .filter(|&&xl| field.mul(a, xl) == minus_b)
                .count() as u64;
            let affine = total - at_infinity;
            cases.both_infinite += at_infinity * at_infinity;
            cases.affine_infinite += affine * at_infinity;
            cases.both_affine += affine * affine;
        }
    }
    Ok(cases)
}

/// `sum_j C(k, j) (q + 1)^{k - j} m_j` with `m_0 = (q - 1)^2`: the `k`-th
/// moment of `N` from the moments of `a`.
pub fn n_moment_from_a_moments(q: u64, k: u32, a_moments: &[BigInt]) -> BigInt {
    let shift = BigInt::from(q + 1);
    let mut total = BigInt::zero();
    let mut binom = BigInt::one();
    for j in 0..=k {
        let m_j = if j == 0 {
            BigInt::from((q - 1) * (q - 1))
        } else {
            a_moments[(j - 1) as usize].clone()
        };
        total += &binom * num_traits::pow(shift.clone(), (k - j) as usize) * m_j;
        binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_field, make_field_q};

    #[test]
    fn low_moment_values_f11() {
        let f = make_field(11, 1).unwrap();
        assert_eq!(moment_brute(&f, 5, 1).unwrap().value, BigInt::zero());
        assert_eq!(moment_brute(&f, 5, 2).unwrap().value, BigInt::from(13200));
        assert_eq!(moment_closed(11, 5, 2).unwrap().value, BigInt::from(13200));
        assert_eq!(moment_closed(29, 7, 2).unwrap().value, BigInt::from(682_080));
        assert_eq!(moment_closed(97, 3, 1).unwrap().value, BigInt::zero());
        assert!(matches!(moment_closed(11, 5, 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn conic_moments_vanish() {
        let f = make_field(11, 1).unwrap();
        for k in 1..=6 {
            assert!(moment_brute(&f, 2, k).unwrap().value.is_zero());
        }
    }

    #[test]
    fn order_mismatch() {
        let f = make_field(11, 1).unwrap();
        assert!(matches!(moment_brute(&f, 3, 2), Err(Error::OrderMismatch { .. })));
        assert!(matches!(fibre_count(&f, 3, 1, true), Err(Error::OrderMismatch { .. })));
    }

    #[test]
    fn bound_small_cases() {
        // k = 2 coincides with the second moment.
        assert_eq!(
            moment_bound(11, 5, 2).unwrap(),
            BigRational::from_integer(second_moment_formula(11, 5))
        );
        // k = 1 degenerates to zero.
        assert!(moment_bound(11, 5, 1).unwrap().is_zero());
        // k = 3: 11^{3/2} * 100 * 4 * 9 * 17 / 5 ... the tuple factor is (16 - 1)/5 = 3.
        let b = moment_bound(11, 5, 3).unwrap().to_f64().unwrap();
        let expected = 11f64.powf(1.5) * 100.0 * 4.0 * 9.0 * 3.0;
        assert!((b - expected).abs() / expected < 1e-12);
        let third = moment_brute(&make_field(11, 1).unwrap(), 5, 3).unwrap().value;
        assert!(BigRational::from_integer(third.abs()) <= moment_bound(11, 5, 3).unwrap());
    }

    #[test]
    fn sqrt_upper_is_tight_and_above() {
        for q in [2u64, 11, 49, 121, 5233] {
            let r = sqrt_upper(q);
            assert!(&r * &r >= BigRational::from_integer(BigInt::from(q)));
            assert!((r.to_f64().unwrap() - (q as f64).sqrt()).abs() < 1e-12);
        }
        assert_eq!(sqrt_upper(49), BigRational::from_integer(BigInt::from(7)));
    }

    #[test]
    fn tuple_counts_small() {
        for ell in [2u32, 3, 5, 7, 13] {
            let l = ell as i64;
            let s1 = count_char_tuples(ell, 1, TupleCountMethod::Closed).unwrap();
            let s2 = count_char_tuples(ell, 2, TupleCountMethod::Closed).unwrap();
            assert_eq!(s1, BigInt::from(l - 1));
            assert_eq!(s2, BigInt::from((l - 1) * (l - 2)));
        }
        // Direct nested loops for ell = 5, m = 3.
        let mut direct = 0;
        for a in 1..5 {
            for b in 1..5 {
                for c in 1..5 {
                    if (a + b + c) % 5 != 0 {
                        direct += 1;
                    }
                }
            }
        }
        for method in [TupleCountMethod::Closed, TupleCountMethod::Recurrence, TupleCountMethod::Enumerate] {
            assert_eq!(count_char_tuples(5, 3, method).unwrap(), BigInt::from(direct));
        }
        assert!(matches!(
            count_char_tuples(23, 8, TupleCountMethod::Enumerate),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn fibre_first_moment() {
        for (q, ell) in [(11u64, 5u32), (13, 3), (16, 5), (11, 2)] {
            let f = make_field_q(q).unwrap();
            let expected = BigInt::from((q - 1) * (q - 1) * (q + 1));
            assert_eq!(fibre_count(&f, ell, 1, true).unwrap().count, expected);
            assert_eq!(smooth_fibre_points_k1(&f, ell).unwrap(), expected);
        }
    }

    #[test]
    fn full_fibre_first_moment_counts_incidences() {
        // Every [x:y:z] lies on exactly q + 1 curves [A:B:C] (a line in the dual plane).
        let f = make_field(7, 1).unwrap();
        let q = 7u64;
        let total = fibre_count(&f, 3, 1, false).unwrap().count;
        assert_eq!(total, BigInt::from((q * q + q + 1) * (q + 1)));
    }

    #[test]
    fn second_moment_split_at_11_5() {
        let f = make_field(11, 1).unwrap();
        let (q, l) = (11u64, 5u64);
        let cases = second_moment_cases(&f, 5).unwrap();
        assert_eq!(cases.both_infinite, (q - 1).pow(2) * l);
        assert_eq!(cases.affine_infinite, (q - 1).pow(2) * (q - l + 1));
        // Remaining piece, derived from the total.
        assert_eq!(cases.both_affine, (q - 1).pow(2) * (q * q + 2 * q - 1 + q * l * l - 3 * q * l + l));
        let v2 = fibre_count(&f, 5, 2, true).unwrap().count;
        assert_eq!(BigInt::from(cases.total()), v2);
    }

    #[test]
    fn geometric_route_matches() {
        let f = make_field(11, 1).unwrap();
        for k in 1..=4 {
            assert_eq!(
                moment_geometric(&f, 5, k).unwrap().value,
                moment_brute(&f, 5, k).unwrap().value
            );
        }
    }

    #[test]
    fn binomial_bridge_small() {
        let f = make_field(13, 1).unwrap();
        let a_moments: Vec<BigInt> = (1..=3).map(|k| moment_brute(&f, 3, k).unwrap().value).collect();
        for k in 1..=3 {
            assert_eq!(
                n_moment_from_a_moments(13, k, &a_moments),
                fibre_count(&f, 3, k, true).unwrap().count
            );
        }
    }
}
