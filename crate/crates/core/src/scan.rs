//! Pointless diagonal curves: per-field census of the pointless set,
//! constructive search, and the largest prime power `Q(ell)` admitting a
//! pointless curve.

use rayon::prelude::*;
use serde::Serialize;

use crate::charsum::check_order;
use crate::curve::{power_table, ClassTable};
use crate::error::{Error, Result};
use crate::field::{make_field, FieldElement, FieldSpec};
use crate::ntheory::{is_prime, primes_up_to};

/// Pointless census for one `(q, ell)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub q: u64,
    pub p: u64,
    pub n: u32,
    pub ell: u32,
    /// `true` for proper extension fields (`n > 1`).
    pub extension: bool,
    /// Class pairs `(dlog A mod ell, dlog B mod ell)` with `N = 0`.
    pub pointless_classes: Vec<(u32, u32)>,
    #[serde(rename = "E_size")]
    pub e_size: u64,
    /// Canonical text of one pointless `(A, B)`.
    pub witness: Option<(String, String)>,
}

impl ScanReport {
    pub fn is_empty(&self) -> bool {
        self.e_size == 0
    }

    /// `E_size (q + 1)^2 <= q (q - 1)^2 (ell - 1)(ell - 2)`.
    pub fn second_moment_inequality_holds(&self) -> bool {
        let q = self.q as u128;
        let l = self.ell as u128;
        let rhs = if l < 2 { 0 } else { q * (q - 1) * (q - 1) * (l - 1) * (l - 2) };
        (self.e_size as u128) * (q + 1) * (q + 1) <= rhs
    }
}

/// Exact census of `{(A, B) in (F_q^x)^2 : N(A, B) = 0}` via class counts.
pub fn pointless_pairs(field: &FieldSpec, ell: u32) -> Result<ScanReport> {
    let table = ClassTable::cyclotomic(field, ell)?;
    Ok(report_from_table(field, &table))
}

pub fn report_from_table(field: &FieldSpec, table: &ClassTable) -> ScanReport {
    let pointless_classes: Vec<(u32, u32)> = table
        .iter()
        .filter(|&(_, _, n)| n == 0)
        .map(|(alpha, beta, _)| (alpha, beta))
        .collect();
    let witness = pointless_classes.first().map(|&(alpha, beta)| {
        (
            field.format(field.gen_pow(alpha as u64)),
            field.format(field.gen_pow(beta as u64)),
        )
    });
    ScanReport {
        q: field.q() as u64,
        p: field.p() as u64,
        n: field.n(),
        ell: table.ell(),
        extension: field.n() > 1,
        e_size: pointless_classes.len() as u64 * table.class_weight(),
        pointless_classes,
        witness,
    }
}

/// Whether a pointless class pair avoids the forced conditions: none of
/// `A`, `B`, `-A/B` is an `ell`-th power.
pub fn pointless_class_is_admissible(field: &FieldSpec, ell: u32, alpha: u32, beta: u32) -> bool {
    let h = field.log_neg_one() % ell;
    alpha % ell != 0 && beta % ell != 0 && (h + alpha + ell - beta % ell) % ell != 0
}

fn check_ell(ell: u32) -> Result<()> {
    if !is_prime(ell as u64) {
        return Err(Error::NotPrime(ell as u64));
    }
    if ell == 2 {
        return Err(Error::Unsupported(
            "ell = 2: smooth conics always have rational points".into(),
        ));
    }
    Ok(())
}

/// Largest `q` with `q + 1 <= (ell - 1)(ell - 2) sqrt(q)`, i.e.
/// `(q + 1)^2 <= m^2 q` for `m = (ell - 1)(ell - 2)`.
pub fn hasse_weil_ceiling(ell: u32) -> Result<u64> {
    check_ell(ell)?;
    let m = (ell as u128 - 1) * (ell as u128 - 2);
    let fits = |q: u128| (q + 1) * (q + 1) <= m * m * q;
    let m2 = (m * m) as f64;
    let mut q = (((m2 - 2.0) + ((m2 - 2.0).powi(2) - 4.0).max(0.0).sqrt()) / 2.0).floor() as u128;
    q = q.max(1);
    while !fits(q) {
        q -= 1;
    }
    while fits(q + 1) {
        q += 1;
    }
    Ok(q as u64)
}

/// All `(p, n)` with `q = p^n <= limit` and `q = 1 mod ell`, ascending in `q`.
pub fn prime_powers(ell: u32, limit: u64) -> Result<Vec<(u64, u32)>> {
    if !is_prime(ell as u64) {
        return Err(Error::NotPrime(ell as u64));
    }
    if limit < ell as u64 + 1 {
        return Err(Error::InvalidInput(format!(
            "limit {limit} is below ell + 1 = {}",
            ell as u64 + 1
        )));
    }
    let mut out = Vec::new();
    for p in primes_up_to(limit) {
        let mut q = p;
        let mut n = 1;
        loop {
            if q % ell as u64 == 1 {
                out.push((q, p, n));
            }
            match q.checked_mul(p) {
                Some(next) if next <= limit => {
                    q = next;
                    n += 1;
                }
                _ => break,
            }
        }
    }
    out.sort_unstable();
    Ok(out.into_iter().map(|(_, p, n)| (p, n)).collect())
}

/// Result of scanning every admissible prime power up to the ceiling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QReport {
    pub ell: u32,
    pub bound: u64,
    pub checked: Vec<u64>,
    pub q_max: Option<u64>,
    pub rows: Vec<ScanReport>,
}

impl QReport {
    /// Rows with `q <= c ell^2` and `q >= floor` whose pointless set is empty.
    pub fn regime_violations(&self, c: f64, floor: u64) -> Vec<u64> {
        let cap = c * (self.ell as f64).powi(2);
        self.rows
            .iter()
            .filter(|r| r.q >= floor && (r.q as f64) <= cap && r.is_empty())
            .map(|r| r.q)
            .collect()
    }
}

/// Scans every `q = 1 mod ell` up to the ceiling, with `workers` threads
/// (`0` for the global pool). Rows are ordered by `q`.
pub fn q_max(ell: u32, workers: usize) -> Result<QReport> {
    let bound = hasse_weil_ceiling(ell)?;
    let candidates = if bound < ell as u64 + 1 {
        Vec::new()
    } else {
        prime_powers(ell, bound)?
    };
    let scan_one = |&(p, n): &(u64, u32)| -> Result<ScanReport> {
        let field = make_field(p, n)?;
        pointless_pairs(&field, ell)
    };
    let rows: Result<Vec<ScanReport>> = if workers == 1 {
        candidates.iter().map(scan_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        pool.install(|| candidates.par_iter().map(scan_one).collect())
    };
    let mut rows = rows?;
    rows.sort_by_key(|r| r.q);
    Ok(QReport {
        ell,
        bound,
        checked: rows.iter().map(|r| r.q).collect(),
        q_max: rows.iter().rev().find(|r| !r.is_empty()).map(|r| r.q),
        rows,
    })
}

/// Constructive search: for each non-`ell`-th-power class of `B`, builds the
/// value set `{z^ell - B y^ell}` in a presence table and returns the first
/// `A` outside it.
pub fn find_pointless(field: &FieldSpec, ell: u32) -> Result<Option<(FieldElement, FieldElement)>> {
    check_order(field, ell)?;
    let q = field.q() as usize;
    let mut powers = power_table(field, ell);
    powers.sort_unstable();
    powers.dedup();
    let mut seen = vec![false; q];
    for beta in 1..ell {
        let b = field.gen_pow(beta as u64);
        seen.iter_mut().for_each(|s| *s = false);
        for &v in &powers {
            let bv = field.mul(b, v);
            for &u in &powers {
                seen[field.sub(u, bv).index() as usize] = true;
            }
        }
        if let Some(a) = field.elements().skip(1).find(|a| !seen[a.index() as usize]) {
            return Ok(Some((a, b)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{count_brute, coset_class, CurveId};
    use crate::field::make_field_q;

    #[test]
    fn ceilings() {
        assert_eq!(hasse_weil_ceiling(5).unwrap(), 141);
        let c7 = hasse_weil_ceiling(7).unwrap();
        let root = 15.0 + 224f64.sqrt();
        assert_eq!(c7, (root * root).floor() as u64);
        assert!(hasse_weil_ceiling(13).unwrap() >= 547);
        assert_eq!(hasse_weil_ceiling(3).unwrap(), 1);
        assert!(matches!(hasse_weil_ceiling(2), Err(Error::Unsupported(_))));
        assert!(matches!(hasse_weil_ceiling(9), Err(Error::NotPrime(9))));
    }

    #[test]
    fn prime_power_lists() {
        let qs: Vec<u64> = prime_powers(5, 141)
            .unwrap()
            .into_iter()
            .map(|(p, n)| p.pow(n))
            .collect();
        // Literal filter over all integers.
        let expected: Vec<u64> = (2..=141u64)
            .filter(|&q| q % 5 == 1 && crate::ntheory::prime_power(q).is_some())
            .collect();
        assert_eq!(qs, expected);
        for q in [11, 31, 41, 61, 71, 81, 101, 121, 131] {
            assert!(qs.contains(&q));
        }
        let sevens = prime_powers(7, 50).unwrap();
        for pn in [(2, 3), (29, 1), (43, 1)] {
            assert!(sevens.contains(&pn));
        }
        assert!(prime_powers(7, 7).is_err());
    }

    #[test]
    fn census_f11() {
        let f = make_field_q(11).unwrap();
        let report = pointless_pairs(&f, 5).unwrap();
        assert!(!report.is_empty());
        let nine = f.from_int(9);
        let four = f.from_int(4);
        let class = (coset_class(&f, 5, nine).unwrap(), coset_class(&f, 5, four).unwrap());
        assert!(report.pointless_classes.contains(&class));
        assert_eq!(report.e_size % 4, 0);
        assert!(report.second_moment_inequality_holds());
        for &(a, b) in &report.pointless_classes {
            assert!(pointless_class_is_admissible(&f, 5, a, b));
        }
        let (wa, wb) = report.witness.clone().unwrap();
        let id = CurveId::new(&f, 5, f.parse(&wa).unwrap(), f.parse(&wb).unwrap()).unwrap();
        assert_eq!(count_brute(&id).unwrap().n, 0);
    }

    #[test]
    fn conics_never_pointless() {
        let f = make_field_q(11).unwrap();
        assert!(pointless_pairs(&f, 2).unwrap().is_empty());
        assert_eq!(find_pointless(&f, 2).unwrap(), None);
    }

    #[test]
    fn e_size_matches_pair_enumeration() {
        for (q, ell) in [(11u64, 5u32), (31, 5), (29, 7), (16, 5)] {
            let f = make_field_q(q).unwrap();
            let report = pointless_pairs(&f, ell).unwrap();
            let mut direct = 0u64;
            for a in f.elements().skip(1) {
                for b in f.elements().skip(1) {
                    if count_brute(&CurveId::new(&f, ell, a, b).unwrap()).unwrap().n == 0 {
                        direct += 1;
                    }
                }
            }
            assert_eq!(report.e_size, direct, "q = {q}, ell = {ell}");
        }
    }

    #[test]
    fn construction_agrees_with_census() {
        for (q, ell) in [(11u64, 5u32), (31, 5), (41, 5), (71, 7), (43, 7), (16, 5), (13, 3)] {
            let f = make_field_q(q).unwrap();
            let report = pointless_pairs(&f, ell).unwrap();
            match find_pointless(&f, ell).unwrap() {
                Some((a, b)) => {
                    assert!(!report.is_empty());
                    let id = CurveId::new(&f, ell, a, b).unwrap();
                    assert_eq!(count_brute(&id).unwrap().n, 0);
                }
                None => assert!(report.is_empty(), "q = {q}, ell = {ell}"),
            }
        }
    }

    #[test]
    fn beyond_ceiling_nothing_found() {
        // 151 > 141 and 151 = 1 mod 5.
        let f = make_field_q(151).unwrap();
        assert_eq!(find_pointless(&f, 5).unwrap(), None);
        assert!(pointless_pairs(&f, 5).unwrap().is_empty());
    }

    #[test]
    fn q_max_five() {
        let report = q_max(5, 1).unwrap();
        assert_eq!(report.q_max, Some(11));
        assert_eq!(report.bound, 141);
        assert!(report.checked.contains(&81));
        assert!(report.rows.iter().all(|r| r.second_moment_inequality_holds()));
        let parallel = q_max(5, 2).unwrap();
        assert_eq!(parallel, report);
    }
}
