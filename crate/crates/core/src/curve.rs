//! Point counts of diagonal curves `A x^ell + B y^ell + C z^ell = 0`.
//!
//! Three routes are provided:
//! * [`count_brute`]: direct enumeration of projective points, the oracle;
//! * [`a_charsum`]: the Gauss-sum expansion of `a = N - (q + 1)`;
//! * [`ClassTable::cyclotomic`]: exact counts for all `ell^2` coset classes of
//!   `(A, B)` at once from the cyclotomic numbers of the field.
//!
//! The count for `C = -1` depends on `A` and `B` only through their classes in
//! `F_q^x / (F_q^x)^ell`.

use num_complex::Complex64;
use serde::Serialize;

use crate::charsum::{check_order, gauss_sums, root_of_unity, round_to_integer, ComplexValue};
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Brute,
    Charsum,
    Cyclotomic,
}

/// A diagonal curve over a concrete field.
#[derive(Debug, Clone, Copy)]
pub struct CurveId<'f> {
    pub field: &'f FieldSpec,
    pub ell: u32,
    pub a: FieldElement,
    pub b: FieldElement,
    pub c: FieldElement,
}

impl<'f> CurveId<'f> {
    /// `A x^ell + B y^ell = z^ell`.
    pub fn new(field: &'f FieldSpec, ell: u32, a: FieldElement, b: FieldElement) -> Result<Self> {
        let c = field.neg(FieldElement::ONE);
        Self::with_c(field, ell, a, b, c)
    }

    pub fn with_c(
        field: &'f FieldSpec,
        ell: u32,
        a: FieldElement,
        b: FieldElement,
        c: FieldElement,
    ) -> Result<Self> {
        check_order(field, ell)?;
        Ok(CurveId { field, ell, a, b, c })
    }

    pub fn is_smooth(&self) -> bool {
        !(self.a.is_zero() || self.b.is_zero() || self.c.is_zero())
    }

    /// `(ell - 1)(ell - 2)`, twice the genus.
    pub fn twice_genus(&self) -> u64 {
        let l = self.ell as u64;
        (l - 1) * (l - 2)
    }

    /// Equivalent `(A', B')` with `A' x^ell + B' y^ell = z^ell`, when `C != 0`.
    pub fn normalized(&self) -> Result<(FieldElement, FieldElement)> {
        let f = self.field;
        let minus_c_inv = f.neg(f.inv(self.c)?);
        Ok((f.mul(self.a, minus_c_inv), f.mul(self.b, minus_c_inv)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountResult {
    pub q: u32,
    pub ell: u32,
    #[serde(rename = "N")]
    pub n: u64,
    pub a: i64,
    pub method: CountMethod,
    /// Pre-rounding value of `a` for the character-sum route.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<ComplexValue>,
}

impl CountResult {
    fn new(q: u32, ell: u32, n: u64, method: CountMethod) -> Self {
        CountResult {
            q,
            ell,
            n,
            a: n as i64 - (q as i64 + 1),
            method,
            raw: None,
        }
    }
}

/// `x^ell` for every packed `x`.
pub(crate) fn power_table(field: &FieldSpec, ell: u32) -> Vec<FieldElement> {
    field.elements().map(|x| field.pow(x, ell as u64)).collect()
}

/// Projective point count by enumeration over the charts `z = 1`,
/// `(z = 0, y = 1)` and `(z = y = 0, x = 1)`.
///
/// In the `z = 1` chart the values `A x^ell` are tallied once, and each `y`
/// looks up how many `x` satisfy `A x^ell = -(B y^ell + C)`.
pub fn count_brute(id: &CurveId<'_>) -> Result<CountResult> {
    let powers = power_table(id.field, id.ell);
    count_brute_with(id, &powers)
}

pub(crate) fn count_brute_with(id: &CurveId<'_>, powers: &[FieldElement]) -> Result<CountResult> {
    let f = id.field;
    if id.a.is_zero() && id.b.is_zero() && id.c.is_zero() {
        return Err(Error::DegenerateCurve);
    }
    let mut tally = vec![0u32; f.q() as usize];
    for &xl in powers {
        tally[f.mul(id.a, xl).index() as usize] += 1;
    }
    let mut n = 0u64;
    for &yl in powers {
        let target = f.neg(f.add(f.mul(id.b, yl), id.c));
        n += tally[target.index() as usize] as u64;
    }
    let minus_b = f.neg(id.b);
    n += powers.iter().filter(|&&xl| f.mul(id.a, xl) == minus_b).count() as u64;
    if id.a.is_zero() {
        n += 1;
    }
    Ok(CountResult::new(f.q(), id.ell, n, CountMethod::Brute))
}

/// Class of `x` in `F_q^x / (F_q^x)^ell`, i.e. `dlog(x) mod ell`.
pub fn coset_class(field: &FieldSpec, ell: u32, x: FieldElement) -> Result<u32> {
    Ok(field.dlog(x)? % ell)
}

/// Gauss sums of the order-`ell` family, reused across many `(A, B)`.
#[derive(Debug, Clone)]
pub struct CharSumCounter<'f> {
    field: &'f FieldSpec,
    ell: u32,
    gauss: Vec<Complex64>,
}

impl<'f> CharSumCounter<'f> {
    pub fn new(field: &'f FieldSpec, ell: u32) -> Result<Self> {
        let gauss = gauss_sums(field, ell)?;
        Ok(CharSumCounter { field, ell, gauss })
    }

    /// Unrounded `a` for classes `(alpha, beta)`:
    /// `sum conj(chi_1)(A) conj(chi_2)(B) g(chi_1) g(chi_2) / g(chi_1 chi_2)`
    /// over `chi_1, chi_2, chi_1 chi_2` all nontrivial.
    pub fn a_value(&self, alpha: u32, beta: u32) -> Complex64 {
        let l = self.ell as u64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j1 in 1..l {
            for j2 in 1..l {
                let j12 = (j1 + j2) % l;
                if j12 == 0 {
                    continue;
                }
                let twist = root_of_unity(2 * l - (j1 * alpha as u64) % l - (j2 * beta as u64) % l, l);
                let jac = self.gauss[j1 as usize] * self.gauss[j2 as usize] / self.gauss[j12 as usize];
                acc += twist * jac;
            }
        }
        acc
    }

    /// Largest possible `|a|`, used to scale the rounding budget.
    pub fn magnitude(&self) -> f64 {
        let l = self.ell as f64;
        ((l - 1.0) * (l - 2.0)).max(1.0) * (self.field.q() as f64).sqrt()
    }

    pub fn a_rounded(&self, alpha: u32, beta: u32) -> Result<(i64, Complex64)> {
        let raw = self.a_value(alpha, beta);
        Ok((round_to_integer(raw, self.magnitude())?, raw))
    }
}

/// Character-sum point count for `A x^ell + B y^ell = z^ell`.
pub fn a_charsum(id: &CurveId<'_>) -> Result<CountResult> {
    let f = id.field;
    if f.neg(FieldElement::ONE) != id.c {
        return Err(Error::Unsupported(
            "character-sum route needs C = -1; normalize the curve first".into(),
        ));
    }
    if !id.is_smooth() {
        return Err(Error::Unsupported("character-sum route needs A, B != 0".into()));
    }
    let counter = CharSumCounter::new(f, id.ell)?;
    let alpha = coset_class(f, id.ell, id.a)?;
    let beta = coset_class(f, id.ell, id.b)?;
    let (a, raw) = counter.a_rounded(alpha, beta)?;
    let n = a + f.q() as i64 + 1;
    let mut out = CountResult::new(f.q(), id.ell, n as u64, CountMethod::Charsum);
    out.raw = Some(raw.into());
    Ok(out)
}

/// `N(A, B)` for every class pair `(dlog A mod ell, dlog B mod ell)` of the
/// curve `A x^ell + B y^ell = z^ell`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    q: u32,
    ell: u32,
    counts: Vec<u64>,
    method: CountMethod,
}

impl ClassTable {
    /// Exact counts from the cyclotomic numbers
    /// `M[c][d] = #{e : e = c mod ell, 1 + g^e != 0, dlog(1 + g^e) = d mod ell}`.
    ///
    /// With `A = g^alpha`, `B = g^beta` and `h = dlog(-1)`:
    /// `N = ell [beta = 0] + ell [alpha = 0] + ell^2 M[alpha + h][beta]
    ///      + ell [h + beta - alpha = 0]`,
    /// the terms being the affine points with `x = 0`, with `y = 0`, with
    /// `xy != 0`, and the points at infinity.
    pub fn cyclotomic(field: &FieldSpec, ell: u32) -> Result<ClassTable> {
        check_order(field, ell)?;
        let l = ell as usize;
        let mut cyc = vec![0u64; l * l];
        for (e, x) in field.units_by_log().enumerate() {
            let s = field.add(FieldElement::ONE, x);
            if let Ok(z) = field.dlog(s) {
                cyc[(e % l) * l + z as usize % l] += 1;
            }
        }
        let h = field.log_neg_one() as usize % l;
        let ell64 = ell as u64;
        let mut counts = vec![0u64; l * l];
        for alpha in 0..l {
            for beta in 0..l {
                let mut n = ell64 * ell64 * cyc[((alpha + h) % l) * l + beta];
                if alpha == 0 {
                    n += ell64;
                }
                if beta == 0 {
                    n += ell64;
                }
                if (h + beta + l - alpha) % l == 0 {
                    n += ell64;
                }
                counts[alpha * l + beta] = n;
            }
        }
        Ok(ClassTable {
            q: field.q(),
            ell,
            counts,
            method: CountMethod::Cyclotomic,
        })
    }

    /// Brute-force counts on the representatives `(g^alpha, g^beta)`.
    pub fn brute(field: &FieldSpec, ell: u32) -> Result<ClassTable> {
        check_order(field, ell)?;
        let powers = power_table(field, ell);
        let mut counts = Vec::with_capacity((ell * ell) as usize);
        for alpha in 0..ell {
            for beta in 0..ell {
                let id = CurveId::new(
                    field,
                    ell,
                    field.gen_pow(alpha as u64),
                    field.gen_pow(beta as u64),
                )?;
                counts.push(count_brute_with(&id, &powers)?.n);
            }
        }
        Ok(ClassTable {
            q: field.q(),
            ell,
            counts,
            method: CountMethod::Brute,
        })
    }

    /// Rounded character-sum counts.
    pub fn charsum(field: &FieldSpec, ell: u32) -> Result<ClassTable> {
        let counter = CharSumCounter::new(field, ell)?;
        let mut counts = Vec::with_capacity((ell * ell) as usize);
        for alpha in 0..ell {
            for beta in 0..ell {
                let (a, _) = counter.a_rounded(alpha, beta)?;
                counts.push((a + field.q() as i64 + 1) as u64);
            }
        }
        Ok(ClassTable {
            q: field.q(),
            ell,
            counts,
            method: CountMethod::Charsum,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn method(&self) -> CountMethod {
        self.method
    }

    /// Number of `(A, B)` pairs in each class pair, `((q - 1) / ell)^2`.
    pub fn class_weight(&self) -> u64 {
        let w = ((self.q - 1) / self.ell) as u64;
        w * w
    }

    #[inline]
    pub fn count(&self, alpha: u32, beta: u32) -> u64 {
        self.counts[(alpha * self.ell + beta) as usize]
    }

    #[inline]
    pub fn a(&self, alpha: u32, beta: u32) -> i64 {
        self.count(alpha, beta) as i64 - (self.q as i64 + 1)
    }

    /// All `(alpha, beta, N)` triples in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        let l = self.ell;
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &n)| (i as u32 / l, i as u32 % l, n))
    }

    pub fn same_counts(&self, other: &ClassTable) -> bool {
        self.q == other.q && self.ell == other.ell && self.counts == other.counts
    }
}
