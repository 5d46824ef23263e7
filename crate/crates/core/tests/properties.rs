use fermat_core::curve::{count_brute, coset_class, CurveId};
use fermat_core::field::make_field_q;
use fermat_core::moments::{count_char_tuples, TupleCountMethod};
use fermat_core::scan::pointless_pairs;
use proptest::prelude::*;

const CASES: &[(u64, u32)] = &[(7, 3), (11, 5), (13, 3), (16, 5), (25, 3), (29, 7), (31, 5), (43, 7), (49, 3)];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_depends_only_on_classes(case in 0..CASES.len(), a in 1u64..49, b in 1u64..49, t in 1u64..49, s in 1u64..49) {
        let (q, ell) = CASES[case];
        let f = make_field_q(q).unwrap();
        let el = |i: u64| f.element(1 + (i - 1) % (q - 1)).unwrap();
        let (a, b, t, s) = (el(a), el(b), el(t), el(s));
        let tl = f.pow(t, ell as u64);
        let sl = f.pow(s, ell as u64);
        let n1 = count_brute(&CurveId::new(&f, ell, a, b).unwrap()).unwrap().n;
        let n2 = count_brute(&CurveId::new(&f, ell, f.mul(a, tl), f.mul(b, sl)).unwrap()).unwrap().n;
        prop_assert_eq!(n1, n2);
    }

    #[test]
    fn hasse_weil_and_pointless_conditions(case in 0..CASES.len(), a in 1u64..49, b in 1u64..49) {
        let (q, ell) = CASES[case];
        let f = make_field_q(q).unwrap();
        let a = f.element(1 + (a - 1) % (q - 1)).unwrap();
        let b = f.element(1 + (b - 1) % (q - 1)).unwrap();
        let r = count_brute(&CurveId::new(&f, ell, a, b).unwrap()).unwrap();
        let m = ((ell - 1) * (ell - 2)) as f64;
        prop_assert!((r.a as f64).abs() <= m * (q as f64).sqrt() + 1e-9);
        if r.n == 0 {
            let minus_a_over_b = f.div(f.neg(a), b).unwrap();
            for x in [a, b, minus_a_over_b] {
                prop_assert_ne!(coset_class(&f, ell, x).unwrap(), 0);
            }
        }
    }

    #[test]
    fn tuple_count_methods_agree(ell in prop::sample::select(vec![2u32, 3, 5, 7, 11, 13]), m in 1u32..7) {
        let c = count_char_tuples(ell, m, TupleCountMethod::Closed).unwrap();
        prop_assert_eq!(&c, &count_char_tuples(ell, m, TupleCountMethod::Recurrence).unwrap());
        prop_assert_eq!(&c, &count_char_tuples(ell, m, TupleCountMethod::Enumerate).unwrap());
        // S(m) + S(m - 1) = (ell - 1)^m.
        if m > 1 {
            let prev = count_char_tuples(ell, m - 1, TupleCountMethod::Closed).unwrap();
            prop_assert_eq!(c + prev, num_bigint::BigInt::from(ell - 1).pow(m));
        }
    }
}

#[test]
fn pointless_size_is_class_multiple() {
    for &(q, ell) in CASES {
        let f = make_field_q(q).unwrap();
        let r = pointless_pairs(&f, ell).unwrap();
        let w = ((q - 1) / ell as u64).pow(2);
        assert_eq!(r.e_size % w, 0);
        assert!(r.second_moment_inequality_holds());
    }
}
