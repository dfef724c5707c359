use isbpol::oracle::{Momentum, Op, OperatorString, Oracle, RewriteOrder};
use num_traits::Zero;
use proptest::prelude::*;

fn momentum() -> impl Strategy<Value = Momentum> {
    prop_oneof![
        Just(Momentum::Q),
        Just(Momentum::QP),
        Just(Momentum(2, -1)),
        Just(Momentum(-1, 2)),
        Just(Momentum(0, 0)),
    ]
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => momentum().prop_map(Op::Create),
        3 => momentum().prop_map(Op::Annihilate),
        1 => (momentum(), momentum()).prop_map(|(a, b)| Op::Deviation(a, b)),
    ]
}

fn string(max: usize) -> impl Strategy<Value = OperatorString> {
    prop::collection::vec(op(), 0..=max).prop_map(OperatorString::new)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(1_000) })]

    #[test]
    fn rewrite_order_does_not_matter(s in string(8)) {
        let o = Oracle::default();
        let left = o.normal_order_with(&s, RewriteOrder::Leftmost).unwrap();
        let right = o.normal_order_with(&s, RewriteOrder::Rightmost).unwrap();
        prop_assert_eq!(&left, &right);
        for (t, _) in left.terms() {
            prop_assert!(t.is_normal_ordered());
        }
    }

    #[test]
    fn unbalanced_momentum_has_zero_vacuum_value(s in string(8)) {
        let o = Oracle::default();
        let v = o.vev_poly(&s).unwrap();
        if s.net_momentum() != Momentum::default() {
            prop_assert!(v.is_zero());
        }
    }

    #[test]
    fn vacuum_value_distributes_over_normal_ordered_terms(a in string(5), b in string(4)) {
        let o = Oracle::default();
        let whole = o.vev_poly(&a.then(&b)).unwrap().eval(7);
        let mut split = num_rational::BigRational::zero();
        for (t, c) in o.normal_order(&a).unwrap().terms() {
            split += c.eval(7) * o.vev_poly(&t.then(&b)).unwrap().eval(7);
        }
        prop_assert_eq!(whole, split);
    }

    #[test]
    fn pruned_vacuum_value_matches_full_normal_order(s in string(7)) {
        let o = Oracle::default();
        prop_assert_eq!(o.vev_poly(&s).unwrap(), o.normal_order(&s).unwrap().scalar());
    }
}
