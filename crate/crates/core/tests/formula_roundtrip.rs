use kbpcheck::dc::DcParams;
use kbpcheck::formula::Formula;
use kbpcheck::parse_formula;
use proptest::prelude::*;

fn atom() -> impl Strategy<Value = Formula> {
    prop_oneof![
        Just(Formula::True),
        Just(Formula::falsum()),
        (0usize..3, 0i64..=3).prop_map(|(a, v)| Formula::eq(format!("C{}.slot_request", a + 1), v)),
        (0usize..3, 0i64..2).prop_map(|(a, v)| Formula::ne(format!("C{}.msg", a + 1), v)),
        (1usize..=6).prop_map(|u| Formula::eq(format!("rr[{u}]"), 1)),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    atom().prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (0usize..3, inner.clone()).prop_map(|(a, f)| Formula::know(format!("C{}", a + 1), f)),
            inner.prop_map(Formula::next),
        ]
    })
}

proptest! {
    #[test]
    fn printing_then_parsing_is_identity(f in formula()) {
        let vocab = DcParams::default().vocabulary().unwrap();
        let text = f.to_string();
        let back = parse_formula(&text, &vocab).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(back, f);
    }
}
