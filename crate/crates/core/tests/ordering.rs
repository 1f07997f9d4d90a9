use fairstream::stream::AttributeSpec;
use fairstream::{order_by_attribute, Instance, LoadError, Schema, Value};
use proptest::prelude::*;

fn schema() -> Schema {
    Schema::new(
        vec![
            AttributeSpec::nominal("g", &["a", "b", "c"]),
            AttributeSpec::numeric("x"),
            AttributeSpec::nominal("s", &["f", "m"]),
        ],
        "y",
        ["no", "yes"],
        "yes",
        3,
        "s",
        "f",
    )
    .unwrap()
}

fn instances(raw: &[(Option<u32>, f64, u32, usize)]) -> Vec<Instance> {
    raw.iter()
        .enumerate()
        .map(|(i, &(g, x, s, y))| {
            let mut inst = Instance::new(
                vec![g.map_or(Value::Missing, Value::Nominal), Value::Numeric(x), Value::Nominal(s)],
                y,
            );
            inst.arrival_index = i as u64;
            inst
        })
        .collect()
}

proptest! {
    #[test]
    fn ordering_is_a_stable_permutation(
        raw in prop::collection::vec((prop::option::of(0u32..3), -5.0f64..5.0, 0u32..2, 0usize..2), 0..200)
    ) {
        let input = instances(&raw);
        let sorted = order_by_attribute(&schema(), input.clone(), "g").unwrap();
        prop_assert_eq!(sorted.len(), input.len());
        for (i, inst) in sorted.iter().enumerate() {
            prop_assert_eq!(inst.arrival_index, i as u64);
        }
        let key = |i: &Instance| i.values[0].nominal().unwrap_or(usize::MAX);
        prop_assert!(sorted.windows(2).all(|w| key(&w[0]) <= key(&w[1])));
        // stability: within a group the original relative order survives
        let mut expected = input.clone();
        expected.sort_by_key(key);
        for (a, b) in sorted.iter().zip(&expected) {
            prop_assert_eq!(&a.values, &b.values);
            prop_assert_eq!(a.label, b.label);
        }
    }
}

#[test]
fn ordering_rejects_unknown_and_numeric_attributes() {
    let s = schema();
    assert!(matches!(order_by_attribute(&s, vec![], "zz"), Err(LoadError::UnknownAttribute(_))));
    assert!(matches!(order_by_attribute(&s, vec![], "x"), Err(LoadError::NumericAttribute(_))));
}
