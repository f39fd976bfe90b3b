use lml_core::table::VariableSpec;
use lml_core::{Subset, SubsetVector, TableSpec};

#[test]
fn coppen_totals() {
    let t = TableSpec::coppen();
    let n = t.to_vector().unwrap();
    assert_eq!(n.sum(), 362.0);
    assert_eq!(t.counts.len(), 16);
    assert_eq!(t.variable_index("Solidity"), Some(4));
}

#[test]
fn json_round_trip() {
    let t = TableSpec::coppen();
    let text = serde_json::to_string(&t).unwrap();
    let back = TableSpec::from_json(&text).unwrap();
    assert_eq!(back, t);
}

#[test]
fn vector_round_trip() {
    let vars = vec![
        VariableSpec {
            name: "A".into(),
            one: "1".into(),
            zero: "0".into(),
        },
        VariableSpec {
            name: "B".into(),
            one: "hi".into(),
            zero: "lo".into(),
        },
    ];
    let values = SubsetVector::from_values(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let t = TableSpec::from_vector(vars, &values).unwrap();
    assert_eq!(t.to_vector().unwrap(), values);
    assert_eq!(t.counts[3].levels, ["1", "hi"]);
    assert_eq!(t.subset_names(Subset::full(2)), ["A", "B"]);
}

#[test]
fn recoding_twice_is_identity() {
    let mut t = TableSpec::coppen();
    let before = t.to_vector().unwrap();
    t.recode("Stability", "extroverted").unwrap();
    assert_ne!(t.to_vector().unwrap(), before);
    t.recode("Stability", "introverted").unwrap();
    assert_eq!(t.to_vector().unwrap(), before);
}
