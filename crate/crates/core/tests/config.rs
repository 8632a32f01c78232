use proptest::prelude::*;

use tetreg::config::{parse_config, Value};
use tetreg::Error;

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Integer),
        (-1e12f64..1e12).prop_map(Value::Float),
        "[ -~]{0,12}".prop_map(Value::String),
    ]
}

proptest! {
    #[test]
    fn text_form_round_trips(entries in prop::collection::btree_map("x_[a-z]{1,8}", value(), 0..12)) {
        let text: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.len(), entries.len());
        for (k, v) in &entries {
            prop_assert_eq!(cfg.get(k), Some(v));
        }
        prop_assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn integer_keys_reject_strings(s in "[a-z]{1,6}") {
        let r = parse_config(&format!("ea_num_generations = \"{s}\""));
        let is_type_error = matches!(r, Err(Error::TypeMismatch { .. }));
        prop_assert!(is_type_error);
    }
}

#[test]
fn reference_parameter_values() {
    let cfg = parse_config("ea_num_clusters = 10\nmorea_sampling_rate = 1.0\nmorea_repair_method = \"none\"\nseed = 1").unwrap();
    assert_eq!(cfg.get("ea_num_clusters"), Some(&Value::Integer(10)));
    assert_eq!(cfg.evolver_config().unwrap().num_clusters, 10);
    assert!(matches!(parse_config("").unwrap().seed(), Err(Error::MissingKey(_))));
    assert!(matches!(parse_config("a = 1\na = 1"), Err(Error::DuplicateKey(_))));
}
