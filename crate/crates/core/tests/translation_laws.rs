mod common;

use common::{generated_calls, golden_aligned_schema, golden_mapping, golden_schema};
use proptest::prelude::*;
use serde_json::json;
use toolalign::translation::{
    detect_misalignment, render_aligned_schema, translate_call, Misalignment, Namespace, ToolCall,
    TranslationErrorKind,
};

#[test]
fn customer_id_call_through_golden_mapping() {
    let index = golden_mapping().index().unwrap();
    let call = ToolCall::new(
        "get_customer_id",
        json!({"customer_id": 42}).as_object().unwrap().clone(),
        Namespace::Aligned,
    );
    let t = translate_call(&call, &index, None).unwrap();
    assert_eq!(t.call.name, "get_user_id");
    assert_eq!(t.call.arguments["user_id"], 42);
    assert_eq!(t.call.namespace, Namespace::Original);
}

#[test]
fn customer_id_call_is_misaligned_against_original_schema() {
    let call = ToolCall::new(
        "get_customer_id",
        json!({"customer_id": 42}).as_object().unwrap().clone(),
        Namespace::Original,
    );
    assert_eq!(
        detect_misalignment(&call, &golden_schema()),
        Misalignment::Misaligned(vec!["get_customer_id".into()])
    );
}

#[test]
fn rendered_schema_is_the_golden_text() {
    let text = std::fs::read_to_string(common::fixture("golden/aligned_schema.json")).unwrap();
    assert_eq!(render_aligned_schema(&golden_aligned_schema()), text);
}

#[test]
fn mapping_sides_are_inverse() {
    let index = golden_mapping().index().unwrap();
    let scopes = std::iter::once(&index.tools).chain(index.params.values());
    for scope in scopes {
        assert_eq!(scope.forward.len(), scope.backward.len());
        for (o, a) in &scope.forward {
            assert_eq!(&scope.backward[a], o);
        }
    }
}

#[test]
fn ambiguous_repair_is_refused() {
    let index = golden_mapping().index().unwrap();
    // every parameter of the tool lies within reach
    let call = ToolCall::new(
        "get_weather_forecast",
        json!({"xyz": 1}).as_object().unwrap().clone(),
        Namespace::Aligned,
    );
    let err = translate_call(&call, &index, Some(20.0)).unwrap_err();
    assert_eq!(err.kind, TranslationErrorKind::AmbiguousRepair);
    assert_eq!(err.ambiguous_with.len(), 3);
    assert!(err.repaired);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aligned_round_trip_is_identity(seed in any::<u64>()) {
        let index = golden_mapping().index().unwrap();
        for call in generated_calls(&golden_aligned_schema(), Namespace::Aligned, 8, seed) {
            let there = translate_call(&call, &index, None).unwrap();
            prop_assert!(there.repairs.is_empty());
            let back = translate_call(&there.call, &index, None).unwrap();
            prop_assert_eq!(&back.call, &call);
            // values, order and arity are untouched
            let vals: Vec<_> = call.arguments.values().collect();
            let there_vals: Vec<_> = there.call.arguments.values().collect();
            prop_assert_eq!(vals, there_vals);
        }
    }

    #[test]
    fn aligned_validity_implies_clean_translation(seed in any::<u64>()) {
        let index = golden_mapping().index().unwrap();
        let aligned = golden_aligned_schema();
        for mut call in generated_calls(&aligned, Namespace::Aligned, 8, seed) {
            if seed % 3 == 0 {
                call.arguments.insert("bogus_key".into(), json!(1));
            }
            if detect_misalignment(&call, &aligned).is_ok() {
                prop_assert!(translate_call(&call, &index, None).is_ok());
            } else {
                prop_assert!(translate_call(&call, &index, None).is_err());
            }
        }
    }

    #[test]
    fn repair_only_when_unique(name in "[a-z_]{1,20}", tau in 0.0f64..6.0) {
        let index = golden_mapping().index().unwrap();
        let call = ToolCall::new(name.clone(), Default::default(), Namespace::Aligned);
        let within: Vec<&str> = index
            .tools
            .names(true)
            .into_iter()
            .filter(|n| toolalign::edit_distance(&name, n) as f64 <= tau)
            .collect();
        let result = translate_call(&call, &index, Some(tau));
        if index.tools.backward.contains_key(&name) {
            prop_assert!(result.unwrap().repairs.is_empty());
        } else if within.len() == 1 {
            let t = result.unwrap();
            prop_assert_eq!(t.repairs.len(), 1);
            prop_assert_eq!(t.repairs[0].to.as_str(), within[0]);
        } else if within.len() > 1 {
            prop_assert_eq!(result.unwrap_err().kind, TranslationErrorKind::AmbiguousRepair);
        } else {
            prop_assert_eq!(result.unwrap_err().kind, TranslationErrorKind::UnknownTool);
        }
    }
}
