//! The checked-in fixture documents must parse to the instances the
//! test suites construct in code.

use smartlot_core::fixtures;
use smartlot_core::io::{parse_instance, serialize_instance};
use smartlot_core::market::MarketInstance;

fn assert_same_instance(a: &MarketInstance, b: &MarketInstance) {
    assert_eq!(a.student_ids(), b.student_ids());
    assert_eq!(a.school_ids(), b.school_ids());
    for i in 0..a.n_students() {
        assert_eq!(a.pref(i), b.pref(i), "student {i}");
    }
    for s in 0..a.n_schools() {
        assert_eq!(a.priority_classes(s), b.priority_classes(s), "school {s}");
        assert_eq!(a.capacity(s), b.capacity(s), "school {s}");
    }
}

#[test]
fn quad_document_parses_to_fixture() {
    let inst = parse_instance(include_str!("fixtures/quad_market.json")).unwrap();
    assert_same_instance(&inst, &fixtures::quad_market());
}

#[test]
fn sextet_document_parses_to_fixture() {
    let inst = parse_instance(include_str!("fixtures/sextet_market.json")).unwrap();
    assert_same_instance(&inst, &fixtures::sextet_market());
}

#[test]
fn octet_document_parses_to_fixture() {
    let inst = parse_instance(include_str!("fixtures/octet_market.json")).unwrap();
    assert_same_instance(&inst, &fixtures::octet_market());
}

#[test]
fn fixture_documents_round_trip() {
    for text in [
        include_str!("fixtures/quad_market.json"),
        include_str!("fixtures/sextet_market.json"),
        include_str!("fixtures/octet_market.json"),
    ] {
        let inst = parse_instance(text).unwrap();
        let again = parse_instance(&serialize_instance(&inst)).unwrap();
        assert_same_instance(&inst, &again);
    }
}
