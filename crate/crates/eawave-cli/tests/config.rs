//! Configuration document parsing: round-trip identity, typed accessors,
//! and error reporting.

use eawave_cli::config::{ConfigDoc, ConfigError};

const SAMPLE: &str = "\
# experiment description
[geometry]
mesh = cartesian   # family
level = 3

[sensors]
fluid = 0.25 0.5
fluid = 0.75 0.75
solid = -0.25 0.5

[time]
tableau = sdirk34
n = 8
t_final = 1.0
";

#[test]
fn parse_serialize_parse_is_identity() {
    let doc = ConfigDoc::parse(SAMPLE).unwrap();
    let text = doc.serialize();
    let reparsed = ConfigDoc::parse(&text).unwrap();
    assert_eq!(doc, reparsed);
    // And serialization is a fixed point from then on.
    assert_eq!(text, reparsed.serialize());
}

#[test]
fn duplicate_keys_keep_their_order() {
    let doc = ConfigDoc::parse(SAMPLE).unwrap();
    assert_eq!(
        doc.get_all("sensors", "fluid"),
        vec!["0.25 0.5", "0.75 0.75"]
    );
    assert_eq!(doc.get("sensors", "solid"), Some("-0.25 0.5"));
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let doc = ConfigDoc::parse(SAMPLE).unwrap();
    assert_eq!(doc.get("geometry", "mesh"), Some("cartesian"));
    assert_eq!(doc.get("geometry", "level"), Some("3"));
}

#[test]
fn typed_accessors_parse_and_default() {
    let doc = ConfigDoc::parse(SAMPLE).unwrap();
    let n: u32 = doc.require_parsed("time", "n").unwrap();
    assert_eq!(n, 8);
    let missing: f64 = doc.get_parsed("time", "dt_scale", 0.25).unwrap();
    assert_eq!(missing, 0.25);
    let list: Vec<f64> = doc
        .get_list("sensors", "solid")
        .unwrap()
        .expect("key exists");
    assert_eq!(list, vec![-0.25, 0.5]);
}

#[test]
fn malformed_documents_are_rejected() {
    assert!(matches!(
        ConfigDoc::parse("key = 1\n"),
        Err(ConfigError::EntryOutsideSection(1, _))
    ));
    assert!(matches!(
        ConfigDoc::parse("[geometry]\nno equals sign\n"),
        Err(ConfigError::MalformedLine(2, _))
    ));
    assert!(matches!(
        ConfigDoc::parse("[unclosed\n"),
        Err(ConfigError::MalformedSection(1, _))
    ));
    let doc = ConfigDoc::parse(SAMPLE).unwrap();
    assert!(matches!(
        doc.require("time", "missing"),
        Err(ConfigError::MissingKey(_, _))
    ));
    assert!(matches!(
        doc.require_parsed::<u32>("time", "t_final"),
        Err(ConfigError::InvalidValue(_, _, _, _))
    ));
}

#[test]
fn shipped_example_configs_parse_and_round_trip() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let text = std::fs::read_to_string(&path).unwrap();
            let doc = ConfigDoc::parse(&text)
                .unwrap_or_else(|e| panic!("{} fails to parse: {e}", path.display()));
            assert_eq!(doc, ConfigDoc::parse(&doc.serialize()).unwrap());
            seen += 1;
        }
    }
    assert!(seen >= 7, "expected the shipped example configs, found {seen}");
}
