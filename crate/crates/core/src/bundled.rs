//! Models shipped with the library.

use crate::dsl;
use crate::model::Pppta;

pub const GEOMETRIC: &str = include_str!("../models/geometric.pppta");
pub const SEPARABILITY: &str = include_str!("../models/separability.pppta");
pub const NRP: &str = include_str!("../models/nrp.pppta");
pub const NRP_MODIFIED: &str = include_str!("../models/nrp_modified.pppta");

/// `(name, source, target location)` for every bundled model.
pub const ALL: [(&str, &str, &str); 4] = [
    ("geometric", GEOMETRIC, "goal"),
    ("separability", SEPARABILITY, "goal"),
    ("nrp", NRP, "done"),
    ("nrp_modified", NRP_MODIFIED, "done"),
];

pub fn source(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _, _)| *n == name).map(|(_, s, _)| *s)
}

/// Parses a bundled model; the shipped sources are known to be valid.
pub fn load(name: &str) -> Pppta {
    let src = source(name).unwrap_or_else(|| panic!("no bundled model `{name}`"));
    dsl::parse(src).expect("bundled model parses")
}
