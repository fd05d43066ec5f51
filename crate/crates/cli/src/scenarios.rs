//! Scenario files shipped with the binary.

const BUNDLED: &[(&str, &str)] = &[
    ("ic_only", include_str!("../scenarios/ic_only.toml")),
    (
        "table1_xi002",
        include_str!("../scenarios/table1_xi002.toml"),
    ),
    (
        "table1_xi003",
        include_str!("../scenarios/table1_xi003.toml"),
    ),
    ("table1_b", include_str!("../scenarios/table1_b.toml")),
    ("table1_c", include_str!("../scenarios/table1_c.toml")),
    ("table2", include_str!("../scenarios/table2.toml")),
    ("table3", include_str!("../scenarios/table3.toml")),
    ("table3_005", include_str!("../scenarios/table3_005.toml")),
    ("table4_a", include_str!("../scenarios/table4_a.toml")),
    ("table4_b", include_str!("../scenarios/table4_b.toml")),
    ("table4_c", include_str!("../scenarios/table4_c.toml")),
    ("table4_d", include_str!("../scenarios/table4_d.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}
