//! Signatures of the builtin widget operations.

use std::sync::OnceLock;

use crate::syntax::ast::LinType;
use crate::syntax::parse_lin_type;

const SCHEMES: &[(&str, &str)] = &[
    ("newWidget", "I ⊸ ∃(i:Id). Widget i"),
    ("dropWidget", "∀(i:Id). Widget i ⊸ I"),
    ("setColor", "∀(i:Id). Widget i ⊗ F Color ⊸ Widget i"),
    ("onClick", "∀(i:Id). Widget i ⊸ Widget i ⊗ ◇I"),
    ("onKeypress", "∀(i:Id). Widget i ⊸ Widget i ⊗ ◇(F Char)"),
    ("out", "◇A ⊸ ∃(k:Time). A @ k"),
    ("into", "(∃(k:Time). A @ k) ⊸ ◇A"),
    ("split", "∀(i:Id)(t:Time). Widget i ⊸ Prefix i t ⊗ Widget i @ t"),
    ("join", "∀(i:Id)(t:Time). Prefix i t ⊗ Widget i @ t ⊸ Widget i"),
    ("vAttach", "∀(i:Id)(j:Id). Widget i ⊸ Widget j ⊸ Widget i"),
];

/// Builtins whose signature is schematic in the type variable `A`.
pub const SCHEMATIC: &[&str] = &["out", "into"];

/// Closed type schemes of the builtin operations, in declaration order.
#[derive(Debug)]
pub struct ApiTable {
    entries: Vec<(&'static str, LinType)>,
}

impl ApiTable {
    pub fn standard() -> &'static ApiTable {
        static TABLE: OnceLock<ApiTable> = OnceLock::new();
        TABLE.get_or_init(|| ApiTable {
            entries: SCHEMES
                .iter()
                .map(|&(n, s)| (n, parse_lin_type(s).expect("builtin scheme parses")))
                .collect(),
        })
    }

    pub fn get(&self, name: &str) -> Option<&LinType> {
        self.entries.iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &LinType)> {
        self.entries.iter().map(|(n, t)| (*n, t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_exactly_the_widget_api() {
        let names: Vec<_> = ApiTable::standard().iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            ["newWidget", "dropWidget", "setColor", "onClick", "onKeypress", "out", "into", "split", "join", "vAttach"]
        );
    }

    #[test]
    fn schemes_print_canonically() {
        let t = ApiTable::standard();
        assert_eq!(t.get("setColor").unwrap().to_string(), "∀(i:Id). Widget i ⊗ F Color ⊸ Widget i");
        assert_eq!(t.get("split").unwrap().to_string(), "∀(i:Id)(t:Time). Widget i ⊸ Prefix i t ⊗ Widget i @ t");
        assert_eq!(t.get("into").unwrap().to_string(), "(∃(k:Time). A @ k) ⊸ ◇A");
    }
}
