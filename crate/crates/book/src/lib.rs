//! The chapters of the guide, included as documentation so that their
//! code blocks run under `cargo test -p book`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/relay.md")]
pub mod relay {}

#[doc = include_str!("../../../book/src/flows.md")]
pub mod flows {}

#[doc = include_str!("../../../book/src/collision.md")]
pub mod collision {}

#[doc = include_str!("../../../book/src/reduced_map.md")]
pub mod reduced_map {}

#[doc = include_str!("../../../book/src/continuation.md")]
pub mod continuation {}

#[doc = include_str!("../../../book/src/invariant_curves.md")]
pub mod invariant_curves {}

#[doc = include_str!("../../../book/src/attractors.md")]
pub mod attractors {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[cfg(test)]
mod tests {
    use std::path::Path;

    /// Every chapter listed in SUMMARY.md is included above.
    #[test]
    fn summary_chapters_are_doc_tested() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src");
        let summary = std::fs::read_to_string(root.join("SUMMARY.md")).unwrap();
        let lib = include_str!("lib.rs");
        for line in summary.lines() {
            if let (Some(a), Some(b)) = (line.find("]("), line.rfind(')')) {
                let file = &line[a + 2..b];
                assert!(root.join(file).exists(), "{file} missing");
                assert!(lib.contains(&format!("book/src/{file}\"")), "{file} is not included");
            }
        }
    }
}
