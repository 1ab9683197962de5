//! Compiles the guide under `book/src` as doctests, one module per chapter, so
//! every listing runs against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/mechanisms.md")]
pub mod mechanisms {}
#[doc = include_str!("../../../book/src/sketches.md")]
pub mod sketches {}
#[doc = include_str!("../../../book/src/linear.md")]
pub mod linear {}
#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}
#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}
#[doc = include_str!("../../../book/src/labeldp.md")]
pub mod labeldp {}
#[doc = include_str!("../../../book/src/margins.md")]
pub mod margins {}
#[doc = include_str!("../../../book/src/audit.md")]
pub mod audit {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    #[test]
    fn every_chapter_in_the_summary_is_compiled() {
        let summary = include_str!("../../../book/src/SUMMARY.md");
        let listed: BTreeSet<&str> = summary.lines().filter_map(|l| l.split_once("](")).map(|(_, rest)| rest.trim_end_matches(')')).collect();
        let compiled: BTreeSet<&str> = include_str!("lib.rs")
            .lines()
            .filter_map(|l| l.strip_prefix("#[doc = include_str!(\"../../../book/src/"))
            .map(|rest| rest.trim_end_matches("\")]"))
            .collect();
        assert_eq!(listed, compiled);
    }
}
