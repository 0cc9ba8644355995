//! The committed fixture files must match what the builder produces today.

use std::path::PathBuf;

#[test]
fn committed_fixtures_match_builder() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let mut stale = Vec::new();
    for f in groundline_reference::corpus::build() {
        let on_disk = std::fs::read_to_string(root.join(&f.path)).unwrap_or_default();
        if on_disk != f.contents {
            stale.push(f.path);
        }
    }
    assert!(
        stale.is_empty(),
        "stale fixtures {stale:?}; run `cargo run -p groundline-reference --bin build-fixtures`"
    );
}
