use std::path::PathBuf;

/// Reads a hand-written hex fixture: whitespace-separated byte pairs, with
/// `#` starting a comment that runs to the end of the line.
pub fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let digits: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .collect();
    hex::decode(digits).unwrap_or_else(|e| panic!("{name}: {e}"))
}
