//! Regenerates `cases/island_synthetic/tmy.csv`.
//!
//! cargo run --example generate_case -- [output path]

use std::path::PathBuf;

fn main() {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases/island_synthetic/tmy.csv")
    });
    microgrid_core::case::synthetic_year()
        .write_csv(&path)
        .expect("write typical year");
    println!("wrote {}", path.display());
}
