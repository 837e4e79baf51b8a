//! Writes the built-in sample instances as JSON into the given directory.

use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "instances".into()),
    );
    std::fs::create_dir_all(&dir)?;
    for inst in [
        norbip_core::samples::bounded_example(),
        norbip_core::samples::line_example(),
    ] {
        let short = inst.name.trim_end_matches("-example");
        let path = dir.join(format!("{short}.json"));
        norbip::format::save(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}
