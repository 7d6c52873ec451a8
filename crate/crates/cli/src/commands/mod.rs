pub mod bake;
pub mod render;
pub mod train;
pub mod validate;

use std::path::Path;

/// Writes the resolved configuration next to the outputs so every run can
/// be reproduced from its artifacts alone.
pub fn echo_config<T: serde::Serialize>(out_dir: &Path, name: &str, config: &T) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config)?)?;
    Ok(())
}
