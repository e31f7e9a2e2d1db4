//! Regenerates the calibration, profile and script files shipped in the
//! repository root from the built-in values.
//!
//! cargo run -p teleprobe --example write_defaults -- <repo root>

use std::path::PathBuf;

use teleprobe::config::builtin_script;
use teleprobe_core::operator::builtin_profiles;
use teleprobe_core::Calibration;

fn main() -> std::io::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    for dir in ["calib", "profiles", "scripts"] {
        std::fs::create_dir_all(root.join(dir))?;
    }
    std::fs::write(root.join("calib/default.json"), Calibration::default().to_json_pretty())?;
    for p in builtin_profiles() {
        std::fs::write(root.join(format!("profiles/{}.json", p.name)), p.to_json_pretty())?;
    }
    for name in ["lr_default", "ud_default"] {
        let s = builtin_script(name).expect("built-in script");
        std::fs::write(root.join(format!("scripts/{name}.json")), s.to_json_pretty())?;
    }
    Ok(())
}
