//! The data files shipped at the repository root load to the built-in
//! values, so passing them explicitly changes nothing.

use std::path::{Path, PathBuf};

use teleprobe::config::{builtin_script, load_calibration, resolve_profile, resolve_script};
use teleprobe_core::operator::builtin_profiles;
use teleprobe_core::Calibration;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn calibration_file_is_the_default() {
    let cal = load_calibration(Some(&root().join("calib/default.json"))).unwrap();
    assert_eq!(cal, Calibration::default());
}

#[test]
fn profile_files_are_the_builtins() {
    for p in builtin_profiles() {
        let path = root().join(format!("profiles/{}.json", p.name));
        assert_eq!(resolve_profile(path.to_str().unwrap()).unwrap(), p);
    }
}

#[test]
fn script_files_are_the_builtins() {
    let cal = Calibration::default();
    for name in ["lr_default", "ud_default"] {
        let path = root().join(format!("scripts/{name}.json"));
        assert_eq!(resolve_script(path.to_str().unwrap(), &cal).unwrap(), builtin_script(name).unwrap());
    }
}
