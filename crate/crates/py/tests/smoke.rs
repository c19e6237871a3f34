use std::path::PathBuf;
use std::process::Command;

/// Loads the freshly built extension into a Python interpreter and runs the
/// smoke script against it.
#[test]
fn python_smoke_script() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration tests live in target/<profile>/deps; the library sits one up.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libcoopercept_py.so");
    if !lib.exists() || Command::new("python3").arg("--version").output().is_err() {
        eprintln!("skipping: no python3 or no built extension at {}", lib.display());
        return;
    }
    let out = Command::new("python3")
        .arg(manifest.join("python").join("smoke_test.py"))
        .env("COOPERCEPT_LIB", &lib)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}
