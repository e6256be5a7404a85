use std::path::{Path, PathBuf};
use std::process::Command;
use std::{env, fs};

fn header() -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tadil.h")).expect("header generated")
}

#[test]
fn header_declares_every_export() {
    let h = header();
    for name in [
        "tadil_params_default",
        "tadil_last_error",
        "tadil_engine_new",
        "tadil_engine_free",
        "tadil_engine_step",
        "tadil_engine_infer",
        "tadil_engine_train_head",
        "tadil_engine_task_count",
        "tadil_engine_active_task",
        "tadil_engine_snapshot",
        "tadil_engine_restore",
        "tadil_bytes_free",
        "tadil_engine_event_log",
        "tadil_string_free",
        "typedef struct TadilEngine TadilEngine",
        "TADIL_STATUS_OK = 0",
        "TADIL_STATUS_PANIC",
        "#ifndef TADIL_H",
    ] {
        assert!(h.contains(name), "header is missing {name}");
    }
}

/// `target/<profile>`, where cargo put the static library.
fn artifact_dir() -> PathBuf {
    let exe = env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libtadil_ffi.a");
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/smoke.c");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "tasks 2 known 0");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
