use std::path::Path;
use std::process::Command;

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vpki.h")).unwrap()
}

#[test]
fn header_declares_abi() {
    let h = header();
    for sym in [
        "VPKI_STATUS_TAMPER_EVIDENCE = 15",
        "VPKI_STATUS_NULL_POINTER = 100",
        "typedef struct VpkiPlan VpkiPlan;",
        "typedef struct VpkiSandbox VpkiSandbox;",
        "const char *vpki_last_error(void);",
        "void vpki_string_free(char *s);",
        "enum VpkiStatus vpki_compute_ticket_ik(",
        "enum VpkiStatus vpki_compute_pseudonym_ik(",
        "enum VpkiStatus vpki_plan_new(",
        "enum VpkiStatus vpki_sandbox_trip(",
        "enum VpkiStatus vpki_timing_link_json(",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(&src, "#include \"vpki.h\"\nint main(void) { VpkiPlanEntry e = {0}; return (int)e.expected_slots; }\n").unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
