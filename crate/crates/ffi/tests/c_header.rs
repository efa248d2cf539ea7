//! Compiles and runs a C program against the generated header and static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "canyon.h"

int main(void) {
    CanyonBudget budget = canyon_budget_default();
    double nf = 0.0;
    if (canyon_noise_floor(&budget, &nf) != CANYON_STATUS_OK) return 1;
    if (fabs(nf + 74.9691) > 1e-3) return 2;

    CanyonDataset *ds = NULL;
    if (canyon_dataset_open("/nonexistent.mms", &ds) != CANYON_STATUS_IO) return 3;
    char *msg = canyon_last_error_message();
    if (msg == NULL || strstr(msg, "nonexistent") == NULL) return 4;
    canyon_string_free(msg);

    CanyonFit fit = { -3.6, -39.2, 3.4, 1.0, 317.0, 100 };
    budget.median_abg_dbi = 12.9;
    CanyonCoverage cov;
    if (canyon_coverage(&fit, &budget, 1.0, 317.0, 1.0, &cov) != CANYON_STATUS_OK) return 5;
    if (cov.cutoff_kind != CANYON_CUTOFF_KIND_AT || cov.cutoff_m != 179.0) return 6;

    printf("%s %.4f\n", canyon_version(), nf);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // integration tests run from <target>/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libcanyon_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    let exe = work.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .status()
        .expect("run C compiler");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, format!("{} -74.9691\n", env!("CARGO_PKG_VERSION")));
}
