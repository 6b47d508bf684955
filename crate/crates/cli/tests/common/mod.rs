//! Golden-file cases for the `samurai` binary, shared by the golden test and
//! the acceptance run. Set `UPDATE_GOLDEN=1` to rewrite the expected files.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub code: i32,
}

const ENV0: &str = "tests/data/env0.json";
const ENV_HALF: &str = "tests/data/env_half.json";

pub const CASES: &[Case] = &[
    Case {
        name: "validate_debt",
        args: &[
            "validate",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/lambda_debt.json",
        ],
        code: 0,
    },
    Case {
        name: "validate_bad",
        args: &[
            "validate",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/lambda_bad.json",
        ],
        code: 2,
    },
    Case {
        name: "validate_malformed",
        args: &[
            "validate",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/malformed.json",
        ],
        code: 1,
    },
    Case {
        name: "validate_seed",
        args: &["validate", "--env", ENV_HALF, "--seed", "7"],
        code: 0,
    },
    Case {
        name: "construct_debt_json",
        args: &[
            "construct",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/lambda_debt.json",
            "--grid",
            "11",
        ],
        code: 0,
    },
    Case {
        name: "construct_debt_csv",
        args: &[
            "construct",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/lambda_debt.json",
            "--grid",
            "11",
            "--format",
            "csv",
        ],
        code: 0,
    },
    Case {
        name: "construct_half_csv",
        args: &[
            "construct",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/lambda_half.json",
            "--grid",
            "11",
            "--format",
            "csv",
        ],
        code: 0,
    },
    Case {
        name: "construct_seed",
        args: &[
            "construct",
            "--env",
            ENV_HALF,
            "--seed",
            "42",
            "--grid",
            "11",
        ],
        code: 0,
    },
    Case {
        name: "tighten_wasteful",
        args: &[
            "tighten",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/wasteful.json",
        ],
        code: 0,
    },
    Case {
        name: "tighten_grid_menu_csv",
        args: &[
            "tighten",
            "--menu",
            "grid",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/wasteful.json",
            "--format",
            "csv",
        ],
        code: 0,
    },
    Case {
        name: "tighten_not_ic",
        args: &[
            "tighten",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/nonic.json",
        ],
        code: 2,
    },
    Case {
        name: "check_debt",
        args: &[
            "check",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/debt_mechanism.json",
        ],
        code: 0,
    },
    Case {
        name: "check_wasteful",
        args: &[
            "check",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/wasteful.json",
        ],
        code: 2,
    },
    Case {
        name: "check_not_ic",
        args: &[
            "check",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/nonic.json",
        ],
        code: 2,
    },
    Case {
        name: "compare_debt_wasteful",
        args: &[
            "compare",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/debt_mechanism.json",
            "--mechanism",
            "tests/data/wasteful.json",
        ],
        code: 0,
    },
    Case {
        name: "bruteforce_count",
        args: &[
            "bruteforce",
            "--env",
            ENV0,
            "--types",
            "0,0.5,1",
            "--q",
            "1",
            "--refund-levels",
            "3",
        ],
        code: 0,
    },
    Case {
        name: "bruteforce_debt",
        args: &[
            "bruteforce",
            "--env",
            ENV0,
            "--types",
            "0,0.5,1",
            "--q",
            "1",
            "--refund-levels",
            "3",
            "--mechanism",
            "tests/data/debt3.json",
        ],
        code: 0,
    },
    Case {
        name: "bruteforce_raised",
        args: &[
            "bruteforce",
            "--env",
            ENV0,
            "--types",
            "0,0.5,1",
            "--q",
            "1",
            "--refund-levels",
            "3",
            "--mechanism",
            "tests/data/raised3.json",
        ],
        code: 2,
    },
    Case {
        name: "bruteforce_tightness",
        args: &[
            "bruteforce",
            "--env",
            ENV0,
            "--types",
            "0,0.5,1",
            "--q",
            "2",
            "--refund-levels",
            "3",
            "--mode",
            "tightness",
            "--mechanism",
            "tests/data/debt3.json",
        ],
        code: 0,
    },
    Case {
        name: "bruteforce_too_large",
        args: &[
            "bruteforce",
            "--env",
            ENV0,
            "--types",
            "0,0.2,0.4,0.6,0.8,1",
            "--q",
            "10",
            "--refund-levels",
            "11",
        ],
        code: 2,
    },
    Case {
        name: "export_plot",
        args: &[
            "export",
            "--table",
            "plot",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/debt_mechanism.json",
            "--format",
            "csv",
        ],
        code: 0,
    },
    Case {
        name: "export_schedule",
        args: &[
            "export",
            "--table",
            "schedule",
            "--env",
            ENV0,
            "--lambda",
            "tests/data/lambda_half.json",
            "--grid",
            "11",
            "--format",
            "csv",
        ],
        code: 0,
    },
    Case {
        name: "export_virtual",
        args: &[
            "export",
            "--table",
            "virtual",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/wasteful.json",
            "--format",
            "csv",
        ],
        code: 0,
    },
    Case {
        name: "export_plot_json",
        args: &[
            "export",
            "--env",
            ENV0,
            "--mechanism",
            "tests/data/debt_mechanism.json",
        ],
        code: 0,
    },
];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn golden_path(case: &Case) -> PathBuf {
    root()
        .join("tests/golden")
        .join(format!("{}.out", case.name))
}

pub fn run(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_samurai"))
        .args(args)
        .current_dir(root())
        .env_remove("SAMURAI_THREADS")
        .output()
        .expect("spawn samurai");
    (out.status.code().unwrap_or(-1), out.stdout)
}

/// Runs a case; `Err` describes the first mismatch.
pub fn check(case: &Case) -> Result<(), String> {
    let (code, stdout) = run(case.args);
    let path = golden_path(case);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &stdout).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if code != case.code {
        return Err(format!(
            "{}: exit code {code}, expected {}",
            case.name, case.code
        ));
    }
    let expected = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected != stdout {
        return Err(format!(
            "{}: output differs from {}",
            case.name,
            Path::new("tests/golden")
                .join(path.file_name().unwrap())
                .display()
        ));
    }
    Ok(())
}
