//! The `relax-rd` binary: exit codes, output files and their format.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relaxrd::output::{Table, REPORT_HEADER};
use tempfile::TempDir;

fn relax_rd(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_relax-rd"));
    cmd.args(args).env_remove("RELAXRD_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const HEAT: &str =
    "problem = \"heat\"\nm = 24\nreconstruction = \"eno3\"\nrk = 2\nt_end = 0.002\nsnapshots = [0.0, 0.001, 0.002]\n";

const STUDY: &str = "problem = \"heat\"\nm = 12\nreconstruction = \"eno3\"\nrk = 2\nt_end = 0.001\nphi = 24.0\n\n[study]\nm = [12, 36]\nreference = \"exact\"\nschemes = [\"eno2+rk1\", \"weno3+rk2\"]\n";

#[test]
fn run_writes_one_snapshot_per_time() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "heat.toml", HEAT);
    let out = dir.path().join("out");
    let res = relax_rd(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    for (idx, t) in [0.0, 0.001, 0.002].iter().enumerate() {
        let text = fs::read_to_string(out.join(format!("snap_{idx}.csv"))).unwrap();
        assert!(text.starts_with("# t="), "{text}");
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.time(), Some(*t));
        assert_eq!(table.columns, ["x", "u"]);
        assert_eq!(table.rows.len(), 24);
        for cell in table.rows.iter().flatten() {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{cell}");
        }
    }
    // No temporary files are left behind.
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| n.starts_with("snap_")), "{names:?}");
}

#[test]
fn two_dimensional_snapshots_list_both_coordinates() {
    let dir = TempDir::new().unwrap();
    let text = "problem = \"extinction\"\nm = 12\nreconstruction = \"eno2\"\nrk = 1\nt_end = 0.01\n";
    let cfg = write_config(dir.path(), "ext.toml", text);
    let out = dir.path().join("out");
    let res = relax_rd(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let table = Table::parse(&fs::read_to_string(out.join("snap_0.csv")).unwrap()).unwrap();
    assert_eq!(table.columns, ["x", "y", "u"]);
    assert_eq!(table.rows.len(), 144);
}

#[test]
fn study_writes_report_and_timing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "study.toml", STUDY);
    let out = dir.path().join("out");
    let res = relax_rd(
        &[
            "study",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(REPORT_HEADER));
    let table = Table::parse(&text).unwrap();
    let schemes: Vec<&str> = table.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(schemes, ["eno2+rk1", "eno2+rk1", "weno3+rk2", "weno3+rk2"]);
    let rates = table.column("rate_l1").unwrap();
    assert_eq!(rates[0], None);
    assert!(rates[1].unwrap() > 1.0, "{rates:?}");
    let timing = Table::parse(&fs::read_to_string(out.join("timing.csv")).unwrap()).unwrap();
    assert_eq!(timing.columns, ["scheme", "m", "wall_time"]);
    assert_eq!(timing.rows.len(), 4);
}

#[test]
fn oracle_reports_the_deviation() {
    let dir = TempDir::new().unwrap();
    let text =
        "problem = \"heat\"\nm = 16\nreconstruction = \"constant\"\nrk = 1\nt_end = 0.01\n\n[oracle]\nsteps = 2\n";
    let cfg = write_config(dir.path(), "oracle.toml", text);
    let out = dir.path().join("out");
    let res = relax_rd(
        &[
            "oracle",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let table = Table::parse(&fs::read_to_string(out.join("oracle.csv")).unwrap()).unwrap();
    assert_eq!(table.columns, ["m", "steps", "max_deviation"]);
    assert_eq!(table.column("steps").unwrap(), vec![Some(2.0)]);
    assert!(table.column("max_deviation").unwrap()[0].unwrap() > 0.0);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "study.toml", STUDY);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let res = relax_rd(
            &[
                "study",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ],
            &[],
        );
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        fs::read(out.join("report.csv")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "4"));

    let heat = write_config(dir.path(), "heat.toml", HEAT);
    let snaps = |name: &str| {
        let out = dir.path().join(name);
        let res = relax_rd(
            &[
                "run",
                "--config",
                heat.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(res.status.code(), Some(0));
        (0..3)
            .map(|i| fs::read(out.join(format!("snap_{i}.csv"))).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(snaps("c"), snaps("d"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "heat.toml", HEAT);
    let out = dir.path().join("out");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(relax_rd(&args, &[("RELAXRD_THREADS", "2")]).status.code(), Some(0));
    let bad = relax_rd(&args, &[("RELAXRD_THREADS", "many")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(
        stderr(&bad).contains("RELAXRD_THREADS") || stderr(&bad).contains("threads"),
        "{}",
        stderr(&bad)
    );
}

#[test]
fn output_directory_falls_back_to_the_config() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-config");
    let text = format!("{HEAT}out = \"{}\"\n", target.display());
    let cfg = write_config(dir.path(), "heat.toml", &text);
    let res = relax_rd(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    assert!(target.join("snap_2.csv").exists());
}

#[test]
fn config_problems_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.toml");
    let res = relax_rd(&["run", "--config", missing.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("nowhere.toml"), "{}", stderr(&res));

    let cases = [
        (HEAT.replace("\"eno3\"", "\"eno7\""), "order out of range 2..6"),
        (format!("{HEAT}colour = 3\n"), "line 7"),
        (HEAT.replace("m = 24", "m = 1"), "cells"),
        (HEAT.replace("t_end = 0.002", "t_end = -1.0"), "t_end"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), "bad.toml", &text);
        let res = relax_rd(&["run", "--config", cfg.to_str().unwrap()], &[]);
        assert_eq!(res.status.code(), Some(1), "{text}");
        assert!(
            stderr(&res).contains(needle),
            "expected `{needle}` in: {}",
            stderr(&res)
        );
    }

    let cfg = write_config(dir.path(), "heat.toml", HEAT);
    let res = relax_rd(&["study", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("[study]"));

    assert_eq!(relax_rd(&["explode"], &[]).status.code(), Some(1));
    assert_eq!(relax_rd(&["run"], &[]).status.code(), Some(1));
    assert_eq!(relax_rd(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn solver_faults_exit_with_two() {
    let dir = TempDir::new().unwrap();
    // A relaxation speed far too small for the step makes the scheme blow up.
    let text = "problem = \"heat\"\nm = 200\nreconstruction = \"eno3\"\nrk = 2\nt_end = 0.5\nphi = 1e-3\ncfl = 2.0\n";
    let cfg = write_config(dir.path(), "blowup.toml", text);
    let out = dir.path().join("out");
    let res = relax_rd(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));

    // An output path that is a file cannot be used as a directory.
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let cfg = write_config(dir.path(), "heat.toml", HEAT);
    let res = relax_rd(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            file.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
}
