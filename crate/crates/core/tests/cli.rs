//! End-to-end checks of the `gmidloop` binary: verbs, exit codes, and
//! output shapes.

use std::path::PathBuf;
use std::process::{Command, Output};

use gmidloop::assets;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmidloop"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Assets {
    _dir: tempfile::TempDir,
    netlist: PathBuf,
    spec: PathBuf,
    fixtures: PathBuf,
}

fn write_assets() -> Assets {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    Assets {
        netlist: p("iter1.sp", assets::ITER1_NETLIST),
        spec: p("default.spec", assets::DEFAULT_SPEC),
        fixtures: p("trajectory.fixtures", &assets::trajectory_recorded_metrics()),
        _dir: dir,
    }
}

#[test]
fn lut_build_writes_ten_files_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("luts");
    run_ok(bin().args(["lut-build", "--all-corners", "--out"]).arg(&out_dir));
    let files: Vec<_> = std::fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(files.len(), 10);

    // rebuilding without --force is a config error
    let out = bin()
        .args(["lut-build", "--kind", "nmos", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);

    // --force overwrites cleanly
    run_ok(
        bin()
            .args(["lut-build", "--kind", "nmos", "--force", "--out"])
            .arg(&out_dir),
    );

    // a built file round-trips through the deserializer
    let grid =
        gmidloop::lut::LutGrid::read_from(&out_dir.join("nmos_TT.lut")).unwrap();
    assert_eq!(grid.l_axis.len(), 8);
    assert_eq!(grid.vgs_axis.len(), 51);
}

#[test]
fn lut_query_prints_the_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("luts");
    run_ok(bin().args(["lut-build", "--kind", "nmos", "--out"]).arg(&out_dir));
    let out = run_ok(
        bin()
            .args(["lut-query", "--kind", "nmos", "--l", "0.5", "--ratio", "15", "--luts"])
            .arg(&out_dir),
    );
    let text = stdout(&out);
    assert!(text.contains("gm/Id  14.99"), "{text}");
    assert!(text.contains("id/W"), "{text}");

    // --vgs and --ratio conflict
    let out = bin()
        .args([
            "lut-query", "--kind", "nmos", "--l", "0.5", "--ratio", "15", "--vgs", "0.5",
            "--luts",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn simulate_prints_metrics_and_verdicts() {
    let a = write_assets();
    let out = run_ok(
        bin()
            .arg("simulate")
            .arg("--netlist")
            .arg(&a.netlist)
            .arg("--spec")
            .arg(&a.spec),
    );
    let text = stdout(&out);
    for name in ["GAIN", "GBW", "PM", "SR", "IDC"] {
        assert!(text.contains(name), "{text}");
    }
    assert!(text.contains("PASS") || text.contains("FAIL"));
}

#[test]
fn optimize_replay_on_fixtures_reproduces_the_run() {
    let a = write_assets();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.log");
    let out = run_ok(
        bin()
            .arg("optimize")
            .arg("--netlist")
            .arg(&a.netlist)
            .arg("--spec")
            .arg(&a.spec)
            .args(["--strategy", "replay", "--backend", "stub-fixtures"])
            .arg("--fixtures")
            .arg(&a.fixtures)
            .arg("--log")
            .arg(&log),
    );
    let text = stdout(&out);
    assert!(text.contains("status: converged"), "{text}");
    assert!(text.contains("C1      0.900 pF"), "{text}");
    // recorded TT metrics of the final state echoed in the table
    assert!(text.contains("GAIN 62.60 dB"), "{text}");

    // six distinct iterations: five TT, one corner fix
    let report = run_ok(bin().arg("report").arg("--log").arg(&log));
    let rtext = stdout(&report);
    assert!(rtext.contains("iterations: 6 (TT:5, corner:1)"), "{rtext}");
    assert!(rtext.contains("status: converged"), "{rtext}");
    assert!(rtext.contains("FOM (gbw_cl_over_idc)"), "{rtext}");
    assert!(rtext.contains("FoMA"), "{rtext}");
    assert!(rtext.contains("worst case across corners"), "{rtext}");

    // --records mode emits the run-log record format
    let records = run_ok(bin().arg("report").arg("--records").arg("--log").arg(&log));
    let rec_text = stdout(&records);
    let mut lines = rec_text.lines();
    assert_eq!(lines.next().unwrap(), "gmidrun v1");
    let parsed: Vec<gmidloop::orchestrator::IterationRecord> = lines
        .map(|l| serde_json::from_str(l).expect("record line parses"))
        .collect();
    assert_eq!(parsed.len(), 7); // 5 TT + 2 corner evaluations
}

#[test]
fn optimize_is_deterministic() {
    let a = write_assets();
    let go = || {
        let out = run_ok(
            bin()
                .arg("optimize")
                .arg("--netlist")
                .arg(&a.netlist)
                .arg("--spec")
                .arg(&a.spec)
                .args(["--strategy", "gmid"]),
        );
        stdout(&out)
    };
    assert_eq!(go(), go());
}

#[test]
fn optimize_rules_on_unreachable_gain_exits_stalled() {
    let a = write_assets();
    let spec = a.netlist.parent().unwrap().join("gain_limited.spec");
    std::fs::write(&spec, assets::GAIN_LIMITED_SPEC).unwrap();
    let out = bin()
        .arg("optimize")
        .arg("--netlist")
        .arg(&a.netlist)
        .arg("--spec")
        .arg(&spec)
        .args(["--strategy", "rules", "--max-iters", "80"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 4, "{}", stdout(&out));
    assert!(stdout(&out).contains("status: stalled"));
}

#[test]
fn optimize_budget_exhaustion_exits_3() {
    let a = write_assets();
    let spec = a.netlist.parent().unwrap().join("gain_limited.spec");
    std::fs::write(&spec, assets::GAIN_LIMITED_SPEC).unwrap();
    // budget far below the point where the rules strategist cycles
    let out = bin()
        .arg("optimize")
        .arg("--netlist")
        .arg(&a.netlist)
        .arg("--spec")
        .arg(&spec)
        .args(["--strategy", "rules", "--max-iters", "2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3, "{}", stdout(&out));
}

#[test]
fn optimize_llm_without_credential_exits_2_before_iterating() {
    let a = write_assets();
    let dir = tempfile::tempdir().unwrap();
    let chat = dir.path().join("chat.conf");
    std::fs::write(
        &chat,
        "url = http://127.0.0.1:1/v1/chat\nmodel = test\ncredential_env = GMIDLOOP_CLI_TEST_KEY\n",
    )
    .unwrap();
    let log = dir.path().join("run.log");
    let out = bin()
        .arg("optimize")
        .arg("--netlist")
        .arg(&a.netlist)
        .arg("--spec")
        .arg(&a.spec)
        .args(["--strategy", "llm"])
        .arg("--llm-config")
        .arg(&chat)
        .arg("--log")
        .arg(&log)
        .env_remove("GMIDLOOP_CLI_TEST_KEY")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("GMIDLOOP_CLI_TEST_KEY"),
        "stderr should name the missing variable"
    );
    // no iteration ran
    assert!(!log.exists());

    // llm strategies without --llm-config are a usage error too
    let out = bin()
        .arg("optimize")
        .arg("--netlist")
        .arg(&a.netlist)
        .arg("--spec")
        .arg(&a.spec)
        .args(["--strategy", "llm-no-gmid"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn report_rejects_empty_and_corrupt_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.log");
    std::fs::write(&log, "").unwrap();
    let out = bin().arg("report").arg("--log").arg(&log).output().unwrap();
    assert_eq!(exit_code(&out), 1);

    std::fs::write(&log, "gmidrun v1\nnot json\nnot json either\n").unwrap();
    let out = bin().arg("report").arg("--log").arg(&log).output().unwrap();
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn ablate_emits_partial_results_without_credentials() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("ablation.jsonl");
    let out = run_ok(bin().arg("ablate").arg("--out").arg(&table));
    let text = stdout(&out);
    assert!(text.contains("gmid"), "{text}");
    assert!(text.contains("rules"), "{text}");
    assert!(text.contains("skipped"), "{text}");

    // machine-readable rows parse and carry the qualitative outcome
    let rows: Vec<serde_json::Value> = std::fs::read_to_string(&table)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 4);
    let by_name = |name: &str| {
        rows.iter()
            .find(|r| r["strategist"] == name)
            .unwrap_or_else(|| panic!("missing row {name}"))
    };
    assert_eq!(by_name("gmid")["status"], "converged");
    assert_eq!(by_name("rules")["status"], "stalled");
    assert!(by_name("rules")["detail"]
        .as_str()
        .unwrap()
        .contains("cycle"));
    assert_eq!(by_name("llm")["status"], "skipped");
    assert_eq!(by_name("llm-no-gmid")["status"], "skipped");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = bin().args(["report", "--log", "x", "--bogus"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    let out = bin().arg("no-such-verb").output().unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn simulate_missing_netlist_is_a_usage_error() {
    let out = bin()
        .args(["simulate", "--netlist", "/does/not/exist.sp"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}
