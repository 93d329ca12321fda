use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_probecheck"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn probecheck")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn gen(dir: &Path) {
    let o = run(&["gen-fixtures", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn files(dir: &Path, name: &str) -> [String; 3] {
    [
        dir.join(format!("{name}.json")),
        dir.join(format!("{name}.labels.json")),
        dir.join(format!("{name}.stim.jsonl")),
    ]
    .map(|p| p.to_str().unwrap().to_string())
}

#[test]
fn fig5_transition_run_exits_with_findings() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let [n, l, s] = files(dir.path(), "fig5");
    let report = dir.path().join("fig5.report.jsonl");
    let o = run(&[
        "verify",
        "--netlist",
        &n,
        "--labels",
        &l,
        "--stimuli",
        &s,
        "--glitches=false",
        "--transitions=true",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let text = std::fs::read_to_string(&report).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(summary["leaking_cycles"], 1);
    let leaks: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["verdict"] == "leaks")
        .collect();
    assert_eq!(leaks.len(), 1);
    assert_eq!(leaks[0]["wire"], "i1");
    assert_eq!(leaks[0]["cycle"], 1);
}

#[test]
fn dom_first_order_is_clean_in_value_model() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let [n, l, s] = files(dir.path(), "dom_and_d1");
    let o = run(&[
        "verify", "--netlist", &n, "--labels", &l, "--stimuli", &s, "--model", "0,0",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["verify", "--no-such-flag"])), 2);
    assert_eq!(code(&run(&["verify", "--fixture", "nope"])), 2);
    assert_eq!(code(&run(&["verify", "--fixture", "fig5", "--model", "2,0"])), 2);
    assert_eq!(
        code(&run(&["verify", "--netlist", "/nonexistent.json", "--labels", "x", "--stimuli", "y"])),
        2
    );
    // Over-approximation needs glitches and transitions.
    assert_eq!(
        code(&run(&["verify", "--fixture", "fig5", "--model", "1,0", "--overapprox"])),
        2
    );
}

#[test]
fn simulation_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let [n, l, _] = files(dir.path(), "fig5");
    // A frame that drives only one of the two inputs.
    let stim = dir.path().join("short.stim.jsonl");
    std::fs::write(
        &stim,
        r#"{"cycle":0,"inputs":{"i0":{"const":"0b0"}}}"#.to_string() + "\n",
    )
    .unwrap();
    let o = run(&["verify", "--netlist", &n, "--labels", &l, "--stimuli", stim.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for (i, jobs) in ["1", "1", "4"].iter().enumerate() {
        let p = dir.path().join(format!("r{i}.jsonl"));
        let o = run(&[
            "verify",
            "--fixture",
            "isw_and_d2",
            "--model",
            "rr1sw",
            "--jobs",
            jobs,
            "--report",
            p.to_str().unwrap(),
        ]);
        assert!(matches!(code(&o), 0 | 1));
        reports.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn gadget_subcommands() {
    let o = run(&["ni", "--fixture", "dom_and_d2"]);
    assert_eq!(code(&o), 0);
    let o = run(&["sni", "--fixture", "dom_and_d2", "--glitches"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("probes:"));
    let o = run(&["ni", "--fixture", "isw_and_d2", "--glitches"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn order_subcommand_counts_duplets() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("order.jsonl");
    let o = run(&[
        "order",
        "--fixture",
        "dom_and_d1",
        "--model",
        "0,0",
        "--granularity",
        "bit",
        "--order",
        "2",
        "--report",
        p.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let text = std::fs::read_to_string(&p).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let mut total = 0u128;
    for g in last["groups"].as_array().unwrap() {
        let p = g["positions"].as_u64().unwrap() as u128;
        let n: u128 = g["duplets"].as_str().unwrap().parse().unwrap();
        assert_eq!(n, p * (p - 1) / 2);
        total += n;
    }
    assert_eq!(last["checked"].as_str().unwrap().parse::<u128>().unwrap(), total);
}

#[test]
fn generated_fixtures_round_trip_through_ni() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let [n, l, s] = files(dir.path(), "dom_and_d1");
    let o = run(&["sni", "--netlist", &n, "--labels", &l, "--stimuli", &s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}
