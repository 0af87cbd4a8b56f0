use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("dppca-bench-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn presets_are_listed() {
    let out = bench().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), ["fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig2c"]);
}

#[test]
fn verify_passes() {
    let out = bench().arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bench().args(["run", "--preset", "fig9"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bench().arg("run").output().unwrap().status.code(), Some(2));
    assert_eq!(bench().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "n = 100\nwhat = 1\n").unwrap();
    let out = bench().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
}

#[test]
fn run_writes_deterministic_csv() {
    let dir = scratch("run");
    let cfg = dir.join("tiny.cfg");
    std::fs::write(
        &cfg,
        "algorithms = exact, dp-gauss-1\nn = 200\nd = 5\nk = 2\ntrials = 2\n\n[dp-gauss-1]\nclip_c = 2\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2"].into_iter().enumerate() {
        let path = dir.join(format!("out{i}.csv"));
        let status = bench()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&path)
            .args(["--seed", "5", "--threads", threads])
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        let text = std::fs::read_to_string(&path).unwrap();
        let stripped: Vec<String> = text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect();
        outputs.push(stripped);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].len(), 1 + 2 * 2);
    assert!(outputs[0][0].starts_with("generator,algorithm,n,d,k,sigma,gap,epsilon,delta,trial,seed,zeta2"));
}
