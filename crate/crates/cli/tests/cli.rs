use std::fs;
use std::process::{Command, Output};

fn mlsda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlsda")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn window_at_half_rate() {
    let o = mlsda(&["window", "--channel", "bsc", "--epsilon", "0.045", "--rate-bits", "0.5", "--m", "6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let ratio: f64 = value(&text, "ratio").parse().unwrap();
    assert!((ratio - 2.0).abs() < 0.01);
    let dmin: usize = value(&text, "delta_min").parse().unwrap();
    assert_eq!(dmin, (ratio * 7.0).floor() as usize + 1);
}

#[test]
fn exponents_table() {
    let o = mlsda(&["exponents", "--epsilon", "0.095", "--rate-bits", "r0", "--m", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["R0", "C", "E_c", "E_el", "E_r", "window_ratio", "delta_min", "trunc_ratio", "tau_min"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{key} missing");
    }
    assert_eq!(value(&text, "delta_min"), "10");
    let dmc = mlsda(&["exponents", "--channel", "dmc", "--transition", "1,0;0,1", "--rate-nats", "0.3", "--m", "2"]);
    assert!(dmc.status.success(), "{}", String::from_utf8_lossy(&dmc.stderr));
}

#[test]
fn encode_then_decode() {
    let o = mlsda(&["encode", "--code", "554,774", "--m", "6", "--message", "1100101"]);
    assert!(o.status.success());
    let cw = stdout(&o).trim().to_string();
    assert_eq!(cw.len(), 2 * (7 + 6));

    let mut flipped: Vec<char> = cw.chars().collect();
    flipped[3] = if flipped[3] == '0' { '1' } else { '0' };
    let noisy: String = flipped.into_iter().collect();
    for extra in [&[][..], &["--viterbi"][..], &["--delta", "15", "--openmax", "64"][..]] {
        let mut args = vec!["decode", "--code", "554,774", "--m", "6", "--hard", &noisy];
        args.extend_from_slice(extra);
        let o = mlsda(&args);
        assert!(o.status.success());
        let text = stdout(&o);
        assert_eq!(value(&text, "message"), "1100101");
        assert_eq!(value(&text, "metric"), "1");
    }
}

#[test]
fn decode_llr_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.txt");
    // codeword of message 1 under (7, 5): 11 10 11, with mild noise
    fs::write(&path, "-2.0 -1.5\n-0.8, 1.2\n-1.1 0.3\n").unwrap();
    let o = mlsda(&["decode", "--code", "7,5", "--m", "2", "--llr", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "message"), "1");
    assert_eq!(value(&text, "codeword"), "111011");
    assert!(value(&text, "metric").parse::<f64>().unwrap() == 0.3);
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = mlsda(&[
        "simulate",
        "--code",
        "554,774",
        "--n",
        "2",
        "--m",
        "6",
        "--L",
        "50",
        "--channel",
        "bsc",
        "--ebn0",
        "3:4:1",
        "--delta",
        "15,inf",
        "--trials",
        "40",
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "code_id,ebn0_db,epsilon,delta,tau,openmax,trials,info_bits,bit_errors,ber,decode_failures,\
         avg_branch_computations_per_bit,p999_stack_size,mean_peak_stack,wall_seconds,seed"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        r#"{"code": "554,774", "m": 6, "L": 30, "epsilon": [0.05], "delta": [12, "inf"], "trials": 5, "seed": 1}"#,
    )
    .unwrap();
    let o = mlsda(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    // the quoted code id holds one comma, so trials is the eighth piece
    assert!(rows.iter().all(|r| r.starts_with("\"554,774\"") && r.split(',').nth(7) == Some("7")));
}

#[test]
fn errors_exit_nonzero() {
    let o = mlsda(&["simulate", "--code", "554,774", "--m", "6", "--L", "20", "--epsilon", "0.05", "--trials", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));

    let o = mlsda(&["window", "--epsilon", "0.05", "--m", "6", "--frobnicate"]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());

    let o = mlsda(&[
        "simulate",
        "--code",
        "554,774",
        "--m",
        "6",
        "--L",
        "20",
        "--epsilon",
        "0.05",
        "--trials",
        "2",
        "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("x.csv"));

    let o = mlsda(&["encode", "--code", "554,774", "--n", "3", "--m", "6", "--message", "1"]);
    assert!(!o.status.success());
    let o = mlsda(&["exponents", "--config", "/nonexistent.json", "--m", "6"]);
    assert!(!o.status.success());
}
