use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::invoke;

struct Output {
    code: u8,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

impl Output {
    fn success(&self) -> bool {
        self.code == 0
    }
}

fn paper_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances/paper.json")
}

fn kbuild(args: &[&str]) -> Output {
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let argv = std::iter::once("kbuild").chain(args.iter().copied());
    let code = invoke(argv, &mut stdout, &mut stderr);
    Output { code, stdout, stderr }
}

fn with_paper(sub: &str, rest: &[&str]) -> Output {
    let p = paper_path();
    let mut args = vec![sub, "--instance", p.to_str().unwrap()];
    args.extend_from_slice(rest);
    kbuild(&args)
}

fn fields(out: &Output) -> BTreeMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn steady_on_reference_distribution() {
    let out = with_paper("steady", &["--dist", "39,30,31"]);
    assert!(out.success(), "{}", stderr(&out));
    let f = fields(&out);
    assert_eq!(f["dist"], "39,30,31");
    assert!((num(&f["total"]) - 271.9).abs() < 0.05);
    assert!((num(&f["rho"]) - 0.50).abs() < 0.01);
    let k: Vec<f64> = f["K"].split(',').map(num).collect();
    assert_eq!(k.len(), 3);
    assert!((k.iter().sum::<f64>() - num(&f["total"])).abs() < 1e-9);
}

#[test]
fn numbers_use_twelve_significant_digits() {
    let out = with_paper("steady", &["--dist", "39,30,31"]);
    let total = &fields(&out)["total"];
    let digits = total.chars().filter(|c| c.is_ascii_digit()).count();
    assert_eq!(digits, 12, "{total}");
}

#[test]
fn infeasible_distribution_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hot.json");
    std::fs::write(
        &path,
        r#"{"n": 100, "m": 3, "T": [[0.02, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], "r": [1, 1, 1]}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let out = kbuild(&["steady", "--instance", p, "--dist", "100,0,0"]);
    assert_eq!(out.code, 1);
    let err = stderr(&out);
    assert!(err.contains("--dist"), "{err}");
    assert!(err.contains("ρ") || err.contains("rho"), "{err}");
    assert!(err.contains("= 2") && err.contains("0.999999999"), "{err}");

    let out = kbuild(&["validate", "--instance", p, "--dist", "100,0,0"]);
    assert_eq!(out.code, 1);
    assert_eq!(fields(&out)["feasible"], "false");

    // still fine away from the hot category
    let out = kbuild(&["steady", "--instance", p, "--dist", "0,50,50"]);
    assert!(out.success());
}

#[test]
fn argument_errors_exit_two_and_name_the_flag() {
    let cases: [(&[&str], &str); 7] = [
        (&["--dist", "39,30,30"], "--dist"),
        (&["--dist", "39,30"], "--dist"),
        (&["--dist", "39,-1,62"], "--dist"),
        (&["--dist", "a,b,c"], "--dist"),
        (&["--dist", "39,30,31", "--weights", "1,x,1"], "--weights"),
        (&["--dist", "39,30,31", "--weights", "1,1"], "--weights"),
        (&["--dist", "39,30,31", "--weights", "1,-1,1"], "--weights"),
    ];
    for (rest, flag) in cases {
        let out = with_paper("steady", rest);
        assert_eq!(out.code, 2, "{rest:?}");
        assert!(stderr(&out).contains(flag), "{rest:?}: {}", stderr(&out));
    }

    let out = with_paper("simulate", &["--dist", "39,30,31", "--schedule", "uniform:0"]);
    assert_eq!(out.code, 2);
    assert!(stderr(&out).contains("--schedule"));

    let out = with_paper("optimize", &["--start", "100,0"]);
    assert_eq!(out.code, 2);
    assert!(stderr(&out).contains("--start"));

    let out = with_paper("optimize", &["--starts", "0"]);
    assert_eq!(out.code, 2);
    assert!(stderr(&out).contains("--starts"));

    let out = kbuild(&["steady", "--instance", "/no/such/file.json", "--dist", "1"]);
    assert_eq!(out.code, 2);
    assert!(stderr(&out).contains("--instance"));

    let out = kbuild(&["steady"]);
    assert_eq!(out.code, 2);
}

#[test]
fn malformed_instance_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n": 3, "m": 2, "T": [[0.1, 0.1], [0.1, -0.2]], "r": [1, 1]}"#).unwrap();
    let out = kbuild(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.code, 2);
    assert!(stderr(&out).contains("T[1][1]"), "{}", stderr(&out));
}

#[test]
fn optimize_and_brute_agree() {
    let brute = with_paper("brute", &[]);
    assert!(brute.success());
    let b = fields(&brute);
    assert_eq!(b["evaluated"], "5151");
    assert_eq!(b["infeasible"], "0");

    let single = fields(&with_paper("optimize", &["--start", "34,33,33"]));
    let multi = fields(&with_paper("optimize", &["--starts", "20", "--seed", "3"]));
    assert_eq!(single["best"], b["best"]);
    assert_eq!(multi["best"], b["best"]);
    assert_eq!(single["objective"], b["objective"]);
    assert_eq!(multi["agreement"], "1");
    assert_eq!(single["outcome"], "local-optimum");
}

#[test]
fn decompose_parts_add_up() {
    let f = fields(&with_paper("decompose", &["--dist", "39,30,31"]));
    let parse = |k: &str| f[k].split(',').map(num).collect::<Vec<_>>();
    let (internal, triggered, total) = (parse("internal"), parse("triggered"), parse("total"));
    assert_eq!(internal, vec![39.0, 30.0, 31.0]);
    for i in 0..3 {
        assert!((internal[i] + triggered[i] - total[i]).abs() < 1e-9);
    }
    let ratio = num(&f["triggered_ratio"]);
    let want = triggered.iter().sum::<f64>() / total.iter().sum::<f64>();
    assert!((ratio - want).abs() < 1e-10);
}

#[test]
fn simulate_and_sweep_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let out = with_paper(
        "simulate",
        &["--dist", "39,30,31", "--schedule", "uniform:5", "--out", traj.to_str().unwrap()],
    );
    assert!(out.success(), "{}", stderr(&out));
    let f = fields(&out);
    assert_eq!(f["converged"], "true");
    assert!((num(&f["total"]) - 271.9).abs() < 0.05);
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("t,k_1,k_2,k_3,cumulative_total\n"));

    // without --out the CSV goes to stdout
    let out = with_paper("simulate", &["--dist", "39,30,31"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("t,k_1,k_2,k_3,cumulative_total\n"));

    let surface = dir.path().join("surface.csv");
    let f = fields(&with_paper("sweep", &["--out", surface.to_str().unwrap()]));
    assert_eq!(f["records"], "5151");
    assert_eq!(f["feasible"], "5151");
    assert_eq!(f["max"], "41,38,21");
    let lines = std::fs::read_to_string(&surface).unwrap().lines().count();
    assert_eq!(lines, 5152);
}

#[test]
fn sweep_rejects_other_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.json");
    std::fs::write(&path, r#"{"n": 4, "m": 2, "T": [[0.1, 0.1], [0.1, 0.1]], "r": [1, 1]}"#).unwrap();
    let out = kbuild(&["sweep", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.code, 2);
    assert!(stderr(&out).contains("--instance"));
}

#[test]
fn weights_change_the_objective() {
    let plain = fields(&with_paper("brute", &[]));
    let first_only = fields(&with_paper("brute", &["--weights", "1,0,0"]));
    assert_ne!(plain["best"], first_only["best"]);
    let f = fields(&with_paper("steady", &["--dist", "39,30,31", "--weights", "1,0,0"]));
    let k0 = num(f["K"].split(',').next().unwrap());
    assert!((num(&f["objective"]) - k0).abs() < 1e-9);
}

#[test]
fn print_config_lists_seed_and_tolerances() {
    let out = with_paper("simulate", &["--dist", "39,30,31", "--tol", "1e-10", "--print-config"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("# config subcommand=simulate"));
    assert!(text.contains("# config tol=1e-10"));
    assert!(text.contains("# config schedule=impulse"));
    let out = with_paper("optimize", &["--seed", "5", "--print-config"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("# config seed=5"));
}

#[test]
fn optimize_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = with_paper("optimize", &["--start", "100,0,0", "--trace", trace.to_str().unwrap()]);
    assert!(out.success());
    let f = fields(&out);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,n1,n2,n3,objective,rho"));
    assert_eq!(lines.next().unwrap().split(',').nth(1), Some("100"));
    assert_eq!(lines.count(), f["moves"].parse::<usize>().unwrap());
}
