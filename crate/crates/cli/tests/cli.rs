use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_collapse-lab"));
    c.env_remove("COLLAPSE_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const BALL: &str = r#"
name = "ball"
model = "dp"
displacements = ["1e-14 m", "0 m"]

[geometry.ball]
mass = "1 g"
radius = "0.5 cm"

[resolution]
sigma = "1e-3 cm"
"#;

const LATTICE: &str = r#"
name = "solid"
model = "dp"
displacements = ["1e-16 m"]

[geometry.lattice]
a = "1 angstrom"
dims = [2, 2, 2]
nucleusMass = "16 u"
sigmaNuc = "1e-14 m"

[resolution]
sigma = "1e-14 m"

[mc]
samples = 300
seed = 5
spreadWidths = ["0 m", "1e-13 m", "1e-12 m"]
"#;

/// Header and rows of a CSV table, skipping `#` lines; every row must
/// match the header width.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows: Vec<Vec<String>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn config(dir: &TempDir, text: &str) -> String {
    write(dir, "scenario.toml", text)
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn rate_reports_each_displacement_with_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BALL);
    let o = run(&["--config", &cfg, "rate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("hbar=") && text.contains("kappa=0.5"));
    let (h, rows) = table(&text);
    assert_eq!(rows.len(), 2);
    let rate = rows[0][column(&h, "rate_hz")].parse::<f64>().unwrap();
    let lead = rows[0][column(&h, "leading_order_rate_hz")]
        .parse::<f64>()
        .unwrap();
    assert!(
        rate > 0.0 && (rate / lead - 1.0).abs() < 0.01,
        "{rate} vs {lead}"
    );
    assert_eq!(rows[0][column(&h, "heuristic")], "true");
    assert_eq!(rows[0][column(&h, "model")], "dp");
    assert_eq!(rows[0][column(&h, "profile")], "gaussian");
    assert!(!rows[0][column(&h, "method")].is_empty());
    assert_eq!(rows[1][column(&h, "lifetime_s")], "inf");
}

#[test]
fn rate_dx_override_replaces_the_list() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BALL);
    let (_, rows) = table(&stdout(&run(&[
        "--config", &cfg, "rate", "--dx", "2e-14 m",
    ])));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 2e-14);
}

#[test]
fn config_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let empty = config(&dir, &BALL.replace(r#"["1e-14 m", "0 m"]"#, "[]"));
    assert_eq!(code(&run(&["--config", &empty, "rate"])), 1);
    let unknown = config(&dir, &format!("{BALL}\ncolour = \"red\"\n"));
    assert_eq!(code(&run(&["--config", &unknown, "rate"])), 1);
    let unitless = config(&dir, &BALL.replace("\"0.5 cm\"", "\"0.5\""));
    assert_eq!(code(&run(&["--config", &unitless, "rate"])), 1);
    assert_eq!(code(&run(&["--config", "/nonexistent/x.toml", "rate"])), 1);
    assert_eq!(code(&run(&["rate"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn dx_sweep_is_quadratic() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BALL);
    // 1e-4 R to 1e-2 R for R = 0.5 cm.
    let o = run(&[
        "--config", &cfg, "sweep", "--param", "dx", "--from", "5e-7 m", "--to", "5e-5 m",
        "--points", "20", "--scale", "log",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows.len(), 20);
    let (dx, l2) = (column(&h, "dx_m"), column(&h, "catness_j"));
    let x: Vec<f64> = rows
        .iter()
        .map(|r| r[dx].parse::<f64>().unwrap().ln())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r[l2].parse::<f64>().unwrap().ln())
        .collect();
    assert!(x.windows(2).all(|w| w[1] > w[0]));
    let s = slope(&x, &y);
    assert!((s - 2.0).abs() < 0.01, "slope {s}");
}

#[test]
fn single_point_sweep_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BALL);
    for scale in ["linear", "log"] {
        let o = run(&[
            "--config", &cfg, "sweep", "--param", "sigma", "--from", "1e-5 m", "--to", "1e-4 m",
            "--points", "1", "--scale", scale,
        ]);
        assert_eq!(code(&o), 0);
        let (h, rows) = table(&stdout(&o));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][column(&h, "sigma_m")].parse::<f64>().unwrap(), 1e-5);
    }
}

#[test]
fn bad_ranges_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BALL);
    let base = ["--config", &cfg, "sweep", "--param", "dx"];
    let cases: [&[&str]; 4] = [
        &["--from", "1e-5 m", "--to", "1e-6 m"],
        &["--from", "0 m", "--to", "1e-6 m", "--scale", "log"],
        &["--from", "1e-6 m", "--to", "1e-5 m", "--points", "0"],
        &["--from", "1e-6 m"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        assert_eq!(code(&run(&args)), 1, "{extra:?}");
    }
}

#[test]
fn spread_width_sweep_emits_the_regime_table() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, LATTICE);
    let o = run(&["--config", &cfg, "sweep", "--param", "spread-width"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = table(&stdout(&o));
    assert_eq!(
        h,
        [
            "width_m",
            "correct_rate_hz",
            "correct_stderr_hz",
            "naive_rate_hz",
            "valid"
        ]
    );
    assert_eq!(rows.len(), 3);
    let correct: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let naive: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(correct[0], naive[0]);
    for i in 1..3 {
        assert!((correct[i] / correct[0] - 1.0).abs() < 1e-6);
        assert!(naive[i] < 1e-3 * correct[i]);
        assert_eq!(rows[i][4], "true");
    }
    // Spread sweeps need a lattice.
    let ball = config(&dir, BALL);
    assert_eq!(
        code(&run(&[
            "--config",
            &ball,
            "sweep",
            "--param",
            "spreadWidth"
        ])),
        1
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, LATTICE);
    let args = [
        "--config",
        &cfg,
        "--seed",
        "11",
        "sweep",
        "--param",
        "spread-width",
    ];
    let one = bin().args(args).arg("--threads").arg("1").output().unwrap();
    let env = bin()
        .args(args)
        .env("COLLAPSE_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, env.stdout);
    assert!(stdout(&one).contains("seed=11"));
}

#[test]
fn out_flag_writes_a_file() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BALL);
    let out = dir.path().join("rates.csv");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap(), "compare"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let (h, rows) = table(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(h.contains(&"csl_rate_hz".to_string()));
    for r in &rows {
        for (i, v) in r.iter().enumerate() {
            if h[i].ends_with("_m") || h[i].ends_with("_j") || h[i].ends_with("_hz") {
                v.parse::<f64>().unwrap();
            }
        }
    }
}

fn write_grid(path: &Path, n: usize, edge: f64, rho: f64) {
    let mut b = Vec::new();
    b.extend_from_slice(b"DPGRID01");
    for _ in 0..3 {
        b.extend_from_slice(&(n as u32).to_le_bytes());
    }
    b.extend_from_slice(&0u32.to_le_bytes());
    let origin = -0.5 * n as f64 * edge;
    for _ in 0..3 {
        b.extend_from_slice(&origin.to_le_bytes());
    }
    b.extend_from_slice(&edge.to_le_bytes());
    b.extend_from_slice(&[0u8; 8]);
    let c = n as f64 / 2.0 - 0.5;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let r2 = [i, j, k]
                    .iter()
                    .map(|&q| (q as f64 - c).powi(2))
                    .sum::<f64>();
                let v = if r2 < (n as f64 / 4.0).powi(2) {
                    rho
                } else {
                    0.0
                };
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    std::fs::write(path, b).unwrap();
}

#[test]
fn grid_file_geometry_runs_on_the_grid_path() {
    let dir = TempDir::new().unwrap();
    write_grid(&dir.path().join("blob.dpgrid"), 16, 1e-3, 1000.0);
    let text = r#"
name = "grid"
model = "dp"
displacements = ["1 mm"]

[geometry.gridFile]
path = "blob.dpgrid"

[resolution]
sigma = "3 mm"
"#;
    let cfg = config(&dir, text);
    let o = run(&["--config", &cfg, "rate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("geometry=gridFile"));
    let (h, rows) = table(&text);
    assert_eq!(rows[0][column(&h, "method")], "GridFFT");
    assert!(rows[0][column(&h, "catness_j")].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn verify_suites() {
    assert_eq!(code(&run(&["verify", "nonsense"])), 1);
    let o = run(&["verify", "paper-numbers"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    let checks: Vec<&str> = text.lines().filter(|l| l.starts_with("check ")).collect();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|l| l.contains("status=pass")));
    assert!(text.lines().last().unwrap().starts_with("summary "));
}

#[test]
fn demo_conservation_shifts() {
    let o = run(&[
        "demo-conservation",
        "--separation",
        "1 m",
        "--trials",
        "200",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let (h, rows) = table(&text);
    assert_eq!(rows.len(), 200);
    let norm = column(&h, "shift_norm_m");
    assert!(rows.iter().all(|r| r[norm].parse::<f64>().unwrap() == 0.5));
    assert!(text.contains("# branch=0 frequency="));

    let certain = run(&[
        "demo-conservation",
        "--separation",
        "1 m",
        "--trials",
        "20",
        "--weights",
        "1,0",
    ]);
    let (h, rows) = table(&stdout(&certain));
    let x = column(&h, "shift_x_m");
    assert!(rows.iter().all(|r| r[x].parse::<f64>().unwrap() == 0.0));

    let a = run(&[
        "demo-conservation",
        "--separation",
        "1 m",
        "--trials",
        "1",
        "--seed",
        "9",
    ]);
    let b = run(&[
        "demo-conservation",
        "--separation",
        "1 m",
        "--trials",
        "1",
        "--seed",
        "9",
    ]);
    assert_eq!(a.stdout, b.stdout);

    assert_eq!(
        code(&run(&[
            "demo-conservation",
            "--separation",
            "1 m",
            "--trials",
            "0"
        ])),
        1
    );
    assert_eq!(code(&run(&["demo-conservation", "--separation", "1"])), 1);
}

#[test]
fn shipped_scenarios_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let o = run(&["--config", p.to_str().unwrap(), "rate"]);
            assert_eq!(
                code(&o),
                0,
                "{}: {}",
                p.display(),
                String::from_utf8_lossy(&o.stderr)
            );
            n += 1;
        }
    }
    assert!(n >= 2);
}
