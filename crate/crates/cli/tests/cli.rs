use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use varfilt::rasterio::{read_fraw, write_fraw, write_fraw_as, write_pgm, ValueKind, FRAW_HEADER_LEN};
use varfilt::Raster;

fn varfilt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varfilt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = varfilt(args);
    assert!(
        out.status.success(),
        "varfilt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    varfilt(args).status.code().unwrap()
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn noise(w: usize, h: usize) -> Raster {
    let mut state = 0x2545_f491_u64;
    Raster::from_fn(w, h, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        100.0 + (state >> 40) as f64 / (1u64 << 24) as f64 * 20.0
    })
    .unwrap()
}

fn meta(path: &Path) -> String {
    fs::read_to_string(format!("{}.meta", path.display())).unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["tables", "--bogus"]), 1);
    assert_eq!(code(&["filter", "--in", "x"]), 1);
    assert_eq!(code(&["test1", "--filter", "fixed:4"]), 1);
}

#[test]
fn missing_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "o.fraw");
    assert_eq!(code(&["vrr", "variance", "--in", "/nonexistent/v.fraw", "--target", "1", "--out", s(&out)]), 2);
    assert_eq!(code(&["bank", "dump", "--in", "/nonexistent/bank"]), 2);
}

#[test]
fn tables_cell() {
    let csv = ok(&["tables", "--L", "1", "--iters", "8"]);
    let row = csv.lines().find(|l| l.starts_with("2,")).unwrap();
    let p: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 18.17).abs() < 0.01);
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn tables_writes_file_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "t.csv");
    assert!(ok(&["tables", "--L", "2,3", "--iters", "3", "--out", s(&out)]).is_empty());
    assert!(fs::read_to_string(&out).unwrap().contains("p_max_5x5,p_max_7x7"));
    let m = meta(&out);
    assert!(m.contains("command=tables\n"));
    assert!(m.contains("L=2,3\n"));
    assert!(m.contains("iters=3\n"));
}

#[test]
fn filter_with_unit_q_keeps_payload() {
    let dir = TempDir::new().unwrap();
    let f = noise(20, 14);
    for kind in [ValueKind::F64, ValueKind::F32] {
        let input = p(&dir, "in.fraw");
        let q = p(&dir, "q.fraw");
        let out = p(&dir, "out.fraw");
        write_fraw_as(&f.map(|v| v as f32 as f64).unwrap(), &input, kind).unwrap();
        write_fraw(&Raster::filled(20, 14, 1.0).unwrap(), &q).unwrap();
        for mode in ["fixed", "recursive"] {
            ok(&["filter", "--in", s(&input), "--q", s(&q), "--mode", mode, "--bins", "64", "--out", s(&out)]);
            assert_eq!(fs::read(&input).unwrap(), fs::read(&out).unwrap(), "{kind:?} {mode}");
        }
    }
}

#[test]
fn filter_dimension_mismatch_exits_3_with_both_shapes() {
    let dir = TempDir::new().unwrap();
    let input = p(&dir, "in.fraw");
    let q = p(&dir, "q.fraw");
    write_fraw(&noise(8, 6), &input).unwrap();
    write_fraw(&Raster::filled(6, 8, 2.0).unwrap(), &q).unwrap();
    let out = varfilt(&["filter", "--in", s(&input), "--q", s(&q), "--out", s(&p(&dir, "o.fraw"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("8x6") && err.contains("6x8"), "{err}");
}

#[test]
fn variance_map_feeds_filter_and_reports() {
    let dir = TempDir::new().unwrap();
    let input = p(&dir, "in.fraw");
    let var = p(&dir, "var.fraw");
    let q = p(&dir, "q.fraw");
    let out = p(&dir, "out.fraw");
    let report = p(&dir, "report.csv");
    let f = noise(32, 32);
    write_fraw(&f, &input).unwrap();
    write_fraw(&Raster::filled(32, 32, 40.0).unwrap(), &var).unwrap();
    ok(&["vrr", "variance", "--in", s(&var), "--target", "2", "--out", s(&q)]);
    assert!(read_fraw(&q).unwrap().values().iter().all(|&v| v == 20.0));
    ok(&[
        "filter", "--in", s(&input), "--q", s(&q), "--bins", "128", "--out", s(&out), "--report", s(&report),
    ]);
    let rep = fs::read_to_string(&report).unwrap();
    assert!(rep.contains("# iterations_used=3"), "{rep}");
    assert!(rep.contains("iteration,active_pixels\n1,1024\n"));
    let m = meta(&out);
    assert!(m.contains("mode=recursive") && m.contains("q_min=1.01") && m.contains("bank=none"));
    assert!(read_fraw(&out).unwrap() != f);
}

#[test]
fn filter_with_prebuilt_bank() {
    let dir = TempDir::new().unwrap();
    let bank = p(&dir, "b.svrb");
    let input = p(&dir, "in.fraw");
    let q = p(&dir, "q.fraw");
    let (a, b) = (p(&dir, "a.fraw"), p(&dir, "b.fraw"));
    ok(&["bank", "build", "--L", "1", "--bins", "128", "--closed-form", "--out", s(&bank)]);
    assert!(meta(&bank).contains("banks=3"));
    write_fraw(&noise(16, 16), &input).unwrap();
    write_fraw(&Raster::filled(16, 16, 30.0).unwrap(), &q).unwrap();
    ok(&["filter", "--in", s(&input), "--q", s(&q), "--bins", "128", "--out", s(&a)]);
    ok(&["filter", "--in", s(&input), "--q", s(&q), "--bank", s(&bank), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    // A 3x3 bank cannot drive a 5x5 filter.
    assert_eq!(code(&["filter", "--in", s(&input), "--q", s(&q), "--L", "2", "--bank", s(&bank), "--out", s(&b)]), 3);
}

#[test]
fn bank_dump_and_bad_options() {
    let dir = TempDir::new().unwrap();
    let bank = p(&dir, "b.svrb");
    ok(&["bank", "build", "--mode", "fixed", "--L", "2", "--bins", "8", "--out", s(&bank)]);
    let text = ok(&["bank", "dump", "--in", s(&bank)]);
    assert!(text.contains("pass,index,p,a,kernel_vrp"));
    assert_eq!(text.lines().filter(|l| l.starts_with("0,")).count(), 8);
    assert_eq!(code(&["bank", "build", "--mode", "fixed", "--closed-form", "--out", s(&bank)]), 3);
    assert_eq!(code(&["bank", "build", "--L", "2", "--closed-form", "--out", s(&bank)]), 3);
    fs::write(&bank, b"not a bank").unwrap();
    assert_eq!(code(&["bank", "dump", "--in", s(&bank)]), 2);
}

#[test]
fn counts_map_and_log_after() {
    let dir = TempDir::new().unwrap();
    let counts = p(&dir, "c.fraw");
    let q = p(&dir, "q.fraw");
    let out = p(&dir, "o.fraw");
    write_fraw(&Raster::from_fn(8, 8, |x, _| if x == 0 { 0.0 } else { 100.0 }).unwrap(), &counts).unwrap();
    assert_eq!(code(&["vrr", "counts", "--in", s(&counts), "--target", "0.001", "--out", s(&q)]), 3);
    ok(&["vrr", "counts", "--in", s(&counts), "--target", "0.001", "--floor", "0.5", "--out", s(&q)]);
    let qm = read_fraw(&q).unwrap();
    assert_eq!(qm.get(3, 3), 10.0);
    assert_eq!(qm.get(0, 0), 2000.0);

    let flat = p(&dir, "flat.fraw");
    write_fraw(&Raster::filled(8, 8, 100.0).unwrap(), &flat).unwrap();
    ok(&["filter", "--in", s(&flat), "--q", s(&q), "--bins", "64", "--log-after", "--out", s(&out)]);
    let logged = read_fraw(&out).unwrap();
    assert!(logged.values().iter().all(|&v| v == 100f64.ln()));
}

#[test]
fn edge_map_methods() {
    let dir = TempDir::new().unwrap();
    let input = p(&dir, "in.fraw");
    let (g, pm) = (p(&dir, "g.fraw"), p(&dir, "pm.fraw"));
    write_fraw(&Raster::from_fn(16, 16, |x, _| if x < 8 { 0.0 } else { 100.0 }).unwrap(), &input).unwrap();
    ok(&["vrr", "edge", "--in", s(&input), "--v0", "64", "--out", s(&g)]);
    ok(&["vrr", "edge", "--in", s(&input), "--v0", "64", "--method", "pm", "--strength", "50", "--out", s(&pm)]);
    let (g, pm) = (read_fraw(&g).unwrap(), read_fraw(&pm).unwrap());
    assert_eq!(g.get(2, 5), 1000.0);
    assert_eq!(g.get(8, 5), 1.28);
    assert_eq!(pm.get(2, 5), 50.0);
    assert!((pm.get(8, 5) - 50.0 * 64.0 / (64.0 + 2500.0)).abs() < 1e-12);
    assert_eq!(code(&["vrr", "edge", "--in", s(&input), "--v0=-1", "--out", s(&p(&dir, "x.fraw"))]), 3);
}

#[test]
fn experiments_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = |out: &Path| -> Vec<String> {
        ["test1", "--filter", "recursive:3", "--repeats", "2", "--n-samples", "5", "--sample-dim", "40", "--roi", "30"]
            .iter()
            .map(|s| s.to_string())
            .chain(["--bins".into(), "128".into(), "--seed".into(), "9".into(), "--out".into(), s(out).into()])
            .collect()
    };
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    for out in [&a, &b] {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.contains("# seed=9") && text.contains("# filter=recursive:3"));
    assert!(meta(&a).contains("repeats=2"));

    let csv = ok(&["test2", "--filter", "fixed:3", "--n-samples", "3", "--sample-dim", "40", "--roi", "30", "--bins", "64"]);
    assert!(csv.contains("k,lambda,u_expected,u_measured,u_filtered,u_target"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert_eq!(code(&["test2", "--lambda-min", "0", "--n-samples", "2"]), 3);
}

#[test]
fn denoise_pgm_round() {
    let dir = TempDir::new().unwrap();
    let input = p(&dir, "in.pgm");
    let out = p(&dir, "out.pgm");
    let qout = p(&dir, "q.fraw");
    let img = Raster::from_fn(24, 24, |x, y| if x < 12 { 40.0 } else { 200.0 } + ((x * 7 + y * 13) % 9) as f64).unwrap();
    write_pgm(&img, &input, 255).unwrap();
    ok(&["denoise", "--in", s(&input), "--v0", "9", "--bins", "128", "--q-out", s(&qout), "--out", s(&out)]);
    let den = varfilt::rasterio::read_pgm(&out).unwrap();
    assert_eq!((den.width(), den.height()), (24, 24));
    assert!(read_fraw(&qout).unwrap().values().iter().all(|&q| q >= 1.0));
    let m = meta(&out);
    assert!(m.contains("presmooth=true") && m.contains("blend=0"));

    let same = p(&dir, "same.pgm");
    ok(&["denoise", "--in", s(&input), "--v0", "9", "--blend", "1", "--bins", "64", "--out", s(&same)]);
    assert_eq!(fs::read(&input).unwrap(), fs::read(&same).unwrap());
    assert_eq!(code(&["denoise", "--in", s(&input), "--v0", "9", "--blend", "2", "--out", s(&same)]), 3);
}

#[test]
fn fraw_header_is_ascii() {
    let dir = TempDir::new().unwrap();
    let path = p(&dir, "h.fraw");
    write_fraw(&Raster::filled(3, 2, 1.5).unwrap(), &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert!(bytes[..FRAW_HEADER_LEN].starts_with(b"FRAW 1 3 2 f64"));
    assert_eq!(bytes.len(), FRAW_HEADER_LEN + 6 * 8);
}
