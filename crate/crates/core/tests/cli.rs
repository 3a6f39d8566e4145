use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clusterretri"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = bin(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_bench(dir: &Path) {
    ok(
        &["generate", "--out-dir", "bench", "--classes", "5", "--gallery-per-class", "12",
          "--queries-per-class", "3", "--dims", "64"],
        dir,
    );
}

const Q: &str = "bench/queries.crft";
const G: &str = "bench/gallery.crft";

fn retrieve(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["retrieve", "--queries", Q, "--gallery", G, "--out", out];
    args.extend_from_slice(extra);
    ok(&args, dir);
}

#[test]
fn reruns_are_byte_identical() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    small_bench(d);
    let first = fs::read(d.join(G)).unwrap();
    small_bench(d);
    assert_eq!(first, fs::read(d.join(G)).unwrap());

    for name in ["a.crcb", "b.crcb"] {
        ok(&["build", "--gallery", G, "--out", name, "--k", "4"], d);
    }
    assert_eq!(fs::read(d.join("a.crcb")).unwrap(), fs::read(d.join("b.crcb")).unwrap());

    for out in ["r1.txt", "r2.txt"] {
        retrieve(d, out, &["--codebook", "a.crcb", "--mode", "binary", "--bits", "16"]);
    }
    assert_eq!(fs::read(d.join("r1.txt")).unwrap(), fs::read(d.join("r2.txt")).unwrap());
}

#[test]
fn fusion_endpoints_match_exact_and_adc() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    small_bench(d);
    ok(&["build", "--gallery", G, "--out", "cb.crcb", "--k", "8"], d);
    retrieve(d, "exact.txt", &["--mode", "exact"]);
    retrieve(d, "f1.txt", &["--mode", "fused", "--codebook", "cb.crcb", "--lambda", "1"]);
    retrieve(d, "f0.txt", &["--mode", "fused", "--codebook", "cb.crcb", "--lambda", "0"]);
    retrieve(d, "adc.txt", &["--mode", "adc", "--codebook", "cb.crcb", "--lambda", "0"]);
    let read = |f: &str| fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read("exact.txt"), read("f1.txt"));
    assert_eq!(read("adc.txt"), read("f0.txt"));
    assert_eq!(read("exact.txt").lines().count(), 15);

    retrieve(d, "top.txt", &["--mode", "exact", "--top", "5"]);
    let first = read("top.txt").lines().next().unwrap().to_owned();
    assert_eq!(first.split_once('\t').unwrap().1.split(' ').count(), 5);
}

#[test]
fn proxy_mode_needs_proxy_model() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    small_bench(d);
    ok(&["build", "--gallery", G, "--out", "cb.crcb", "--proxy-out", "proxy.crcb", "--k", "5"], d);
    retrieve(d, "p.txt", &["--mode", "proxy", "--codebook", "proxy.crcb"]);
    let out = bin(&["retrieve", "--queries", Q, "--gallery", G, "--out", "x.txt", "--mode", "proxy",
                    "--codebook", "cb.crcb"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    assert_eq!(bin(&["--help"], d).status.code(), Some(0));
    assert!(String::from_utf8_lossy(&bin(&["--help"], d).stdout).contains("CRCB"));
    assert_eq!(bin(&["--version"], d).status.code(), Some(0));
    assert_eq!(bin(&["retrieve", "--bogus"], d).status.code(), Some(1));
    assert_eq!(bin(&[], d).status.code(), Some(1));

    small_bench(d);
    ok(&["build", "--gallery", G, "--out", "cb.crcb", "--k", "4"], d);
    // adc only ranks the pure reconstruction
    let adc = bin(&["retrieve", "--queries", Q, "--gallery", G, "--out", "x", "--mode", "adc",
                    "--codebook", "cb.crcb"], d);
    assert_eq!(adc.status.code(), Some(1));
    let missing = bin(&["eval", "--rankings", "none.txt", "--gallery-labels", "bench/gallery.labels",
                        "--query-labels", "bench/queries.labels"], d);
    assert_eq!(missing.status.code(), Some(2));

    fs::write(d.join("bad.crft"), b"XRFT\x01\x01\0\0").unwrap();
    let bad = bin(&["build", "--gallery", "bad.crft", "--out", "y.crcb"], d);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bad magic"));
}

#[test]
fn build_preconditions() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    let rows: String = (0..6)
        .map(|i| (0..510).map(|j| ((i * 7 + j) % 11).to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(d.join("g.csv"), rows).unwrap();
    let out = bin(&["build", "--gallery", "g.csv", "--out", "cb.crcb", "--m", "4", "--k", "2"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible"));
    // k = N is a valid degenerate build
    ok(&["build", "--gallery", "g.csv", "--out", "cb.crcb", "--m", "2", "--k", "6"], d);
}

#[test]
fn eval_hand_built_ranking() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    fs::write(d.join("r.txt"), "0\t0 1 2\n").unwrap();
    fs::write(d.join("g.labels"), "cat\ndog\ncat\n").unwrap();
    fs::write(d.join("q.labels"), "cat\n").unwrap();
    let out = ok(&["eval", "--rankings", "r.txt", "--gallery-labels", "g.labels", "--query-labels",
                   "q.labels"], d);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["map_at_all"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert_eq!(v["skipped_queries"], 0);
    assert_eq!(v["k"], 100);
}

#[test]
fn config_file_with_flag_override() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    small_bench(d);
    fs::write(d.join("run.cfg"), "# run\nk = 4\nm=4\nmode=exact\n").unwrap();
    ok(&["--config", "run.cfg", "build", "--gallery", G, "--out", "cfg.crcb"], d);
    ok(&["build", "--gallery", G, "--out", "flag.crcb", "--k", "4", "--m", "4"], d);
    assert_eq!(fs::read(d.join("cfg.crcb")).unwrap(), fs::read(d.join("flag.crcb")).unwrap());
    ok(&["--config", "run.cfg", "build", "--gallery", G, "--out", "over.crcb", "--m", "2"], d);
    assert_ne!(fs::read(d.join("cfg.crcb")).unwrap(), fs::read(d.join("over.crcb")).unwrap());
    // mode comes from the config
    ok(&["--config", "run.cfg", "retrieve", "--queries", Q, "--gallery", G, "--out", "r.txt"], d);

    fs::write(d.join("bad.cfg"), "k: 4\n").unwrap();
    let out = bin(&["--config", "bad.cfg", "build", "--gallery", G, "--out", "z.crcb"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ablation_grid_shape() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    small_bench(d);
    ok(&["ablation", "--bench-dir", "bench", "--out", "abl.csv", "--k", "5", "--k-sweep", "2,5,10"], d);
    let csv = fs::read_to_string(d.join("abl.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 7 + 3);
    let col = |name: &str| rows.iter().find(|r| r.starts_with(&format!("{name},"))).unwrap().split(',').nth(7).unwrap().to_owned();
    assert_eq!(col("baseline"), col("endpoint_lambda1"));
    assert_eq!(col("kmeans+subspace"), col("endpoint_lambda0"));
}

#[test]
fn convert_histogram_train_cluster() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    small_bench(d);
    ok(&["convert", G, "g.csv"], d);
    ok(&["convert", "g.csv", "g2.crft"], d);
    assert_eq!(fs::read(d.join(G)).unwrap(), fs::read(d.join("g2.crft")).unwrap());

    ok(&["histogram", "--queries", Q, "--query-labels", "bench/queries.labels", "--gallery", G,
         "--gallery-labels", "bench/gallery.labels", "--n-pos", "100", "--n-neg", "400", "--bins", "10",
         "--out", "h.csv"], d);
    assert_eq!(fs::read_to_string(d.join("h.csv")).unwrap().lines().count(), 11);
    let short = bin(&["histogram", "--queries", Q, "--query-labels", "bench/queries.labels", "--gallery", G,
                      "--gallery-labels", "bench/gallery.labels", "--out", "h2.csv"], d);
    assert_eq!(short.status.code(), Some(2));

    ok(&["train", "--out-dir", "enc", "--epochs", "5"], d);
    assert_eq!(&fs::read(d.join("enc/encoder.crte")).unwrap()[..4], b"CRTE");
    assert_eq!(fs::read_to_string(d.join("enc/trace.csv")).unwrap().lines().count(), 7);

    let out = ok(&["cluster", "--features", G, "--labels", "bench/gallery.labels", "--k", "5"], d);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["nmi"].as_f64().unwrap() > 0.0);
}
