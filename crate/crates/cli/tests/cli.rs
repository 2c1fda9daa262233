use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cascade-rank");

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// 60 documents, 6 queries; query `qN` is about `topicN` and its relevant
    /// document is `dN*7`.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut collection = String::new();
        for d in 0..60 {
            let topic = if d % 7 == 0 && d / 7 < 6 {
                format!(" topic{} topic{}", d / 7, d / 7)
            } else {
                String::new()
            };
            collection += &format!("d{d}\tshared words number{} filler{}{topic}\n", d % 5, d % 11);
        }
        let mut queries = String::new();
        let mut qrels = String::new();
        let mut labels = String::new();
        for q in 0..6 {
            queries += &format!("q{q}\ttopic{q} shared\n");
            qrels += &format!("q{q} 0 d{} 1\n", q * 7);
            labels += &format!("q{q}\td{}\t1\n", q * 7);
            for neg in [1, 2, 3] {
                labels += &format!("q{q}\td{}\t0\n", q * 7 + neg);
            }
        }
        fs::write(dir.path().join("collection.tsv"), collection).unwrap();
        fs::write(dir.path().join("queries.tsv"), queries).unwrap();
        fs::write(dir.path().join("qrels.txt"), qrels).unwrap();
        fs::write(dir.path().join("labels.tsv"), labels).unwrap();
        let f = Self { dir };
        let out = f.run(&["index", "build", "--collection", &f.p("collection.tsv"), "--out", &f.p("index")]);
        assert_success(&out);
        f
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN).args(args).output().unwrap()
    }
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn oracle_search_then_evaluate() {
    let f = Fixture::new();
    let out = f.run(&[
        "search", "--index", &f.p("index"), "--queries", &f.p("queries.tsv"), "--k0", "20", "--k1", "5", "--agg",
        "sum", "--mono", "oracle", "--duo", "oracle", "--qrels", &f.p("qrels.txt"), "--run-out", &f.p("run.txt"),
        "--ledger-out", &f.p("ledger.csv"), "--dump-pairs", &f.p("pairs.csv"),
    ]);
    assert_success(&out);
    let run = read(&f.path("run.txt"));
    assert_eq!(run.lines().count(), 6 * 5);
    assert!(run.lines().next().unwrap().starts_with("q0 Q0 d0 1 "));

    let ledger = read(&f.path("ledger.csv"));
    let mut lines = ledger.lines();
    assert_eq!(lines.next(), Some("query_id,h0_candidates,mono_inferences,duo_inferences,total"));
    assert_eq!(lines.next(), Some("q0,20,20,20,40"));

    let pairs = read(&f.path("pairs.csv"));
    assert_eq!(pairs.lines().next(), Some("query_id,i_doc,j_doc,p"));
    assert_eq!(pairs.lines().count(), 1 + 6 * 20);

    let out = f.run(&["evaluate", "--run", &f.p("run.txt"), "--qrels", &f.p("qrels.txt"), "--metric", "mrr10"]);
    assert_success(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.000000");

    let out = f.run(&["evaluate", "--run", &f.p("run.txt"), "--qrels", &f.p("qrels.txt"), "--report", "--k", "5"]);
    assert_success(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("mrr@10\t100.00"), "{text}");
    assert!(text.contains("recall@5\t100.00"), "{text}");
}

#[test]
fn toy_models_train_and_search() {
    let f = Fixture::new();
    for kind in ["mono", "duo"] {
        let model = f.p(&format!("{kind}.json"));
        let out = f.run(&[
            "train-toy", "--pairs", &f.p("labels.tsv"), "--collection", &f.p("collection.tsv"), "--queries",
            &f.p("queries.tsv"), "--out", &model, "--lr", "0.5", "--iters", "300", "--seed", "1", "--kind", kind,
        ]);
        assert_success(&out);
        assert!(f.path(&format!("{kind}.json")).is_file());
    }
    let mono = format!("toy:{}", f.p("mono.json"));
    let duo = format!("toy:{}", f.p("duo.json"));
    let out = f.run(&[
        "search", "--index", &f.p("index"), "--queries", &f.p("queries.tsv"), "--k0", "30", "--k1", "6", "--agg",
        "sample", "--sample-m", "3", "--mono", &mono, "--duo", &duo, "--run-out", &f.p("toy.run"), "--ledger-out",
        &f.p("toy.csv"), "--seed", "5",
    ]);
    assert_success(&out);
    assert!(read(&f.path("toy.csv")).lines().skip(1).all(|l| l.ends_with(",30,30,18,48")));
    let out = f.run(&["evaluate", "--run", &f.p("toy.run"), "--qrels", &f.p("qrels.txt"), "--metric", "map"]);
    assert_success(&out);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&v));
}

#[test]
fn sweep_from_config_file() {
    let f = Fixture::new();
    let cfg = format!(
        "# grid over a tiny corpus\nindex = {}\nqueries = {}\nqrels = {}\nmono = oracle\nduo = oracle\n\
         k0 = 40\nk1 = 0,2,5\nmethods = sum,min,sample\nm = 1,2\ntrials = 3\ncost = duo\n",
        f.p("index"),
        f.p("queries.tsv"),
        f.p("qrels.txt")
    );
    fs::write(f.path("sweep.cfg"), cfg).unwrap();
    let out = f.run(&["sweep", "--config", &f.p("sweep.cfg"), "--csv-out", &f.p("out.csv")]);
    assert_success(&out);
    let csv = read(&f.path("out.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k0,k1,method,m,trials,inferences_per_query,metric"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * (2 + 2));
    let cost = |k1: &str, method: &str, m: &str| -> String {
        rows.iter().find(|r| r[1] == k1 && r[2] == method && r[3] == m).unwrap()[5].to_string()
    };
    assert_eq!(cost("5", "sum", ""), "20");
    assert_eq!(cost("5", "min", ""), "20");
    assert_eq!(cost("5", "sample", "2"), "10");
    assert_eq!(cost("2", "sample", "1"), "2");
    assert_eq!(cost("0", "sum", ""), "0");

    // A flag on the command line overrides the file.
    let out = f.run(&["sweep", "--config", &f.p("sweep.cfg"), "--csv-out", &f.p("out2.csv"), "--cost", "total"]);
    assert_success(&out);
    assert!(read(&f.path("out2.csv")).contains("40,5,sum,,1,60,"));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let f = Fixture::new();
    let search = |threads: &str, out: &str| {
        f.run(&[
            "search", "--index", &f.p("index"), "--queries", &f.p("queries.tsv"), "--k0", "25", "--k1", "8",
            "--agg", "sample", "--sample-m", "2", "--mono", "oracle", "--duo", "oracle", "--qrels",
            &f.p("qrels.txt"), "--run-out", &f.p(out), "--dump-pairs", &f.p(&format!("{out}.pairs")), "--seed", "9",
            "--threads", threads,
        ])
    };
    assert_success(&search("1", "a.run"));
    assert_success(&search("4", "b.run"));
    assert_eq!(read(&f.path("a.run")), read(&f.path("b.run")));
    assert_eq!(read(&f.path("a.run.pairs")), read(&f.path("b.run.pairs")));
}

#[test]
fn usage_errors_exit_2() {
    let f = Fixture::new();
    let out = f.run(&["search", "--queries", &f.p("queries.tsv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--index"));
    assert_eq!(f.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(f.run(&["evaluate", "--run", "x", "--qrels", "y", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        f.run(&["evaluate", "--run", "x", "--qrels", "y", "--metric", "ndcg"]).status.code(),
        Some(2)
    );
    fs::write(f.path("bad.cfg"), "no equals sign here\n").unwrap();
    assert_eq!(f.run(&["evaluate", "--config", &f.p("bad.cfg")]).status.code(), Some(2));
}

#[test]
fn operational_errors_exit_1() {
    let f = Fixture::new();
    // Missing input file.
    let out = f.run(&["evaluate", "--run", &f.p("nope.run"), "--qrels", &f.p("qrels.txt")]);
    assert_eq!(out.status.code(), Some(1));
    // Malformed run.
    fs::write(f.path("bad.run"), "q1 Q0 d1 2 0.5 t\n").unwrap();
    let out = f.run(&["evaluate", "--run", &f.p("bad.run"), "--qrels", &f.p("qrels.txt")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    // k1 > 0 without a pairwise scorer.
    let out = f.run(&[
        "search", "--index", &f.p("index"), "--queries", &f.p("queries.tsv"), "--k0", "10", "--k1", "3", "--mono",
        "oracle", "--qrels", &f.p("qrels.txt"), "--run-out", &f.p("r.txt"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    // Unreachable remote scorer.
    let out = f.run(&[
        "search", "--index", &f.p("index"), "--queries", &f.p("queries.tsv"), "--k0", "10", "--k1", "0", "--mono",
        "remote:http://127.0.0.1:9", "--remote-timeout-ms", "300", "--run-out", &f.p("r.txt"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!f.path("r.txt").exists());
}

#[test]
fn index_build_options() {
    let f = Fixture::new();
    fs::write(f.path("stop.txt"), "shared\nwords\n").unwrap();
    let out = f.run(&[
        "index", "build", "--collection", &f.p("collection.tsv"), "--out", &f.p("idx2"), "--k1-sat", "1.2", "--b",
        "0.75", "--stem", "--stopwords", &f.p("stop.txt"),
    ]);
    assert_success(&out);
    let out = f.run(&["index", "build", "--collection", &f.p("collection.tsv"), "--out", &f.p("idx3"), "--b", "2"]);
    assert_eq!(out.status.code(), Some(1));
}
