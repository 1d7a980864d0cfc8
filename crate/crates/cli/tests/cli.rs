use clap::Parser;
use loopsoup::soup::build_field;
use loopsoup::{LoopIndex, SoupRealization, Window};
use loopsoup_cli::config::{
    Command, ExperimentConfig, IntSet, KindArg, Pair, SampleArgs, Suite, VerifyArgs, WindowArg,
};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Output;

fn bin() -> std::process::Command {
    let mut c = std::process::Command::new(env!("CARGO_BIN_EXE_loopsoup"));
    c.env_remove("LOOPSOUP_SEED").env_remove("LOOPSOUP_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

const SAMPLE: [&str; 14] = [
    "sample", "--kind", "walk", "--lambda", "1", "--scale", "16", "--window", "-8:8", "--nmax", "256", "--seed", "7",
    "--out",
];

#[test]
fn sample_is_reproducible_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a.json", "1"), ("b.json", "4"), ("c.json", "4")] {
        let o = bin().current_dir(dir.path()).args(SAMPLE).arg(name).env("LOOPSOUP_THREADS", threads).output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(read(dir.path().join(name)));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let soup = SoupRealization::from_json(std::str::from_utf8(&outputs[0]).unwrap()).unwrap();
    assert!(!soup.loops.is_empty());
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--kind", "brownian", "--lambda", "1", "--scale", "4", "--window", "-3:3", "--nmax", "64"];
    let o = run(dir.path(), &[&args[..], &["--seed", "5", "--out", "a.json"]].concat());
    assert_eq!(code(&o), 0);
    let o =
        bin().current_dir(dir.path()).args(args).args(["--out", "b.json"]).env("LOOPSOUP_SEED", "5").output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(read(dir.path().join("a.json")), read(dir.path().join("b.json")));
    let o = run(dir.path(), &[&args[..], &["--out", "c.json"]].concat());
    assert_eq!(code(&o), 1, "seed is mandatory");
}

#[test]
fn zero_intensity_gives_empty_soup() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "sample", "--kind", "walk", "--lambda", "0", "--scale", "2", "--window", "-4:4", "--nmax", "8", "--seed",
            "1", "--out", "e.json",
        ],
    );
    assert_eq!(code(&o), 0);
    let soup = SoupRealization::from_json(&String::from_utf8(read(dir.path().join("e.json"))).unwrap()).unwrap();
    assert!(soup.loops.is_empty());
}

#[test]
fn index_sets_differ_only_on_count_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "sample", "--kind", "both", "--lambda", "3", "--scale", "2", "--window", "-6:6", "--nmax", "64", "--seed",
            "9", "--out", "s.json",
        ],
    );
    assert_eq!(code(&o), 0);
    let load =
        |name: &str| SoupRealization::from_json(&String::from_utf8(read(dir.path().join(name))).unwrap()).unwrap();
    let ids = |s: &SoupRealization| s.loops.iter().map(|l| l.index).collect::<BTreeSet<LoopIndex>>();
    let (walk, brown) = (ids(&load("s.walk.json")), ids(&load("s.brownian.json")));
    let field = build_field(Window::centered(6).unwrap(), 64, 3.0, 9).unwrap();
    let mismatched: BTreeSet<_> =
        field.cells(3.0).unwrap().into_iter().filter(|c| c.2 != c.3).map(|c| (c.0, c.1)).collect();
    for i in walk.symmetric_difference(&brown) {
        assert!(mismatched.contains(&(i.n, i.z)), "{i:?}");
    }
}

#[test]
fn couple_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["couple", "--scale", "8,16", "--seed", "0", "--fields", "12", "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for scale in [8u32, 16] {
        let text = String::from_utf8(read(dir.path().join(format!("out/couple-N{scale}.csv")))).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().unwrap().clone();
        let gap = header.iter().position(|h| h == "max_duration_gap").unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 13);
        assert_eq!(&rows[12][2], "all");
        for r in &rows {
            assert_eq!(&r[0], "1");
            assert!(r[gap].parse::<f64>().unwrap() <= 0.625 / (scale as f64).powi(2));
        }
        let json: serde_json::Value =
            serde_json::from_slice(&read(dir.path().join(format!("out/report-N{scale}-seed3.json")))).unwrap();
        assert_eq!(json["schemaVersion"], 1);
        assert_eq!(json["report"]["scale"], scale);
    }
    assert!(dir.path().join("out/sweep.csv").exists());
    let first = read(dir.path().join("out/sweep.csv"));
    let o = run(dir.path(), &["couple", "--scale", "8,16", "--seed", "0", "--fields", "12", "--out-dir", "again"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(dir.path().join("again/sweep.csv")), first);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&run(p, &["couple", "--theta", "0.5", "--seed", "0", "--out-dir", "x"])), 1);
    assert_eq!(code(&run(p, &["couple", "--theta", "2", "--seed", "0", "--out-dir", "x"])), 1);
    assert_eq!(code(&run(p, &["verify", "nonsense"])), 1);
    assert_eq!(code(&run(p, &["render", "--input", "missing.json", "--out", "a.svg"])), 2);
    std::fs::write(p.join("bad.json"), "{\"schemaVersion\": 1, \"kind\": \"walk\"}").unwrap();
    let o = run(p, &["render", "--input", "bad.json", "--out", "a.svg"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1 column"));
    let blocker = p.join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("x.json");
    let o = run(p, &[&SAMPLE[..], &[out.to_str().unwrap()]].concat());
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(p, &["verify", "duration", "--n", "3", "--samples", "2000", "--seed", "1"])), 0);
    // an impossible slope window fails the suite
    let o = run(p, &["verify", "beurling", "--t", "1,4", "--samples", "2000", "--slope", "5:6", "--seed", "1"]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(p, &["--help"])), 0);
}

#[test]
fn verify_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "--csv", "clt.csv", "clt", "--m", "20,40"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("max_scaled") && stdout.contains("result: PASS"));
    let text = String::from_utf8(read(dir.path().join("clt.csv"))).unwrap();
    assert!(text.starts_with("schema_version,m,"));
    assert_eq!(text.lines().count(), 3);
}

fn svg_lines(path: PathBuf) -> Vec<String> {
    String::from_utf8(read(path)).unwrap().lines().map(String::from).collect()
}

fn attr<'a>(line: &'a str, name: &str) -> &'a str {
    let key = format!(" {name}=\"");
    let start = line.find(&key).unwrap() + key.len();
    &line[start..start + line[start..].find('"').unwrap()]
}

#[test]
fn render_pairs_and_axes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = run(
        p,
        &[
            "sample", "--kind", "both", "--lambda", "2", "--scale", "4", "--window", "-4:4", "--nmax", "64", "--seed",
            "3", "--out", "s.json",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(code(&run(p, &["render", "--input", "s.walk.json", "--input", "s.brownian.json", "--out", "a.svg"])), 0);
    assert_eq!(code(&run(p, &["render", "--input", "s.walk.json", "--input", "s.brownian.json", "--out", "b.svg"])), 0);
    assert_eq!(read(p.join("a.svg")), read(p.join("b.svg")));
    let lines = svg_lines(p.join("a.svg"));
    let polys: Vec<&String> = lines.iter().filter(|l| l.starts_with("<polyline")).collect();
    let walk: Vec<&&String> = polys.iter().filter(|l| attr(l, "class") == "walk").collect();
    assert!(!walk.is_empty());
    for w in walk {
        if w.contains("dasharray") {
            continue;
        }
        let index = attr(w, "data-index");
        let partner = polys.iter().find(|l| attr(l, "class") == "brownian" && attr(l, "data-index") == index).unwrap();
        assert_eq!(attr(w, "stroke"), attr(partner, "stroke"));
        assert!(!partner.contains("dasharray"));
    }

    let o = run(
        p,
        &[
            "sample", "--kind", "walk", "--lambda", "0", "--scale", "1", "--window", "-1:1", "--nmax", "4", "--seed",
            "1", "--out", "e.json",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(code(&run(p, &["render", "--input", "e.json", "--out", "e.svg"])), 0);
    let lines = svg_lines(p.join("e.svg"));
    assert!(lines[1].starts_with("<svg") && lines.last().unwrap() == "</svg>");
    assert!(lines.iter().any(|l| l.starts_with("<line")));
    assert!(!lines.iter().any(|l| l.starts_with("<polyline")));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        0.0f64..1e3,
        (0u32..1000).prop_map(|x| x as f64 / 8.0),
        any::<f64>().prop_filter("finite", |x| x.is_finite())
    ]
}

fn suite() -> impl Strategy<Value = Suite> {
    prop_oneof![
        prop::collection::vec((1u64..300, 0u64..5), 1..4)
            .prop_map(|v| Suite::Clt { m: IntSet(v.into_iter().map(|(a, d)| (a, a + d)).collect()) }),
        (prop::collection::vec((finite(), finite()), 1..4), 1u64..1_000_000, finite(), any::<u64>()).prop_map(
            |(pairs, samples, tolerance, seed)| Suite::Bridge {
                n: IntSet(vec![(8, 8), (64, 64)]),
                pairs: pairs.into_iter().map(|(a, b)| Pair(a, b)).collect(),
                samples,
                tolerance,
                seed,
            }
        ),
        (prop::collection::vec((1u64..100, -100i64..100), 1..4), finite(), any::<u64>()).prop_map(
            |(p, alpha, seed)| {
                Suite::Quantile { points: p.into_iter().map(|(a, b)| Pair(a, b)).collect(), samples: 10, alpha, seed }
            }
        ),
        (prop::collection::vec(finite(), 1..4), finite(), any::<u64>()).prop_map(|(t, r, seed)| Suite::Beurling {
            r,
            t,
            samples: 3,
            kappa: 0.25,
            absorb: 1e-4,
            slope: Pair(0.3, 0.7),
            seed
        }),
    ]
}

fn command() -> impl Strategy<Value = Command> {
    prop_oneof![
        (
            prop_oneof![Just(KindArg::Walk), Just(KindArg::Brownian), Just(KindArg::Both)],
            finite(),
            1u32..100,
            (-50i64..0, 0i64..50, -50i64..0, 0i64..50),
            1u64..1000,
            any::<u64>(),
            any::<bool>(),
            "[a-z]{1,8}(/[a-z]{1,8})?\\.json",
        )
            .prop_map(|(kind, lambda, scale, (a, b, c, d), nmax, seed, small, out)| {
                Command::Sample(SampleArgs {
                    kind,
                    lambda,
                    scale,
                    window: WindowArg { x: (a, b), y: (c, d) },
                    nmax,
                    seed,
                    refine: 1,
                    small,
                    t_min: 0.1,
                    out: out.into(),
                })
            }),
        (suite(), prop::option::of("[a-z]{1,8}\\.csv"))
            .prop_map(|(suite, csv)| Command::Verify(VerifyArgs { csv: csv.map(Into::into), suite })),
    ]
}

proptest! {
    #[test]
    fn config_round_trips(command in command(), threads in prop::option::of(1usize..64)) {
        let config = ExperimentConfig { threads, command };
        let args = config.to_args();
        let back = ExperimentConfig::try_parse_from(&args).map_err(|e| TestCaseError::fail(format!("{args:?}: {e}")))?;
        prop_assert_eq!(&back, &config);
        prop_assert_eq!(back.to_args(), args);
    }
}
