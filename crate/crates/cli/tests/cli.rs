use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metldpc::density_evolution::{ChannelKind, DeConfig};
use metldpc::ensemble::parse_ensemble;
use metldpc::optimizer_ar::ArConfig;
use metldpc::optimizer_struct::{struct_objective, StructProblem};
use metldpc::template::parse_template;
use tempfile::TempDir;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(rel)
}

fn metldpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metldpc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .and_then(|v| v.split_whitespace().next())
        .unwrap_or_else(|| panic!("no '{key}' in {text}"))
        .parse()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = metldpc(&["validate", path_str(&data("code1.ens"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("socket-count(edge type 1)"));

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.ens");
    let text = fs::read_to_string(data("code1.ens")).unwrap();
    fs::write(&bad, text.replace("L=0.526258", "L=0.6")).unwrap();
    let o = metldpc(&["validate", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violated rate"));

    let o = metldpc(&["validate", path_str(&dir.path().join("missing.ens"))]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&bad, "met-ensemble v1\nedge_types 1\nrate x\n").unwrap();
    assert_eq!(metldpc(&["validate", path_str(&bad)]).status.code(), Some(2));
}

#[test]
fn threshold_reports_value_limit_and_gap() {
    let o = metldpc(&["threshold", path_str(&data("ref1.ens")), "--channel", "bec"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!((field(&out, "threshold") - 0.463135).abs() <= 5e-4);
    assert!((field(&out, "gap") - 0.036865).abs() <= 5e-4);
    assert_eq!(field(&out, "shannon_limit"), 0.5);

    let o = metldpc(&["threshold", path_str(&data("code7.ens")), "--channel", "bec"]);
    assert!((field(&stdout(&o), "threshold") - 0.898315).abs() <= 5e-4);
}

#[test]
fn threshold_rejects_rate_one() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("r1.ens");
    fs::write(&f, "met-ensemble v1\nedge_types 1\nrate 1\nvar b=channel d=2 L=1\n").unwrap();
    let o = metldpc(&["threshold", path_str(&f), "--channel", "bec"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(0, 1)"));
}

#[test]
fn design_checks_rebuilds_published_check_side() {
    for name in ["code1.ens", "code7.ens"] {
        let o = metldpc(&["design-checks", path_str(&data(name))]);
        assert_eq!(o.status.code(), Some(0));
        let got = parse_ensemble(&stdout(&o)).unwrap();
        let want = parse_ensemble(&fs::read_to_string(data(name)).unwrap()).unwrap();
        assert_eq!(got.chk_classes().len(), want.chk_classes().len());
        for c in want.chk_classes() {
            let g = got.chk_classes().iter().find(|g| g.degrees == c.degrees).unwrap();
            assert!((g.coeff - c.coeff).abs() <= 1e-4);
        }
    }

    let dir = TempDir::new().unwrap();
    let f = dir.path().join("reg.ens");
    fs::write(&f, "met-ensemble v1\nedge_types 1\nrate 0.5\nvar b=channel d=3 L=1\n").unwrap();
    let out = dir.path().join("full.ens");
    let o = metldpc(&["design-checks", path_str(&f), "--group", "1 residual", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let e = parse_ensemble(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(e.chk_classes().len(), 1);
    assert_eq!(e.chk_classes()[0].degrees.as_slice(), &[6]);
    assert!((e.chk_classes()[0].coeff - 0.5).abs() < 1e-12);
}

fn read_outputs(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn optimize_dd_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "ar.pop_size = 12\ntrials = 2\n").unwrap();
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = metldpc(&[
            "optimize",
            "--config",
            path_str(&cfg),
            "--mode",
            "dd",
            "--template",
            path_str(&data("templates/ref_half.tpl")),
            "--rate",
            "0.5",
            "--channel",
            "bec",
            "--seed",
            "4",
            "--out-dir",
            path_str(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let files = read_outputs(&a);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["ar_trace_0.csv", "ar_trace_1.csv", "best.ens", "run.cfg", "trials.csv"]
    );
    assert_eq!(files, read_outputs(&b));
    let best = parse_ensemble(&fs::read_to_string(a.join("best.ens")).unwrap()).unwrap();
    assert!(best.validate(1e-6).is_ok());
}

#[test]
fn optimize_requires_a_seed() {
    let dir = TempDir::new().unwrap();
    let o = metldpc(&[
        "optimize",
        "--template",
        path_str(&data("templates/ref_half.tpl")),
        "--rate",
        "0.5",
        "--channel",
        "bec",
        "--out-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn optimize_joint_matches_enumeration_on_tiny_space() {
    let dir = TempDir::new().unwrap();
    let tpl = dir.path().join("tiny.tpl");
    let text = fs::read_to_string(data("templates/toy.tpl"))
        .unwrap()
        .replace("d=2..5,0,0,0", "d=2..3,0,0,0");
    fs::write(&tpl, &text).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "ar.pop_size=10\ndife.population=4\ndife.max_generations=5\n").unwrap();
    let out = dir.path().join("out");
    let o = metldpc(&[
        "optimize",
        "--config",
        path_str(&cfg),
        "--mode",
        "joint",
        "--template",
        path_str(&tpl),
        "--rate",
        "0.5",
        "--channel",
        "bec",
        "--seed",
        "2",
        "--out-dir",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let got = field(&stdout(&o), "best");

    let t = parse_template(&text).unwrap();
    let problem = StructProblem {
        template: &t,
        rate: 0.5,
        channel: ChannelKind::Bec,
        de: DeConfig::default(),
        ar: ArConfig {
            pop_size: 10,
            seed: 2,
            ..ArConfig::default()
        },
    };
    let best = t
        .enumerate_genes(4)
        .unwrap()
        .iter()
        .map(|g| struct_objective(&problem, g))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((got - best).abs() < 5e-7, "cli {got} vs enumeration {best}");
    assert!(out.join("dife_trace_0.csv").exists());
}

#[test]
fn scan_writes_grid_and_summary() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("small.scan");
    fs::write(
        &spec,
        format!(
            "mode=coefficients\ntemplate={}\nrate=0.5\nchannel=bec\n\
             axis1.class=1\naxis1.range=0.5..0.55\naxis1.points=3\n\
             axis2.class=2\naxis2.center=0.124003\naxis2.step=0.01\naxis2.points=3\n",
            path_str(&data("templates/ref_half_fixed_punct.tpl"))
        ),
    )
    .unwrap();
    let csv = dir.path().join("grid.csv");
    let o = metldpc(&["scan", path_str(&spec), "--out", path_str(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = fs::read_to_string(&csv).unwrap();
    assert_eq!(grid.lines().next(), Some("axis1,axis2,threshold"));
    assert_eq!(grid.lines().count(), 10);
    assert!(stdout(&o).starts_with("max "));

    fs::write(&spec, "mode=coefficients\nbogus=1\n").unwrap();
    assert_eq!(metldpc(&["scan", path_str(&spec)]).status.code(), Some(2));
}

#[test]
fn reproduce_tables() {
    let o = metldpc(&["reproduce", "--table", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("code9") && out.contains("code10"));
    assert!(out.contains("all rows within tolerance"));
    assert_eq!(metldpc(&["reproduce", "--table", "4"]).status.code(), Some(2));
}
