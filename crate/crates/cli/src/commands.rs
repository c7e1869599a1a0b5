use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use metldpc::check_design::{design_checks, four_edge_groups, CheckGroup, CountRule};
use metldpc::data::reference;
use metldpc::density_evolution::{probe_trace_csv, shannon_limit, threshold, ChannelKind, DeConfig};
use metldpc::ensemble::{parse_ensemble, serialize_ensemble, Constraint, DEFAULT_TOL};
use metldpc::landscape::{scan, Axis, ScanMode, ScanSpec};
use metldpc::optimizer_ar::{optimize_coefficients, ArConfig};
use metldpc::optimizer_struct::{dife_optimize, DifeConfig, GeneCache, StructProblem};
use metldpc::template::{parse_group_spec, parse_template, StructureTemplate};
use metldpc::{Ensemble, Error};

use crate::config::{apply_numeric, check_keys, KvFile, RunConfig};

/// Process exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A domain check failed: constraint violation, infeasible design or a
    /// value outside tolerance.
    Failure,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    parse_ensemble(&read(path)?).with_context(|| format!("in {}", path.display()))
}

pub fn load_template(path: &Path) -> Result<StructureTemplate> {
    parse_template(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// Signed residual of every constraint, violated or not.
fn residuals(ens: &Ensemble) -> Vec<(Constraint, f64)> {
    let transmitted: f64 = ens
        .var_classes()
        .iter()
        .filter(|v| !v.channel.is_punctured())
        .map(|v| v.coeff)
        .sum();
    let mut out = vec![
        (Constraint::TransmittedFraction, transmitted - 1.0),
        (Constraint::Rate, ens.code_rate() - ens.design_rate()),
    ];
    for t in 0..ens.edge_types() {
        out.push((
            Constraint::SocketCount { edge_type: t },
            ens.var_sockets(t) - ens.chk_sockets(t),
        ));
    }
    out
}

pub fn validate(path: &Path, tol: f64, out: &mut String) -> Result<Outcome> {
    let ens = load_ensemble(path)?;
    let report = ens.validate(tol);
    for (c, r) in residuals(&ens) {
        let mark = if r.abs() <= tol { "ok" } else { "VIOLATED" };
        let _ = writeln!(out, "{c}: residual {r:+.3e} {mark}");
    }
    let _ = writeln!(out, "rate {} (design {})", ens.code_rate(), ens.design_rate());
    if report.is_ok() {
        let _ = writeln!(out, "valid at tol {tol:e}");
        Ok(Outcome::Success)
    } else {
        let _ = writeln!(out, "{report}");
        Ok(Outcome::Failure)
    }
}

pub fn threshold_cmd(
    path: &Path,
    channel: ChannelKind,
    de: &DeConfig,
    trace: Option<&Path>,
    out: &mut String,
) -> Result<Outcome> {
    let ens = load_ensemble(path)?;
    let limit = shannon_limit(channel, ens.design_rate())?;
    let res = threshold(&ens, channel, de)?;
    if let Some(p) = trace {
        write(p, &probe_trace_csv(&res.probes))?;
    }
    let _ = writeln!(out, "channel {channel}");
    let _ = writeln!(out, "threshold {:.6}", res.threshold);
    let _ = writeln!(out, "bracket [{:.6}, {:.6}] {:?}", res.lower, res.upper, res.status);
    let _ = writeln!(out, "shannon_limit {limit:.6}");
    let _ = writeln!(out, "gap {:.6}", limit - res.threshold);
    Ok(Outcome::Success)
}

/// Grouping used when none is given: the standard four-type layout, or one
/// residual group per edge type otherwise.
fn default_groups(edge_types: usize) -> Vec<CheckGroup> {
    if edge_types == 4 {
        four_edge_groups()
    } else {
        (0..edge_types)
            .map(|t| CheckGroup::single(t, CountRule::Residual))
            .collect()
    }
}

pub fn design_checks_cmd(
    path: &Path,
    rate: Option<f64>,
    groups: &[String],
    out: &mut String,
) -> Result<Outcome> {
    let ens = load_ensemble(path)?;
    let rate = rate.unwrap_or(ens.design_rate());
    let groups = if groups.is_empty() {
        default_groups(ens.edge_types())
    } else {
        groups
            .iter()
            .map(|g| parse_group_spec(g).with_context(|| format!("bad group '{g}'")))
            .collect::<Result<_>>()?
    };
    let checks = design_checks(ens.var_classes(), ens.edge_types(), rate, &groups)?;
    let full = Ensemble::new(ens.edge_types(), ens.var_classes().to_vec(), checks, rate)?;
    out.push_str(&serialize_ensemble(&full));
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Coefficients of a fixed structure.
    Dd,
    /// Structure and coefficients together.
    Joint,
}

impl std::str::FromStr for Mode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dd" => Ok(Mode::Dd),
            "joint" => Ok(Mode::Joint),
            _ => bail!("unknown mode '{s}', expected dd or joint"),
        }
    }
}

/// Result row of one optimization trial.
struct Trial {
    seed: u64,
    threshold: f64,
    evaluations: usize,
    gene: Option<Vec<u32>>,
    ensemble: Ensemble,
}

/// Runs `trials` optimizations with seeds `seed, seed + 1, ...` and writes
/// `best.ens`, per-trial traces, `trials.csv` and the effective `run.cfg`
/// into `out_dir`.
pub fn optimize(cfg: &RunConfig, out: &mut String) -> Result<Outcome> {
    let mode: Mode = cfg.mode.as_deref().unwrap_or("dd").parse()?;
    let template_path = cfg
        .template
        .as_ref()
        .ok_or_else(|| anyhow!("optimize needs --template"))?;
    let rate = cfg.rate.ok_or_else(|| anyhow!("optimize needs --rate"))?;
    let channel = cfg
        .channel
        .ok_or_else(|| anyhow!("optimize needs --channel"))?;
    let seed = cfg
        .seed
        .ok_or_else(|| anyhow!("optimize needs --seed (or seed= in the config)"))?;
    let trials = cfg.trials.unwrap_or(1);
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let template = load_template(template_path)?;
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    write(&out_dir.join("run.cfg"), &cfg.to_kv_text())?;

    let mut rows = Vec::with_capacity(trials);
    let cache = GeneCache::new();
    for k in 0..trials {
        let trial_seed = seed.wrapping_add(k as u64);
        let row = match mode {
            Mode::Dd => {
                let structure = template.structure().map_err(|e| {
                    anyhow!(e).context("dd mode needs a template without degree ranges")
                })?;
                let ar = ArConfig {
                    seed: trial_seed,
                    ..cfg.ar
                };
                let o = optimize_coefficients(&structure, rate, channel, &cfg.de, &ar)?;
                write(&out_dir.join(format!("ar_trace_{k}.csv")), &o.trace.to_csv())?;
                Trial {
                    seed: trial_seed,
                    threshold: o.threshold.threshold,
                    evaluations: o.evaluations,
                    gene: None,
                    ensemble: o.ensemble,
                }
            }
            Mode::Joint => {
                // The inner seed stays fixed so trials share scored genes.
                let problem = StructProblem {
                    template: &template,
                    rate,
                    channel,
                    de: cfg.de,
                    ar: ArConfig { seed, ..cfg.ar },
                };
                let dife = DifeConfig {
                    seed: trial_seed,
                    ..cfg.dife
                };
                let o = dife_optimize(&problem, &dife, Some(&cache))?;
                write(&out_dir.join(format!("dife_trace_{k}.csv")), &o.trace.to_csv())?;
                write(
                    &out_dir.join(format!("ar_trace_{k}.csv")),
                    &o.best.trace.to_csv(),
                )?;
                Trial {
                    seed: trial_seed,
                    threshold: o.best.threshold.threshold,
                    evaluations: o.evaluations,
                    gene: Some(o.gene),
                    ensemble: o.best.ensemble.clone(),
                }
            }
        };
        let _ = writeln!(out, "trial {k} seed {} threshold {:.6}", row.seed, row.threshold);
        rows.push(row);
    }

    let mut csv = String::from("trial,seed,threshold,evaluations,gene\n");
    for (k, r) in rows.iter().enumerate() {
        let gene = r
            .gene
            .as_ref()
            .map(|g| g.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        let _ = writeln!(csv, "{k},{},{},{},{gene}", r.seed, r.threshold, r.evaluations);
    }
    write(&out_dir.join("trials.csv"), &csv)?;

    let mut best = 0;
    for (k, r) in rows.iter().enumerate() {
        if r.threshold > rows[best].threshold {
            best = k;
        }
    }
    let best_row = &rows[best];
    write(&out_dir.join("best.ens"), &serialize_ensemble(&best_row.ensemble))?;
    let average = rows.iter().map(|r| r.threshold).sum::<f64>() / rows.len() as f64;
    let _ = writeln!(out, "best {:.6} (trial {best})", best_row.threshold);
    let _ = writeln!(out, "average {average:.6}");
    let _ = writeln!(out, "gap {:.6}", shannon_limit(channel, rate)? - best_row.threshold);
    let _ = writeln!(out, "wrote {}", out_dir.join("best.ens").display());
    Ok(Outcome::Success)
}

const SCAN_KEYS: &[&str] = &[
    "mode",
    "template",
    "rate",
    "channel",
    "seed",
    "axis1.class",
    "axis1.range",
    "axis1.center",
    "axis1.step",
    "axis1.points",
    "axis2.class",
    "axis2.range",
    "axis2.center",
    "axis2.step",
    "axis2.points",
];

fn required<'a>(kv: &'a KvFile, key: &str) -> Result<&'a str> {
    kv.get(key).ok_or_else(|| anyhow!("missing key '{key}'"))
}

/// `axisN.range=lo..hi` or `axisN.center` with `axisN.step`, plus
/// `axisN.points`.
fn parse_axis(kv: &KvFile, n: u8) -> Result<Axis> {
    let key = |s: &str| format!("axis{n}.{s}");
    let points: usize = kv
        .parsed(&key("points"))?
        .unwrap_or(metldpc::landscape::DEFAULT_POINTS);
    if let Some(r) = kv.get(&key("range")) {
        let (lo, hi) = r
            .split_once("..")
            .ok_or_else(|| anyhow!("{} must be lo..hi", key("range")))?;
        let lo: f64 = lo.trim().parse().with_context(|| format!("bad {}", key("range")))?;
        let hi: f64 = hi.trim().parse().with_context(|| format!("bad {}", key("range")))?;
        return Axis::new(lo, hi, points).map_err(|e| anyhow!("{e}"));
    }
    let center: f64 = kv
        .parsed(&key("center"))?
        .ok_or_else(|| anyhow!("axis {n} needs a range or a center"))?;
    let step: f64 = kv
        .parsed(&key("step"))?
        .ok_or_else(|| anyhow!("missing key '{}'", key("step")))?;
    Axis::centered(center, step, points).map_err(|e| anyhow!("{e}"))
}

/// Parses a scan specification; relative paths resolve against `base`.
pub fn parse_scan_spec(kv: &KvFile, base: &Path) -> Result<ScanSpec> {
    check_keys(kv, SCAN_KEYS)?;
    let template = load_template(&base.join(required(kv, "template")?))?;
    let rate: f64 = kv.parsed("rate")?.ok_or_else(|| anyhow!("missing key 'rate'"))?;
    let channel: ChannelKind = required(kv, "channel")?
        .parse()
        .map_err(|e| anyhow!("{e}"))?;
    let mut de = DeConfig::default();
    let mut ar = ArConfig::default();
    let mut dife = DifeConfig::default();
    apply_numeric(kv, &mut de, &mut ar, &mut dife)?;
    let mode = match required(kv, "mode")? {
        "coefficients" => {
            let class = |n: u8| -> Result<usize> {
                let c: usize = kv
                    .parsed(&format!("axis{n}.class"))?
                    .ok_or_else(|| anyhow!("missing key 'axis{n}.class'"))?;
                if c == 0 {
                    bail!("class indices start at 1");
                }
                Ok(c - 1)
            };
            ScanMode::Coefficients {
                class1: class(1)?,
                class2: class(2)?,
                axis1: parse_axis(kv, 1)?,
                axis2: parse_axis(kv, 2)?,
            }
        }
        "degrees" => {
            let seed = kv
                .parsed("seed")?
                .ok_or_else(|| anyhow!("degree scans need a seed"))?;
            ScanMode::Degrees {
                ar: ArConfig { seed, ..ar },
            }
        }
        other => bail!("unknown scan mode '{other}', expected coefficients or degrees"),
    };
    Ok(ScanSpec {
        template,
        rate,
        channel,
        de,
        mode,
    })
}

pub fn scan_cmd(spec_path: &Path, csv_out: Option<&Path>, out: &mut String) -> Result<Outcome> {
    let kv = KvFile::read(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let spec = parse_scan_spec(&kv, base).with_context(|| format!("in {}", spec_path.display()))?;
    let grid = scan(&spec)?;
    let csv = grid.to_csv();
    match csv_out {
        Some(p) => {
            write(p, &csv)?;
            match grid.max() {
                Some((i, j, v)) => {
                    let _ = writeln!(
                        out,
                        "max {v:.6} at ({}, {})",
                        grid.axis1[i], grid.axis2[j]
                    );
                }
                None => {
                    let _ = writeln!(out, "no feasible cell");
                }
            }
            let maxima = grid.strict_local_maxima(true);
            let _ = writeln!(out, "interior strict local maxima {}", maxima.len());
            for (i, j) in maxima {
                let _ = writeln!(
                    out,
                    "  ({}, {}) {:.6}",
                    grid.axis1[i],
                    grid.axis2[j],
                    grid.get(i, j)
                );
            }
        }
        None => out.push_str(&csv),
    }
    Ok(Outcome::Success)
}

/// Names of the bundled ensembles shown in each table.
fn table_rows(table: u8) -> Result<&'static [&'static str]> {
    Ok(match table {
        1 => &["ref1", "code1", "code2", "code3", "code4"],
        2 => &["ref2", "code5", "code6", "code7", "code8"],
        3 => &["code9", "code10"],
        _ => bail!("unknown table {table}, expected 1, 2 or 3"),
    })
}

pub const BEC_TOL: f64 = 5e-4;

/// Tolerance band of the Gaussian-approximation AWGN thresholds.
pub fn awgn_tol(rate: f64) -> f64 {
    if rate >= 0.25 {
        0.03
    } else {
        0.05
    }
}

pub fn reproduce(table: u8, de: &DeConfig, out: &mut String) -> Result<Outcome> {
    let mut all_ok = true;
    let mut constraints_ok = true;
    let _ = writeln!(
        out,
        "{:<7} {:<6} {:>10} {:>10} {:>10} {:>8}  result",
        "code", "chan", "computed", "published", "diff", "tol"
    );
    let mut line = |out: &mut String, name: &str, kind: ChannelKind, got: f64, want: f64, tol: f64| {
        let ok = (got - want).abs() <= tol;
        all_ok &= ok;
        let kind = kind.to_string();
        let _ = writeln!(
            out,
            "{name:<7} {kind:<6} {got:>10.6} {want:>10.6} {:>+10.6} {tol:>8.0e}  {}",
            got - want,
            if ok { "ok" } else { "FAIL" }
        );
    };
    for name in table_rows(table)? {
        let r = reference(name).ok_or_else(|| anyhow!("no bundled ensemble {name}"))?;
        let ens = r.ensemble();
        let rate = ens.design_rate();
        let report = ens.validate(DEFAULT_TOL);
        if !report.is_ok() {
            constraints_ok = false;
            let _ = writeln!(out, "{name:<7} constraints FAIL: {report}");
        }
        let tol = |k: ChannelKind| match k {
            ChannelKind::Bec => BEC_TOL,
            ChannelKind::BiAwgn => awgn_tol(rate),
        };
        let th = threshold(&ens, r.channel, de)?.threshold;
        line(out, name, r.channel, th, r.threshold, tol(r.channel));
        if r.channel == ChannelKind::Bec {
            let gap = shannon_limit(ChannelKind::Bec, rate)? - th;
            line(out, "  gap", r.channel, gap, r.gap, BEC_TOL);
        }
        if let Some(other) = r.other_threshold {
            let kind = match r.channel {
                ChannelKind::Bec => ChannelKind::BiAwgn,
                ChannelKind::BiAwgn => ChannelKind::Bec,
            };
            let th = threshold(&ens, kind, de)?.threshold;
            line(out, name, kind, th, other, tol(kind));
        }
    }
    let all_ok = all_ok && constraints_ok;
    let _ = writeln!(out, "{}", if all_ok { "all rows within tolerance" } else { "some rows out of tolerance" });
    Ok(if all_ok { Outcome::Success } else { Outcome::Failure })
}

/// Exit status for an error: 1 for domain failures, 2 for input, usage and
/// I/O problems.
pub fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Infeasible(_) | Error::InvalidArgument(_) | Error::Internal(_) => 1,
                Error::Parse { .. } | Error::Config(_) => 2,
            };
        }
    }
    2
}
