//! `key=value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Keys are dotted
//! (`ar.pop_size`, `de.max_iter`, ...); unknown keys are rejected so that a
//! typo never silently falls back to a default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use metldpc::density_evolution::{ChannelKind, DeConfig, PhiKernel};
use metldpc::optimizer_ar::ArConfig;
use metldpc::optimizer_struct::DifeConfig;

/// Ordered key=value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    pub entries: Vec<(usize, String, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", k + 1))?;
            let key = key.trim().to_string();
            if entries.iter().any(|(_, e, _)| *e == key) {
                bail!("line {}: duplicate key '{key}'", k + 1);
            }
            entries.push((k + 1, key, value.trim().to_string()));
        }
        Ok(KvFile { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(_, _, v)| v.as_str())
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("bad value '{v}' for {key}: {e}"))
            })
            .transpose()
    }
}

/// Settings shared by the computing subcommands. Command-line flags are
/// applied on top of a loaded file.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub trials: Option<usize>,
    pub mode: Option<String>,
    pub template: Option<PathBuf>,
    pub rate: Option<f64>,
    pub channel: Option<ChannelKind>,
    pub out_dir: Option<PathBuf>,
    pub de: DeConfig,
    pub ar: ArConfig,
    pub dife: DifeConfig,
}

const RUN_KEYS: &[&str] = &[
    "seed", "threads", "trials", "mode", "template", "rate", "channel", "out_dir",
];

/// Keys consumed by [`apply_numeric`]; other commands may add their own.
pub const NUMERIC_KEYS: &[&str] = &[
    "de.tol",
    "de.max_iter",
    "de.stall_window",
    "de.rel_stall",
    "de.bisect_tol_bec",
    "de.bisect_tol_awgn",
    "de.m_max",
    "de.kernel",
    "ar.pop_size",
    "ar.range_mult",
    "ar.init_range",
    "ar.delta",
    "ar.stall_generations",
    "ar.max_generations",
    "ar.min_range",
    "ar.max_range",
    "dife.population",
    "dife.f",
    "dife.cr",
    "dife.max_generations",
    "dife.stall_generations",
];

/// Reads the `de.*`, `ar.*` and `dife.*` keys of `kv` into the configs.
pub fn apply_numeric(
    kv: &KvFile,
    de: &mut DeConfig,
    ar: &mut ArConfig,
    dife: &mut DifeConfig,
) -> Result<()> {
    macro_rules! set {
        ($key:literal, $field:expr) => {
            if let Some(v) = kv.parsed($key)? {
                $field = v;
            }
        };
    }
    set!("de.tol", de.de_tol);
    set!("de.max_iter", de.max_iter);
    set!("de.stall_window", de.stall_window);
    set!("de.rel_stall", de.rel_stall);
    set!("de.bisect_tol_bec", de.bisect_tol_bec);
    set!("de.bisect_tol_awgn", de.bisect_tol_awgn);
    set!("de.m_max", de.m_max);
    if let Some(k) = kv.get("de.kernel") {
        de.kernel = k.parse::<PhiKernel>().map_err(|e| anyhow!("{e}"))?;
    }
    set!("ar.pop_size", ar.pop_size);
    set!("ar.range_mult", ar.range_mult);
    set!("ar.init_range", ar.init_range);
    set!("ar.delta", ar.delta);
    set!("ar.stall_generations", ar.stall_generations);
    set!("ar.max_generations", ar.max_generations);
    set!("ar.min_range", ar.min_range);
    set!("ar.max_range", ar.max_range);
    set!("dife.population", dife.population);
    set!("dife.f", dife.f);
    set!("dife.cr", dife.cr);
    set!("dife.max_generations", dife.max_generations);
    set!("dife.stall_generations", dife.stall_generations);
    Ok(())
}

/// Rejects keys outside `allowed` and [`NUMERIC_KEYS`].
pub fn check_keys(kv: &KvFile, allowed: &[&str]) -> Result<()> {
    for (line, key, _) in &kv.entries {
        if !allowed.contains(&key.as_str()) && !NUMERIC_KEYS.contains(&key.as_str()) {
            bail!("line {line}: unknown key '{key}'");
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_kv(kv: &KvFile, base: &Path) -> Result<Self> {
        check_keys(kv, RUN_KEYS)?;
        let mut cfg = RunConfig {
            seed: kv.parsed("seed")?,
            threads: kv.parsed("threads")?,
            trials: kv.parsed("trials")?,
            mode: kv.get("mode").map(str::to_string),
            template: kv.get("template").map(|p| base.join(p)),
            rate: kv.parsed("rate")?,
            channel: kv
                .get("channel")
                .map(|c| c.parse().map_err(|e| anyhow!("{e}")))
                .transpose()?,
            out_dir: kv.get("out_dir").map(|p| base.join(p)),
            ..RunConfig::default()
        };
        apply_numeric(kv, &mut cfg.de, &mut cfg.ar, &mut cfg.dife)?;
        Ok(cfg)
    }

    /// Loads `path`; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KvFile::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_kv(&kv, base).with_context(|| format!("in {}", path.display()))
    }

    /// The effective configuration in the file format it was read from.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        if let Some(v) = &self.mode {
            put("mode", v.clone());
        }
        if let Some(v) = &self.template {
            put("template", v.display().to_string());
        }
        if let Some(v) = self.rate {
            put("rate", v.to_string());
        }
        if let Some(v) = self.channel {
            put("channel", v.to_string());
        }
        if let Some(v) = self.seed {
            put("seed", v.to_string());
        }
        if let Some(v) = self.trials {
            put("trials", v.to_string());
        }
        let (de, ar, dife) = (&self.de, &self.ar, &self.dife);
        put("de.tol", de.de_tol.to_string());
        put("de.max_iter", de.max_iter.to_string());
        put("de.stall_window", de.stall_window.to_string());
        put("de.rel_stall", de.rel_stall.to_string());
        put("de.bisect_tol_bec", de.bisect_tol_bec.to_string());
        put("de.bisect_tol_awgn", de.bisect_tol_awgn.to_string());
        put("de.m_max", de.m_max.to_string());
        put("de.kernel", de.kernel.to_string());
        put("ar.pop_size", ar.pop_size.to_string());
        put("ar.range_mult", ar.range_mult.to_string());
        put("ar.init_range", ar.init_range.to_string());
        put("ar.delta", ar.delta.to_string());
        put("ar.stall_generations", ar.stall_generations.to_string());
        put("ar.max_generations", ar.max_generations.to_string());
        put("ar.min_range", ar.min_range.to_string());
        put("ar.max_range", ar.max_range.to_string());
        put("dife.population", dife.population.to_string());
        put("dife.f", dife.f.to_string());
        put("dife.cr", dife.cr.to_string());
        put("dife.max_generations", dife.max_generations.to_string());
        put("dife.stall_generations", dife.stall_generations.to_string());
        out
    }
}
