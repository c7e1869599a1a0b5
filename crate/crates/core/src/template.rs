//! Structure templates: the class layout searched by the optimizers.
//!
//! A template fixes the number of edge types, the check grouping and, for
//! each variable class slot, its channel assignment and a domain per edge
//! type (a fixed degree or an integer range). The ranged entries, in slot
//! order, form the integer gene searched by differential evolution; a
//! template without ranges is a single structure whose coefficients are
//! searched by the adaptive-range method.
//!
//! ```text
//! met-template v1
//! edge_types 4
//! v_max 4
//! c_max 5
//! d_vmax 10
//! group 1,2 residual
//! group 3,4 chain=4
//! class b=channel   d=2,0,0,0
//! class b=channel   d=3..6,0..3,0,0
//! class b=punctured d=0,3,3,0
//! class b=channel   d=0,0,0,1
//! tie 3=4
//! fix 3=0.271307
//! ```
//!
//! Edge types and classes are numbered from 1 in the file. `chain=k` means
//! one check per type-`k` variable socket. `tie a=b` gives class `a` the
//! coefficient of class `b`; `fix a=v` pins class `a` to `v`.

use std::fmt;

use crate::check_design::{check_groups, CheckGroup, CountRule};
use crate::ensemble::text::{
    key_values, lookup, meaningful_lines, parse_channel, parse_f64,
};
use crate::ensemble::{ChannelAssignment, EdgeVector};
use crate::error::{Error, Result};

pub const HEADER: &str = "met-template v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeDomain {
    Fixed(u32),
    /// Inclusive integer range.
    Range(u32, u32),
}

impl DegreeDomain {
    pub fn lo(self) -> u32 {
        match self {
            DegreeDomain::Fixed(d) | DegreeDomain::Range(d, _) => d,
        }
    }

    pub fn hi(self) -> u32 {
        match self {
            DegreeDomain::Fixed(d) | DegreeDomain::Range(_, d) => d,
        }
    }

    pub fn is_free(self) -> bool {
        matches!(self, DegreeDomain::Range(lo, hi) if hi > lo)
    }
}

impl fmt::Display for DegreeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeDomain::Fixed(d) => write!(f, "{d}"),
            DegreeDomain::Range(lo, hi) => write!(f, "{lo}..{hi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSlot {
    pub channel: ChannelAssignment,
    pub degrees: Vec<DegreeDomain>,
}

/// A concrete variable-side structure: class layout without coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub edge_types: usize,
    pub classes: Vec<(ChannelAssignment, EdgeVector)>,
    pub check_groups: Vec<CheckGroup>,
    /// `(target, source)` class index pairs: target takes source's coefficient.
    pub ties: Vec<(usize, usize)>,
    /// Classes pinned to a coefficient.
    pub fixed: Vec<(usize, f64)>,
    pub c_max: Option<usize>,
}

impl Structure {
    pub fn max_variable_degree(&self) -> u32 {
        self.classes.iter().map(|(_, d)| d.total()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureTemplate {
    pub edge_types: usize,
    pub v_max: usize,
    pub c_max: usize,
    pub d_vmax: u32,
    pub check_groups: Vec<CheckGroup>,
    pub slots: Vec<ClassSlot>,
    pub ties: Vec<(usize, usize)>,
    pub fixed: Vec<(usize, f64)>,
}

impl StructureTemplate {
    pub fn new(
        edge_types: usize,
        limits: (usize, usize, u32),
        check_groups: Vec<CheckGroup>,
        slots: Vec<ClassSlot>,
    ) -> Result<Self> {
        let (v_max, c_max, d_vmax) = limits;
        let t = StructureTemplate {
            edge_types,
            v_max,
            c_max,
            d_vmax,
            check_groups,
            slots,
            ties: Vec::new(),
            fixed: Vec::new(),
        };
        t.check()?;
        Ok(t)
    }

    pub fn with_ties(mut self, ties: Vec<(usize, usize)>) -> Result<Self> {
        self.ties = ties;
        self.check()?;
        Ok(self)
    }

    pub fn with_fixed(mut self, fixed: Vec<(usize, f64)>) -> Result<Self> {
        self.fixed = fixed;
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        if self.edge_types == 0 || self.v_max == 0 || self.c_max == 0 || self.d_vmax == 0 {
            return Err(Error::Config("template limits must be positive".into()));
        }
        if self.slots.is_empty() {
            return Err(Error::Config("template has no class slots".into()));
        }
        check_groups(&self.check_groups, self.edge_types)?;
        for (k, s) in self.slots.iter().enumerate() {
            if s.degrees.len() != self.edge_types {
                return Err(Error::Config(format!(
                    "class {} has {} degree domains, edge_types is {}",
                    k + 1,
                    s.degrees.len(),
                    self.edge_types
                )));
            }
            if let Some(d) = s.degrees.iter().find(|d| d.lo() > d.hi()) {
                return Err(Error::Config(format!("class {} has empty domain {d}", k + 1)));
            }
        }
        let n = self.slots.len();
        for &(a, b) in &self.ties {
            if a >= n || b >= n || a == b {
                return Err(Error::Config(format!("bad tie {}={}", a + 1, b + 1)));
            }
            if self.ties.iter().any(|&(x, _)| x == b) {
                return Err(Error::Config(format!(
                    "tie {}={} points at a tied class",
                    a + 1,
                    b + 1
                )));
            }
        }
        for &(a, v) in &self.fixed {
            if a >= n || !(v >= 0.0) {
                return Err(Error::Config(format!("bad fix {}={v}", a + 1)));
            }
            if self.ties.iter().any(|&(x, _)| x == a) {
                return Err(Error::Config(format!("class {} is both tied and fixed", a + 1)));
            }
        }
        Ok(())
    }

    /// Domain of every gene entry, in slot then edge-type order.
    pub fn gene_domains(&self) -> Vec<(u32, u32)> {
        self.slots
            .iter()
            .flat_map(|s| s.degrees.iter())
            .filter(|d| d.is_free())
            .map(|d| (d.lo(), d.hi()))
            .collect()
    }

    pub fn gene_len(&self) -> usize {
        self.gene_domains().len()
    }

    /// Number of distinct genes, saturating.
    pub fn gene_space_size(&self) -> u64 {
        self.gene_domains()
            .iter()
            .fold(1u64, |acc, &(lo, hi)| acc.saturating_mul(u64::from(hi - lo + 1)))
    }

    /// Every gene in lexicographic order; `None` if there are more than
    /// `limit`.
    pub fn enumerate_genes(&self, limit: u64) -> Option<Vec<Vec<u32>>> {
        if self.gene_space_size() > limit {
            return None;
        }
        let doms = self.gene_domains();
        let mut out = vec![Vec::with_capacity(doms.len())];
        for &(lo, hi) in &doms {
            out = out
                .into_iter()
                .flat_map(|g| {
                    (lo..=hi).map(move |v| {
                        let mut g = g.clone();
                        g.push(v);
                        g
                    })
                })
                .collect();
        }
        Some(out)
    }

    /// Builds the structure encoded by `gene`. Classes whose degrees all
    /// decode to zero are dropped, together with any tie or fix naming them.
    /// Fails with [`Error::Infeasible`] when a limit is exceeded or two
    /// classes coincide.
    pub fn decode_gene(&self, gene: &[u32]) -> Result<Structure> {
        let doms = self.gene_domains();
        if gene.len() != doms.len() {
            return Err(Error::InvalidArgument(format!(
                "gene has {} entries, template needs {}",
                gene.len(),
                doms.len()
            )));
        }
        if let Some((k, _)) = gene
            .iter()
            .zip(&doms)
            .enumerate()
            .find(|(_, (&g, &(lo, hi)))| g < lo || g > hi)
        {
            return Err(Error::InvalidArgument(format!("gene entry {} out of domain", k + 1)));
        }
        let mut next = gene.iter();
        let mut kept = Vec::new();
        let mut index_map = vec![None; self.slots.len()];
        for (k, s) in self.slots.iter().enumerate() {
            let d: Vec<u32> = s
                .degrees
                .iter()
                .map(|dom| {
                    if dom.is_free() {
                        *next.next().expect("gene length checked")
                    } else {
                        dom.lo()
                    }
                })
                .collect();
            if d.iter().all(|&x| x == 0) {
                continue;
            }
            let d = EdgeVector::new(d);
            if d.total() > self.d_vmax {
                return Err(Error::Infeasible(format!(
                    "class {} has degree {} above {}",
                    k + 1,
                    d.total(),
                    self.d_vmax
                )));
            }
            if kept.iter().any(|(b, e)| *b == s.channel && *e == d) {
                return Err(Error::Infeasible(format!("class {} duplicates {} {d}", k + 1, s.channel)));
            }
            index_map[k] = Some(kept.len());
            kept.push((s.channel, d));
        }
        if kept.len() > self.v_max {
            return Err(Error::Infeasible(format!(
                "{} variable classes above {}",
                kept.len(),
                self.v_max
            )));
        }
        if !kept.iter().any(|(b, _)| !b.is_punctured()) {
            return Err(Error::Infeasible("no transmitted class".into()));
        }
        let ties = self
            .ties
            .iter()
            .filter_map(|&(a, b)| Some((index_map[a]?, index_map[b]?)))
            .collect();
        let fixed = self
            .fixed
            .iter()
            .filter_map(|&(a, v)| Some((index_map[a]?, v)))
            .collect();
        Ok(Structure {
            edge_types: self.edge_types,
            classes: kept,
            check_groups: self.check_groups.clone(),
            ties,
            fixed,
            c_max: Some(self.c_max),
        })
    }

    /// The single structure of a template without free degrees.
    pub fn structure(&self) -> Result<Structure> {
        if self.gene_len() != 0 {
            return Err(Error::Config(format!(
                "template has {} free degrees; expected a fixed structure",
                self.gene_len()
            )));
        }
        self.decode_gene(&[])
    }
}

fn parse_domain(line: usize, s: &str) -> Result<DegreeDomain> {
    let num = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|_| Error::parse(line, format!("bad degree '{t}'")))
    };
    match s.split_once("..") {
        Some((a, b)) => {
            let (lo, hi) = (num(a)?, num(b)?);
            if lo > hi {
                return Err(Error::parse(line, format!("empty range '{s}'")));
            }
            Ok(if lo == hi {
                DegreeDomain::Fixed(lo)
            } else {
                DegreeDomain::Range(lo, hi)
            })
        }
        None => Ok(DegreeDomain::Fixed(num(s)?)),
    }
}

fn parse_index(line: usize, s: &str, what: &str) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k - 1),
        _ => Err(Error::parse(line, format!("bad {what} index '{s}'"))),
    }
}

fn parse_group(line: usize, tokens: &[&str]) -> Result<CheckGroup> {
    if tokens.len() != 2 {
        return Err(Error::parse(line, "expected 'group <types> residual|chain=<k>'"));
    }
    let types: Vec<usize> = tokens[0]
        .split(',')
        .map(|t| parse_index(line, t, "edge type"))
        .collect::<Result<_>>()?;
    let rule = match tokens[1] {
        "residual" => CountRule::Residual,
        r => match r.strip_prefix("chain=") {
            Some(k) => CountRule::OneSocketPerCheck(parse_index(line, k, "edge type")?),
            None => return Err(Error::parse(line, format!("unknown count rule '{r}'"))),
        },
    };
    match types.as_slice() {
        [a] => Ok(CheckGroup::single(*a, rule)),
        [a, b] => Ok(CheckGroup::pair(*a, *b, rule)),
        _ => Err(Error::parse(line, "a group holds one or two edge types")),
    }
}

/// Parses a group written as in a template file, e.g. `"3,4 chain=4"`.
pub fn parse_group_spec(s: &str) -> Result<CheckGroup> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    parse_group(1, &tokens)
}

pub fn parse_template(text: &str) -> Result<StructureTemplate> {
    let mut lines = meaningful_lines(text);
    let (first, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty template file"))?;
    if header != HEADER {
        return Err(Error::parse(first, format!("expected header '{HEADER}'")));
    }
    let mut edge_types = None;
    let (mut v_max, mut c_max, mut d_vmax) = (None, None, None);
    let mut groups = Vec::new();
    let mut slots = Vec::new();
    let mut ties = Vec::new();
    let mut fixed = Vec::new();
    for (ln, content) in lines {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let single = |what: &str| -> Result<u32> {
            match tokens.as_slice() {
                [_, v] => v
                    .parse()
                    .map_err(|_| Error::parse(ln, format!("bad {what} '{v}'"))),
                _ => Err(Error::parse(ln, format!("expected '{what} <n>'"))),
            }
        };
        match tokens[0] {
            "edge_types" => edge_types = Some(single("edge_types")? as usize),
            "v_max" => v_max = Some(single("v_max")? as usize),
            "c_max" => c_max = Some(single("c_max")? as usize),
            "d_vmax" => d_vmax = Some(single("d_vmax")?),
            "group" => groups.push(parse_group(ln, &tokens[1..])?),
            "class" => {
                let me = edge_types
                    .ok_or_else(|| Error::parse(ln, "class line before 'edge_types'"))?;
                let kv = key_values(ln, &tokens[1..])?;
                let channel = parse_channel(ln, lookup(ln, &kv, "b")?)?;
                let degrees: Vec<DegreeDomain> = lookup(ln, &kv, "d")?
                    .split(',')
                    .map(|t| parse_domain(ln, t))
                    .collect::<Result<_>>()?;
                if degrees.len() != me {
                    return Err(Error::parse(
                        ln,
                        format!("d has {} entries, edge_types is {me}", degrees.len()),
                    ));
                }
                slots.push(ClassSlot { channel, degrees });
            }
            "tie" | "fix" => {
                let arg = match tokens.as_slice() {
                    [_, a] => *a,
                    _ => return Err(Error::parse(ln, format!("expected '{} a=b'", tokens[0]))),
                };
                let (a, b) = arg
                    .split_once('=')
                    .ok_or_else(|| Error::parse(ln, format!("expected a=b, got '{arg}'")))?;
                let a = parse_index(ln, a, "class")?;
                if tokens[0] == "tie" {
                    ties.push((a, parse_index(ln, b, "class")?));
                } else {
                    fixed.push((a, parse_f64(ln, "coefficient", b)?));
                }
            }
            other => return Err(Error::parse(ln, format!("unknown directive '{other}'"))),
        }
    }
    let missing = |what: &str| Error::parse(first, format!("missing '{what}'"));
    let me = edge_types.ok_or_else(|| missing("edge_types"))?;
    StructureTemplate::new(
        me,
        (
            v_max.unwrap_or(usize::MAX),
            c_max.unwrap_or(usize::MAX),
            d_vmax.ok_or_else(|| missing("d_vmax"))?,
        ),
        groups,
        slots,
    )
    .and_then(|t| t.with_ties(ties))
    .and_then(|t| t.with_fixed(fixed))
    .map_err(|e| match e {
        Error::Config(m) => Error::parse(0, m),
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check_design::four_edge_groups;

    const FIG4: &str = "\
met-template v1
edge_types 4
v_max 4
c_max 5
d_vmax 10
group 1,2 residual
group 3,4 chain=4
class b=channel d=2..5,0,0,0
class b=channel d=5,0..3,0,0
class b=punctured d=0,3,3,0
class b=channel d=0,0,0,1
";

    #[test]
    fn parses_groups_and_domains() {
        let t = parse_template(FIG4).unwrap();
        assert_eq!(t.check_groups, four_edge_groups());
        assert_eq!(t.gene_domains(), vec![(2, 5), (0, 3)]);
        assert_eq!(t.gene_space_size(), 16);
        assert_eq!(t.enumerate_genes(16).unwrap().len(), 16);
        assert!(t.enumerate_genes(15).is_none());
    }

    #[test]
    fn decodes_table_structure() {
        let t = parse_template(FIG4).unwrap();
        let s = t.decode_gene(&[2, 0]).unwrap();
        assert_eq!(s.classes[0].1.as_slice(), &[2, 0, 0, 0]);
        assert_eq!(s.classes[1].1.as_slice(), &[5, 0, 0, 0]);
        assert!(s.classes[2].0.is_punctured());
        assert_eq!(s.max_variable_degree(), 6);
    }

    #[test]
    fn limits_make_genes_infeasible() {
        let t = parse_template(&FIG4.replace("d_vmax 10", "d_vmax 7")).unwrap();
        assert!(matches!(t.decode_gene(&[2, 3]), Err(Error::Infeasible(_))));
        let t = parse_template(&FIG4.replace("v_max 4", "v_max 3")).unwrap();
        assert!(matches!(t.decode_gene(&[2, 0]), Err(Error::Infeasible(_))));
        assert!(matches!(
            parse_template(FIG4).unwrap().decode_gene(&[6, 0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn duplicate_classes_are_infeasible() {
        let t = parse_template(&FIG4.replace("d=5,0..3,0,0", "d=2..5,0,0,0")).unwrap();
        assert!(matches!(t.decode_gene(&[3, 3]), Err(Error::Infeasible(_))));
        assert!(t.decode_gene(&[3, 4]).is_ok());
    }

    #[test]
    fn zero_classes_dropped_with_their_ties() {
        let text = FIG4.replace("d=0,3,3,0", "d=0,0..3,0..3,0") + "tie 3=4\n";
        let t = parse_template(&text).unwrap();
        let s = t.decode_gene(&[2, 0, 0, 0]).unwrap();
        assert_eq!(s.classes.len(), 3);
        assert!(s.ties.is_empty());
        let s = t.decode_gene(&[2, 0, 3, 3]).unwrap();
        assert_eq!(s.ties, vec![(2, 3)]);
    }

    #[test]
    fn parse_errors_have_lines() {
        let bad = FIG4.replace("d=0,3,3,0", "d=0,3,3");
        assert!(matches!(parse_template(&bad), Err(Error::Parse { line: 10, .. })));
        let bad = FIG4.replace("chain=4", "chain=x");
        assert!(matches!(parse_template(&bad), Err(Error::Parse { line: 7, .. })));
        let bad = format!("{FIG4}tie 1=1\n");
        assert!(parse_template(&bad).is_err());
    }
}
