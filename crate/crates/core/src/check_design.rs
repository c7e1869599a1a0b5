//! Concentrated check-node design.
//!
//! Given the variable side `(Lambda, L)` and a design rate, the check side
//! `(Gamma, R)` is fully determined: each check group receives a check count,
//! the per-type average check degree is split over the two nearest integers
//! so that socket counts balance exactly, and the per-type splits of a
//! two-type group are paired monotonically (low with low, high with high),
//! which needs at most three check classes.

use crate::ensemble::{variable_sockets, CheckClass, EdgeVector, Ensemble, VariableClass};
use crate::error::{Error, Result};

/// Tolerance for integral averages and equal split counts.
pub const TIE_EPS: f64 = 1e-9;

/// How a group's check count is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountRule {
    /// Receives whatever remains of `L(1,1) - rate` after all other groups.
    Residual,
    /// One check per variable socket of the given edge type, i.e. every check
    /// in the group carries exactly one edge of that type.
    OneSocketPerCheck(usize),
}

/// A set of one or two edge types whose check sockets live on the same
/// check nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckGroup {
    pub first: usize,
    pub second: Option<usize>,
    pub count_rule: CountRule,
}

impl CheckGroup {
    pub fn pair(first: usize, second: usize, count_rule: CountRule) -> Self {
        CheckGroup {
            first,
            second: Some(second),
            count_rule,
        }
    }

    pub fn single(edge_type: usize, count_rule: CountRule) -> Self {
        CheckGroup {
            first: edge_type,
            second: None,
            count_rule,
        }
    }

    pub fn edge_types(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.first).chain(self.second)
    }
}

/// Checks that groups are disjoint, in range, and have at most one residual.
pub fn check_groups(groups: &[CheckGroup], edge_types: usize) -> Result<()> {
    let mut owner = vec![None; edge_types];
    let mut residuals = 0;
    for (g, group) in groups.iter().enumerate() {
        if group.second == Some(group.first) {
            return Err(Error::Config(format!("group {} repeats an edge type", g + 1)));
        }
        for t in group.edge_types() {
            if t >= edge_types {
                return Err(Error::Config(format!(
                    "group {} names edge type {} of {edge_types}",
                    g + 1,
                    t + 1
                )));
            }
            if let Some(o) = owner[t] {
                return Err(Error::Config(format!(
                    "edge type {} is in groups {} and {}",
                    t + 1,
                    o + 1,
                    g + 1
                )));
            }
            owner[t] = Some(g);
        }
        match group.count_rule {
            CountRule::Residual => residuals += 1,
            CountRule::OneSocketPerCheck(k) if k >= edge_types => {
                return Err(Error::Config(format!(
                    "group {} counts sockets of edge type {} of {edge_types}",
                    g + 1,
                    k + 1
                )));
            }
            CountRule::OneSocketPerCheck(_) => {}
        }
    }
    if residuals > 1 {
        return Err(Error::Config("at most one residual check group is allowed".into()));
    }
    Ok(())
}

/// Check count of every group.
pub fn group_check_counts(
    vars: &[VariableClass],
    edge_types: usize,
    rate: f64,
    groups: &[CheckGroup],
) -> Result<Vec<f64>> {
    check_groups(groups, edge_types)?;
    let total: f64 = vars.iter().map(|v| v.coeff).sum::<f64>() - rate;
    let fixed: f64 = groups
        .iter()
        .filter_map(|g| match g.count_rule {
            CountRule::OneSocketPerCheck(k) => Some(variable_sockets(vars, k)),
            CountRule::Residual => None,
        })
        .sum();
    let counts: Vec<f64> = groups
        .iter()
        .map(|g| match g.count_rule {
            CountRule::OneSocketPerCheck(k) => variable_sockets(vars, k),
            CountRule::Residual => total - fixed,
        })
        .collect();
    if !groups.iter().any(|g| g.count_rule == CountRule::Residual)
        && (total - fixed).abs() > TIE_EPS
    {
        return Err(Error::Infeasible(format!(
            "check counts sum to {fixed}, rate requires {total}"
        )));
    }
    Ok(counts)
}

/// Average check degrees of a group's edge types, `(d_avg, d_avg_bar)`.
pub fn average_degrees(
    vars: &[VariableClass],
    edge_types: usize,
    rate: f64,
    groups: &[CheckGroup],
    group: usize,
) -> Result<(f64, Option<f64>)> {
    let counts = group_check_counts(vars, edge_types, rate, groups)?;
    let g = groups
        .get(group)
        .ok_or_else(|| Error::InvalidArgument(format!("no check group {group}")))?;
    let m = counts[group];
    if !(m > 0.0) {
        return Err(Error::Infeasible(format!(
            "check group {} has non-positive check count {m}",
            group + 1
        )));
    }
    Ok((
        variable_sockets(vars, g.first) / m,
        g.second.map(|j| variable_sockets(vars, j) / m),
    ))
}

/// Check degrees of one edge type concentrated on two consecutive integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentratedSplit {
    pub lo_degree: u32,
    pub hi_degree: u32,
    pub lo_count: f64,
    pub hi_count: f64,
}

impl ConcentratedSplit {
    pub fn total_count(&self) -> f64 {
        self.lo_count + self.hi_count
    }

    pub fn is_single(&self) -> bool {
        self.hi_count == 0.0
    }

    fn segments(&self) -> Vec<(u32, f64)> {
        let mut s = Vec::with_capacity(2);
        if self.lo_count > TIE_EPS || self.is_single() {
            s.push((self.lo_degree, self.lo_count));
        }
        if self.hi_count > TIE_EPS {
            s.push((self.hi_degree, self.hi_count));
        }
        if s.is_empty() {
            s.push((self.lo_degree, self.lo_count));
        }
        s
    }
}

/// Splits `edge_total` sockets over `check_count` checks with degrees
/// `floor(avg)` and `floor(avg) + 1`.
///
/// Averages below one are accepted here (a type may be absent from most
/// checks of a two-type group); [`design_checks`] rejects the resulting
/// classes if they are degenerate.
pub fn concentrate(edge_total: f64, check_count: f64) -> Result<ConcentratedSplit> {
    if !(check_count > 0.0) || !check_count.is_finite() {
        return Err(Error::Infeasible(format!(
            "non-positive check count {check_count}"
        )));
    }
    if !(edge_total >= -TIE_EPS) || !edge_total.is_finite() {
        return Err(Error::Infeasible(format!("negative edge total {edge_total}")));
    }
    let edge_total = edge_total.max(0.0);
    let avg = edge_total / check_count;
    let nearest = avg.round();
    if (avg - nearest).abs() <= TIE_EPS {
        let d = nearest as u32;
        return Ok(ConcentratedSplit {
            lo_degree: d,
            hi_degree: d,
            lo_count: check_count,
            hi_count: 0.0,
        });
    }
    let lo = avg.floor();
    let hi_count = edge_total - lo * check_count;
    Ok(ConcentratedSplit {
        lo_degree: lo as u32,
        hi_degree: lo as u32 + 1,
        lo_count: check_count - hi_count,
        hi_count,
    })
}

/// Pairs the splits of two edge types sharing the same checks.
///
/// Equal low counts give two classes; otherwise three, with the type whose
/// low count is smaller moving to its high degree first. Returned triples are
/// `(degree of first type, degree of second type, count)`.
pub fn combine_splits(
    first: &ConcentratedSplit,
    second: &ConcentratedSplit,
) -> Result<Vec<(u32, u32, f64)>> {
    let (ta, tb) = (first.total_count(), second.total_count());
    if (ta - tb).abs() > TIE_EPS * ta.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "split totals differ: {ta} vs {tb}"
        )));
    }
    let a = first.segments();
    let b = second.segments();
    let mut out = Vec::with_capacity(3);
    let (mut ia, mut ib) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    while ia < a.len() && ib < b.len() {
        let take = ra.min(rb);
        if (ra - rb).abs() <= TIE_EPS {
            out.push((a[ia].0, b[ib].0, ra));
            ia += 1;
            ib += 1;
            ra = a.get(ia).map_or(0.0, |s| s.1);
            rb = b.get(ib).map_or(0.0, |s| s.1);
        } else if ra < rb {
            out.push((a[ia].0, b[ib].0, take));
            rb -= take;
            ia += 1;
            ra = a.get(ia).map_or(0.0, |s| s.1);
        } else {
            out.push((a[ia].0, b[ib].0, take));
            ra -= take;
            ib += 1;
            rb = b.get(ib).map_or(0.0, |s| s.1);
        }
    }
    Ok(out)
}

/// Computes the concentrated check side for a variable side and rate.
///
/// Fails with [`Error::Infeasible`] when a group's check count is not
/// positive, when a produced class would have total degree below two, or when
/// an edge type with variable sockets has no check group.
pub fn design_checks(
    vars: &[VariableClass],
    edge_types: usize,
    rate: f64,
    groups: &[CheckGroup],
) -> Result<Vec<CheckClass>> {
    if let Some(v) = vars.iter().find(|v| v.degrees.len() != edge_types) {
        return Err(Error::InvalidArgument(format!(
            "variable class {} does not have {edge_types} edge types",
            v.degrees
        )));
    }
    if let Some(v) = vars.iter().find(|v| !(v.coeff >= 0.0)) {
        return Err(Error::Infeasible(format!(
            "variable class {} has coefficient {}",
            v.degrees, v.coeff
        )));
    }
    let counts = group_check_counts(vars, edge_types, rate, groups)?;
    for t in 0..edge_types {
        if variable_sockets(vars, t) > 0.0 && !groups.iter().any(|g| g.edge_types().any(|u| u == t))
        {
            return Err(Error::Infeasible(format!(
                "edge type {} has sockets but no check group",
                t + 1
            )));
        }
    }

    let mut checks = Vec::new();
    for (g, (group, &m)) in groups.iter().zip(&counts).enumerate() {
        let e1 = variable_sockets(vars, group.first);
        let e2 = group.second.map_or(0.0, |j| variable_sockets(vars, j));
        if e1 + e2 <= 0.0 {
            if m.abs() <= TIE_EPS {
                continue;
            }
            return Err(Error::Infeasible(format!(
                "check group {} has {m} checks but no edges",
                g + 1
            )));
        }
        if !(m > TIE_EPS) {
            return Err(Error::Infeasible(format!(
                "check group {} has non-positive check count {m}",
                g + 1
            )));
        }
        let s1 = concentrate(e1, m)?;
        let classes: Vec<(u32, u32, f64)> = match group.second {
            Some(_) => combine_splits(&s1, &concentrate(e2, m)?)?,
            None => s1
                .segments()
                .into_iter()
                .map(|(d, c)| (d, 0, c))
                .collect(),
        };
        for (d1, d2, count) in classes {
            if d1 + d2 < 2 {
                return Err(Error::Infeasible(format!(
                    "check group {} would need checks of degree {}",
                    g + 1,
                    d1 + d2
                )));
            }
            if count < 0.0 {
                return Err(Error::Infeasible(format!(
                    "check group {} produced negative coefficient {count}",
                    g + 1
                )));
            }
            let mut d = vec![0u32; edge_types];
            d[group.first] = d1;
            if let Some(j) = group.second {
                d[j] = d2;
            }
            checks.push(CheckClass::new(EdgeVector::new(d), count));
        }
    }
    Ok(checks)
}

/// Variable side plus designed check side as a complete ensemble.
pub fn complete_ensemble(
    vars: Vec<VariableClass>,
    edge_types: usize,
    rate: f64,
    groups: &[CheckGroup],
) -> Result<Ensemble> {
    let checks = design_checks(&vars, edge_types, rate, groups)?;
    Ensemble::new(edge_types, vars, checks, rate).map_err(|e| Error::Infeasible(e.to_string()))
}

/// The grouping used by every four-edge-type structure in this crate: types
/// 1-2 share the core checks, types 3-4 form the degree-one chain whose check
/// count equals the type-4 socket total.
pub fn four_edge_groups() -> Vec<CheckGroup> {
    vec![
        CheckGroup::pair(0, 1, CountRule::Residual),
        CheckGroup::pair(2, 3, CountRule::OneSocketPerCheck(3)),
    ]
}
