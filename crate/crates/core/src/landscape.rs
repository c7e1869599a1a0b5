//! Two-dimensional threshold scans.
//!
//! In coefficient mode the axes are the coefficients of two classes of a
//! fixed structure; every other free coefficient must be pinned by a `fix`
//! line or a tie, and the dependent one follows from the others. In degree
//! mode the axes are the two free degrees of a template and each cell holds
//! the threshold after optimizing that structure's coefficients.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::density_evolution::{ChannelKind, DeConfig};
use crate::error::{Error, Result};
use crate::optimizer_ar::{ArConfig, CoefficientProblem};
use crate::optimizer_struct::{struct_objective, StructProblem};
use crate::template::StructureTemplate;

pub const DEFAULT_POINTS: usize = 25;

/// Evenly spaced axis values, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points == 0 || !(lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "axis [{lo}, {hi}] with {points} points is empty"
            )));
        }
        Ok(Axis { lo, hi, points })
    }

    /// An axis of `points` values with `center` among them, spaced by `step`.
    pub fn centered(center: f64, step: f64, points: usize) -> Result<Self> {
        let below = ((points - 1) / 2) as f64;
        let lo = center - below * step;
        Self::new(lo, lo + (points - 1) as f64 * step, points)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.hi
                } else {
                    self.lo + k as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanMode {
    /// Class indices (0-based) whose coefficients span the axes.
    Coefficients {
        class1: usize,
        class2: usize,
        axis1: Axis,
        axis2: Axis,
    },
    /// Enumerates the template's two free degrees.
    Degrees { ar: ArConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub template: StructureTemplate,
    pub rate: f64,
    pub channel: ChannelKind,
    pub de: DeConfig,
    pub mode: ScanMode,
}

/// Row-major grid: `axis1` indexes rows, `axis2` columns. Infeasible cells
/// are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScanGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axis2.len() + j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis1,axis2,threshold\n");
        for (i, a) in self.axis1.iter().enumerate() {
            for (j, b) in self.axis2.iter().enumerate() {
                let v = self.get(i, j);
                if v.is_nan() {
                    let _ = writeln!(out, "{a},{b},nan");
                } else {
                    let _ = writeln!(out, "{a},{b},{v}");
                }
            }
        }
        out
    }

    /// Largest feasible cell as `(i, j, value)`, first in row-major order on ties.
    pub fn max(&self) -> Option<(usize, usize, f64)> {
        let n2 = self.axis2.len();
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in self.values.iter().enumerate() {
            if !v.is_nan() && best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, v)| (k / n2, k % n2, v))
    }

    /// Cells strictly above every feasible 8-neighbour. With
    /// `interior_only`, cells on the grid border are skipped; infeasible
    /// neighbours never block a maximum.
    pub fn strict_local_maxima(&self, interior_only: bool) -> Vec<(usize, usize)> {
        let (n1, n2) = (self.axis1.len(), self.axis2.len());
        let mut out = Vec::new();
        for i in 0..n1 {
            for j in 0..n2 {
                let v = self.get(i, j);
                if v.is_nan() || v == f64::NEG_INFINITY {
                    continue;
                }
                if interior_only && (i == 0 || j == 0 || i + 1 == n1 || j + 1 == n2) {
                    continue;
                }
                let mut feasible_neighbours = 0;
                let mut dominated = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if a < 0 || b < 0 || a >= n1 as i64 || b >= n2 as i64 {
                            continue;
                        }
                        let w = self.get(a as usize, b as usize);
                        if w.is_nan() {
                            continue;
                        }
                        feasible_neighbours += 1;
                        if w >= v {
                            dominated = false;
                        }
                    }
                }
                if dominated && feasible_neighbours > 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn nan_if_infeasible(v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        f64::NAN
    } else {
        v
    }
}

fn scan_coefficients(
    spec: &ScanSpec,
    (class1, class2): (usize, usize),
    axis1: &Axis,
    axis2: &Axis,
) -> Result<ScanGrid> {
    let structure = spec.template.structure()?;
    let problem = CoefficientProblem::new(structure, spec.rate, spec.channel, spec.de)?;
    let free = problem.free_classes().to_vec();
    let pos = |c: usize| {
        free.iter().position(|&k| k == c).ok_or_else(|| {
            Error::Config(format!(
                "class {} is not a free coefficient of this structure",
                c + 1
            ))
        })
    };
    let (p1, p2) = (pos(class1)?, pos(class2)?);
    if p1 == p2 {
        return Err(Error::Config("scan axes must be different classes".into()));
    }
    if let Some(&k) = free.iter().find(|&&k| k != class1 && k != class2) {
        return Err(Error::Config(format!(
            "class {} is neither a scan axis nor fixed",
            k + 1
        )));
    }
    let (a1, a2) = (axis1.values(), axis2.values());
    let cells: Vec<(f64, f64)> = a1
        .iter()
        .flat_map(|&x| a2.iter().map(move |&y| (x, y)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(x, y)| {
            let mut v = vec![0.0; 2];
            v[p1] = x;
            v[p2] = y;
            nan_if_infeasible(problem.objective(&v))
        })
        .collect();
    Ok(ScanGrid {
        axis1: a1,
        axis2: a2,
        values,
    })
}

fn scan_degrees(spec: &ScanSpec, ar: &ArConfig) -> Result<ScanGrid> {
    let doms = spec.template.gene_domains();
    if doms.len() != 2 {
        return Err(Error::Config(format!(
            "degree scans need exactly two free degrees, template has {}",
            doms.len()
        )));
    }
    let problem = StructProblem {
        template: &spec.template,
        rate: spec.rate,
        channel: spec.channel,
        de: spec.de,
        ar: *ar,
    };
    let genes: Vec<Vec<u32>> = (doms[0].0..=doms[0].1)
        .flat_map(|a| (doms[1].0..=doms[1].1).map(move |b| vec![a, b]))
        .collect();
    let values = genes
        .par_iter()
        .map(|g| nan_if_infeasible(struct_objective(&problem, g)))
        .collect();
    let axis = |(lo, hi): (u32, u32)| (lo..=hi).map(f64::from).collect();
    Ok(ScanGrid {
        axis1: axis(doms[0]),
        axis2: axis(doms[1]),
        values,
    })
}

pub fn scan(spec: &ScanSpec) -> Result<ScanGrid> {
    match &spec.mode {
        ScanMode::Coefficients {
            class1,
            class2,
            axis1,
            axis2,
        } => scan_coefficients(spec, (*class1, *class2), axis1, axis2),
        ScanMode::Degrees { ar } => scan_degrees(spec, ar),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: Vec<f64>, n1: usize, n2: usize) -> ScanGrid {
        ScanGrid {
            axis1: (0..n1).map(|v| v as f64).collect(),
            axis2: (0..n2).map(|v| v as f64).collect(),
            values,
        }
    }

    #[test]
    fn axis_values() {
        assert_eq!(Axis::new(0.0, 1.0, 3).unwrap().values(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Axis::new(0.2, 0.2, 1).unwrap().values(), vec![0.2]);
        let c = Axis::centered(0.5, 0.01, 25).unwrap().values();
        assert_eq!(c.len(), 25);
        assert!((c[12] - 0.5).abs() < 1e-15);
        assert!(Axis::new(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn local_maxima_detection() {
        #[rustfmt::skip]
        let g = grid(vec![
            0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 5.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 4.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0,
            9.0, 0.0, f64::NAN, 0.0, 0.0,
        ], 5, 5);
        assert_eq!(g.strict_local_maxima(true), vec![(1, 1), (2, 3)]);
        assert_eq!(g.strict_local_maxima(false), vec![(1, 1), (2, 3), (4, 0)]);
        assert_eq!(g.max(), Some((4, 0, 9.0)));
    }

    #[test]
    fn plateaus_are_not_strict() {
        let g = grid(vec![1.0; 9], 3, 3);
        assert!(g.strict_local_maxima(false).is_empty());
    }

    #[test]
    fn csv_marks_infeasible() {
        let g = grid(vec![0.5, f64::NAN], 1, 2);
        assert_eq!(g.to_csv(), "axis1,axis2,threshold\n0,0,0.5\n0,1,nan\n");
    }
}
