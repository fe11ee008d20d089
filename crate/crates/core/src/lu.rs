//! Elimination of lower-bound and upper-bound clock parameters over
//! rectangular parameter regions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::dsl;
use crate::model::{render_gamma, ClockValuation, LuClass, ModelError, Pppta};
use crate::pmdp::Objective;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LuError {
    #[error("region is not rectangular: {0}")]
    NotSeparable(String),
    #[error("empty interval for `{param}`: [{lo}, {hi}]")]
    EmptyInterval { param: String, lo: u64, hi: u64 },
    #[error("empty region")]
    EmptyRegion,
    #[error("region does not cover clock parameter `{0}`")]
    MissingParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A set of clock-parameter valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClockRegion {
    /// Product of closed integer intervals.
    Rectangular(BTreeMap<String, (u64, u64)>),
    /// Explicit finite set of total valuations.
    Explicit(BTreeSet<ClockValuation>),
}

impl ClockRegion {
    /// The declared domains of the model's clock parameters.
    pub fn from_model(m: &Pppta) -> Self {
        ClockRegion::Rectangular(m.clock_params.clone())
    }

    pub fn check(&self) -> Result<(), LuError> {
        match self {
            ClockRegion::Rectangular(iv) => {
                for (p, &(lo, hi)) in iv {
                    if lo > hi {
                        return Err(LuError::EmptyInterval { param: p.clone(), lo, hi });
                    }
                }
                Ok(())
            }
            ClockRegion::Explicit(set) if set.is_empty() => Err(LuError::EmptyRegion),
            ClockRegion::Explicit(_) => Ok(()),
        }
    }

    pub fn params(&self) -> BTreeSet<String> {
        match self {
            ClockRegion::Rectangular(iv) => iv.keys().cloned().collect(),
            ClockRegion::Explicit(set) => set.iter().flat_map(|g| g.keys().cloned()).collect(),
        }
    }

    /// Every valuation, in lexicographic order.
    pub fn points(&self) -> Vec<ClockValuation> {
        match self {
            ClockRegion::Explicit(set) => set.iter().cloned().collect(),
            ClockRegion::Rectangular(iv) => {
                let mut out = vec![ClockValuation::new()];
                for (p, &(lo, hi)) in iv {
                    out = out
                        .into_iter()
                        .flat_map(|g| {
                            (lo..=hi).map(move |v| {
                                let mut g = g.clone();
                                g.insert(p.clone(), v);
                                g
                            })
                        })
                        .collect();
                }
                out
            }
        }
    }

    /// Per-parameter projections when the region is a product of them.
    fn projections(&self) -> Result<BTreeMap<String, BTreeSet<u64>>, LuError> {
        match self {
            ClockRegion::Rectangular(iv) => Ok(iv.iter().map(|(p, &(lo, hi))| (p.clone(), (lo..=hi).collect())).collect()),
            ClockRegion::Explicit(set) => {
                let params = self.params();
                let mut proj: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
                for g in set {
                    for p in &params {
                        let v = g.get(p).ok_or_else(|| {
                            LuError::NotSeparable(format!("valuation {} does not assign `{p}`", render_gamma(g)))
                        })?;
                        proj.entry(p.clone()).or_default().insert(*v);
                    }
                }
                let size: usize = proj.values().map(BTreeSet::len).product();
                if size != set.len() {
                    let names: Vec<&str> = proj.keys().map(String::as_str).collect();
                    return Err(LuError::NotSeparable(format!(
                        "the {} valuations are not the product of their projections on {}, so no parameter can be fixed independently of the others (separability fails)",
                        set.len(),
                        names.join(", ")
                    )));
                }
                Ok(proj)
            }
        }
    }
}

impl fmt::Display for ClockRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockRegion::Rectangular(iv) => {
                let parts: Vec<String> = iv.iter().map(|(p, (lo, hi))| format!("{p} in [{lo}, {hi}]")).collect();
                f.write_str(&parts.join(", "))
            }
            ClockRegion::Explicit(set) => {
                let parts: Vec<String> = set.iter().map(|g| format!("({})", render_gamma(g))).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReductionReport {
    pub objective: Objective,
    pub classes: BTreeMap<String, LuClass>,
    pub fixed: ClockValuation,
    pub residual_model: Pppta,
    pub residual_region: ClockRegion,
}

impl ReductionReport {
    /// Fixings as comments followed by the residual model.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (p, v) in &self.fixed {
            let class = self.classes.get(p).map(|c| format!("{c:?}")).unwrap_or_default();
            let _ = writeln!(out, "// fixed {p} = {v} ({class})");
        }
        let _ = writeln!(out, "// residual region: {}", self.residual_region);
        out.push_str(&dsl::serialize(&self.residual_model));
        out
    }
}

/// Fixes every Lower parameter at the bottom of its interval and every Upper
/// parameter at the top; Unused ones go to the bottom and Both stay. The
/// choice is the same for either objective.
pub fn reduce(m: &Pppta, region: &ClockRegion, objective: Objective) -> Result<ReductionReport, LuError> {
    region.check()?;
    for p in m.clock_params.keys() {
        if !region.params().contains(p) {
            return Err(LuError::MissingParameter(p.clone()));
        }
    }
    let proj = region.projections()?;
    let classes = m.classify_lu();
    let mut fixed = ClockValuation::new();
    let mut residual = BTreeMap::new();
    for (p, values) in &proj {
        let lo = *values.first().expect("nonempty projection");
        let hi = *values.last().expect("nonempty projection");
        match classes.get(p) {
            None => return Err(ModelError::UnknownParameter(p.clone()).into()),
            Some(LuClass::Lower | LuClass::Unused) => {
                fixed.insert(p.clone(), lo);
            }
            Some(LuClass::Upper) => {
                fixed.insert(p.clone(), hi);
            }
            Some(LuClass::Both) => {
                residual.insert(p.clone(), values.clone());
            }
        }
    }
    let mut residual_model = m.instantiate(&fixed, &Default::default())?;
    let residual_region = match region {
        ClockRegion::Rectangular(iv) => {
            let iv: BTreeMap<String, (u64, u64)> = iv.iter().filter(|(p, _)| residual.contains_key(*p)).map(|(p, r)| (p.clone(), *r)).collect();
            residual_model.clock_params = iv.clone();
            ClockRegion::Rectangular(iv)
        }
        ClockRegion::Explicit(set) => {
            for (p, vs) in &residual {
                let range = (*vs.first().expect("nonempty"), *vs.last().expect("nonempty"));
                residual_model.clock_params.insert(p.clone(), range);
            }
            ClockRegion::Explicit(
                set.iter()
                    .map(|g| g.iter().filter(|(p, _)| residual.contains_key(*p)).map(|(p, v)| (p.clone(), *v)).collect())
                    .collect(),
            )
        }
    };
    Ok(ReductionReport {
        objective,
        classes,
        fixed,
        residual_model,
        residual_region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn g(pairs: &[(&str, u64)]) -> ClockValuation {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn geometric_fixes_upper_at_sup() {
        let m = bundled::load("geometric");
        let r = reduce(&m, &ClockRegion::from_model(&m), Objective::Max).unwrap();
        assert_eq!(r.fixed, g(&[("T", 4)]));
        assert!(r.residual_model.clock_params.is_empty());
        assert_eq!(r.residual_region.points(), vec![ClockValuation::new()]);
    }

    #[test]
    fn nrp_variants() {
        let m = bundled::load("nrp");
        let region = ClockRegion::Rectangular([("CD".to_string(), (6, 10)), ("TO".to_string(), (3, 20))].into());
        let r = reduce(&m, &region, Objective::Max).unwrap();
        assert_eq!(r.fixed, g(&[("CD", 6)]));
        assert_eq!(r.residual_region, ClockRegion::Rectangular([("TO".to_string(), (3, 20))].into()));
        assert!(r.render().contains("// fixed CD = 6"));
        let m = bundled::load("nrp_modified");
        let r = reduce(&m, &ClockRegion::from_model(&m), Objective::Min).unwrap();
        assert_eq!(r.fixed, g(&[("CD", 6), ("TO", 20)]));
    }

    #[test]
    fn non_product_region_is_refused() {
        let m = bundled::load("separability");
        let region = ClockRegion::Explicit([g(&[("T", 1), ("U", 0)]), g(&[("T", 0), ("U", 1)])].into());
        let err = reduce(&m, &region, Objective::Max).unwrap_err();
        assert!(err.to_string().contains("separability"));
        let square = ClockRegion::Explicit(
            [g(&[("T", 0), ("U", 0)]), g(&[("T", 0), ("U", 1)]), g(&[("T", 1), ("U", 0)]), g(&[("T", 1), ("U", 1)])].into(),
        );
        let r = reduce(&m, &square, Objective::Max).unwrap();
        assert_eq!(r.fixed, g(&[("T", 1), ("U", 1)]));
    }

    #[test]
    fn region_points() {
        let r = ClockRegion::Rectangular([("A".to_string(), (0, 1)), ("B".to_string(), (2, 3))].into());
        assert_eq!(r.points().len(), 4);
        assert!(ClockRegion::Rectangular([("A".to_string(), (2, 1))].into()).check().is_err());
    }
}
