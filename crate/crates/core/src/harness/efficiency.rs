use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a target SER falls relative to the reference curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyStatus {
    Interpolated,
    /// Target is lower than anything the curve reaches; not extrapolated.
    BelowCurve,
    /// Target is worse than the curve's first point; not extrapolated.
    AboveCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub target_ser: f64,
    pub oml_shots: f64,
    pub cae_equivalent_shots: Option<f64>,
    pub ratio: Option<f64>,
    pub status: EfficiencyStatus,
}

impl EfficiencyRow {
    /// For unreached targets, the ratio bound implied by the curve's end
    /// points: a lower bound below the curve, an upper bound above it.
    pub fn ratio_bound(&self, cae_curve: &[(f64, f64)]) -> f64 {
        match self.status {
            EfficiencyStatus::Interpolated => self.ratio.unwrap_or(f64::NAN),
            EfficiencyStatus::BelowCurve => cae_curve.last().map_or(f64::NAN, |p| p.0) / self.oml_shots,
            EfficiencyStatus::AboveCurve => cae_curve.first().map_or(f64::NAN, |p| p.0) / self.oml_shots,
        }
    }
}

/// Cumulative minimum, so SER never rises with more shots.
pub fn isotonic_clamp(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut best = f64::INFINITY;
    curve
        .iter()
        .map(|&(s, e)| {
            best = best.min(e);
            (s, best)
        })
        .collect()
}

/// Shots at which the clamped curve reaches `target`, interpolating linearly
/// in (shots, ln SER).
fn equivalent_shots(curve: &[(f64, f64)], target: f64) -> std::result::Result<f64, EfficiencyStatus> {
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    if target > first.1 {
        return Err(EfficiencyStatus::AboveCurve);
    }
    if target < last.1 {
        return Err(EfficiencyStatus::BelowCurve);
    }
    for w in curve.windows(2) {
        let ((s0, e0), (s1, e1)) = (w[0], w[1]);
        if target == e0 {
            return Ok(s0);
        }
        if target >= e1 {
            if target == e1 {
                return Ok(s1);
            }
            if e1 <= 0.0 {
                // ln 0 is unbounded; fall back to linear SER on this segment.
                return Ok(s0 + (s1 - s0) * (e0 - target) / (e0 - e1));
            }
            let t = (e0.ln() - target.ln()) / (e0.ln() - e1.ln());
            return Ok(s0 + (s1 - s0) * t);
        }
    }
    Ok(last.0)
}

/// For every OML-CAE point, the fractional number of CAE shots needed to
/// reach the same SER, and the ratio to the OML-CAE shots.
pub fn efficiency_analysis(oml_points: &[(f64, f64)], cae_curve: &[(f64, f64)]) -> Result<Vec<EfficiencyRow>> {
    if cae_curve.len() < 2 {
        return Err(Error::Efficiency("reference curve needs at least two points".into()));
    }
    if cae_curve.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Efficiency("reference shots must be strictly increasing".into()));
    }
    let in_range = |p: &(f64, f64)| p.0 > 0.0 && p.0.is_finite() && (0.0..=1.0).contains(&p.1);
    if !cae_curve.iter().all(in_range) || !oml_points.iter().all(in_range) {
        return Err(Error::Efficiency("shots must be positive and SER in [0, 1]".into()));
    }
    let curve = isotonic_clamp(cae_curve);
    Ok(oml_points
        .iter()
        .map(|&(shots, ser)| match equivalent_shots(&curve, ser) {
            Ok(eq) => EfficiencyRow {
                target_ser: ser,
                oml_shots: shots,
                cae_equivalent_shots: Some(eq),
                ratio: Some(eq / shots),
                status: EfficiencyStatus::Interpolated,
            },
            Err(status) => EfficiencyRow {
                target_ser: ser,
                oml_shots: shots,
                cae_equivalent_shots: None,
                ratio: None,
                status,
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_node_hit() {
        let cae = [(1.0, 0.4), (2.0, 0.2), (3.0, 0.1)];
        let rows = efficiency_analysis(&[(1.0, 0.2)], &cae).unwrap();
        assert_eq!(rows[0].cae_equivalent_shots, Some(2.0));
        assert_eq!(rows[0].ratio, Some(2.0));
    }

    #[test]
    fn log_interpolation() {
        let cae = [(1.0, 0.4), (3.0, 0.1)];
        let rows = efficiency_analysis(&[(1.0, 0.2)], &cae).unwrap();
        // ln 0.2 is halfway between ln 0.4 and ln 0.1.
        assert!((rows[0].cae_equivalent_shots.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_targets() {
        let cae = [(1.0, 0.4), (2.0, 0.2)];
        let rows = efficiency_analysis(&[(1.0, 0.05), (1.0, 0.5)], &cae).unwrap();
        assert_eq!(rows[0].status, EfficiencyStatus::BelowCurve);
        assert_eq!(rows[0].ratio_bound(&cae), 2.0);
        assert_eq!(rows[1].status, EfficiencyStatus::AboveCurve);
    }

    #[test]
    fn clamp_removes_bumps() {
        let c = isotonic_clamp(&[(1.0, 0.3), (2.0, 0.35), (3.0, 0.1)]);
        assert_eq!(c[1].1, 0.3);
    }

    #[test]
    fn bad_curves_rejected() {
        assert!(efficiency_analysis(&[(1.0, 0.1)], &[(1.0, 0.2)]).is_err());
        assert!(efficiency_analysis(&[(1.0, 0.1)], &[(2.0, 0.2), (1.0, 0.1)]).is_err());
    }

    proptest! {
        #[test]
        fn identical_strictly_decreasing_curves_give_unit_ratios(
            start in 0.01f64..1.0,
            steps in proptest::collection::vec(0.05f64..0.9, 1..10),
        ) {
            let mut curve = vec![(1.0, start)];
            for (i, f) in steps.iter().enumerate() {
                let prev = curve[i].1;
                curve.push(((i + 2) as f64, prev * f));
            }
            let rows = efficiency_analysis(&curve, &curve).unwrap();
            for r in rows {
                prop_assert_eq!(r.ratio, Some(1.0));
            }
        }
    }
}
