//! Labeling strategies: how raw defect-type annotations become the class
//! set the detector is trained on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::annotation::{Annotation, Severity};
use crate::error::{Error, Result};

/// * `SeverityBased` - every (type, severity) pair is its own class.
/// * `TypeBased` - classes are the defect types, severity ignored.
/// * `NoRoi` - classes are the defect types, but geometry is discarded:
///   each distinct type present becomes one full-image box (trains a
///   screener rather than a localizer).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStrategy {
    SeverityBased,
    TypeBased,
    NoRoi,
}

impl fmt::Display for LabelStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelStrategy::SeverityBased => "severity_based",
            LabelStrategy::TypeBased => "type_based",
            LabelStrategy::NoRoi => "no_roi",
        })
    }
}

impl FromStr for LabelStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "severity_based" => Ok(LabelStrategy::SeverityBased),
            "type_based" => Ok(LabelStrategy::TypeBased),
            "no_roi" => Ok(LabelStrategy::NoRoi),
            other => Err(Error::Config(format!(
                "unknown labeling strategy {other:?} (severity_based, type_based, no_roi)"
            ))),
        }
    }
}

impl LabelStrategy {
    pub fn num_classes(self, num_types: usize) -> usize {
        match self {
            LabelStrategy::SeverityBased => num_types * 3,
            LabelStrategy::TypeBased | LabelStrategy::NoRoi => num_types,
        }
    }

    pub fn class_names(self, type_names: &[String]) -> Vec<String> {
        match self {
            LabelStrategy::SeverityBased => type_names
                .iter()
                .flat_map(|t| Severity::ALL.iter().map(move |s| format!("{t}_{}", s.name())))
                .collect(),
            LabelStrategy::TypeBased | LabelStrategy::NoRoi => type_names.to_vec(),
        }
    }

    /// Rewrite type-labeled annotations into strategy classes. Inputs carry
    /// the defect type in `class_id`; severity is required only by
    /// `SeverityBased`.
    pub fn apply(self, anns: &[Annotation], num_types: usize) -> Result<Vec<Annotation>> {
        for (i, a) in anns.iter().enumerate() {
            if a.class_id >= num_types {
                return Err(Error::Data(format!(
                    "annotation {i} has type {} but only {num_types} types exist",
                    a.class_id
                )));
            }
        }
        match self {
            LabelStrategy::SeverityBased => anns
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let sev = a.severity.ok_or_else(|| {
                        Error::Data(format!(
                            "annotation {i} lacks the severity the severity_based strategy needs"
                        ))
                    })?;
                    Ok(Annotation {
                        class_id: a.class_id * 3 + sev.index(),
                        ..a.clone()
                    })
                })
                .collect(),
            LabelStrategy::TypeBased => Ok(anns.to_vec()),
            LabelStrategy::NoRoi => {
                let mut present: Vec<usize> = anns.iter().map(|a| a.class_id).collect();
                present.sort_unstable();
                present.dedup();
                Ok(present
                    .into_iter()
                    .map(|t| Annotation {
                        class_id: t,
                        cx: 0.5,
                        cy: 0.5,
                        w: 1.0,
                        h: 1.0,
                        severity: None,
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(t: usize, sev: Option<Severity>) -> Annotation {
        Annotation {
            class_id: t,
            cx: 0.3,
            cy: 0.4,
            w: 0.2,
            h: 0.1,
            severity: sev,
        }
    }

    #[test]
    fn severity_based_fans_out_types() {
        let anns = vec![
            ann(0, Some(Severity::Minor)),
            ann(2, Some(Severity::Severe)),
        ];
        let out = LabelStrategy::SeverityBased.apply(&anns, 3).unwrap();
        assert_eq!(out[0].class_id, 0);
        assert_eq!(out[1].class_id, 8);
        assert_eq!(out[1].cx, 0.3);
        assert_eq!(LabelStrategy::SeverityBased.num_classes(3), 9);
    }

    #[test]
    fn severity_based_requires_severity() {
        let err = LabelStrategy::SeverityBased.apply(&[ann(0, None)], 3);
        assert!(err.is_err());
    }

    #[test]
    fn type_based_keeps_geometry_and_ids() {
        let anns = vec![ann(1, Some(Severity::Minor))];
        let out = LabelStrategy::TypeBased.apply(&anns, 3).unwrap();
        assert_eq!(out, anns);
        assert_eq!(LabelStrategy::TypeBased.num_classes(3), 3);
    }

    #[test]
    fn no_roi_collapses_to_full_image_boxes() {
        let anns = vec![
            ann(2, Some(Severity::Minor)),
            ann(0, None),
            ann(2, Some(Severity::Severe)),
        ];
        let out = LabelStrategy::NoRoi.apply(&anns, 3).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].class_id, 0);
        assert_eq!(out[1].class_id, 2);
        for a in &out {
            assert_eq!((a.cx, a.cy, a.w, a.h), (0.5, 0.5, 1.0, 1.0));
        }
    }

    #[test]
    fn class_names_follow_type_order() {
        let types = vec!["scratch".to_string(), "crack".to_string()];
        let names = LabelStrategy::SeverityBased.class_names(&types);
        assert_eq!(
            names,
            vec![
                "scratch_minor",
                "scratch_moderate",
                "scratch_severe",
                "crack_minor",
                "crack_moderate",
                "crack_severe"
            ]
        );
        assert_eq!(LabelStrategy::TypeBased.class_names(&types), types);
    }

    #[test]
    fn unknown_type_id_is_rejected() {
        assert!(LabelStrategy::TypeBased.apply(&[ann(3, None)], 3).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            LabelStrategy::SeverityBased,
            LabelStrategy::TypeBased,
            LabelStrategy::NoRoi,
        ] {
            assert_eq!(s.to_string().parse::<LabelStrategy>().unwrap(), s);
        }
        assert!("fancy".parse::<LabelStrategy>().is_err());
    }
}
