//! Tangency sets `S_X`, `S_Y`: seeding, continuation, and classification of
//! every tangential singularity.

mod elementary;
mod foldfold;
mod trace;

pub use elementary::elementary_check;
pub use foldfold::find_fold_fold_points;
pub use trace::{find_tangency_seeds, trace_tangency_curve};

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::config::Resolution;
use crate::fields::{PwsSystem, Side};
use crate::Point3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FoldFoldType {
    /// Both folds visible.
    H,
    /// One visible, one invisible.
    P,
    /// Both folds invisible.
    E,
}

impl FoldFoldType {
    pub fn letter(self) -> &'static str {
        match self {
            FoldFoldType::H => "H",
            FoldFoldType::P => "P",
            FoldFoldType::E => "E",
        }
    }

    /// Type from the two second Lie derivatives (already outside the sign margin).
    pub fn from_signs(x2f: f64, y2f: f64) -> FoldFoldType {
        match (x2f > 0.0, y2f > 0.0) {
            (true, false) => FoldFoldType::H,
            (false, true) => FoldFoldType::E,
            _ => FoldFoldType::P,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DegenerateReason {
    /// Second and third Lie derivatives both inside the sign margin.
    HigherOrderContact,
    /// `{df, dWf, dW²f}` fails the linear-independence margin at a cubic contact.
    DependentDifferentials,
    /// A second Lie derivative vanishes at an intersection of `S_X` and `S_Y`.
    FoldFoldNotFold,
    /// `S_X` and `S_Y` meet non-transversally.
    NonTransversal,
    /// `df` and `dWf` are parallel: the tangency set is not a curve here.
    RankDrop,
}

impl DegenerateReason {
    pub fn describe(self) -> &'static str {
        match self {
            DegenerateReason::HigherOrderContact => "contact of order > 3",
            DegenerateReason::DependentDifferentials => "df, dWf, dW²f linearly dependent",
            DegenerateReason::FoldFoldNotFold => "non-fold tangency on S_X ∩ S_Y",
            DegenerateReason::NonTransversal => "S_X and S_Y meet tangentially",
            DegenerateReason::RankDrop => "rank of (df, dWf) below 2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SingularityKind {
    VisibleFold,
    InvisibleFold,
    /// Sign of `W³f`.
    Cusp { sign: i8 },
    FoldFold {
        ty: FoldFoldType,
        x_visible: bool,
        y_visible: bool,
    },
    Degenerate(DegenerateReason),
}

impl SingularityKind {
    pub fn describe(&self) -> String {
        use alloc::format;
        match self {
            SingularityKind::VisibleFold => String::from("visible fold"),
            SingularityKind::InvisibleFold => String::from("invisible fold"),
            SingularityKind::Cusp { sign } => format!("cusp ({})", if *sign > 0 { "+" } else { "-" }),
            SingularityKind::FoldFold { ty, .. } => format!("fold-fold {}", ty.letter()),
            SingularityKind::Degenerate(r) => format!("degenerate: {}", r.describe()),
        }
    }

    pub fn is_fold(&self) -> bool {
        matches!(self, SingularityKind::VisibleFold | SingularityKind::InvisibleFold)
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, SingularityKind::Degenerate(_))
    }

    pub fn fold_fold_type(&self) -> Option<FoldFoldType> {
        match self {
            SingularityKind::FoldFold { ty, .. } => Some(*ty),
            _ => None,
        }
    }
}

/// The numbers a classification is made from.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    /// `[Wf, W²f, W³f]` for `W = X` and `W = Y`.
    pub lie: [[f64; 3]; 2],
    /// `det[df; dWf; dW²f]` per side.
    pub det: [f64; 2],
    /// The same determinants divided by the product of the row norms.
    pub det_normalized: [f64; 2],
    /// Sine of the angle between the `S_X` and `S_Y` tangents (fold-folds only).
    pub transversality: Option<f64>,
}

impl Diagnostics {
    pub fn at(sys: &PwsSystem, p: &Point3) -> Self {
        let df = sys.grad_f(p);
        let mut lie = [[0.0; 3]; 2];
        let mut det = [0.0; 2];
        let mut det_normalized = [0.0; 2];
        for side in [Side::X, Side::Y] {
            let s = side as usize;
            for order in 1..=3 {
                lie[s][order - 1] = sys.lie(side, order, p);
            }
            let d1 = sys.lie_gradient(side, 1, p);
            let d2 = sys.lie_gradient(side, 2, p);
            let d = df.dot(&d1.cross(&d2));
            let norms = df.norm() * d1.norm() * d2.norm();
            det[s] = d;
            det_normalized[s] = if norms > 0.0 { d / norms } else { 0.0 };
        }
        Diagnostics {
            lie,
            det,
            det_normalized,
            transversality: None,
        }
    }
}

/// Classification thresholds in absolute units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margins {
    pub delta: f64,
    pub delta_det: f64,
}

impl Margins {
    pub fn of(sys: &PwsSystem) -> Self {
        Margins {
            delta: sys.sign_margin(),
            delta_det: sys.tolerances().delta_det,
        }
    }
}

impl SingularityKind {
    /// The sign tables: `side = None` classifies a fold-fold point.
    ///
    /// On the `Y` side visibility is switched: `Y` lives on `M⁻`, so `Y²f < 0`
    /// is the visible case.
    pub fn from_diagnostics(side: Option<Side>, d: &Diagnostics, m: Margins) -> SingularityKind {
        match side {
            Some(side) => {
                let s = side as usize;
                let [_, w2, w3] = d.lie[s];
                if w2.abs() > m.delta {
                    let visible = (w2 > 0.0) == (side == Side::X);
                    if visible {
                        SingularityKind::VisibleFold
                    } else {
                        SingularityKind::InvisibleFold
                    }
                } else if w3.abs() <= m.delta {
                    SingularityKind::Degenerate(DegenerateReason::HigherOrderContact)
                } else if d.det_normalized[s].abs() <= m.delta_det {
                    SingularityKind::Degenerate(DegenerateReason::DependentDifferentials)
                } else {
                    SingularityKind::Cusp {
                        sign: if w3 > 0.0 { 1 } else { -1 },
                    }
                }
            }
            None => {
                let (x2, y2) = (d.lie[0][1], d.lie[1][1]);
                if x2.abs() <= m.delta || y2.abs() <= m.delta {
                    return SingularityKind::Degenerate(DegenerateReason::FoldFoldNotFold);
                }
                if d.transversality.map_or(true, |s| s <= m.delta_det) {
                    return SingularityKind::Degenerate(DegenerateReason::NonTransversal);
                }
                SingularityKind::FoldFold {
                    ty: FoldFoldType::from_signs(x2, y2),
                    x_visible: x2 > 0.0,
                    y_visible: y2 < 0.0,
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularityRecord {
    pub location: Point3,
    /// Owning side; `None` for fold-fold points.
    pub side: Option<Side>,
    pub kind: SingularityKind,
    pub diagnostics: Diagnostics,
    /// Indices of the X- and Y-curves through a fold-fold point.
    pub curves: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum TangencyError {
    #[error("({}, {}, {}) is not a tangency point (|f| = {f:e}, |Wf| = {wf:e})", at[0], at[1], at[2])]
    NotTangential { at: [f64; 3], f: f64, wf: f64 },
    #[error("rank of (df, dWf) drops below 2 at ({}, {}, {})", at[0], at[1], at[2])]
    RankDeficient { at: [f64; 3] },
    #[error("continuation step underflow at ({}, {}, {})", at[0], at[1], at[2])]
    StepUnderflow { at: [f64; 3] },
}

pub fn classify_tangency_point(
    sys: &PwsSystem,
    side: Side,
    p: &Point3,
) -> Result<SingularityRecord, TangencyError> {
    let f = sys.f(p);
    let wf = sys.lie(side, 1, p);
    if f.abs() > sys.tolerances().eps_f || wf.abs() > sys.tangency_residual() {
        return Err(TangencyError::NotTangential {
            at: [p[0], p[1], p[2]],
            f,
            wf,
        });
    }
    let diagnostics = Diagnostics::at(sys, p);
    Ok(SingularityRecord {
        location: *p,
        side: Some(side),
        kind: SingularityKind::from_diagnostics(Some(side), &diagnostics, Margins::of(sys)),
        diagnostics,
        curves: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurveNode {
    pub point: Point3,
    /// `W²f` at the node.
    pub w2: f64,
    pub kind: SingularityKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CurveEnd {
    /// Returned to the seed: the node list ends with a copy of its first node.
    Closed,
    /// Left the domain box at both ends.
    ExitsBox,
    /// Node budget exhausted.
    Truncated,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangencyCurve {
    pub side: Side,
    pub seed: Point3,
    pub nodes: Vec<CurveNode>,
    pub end: CurveEnd,
    /// Indices into the fold-fold list of points lying on this curve.
    pub fold_folds: Vec<usize>,
}

impl TangencyCurve {
    pub fn closed(&self) -> bool {
        self.end == CurveEnd::Closed
    }

    pub fn points(&self) -> impl Iterator<Item = &Point3> + '_ {
        self.nodes.iter().map(|n| &n.point)
    }

    pub fn cusp_count(&self) -> usize {
        // the closing duplicate is never a cusp node
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, SingularityKind::Cusp { .. }))
            .count()
    }

    pub fn length(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| (w[1].point - w[0].point).norm())
            .sum()
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        if self.nodes.len() == 1 {
            return (self.nodes[0].point - p).norm();
        }
        self.nodes
            .windows(2)
            .map(|w| crate::linalg::point_segment_distance(p, &w[0].point, &w[1].point).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> TangencyCurve {
        let mut c = self.clone();
        c.nodes.reverse();
        c
    }
}

/// Every traced structure of the tangency stage.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangencyAnalysis {
    pub curves: Vec<TangencyCurve>,
    pub fold_folds: Vec<SingularityRecord>,
    /// Seeds whose curve could not be traced (rank drop, step underflow).
    pub degenerate: Vec<SingularityRecord>,
}

impl TangencyAnalysis {
    pub fn run(sys: &PwsSystem, res: &Resolution) -> Self {
        let mut curves = Vec::new();
        let mut degenerate = Vec::new();
        for side in [Side::X, Side::Y] {
            let (c, d) = trace::trace_side(sys, side, res);
            curves.extend(c);
            degenerate.extend(d);
        }
        let (xs, ys): (Vec<_>, Vec<_>) = curves.iter().partition(|c| c.side == Side::X);
        let xs: Vec<TangencyCurve> = xs.into_iter().cloned().collect();
        let ys: Vec<TangencyCurve> = ys.into_iter().cloned().collect();
        let mut fold_folds = find_fold_fold_points(sys, &xs, &ys);
        // curve indices in `fold_folds` refer to the per-side lists; remap to `curves`
        let nx = xs.len();
        let mut curves = xs;
        curves.extend(ys);
        for (k, ff) in fold_folds.iter_mut().enumerate() {
            if let Some((i, j)) = ff.curves {
                ff.curves = Some((i, nx + j));
                curves[i].fold_folds.push(k);
                curves[nx + j].fold_folds.push(k);
            }
        }
        TangencyAnalysis {
            curves,
            fold_folds,
            degenerate,
        }
    }

    pub fn side_curves(&self, side: Side) -> impl Iterator<Item = (usize, &TangencyCurve)> + '_ {
        self.curves
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.side == side)
    }

    /// Cusp records over all curves.
    pub fn cusps(&self) -> Vec<(usize, CurveNode)> {
        let mut out = Vec::new();
        for (i, c) in self.curves.iter().enumerate() {
            for n in &c.nodes {
                if matches!(n.kind, SingularityKind::Cusp { .. }) {
                    out.push((i, *n));
                }
            }
        }
        out
    }

    pub fn all_closed(&self) -> bool {
        self.curves.iter().all(|c| c.closed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lookup;

    fn origin() -> Point3 {
        Point3::zeros()
    }

    #[test]
    fn vishik_fold_is_visible() {
        let s = lookup("vishik-fold-visible").unwrap().system().unwrap();
        let r = classify_tangency_point(&s, Side::X, &origin()).unwrap();
        assert_eq!(r.kind, SingularityKind::VisibleFold);
        let s = lookup("vishik-fold-invisible").unwrap().system().unwrap();
        let r = classify_tangency_point(&s, Side::X, &origin()).unwrap();
        assert_eq!(r.kind, SingularityKind::InvisibleFold);
    }

    #[test]
    fn vishik_cusps_have_unit_determinant() {
        for (name, sign) in [("vishik-cusp-plus", 1), ("vishik-cusp-minus", -1)] {
            let s = lookup(name).unwrap().system().unwrap();
            let r = classify_tangency_point(&s, Side::X, &origin()).unwrap();
            assert_eq!(r.kind, SingularityKind::Cusp { sign });
            assert_eq!(r.diagnostics.det[0].abs(), 1.0);
        }
    }

    #[test]
    fn y_side_visibility_is_switched() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let r = classify_tangency_point(&s, Side::Y, &Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.diagnostics.lie[1][1], 2.0);
        assert_eq!(r.kind, SingularityKind::InvisibleFold);
    }

    #[test]
    fn off_tangency_is_rejected() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let e = classify_tangency_point(&s, Side::X, &Point3::new(1.0, 0.0, 0.0));
        assert!(e.is_ok());
        let e = classify_tangency_point(&s, Side::Y, &Point3::new(1.0, 0.0, 0.0));
        assert!(matches!(e, Err(TangencyError::NotTangential { .. })));
    }

    #[test]
    fn fold_fold_sign_table() {
        let m = Margins {
            delta: 1e-6,
            delta_det: 1e-8,
        };
        let mut d = Diagnostics {
            lie: [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]],
            det: [0.0; 2],
            det_normalized: [0.0; 2],
            transversality: Some(1.0),
        };
        let ty = |d: &Diagnostics| SingularityKind::from_diagnostics(None, d, m);
        assert_eq!(ty(&d).fold_fold_type(), Some(FoldFoldType::H));
        d.lie[1][1] = 1.0;
        assert_eq!(ty(&d).fold_fold_type(), Some(FoldFoldType::P));
        d.lie[0][1] = -1.0;
        assert_eq!(ty(&d).fold_fold_type(), Some(FoldFoldType::E));
        d.lie[1][1] = -1.0;
        assert_eq!(ty(&d).fold_fold_type(), Some(FoldFoldType::P));
        d.transversality = Some(1e-9);
        assert_eq!(ty(&d), SingularityKind::Degenerate(DegenerateReason::NonTransversal));
    }
}
