//! Whether every tangential singularity is elementary (fold, cusp-regular,
//! transversal fold-fold), and whether `S_Z` has measure zero.

use alloc::format;

use super::{DegenerateReason, SingularityKind, TangencyAnalysis};
use crate::fields::{PwsSystem, Side};
use crate::manifold::SurfaceMesh;
use crate::verdict::{Verdict, Witness};

/// Fraction of the mesh area that may be covered by all-tangency cells before
/// `S_Z` is reported as having positive area.
pub const AREA_FRACTION_LIMIT: f64 = 1e-3;

/// How far inside a margin a value must be before "degenerate" is a
/// violation rather than an inconclusive near-miss.
const CLEAR_FACTOR: f64 = 1e-3;

/// Elementary-singularity check.
///
/// The measure-zero condition on `S_Z` is a mesh proxy: cells whose three
/// vertices all lie in the tangency band count as two-dimensional tangency.
pub fn elementary_check(
    sys: &PwsSystem,
    analysis: &TangencyAnalysis,
    mesh: Option<&SurfaceMesh>,
) -> Verdict {
    if let Some(m) = mesh {
        let flat = m.area_where(|t| m.triangles[t].iter().all(|&v| m.labels[v].kind.is_tangency()));
        let total = m.total_area();
        if total > 0.0 && flat / total > AREA_FRACTION_LIMIT {
            let mut w = Witness::note("S_Z has positive area").with_values(&[flat, total]);
            if let Some(t) = (0..m.triangles.len())
                .find(|&t| m.triangles[t].iter().all(|&v| m.labels[v].kind.is_tangency()))
            {
                w = w.at(&m.cell_centroids[t]);
            }
            return Verdict::violated(w);
        }
    }

    if let Some(d) = analysis.degenerate.first() {
        return Verdict::violated(
            Witness::note(format!(
                "tangency set of {} is not a curve: {}",
                d.side.map_or("Z", |s| s.name()),
                d.kind.describe()
            ))
            .at(&d.location),
        );
    }

    let delta = sys.sign_margin();
    let delta_det = sys.tolerances().delta_det;
    let band = sys.tangency_band();
    let mut verdict = Verdict::satisfied(Witness::note("all tangential singularities elementary"));

    for c in &analysis.curves {
        let s = c.side as usize;
        for n in &c.nodes {
            match n.kind {
                SingularityKind::Degenerate(reason) => {
                    let d = super::Diagnostics::at(sys, &n.point);
                    let [_, w2, w3] = d.lie[s];
                    let clearly = match reason {
                        DegenerateReason::DependentDifferentials => {
                            d.det_normalized[s].abs() <= CLEAR_FACTOR * delta_det
                        }
                        _ => w2.abs() <= CLEAR_FACTOR * delta && w3.abs() <= CLEAR_FACTOR * delta,
                    };
                    let w = Witness::note(format!("{} node of {}", n.kind.describe(), c.side.name()))
                        .at(&n.point)
                        .with_values(&[w2, w3, d.det_normalized[s]]);
                    verdict = verdict.worst(if clearly {
                        Verdict::violated(w)
                    } else {
                        Verdict::inconclusive(w)
                    });
                }
                SingularityKind::Cusp { .. } => {
                    // a cusp must be cusp-regular: the other field transverse there
                    let other = c.side.other();
                    let wf = sys.lie(other, 1, &n.point);
                    if wf.abs() <= band {
                        let w = Witness::note(format!(
                            "cusp of {} lies on S_{}",
                            c.side.name(),
                            other.name()
                        ))
                        .at(&n.point)
                        .with_values(&[wf]);
                        verdict = verdict.worst(Verdict::violated(w));
                    }
                }
                _ => {}
            }
        }
    }

    for ff in &analysis.fold_folds {
        if let SingularityKind::Degenerate(reason) = ff.kind {
            let d = &ff.diagnostics;
            let sine = d.transversality.unwrap_or(0.0);
            let clearly = match reason {
                DegenerateReason::NonTransversal => sine <= CLEAR_FACTOR * delta_det,
                _ => {
                    d.lie[Side::X as usize][1].abs().min(d.lie[Side::Y as usize][1].abs())
                        <= CLEAR_FACTOR * delta
                }
            };
            let w = Witness::note(format!("fold-fold point is {}", reason.describe()))
                .at(&ff.location)
                .with_values(&[sine, d.lie[0][1], d.lie[1][1]]);
            verdict = verdict.worst(if clearly {
                Verdict::violated(w)
            } else {
                Verdict::inconclusive(w)
            });
        }
    }
    verdict
}
