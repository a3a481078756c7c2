//! Three-valued checks of the structural-stability conditions and their
//! aggregation into a classification of the system.
//!
//! Sliding conditions: `G, F1–F4, I1–I3, B1, B2, R`. Σ-block conditions add
//! `Ξ(P)` at parabolic and `Ξ(E)` at elliptic fold-fold points; hyperbolic
//! fold-fold points carry no extra requirement.

mod local;
mod portrait;

pub use local::{check_f1_f2, check_xi_e, check_xi_p, FoldFoldChecks};
pub use portrait::{
    check_boundary_transversality, check_connections, check_periodic_orbits, check_pseudo_equilibria,
    check_recurrence, grow_branches, Branch, BranchSource, Connections,
};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::blocks::{extract_blocks, BlockError, SigmaBlock};
use crate::config::{Effort, Resolution};
use crate::fields::PwsSystem;
use crate::manifold::{build_mesh, ManifoldError, SurfaceMesh};
use crate::sliding::{find_pseudo_equilibria, EquilibriumSet};
use crate::tangency::{elementary_check, FoldFoldType, TangencyAnalysis};
use crate::verdict::{Status, Verdict, Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConditionId {
    G,
    F1,
    F2,
    F3,
    F4,
    I1,
    I2,
    I3,
    B1,
    B2,
    R,
    XiP,
    XiE,
    /// Conjunction of the sliding conditions.
    S,
    /// Every fold-fold point passes `Ξ(P)` or `Ξ(E)` as typed.
    F,
}

impl ConditionId {
    /// Report order.
    pub const ALL: [ConditionId; 15] = [
        ConditionId::G,
        ConditionId::F1,
        ConditionId::F2,
        ConditionId::F3,
        ConditionId::F4,
        ConditionId::I1,
        ConditionId::I2,
        ConditionId::I3,
        ConditionId::B1,
        ConditionId::B2,
        ConditionId::R,
        ConditionId::XiP,
        ConditionId::XiE,
        ConditionId::S,
        ConditionId::F,
    ];

    pub const SLIDING: [ConditionId; 11] = [
        ConditionId::G,
        ConditionId::F1,
        ConditionId::F2,
        ConditionId::F3,
        ConditionId::F4,
        ConditionId::I1,
        ConditionId::I2,
        ConditionId::I3,
        ConditionId::B1,
        ConditionId::B2,
        ConditionId::R,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionId::G => "G",
            ConditionId::F1 => "F1",
            ConditionId::F2 => "F2",
            ConditionId::F3 => "F3",
            ConditionId::F4 => "F4",
            ConditionId::I1 => "I1",
            ConditionId::I2 => "I2",
            ConditionId::I3 => "I3",
            ConditionId::B1 => "B1",
            ConditionId::B2 => "B2",
            ConditionId::R => "R",
            ConditionId::XiP => "XiP",
            ConditionId::XiE => "XiE",
            ConditionId::S => "S",
            ConditionId::F => "F",
        }
    }
}

/// Budgets and tolerances a verdict was reached with.
pub type EffortRecord = BTreeMap<String, f64>;

pub(crate) fn effort_record(entries: &[(&str, f64)]) -> EffortRecord {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionVerdict {
    pub id: ConditionId,
    pub status: Status,
    pub witness: Witness,
    pub effort: EffortRecord,
}

impl ConditionVerdict {
    pub fn new(id: ConditionId, v: Verdict, effort: EffortRecord) -> Self {
        ConditionVerdict {
            id,
            status: v.status,
            witness: v.witness,
            effort,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Aggregate {
    NoBlocksStable,
    SlidingStructurallyStable,
    SigmaBlockStructurallyStable,
    Unstable(Vec<ConditionId>),
    Inconclusive(Vec<ConditionId>),
}

impl Aggregate {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregate::NoBlocksStable => "NoBlocksStable",
            Aggregate::SlidingStructurallyStable => "SlidingStructurallyStable",
            Aggregate::SigmaBlockStructurallyStable => "SigmaBlockStructurallyStable",
            Aggregate::Unstable(_) => "Unstable",
            Aggregate::Inconclusive(_) => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Citation {
    pub topic: String,
    pub statement: String,
}

/// Static statements behind each classification. The function-space facts
/// (non-residuality, residuality among elliptic systems) are quoted, never computed.
pub fn citations() -> Vec<Citation> {
    let c = |topic: &str, statement: &str| Citation {
        topic: topic.to_string(),
        statement: statement.to_string(),
    };
    alloc::vec![
        c(
            "NoBlocksStable",
            "Without Σ-blocks Σ = Σ^c, and the system is semi-locally structurally stable at Σ.",
        ),
        c(
            "SlidingStructurallyStable",
            "The sliding structurally stable systems form a residual set and coincide with those \
             satisfying G, F1–F4, I1–I3, B1, B2 and R.",
        ),
        c(
            "SigmaBlockStructurallyStable",
            "A system is Σ-block structurally stable iff it satisfies the sliding conditions and \
             every parabolic (elliptic) fold-fold point satisfies Ξ(P) (Ξ(E)).",
        ),
        c("function-space", "The Σ-block structurally stable systems are not residual."),
        c(
            "function-space",
            "They are residual within Σ(E), the systems satisfying Ξ(E), and Σ(E) is maximal with this property.",
        ),
    ]
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityReport {
    pub system: String,
    /// One entry per [`ConditionId::ALL`], in that order.
    pub conditions: Vec<ConditionVerdict>,
    pub aggregate: Aggregate,
    /// Every sliding condition is Satisfied.
    pub slr_satisfied: bool,
    pub citations: Vec<Citation>,
}

impl StabilityReport {
    pub fn get(&self, id: ConditionId) -> &ConditionVerdict {
        self.conditions
            .iter()
            .find(|c| c.id == id)
            .expect("reports hold every condition")
    }
}

/// Classification from per-condition statuses (`S` and `F` entries are ignored;
/// they are recomputed here from their parts).
///
/// Order: a `G` violation decides alone; no blocks means stable; any other
/// violation (including `Ξ`) means unstable; an inconclusive sliding
/// condition leaves the result open; an inconclusive `Ξ` still certifies
/// sliding stability.
pub fn aggregate(conditions: &[ConditionVerdict], has_blocks: bool) -> Aggregate {
    let status = |id: ConditionId| {
        conditions
            .iter()
            .find(|c| c.id == id)
            .map_or(Status::Inconclusive, |c| c.status)
    };
    match status(ConditionId::G) {
        Status::Violated => return Aggregate::Unstable(alloc::vec![ConditionId::G]),
        Status::Satisfied if !has_blocks => return Aggregate::NoBlocksStable,
        _ => {}
    }
    let relevant = ConditionId::SLIDING
        .iter()
        .chain([ConditionId::XiP, ConditionId::XiE].iter())
        .copied();
    let violated: Vec<ConditionId> = relevant.clone().filter(|&id| status(id) == Status::Violated).collect();
    if !violated.is_empty() {
        return Aggregate::Unstable(violated);
    }
    let open: Vec<ConditionId> = ConditionId::SLIDING
        .iter()
        .copied()
        .filter(|&id| status(id) != Status::Satisfied)
        .collect();
    if !open.is_empty() {
        return Aggregate::Inconclusive(open);
    }
    if status(ConditionId::XiP) == Status::Satisfied && status(ConditionId::XiE) == Status::Satisfied {
        Aggregate::SigmaBlockStructurallyStable
    } else {
        Aggregate::SlidingStructurallyStable
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Blocks(#[from] BlockError),
}

/// Shared read-only artifacts of the earlier stages.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub mesh: SurfaceMesh,
    pub tangency: TangencyAnalysis,
    pub elementary: Verdict,
    /// Empty when `G` is violated.
    pub blocks: Vec<SigmaBlock>,
    /// Pseudo-equilibria over the block cells.
    pub equilibria: EquilibriumSet,
}

impl Analysis {
    pub fn run(sys: &PwsSystem, res: &Resolution) -> Result<Self, StabilityError> {
        let mesh = build_mesh(sys, res.mesh)?;
        let tangency = TangencyAnalysis::run(sys, res);
        let elementary = elementary_check(sys, &tangency, Some(&mesh));
        let blocks = if elementary.status == Status::Violated {
            Vec::new()
        } else {
            extract_blocks(&mesh, &tangency, &elementary)?
        };
        let cells: Vec<usize> = blocks.iter().flat_map(|b| b.cells.iter().copied()).collect();
        let equilibria = if cells.is_empty() {
            EquilibriumSet::default()
        } else {
            find_pseudo_equilibria(sys, &mesh, Some(&cells), &tangency)
        };
        Ok(Analysis {
            mesh,
            tangency,
            elementary,
            blocks,
            equilibria,
        })
    }
}

/// Runs every check on prior artifacts and assembles the report.
pub fn evaluate(sys: &PwsSystem, analysis: &Analysis, effort: &Effort) -> StabilityReport {
    use ConditionId::*;
    let mut slots: BTreeMap<ConditionId, ConditionVerdict> = BTreeMap::new();
    fn put(slots: &mut BTreeMap<ConditionId, ConditionVerdict>, id: ConditionId, v: Verdict, e: EffortRecord) {
        slots.insert(id, ConditionVerdict::new(id, v, e));
    }
    put(&mut slots, G, analysis.elementary.clone(), effort_record(&[]));

    let g = analysis.elementary.status;
    if g == Status::Violated || analysis.blocks.is_empty() {
        let why = if g == Status::Violated {
            Verdict::inconclusive(Witness::note("not evaluated: G is violated"))
        } else {
            Verdict::satisfied(Witness::note("vacuous: no Σ-blocks"))
        };
        for id in [F1, F2, F3, F4, I1, I2, I3, B1, B2, R, XiP, XiE] {
            put(&mut slots, id, why.clone(), effort_record(&[]));
        }
    } else {
        let ff = check_f1_f2(sys, &analysis.tangency, effort);
        put(&mut slots, F1, ff.f1, ff.f1_effort);
        put(&mut slots, F2, ff.f2, ff.f2_effort);

        let branches = grow_branches(sys, analysis, effort);
        let c = check_connections(sys, analysis, &branches, effort);
        put(&mut slots, F3, c.f3, c.effort.clone());
        put(&mut slots, F4, c.f4, c.effort.clone());
        put(&mut slots, I3, c.i3, c.effort.clone());
        put(&mut slots, B1, c.b1, c.effort);
        put(&mut slots, I1, check_pseudo_equilibria(sys, analysis), effort_record(&[("delta_h", sys.tolerances().delta_h)]));
        let (i2, i2e) = check_periodic_orbits(sys, analysis, effort);
        put(&mut slots, I2, i2, i2e);
        let b2_effort = effort_record(&[("theta_min", sys.tolerances().theta_min), ("t_conn", effort.t_conn)]);
        put(&mut slots, B2, check_boundary_transversality(sys, &branches), b2_effort);
        let (r, re) = check_recurrence(sys, analysis, effort);
        put(&mut slots, R, r, re);

        let mut xi_p = Verdict::satisfied(Witness::note("vacuous: no parabolic fold-fold points"));
        let mut xi_e = Verdict::satisfied(Witness::note("vacuous: no elliptic fold-fold points"));
        let (mut np, mut ne) = (0, 0);
        for rec in &analysis.tangency.fold_folds {
            match rec.kind.fold_fold_type() {
                Some(FoldFoldType::P) => {
                    np += 1;
                    xi_p = combine(xi_p, check_xi_p(sys, rec, effort), np);
                }
                Some(FoldFoldType::E) => {
                    ne += 1;
                    xi_e = combine(xi_e, check_xi_e(sys, rec, effort), ne);
                }
                _ => {}
            }
        }
        let radius = effort.chart_radius * sys.domain().diameter();
        put(&mut slots, XiP, xi_p, effort_record(&[("chart_radius", radius), ("theta_min", sys.tolerances().theta_min)]));
        put(&mut slots, XiE, xi_e, effort_record(&[("chart_radius", radius), ("delta_h", sys.tolerances().delta_h)]));
    }

    let sliding = ConditionId::SLIDING
        .iter()
        .fold(Status::Satisfied, |s, id| s.and(slots[id].status));
    let s_note = match sliding {
        Status::Satisfied => "all sliding conditions satisfied",
        Status::Violated => "a sliding condition is violated",
        Status::Inconclusive => "a sliding condition is inconclusive",
    };
    put(&mut slots, S, Verdict { status: sliding, witness: Witness::note(s_note) }, effort_record(&[]));
    let f = slots[&XiP].status.and(slots[&XiE].status);
    let f_note = match f {
        Status::Satisfied => "every fold-fold point passes its Ξ condition (hyperbolic ones vacuously)",
        Status::Violated => "a fold-fold point fails its Ξ condition",
        Status::Inconclusive => "a Ξ condition is inconclusive",
    };
    put(&mut slots, F, Verdict { status: f, witness: Witness::note(f_note) }, effort_record(&[]));

    let conditions: Vec<ConditionVerdict> = ConditionId::ALL.iter().map(|id| slots[id].clone()).collect();
    StabilityReport {
        system: sys.name().to_string(),
        aggregate: aggregate(&conditions, !analysis.blocks.is_empty()),
        slr_satisfied: sliding == Status::Satisfied,
        conditions,
        citations: citations(),
    }
}

/// Worst of the per-point verdicts, keeping the first witness of the worst kind.
fn combine(acc: Verdict, next: Verdict, count: usize) -> Verdict {
    if count == 1 {
        next
    } else {
        acc.worst(next)
    }
}

/// Convenience: every stage from scratch, then [`evaluate`].
pub fn stability_report(sys: &PwsSystem, res: &Resolution, effort: &Effort) -> Result<StabilityReport, StabilityError> {
    let analysis = Analysis::run(sys, res)?;
    Ok(evaluate(sys, &analysis, effort))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lookup;

    fn synthetic(statuses: &[(ConditionId, Status)]) -> Vec<ConditionVerdict> {
        ConditionId::ALL
            .iter()
            .map(|&id| {
                let s = statuses.iter().find(|(i, _)| *i == id).map_or(Status::Satisfied, |p| p.1);
                ConditionVerdict::new(id, Verdict { status: s, witness: Witness::note("x") }, EffortRecord::new())
            })
            .collect()
    }

    #[test]
    fn aggregate_follows_the_conjunctions() {
        use ConditionId::*;
        use Status::*;
        assert_eq!(aggregate(&synthetic(&[]), true), Aggregate::SigmaBlockStructurallyStable);
        assert_eq!(aggregate(&synthetic(&[]), false), Aggregate::NoBlocksStable);
        assert_eq!(aggregate(&synthetic(&[(G, Violated), (R, Violated)]), true), Aggregate::Unstable(alloc::vec![G]));
        assert_eq!(aggregate(&synthetic(&[(G, Violated)]), false), Aggregate::Unstable(alloc::vec![G]));
        assert_eq!(
            aggregate(&synthetic(&[(I2, Violated), (F3, Inconclusive)]), true),
            Aggregate::Unstable(alloc::vec![I2])
        );
        assert_eq!(
            aggregate(&synthetic(&[(F3, Inconclusive), (R, Inconclusive)]), true),
            Aggregate::Inconclusive(alloc::vec![F3, R])
        );
        assert_eq!(aggregate(&synthetic(&[(XiE, Violated)]), true), Aggregate::Unstable(alloc::vec![XiE]));
        assert_eq!(aggregate(&synthetic(&[(XiP, Inconclusive)]), true), Aggregate::SlidingStructurallyStable);
        assert_eq!(
            aggregate(&synthetic(&[(G, Inconclusive)]), false),
            Aggregate::Inconclusive(alloc::vec![G])
        );
        // S and F entries are derived, never read
        assert_eq!(
            aggregate(&synthetic(&[(S, Violated), (F, Violated)]), true),
            Aggregate::SigmaBlockStructurallyStable
        );
    }

    fn report(name: &str) -> StabilityReport {
        let s = lookup(name).unwrap().system().unwrap();
        stability_report(&s, &Resolution::default(), &Effort::default()).unwrap()
    }

    #[test]
    fn transversal_plane_has_no_blocks() {
        let r = report("transversal-plane");
        assert_eq!(r.aggregate, Aggregate::NoBlocksStable);
        assert_eq!(r.conditions.len(), ConditionId::ALL.len());
    }

    #[test]
    fn degenerate_sphere_is_unstable_by_g() {
        let r = report("degenerate-sphere");
        assert_eq!(r.get(ConditionId::G).status, Status::Violated);
        assert_eq!(r.aggregate, Aggregate::Unstable(alloc::vec![ConditionId::G]));
    }

    #[test]
    fn sphere_fold_folds() {
        let r = report("sphere-two-foldfold");
        use ConditionId::*;
        assert_eq!(r.get(G).status, Status::Satisfied);
        assert_eq!(r.get(F2).status, Status::Satisfied, "{:?}", r.get(F2));
        assert!(r.get(F2).witness.note.contains("transient"));
        for id in [F1, F3, F4, I1, I2, I3, B1, B2] {
            assert_eq!(r.get(id).status, Status::Satisfied, "{id:?}: {:?}", r.get(id));
        }
        // φ_Y is x ↦ −x and maps the equator S_X onto itself: Ξ(P) item 1 fails
        assert_eq!(r.get(XiP).status, Status::Violated, "{:?}", r.get(XiP));
        assert!(r.get(XiP).witness.note.contains("item 1"));
    }

    #[test]
    fn elliptic_pair_is_unstable_by_xi_e() {
        let r = report("planar-elliptic");
        assert_eq!(r.get(ConditionId::XiE).status, Status::Violated, "{:?}", r.get(ConditionId::XiE));
        match &r.aggregate {
            Aggregate::Unstable(ids) => assert!(ids.contains(&ConditionId::XiE)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sliding_node_i1() {
        let r = report("sliding-node");
        let v = r.get(ConditionId::I1);
        assert_eq!(v.status, Status::Satisfied, "{v:?}");
        assert_eq!(r.get(ConditionId::I2).status, Status::Satisfied, "{:?}", r.get(ConditionId::I2));
        assert_eq!(r.get(ConditionId::R).status, Status::Satisfied, "{:?}", r.get(ConditionId::R));
    }

    #[test]
    fn reports_are_deterministic() {
        assert_eq!(report("sphere-two-foldfold"), report("sphere-two-foldfold"));
    }
}
