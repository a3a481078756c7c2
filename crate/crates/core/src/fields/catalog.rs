//! Canonical systems with known classifications.
//!
//! Each entry carries its expressions as text (so the catalog doubles as
//! parser coverage), a domain box, and the facts a correct analysis must
//! reproduce.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::system::{DomainBox, PwsSystem, Side, SystemError};
use crate::tangency::{FoldFoldType, SingularityKind};

#[derive(Clone, Debug, PartialEq)]
pub enum ExpectedFact {
    /// `at` is a tangency point of `side` with the given kind.
    Tangency {
        side: Side,
        at: [f64; 3],
        kind: SingularityKind,
    },
    /// Exactly `count` fold-fold points, all of type `ty`.
    FoldFolds { count: usize, ty: FoldFoldType },
    /// `S_Z = Σ`: the tangency set has positive area.
    TangencyEverywhere,
    /// `S_Z ∩ box = ∅` and `Σ = Σ^c`.
    AllCrossing,
    /// A hyperbolic pseudo-equilibrium at `at`.
    PseudoEquilibrium { at: [f64; 3] },
}

impl ExpectedFact {
    pub fn describe(&self) -> String {
        match self {
            ExpectedFact::Tangency { side, at, kind } => {
                let place = if at.iter().all(|c| *c == 0.0) {
                    String::from("origin")
                } else {
                    format!("({}, {}, {})", at[0], at[1], at[2])
                };
                format!("{place} is {} of {}", kind.describe(), side.name())
            }
            ExpectedFact::FoldFolds { count, ty } => {
                format!("{count} fold-fold points of type {}", ty.letter())
            }
            ExpectedFact::TangencyEverywhere => String::from("S_Z = Σ"),
            ExpectedFact::AllCrossing => String::from("Σ = Σ^c, no tangencies"),
            ExpectedFact::PseudoEquilibrium { at } => {
                format!("hyperbolic pseudo-equilibrium at ({}, {}, {})", at[0], at[1], at[2])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub f: &'static str,
    pub x: &'static str,
    pub y: &'static str,
    pub domain: DomainBox,
    pub facts: Vec<ExpectedFact>,
}

impl CatalogEntry {
    pub fn system(&self) -> Result<PwsSystem, SystemError> {
        PwsSystem::parse(self.name, self.f, self.x, self.y, self.domain)
    }
}

const ORIGIN: [f64; 3] = [0.0, 0.0, 0.0];

fn entry(
    name: &'static str,
    f: &'static str,
    x: &'static str,
    y: &'static str,
    half_width: f64,
    facts: Vec<ExpectedFact>,
) -> CatalogEntry {
    CatalogEntry {
        name,
        f,
        x,
        y,
        domain: DomainBox::cube(half_width),
        facts,
    }
}

fn at_origin(side: Side, kind: SingularityKind) -> ExpectedFact {
    ExpectedFact::Tangency {
        side,
        at: ORIGIN,
        kind,
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    use SingularityKind::*;
    vec![
        // Vishik normal forms with Σ = {x = 0}; Y is transverse.
        entry(
            "vishik-fold-visible",
            "x",
            "(y,1,0)",
            "(1,0,0)",
            1.0,
            vec![at_origin(Side::X, VisibleFold)],
        ),
        entry(
            "vishik-fold-invisible",
            "x",
            "(-y,1,0)",
            "(1,0,0)",
            1.0,
            vec![at_origin(Side::X, InvisibleFold)],
        ),
        entry(
            "vishik-cusp-plus",
            "x",
            "(y,z,1)",
            "(1,0,0)",
            1.0,
            vec![at_origin(Side::X, Cusp { sign: 1 })],
        ),
        entry(
            "vishik-cusp-minus",
            "x",
            "(y,z,-1)",
            "(1,0,0)",
            1.0,
            vec![at_origin(Side::X, Cusp { sign: -1 })],
        ),
        // Local normal forms on Σ = {z = 0} with closed-form flows.
        entry(
            "fold-visible",
            "z",
            "(0,1,y)",
            "(0,0,1)",
            1.0,
            vec![at_origin(Side::X, VisibleFold)],
        ),
        entry(
            "fold-invisible",
            "z",
            "(0,1,-y)",
            "(0,0,1)",
            1.0,
            vec![at_origin(Side::X, InvisibleFold)],
        ),
        entry(
            "cusp",
            "z",
            "(1,0,x^2+y)",
            "(0,0,1)",
            1.0,
            vec![at_origin(Side::X, Cusp { sign: 1 })],
        ),
        entry(
            "degenerate-sphere",
            "x^2+y^2+z^2-1",
            "(-y,x,0)",
            "(x,y,z)",
            1.5,
            vec![ExpectedFact::TangencyEverywhere],
        ),
        entry(
            "sphere-two-foldfold",
            "x^2+y^2+z^2-1",
            "(0,0,1)",
            "(1,0,0)",
            1.5,
            vec![
                ExpectedFact::FoldFolds {
                    count: 2,
                    ty: FoldFoldType::P,
                },
                ExpectedFact::Tangency {
                    side: Side::Y,
                    at: [0.0, 0.0, 1.0],
                    kind: InvisibleFold,
                },
            ],
        ),
        entry(
            "planar-elliptic",
            "z",
            "(0,1,-y)",
            "(1,0,x)",
            1.0,
            vec![ExpectedFact::FoldFolds {
                count: 1,
                ty: FoldFoldType::E,
            }],
        ),
        entry(
            "transversal-plane",
            "z",
            "(0,0,1)",
            "(0,0,1)",
            1.0,
            vec![ExpectedFact::AllCrossing],
        ),
        entry(
            "sliding-node",
            "z",
            "(x,y,-1)",
            "(0,0,1)",
            1.0,
            vec![ExpectedFact::PseudoEquilibrium { at: ORIGIN }],
        ),
        // Equator fold (Xf = z) with X²f = x + 1/2: cusps at (−1/2, ±√3/2, 0),
        // both with X³f = −3/4, so F_Z^N turns once along the circle.
        entry(
            "sphere-two-cusps",
            "x^2+y^2+z^2-1",
            "(-y^2-z,x*y,x+0.5)",
            "(x,y,z)",
            1.5,
            vec![],
        ),
        // Tilted fold circle 2x + z = 0 with X²f = 5/2 − 6y and X³f = −18x:
        // two cusps of opposite contact type, along which F_Z^N does not turn.
        entry(
            "sphere-opposite-cusps",
            "x^2+y^2+z^2-1",
            "(1-3*y,3*x,0.5)",
            "(x,y,z)",
            1.5,
            vec![],
        ),
    ]
}

pub fn lookup(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds() {
        for e in catalog() {
            e.system().unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }

    #[test]
    fn names_are_unique() {
        let all = catalog();
        for (i, a) in all.iter().enumerate() {
            assert!(all[i + 1..].iter().all(|b| b.name != a.name), "{}", a.name);
        }
    }

    #[test]
    fn described_facts() {
        let e = lookup("vishik-fold-visible").unwrap();
        assert_eq!(e.facts[0].describe(), "origin is visible fold of X");
        assert_eq!(lookup("degenerate-sphere").unwrap().facts[0].describe(), "S_Z = Σ");
        assert_eq!(
            lookup("sphere-two-foldfold").unwrap().facts[0].describe(),
            "2 fold-fold points of type P"
        );
        assert!(lookup("nope").is_none());
    }
}
