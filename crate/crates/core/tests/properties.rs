use filippov_core::fields::catalog;
use filippov_core::flow::{integrate_field, involution_point, ReturnOptions};
use filippov_core::manifold::{classify_point, lamination_point, project_to_surface, RegionKind};
use filippov_core::sliding::{find_pseudo_equilibria, normalized_field, sliding_eval};
use filippov_core::stability::{stability_report, Analysis};
use filippov_core::tangency::{classify_tangency_point, TangencyAnalysis};
use filippov_core::{Effort, Point3, PwsSystem, Resolution, Side, Status};
use proptest::prelude::*;

fn systems() -> Vec<PwsSystem> {
    catalog().iter().map(|e| e.system().unwrap()).collect()
}

/// Projection of a box point onto `Σ`, if it lands inside the box.
fn surface_point(sys: &PwsSystem, t: [f64; 3]) -> Option<Point3> {
    let p = project_to_surface(sys, &sys.domain().lerp(t)).ok()?;
    sys.domain().contains(&p).then_some(p)
}

fn unit() -> impl Strategy<Value = [f64; 3]> {
    [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn first_lie_derivative_is_the_gradient_pairing(i in 0..catalog().len(), t in unit()) {
        let s = &systems()[i];
        let p = s.domain().lerp(t);
        for side in [Side::X, Side::Y] {
            let direct = s.field(side, &p).dot(&s.grad_f(&p));
            prop_assert!(close(s.lie(side, 1, &p), direct, 1e-12));
        }
    }

    #[test]
    fn lie_hessians_are_symmetric(i in 0..catalog().len(), t in unit(), order in 1usize..3) {
        let s = &systems()[i];
        let p = s.domain().lerp(t);
        for side in [Side::X, Side::Y] {
            let h = s.lie_hessian(side, order, &p);
            let scale = h.abs().max().max(1.0);
            prop_assert!((h - h.transpose()).abs().max() <= 1e-12 * scale);
        }
    }

    #[test]
    fn normalized_field_is_tangent_to_the_surface(i in 0..catalog().len(), t in unit()) {
        let s = &systems()[i];
        let Some(p) = surface_point(s, t) else { return Ok(()) };
        let g = s.grad_f(&p);
        let (xf, yf) = s.contact(&p);
        let scale = g.norm() * (yf.abs() * s.field(Side::X, &p).norm() + xf.abs() * s.field(Side::Y, &p).norm());
        prop_assert!(normalized_field(s, &p).dot(&g).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn sliding_field_is_a_reparameterization(i in 0..catalog().len(), t in unit()) {
        let s = &systems()[i];
        let Some(p) = surface_point(s, t) else { return Ok(()) };
        let e = sliding_eval(s, &p).unwrap();
        let kind = classify_point(s, &p).unwrap().kind;
        if let Some(fz) = e.fz {
            let d = fz.dot(&e.fzn);
            match kind {
                RegionKind::StableSliding => prop_assert!(d >= 0.0),
                RegionKind::UnstableSliding => prop_assert!(d <= 0.0),
                k => prop_assert!(false, "F_Z formed in {k:?}"),
            }
            prop_assert!((fz * (e.yf - e.xf) - e.fzn).norm() <= 1e-12 * e.fzn.norm().max(1.0));
        }
    }

    #[test]
    fn swapping_the_fields_swaps_the_sliding_labels(i in 0..catalog().len(), t in unit()) {
        let s = &systems()[i];
        let Some(p) = surface_point(s, t) else { return Ok(()) };
        let k = classify_point(s, &p).unwrap().kind;
        let k_sw = classify_point(&s.swapped(), &p).unwrap().kind;
        prop_assert_eq!(k_sw, k.swapped());
    }

    #[test]
    fn lamination_sits_on_the_side_of_lambda(i in 0..catalog().len(), t in unit(), lam in 1e-4..0.05f64, neg in any::<bool>()) {
        let s = &systems()[i];
        let Some(p) = surface_point(s, t) else { return Ok(()) };
        let lam = if neg { -lam } else { lam };
        let q = lamination_point(s, &p, lam).unwrap();
        prop_assert_eq!(s.f(&q) > 0.0, lam > 0.0);
    }

    #[test]
    fn fold_and_cusp_kinds_survive_positive_rescaling(x in -0.8..0.8f64, c in 0.1..10.0f64, cusp in any::<bool>()) {
        // fold line y = 0 of "fold-invisible"; fold curve y = −x² of "cusp"
        let (name, p) = if cusp {
            ("cusp", Point3::new(x, -x * x, 0.0))
        } else {
            ("fold-invisible", Point3::new(x, 0.0, 0.0))
        };
        let s = filippov_core::fields::lookup(name).unwrap().system().unwrap();
        let a = classify_tangency_point(&s, Side::X, &p).unwrap();
        let b = classify_tangency_point(&s.scaled(Side::X, c).unwrap(), Side::X, &p).unwrap();
        prop_assert_eq!(a.kind, b.kind);
    }

    #[test]
    fn involution_of_an_invisible_fold_is_an_involution(x in -0.5..0.5f64, y in -0.4..0.4f64) {
        let s = filippov_core::fields::lookup("fold-invisible").unwrap().system().unwrap();
        let opts = ReturnOptions::from_effort(&s, &Effort::default());
        let p = Point3::new(x, y, 0.0);
        let q = involution_point(&s, Side::X, &p, &opts).unwrap();
        let back = involution_point(&s, Side::X, &q, &opts).unwrap();
        prop_assert!((back - p).norm() < 1e-7);
    }

    #[test]
    fn forward_then_backward_returns_to_the_start(i in 0..catalog().len(), t in [0.3..0.7f64, 0.3..0.7f64, 0.3..0.7f64], horizon in 0.05..0.5f64) {
        let s = &systems()[i];
        let p = s.domain().lerp(t);
        let side = if s.f(&p) >= 0.0 { Side::X } else { Side::Y };
        let fw = integrate_field(s, side, &p, false, horizon, 100_000, None).unwrap();
        let bw = integrate_field(s, side, fw.last(), true, fw.duration(), 100_000, None).unwrap();
        prop_assert!((bw.last() - p).norm() < 1e-7, "{:?} {:?}", fw.end, bw.end);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pseudo_equilibrium_kind_survives_common_rescaling(c in 0.2..5.0f64) {
        let base = filippov_core::fields::lookup("sliding-node").unwrap().system().unwrap();
        let scaled = base.scaled(Side::X, c).unwrap().scaled(Side::Y, c).unwrap();
        let res = Resolution::default();
        let find = |s: &PwsSystem| {
            let a = Analysis::run(s, &res).unwrap();
            find_pseudo_equilibria(s, &a.mesh, None, &TangencyAnalysis::run(s, &res)).equilibria
        };
        let (e0, e1) = (find(&base), find(&scaled));
        prop_assert_eq!(e0.len(), e1.len());
        for (a, b) in e0.iter().zip(&e1) {
            prop_assert!((a.location - b.location).norm() < 1e-8);
            prop_assert_eq!(a.kind, b.kind);
            // F_Z^N is quadratic in the common factor
            prop_assert!((b.eigenvalues[0].re - c * c * a.eigenvalues[0].re).abs() < 1e-6 * c * c);
        }
    }
}

/// `(X, Y, f)` and `(Y, X, −f)` are the same Filippov system.
#[test]
fn relabelled_system_gets_the_same_verdicts() {
    for e in catalog().iter() {
        let s = e.system().unwrap();
        let r = PwsSystem::parse(e.name, &format!("-({})", e.f), e.y, e.x, e.domain).unwrap();
        let a = stability_report(&s, &Resolution::default(), &Effort::default()).unwrap();
        let b = stability_report(&r, &Resolution::default(), &Effort::default()).unwrap();
        assert_eq!(a.aggregate, b.aggregate, "{}", e.name);
        for (c, d) in a.conditions.iter().zip(&b.conditions) {
            assert_eq!(c.status, d.status, "{} {}", e.name, c.id.name());
        }
    }
}

/// Reversing time swaps Σ^ss and Σ^us; no condition may flip between
/// Satisfied and Violated.
#[test]
fn time_reversal_never_flips_a_decided_verdict() {
    for e in catalog().iter() {
        let s = e.system().unwrap();
        let r = s.scaled(Side::X, -1.0).unwrap().scaled(Side::Y, -1.0).unwrap();
        let a = stability_report(&s, &Resolution::default(), &Effort::default()).unwrap();
        let b = stability_report(&r, &Resolution::default(), &Effort::default()).unwrap();
        for (c, d) in a.conditions.iter().zip(&b.conditions) {
            let flip = matches!(
                (c.status, d.status),
                (Status::Satisfied, Status::Violated) | (Status::Violated, Status::Satisfied)
            );
            assert!(!flip, "{} {}: {:?} vs {:?}", e.name, c.id.name(), c.witness, d.witness);
        }
    }
}
