use super::*;
use crate::expr::Expr;
use crate::jet::Jet;

fn sphere2() -> MetricChart {
    let pi = std::f64::consts::PI;
    MetricChart::from_upper(
        vec![
            Coordinate::new("theta", CoordKind::Interval, 0.0, pi),
            Coordinate::new("phi", CoordKind::Periodic, 0.0, 2.0 * pi),
        ],
        &[((0, 0), Expr::one()), ((1, 1), Expr::parse("sin(x0)^2").unwrap())],
        0.15,
    )
    .unwrap()
}

/// S^2 x R^2 with the unit sphere in `(x0, x1)`.
fn s2xr2() -> MetricChart {
    let pi = std::f64::consts::PI;
    MetricChart::from_upper(
        vec![
            Coordinate::new("theta", CoordKind::Interval, 0.0, pi),
            Coordinate::new("phi", CoordKind::Periodic, 0.0, 2.0 * pi),
            Coordinate::new("x", CoordKind::Line, -3.0, 3.0),
            Coordinate::new("y", CoordKind::Line, -3.0, 3.0),
        ],
        &[
            ((0, 0), Expr::one()),
            ((1, 1), Expr::parse("sin(x0)^2").unwrap()),
            ((2, 2), Expr::one()),
            ((3, 3), Expr::one()),
        ],
        0.15,
    )
    .unwrap()
}

/// S^3 x R in hyperspherical coordinates.
fn s3xr() -> MetricChart {
    let pi = std::f64::consts::PI;
    MetricChart::from_upper(
        vec![
            Coordinate::new("a", CoordKind::Interval, 0.0, pi),
            Coordinate::new("b", CoordKind::Interval, 0.0, pi),
            Coordinate::new("c", CoordKind::Periodic, 0.0, 2.0 * pi),
            Coordinate::new("t", CoordKind::Line, -3.0, 3.0),
        ],
        &[
            ((0, 0), Expr::one()),
            ((1, 1), Expr::parse("sin(x0)^2").unwrap()),
            ((2, 2), Expr::parse("sin(x0)^2*sin(x1)^2").unwrap()),
            ((3, 3), Expr::one()),
        ],
        0.15,
    )
    .unwrap()
}

/// A generic non-diagonal metric.
fn wobbly(n: usize) -> MetricChart {
    let pi = std::f64::consts::PI;
    let coords = (0..n).map(|i| Coordinate::new(&format!("x{i}"), CoordKind::Periodic, 0.0, 2.0 * pi)).collect();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let text = if i == j {
                format!("1 + 0.1*sin(x{i} + 2*x{})", (i + 1) % n)
            } else {
                format!("0.05*cos(x{i} - x{j} + {})", i + j)
            };
            entries.push(((i, j), Expr::parse(&text).unwrap()));
        }
    }
    MetricChart::from_upper(coords, &entries, 0.0).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn max_abs(t: &Tensor<Jet>) -> f64 {
    t.values().max_abs()
}

#[test]
fn sphere_christoffel_closed_form() {
    let theta = std::f64::consts::PI / 3.0;
    let geo = sphere2().local(&[theta, 0.4], 2).unwrap();
    let gamma = geo.christoffel().unwrap().values();
    assert!(close(*gamma.get(&[0, 1, 1]), -theta.sin() * theta.cos(), 1e-14));
    assert!(close(*gamma.get(&[0, 1, 1]), -0.4330127018922193, 1e-12));
    assert!(close(*gamma.get(&[1, 0, 1]), theta.cos() / theta.sin(), 1e-14));
}

#[test]
fn symbolic_and_jet_christoffel_agree() {
    let chart = wobbly(3);
    let p = [0.3, 1.1, -0.4];
    let sym = chart.symbolic().unwrap().christoffel().unwrap().evaluate(&p).unwrap();
    let jet = chart.local(&p, 1).unwrap().christoffel().unwrap().values();
    assert!(sym.sub(&jet).unwrap().max_abs() < 1e-13);
}

#[test]
fn sphere_curvature_sign() {
    let geo = sphere2().local(&[1.0, 2.0], 2).unwrap();
    assert!(close(geo.scalar_curvature().unwrap().value(), 2.0, 1e-13));
    let ric = geo.ricci().unwrap().values();
    let g = geo.g().values();
    assert!(ric.sub(&g).unwrap().max_abs() < 1e-13);
}

#[test]
fn product_ricci_blocks() {
    let geo = s2xr2().local(&[0.8, 0.1, 0.5, -1.0], 2).unwrap();
    let ric = geo.ricci().unwrap().values();
    let g = geo.g().values();
    for (i, want) in [1.0, 1.0, 0.0, 0.0].iter().enumerate() {
        assert!(close(ric.get(&[i, i]) / g.get(&[i, i]), *want, 1e-13));
    }
    assert!(close(geo.scalar_curvature().unwrap().value(), 2.0, 1e-13));
    let w = geo.weyl().unwrap().values();
    assert!(w.max_abs() > 0.1);
}

#[test]
fn cylinder_is_conformally_flat() {
    let geo = s3xr().local(&[1.0, 1.2, 0.3, 0.7], 2).unwrap();
    assert!(max_abs(&geo.weyl().unwrap()) < 1e-12);
    assert!(close(geo.scalar_curvature().unwrap().value(), 6.0, 1e-13));
}

#[test]
fn weyl_is_trace_free() {
    let geo = wobbly(4).local(&[0.2, 0.9, 2.0, -1.3], 2).unwrap();
    let w = geo.weyl().unwrap();
    for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        assert!(max_abs(&w.contract(a, b, geo.metric()).unwrap()) < 1e-12, "{a}{b}");
    }
}

#[test]
fn metric_compatibility() {
    let geo = wobbly(3).local(&[0.5, 0.1, 2.2], 2).unwrap();
    let dg = geo.covariant_derivative(geo.g()).unwrap();
    assert!(max_abs(&dg) < 1e-13);
}

#[test]
fn divergence_matches_contracted_derivative() {
    let geo = wobbly(4).local(&[0.2, 0.9, 2.0, -1.3], 3).unwrap();
    let w = geo.weyl().unwrap();
    let full = geo.covariant_derivative(&w).unwrap();
    for slot in 0..4 {
        let a = geo.divergence(&w, slot).unwrap().values();
        let b = full.contract(slot, 4, geo.metric()).unwrap().values();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12, "slot {slot}");
    }
}

#[test]
fn contracted_bianchi() {
    let geo = wobbly(4).local(&[1.2, 0.3, -0.8, 2.5], 3).unwrap();
    let div_ric = geo.divergence(&geo.ricci().unwrap(), 1).unwrap().values();
    let dr = geo.gradient(&geo.scalar_curvature().unwrap()).values();
    assert!(div_ric.sub(&dr.scale(0.5)).unwrap().max_abs() < 1e-12);
}

#[test]
fn cotton_definitions_agree() {
    let geo = wobbly(4).local(&[1.2, 0.3, -0.8, 2.5], 3).unwrap();
    let a = geo.cotton().unwrap().values();
    let b = geo.cotton_from_weyl().unwrap().values();
    assert!(a.max_abs() > 1e-3);
    assert!(a.sub(&b).unwrap().max_abs() < 1e-12 * a.max_abs().max(1.0));
}

#[test]
fn bach_divergence_identity() {
    let geo = wobbly(5).local(&[1.2, 0.3, -0.8, 2.5, 0.1], 5).unwrap();
    let b = geo.bach().unwrap().values();
    assert!(b.sub(&b.permute(&[1, 0]).unwrap()).unwrap().max_abs() < 1e-11);
    let (lhs, rhs) = geo.bach_divergence_sides().unwrap();
    let (lhs, rhs) = (lhs.values(), rhs.values());
    assert!(lhs.max_abs() > 1e-4);
    assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10);
}

#[test]
fn dimension_guards() {
    let geo = wobbly(3).local(&[0.1, 0.2, 0.3], 3).unwrap();
    assert!(max_abs(&geo.weyl().unwrap()) < 1e-12);
    assert!(matches!(geo.bach(), Err(GeometryError::Dimension { needed: 4, .. })));
    assert!(geo.cotton_from_weyl().is_err());
}

#[test]
fn cache_hits_are_shared() {
    let geo = wobbly(3).local(&[0.1, 0.2, 0.3], 2).unwrap();
    let a = geo.riemann().unwrap();
    let b = geo.riemann().unwrap();
    assert!(Arc::ptr_eq(&a, &b));
    assert!(geo.cache().len() >= 2);
}

#[test]
fn invalid_charts_rejected() {
    let c = vec![Coordinate::new("x", CoordKind::Line, -1.0, 1.0), Coordinate::new("y", CoordKind::Line, -1.0, 1.0)];
    let bad = vec![Expr::one(), Expr::var(0), Expr::var(1), Expr::one()];
    assert!(MetricChart::new(c.clone(), bad, 0.0).is_err());
    let out_of_range = vec![Expr::one(), Expr::zero(), Expr::zero(), Expr::var(2)];
    assert!(MetricChart::new(c.clone(), out_of_range, 0.0).is_err());
    let indefinite = MetricChart::from_upper(c, &[((0, 0), Expr::one()), ((1, 1), Expr::integer(-1))], 0.0).unwrap();
    assert!(matches!(indefinite.local(&[0.0, 0.0], 2), Err(GeometryError::NotPositiveDefinite { .. })));
}
