use super::*;
use crate::geometry::{Coordinate, MetricChart};
use std::f64::consts::PI;

fn flat_torus(n: usize) -> SolitonStructure {
    let coords = (0..n).map(|i| Coordinate::new(&format!("x{i}"), CoordKind::Periodic, 0.0, 2.0 * PI)).collect();
    let entries: Vec<_> = (0..n).map(|i| ((i, i), Expr::one())).collect();
    let chart = MetricChart::from_upper(coords, &entries, 0.0).unwrap();
    SolitonStructure::new(chart, Expr::zero(), 0.0).unwrap()
}

fn plane() -> SolitonStructure {
    let coords = (0..2).map(|i| Coordinate::new(&format!("x{i}"), CoordKind::Line, -3.0, 3.0)).collect();
    let chart = MetricChart::from_upper(coords, &[((0, 0), Expr::one()), ((1, 1), Expr::one())], 0.0).unwrap();
    SolitonStructure::new(chart, Expr::parse("(x0^2 + x1^2)/2").unwrap(), 1.0).unwrap()
}

fn wavy_torus() -> SolitonStructure {
    let n = 4;
    let coords = (0..n).map(|i| Coordinate::new(&format!("x{i}"), CoordKind::Periodic, 0.0, 2.0 * PI)).collect();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let t = if i == j {
                format!("1 + 0.1*sin(x{i} + 2*x{})", (i + 1) % n)
            } else {
                format!("0.05*cos(x{i} - x{j} + {})", i + j)
            };
            entries.push(((i, j), Expr::parse(&t).unwrap()));
        }
    }
    let chart = MetricChart::from_upper(coords, &entries, 0.0).unwrap();
    SolitonStructure::new(chart, Expr::parse("cos(x1) + 0.5*sin(x0 - x3)").unwrap(), 1.0).unwrap()
}

#[test]
fn torus_volume() {
    let s = flat_torus(4);
    let it = Integrator::new(&s, "2,2,2,2".parse().unwrap());
    let one = WeightSpec::general("1", 0.0).unwrap();
    let r = it.integrate_scalar(&Expr::one(), &one).unwrap();
    assert!((r.value - (2.0 * PI).powi(4)).abs() < 1e-9);
    assert_eq!(r.doubling_delta, r.doubling_delta.abs());
    assert!(r.doubling_delta < 1e-9 && r.cap_bound == 0.0 && r.tail_bound == 0.0);
}

#[test]
fn gaussian_plane() {
    let s = plane();
    let it = Integrator::new(&s, GridSpec::default());
    let r = it.integrate_scalar(&Expr::one(), &WeightSpec::exponential(1.0)).unwrap();
    assert!((r.value - 2.0 * PI).abs() < 1e-12, "{r:?}");
    assert!(r.tail_bound < 1e-12);
    let r = it.integrate_scalar(&Expr::parse("x0^2").unwrap(), &WeightSpec::exponential(0.5)).unwrap();
    assert!((r.value - 2.0 * PI * 2.0 * 2.0).abs() < 1e-10, "{r:?}");
    assert!(matches!(
        it.integrate_scalar(&Expr::one(), &WeightSpec::exponential(-1.0)),
        Err(IntegrateError::DivergentWeight { .. })
    ));
    let general = WeightSpec::general("exp(-u)*(1 + u^2)", 1.0).unwrap();
    let r = it.integrate_scalar(&Expr::one(), &general).unwrap();
    // int e^{-r^2/2}(1 + r^4/4) 2 pi r dr = 2 pi (1 + 2)
    assert!((r.value - 6.0 * PI).abs() < 1e-10, "{r:?}");
}

#[test]
fn linear_in_the_integrand() {
    let s = plane();
    let it = Integrator::new(&s, GridSpec::default());
    let w = WeightSpec::exponential(1.0);
    let (a, b) = (Expr::parse("sin(x0)*x1^2").unwrap(), Expr::parse("exp(x0/3)").unwrap());
    let ia = it.integrate_scalar(&a, &w).unwrap().value;
    let ib = it.integrate_scalar(&b, &w).unwrap().value;
    let iab = it.integrate_scalar(&a.scale(2.0).add(&b.scale(-3.0)), &w).unwrap().value;
    assert!((iab - (2.0 * ia - 3.0 * ib)).abs() <= 1e-12 * iab.abs().max(1.0));
}

#[test]
fn stokes_on_tori() {
    let s = flat_torus(4);
    let it = Integrator::new(&s, "4,4,4,4".parse().unwrap());
    let one = WeightSpec::general("1", 0.0).unwrap();
    let v = VectorField::Components(vec![Expr::parse("sin(x0)").unwrap(), Expr::zero(), Expr::zero(), Expr::zero()]);
    assert!(it.stokes_residual(&v, &one).unwrap().integral.value.abs() <= 1e-10);

    let s = wavy_torus();
    let it = Integrator::new(&s, "8,8,8,8".parse().unwrap());
    let v = VectorField::Components(vec![
        Expr::parse("x0*0 + sin(x1)*cos(x2)").unwrap(),
        Expr::parse("cos(x0 + x3)^2").unwrap(),
        Expr::zero(),
        Expr::parse("sin(x2)").unwrap(),
    ]);
    let r = it.stokes_residual(&v, &WeightSpec::exponential(1.0)).unwrap();
    assert!(r.comparison.passes(1e-8), "{r:?}");
}

#[test]
fn grid_specs() {
    let g: GridSpec = "6,4,_,_@12~0.1".parse().unwrap();
    assert_eq!(g.counts, vec![Some(6), Some(4), None, None]);
    assert_eq!(g.radius, Some(12.0));
    assert_eq!(g.margin, Some(0.1));
    assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
    assert!("1,x".parse::<GridSpec>().is_err());
    assert_eq!("".parse::<GridSpec>().unwrap(), GridSpec::default());
    let line = Axis { rule: AxisRule::Line, lo: -1.0, hi: 1.0, count: 5 };
    assert_eq!(line.nodes(1).len(), 9);
    assert!((line.nodes(1).iter().map(|n| n.1).sum::<f64>() - 2.0).abs() < 1e-15);
    assert!(line_tail(1.0, 10.0) < 1e-13 && line_tail(1.0, 1.0).is_infinite());
}

#[test]
fn weight_parsing() {
    assert_eq!(rename_u("exp(-u)*(1+u^2)"), "exp(-x0)*(1+x0^2)");
    let w = WeightSpec::general("exp(-u)*(1+u^2)", 1.0).unwrap();
    let (p, dp) = w.eval(2.0).unwrap();
    assert!((p - 5.0 * (-2.0f64).exp()).abs() < 1e-15);
    assert!((dp - (-5.0 + 4.0) * (-2.0f64).exp()).abs() < 1e-15);
    let (p, dp) = WeightSpec::exponential(0.5).eval(2.0).unwrap();
    assert_eq!(dp, -0.5 * p);
}
