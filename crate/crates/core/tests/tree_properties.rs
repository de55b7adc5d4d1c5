use num_complex::Complex64 as C64;
use whisker_core::kernel::QuadratureInverse;
use whisker_core::lindstedt::expand_orders;
use whisker_core::linearization::{LinearizationMethod, NewtonMethod};
use whisker_core::model::ModelConfig;
use whisker_core::torus::solve_torus;
use whisker_core::trees::{Tree, TreeEvaluator};
use whisker_core::whisker::WhiskerSolution;

fn cfg(eps: f64) -> ModelConfig {
    let mut c = ModelConfig::default_for(1, eps);
    c.numerics.kmax = 8;
    c
}

fn evaluator(eps: f64) -> TreeEvaluator {
    let c = cfg(eps);
    let torus = solve_torus(&c).unwrap();
    let lin = NewtonMethod.solve(&c, &torus).unwrap();
    TreeEvaluator::new(&c, &torus, &lin, &QuadratureInverse).unwrap()
}

fn points() -> Vec<(C64, Vec<C64>)> {
    let mut v = Vec::new();
    for &z in &[-1.0, -0.5, -0.1, 0.2, 0.6, 1.0] {
        for &t in &[0.0, 2.1] {
            v.push((C64::from(z), vec![C64::from(t)]));
        }
    }
    v
}

fn maxdiff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn first_circle_matches_first_series_order() {
    let eps = 1e-4;
    let (p, m) = (evaluator(eps), evaluator(-eps));
    let s = expand_orders(&cfg(0.0), 1, &QuadratureInverse).unwrap();
    let c1 = Tree::Circle(1);
    let mut worst: f64 = 0.0;
    for (z, th) in points() {
        let a = p.eval_at(&c1, z, &th).unwrap();
        let b = m.eval_at(&c1, z, &th).unwrap();
        let fd: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * eps)).collect();
        let z2 = s.remainder_order(1, z, &th).unwrap();
        worst = worst.max(maxdiff(&fd, &z2));
    }
    println!("circle-1 vs series order 1: {worst:.3e}");
    assert!(worst < 1e-7);
}

#[test]
fn tree_sum_reproduces_the_remainder_to_third_order() {
    let err = |eps: f64| {
        let ev = evaluator(eps);
        let w = WhiskerSolution::solve(&cfg(eps), &QuadratureInverse).unwrap();
        let parts = &w.unstable.parts;
        points()
            .iter()
            .map(|(z, th)| {
                let exact = parts.zt[usize::from(z.re < 0.0)].eval(*z, th);
                maxdiff(&ev.sum_at(2, *z, th).unwrap(), &exact)
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(4e-3), err(2e-3));
    println!("tree sum errors {e1:.3e} {e2:.3e} ratio {:.2}", e1 / e2);
    let r = e1 / e2;
    assert!(r > 4.0 && r < 16.0);
}

#[test]
fn tree_order_follows_degree_and_vanishes_at_origin() {
    let t = Tree::Node(vec![Tree::Dot, Tree::Circle(1), Tree::Circle(1)]);
    assert_eq!(t.degree(), 3);
    let size = |eps: f64| {
        let ev = evaluator(eps);
        points().iter().map(|(z, th)| ev.eval_at(&t, *z, th).unwrap().iter().map(|x| x.norm()).fold(0.0, f64::max)).fold(0.0, f64::max)
    };
    let (a, b) = (size(4e-3), size(2e-3));
    println!("degree-3 tree sizes {a:.3e} {b:.3e} ratio {:.2}", a / b);
    assert!(a / b > 6.0 && a / b < 10.0);

    let ev = evaluator(1e-3);
    let th = [C64::from(0.7)];
    for tr in [Tree::Circle(1), Tree::Circle(2), Tree::Node(vec![Tree::Dot, Tree::Circle(1)])] {
        let h = 1e-4;
        let v0 = ev.eval_at(&tr, C64::from(h), &th).unwrap();
        let v1 = ev.eval_at(&tr, C64::from(-h), &th).unwrap();
        // O(z^2) at the origin: value and slope both vanish
        for (x, y) in v0.iter().zip(&v1) {
            assert!(x.norm() < 1e-6 * h && y.norm() < 1e-6 * h);
            assert!(((x - y) / (2.0 * h)).norm() < 1e-6 * h);
        }
    }
    assert!(ev.memo_len() >= 3);
}
