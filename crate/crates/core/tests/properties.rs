use std::f64::consts::PI;
use std::sync::Arc;

use holfol::bisubmersion::{compose, equivalent, invert, GeneratorSet, HolonomyWord};
use holfol::flows::flow;
use holfol::foliation::FoliationModule;
use holfol::groupoid::{Groupoid, HolonomyGroupoid, TransformationGroupoid, ARROW_TOL};
use holfol::lie2::{u1, GroupAction};
use holfol::sampling::{random_field, SeededRng};
use holfol::symcore::{lie_bracket, ChartManifold, Coordinate, VectorField};
use proptest::prelude::*;

fn plane() -> Arc<ChartManifold> {
    Arc::new(ChartManifold::euclidean("R3", &["x", "y", "z"]))
}

fn cylinder() -> Arc<ChartManifold> {
    Arc::new(ChartManifold::new("cyl", vec![Coordinate::circle("theta", 2.0 * PI), Coordinate::line("y")]).unwrap())
}

fn fields(m: &Arc<ChartManifold>, seed: u64, n: usize) -> Vec<VectorField> {
    let mut rng = SeededRng::new(seed);
    (0..n).map(|_| random_field(m, &mut rng)).collect()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(seed in any::<u64>(), p in point(), a in -2.0f64..2.0) {
        let m = plane();
        let f = fields(&m, seed, 3);
        let xy = lie_bracket(&f[0], &f[1]).unwrap().eval(&p).unwrap();
        let yx = lie_bracket(&f[1], &f[0]).unwrap().eval(&p).unwrap();
        let neg: Vec<f64> = yx.iter().map(|v| -v).collect();
        prop_assert!(close(&xy, &neg, 1e-9));
        let combo = f[0].scale(a).add(&f[2]).unwrap();
        let lhs = lie_bracket(&combo, &f[1]).unwrap().eval(&p).unwrap();
        let zy = lie_bracket(&f[2], &f[1]).unwrap().eval(&p).unwrap();
        let rhs: Vec<f64> = xy.iter().zip(&zy).map(|(u, v)| a * u + v).collect();
        prop_assert!(close(&lhs, &rhs, 1e-9));
    }

    #[test]
    fn jacobi_identity(seed in any::<u64>(), p in point()) {
        let m = plane();
        let f = fields(&m, seed, 3);
        let (x, y, z) = (&f[0], &f[1], &f[2]);
        let terms = [
            lie_bracket(x, &lie_bracket(y, z).unwrap()).unwrap().eval(&p).unwrap(),
            lie_bracket(y, &lie_bracket(z, x).unwrap()).unwrap().eval(&p).unwrap(),
            lie_bracket(z, &lie_bracket(x, y).unwrap()).unwrap().eval(&p).unwrap(),
        ];
        for k in 0..3 {
            prop_assert!((terms[0][k] + terms[1][k] + terms[2][k]).abs() < 1e-8);
        }
    }

    #[test]
    fn derivatives_match_central_differences(seed in any::<u64>(), p in point(), i in 0usize..3) {
        let m = plane();
        let x = &fields(&m, seed, 1)[0];
        let h = 1e-5;
        for c in x.components() {
            let d = c.diff_coord(i).eval_at(&p).unwrap();
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (c.eval_at(&a).unwrap() - c.eval_at(&b).unwrap()) / (2.0 * h);
            prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{d} vs {fd}");
        }
    }

    #[test]
    fn flows_compose_and_invert(seed in any::<u64>(), p in point(), s in -0.5f64..0.5, t in -0.5f64..0.5) {
        let m = plane();
        let x = &fields(&m, seed, 1)[0];
        let a = flow(x, &p, s).unwrap().completed(&p).unwrap();
        let ab = flow(x, &a, t).unwrap().completed(&a).unwrap();
        let direct = flow(x, &p, s + t).unwrap().completed(&p).unwrap();
        prop_assert!(m.distance(&ab, &direct) < 1e-6);
        let back = flow(&x.scale(-1.0), &a, s).unwrap().completed(&a).unwrap();
        prop_assert!(m.distance(&back, &p) < 1e-6);
    }

    #[test]
    fn transformation_groupoid_laws(g1 in 0.0f64..6.0, g2 in 0.0f64..6.0, th in 0.0f64..6.0, y in -2.0f64..2.0) {
        let c = cylinder();
        let h = TransformationGroupoid::new(Arc::new(GroupAction::translation(Arc::new(u1()), c, &[0]).unwrap()));
        let a = (vec![g1], vec![th, y]);
        let b = (vec![g2], h.target(&a).unwrap());
        let ba = h.compose(&b, &a).unwrap();
        prop_assert!(h.base().distance(&h.source(&ba).unwrap(), &h.source(&a).unwrap()) < ARROW_TOL);
        prop_assert!(h.base().distance(&h.target(&ba).unwrap(), &h.target(&b).unwrap()) < ARROW_TOL);
        let unit = h.identity(&h.source(&a).unwrap()).unwrap();
        prop_assert!(h.deviation(&h.compose(&h.invert(&a).unwrap(), &a).unwrap(), &unit).unwrap() < ARROW_TOL);
        prop_assert!(h.deviation(&h.compose(&a, &unit).unwrap(), &a).unwrap() < ARROW_TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn holonomy_words_form_a_groupoid(seed in any::<u64>(), th in 0.0f64..6.0, y in -1.0f64..1.0) {
        let c = cylinder();
        let f = FoliationModule::from_fields(
            c.clone(),
            vec![VectorField::parse(c.clone(), &["1", "y"]).unwrap()],
        )
        .unwrap();
        let h = HolonomyGroupoid::new(GeneratorSet::of_foliation(&f, "F"));
        let mut rng = SeededRng::new(seed);
        let p = vec![th, y];
        let w1 = h.sample_arrow_from(&p, &mut rng).unwrap();
        let w2 = h.sample_arrow_from(w1.target(), &mut rng).unwrap();
        let w3 = h.sample_arrow_from(w2.target(), &mut rng).unwrap();
        let left = compose(&w3, &compose(&w2, &w1).unwrap()).unwrap();
        let right = compose(&compose(&w3, &w2).unwrap(), &w1).unwrap();
        prop_assert!(equivalent(&left, &right).unwrap());
        let unit = HolonomyWord::empty(c.clone(), &p).unwrap();
        prop_assert!(equivalent(&compose(&invert(&w1).unwrap(), &w1).unwrap(), &unit).unwrap());
    }
}
