use std::f64::consts::PI;

use llm_saea::benchmarks::*;
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn classical_values_at_known_points() {
    let ones = vec![1.0; 10];
    // sum of j for j = 1..10
    assert!(close(ellipsoid(&ones), 55.0));
    assert!(close(rosenbrock(&[0.0; 10]), 9.0));
    assert!(close(rastrigin(&ones), 10.0));
    assert!(close(griewank(&[0.0; 4]), 0.0));
    // Unit coordinates: the cosine term is exp(1) and cancels against e.
    let ackley_ones = 20.0 - 20.0 * (-0.2f64).exp();
    assert!(close(ackley(&ones), ackley_ones));
    let x = [PI, 0.0, -1.0];
    let g = (PI * PI + 1.0) / 4000.0 - PI.cos() * 1.0 * (-1.0 / 3f64.sqrt()).cos() + 1.0;
    assert!(close(griewank(&x), g));
}

#[test]
fn every_classical_problem_is_zero_at_its_optimizer() {
    for c in Classical::ALL {
        for d in [2, 10, 30] {
            let p = c.problem(d).unwrap();
            assert_eq!(p.optimum_value(), Some(0.0));
            assert!(p.evaluate(&c.optimizer(d)).abs() < 1e-12, "{} {d}", c.name());
            assert!(p.contains(&c.optimizer(d)));
        }
    }
}

#[test]
fn names_resolve() {
    for name in ["ellipsoid", "rosenbrock", "ackley", "griewank", "rastrigin"] {
        assert!(make_classical(name, 10).unwrap().name().to_lowercase().contains(name));
    }
    assert!(make_classical("nonesuch", 10).is_err());
    assert!(make_classical("ackley", 0).is_err());
}

#[test]
fn shifted_rastrigin_reaches_bias_at_shift() {
    let text = r#"
        name = "shifted-rastrigin"
        base = "rastrigin"
        dim = 3
        bias = -330.0
        shift = [1.0, -2.0, 0.5]
    "#;
    let p = ShiftedRotatedSpec::from_toml_str(text).unwrap().into_problem().unwrap();
    assert_eq!(p.optimum_value(), Some(-330.0));
    assert!(close(p.evaluate(&[1.0, -2.0, 0.5]), -330.0));
    // Moving one unit along the first axis lands on another integer lattice
    // point, where the base function equals the squared distance.
    assert!(close(p.evaluate(&[2.0, -2.0, 0.5]), -329.0));
}

#[test]
fn rotation_is_applied_after_the_shift() {
    // 90 degree rotation in the plane swaps the weights of the ellipse.
    let text = r#"
        base = "elliptic"
        dim = 2
        shift = [0.0, 0.0]
        rotation = [0.0, 1.0, -1.0, 0.0]
    "#;
    let p = ShiftedRotatedSpec::from_toml_str(text).unwrap().into_problem().unwrap();
    assert!(close(p.evaluate(&[1.0, 0.0]), elliptic(&[0.0, -1.0])));
    assert!(close(p.evaluate(&[0.0, 1.0]), elliptic(&[1.0, 0.0])));
}

#[test]
fn malformed_descriptions_are_rejected() {
    let short_shift = "base = \"sphere\"\ndim = 3\nshift = [0.0]";
    assert!(ShiftedRotatedSpec::from_toml_str(short_shift)
        .unwrap()
        .into_problem()
        .is_err());
    let bad_rotation = "base = \"sphere\"\ndim = 2\nshift = [0.0, 0.0]\nrotation = [1.0]";
    assert!(ShiftedRotatedSpec::from_toml_str(bad_rotation)
        .unwrap()
        .into_problem()
        .is_err());
}

proptest! {
    #[test]
    fn classical_functions_are_nonnegative(x in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        for f in [ellipsoid, rosenbrock, ackley, griewank, rastrigin, sphere, schwefel_1_2, schwefel_2_22] {
            prop_assert!(f(&x) >= -1e-12);
        }
    }

    #[test]
    fn ellipsoid_is_weighted_sphere(x in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let expect: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum();
        prop_assert!(close(ellipsoid(&x), expect));
    }
}
