// SPDX-License-Identifier: Apache-2.0

use pinn_core::network::{augment_input, forward, initialize, NetworkSpec, Region};
use pinn_core::oracle::burgers_reference;
use pinn_core::problems::{
    burgers_initial, interface_residuals, mollified_delta, riccati_exact_derivative, riccati_residual, Burgers, Condition,
    PbGeometry, PbMode, PoissonBoltzmann, Problem, Riccati,
};
use proptest::prelude::*;

fn find<'a>(conds: &'a [Condition], name: &str) -> &'a Condition {
    conds.iter().find(|c| c.label.name == name).unwrap()
}

#[test]
fn burgers_interior_samples_cover_every_cell() {
    let b = Burgers::default();
    let mut counts = b.default_counts();
    counts.set("pde", 10_000);
    let conds = b.sample(&counts, 11).unwrap();
    let pde = find(&conds, "pde");
    let mut hits = [[0usize; 5]; 8];
    for col in pde.points.columns() {
        let (x, t) = (col[0], col[1]);
        assert!((0.0..=8.0).contains(&x) && (0.0..=5.0).contains(&t));
        hits[((x / 1.0) as usize).min(7)][(t as usize).min(4)] += 1;
    }
    assert!(hits.iter().flatten().all(|&h| h >= 1), "{hits:?}");
}

#[test]
fn mollifier_has_unit_mass() {
    for sigma in [0.1, 0.2, 0.5] {
        let n = 48;
        let h = 12.0 * sigma / n as f64;
        let c = [0.3, -0.2, 0.1];
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [i, j, k].map(|m| -6.0 * sigma + (m as f64 + 0.5) * h);
                    sum += mollified_delta(&[c[0] + p[0], c[1] + p[1], c[2] + p[2]], &c, sigma);
                }
            }
        }
        let mass = sum * h * h * h;
        assert!((mass - 1.0).abs() <= 1e-3, "σ = {sigma}: {mass}");
    }
}

#[test]
fn riccati_exact_solution_has_vanishing_residual_at_samples() {
    let r = Riccati::default();
    let conds = r.sample(&r.default_counts(), 3).unwrap();
    for col in find(&conds, "pde").points.columns() {
        let t = col[0];
        let y1 = riccati_exact_derivative(t).unwrap();
        let y2 = -2.0 * t / (t * t - 1.0).powi(2);
        assert!(riccati_residual(0.0, y1, y2, t).abs() <= 1e-8 * y2.abs().max(1.0), "t = {t}");
    }
}

#[test]
fn burgers_reference_satisfies_initial_and_wall_conditions() {
    let b = Burgers::default();
    let g = burgers_reference(&b).unwrap();
    let conds = b.sample(&b.default_counts(), 5).unwrap();
    for col in find(&conds, "ic").points.columns() {
        let u = g.interpolate(&[col[0], 0.0]).unwrap();
        // Linear interpolation of the Gaussian between 0.02-spaced nodes.
        assert!((u - burgers_initial(col[0], b.length)).abs() <= 1e-3);
    }
    for name in ["bc-left", "bc-right"] {
        for col in find(&conds, name).points.columns() {
            assert!(g.interpolate(&[col[0], col[1]]).unwrap().abs() <= 1e-3);
        }
    }
}

#[test]
fn pb_condition_points_lie_on_their_sets() {
    let pb = PoissonBoltzmann::new(PbGeometry::default(), PbMode::Nonlinear).unwrap();
    let g = &pb.geometry;
    let conds = pb.sample(&pb.default_counts(), 9).unwrap();
    let r = |c: ndarray::ArrayView1<f64>| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    assert!(find(&conds, "pde-inside").points.columns().into_iter().all(|c| r(c) < g.radius));
    assert!(find(&conds, "pde-outside")
        .points
        .columns()
        .into_iter()
        .all(|c| r(c) > g.radius && r(c) < g.truncation_radius));
    for name in ["interface-continuity", "interface-flux"] {
        assert!(find(&conds, name).points.columns().into_iter().all(|c| (r(c) - g.radius).abs() < 1e-12));
    }
    assert!(find(&conds, "boundary")
        .points
        .columns()
        .into_iter()
        .all(|c| (r(c) - g.truncation_radius).abs() < 1e-12));
}

#[test]
fn two_sided_fields_come_from_the_label_coordinate() {
    let geom = PbGeometry::default();
    let p = initialize(&NetworkSpec::new(vec![4, 8, 8, 1], 4).unwrap()).unwrap();
    let x = [0.6, 0.0, 0.8];
    let inside = forward(&p, &augment_input(&x, Region::Inside)).unwrap()[0];
    let outside = forward(&p, &augment_input(&x, Region::Outside)).unwrap()[0];
    let (jump, _) = interface_residuals(&p, &x, &geom).unwrap();
    assert!((jump - (inside - outside)).abs() < 1e-13);
}

proptest! {
    #[test]
    fn sampling_is_reproducible(seed in any::<u64>()) {
        let b = Burgers::default();
        let counts = pinn_core::problems::SampleCounts::from_pairs(&[("pde", 50), ("ic", 5), ("bc-left", 5), ("bc-right", 5)]);
        let a = b.sample(&counts, seed).unwrap();
        let c = b.sample(&counts, seed).unwrap();
        for (x, y) in a.iter().zip(&c) {
            prop_assert_eq!(&x.points, &y.points);
        }
    }

    #[test]
    fn mollifier_is_radial(dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
        let s = 0.3;
        let a = mollified_delta(&[dx, dy, dz], &[0.0; 3], s);
        let b = mollified_delta(&[dz, dx, dy], &[0.0; 3], s);
        let c = mollified_delta(&[-dx, dy, -dz], &[0.0; 3], s);
        prop_assert!((a - b).abs() <= 1e-15 * a.max(1.0));
        prop_assert!((a - c).abs() <= 1e-15 * a.max(1.0));
    }
}
