//! Entropy functional against independent direct evaluations.

use twoscale::diagnostics::{entropy, EntropyConfig};
use twoscale::{
    Anisotropy, DensityField, DiscreteMeasure, Grid, InteractionKernel, InteractionMatrix, Population, Rect, SimState,
    Vec2,
};

fn full_matrix(n: usize, k: InteractionKernel<f64>) -> InteractionMatrix<f64> {
    let mut im = InteractionMatrix::empty(n);
    for o in 0..n {
        for s in 0..n {
            im.set(o, s, Some(k));
        }
    }
    im
}

fn functional(state: &SimState<f64>) -> f64 {
    entropy(state, &EntropyConfig::from_state(state).unwrap())
}

#[test]
fn particles_match_the_closed_form() {
    let g = Grid::new(30.0, 30.0, 30, 30).unwrap();
    let k = InteractionKernel::attract_repel(0.7, 1.2, 3.5).unwrap();
    let a = vec![Vec2::new(10.3, 11.1), Vec2::new(11.9, 12.4), Vec2::new(13.05, 10.2)];
    let b = vec![Vec2::new(12.2, 14.7), Vec2::new(9.4, 9.9)];
    let (wa, wb) = (2.5, 4.0);
    let (va, vb) = (Vec2::new(1.34, 0.0), Vec2::new(-0.4, 0.9));
    let pops = vec![
        Population::discrete("a", DiscreteMeasure::new(wa, a.clone()).unwrap(), va, Anisotropy::isotropic()),
        Population::discrete("b", DiscreteMeasure::new(wb, b.clone()).unwrap(), vb, Anisotropy::isotropic()),
    ];
    let state = SimState::new(g, 0.01, pops, full_matrix(2, k)).unwrap();

    let all: Vec<(f64, Vec2<f64>)> = a.iter().map(|&p| (wa, p)).chain(b.iter().map(|&p| (wb, p))).collect();
    let mut expected = a.iter().map(|p| wa * va.dot(*p)).sum::<f64>() + b.iter().map(|p| wb * vb.dot(*p)).sum::<f64>();
    for (i, &(mi, xi)) in all.iter().enumerate() {
        for (j, &(mj, xj)) in all.iter().enumerate() {
            if i != j {
                expected += 0.5 * mi * mj * k.potential((xi - xj).norm());
            }
        }
    }
    let got = functional(&state);
    assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
}

/// Sub-cell midpoint rule on an `r`-times refined lattice of the same
/// piecewise-constant density; own sub-cells use a 16 x 16 average of W.
fn refined_density_functional(field: &DensityField<f64>, v: Vec2<f64>, k: &InteractionKernel<f64>, r: usize) -> f64 {
    let g = field.grid();
    let (hx, hy) = (g.hx() / r as f64, g.hy() / r as f64);
    let mut pts = Vec::new();
    for c in g.cells() {
        let rho = field.get(c);
        if rho == 0.0 {
            continue;
        }
        let lo = g.vertices(c)[0];
        for b in 0..r {
            for a in 0..r {
                pts.push((rho, Vec2::new(lo.x + (a as f64 + 0.5) * hx, lo.y + (b as f64 + 0.5) * hy)));
            }
        }
    }
    let n = 16;
    let mut w0 = 0.0;
    for b in 0..n {
        for a in 0..n {
            let o = Vec2::new(((a as f64 + 0.5) / n as f64 - 0.5) * hx, ((b as f64 + 0.5) / n as f64 - 0.5) * hy);
            w0 += k.potential(o.norm());
        }
    }
    w0 /= (n * n) as f64;
    let da = hx * hy;
    let mut s = 0.0;
    for (i, &(ri, xi)) in pts.iter().enumerate() {
        s += ri * v.dot(xi) * da;
        for (j, &(rj, xj)) in pts.iter().enumerate() {
            let w = if i == j { w0 } else { k.potential((xi - xj).norm()) };
            s += 0.5 * ri * rj * w * da * da;
        }
    }
    s
}

#[test]
fn density_matches_refined_quadrature() {
    let g = Grid::new(30.0, 30.0, 30, 30).unwrap();
    let k = InteractionKernel::attract_repel(0.03, 1.5, 3.0).unwrap();
    let v = Vec2::new(0.0, 1.34);
    let field = DensityField::from_block(&g, Rect::new(12.0, 12.0, 18.0, 18.0), 2.0).unwrap();
    let state = SimState::new(
        g,
        0.01,
        vec![Population::density("crowd", field.clone(), v, Anisotropy::isotropic())],
        full_matrix(1, k),
    )
    .unwrap();
    let got = functional(&state);
    let oracle = refined_density_functional(&field, v, &k, 4);
    let rel = (got - oracle).abs() / oracle.abs();
    assert!(rel < 0.01, "midpoint {got} vs refined {oracle} (rel {rel:.2e})");
}

fn pair_only(cells: usize, k: InteractionKernel<f64>) -> (f64, DensityField<f64>) {
    let g = Grid::new(30.0, 30.0, cells, cells).unwrap();
    let field = DensityField::from_block(&g, Rect::new(12.0, 12.0, 18.0, 18.0), 2.0).unwrap();
    let state = SimState::new(
        g,
        0.01,
        vec![Population::density("crowd", field.clone(), Vec2::zero(), Anisotropy::isotropic())],
        full_matrix(1, k),
    )
    .unwrap();
    (functional(&state), field)
}

#[test]
fn pair_term_matches_direct_sum_at_same_resolution() {
    for k in [
        InteractionKernel::attract_repel(0.03, 1.5, 3.0).unwrap(),
        InteractionKernel::attract_repel(0.03, 4.0, 8.0).unwrap(),
        InteractionKernel::repel_only(0.03, 4.0).unwrap(),
    ] {
        let (got, field) = pair_only(30, k);
        let direct = refined_density_functional(&field, Vec2::zero(), &k, 1);
        let rel = (got - direct).abs() / direct.abs();
        assert!(rel < 0.01, "{k:?}: {got} vs {direct} (rel {rel:.2e})");
    }
}

#[test]
fn pair_term_converges_under_refinement() {
    for k in [
        InteractionKernel::attract_repel(0.03, 1.5, 3.0).unwrap(),
        InteractionKernel::attract_repel(0.03, 4.0, 8.0).unwrap(),
    ] {
        let (_, field) = pair_only(30, k);
        let reference = refined_density_functional(&field, Vec2::zero(), &k, 4);
        let errs: Vec<f64> = [30, 60, 120].iter().map(|&n| (pair_only(n, k).0 - reference).abs() / reference.abs()).collect();
        assert!(errs[1] < 0.5 * errs[0] && errs[2] < 0.01, "{k:?}: {errs:?}");
    }
}
