use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dgspace::{Degrees, DgSpace};
use crate::mesh::{build_poly_mesh, generate_voronoi, BoundaryTag, PolyMesh, RawMesh, Rect};

fn voronoi(n: usize, seed: u64, tag: BoundaryTag) -> Arc<PolyMesh> {
    let mut m = generate_voronoi(n, Rect::unit(), seed, 10).unwrap();
    m.retag_boundary(|_, _| tag);
    Arc::new(m)
}

fn mixed(n: usize, seed: u64) -> Arc<PolyMesh> {
    let mut m = generate_voronoi(n, Rect::unit(), seed, 10).unwrap();
    m.retag_boundary(|x, _| if x[0] < 1e-12 || x[1] < 1e-12 { BoundaryTag::Dirichlet } else { BoundaryTag::Neumann });
    Arc::new(m)
}

fn random_dofs(space: &DgSpace, rng: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
    // scale modes so that values stay within roughly [-amp, amp]
    (0..space.num_elements())
        .flat_map(|k| {
            let area = space.mesh().elements[k].area;
            let (lo, hi) = space.mesh().elements[k].bbox;
            let bx = ((hi[0] - lo[0]) * (hi[1] - lo[1])).sqrt();
            let d = space.dim(k);
            (0..d)
                .map(|i| {
                    let s = if i == 0 { area.sqrt().max(bx) } else { 0.3 * bx };
                    amp * s * rng.gen_range(-1.0..1.0)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn two_squares(side: f64) -> Arc<PolyMesh> {
    Arc::new(
        build_poly_mesh(&RawMesh {
            vertices: vec![[0.0, 0.0], [side, 0.0], [2.0 * side, 0.0], [2.0 * side, side], [side, side], [0.0, side]],
            polygons: vec![vec![0, 1, 4, 5], vec![1, 2, 3, 4]],
            labels: vec![0, 0],
            boundary_tags: vec![],
            default_tag: Some(BoundaryTag::Dirichlet),
        })
        .unwrap(),
    )
}

fn interior_face(m: &PolyMesh) -> usize {
    m.interior_faces().next().unwrap().0
}

#[test]
fn zeta_closed_forms() {
    let m = two_squares(0.5 / 2f64.sqrt());
    let s = DgSpace::new(m.clone(), Degrees::Uniform(1)).unwrap();
    let model = ModelData::uniform(2, isotropic(1.0), 0.0);
    let z = penalty_zeta(&s, &model, interior_face(&m), 1.0).unwrap();
    assert!((z - 2.0).abs() < 1e-12);

    let m = two_squares(0.1 / 2f64.sqrt());
    let s = DgSpace::new(m.clone(), Degrees::Uniform(2)).unwrap();
    let bf = m.boundary_faces().next().unwrap().0;
    assert!((penalty_zeta(&s, &model, bf, 10.0).unwrap() - 400.0).abs() < 1e-9);

    let aniso = ModelData::uniform(2, axonal(8.0, 80.0, [0.0, 1.0]), 0.0);
    assert!((penalty_zeta(&s, &aniso, bf, 10.0).unwrap() - 88.0 * 400.0).abs() < 1e-6);
}

#[test]
fn zeta_on_neumann_face_is_an_error() {
    let m = voronoi(5, 1, BoundaryTag::Neumann);
    let s = DgSpace::new(m.clone(), Degrees::Uniform(1)).unwrap();
    let model = ModelData::uniform(5, isotropic(1.0), 0.0);
    let bf = m.boundary_faces().next().unwrap().0;
    assert!(matches!(penalty_zeta(&s, &model, bf, 1.0), Err(Error::NeumannFace(_))));
    assert!(matches!(Penalty::new(&s, &model, 0.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn eta_for_constant_states() {
    let m = voronoi(8, 2, BoundaryTag::Dirichlet);
    let s = DgSpace::new(m.clone(), Degrees::Uniform(2)).unwrap();
    let model = ModelData::uniform(8, isotropic(1.0), 0.0);
    let pen = Penalty::new(&s, &model, 3.0).unwrap();
    for c in [0.0, 0.7, -1.3] {
        let dofs = s.project(|_| c).unwrap();
        for f in 0..m.num_faces() {
            let eta = penalty_eta(&s, &pen, f, &dofs).unwrap();
            let expect = (c + c.abs()).exp() * pen.zeta[f];
            for e in eta {
                assert!((e - expect).abs() < 1e-10 * expect);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn eta_factor_product_at_least_one(seed in 0u64..10_000, amp in 0.1f64..5.0) {
        let m = voronoi(6, 3, BoundaryTag::Dirichlet);
        let s = DgSpace::new(m.clone(), Degrees::Uniform(1)).unwrap();
        let model = ModelData::uniform(6, isotropic(1.0), 0.0);
        let pen = Penalty::new(&s, &model, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dofs = random_dofs(&s, &mut rng, amp);
        let eta = eta_table(&s, &pen, &dofs);
        for (f, e) in eta.0.iter().enumerate() {
            for &v in e {
                prop_assert!(v >= pen.zeta[f] * (1.0 - 1e-14));
            }
        }
    }
}

#[test]
fn form_a_is_symmetric_in_v_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = mixed(12, 5);
    let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
    let model = ModelData::uniform(12, axonal(1.0, 2.0, [1.0, 1.0]), 0.0);
    let pen = Penalty::new(&s, &model, 5.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    for _ in 0..100 {
        let u = random_dofs(&s, &mut rng, 1.0);
        let v = random_dofs(&s, &mut rng, 1.0);
        let w = random_dofs(&s, &mut rng, 1.0);
        let a = forms.form_a(&u, &v, &w).unwrap();
        let b = forms.form_a(&u, &w, &v).unwrap();
        assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
    }
}

#[test]
fn form_a_of_constant_only_sees_dirichlet_faces() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let neu = voronoi(10, 6, BoundaryTag::Neumann);
    let s = DgSpace::new(neu, Degrees::Uniform(2)).unwrap();
    let model = ModelData::uniform(10, isotropic(1.0), 0.0);
    let pen = Penalty::new(&s, &model, 5.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let one = s.project(|_| 1.0).unwrap();
    let u = random_dofs(&s, &mut rng, 1.0);
    let w = random_dofs(&s, &mut rng, 1.0);
    assert!(forms.form_a(&u, &one, &w).unwrap().abs() < 1e-11);

    // with Dirichlet faces: A(u; 1, 1) = sum_D int eta
    let dir = voronoi(10, 6, BoundaryTag::Dirichlet);
    let s = DgSpace::new(dir.clone(), Degrees::Uniform(2)).unwrap();
    let pen = Penalty::new(&s, &model, 5.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let one = s.project(|_| 1.0).unwrap();
    let zero = vec![0.0; s.ndofs()];
    let expect: f64 = dir.boundary_faces().map(|(f, face)| pen.zeta[f] * face.length).sum();
    let a = forms.form_a(&zero, &one, &one).unwrap();
    assert!((a - expect).abs() < 1e-10 * expect);
}

#[test]
fn coercivity_with_inverse_trace_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (mi, seed) in [11u64, 12, 13].into_iter().enumerate() {
        let m = mixed(10 + 5 * mi, seed);
        let n = m.num_elements();
        let s = DgSpace::new(m, Degrees::Uniform(1 + mi)).unwrap();
        let model = ModelData::uniform(n, axonal(1.0, 3.0, [1.0, 2.0]), 0.0);
        let (_, d0_max) = model.spectral_bounds();
        let ci = estimate_ci(&s);
        let pen = Penalty::new(&s, &model, 16.0 * ci * ci * d0_max).unwrap();
        let forms = Forms::new(&s, &model, &pen);
        let one = |_: crate::mesh::geometry::Point| 1.0;
        for _ in 0..40 {
            let v = random_dofs(&s, &mut rng, 1.5);
            let a = forms.form_a(&v, &v, &v).unwrap();
            let norm = forms.dg_norm_mapped(&v, |x| ((0.5 * x).exp(), 0.5 * (0.5 * x).exp()), JumpData::Datum(&one));
            assert!(a >= 0.5 * norm * norm, "{a} < {}", 0.5 * norm * norm);
        }
    }
}

#[test]
fn continuity_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in [21u64, 22, 23] {
        let m = voronoi(12, seed, BoundaryTag::Dirichlet);
        let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
        let model = ModelData::uniform(12, axonal(1.0, 1.0, [0.0, 1.0]), 0.0);
        let (d0, dmax) = model.spectral_bounds();
        let ci = estimate_ci(&s);
        let eta0 = 16.0 * ci * ci * dmax;
        let pen = Penalty::new(&s, &model, eta0).unwrap();
        let forms = Forms::new(&s, &model, &pen);
        let mu = 1f64.max((4.0 * dmax * ci * ci / (d0 * eta0)).sqrt());
        for _ in 0..30 {
            let u = random_dofs(&s, &mut rng, 1.0);
            let v = random_dofs(&s, &mut rng, 1.0);
            let a = forms.form_a(&u, &u, &v).unwrap().abs();
            let linf = linf_per_element(&s, &u).into_iter().fold(0.0, f64::max);
            let eu = forms.dg_norm_mapped(&u, |x| (x.exp(), x.exp()), JumpData::Homogeneous);
            let bound = mu * linf.exp() * eu * forms.dg_norm(&u) * forms.dg_norm(&v);
            assert!(a <= bound, "{a} > {bound}");
        }
    }
}

fn step(theta: f64, dt: f64, eps: f64) -> TimeStep {
    TimeStep {
        theta,
        dt,
        epsilon: eps,
        t_old: 0.0,
        t_new: dt,
    }
}

#[test]
fn residual_of_constant_state_is_pure_mass() {
    let m = voronoi(9, 9, BoundaryTag::Neumann);
    let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
    let model = ModelData::uniform(9, axonal(2.0, 5.0, [1.0, 0.0]), 0.0);
    let pen = Penalty::new(&s, &model, 10.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let old = s.project(|_| 0.3).unwrap();
    let r = forms.residual(&old, &old, &step(0.5, 0.1, 0.0)).unwrap();
    let worst = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    let new = s.project(|_| 0.31).unwrap();
    let r = forms.residual(&new, &old, &step(0.5, 0.1, 0.0)).unwrap();
    assert!(r.iter().any(|v| v.abs() > 1e-4));
}

#[test]
fn residual_scalar_quadratic_oracle() {
    let m = voronoi(6, 10, BoundaryTag::Neumann);
    let s = DgSpace::new(m, Degrees::Uniform(1)).unwrap();
    let model = ModelData::uniform(6, isotropic(1.0), 1.0);
    let pen = Penalty::new(&s, &model, 10.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let (c0, dt) = (0.5f64, 0.1);
    // positive root of dt c^2 + (1 - dt) c - c0 = 0
    let c1 = (-(1.0 - dt) + ((1.0 - dt) * (1.0 - dt) + 4.0 * dt * c0).sqrt()) / (2.0 * dt);
    let old = s.project(|_| c0.ln()).unwrap();
    let new = s.project(|_| c1.ln()).unwrap();
    let r = forms.residual(&new, &old, &step(1.0, dt, 0.0)).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-13), "{:?}", r);
    let off = s.project(|_| (c1 * 1.01).ln()).unwrap();
    let r = forms.residual(&off, &old, &step(1.0, dt, 0.0)).unwrap();
    assert!(r.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-4);
}

#[test]
fn epsilon_terms_match_assembled_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = mixed(10, 14);
    let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
    let model = ModelData::uniform(10, axonal(1.0, 2.0, [1.0, -1.0]), 0.4);
    let pen = Penalty::new(&s, &model, 4.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let new = random_dofs(&s, &mut rng, 1.0);
    let old = random_dofs(&s, &mut rng, 1.0);
    let (eps, dt) = (1e-2, 0.05);
    let r1 = forms.residual(&new, &old, &step(0.5, dt, eps)).unwrap();
    let r0 = forms.residual(&new, &old, &step(0.5, dt, 0.0)).unwrap();
    let mut op = crate::forms::matrices_for_tests::mass(&s);
    op.extend(&forms.stiffness(), 1.0);
    op.extend(&forms.jump_penalty(), 1.0);
    let expect = op.matvec(&new);
    for i in 0..r1.len() {
        let d = r1[i] - r0[i];
        assert!((d - eps / dt * expect[i]).abs() < 1e-10 * (1.0 + d.abs()), "{i}");
    }
}

fn fd_check(theta: f64, eps: f64, p: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = mixed(10, seed);
    let s = DgSpace::new(m, Degrees::Uniform(p)).unwrap();
    let model = ModelData::uniform(10, axonal(0.5, 1.5, [1.0, 0.3]), 0.8)
        .with_forcing(|x, t| x[0] + t)
        .with_dirichlet(|x, t| 0.2 * x[1] - t);
    let pen = Penalty::new(&s, &model, 6.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let new = random_dofs(&s, &mut rng, 0.8);
    let old = random_dofs(&s, &mut rng, 0.8);
    let ts = step(theta, 0.05, eps);
    let eta_new = eta_table(&s, &pen, &new);
    let eta_old = eta_table(&s, &pen, &old);
    let jac = forms.jacobian_with_eta(&new, &old, &ts, &eta_new).unwrap().to_dense();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let scale = jac.abs().max();
    for j in 0..s.ndofs() {
        let mut a = new.clone();
        let mut b = new.clone();
        a[j] += h;
        b[j] -= h;
        let ra = forms.residual_with_eta(&a, &old, &ts, &eta_new, &eta_old).unwrap();
        let rb = forms.residual_with_eta(&b, &old, &ts, &eta_new, &eta_old).unwrap();
        for i in 0..s.ndofs() {
            let fd = (ra[i] - rb[i]) / (2.0 * h);
            worst = worst.max((fd - jac[(i, j)]).abs() / scale);
        }
    }
    worst
}

#[test]
fn jacobian_matches_finite_differences() {
    for p in [1, 2] {
        for theta in [0.5, 1.0] {
            for eps in [0.0, 1e-3] {
                let e = fd_check(theta, eps, p, 30 + p as u64);
                assert!(e < 1e-6, "p={p} theta={theta} eps={eps}: {e}");
            }
        }
    }
}

#[test]
fn jacobian_without_diffusion_is_weighted_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = voronoi(7, 15, BoundaryTag::Dirichlet);
    let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
    let model = ModelData::uniform(7, [[0.0; 2]; 2], 0.0);
    let pen = Penalty::new(&s, &model, 1.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let new = random_dofs(&s, &mut rng, 1.0);
    let dt = 0.2;
    let jac = forms.jacobian(&new, &new, &step(1.0, dt, 0.0)).unwrap().to_dense();
    let wm = crate::forms::matrices_for_tests::weighted(&s, |k, q| s.values_at_quadrature(&new, k)[q].exp() / dt).to_dense();
    assert!((jac - wm).abs().max() < 1e-12);
}

#[test]
fn jacobian_sparsity_follows_face_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let m = mixed(12, 16);
    let s = DgSpace::new(m.clone(), Degrees::Uniform(1)).unwrap();
    let model = ModelData::uniform(12, isotropic(1.0), 0.3);
    let pen = Penalty::new(&s, &model, 5.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    let new = random_dofs(&s, &mut rng, 1.0);
    let jac = forms.jacobian(&new, &new, &step(1.0, 0.1, 0.0)).unwrap();
    let elem_of = |i: usize| (0..s.num_elements()).find(|&k| s.range(k).contains(&i)).unwrap();
    let mut pattern = std::collections::HashSet::new();
    for &(i, j, _) in &jac.entries {
        let (a, b) = (elem_of(i), elem_of(j));
        let ok = a == b || m.elements[a].faces.iter().any(|&f| m.neighbor(a, f) == Some(b));
        assert!(ok);
        pattern.insert((a, b));
    }
    for &(a, b) in &pattern {
        assert!(pattern.contains(&(b, a)));
    }
}

#[test]
fn dg_norm_examples() {
    let m = Arc::new(generate_voronoi(9, Rect::unit(), 17, 10).unwrap());
    let s = DgSpace::new(m.clone(), Degrees::Uniform(1)).unwrap();
    let model = ModelData::uniform(9, isotropic(1.0), 0.0);
    let pen = Penalty::new(&s, &model, 1.0).unwrap();
    let forms = Forms::new(&s, &model, &pen);
    assert_eq!(forms.dg_norm(&vec![0.0; s.ndofs()]), 0.0);
    let one = s.project(|_| 1.0).unwrap();
    let expect: f64 = m.boundary_faces().map(|(f, face)| pen.zeta[f] * face.length).sum::<f64>().sqrt();
    assert!((forms.dg_norm(&one) - expect).abs() < 1e-12 * expect);
    let (grad, full) = forms.dg_norm_field(|_, _| (1.0, [0.0, 0.0]), 4);
    assert_eq!(grad, 0.0);
    assert!((full - expect).abs() < 1e-12 * expect);
}

#[test]
fn entropy_examples() {
    let m = voronoi(9, 18, BoundaryTag::Neumann);
    let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
    let zero = vec![0.0; s.ndofs()];
    assert!(super::norms::discrete_entropy(&s, &zero).abs() < 1e-15);
    let l2 = s.project(|_| 2f64.ln()).unwrap();
    let expect = 2.0 * (2f64.ln() - 1.0) + 1.0;
    assert!((super::norms::discrete_entropy(&s, &l2) - expect).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sd = |c: f64| c * (c.ln() - 1.0) + 1.0;
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.gen_range(1e-6..10.0), rng.gen_range(1e-6..10.0));
        assert!(sd(0.5 * (a + b)) <= 0.5 * (sd(a) + sd(b)) + 1e-14);
        assert!(entropy_density(a.ln()) >= -1e-15);
    }
}

#[test]
fn ci_on_unit_square_p1() {
    let m = Arc::new(
        build_poly_mesh(&RawMesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            polygons: vec![vec![0, 1, 2, 3]],
            labels: vec![0],
            boundary_tags: vec![],
            default_tag: Some(BoundaryTag::Dirichlet),
        })
        .unwrap(),
    );
    let s = DgSpace::new(m.clone(), Degrees::Uniform(1)).unwrap();
    // orthonormal basis 1, sqrt3(2x-1), sqrt3(2y-1): boundary mass diag(4, 8, 8)
    assert!((estimate_ci(&s) - 8.0 * 2f64.sqrt()).abs() < 1e-10);
    let mut prev = 0.0;
    for p in 1..=6 {
        let s = DgSpace::new(m.clone(), Degrees::Uniform(p)).unwrap();
        // Dense oracle: generalized eigenproblem through M^{-1} B.
        let k = 0;
        let mass = s.local_mass(k);
        let n = s.dim(k);
        let mut b = nalgebra::DMatrix::zeros(n, n);
        for &f in &m.elements[0].faces {
            let r = crate::dgspace::face_quadrature(&m.faces[f], 2 * p + 2);
            for (x, w) in r.points.iter().zip(&r.weights) {
                let (phi, _) = s.basis(0).values(*x);
                for i in 0..n {
                    for j in 0..n {
                        b[(i, j)] += w * phi[i] * phi[j];
                    }
                }
            }
        }
        let prod = mass.try_inverse().unwrap() * b;
        let lam = prod.complex_eigenvalues().iter().map(|z| z.re).fold(0.0, f64::max);
        let oracle = lam * 2f64.sqrt() / (p * p) as f64;
        let ci = estimate_ci(&s);
        assert!((ci - oracle).abs() < 1e-8 * oracle, "p={p}");
        let unscaled = ci * (p * p) as f64;
        assert!(unscaled >= prev - 1e-9);
        prev = unscaled;
    }
}
