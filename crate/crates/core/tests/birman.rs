use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use reslab_core::birman::{
    fredholm_det, fredholm_det_checked, mode_eigenvalues, mode_kernel, rank_one_update, DetOptions, ModeOperatorMatrix,
    NodeGrid, RadialPotential,
};
use reslab_core::resonance::{jost_function, PotentialSpec};
use reslab_core::specfun::harmonic_multiplicity;
use reslab_core::Error;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn chi(c: f64) -> RadialPotential {
    RadialPotential::ball(3, 1.0, c.into()).unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn mode_determinant_is_stable_under_refinement() {
    let lambda = Complex64::new(0.0, -2.0);
    for ell in [0, 3] {
        let v: Vec<Complex64> = [64, 128, 256, 512]
            .iter()
            .map(|&n| mode_kernel(&chi(1.0), ell, lambda, n).unwrap().log_det_even_power(1))
            .collect();
        // third-order convergence, so Richardson with factor 8
        let rich = |a: Complex64, b: Complex64| b + (b - a) / 7.0;
        let spread = (rich(v[0], v[1]) - rich(v[1], v[2])).norm().max((rich(v[1], v[2]) - rich(v[2], v[3])).norm());
        assert!(spread < 1e-8, "ℓ={ell}: {v:?}");
    }
}

#[test]
fn kernel_at_negative_imaginary_axis_is_real_symmetric() {
    for (s, ell) in [(1.0, 0), (5.0, 1), (5.0, 4), (12.0, 3)] {
        let m = mode_kernel(&chi(2.0), ell, Complex64::new(0.0, -s), 64).unwrap();
        assert!(m.is_real_symmetric());
        let e = &m.entries;
        let scale = e.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..m.size() {
            for j in 0..m.size() {
                assert!((e[(i, j)] - e[(j, i)]).norm() <= 1e-12 * scale);
            }
        }
        let spec = mode_eigenvalues(&m).unwrap();
        assert!(spec.mu.iter().all(|mu| mu.im == 0.0), "s={s} ℓ={ell}");
        assert!(spec.mu.windows(2).all(|w| w[0].norm() >= w[1].norm()));
    }
}

#[test]
fn zero_potential_gives_zero_operator() {
    let zero = chi(0.0);
    let m = mode_kernel(&zero, 2, Complex64::new(3.0, -1.0), 32).unwrap();
    assert!(m.entries.iter().all(|z| *z == Complex64::default()));
    let d = fredholm_det(&zero, Complex64::new(0.0, -5.0), 2, Some(32)).unwrap();
    assert_eq!(d.value().unwrap(), Complex64::new(1.0, 0.0));
}

#[test]
fn diagonal_matrix_eigenvalues() {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(0.5, 0.0),
        Complex64::new(3.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ]));
    let m = ModeOperatorMatrix::from_entries(0, Complex64::new(0.0, -1.0), d).unwrap();
    let mu: Vec<f64> = mode_eigenvalues(&m).unwrap().mu.iter().map(|z| z.re).collect();
    assert_eq!(mu.len(), 3);
    for (a, b) in mu.iter().zip([3.0, -1.0, 0.5]) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn factorised_determinant_matches_eigenvalues() {
    for (s, ell) in [(2.0, 0), (6.0, 1), (10.0, 3)] {
        let m = mode_kernel(&chi(1.0), ell, Complex64::new(0.0, -s), 96).unwrap();
        let from_lu = m.log_det_even_power(1);
        let from_mu = mode_eigenvalues(&m).unwrap().log_det_even_power(1);
        assert!(rel(from_lu, from_mu) < 1e-8, "s={s} ℓ={ell}: {from_lu} vs {from_mu}");
    }
}

#[test]
fn signed_power_factorisation_matches_dense_lu() {
    for lambda in [Complex64::new(1.5, -0.5), Complex64::new(-2.0, 1.0), Complex64::new(3.0, -1.5)] {
        for m_pow in [1, 2, 3] {
            let m = mode_kernel(&chi(5.0), 1, lambda, 48).unwrap();
            let dense = m.det_signed_power_direct(m_pow);
            let factored = m.log_det_signed_power(m_pow).exp();
            assert!(rel(factored, dense) < 1e-10, "λ={lambda} m={m_pow}: {factored} vs {dense}");
        }
    }
}

#[test]
fn nystrom_matches_jost_identity() {
    // det(I + B_ℓ²) = J_{ic} J_{−ic} per mode
    let c = 3.0;
    for lambda in [Complex64::new(0.0, -2.0), Complex64::new(2.0, -1.0), Complex64::new(1.0, 2.0)] {
        for ell in [0, 1, 4] {
            let m = mode_kernel(&chi(c), ell, lambda, 160).unwrap();
            let nys = m.log_det_even_power(1).exp();
            let spec = PotentialSpec::new(3, 1.0, I * c).unwrap();
            let jost = jost_function(&spec, ell, lambda).unwrap()
                * jost_function(&spec.with_coupling(-I * c), ell, lambda).unwrap();
            assert!(rel(nys, jost) < 1e-6, "λ={lambda} ℓ={ell}: {nys} vs {jost}");
        }
    }
}

#[test]
fn full_determinant_matches_jost_sum() {
    let s = 6.0;
    let lambda = Complex64::new(0.0, -s);
    let d = fredholm_det(&chi(1.0), lambda, 2, Some(128)).unwrap();
    let plus = PotentialSpec::new(3, 1.0, I).unwrap();
    let minus = plus.with_coupling(-I);
    // terms decay like ℓ^{−2}: partial sums to L and 2L, extrapolated in 1/L
    let (mut half, mut full) = (0.0, 0.0);
    for ell in 0..20_000u32 {
        let t = (jost_function(&plus, ell, lambda).unwrap() * jost_function(&minus, ell, lambda).unwrap()).ln();
        full += t.re * harmonic_multiplicity(3, ell) as f64;
        if ell < 10_000 {
            half = full;
        }
    }
    let oracle = 2.0 * full - half;
    assert!((d.log_det.re - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", d.log_det.re);
    assert!(d.log_det.im.abs() < 1e-8 * oracle);
}

#[test]
fn resolution_drift_is_small() {
    let (det, drift) = fredholm_det_checked(
        &chi(1.0),
        Complex64::new(0.0, -10.0),
        2,
        &DetOptions { n_nodes: Some(128), ..DetOptions::default() },
    )
    .unwrap();
    assert!(drift < 1e-5, "drift {drift}");
    assert!(det.log_det.re > 0.0);
    assert_eq!(det.n_nodes, 256);
}

#[test]
fn determinant_independent_of_pool_size() {
    let at = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| fredholm_det(&chi(1.0), Complex64::new(0.0, -9.0), 2, None).unwrap())
    };
    let one = at(1);
    for threads in [3, 8] {
        let other = at(threads);
        assert_eq!(other.ell_max, one.ell_max);
        assert_eq!(other.log_det, one.log_det);
    }
}

#[test]
fn top_eigenvalue_grows_exponentially() {
    // log μ_max(s) against s on a window: positive slope
    let pot = chi(1.0);
    let (x, y): (Vec<f64>, Vec<f64>) = [30.0, 34.0, 38.0, 42.0]
        .iter()
        .map(|&s| {
            let m = mode_kernel(&pot, 0, Complex64::new(0.0, -s), 256).unwrap();
            (s, mode_eigenvalues(&m).unwrap().mu[0].re.ln())
        })
        .unzip();
    let slope = reslab_core::growth::fit_line(&x, &y).0;
    assert!(slope > 1.0, "slope {slope}");
}

#[test]
fn precondition_and_configuration_errors() {
    let lambda = Complex64::new(0.0, -2.0);
    assert!(matches!(fredholm_det(&chi(1.0), lambda, 1, None), Err(Error::InvalidArgument(_))));
    let five = RadialPotential::ball(5, 1.0, 1.0.into()).unwrap();
    assert!(matches!(fredholm_det(&five, lambda, 2, None), Err(Error::Precondition(_))));
    assert!(fredholm_det(&five, lambda, 4, Some(32)).is_ok());
    assert!(matches!(fredholm_det(&chi(1.0), lambda, 2, Some(8)), Err(Error::Configuration(_))));
    assert!(NodeGrid::new(1.0, &[], 8).is_err());
}

#[test]
fn step_potential_grid_respects_breaks() {
    let pot = RadialPotential::steps(3, &[(1.0, 1.0.into()), (0.5, 2.0.into())]).unwrap();
    assert_eq!(pot.value(0.25), Complex64::new(3.0, 0.0));
    assert_eq!(pot.value(0.75), Complex64::new(1.0, 0.0));
    let grid = NodeGrid::for_potential(&pot, 64).unwrap();
    let total: f64 = grid.weights.iter().sum();
    assert!((total - 1.0).abs() < 1e-14);
    let inner: f64 = grid.nodes.iter().zip(&grid.weights).filter(|(r, _)| **r < 0.5).map(|(_, w)| w).sum();
    assert!((inner - 0.5).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rank_one_update_matches_dense(
        d in prop::collection::vec(-5.0f64..5.0, 2..12),
        z in prop::collection::vec(-2.0f64..2.0, 12),
        rho in -3.0f64..3.0,
    ) {
        let n = d.len();
        let z = &z[..n];
        let mut a = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += rho * z[i] * z[j];
            }
        }
        let mut dense: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(|x, y| x.total_cmp(y));
        let mut ours = rank_one_update(&d, z, rho);
        ours.sort_by(|x, y| x.total_cmp(y));
        let scale = dense.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (a, b) in ours.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{:?} vs {:?}", ours, dense);
        }
    }

    #[test]
    fn mode_determinant_is_monotone_in_coupling(c in 0.1f64..3.0, extra in 0.0f64..2.0, s in 1.0f64..8.0, ell in 0u32..6) {
        let lambda = Complex64::new(0.0, -s);
        let small = mode_kernel(&chi(c), ell, lambda, 48).unwrap().log_det_even_power(1).re;
        let big = mode_kernel(&chi(c + extra), ell, lambda, 48).unwrap().log_det_even_power(1).re;
        prop_assert!(big >= small * (1.0 - 1e-8));
    }
}
