//! Randomized invariants of the tensor toolbox and the canonical-form
//! machinery: properties that must hold for every input, exercised over
//! generated shapes, entries, and planted transformations.

use ndarray::prelude::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tncanon_core::examples::{random_injective_mps, random_injective_peps};
use tncanon_core::gauge::{canonicalize_obc, mps_gauge};
use tncanon_core::lattice::{equal_up_to_scalar, mps_state, MpsSpec, DEFAULT_AMP_CAP};
use tncanon_core::sample;
use tncanon_core::symmetry::certify_local;
use tncanon_core::tensor::{
    eye, inverse, kron, kron_factorize, matricize, nullspace, numeric_rank, scalar_match,
    tensor_norm, unmatricize, ComplexMatrix, Tolerance, C64,
};
use tncanon_core::Error;

fn complex_tensor_from(seed: u64, shape: &[usize]) -> ArrayD<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample::complex_tensor(&mut rng, shape)
}

fn shapes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 1..=4)
}

fn splits(rank: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), rank)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matricize_then_unmatricize_is_the_identity(
        shape in shapes(),
        mask_seed in splits(4),
        seed in 0u64..1 << 48,
    ) {
        let t = complex_tensor_from(seed, &shape);
        let rows: Vec<usize> = (0..shape.len()).filter(|&i| mask_seed[i]).collect();
        let cols: Vec<usize> = (0..shape.len()).filter(|&i| !mask_seed[i]).collect();
        let m = matricize(&t, &rows, &cols).unwrap();
        let back = unmatricize(&m, &rows, &cols, &shape).unwrap();
        let diff = &back - &t;
        prop_assert!(tensor_norm(&diff) < 1e-12 * (1.0 + tensor_norm(&t)));
    }

    #[test]
    fn rank_is_invariant_under_unitary_dressing(
        n in 2usize..=5,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let m = sample::complex_matrix(&mut rng, n, n);
        let u = sample::unitary(&mut rng, n);
        let v = sample::unitary(&mut rng, n);
        let dressed = u.dot(&m).dot(&v);
        prop_assert_eq!(
            numeric_rank(&m, &tol).unwrap(),
            numeric_rank(&dressed, &tol).unwrap()
        );
    }

    #[test]
    fn kernel_vectors_annihilate_their_matrix(
        rows in 1usize..=5,
        cols in 2usize..=5,
        rank in 0usize..=2,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let r = rank.min(rows.min(cols));
        // a matrix of known rank r
        let mut m = ComplexMatrix::zeros((rows, cols));
        for _ in 0..r {
            let a = sample::complex_matrix(&mut rng, rows, 1);
            let b = sample::complex_matrix(&mut rng, 1, cols);
            m = m + a.dot(&b);
        }
        let basis = nullspace(&m, &tol).unwrap();
        prop_assert_eq!(basis.len(), cols - r);
        let scale = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
        for v in basis {
            let res: f64 = m.dot(&v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-8 * scale);
        }
    }

    #[test]
    fn kronecker_products_factor_back(
        da in 2usize..=3,
        db in 2usize..=3,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let a = sample::complex_matrix(&mut rng, da, da);
        let b = sample::complex_matrix(&mut rng, db, db);
        let product = kron(&a, &b);
        let (factors, residual) =
            kron_factorize(&product, &[(da, da), (db, db)], &tol).unwrap();
        prop_assert!(residual < 1e-10);
        let rebuilt = kron(&factors[0], &factors[1]);
        let diff = &rebuilt - &product;
        let rel = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
            / product.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(rel < 1e-10);
    }
}

// Structural laws of the canonical-form machinery. Fewer cases per property:
// each one samples states, contracts them densely, and solves for gauges.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn planted_bond_gauge_is_recovered(
        n in 3usize..=5,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let a = random_injective_mps(&mut rng, 2, 2, n).unwrap();
        let x = sample::invertible(&mut rng, 2, 10.0);
        let xinv = inverse(&x).unwrap();
        // dress the bond: b = x^-1 a x presents the same ring state
        let site = a.site(0);
        let mut b_site = Array3::<C64>::zeros(site.raw_dim());
        for p in 0..2 {
            let slab = xinv.dot(&site.index_axis(Axis(0), p)).dot(&x);
            b_site.index_axis_mut(Axis(0), p).assign(&slab);
        }
        let b = MpsSpec::periodic_uniform(b_site, n).unwrap();
        let cert = mps_gauge(&a, &b, &tol).unwrap();
        prop_assert_eq!(cert.intertwiner_dim, 1);
        prop_assert!(cert.residual <= 1e-8);
        let r = cert.r().unwrap().clone().into_dyn();
        let (_, gap) = scalar_match(&r, &x.clone().into_dyn()).unwrap();
        prop_assert!(gap <= 1e-8);
    }

    #[test]
    fn doubling_an_injective_chain_squares_the_intertwiner(
        n in 3usize..=5,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let a = random_injective_mps(&mut rng, 2, 2, n).unwrap();
        let site = a.site(0);
        // two identical injective blocks on the bond
        let mut doubled = Array3::<C64>::zeros((2, 4, 4));
        for p in 0..2 {
            let slab = site.index_axis(Axis(0), p);
            for l in 0..2 {
                for r in 0..2 {
                    doubled[[p, l, r]] = slab[[l, r]];
                    doubled[[p, l + 2, r + 2]] = slab[[l, r]];
                }
            }
        }
        let spec = MpsSpec::periodic_uniform(doubled, n).unwrap();
        match mps_gauge(&spec, &spec, &tol) {
            Err(Error::NonUniqueGauge { dim }) => prop_assert_eq!(dim, 4),
            other => prop_assert!(false, "expected a dimension-4 intertwiner space, got {other:?}"),
        }
    }

    #[test]
    fn canonical_form_conditions_hold_on_random_open_chains(
        d in 2usize..=3,
        bond in 2usize..=3,
        n in 2usize..=4,
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let mut sites = Vec::with_capacity(n);
        for k in 0..n {
            let dl = if k == 0 { 1 } else { bond };
            let dr = if k + 1 == n { 1 } else { bond };
            let t: Array3<C64> = sample::complex_tensor(&mut rng, &[d, dl, dr])
                .into_dimensionality()
                .unwrap();
            sites.push(t);
        }
        let spec = MpsSpec::open(sites).unwrap();
        let canon = canonicalize_obc(&spec, &tol).unwrap();
        let cond = canon.verify_conditions();
        prop_assert!(cond.passes(1e-9), "conditions: {cond:?}");
        let before = mps_state(&spec, DEFAULT_AMP_CAP).unwrap();
        let after = mps_state(&canon.to_mps_spec().unwrap(), DEFAULT_AMP_CAP).unwrap();
        let (_, gap) = equal_up_to_scalar(&before, &after).unwrap();
        prop_assert!(gap <= 1e-9);
    }

    #[test]
    fn identity_action_certifies_trivially(
        seed in 0u64..1 << 48,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerance::default();
        let peps = random_injective_peps(&mut rng, 4, 2, 2, 2, 2).unwrap();
        let cert = certify_local(&peps, &eye(4), &tol).unwrap();
        prop_assert_eq!(cert.gauge.intertwiner_dim, 1);
        prop_assert!(cert.constraints_pass());
        prop_assert!(cert.gauge.residual <= 1e-8);
        // four sites, one phase each, total must be the identity's scalar
        let total = C64::new(0.0, 4.0 * cert.theta).exp();
        prop_assert!((total - C64::new(1.0, 0.0)).norm() <= 1e-6);
    }
}
