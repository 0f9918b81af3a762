use feec::cohomology::{betti, euler_poincare, whitney_complex};
use feec::polyform::PolyForm;
use feec::rational::qi;
use feec::whitney::{cochain_to_form, duality_matrix, interpolate, Cochain};
use feec::{Simplex, SimplicialComplex, Q};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn host(d: usize) -> Simplex {
    Simplex::new((0..=d).map(|i| 2 * i + 1).collect()).unwrap()
}

fn form(d: usize, k: usize, seed: u64) -> PolyForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolyForm::random(host(d), k, 3, 4, &mut rng)
}

fn sign(p: usize) -> Q {
    if p.is_multiple_of(2) {
        Q::one()
    } else {
        -Q::one()
    }
}

fn random_complex(seed: u64) -> SimplicialComplex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..8);
    let cells: Vec<Vec<usize>> = (0..rng.random_range(1..7))
        .map(|_| {
            let size = rng.random_range(1..=4usize.min(n));
            let mut c: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let j = rng.random_range(i..n);
                c.swap(i, j);
            }
            c.truncate(size);
            c
        })
        .collect();
    SimplicialComplex::build_closure(&cells).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn d_squared_vanishes(d in 1usize..=4, k in 0usize..=4, seed in any::<u64>()) {
        prop_assume!(k <= d);
        prop_assert!(form(d, k, seed).d().d().is_zero());
    }

    #[test]
    fn leibniz_rule(d in 1usize..=3, k in 0usize..=3, l in 0usize..=3, seed in any::<u64>()) {
        prop_assume!(k + l < d);
        let (u, v) = (form(d, k, seed), form(d, l, seed ^ 0x5bd1));
        let left = u.wedge(&v).unwrap().d();
        let right = u.d().wedge(&v).unwrap().add(&u.wedge(&v.d()).unwrap().scale(&sign(k))).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn graded_commutativity(d in 1usize..=4, k in 0usize..=4, l in 0usize..=4, seed in any::<u64>()) {
        prop_assume!(k + l <= d);
        let (u, v) = (form(d, k, seed), form(d, l, seed.wrapping_add(7)));
        prop_assert_eq!(u.wedge(&v).unwrap(), v.wedge(&u).unwrap().scale(&sign(k * l)));
    }

    #[test]
    fn trace_commutes_with_d_and_wedge(d in 2usize..=4, f in 1usize..=3, k in 0usize..=2, seed in any::<u64>()) {
        prop_assume!(f < d && k <= f);
        let t = host(d);
        let face = Simplex::new(t.vertices()[d - f..].to_vec()).unwrap();
        let u = form(d, k, seed);
        prop_assert_eq!(u.d().trace_to_face(&face).unwrap(), u.trace_to_face(&face).unwrap().d());
        let v = form(d, f - k, seed ^ 0xabc);
        prop_assert_eq!(
            u.wedge(&v).unwrap().trace_to_face(&face).unwrap(),
            u.trace_to_face(&face).unwrap().wedge(&v.trace_to_face(&face).unwrap()).unwrap()
        );
    }

    #[test]
    fn trace_is_functorial(d in 2usize..=4, k in 0usize..=2, seed in any::<u64>()) {
        prop_assume!(k + 1 < d);
        let t = host(d);
        let mid = Simplex::new(t.vertices()[1..].to_vec()).unwrap();
        let low = Simplex::new(t.vertices()[2..].to_vec()).unwrap();
        let u = form(d, k, seed);
        prop_assert_eq!(u.trace_to_face(&mid).unwrap().trace_to_face(&low).unwrap(), u.trace_to_face(&low).unwrap());
    }

    #[test]
    fn homotopy_identities(d in 1usize..=4, k in 0usize..=4, b in 0usize..=4, seed in any::<u64>()) {
        prop_assume!(k <= d && b <= d);
        let base = host(d).vertices()[b];
        let u = form(d, k, seed);
        if k == 0 {
            let shifted = u.sub(&PolyForm::constant(host(d), u.value_at_vertex(b).unwrap())).unwrap();
            prop_assert_eq!(u.d().koszul(base).unwrap(), shifted);
        } else {
            let du = u.d();
            let a_du = if k < d { du.koszul(base).unwrap() } else { PolyForm::zero(host(d), k) };
            prop_assert_eq!(a_du.add(&u.koszul(base).unwrap().d()).unwrap(), u);
        }
    }

    #[test]
    fn coboundary_squares_to_zero(seed in any::<u64>()) {
        let k = random_complex(seed);
        for j in 0..k.dim().saturating_sub(1) {
            prop_assert!(k.coboundary(j + 1).matmul(&k.coboundary(j)).unwrap().is_zero());
        }
    }

    #[test]
    fn euler_poincare_holds(seed in any::<u64>()) {
        let k = random_complex(seed);
        let (chi, alternating) = euler_poincare(&whitney_complex(&k));
        prop_assert_eq!(chi, alternating);
        prop_assert_eq!(chi, k.euler_characteristic());
        prop_assert!(betti(&whitney_complex(&k))[0] >= 1);
    }

    #[test]
    fn whitney_duality_and_round_trip(seed in any::<u64>()) {
        let k = random_complex(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for deg in 0..=k.dim() {
            let n = k.count(deg);
            let dual = duality_matrix(&k, deg).unwrap();
            for r in 0..n {
                for c in 0..n {
                    prop_assert_eq!(dual.get(r, c), if r == c { Q::one() } else { Q::zero() });
                }
            }
            let values: Vec<Q> = (0..n).map(|_| qi(rng.random_range(-9..=9))).collect();
            let c = Cochain::exact(deg, values);
            prop_assert_eq!(interpolate(&cochain_to_form(&k, &c).unwrap(), &k, deg).unwrap(), c);
        }
    }
}
