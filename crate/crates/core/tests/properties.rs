use std::collections::{HashMap, HashSet};

use mrcm_core::decomposition::{interface_dof_count, DomainDecomposition, InterfaceSpace};
use mrcm_core::grid::{
    export_spe10, import_spe10, read_field_dump, tangential_axes, write_field_dump, CellField, FaceFluxField,
    PermeabilityField, SaturationField, StructuredGrid,
};
use mrcm_core::metrics::{pressure_error, velocity_norm};
use mrcm_core::transport::{advance_saturation, cfl_timestep, FluidProps};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Decomposition tuple: subdomain counts, subdomain dims and an interface size dividing them.
fn tuple() -> impl Strategy<Value = ([usize; 3], [usize; 3], [usize; 3])> {
    (prop::array::uniform3(1usize..=4), prop::array::uniform3(1usize..=6), prop::array::uniform3(0usize..6)).prop_map(
        |(c, s, pick)| {
            let hb = [0, 1, 2].map(|a| {
                let d = divisors(s[a]);
                d[pick[a] % d.len()]
            });
            (c, s, hb)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn dof_count_matches_enumeration((c, s, hb) in tuple()) {
        let dims = [0, 1, 2].map(|a| c[a] * s[a]);
        // every fine face on an interior subdomain plane, keyed by its coarse cell
        let mut keys = HashSet::new();
        for a in 0..3 {
            let [t0, t1] = tangential_axes(a);
            for plane in 1..c[a] {
                for i in 0..dims[t0] {
                    for j in 0..dims[t1] {
                        keys.insert((a, plane, i / hb[t0], j / hb[t1]));
                    }
                }
            }
        }
        let g = StructuredGrid::new(dims, dims.map(|d| d as f64)).unwrap();
        let dd = DomainDecomposition::new(&g, c).unwrap();
        let space = InterfaceSpace::new(&dd, hb).unwrap();
        prop_assert_eq!(space.len(), keys.len());
        prop_assert_eq!(interface_dof_count(c, s, hb), keys.len());

        // the library groups faces exactly like the enumeration
        let mut seen: HashMap<(usize, usize, usize, usize), usize> = HashMap::new();
        let mut used = HashSet::new();
        for f in 0..dd.skeleton_face_count() {
            let (p, ijk) = dd.skeleton_face_location(f);
            let a = dd.patches()[p].axis;
            let [t0, t1] = tangential_axes(a);
            let key = (a, ijk[a] / s[a], ijk[t0] / hb[t0], ijk[t1] / hb[t1]);
            let b = space.basis_of_face(&dd, f);
            prop_assert_eq!(*seen.entry(key).or_insert(b), b);
            used.insert(b);
        }
        prop_assert_eq!(used.len(), keys.len());
    }

    #[test]
    fn norm_axioms(seed in any::<u64>(), scale in -5.0f64..5.0) {
        let g = StructuredGrid::new([4, 3, 2], [2.0, 1.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = PermeabilityField::isotropic(g, (0..24).map(|_| rng.gen_range(0.1..10.0)).collect()).unwrap();
        let mut random_u = || {
            let faces = [0, 1, 2].map(|a| (0..g.face_count(a)).map(|_| rng.gen_range(-1.0..1.0)).collect());
            FaceFluxField::from_axes(g, faces).unwrap()
        };
        let (u, v) = (random_u(), random_u());
        let sum = FaceFluxField::from_axes(g, [0, 1, 2].map(|a| {
            u.axis(a).iter().zip(v.axis(a)).map(|(x, y)| x + y).collect()
        })).unwrap();
        let (nu, nv, ns) = (velocity_norm(&u, &k).unwrap(), velocity_norm(&v, &k).unwrap(), velocity_norm(&sum, &k).unwrap());
        prop_assert!(ns <= nu + nv + 1e-12 * (nu + nv));
        let scaled = velocity_norm(&u.scaled(scale), &k).unwrap();
        prop_assert!((scaled - scale.abs() * nu).abs() <= 1e-12 * nu.max(1.0));

        let p = CellField::from_fn(g, |c| (c as f64).sin() + 2.0);
        prop_assert_eq!(pressure_error(&p, &p, false).unwrap(), 0.0);
        let shifted = CellField::from_fn(g, |c| p.get(c) + scale);
        prop_assert!(pressure_error(&shifted, &p, true).unwrap() < 1e-12);
    }

    #[test]
    fn saturation_stays_bounded(seed in any::<u64>(), mu_o in 0.2f64..10.0) {
        let g = StructuredGrid::new([5, 4, 3], [1.0, 2.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let faces = [0, 1, 2].map(|a| (0..g.face_count(a)).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let u = FaceFluxField::from_axes(g, faces).unwrap();
        let props = FluidProps::new(1.0, mu_o).unwrap();
        let f = CellField::zeros(g);
        let mut s = SaturationField::new(CellField::from_fn(g, |_| rng.gen_range(0.0..=1.0))).unwrap();
        for _ in 0..50 {
            let dt = cfl_timestep(&u, &s, &props, 0.9, 1.0);
            s = advance_saturation(&s, &u, &f, dt, &props, &[]).unwrap();
            prop_assert!(s.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn spe10_round_trip(seed in any::<u64>(), contrast in 1.0f64..1e6) {
        let dir = tempfile::tempdir().unwrap();
        let g = StructuredGrid::new([3, 4, 2], [3.0, 4.0, 2.0]).unwrap();
        let k = PermeabilityField::generate_channel_field(seed, g, contrast).unwrap();
        let path = dir.path().join("k.dat");
        export_spe10(&k, &path).unwrap();
        let back = import_spe10(&path, [3, 4, 2], None, [3.0, 4.0, 2.0]).unwrap();
        for a in 0..3 {
            prop_assert_eq!(back.component(a), k.component(a));
        }
    }

    #[test]
    fn field_dump_round_trip(values in prop::collection::vec(any::<f64>(), 12)) {
        let dir = tempfile::tempdir().unwrap();
        let g = StructuredGrid::new([2, 3, 2], [1.0; 3]).unwrap();
        let path = dir.path().join("f.mrcm");
        write_field_dump(&path, &CellField::new(g, values.clone()).unwrap()).unwrap();
        let (dims, back) = read_field_dump(&path).unwrap();
        prop_assert_eq!(dims, [2, 3, 2]);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&values));
    }
}
