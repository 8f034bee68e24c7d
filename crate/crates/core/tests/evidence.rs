mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use lufusion::evidence::*;
use proptest::prelude::*;

type Sets = BTreeMap<BTreeSet<String>, f64>;

/// Dempster's rule on explicit name sets.
fn dempster_sets(a: &MassFunction, b: &MassFunction) -> Sets {
    let mut out = Sets::new();
    let mut k = 0.0;
    for (x, mx) in as_sets(a) {
        for (y, my) in as_sets(b) {
            let z: BTreeSet<String> = x.intersection(&y).cloned().collect();
            if z.is_empty() {
                k += mx * my;
            } else {
                *out.entry(z).or_default() += mx * my;
            }
        }
    }
    out.values_mut().for_each(|v| *v /= 1.0 - k);
    out
}

fn sets_of(m: &MassFunction) -> Sets {
    as_sets(m).into_iter().collect()
}

fn close(a: &MassFunction, b: &MassFunction, tol: f64) -> bool {
    a.masses()
        .iter()
        .zip(b.masses())
        .all(|(x, y)| (x - y).abs() <= tol)
}

fn same_sets(a: &Sets, b: &Sets, tol: f64) -> bool {
    let keys: BTreeSet<_> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .all(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs() <= tol)
}

#[test]
fn classic_two_source_example() {
    let f = lu_frame();
    let m1 = MassFunction::from_focal(&f, &[(0b001, 0.6), (0b111, 0.4)]).unwrap();
    let m2 = MassFunction::from_focal(&f, &[(0b010, 0.5), (0b011, 0.3), (0b111, 0.2)]).unwrap();
    let (m, k) = combine_dempster(&m1, &m2).unwrap();
    assert!((k - 0.3).abs() < 1e-12);
    assert!((m.mass(0b001) - 0.3 / 0.7).abs() < 1e-12);
    assert!((m.mass(0b010) - 0.2 / 0.7).abs() < 1e-12);
    assert!((m.mass(0b011) - 0.12 / 0.7).abs() < 1e-12);
    assert!((m.mass(0b111) - 0.08 / 0.7).abs() < 1e-12);
    assert!(same_sets(&sets_of(&m), &dempster_sets(&m1, &m2), 1e-12));
}

#[test]
fn bba_from_probs_places_mass_on_singletons_and_complements() {
    let f = lu_frame();
    let m = bba_from_probs(&f, &[0.9, 0.2, 0.4]).unwrap();
    let third = 1.0 / 3.0;
    assert!((m.mass(0b001) - 0.9 * third).abs() < 1e-12);
    assert!((m.mass(0b110) - 0.1 * third).abs() < 1e-12);
    assert!((m.mass(0b010) - 0.2 * third).abs() < 1e-12);
    assert!((m.mass(0b101) - 0.8 * third).abs() < 1e-12);
    assert!((m.mass(0b100) - 0.4 * third).abs() < 1e-12);
    assert!((m.mass(0b011) - 0.6 * third).abs() < 1e-12);
    assert_eq!(m.mass(0b111), 0.0);
    assert!((m.total() - 1.0).abs() < 1e-12);
}

#[test]
fn total_conflict_names_the_sources() {
    let f = lu_frame();
    let a = MassFunction::certain(&f, 0);
    let b = MassFunction::vacuous(&f);
    let c = MassFunction::certain(&f, 2);
    match combine_all(&[a, b, c]) {
        Err(EvidenceError::TotalConflict { first, second }) => assert_eq!((first, second), (0, 2)),
        other => panic!("expected total conflict, got {other:?}"),
    }
}

#[test]
fn records_round_trip_through_csv() {
    let f = lu_frame();
    let m = random_mass(&mut rng(3), &f);
    let mut w = csv::Writer::from_writer(vec![]);
    for r in m.to_records() {
        w.serialize(r).unwrap();
    }
    let bytes = w.into_inner().unwrap();
    let back: Vec<FocalRecord> = csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(MassFunction::from_records(&back).unwrap(), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn combination_matches_set_oracle(s in any::<u64>()) {
        let f = lu_frame();
        let mut r = rng(s);
        let (a, b) = (random_mass(&mut r, &f), random_mass(&mut r, &f));
        let k = brute_conflict(&a, &b);
        prop_assert!((conflict(&a, &b).unwrap() - k).abs() < 1e-12);
        match combine_dempster(&a, &b) {
            Ok((m, kappa)) => {
                prop_assert!((kappa - k).abs() < 1e-12);
                prop_assert!(same_sets(&sets_of(&m), &dempster_sets(&a, &b), 1e-9));
                prop_assert!((m.total() - 1.0).abs() < 1e-9);
                prop_assert_eq!(m.mass(0), 0.0);
            }
            Err(e) => {
                prop_assert!(1.0 - k <= 1e-12, "{:?} with kappa {}", e, k);
            }
        }
    }

    #[test]
    fn combination_is_commutative(s in any::<u64>()) {
        let f = lu_frame();
        let mut r = rng(s);
        let (a, b) = (random_mass(&mut r, &f), random_mass(&mut r, &f));
        match (combine_dempster(&a, &b), combine_dempster(&b, &a)) {
            (Ok((x, kx)), Ok((y, ky))) => {
                prop_assert_eq!(x.masses(), y.masses());
                prop_assert_eq!(kx, ky);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one order failed"),
        }
    }

    #[test]
    fn combination_is_associative(s in any::<u64>()) {
        let f = lu_frame();
        let mut r = rng(s);
        let (a, b, c) = (random_mass(&mut r, &f), random_mass(&mut r, &f), random_mass(&mut r, &f));
        let left = combine_dempster(&a, &b).and_then(|(ab, _)| combine_dempster(&ab, &c));
        let right = combine_dempster(&b, &c).and_then(|(bc, _)| combine_dempster(&a, &bc));
        if let (Ok((x, _)), Ok((y, _))) = (left, right) {
            prop_assert!(close(&x, &y, 1e-9));
        }
    }

    #[test]
    fn vacuous_mass_is_neutral(s in any::<u64>()) {
        let f = lu_frame();
        let a = random_mass(&mut rng(s), &f);
        let (m, k) = combine_dempster(&a, &MassFunction::vacuous(&f)).unwrap();
        prop_assert_eq!(k, 0.0);
        prop_assert!(close(&m, &a, 1e-15));
    }

    #[test]
    fn pignistic_is_a_distribution(s in any::<u64>()) {
        let f = lu_frame();
        let a = random_mass(&mut rng(s), &f);
        let p = pignistic(&a);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let d = decide(&a);
        prop_assert!(p.iter().all(|&v| v <= d.probability + TIE_TOLERANCE));
    }

    #[test]
    fn bba_from_probs_conforms(p in proptest::collection::vec(0.0..=1.0f64, 3)) {
        let f = lu_frame();
        let m = bba_from_probs(&f, &p).unwrap();
        prop_assert!((m.total() - 1.0).abs() < 1e-12);
        for (i, &v) in p.iter().enumerate() {
            let single = 1u32 << i;
            prop_assert!((m.mass(single) - v / 3.0).abs() < 1e-12);
            prop_assert!((m.mass(0b111 ^ single) - (1.0 - v) / 3.0).abs() < 1e-12);
        }
        prop_assert!(m.focal_sets().all(|(mask, _)| mask.count_ones() == 1 || mask.count_ones() == 2));
    }

    #[test]
    fn fold_conflicts_match_pairwise_steps(s in any::<u64>(), n in 2usize..5) {
        let f = lu_frame();
        let mut r = rng(s);
        let ms: Vec<MassFunction> = (0..n).map(|_| random_mass(&mut r, &f)).collect();
        if let Ok(fused) = combine_all(&ms) {
            prop_assert_eq!(fused.step_conflicts.len(), n - 1);
            let mut acc = ms[0].clone();
            for (i, m) in ms[1..].iter().enumerate() {
                let (next, k) = combine_dempster(&acc, m).unwrap();
                prop_assert_eq!(k, fused.step_conflicts[i]);
                acc = next;
            }
            prop_assert_eq!(acc.masses(), fused.mass.masses());
        }
    }
}
