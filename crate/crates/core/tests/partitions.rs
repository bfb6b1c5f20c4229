use std::collections::BTreeSet;

use mpcorr_core::partitions::*;
use mpcorr_core::testfn::TestFunction;

/// All set partitions of {0..m}, found by labelling every element with every
/// possible block and canonicalizing.
fn brute(m: usize) -> BTreeSet<Vec<Vec<usize>>> {
    let mut out = BTreeSet::new();
    let total = m.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); m];
        for i in 0..m {
            blocks[c % m].push(i);
            c /= m;
        }
        let mut blocks: Vec<Vec<usize>> = blocks.into_iter().filter(|b| !b.is_empty()).collect();
        blocks.sort();
        out.insert(blocks);
    }
    out
}

#[test]
fn counts_match_brute_force() {
    let bells = [1u64, 2, 5, 15, 52, 203];
    for m in 1..=6 {
        let all = enumerate(m).unwrap();
        assert_eq!(all.len() as u64, bells[m - 1]);
        assert_eq!(bell(m), bells[m - 1]);
        let mine: BTreeSet<Vec<Vec<usize>>> = all.iter().map(|p| p.blocks()).collect();
        assert_eq!(mine.len(), all.len(), "duplicates at m={m}");
        assert_eq!(mine, brute(m));
    }
    assert_eq!(bell(12), 4_213_597);
    assert!(enumerate(0).is_err());
    assert!(enumerate(13).is_err());
}

#[test]
fn nonisolating_counts() {
    let want = [0usize, 1, 1, 4, 11, 41];
    for m in 1..=6 {
        let got = enumerate(m).unwrap().iter().filter(|p| p.is_nonisolating()).count();
        let oracle = brute(m).iter().filter(|b| b.iter().all(|x| x.len() >= 2)).count();
        assert_eq!(got, oracle);
        assert_eq!(got, want[m - 1], "m={m}");
    }
}

#[test]
fn canonical_order() {
    for m in 1..=5 {
        for p in enumerate(m).unwrap() {
            let b = p.blocks();
            assert!(b.windows(2).all(|w| w[0][0] < w[1][0]));
            assert!(b.iter().all(|x| x.windows(2).all(|w| w[0] < w[1])));
            let flat: BTreeSet<usize> = b.iter().flatten().copied().collect();
            assert_eq!(flat, (0..m).collect());
        }
    }
    let e = enumerate(3).unwrap();
    assert_eq!(e[0].block_count(), 1);
    assert_eq!(e[4].block_count(), 3);
}

#[test]
fn example_partition() {
    let p = Partition::from_one_based(6, &[&[1, 3], &[4], &[2, 5, 6]]).unwrap();
    assert!(!p.is_nonisolating());
    assert_eq!(p.block_count(), 3);
    assert_eq!(p.to_string(), "{{1,3},{2,5,6},{4}}");
    assert!(p.chi_distinct(&[7, 9, 7, 4, 9, 9]));
    assert!(!p.chi_distinct(&[7, 9, 7, 9, 9, 9]));
    assert!(!p.chi_distinct(&[7, 9, 8, 4, 9, 9]));
    let whole = Partition::from_one_based(3, &[&[1, 2, 3]]).unwrap();
    assert!(whole.is_nonisolating());
}

#[test]
fn malformed_partitions_are_rejected() {
    assert!(Partition::from_one_based(3, &[&[1, 2]]).is_err());
    assert!(Partition::from_one_based(3, &[&[1, 2], &[2, 3]]).is_err());
    assert!(Partition::from_one_based(3, &[&[1, 2], &[], &[3]]).is_err());
    assert!(Partition::from_one_based(2, &[&[1, 3]]).is_err());
    assert!(Partition::from_blocks(2, &[vec![0], vec![1]]).is_ok());
}

#[test]
fn singletons_forbid_equal_values() {
    let p = Partition::from_one_based(2, &[&[1], &[2]]).unwrap();
    assert!(!p.chi_distinct(&[5, 5]));
    assert!(p.chi_distinct(&[5, 6]));
}

#[test]
fn exactly_one_partition_per_vector() {
    for m in 1..=4 {
        let all = enumerate(m).unwrap();
        let total = 3usize.pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let n: Vec<i64> = (0..m)
                .map(|_| {
                    let d = (c % 3) as i64 + 1;
                    c /= 3;
                    d
                })
                .collect();
            let hits = all.iter().filter(|p| p.chi_distinct(&n)).count();
            assert_eq!(hits, 1, "n={n:?}");
        }
    }
}

#[test]
fn adjusted_examples() {
    let p = Partition::from_one_based(2, &[&[1, 2]]).unwrap();
    assert!(p.chi_adjusted(&[3, -3], &[5, 5]).unwrap());
    assert!(!p.chi_adjusted(&[3, -3], &[5, 6]).unwrap());
    assert!(!p.chi_adjusted(&[3, -2], &[5, 5]).unwrap());
    let q = Partition::from_one_based(3, &[&[1, 2, 3]]).unwrap();
    assert!(q.chi_adjusted(&[1, 2, -3], &[7, 7, 7]).unwrap());
    assert!(q.chi_adjusted(&[0, 2, -2], &[7, 7, 7]).is_err());
    assert!(q.chi_adjusted(&[1, -1], &[7, 7]).is_err());
    let s = Partition::from_one_based(4, &[&[1, 3], &[2, 4]]).unwrap();
    assert!(s.chi_adjusted(&[2, 5, -2, -5], &[1, 9, 1, 9]).unwrap());
    assert!(!s.chi_adjusted(&[2, 5, -2, -5], &[1, 9, 9, 1]).unwrap());
    // a singleton block can never have zero sum
    let t = Partition::from_one_based(3, &[&[1, 2], &[3]]).unwrap();
    assert!(!t.chi_adjusted(&[1, -1, 4], &[0, 0, 0]).unwrap());
}

#[test]
fn targets() {
    let f = TestFunction::bspline(1.0).unwrap();
    let c = f.mean();
    let trivial = Partition::from_one_based(3, &[&[1], &[2], &[3]]).unwrap();
    assert!((trivial.target(&f) - c.powi(3)).abs() < 1e-15);

    for m in 1..=7 {
        let v = poissonian_target_with(m, |_| 1.0).unwrap();
        assert_eq!(v, bell(m) as f64);
    }

    let e2 = f.moment(2).unwrap();
    let e3 = f.moment(3).unwrap();
    let non: f64 = enumerate(3).unwrap().iter().filter(|p| p.is_nonisolating()).map(|p| p.target(&f)).sum();
    assert!((non - e3).abs() < 1e-15);
    let t3 = poissonian_target(&f, 3).unwrap();
    assert!((t3 - (c.powi(3) + 3.0 * c * e2 + e3)).abs() < 1e-14);
    let t2 = poissonian_target(&f, 2).unwrap();
    assert!((t2 - (c * c + e2)).abs() < 1e-15);
}

#[test]
fn distinct_power_sums_by_brute_force() {
    let v = [0.3, -1.2, 2.0, 0.7, 1.1];
    let p: Vec<f64> = (0..=8).map(|e| v.iter().map(|x: &f64| x.powi(e)).sum()).collect();
    for exps in [vec![1usize], vec![2, 1], vec![1, 1, 1], vec![3, 2, 1], vec![2, 2, 1, 1]] {
        let d = exps.len();
        let mut brute = 0.0;
        let mut idx = vec![0usize; d];
        loop {
            let distinct = (0..d).all(|i| (i + 1..d).all(|j| idx[i] != idx[j]));
            if distinct {
                brute += idx.iter().zip(&exps).map(|(&a, &e)| v[a].powi(e as i32)).product::<f64>();
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < v.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        let got = distinct_power_sum(&exps, &p);
        assert!((got - brute).abs() < 1e-10 * (1.0 + brute.abs()), "{exps:?}: {got} vs {brute}");
    }
}
