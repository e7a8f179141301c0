mod common;

use merw::matrix::{norm2, DenseMatrix};
use merw::multiparticle::*;
use merw::{dominant_eigenpair, EigenOptions, Error, GraphKind, WeightedGraph};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn segment_with_loops(n: usize) -> WeightedGraph {
    let mut e = vec![];
    for i in 0..n {
        e.push((i, i, 1.0));
        if i + 1 < n {
            e.push((i, i + 1, 1.0));
        }
    }
    WeightedGraph::undirected(n, GraphKind::Simple, &e).unwrap()
}

fn ring(n: usize) -> WeightedGraph {
    let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    WeightedGraph::undirected(n, GraphKind::Simple, &e).unwrap()
}

fn repulsion(n: usize, c: f64) -> PairPotentials {
    PairPotentials {
        node: None,
        pair: Some(DenseMatrix::from_fn(n, n, |a, b| c / (1.0 + (a as f64 - b as f64).abs()))),
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let s = norm2(v);
    v.iter().map(|x| x / s).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn one_particle_is_the_boltzmann_base() {
    let g = common::random_digraph(4, 7, 10, GraphKind::Weighted);
    let v: Vec<f64> = (0..7).map(|i| 0.3 * i as f64 - 1.0).collect();
    let pot = PairPotentials { node: Some(v.clone()), pair: None };
    for rule in [HopRule::Product, HopRule::SingleHop] {
        let cg = build_distinguishable(&g, 1, &pot, 0.7, rule).unwrap();
        assert_eq!(cg.len(), 7);
        for i in 0..7 {
            for j in 0..7 {
                let want = g.weight(i, j) * (-0.7 * (v[i] + v[j]) / 2.0).exp();
                assert!((cg.graph.weight(i, j) - want).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn noninteracting_product_factorizes() {
    let g = common::random_symmetric(9, 5, 4, GraphKind::Weighted);
    let e = dominant_eigenpair(&g, &EigenOptions::default()).unwrap();
    let cg = build_distinguishable(&g, 2, &PairPotentials::default(), 1.0, HopRule::Product).unwrap();
    let joint = dominant_eigenpair(&cg.graph, &EigenOptions::default()).unwrap();
    assert!((joint.lambda - e.lambda * e.lambda).abs() < 1e-10 * joint.lambda);
    let outer: Vec<f64> = cg.configs.iter().map(|c| e.psi[c[0]] * e.psi[c[1]]).collect();
    assert!(max_diff(&unit(&joint.psi), &unit(&outer)) < 1e-10);

    let pi = stationary_density(&cg).unwrap();
    let single: Vec<f64> = {
        let s = e.stationary();
        let t: f64 = s.iter().sum();
        s.iter().map(|x| x / t).collect()
    };
    for (c, p) in cg.configs.iter().zip(&pi) {
        assert!((p - single[c[0]] * single[c[1]]).abs() < 1e-10);
    }
}

#[test]
fn noninteracting_single_hop_is_a_kronecker_sum() {
    let g = ring(5);
    let cg = build_distinguishable(&g, 2, &PairPotentials::default(), 1.0, HopRule::SingleHop).unwrap();
    let joint = dominant_eigenpair(&cg.graph, &EigenOptions::default()).unwrap();
    assert!((joint.lambda - 4.0).abs() < 1e-10);
    let cg3 = build_distinguishable(&segment_with_loops(4), 3, &PairPotentials::default(), 1.0, HopRule::SingleHop).unwrap();
    let l1 = dominant_eigenpair(&segment_with_loops(4), &EigenOptions::default()).unwrap().lambda;
    let l3 = dominant_eigenpair(&cg3.graph, &EigenOptions::default()).unwrap().lambda;
    // Self-loops of the three particles merge into one diagonal entry.
    assert!((l3 - 3.0 * l1).abs() < 1e-10);
}

#[test]
fn repulsion_anticorrelates_on_segment() {
    let n = 12;
    let base = segment_with_loops(n);
    for rule in [HopRule::Product, HopRule::SingleHop] {
        let cg = build_distinguishable(&base, 2, &repulsion(n, 3.0), 1.0, rule).unwrap();
        let pi = stationary_density(&cg).unwrap();
        let (mut e1, mut e2, mut e12) = (0.0, 0.0, 0.0);
        for (c, p) in cg.configs.iter().zip(&pi) {
            e1 += p * c[0] as f64;
            e2 += p * c[1] as f64;
            e12 += p * (c[0] * c[1]) as f64;
        }
        assert!(e12 - e1 * e2 < 0.0, "{rule:?}");
        // Marginal peaks away from the centre, like a first excited state.
        let m = cg.marginal(&pi, 0);
        assert!(m[n / 2] < m[2] && m[n / 2] < m[n - 3], "{rule:?}");
        // Ψ(x, y) = Ψ(y, x).
        let psi = dominant_eigenpair(&cg.graph, &EigenOptions::default()).unwrap().psi;
        for (i, c) in cg.configs.iter().enumerate() {
            let j = cg.index_of(&[c[1], c[0]]).unwrap();
            assert!((psi[i] - psi[j]).abs() < 1e-10 * psi[i]);
        }
    }
}

#[test]
fn reduction_counts_and_doubles() {
    let k2 = WeightedGraph::new(2, GraphKind::Simple, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
    let cg = build_distinguishable(&k2, 2, &PairPotentials::default(), 1.0, HopRule::Product).unwrap();
    assert_eq!(cg.len(), 4);
    let r = reduce_indistinguishable(&cg).unwrap();
    assert_eq!(r.len(), 3);
    let a = r.index_of(&[0, 0]).unwrap();
    let b = r.index_of(&[0, 1]).unwrap();
    assert_eq!(r.graph.weight(a, b), 2.0);
    assert_eq!(r.graph.weight(a, a), 1.0);
    assert_eq!(r.multiplicity(b), 2);
    assert_eq!(r.multiplicity(a), 1);

    let k3 = common::complete_graph(3);
    let cg3 = build_distinguishable(&k3, 3, &PairPotentials::default(), 1.0, HopRule::SingleHop).unwrap();
    assert_eq!(cg3.len(), 27);
    assert_eq!(reduce_indistinguishable(&cg3).unwrap().len(), 10);
}

#[test]
fn reduction_preserves_marginals() {
    let n = 10;
    let base = segment_with_loops(n);
    for rule in [HopRule::Product, HopRule::SingleHop] {
        let cg = build_distinguishable(&base, 2, &repulsion(n, 2.0), 1.0, rule).unwrap();
        let pi = stationary_density(&cg).unwrap();
        let r = reduce_indistinguishable(&cg).unwrap();
        let pr = stationary_density(&r).unwrap();
        assert!(max_diff(&cg.marginal(&pi, 0), &r.marginal(&pr, 0)) < 1e-12);
        assert!(max_diff(&pi, &r.unfold_density(&pr).unwrap()) < 1e-12);
    }
    let pot = PairPotentials { node: Some(vec![0.0, 0.4, -0.2, 0.1, 0.3]), ..repulsion(5, 1.0) };
    let cg = build_distinguishable(&ring(5), 3, &pot, 1.0, HopRule::SingleHop).unwrap();
    let pi = stationary_density(&cg).unwrap();
    let r = reduce_indistinguishable(&cg).unwrap();
    assert_eq!(r.len(), 35);
    let pr = stationary_density(&r).unwrap();
    assert!(max_diff(&cg.marginal(&pi, 2), &r.marginal(&pr, 0)) < 1e-12);
}

#[test]
fn reduction_rejects_asymmetric_weights() {
    let base = ring(3);
    let cg = build_distinguishable(&base, 2, &PairPotentials::default(), 1.0, HopRule::SingleHop).unwrap();
    let mut e = cg.graph.edges();
    // Only particle 0 may hop from (0, 0) to (1, 0).
    e.retain(|&(i, j, _)| !(cg.configs[i] == [0, 0] && cg.configs[j] == [0, 1]));
    let broken = ConfigGraph::from_tuples(WeightedGraph::new(9, GraphKind::Weighted, &e).unwrap(), 3, 2).unwrap();
    assert_eq!(reduce_indistinguishable(&broken).unwrap_err(), Error::NotExchangeSymmetric);
}

#[test]
fn configuration_limit() {
    let big = ring(1500);
    let r = build_distinguishable(&big, 2, &PairPotentials::default(), 1.0, HopRule::SingleHop);
    assert!(matches!(r, Err(Error::TooLarge { .. })));
    assert!(matches!(FockBasis::new(40, 3, &[10]), Err(Error::TooLarge { .. })));
    assert!(build_distinguishable(&ring(3), 0, &PairPotentials::default(), 1.0, HopRule::Product).is_err());
}

#[test]
fn ladder_algebra() {
    let l = ladder_ops(5).unwrap();
    assert_eq!(l.a.get(0, 1), 1.0);
    assert_eq!(l.a_dagger.get(2, 1), 2f64.sqrt());
    let c = l.commutator();
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j { 1.0 } else { 0.0 };
            if i < 5 {
                assert!((c.get(i, j) - want).abs() < 1e-14);
            }
        }
    }
    assert!((c.get(5, 5) + 5.0).abs() < 1e-14);
    let num = l.number();
    for i in 0..6 {
        assert!((num.get(i, i) - i as f64).abs() < 1e-14);
    }
    assert!(ladder_ops(0).is_err());
}

#[test]
fn fock_sector_sizes() {
    // Unbounded bosons: C(N+L−1, N). Fermions: C(L, N).
    let b = FockBasis::new(5, 3, &[3]).unwrap();
    assert_eq!(b.len(), 35);
    let f = FockBasis::new(6, 1, &[0, 1, 2, 3]).unwrap();
    assert_eq!(f.len(), 1 + 6 + 15 + 20);
    let capped = FockBasis::new(3, 2, &[4]).unwrap();
    assert_eq!(capped.len(), 6);
    assert!(FockBasis::new(3, 1, &[4]).is_err());
}

proptest! {
    #[test]
    fn fock_rank_is_a_colex_bijection(sites in 1usize..6, n_max in 1usize..4, top in 0usize..6) {
        let sectors: Vec<usize> = (0..=top.min(sites * n_max)).collect();
        let b = FockBasis::new(sites, n_max, &sectors).unwrap();
        let mut prev: Option<Vec<usize>> = None;
        for i in 0..b.len() {
            let occ = b.unrank(i);
            prop_assert_eq!(b.rank(&occ), Some(i));
            prop_assert!(occ.iter().all(|&k| k <= n_max));
            if let Some(p) = &prev {
                let (sp, so): (usize, usize) = (p.iter().sum(), occ.iter().sum());
                if sp == so {
                    let rp: Vec<_> = p.iter().rev().collect();
                    let ro: Vec<_> = occ.iter().rev().collect();
                    prop_assert!(rp < ro);
                } else {
                    prop_assert!(sp < so);
                }
            }
            prev = Some(occ);
        }
    }
}

#[test]
fn single_particle_sector_is_minus_t_m() {
    let g = common::random_digraph(31, 8, 12, GraphKind::Weighted);
    let spec = BoseHubbardSpec::new(0.7, 5.0, 3).unwrap();
    let bh = bose_hubbard(&g, &spec, &[1]).unwrap();
    assert_eq!(bh.basis.len(), 8);
    for c in 0..8 {
        let i = bh.basis.unrank(c).iter().position(|&k| k == 1).unwrap();
        for d in 0..8 {
            let j = bh.basis.unrank(d).iter().position(|&k| k == 1).unwrap();
            assert!((bh.hamiltonian.get(c, d) + 0.7 * g.weight(i, j)).abs() < 1e-12);
        }
    }
    let ground = bh.sector_ground(1).unwrap();
    let e = dominant_eigenpair(&g, &EigenOptions::default()).unwrap();
    let psi: Vec<f64> = (0..8).map(|c| e.psi[bh.basis.unrank(c).iter().position(|&k| k == 1).unwrap()]).collect();
    assert!(max_diff(&ground.vector, &unit(&psi)) < 1e-12);
    assert!((ground.energy + 0.7 * e.lambda).abs() < 1e-12);
}

#[test]
fn two_bosons_two_sites() {
    let k2 = WeightedGraph::undirected(2, GraphKind::Simple, &[(0, 1, 1.0)]).unwrap();
    let spec = BoseHubbardSpec::new(1.0, 0.0, 2).unwrap();
    let bh = bose_hubbard(&k2, &spec, &[2]).unwrap();
    let h = bh.hamiltonian.to_dense();
    let oracle = SymmetricEigen::new(DMatrix::from_fn(3, 3, |i, j| h.get(i, j)));
    let exact = oracle.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((exact + 2.0).abs() < 1e-12);
    let g = bh.sector_ground(2).unwrap();
    assert!((g.energy - exact).abs() < 1e-12);

    let strong = BoseHubbardSpec::new(1.0, 100.0, 2).unwrap();
    let bh = bose_hubbard(&k2, &strong, &[2]).unwrap();
    let g = bh.sector_ground(2).unwrap();
    let double: f64 = (0..3)
        .filter(|&c| bh.basis.unrank(c).contains(&2))
        .map(|c| g.vector[c - bh.basis.sector_range(2).unwrap().start].powi(2))
        .sum();
    assert!(double < 0.01, "{double}");
}

#[test]
fn sectors_decouple() {
    let mut spec = BoseHubbardSpec::new(1.0, 2.0, 3).unwrap();
    spec.potential = Some(vec![0.1, -0.3, 0.2, 0.0, 0.5]);
    spec.interaction = Some(DenseMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { 0.2 }));
    let bh = bose_hubbard(&ring(5), &spec, &[0, 1, 2, 3]).unwrap();
    let comm = bh.number_commutator();
    assert!(comm.values.iter().all(|&v| v == 0.0));
    let grounds = bh.ground_states().unwrap();
    assert_eq!(grounds.len(), 4);
    for g in &grounds {
        let range = bh.basis.sector_range(g.particles).unwrap();
        assert_eq!(g.vector.len(), range.len());
        // Against the dense oracle of the sector block.
        let h = bh.hamiltonian.to_dense();
        let block = DMatrix::from_fn(range.len(), range.len(), |i, j| h.get(range.start + i, range.start + j));
        let min = SymmetricEigen::new(block).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((g.energy - min).abs() < 1e-9, "N={}", g.particles);
    }
}

#[test]
fn merw_and_bose_hubbard_agree_to_first_order() {
    let ring6 = ring(6);
    let mut spec = BoseHubbardSpec::new(1.0, 0.0, 2).unwrap();
    assert!(merw_vs_bosehubbard_gap(&ring6, &spec, 2, 0.1).unwrap().gap < 1e-12);
    spec.potential = Some(vec![0.8; 6]);
    assert!(merw_vs_bosehubbard_gap(&ring6, &spec, 2, 0.1).unwrap().gap < 1e-12);
    spec.potential = Some((0..6).map(|i| (std::f64::consts::PI * i as f64 / 3.0).cos()).collect());
    let a = merw_vs_bosehubbard_gap(&ring6, &spec, 2, 0.1).unwrap();
    let b = merw_vs_bosehubbard_gap(&ring6, &spec, 2, 0.05).unwrap();
    let ratio = a.gap / b.gap;
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    assert!((a.epsilon_beta_v - 0.1).abs() < 1e-15);
}
