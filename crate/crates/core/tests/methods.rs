//! Property checks of the voting methods against the literal reference
//! implementations on random profiles.

use ltm_core::elections::{CandidateSet, Profile, Ranking};
use ltm_core::reference;
use ltm_core::samplers::{ProbModel, RandomStream};
use ltm_core::{MethodId, UtilityProfile};

fn random_profile(model: ProbModel, n: usize, m: usize, stream: &mut RandomStream) -> Profile {
    let u: UtilityProfile<f64> = model.sampler(n, m).unwrap().sample(stream);
    u.induced_profile()
}

#[test]
fn fast_methods_match_reference() {
    let mut s = RandomStream::new(101);
    for m in 2..=5 {
        for n in [1, 2, 5, 6, 10, 11] {
            for _ in 0..60 {
                let p = random_profile(ProbModel::Uniform, n, m, &mut s);
                for method in MethodId::ALL {
                    assert_eq!(method.winners(&p), reference::winners(method, &p), "{method} on {p:?}");
                }
            }
        }
    }
}

#[test]
fn borda_scores_agree_with_margin_form() {
    let mut s = RandomStream::new(102);
    for _ in 0..200 {
        let p = random_profile(ProbModel::Uniform, 7, 5, &mut s);
        let scores = ltm_core::voting::borda_scores(&p);
        let mm = p.margin_matrix();
        for a in 0..5 {
            let via_margins: i32 = (0..5).filter(|&b| b != a).map(|b| (7 + mm.get(a, b)) / 2).sum();
            assert_eq!(scores[a] as i32, via_margins);
        }
    }
}

#[test]
fn winners_nonempty_condorcet_consistent_and_refined() {
    let mut s = RandomStream::new(103);
    for model in [ProbModel::Uniform, ProbModel::Spatial2D, ProbModel::mallows()] {
        for m in 3..=6 {
            for n in [5, 6, 20, 21] {
                for _ in 0..25 {
                    let p = random_profile(model, n, m, &mut s);
                    let cw = p.condorcet_winner();
                    for method in MethodId::ALL {
                        let w = method.winners(&p);
                        assert!(!w.is_empty() && w.is_subset(CandidateSet::full(m)));
                        if let (Some(c), true) = (cw, MethodId::CONDORCET.contains(&method)) {
                            assert_eq!(w, CandidateSet::singleton(c), "{method}");
                        }
                    }
                    assert!(MethodId::StableVoting.winners(&p).is_subset(MethodId::SplitCycle.winners(&p)));
                }
            }
        }
    }
}

#[test]
fn anonymity_and_neutrality() {
    let mut s = RandomStream::new(104);
    for _ in 0..150 {
        let m = 3 + s.below(4);
        let p = random_profile(ProbModel::Uniform, 6 + s.below(6), m, &mut s);
        let mut shuffled: Vec<Ranking> = p.ballots().to_vec();
        shuffled.reverse();
        shuffled.rotate_left(s.below(p.n()));
        let q = Profile::new(m, shuffled).unwrap();

        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, s.below(i + 1));
        }
        let relabeled = p.relabel(&perm);
        for method in MethodId::ALL {
            let w = method.winners(&p);
            assert_eq!(method.winners(&q), w, "{method} anonymity");
            let moved: CandidateSet = w.iter().map(|c| perm[c]).collect();
            assert_eq!(method.winners(&relabeled), moved, "{method} neutrality");
        }
    }
}

#[test]
fn unanimous_top_wins_everywhere() {
    let mut s = RandomStream::new(105);
    for m in 3..=6 {
        for _ in 0..50 {
            let p = random_profile(ProbModel::Uniform, 9, m, &mut s);
            // move candidate 0 to the top of every ballot
            let ballots = p
                .ballots()
                .iter()
                .map(|r| {
                    let mut order = vec![0];
                    order.extend(r.order().filter(|&c| c != 0));
                    Ranking::new(&order).unwrap()
                })
                .collect();
            let q = Profile::new(m, ballots).unwrap();
            for method in MethodId::ALL {
                assert_eq!(method.winners(&q), CandidateSet::singleton(0), "{method}");
            }
        }
    }
}
