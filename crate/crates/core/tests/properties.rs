mod common;

use common::*;
use ksync::conflict::{
    buffer_state, conflict_graph, extended_closure, is_k_synchronizable_msc, is_prime_msc, Dep,
};
use ksync::exchange::{build_asr, cd_step};
use ksync::fsa::enumerate_language;
use ksync::prime::{alpha, alpha_with_map, full_pgraph, PGraph};
use ksync::{global_product, GlobalState, Guards, Msc, ProcessTable, SigmaWord};
use proptest::prelude::*;
use rand::Rng;

fn pqr() -> ProcessTable {
    ProcessTable::new(["p", "q", "r"].map(ksync::ProcessId::new))
}

fn word_from(seed: u64, len: usize) -> SigmaWord {
    let alphabet = full_alphabet(&["p", "q", "r"], &["a", "b"]);
    random_word(&mut rng(seed), &alphabet, len)
}

fn reaches(g: &PGraph, u: usize, v: usize) -> bool {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![u];
    while let Some(x) = stack.pop() {
        for &(a, b) in &g.edges {
            if a == x && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen[v]
}

/// The full P-graph of a random word with a few extra edges.
fn random_pgraph(seed: u64) -> PGraph {
    let mut r = rng(seed);
    let mut g = full_pgraph(&word_from(seed, 7), &pqr());
    if g.len() > 1 {
        for _ in 0..r.gen_range(0..3) {
            let u = r.gen_range(0..g.len());
            let v = r.gen_range(0..g.len());
            if u != v {
                g.edges.insert((u, v));
            }
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closure_is_a_fixpoint(seed in any::<u64>()) {
        let m = random_msc(&mut rng(seed), &["p", "q", "r"], &["a", "b"], 8);
        let g = conflict_graph(&m);
        let e = extended_closure(&g);
        prop_assert!(e.is_fixpoint());
        for (v, d, w) in g.edges() {
            prop_assert!(e.has_edge(v, d, w));
        }
    }

    #[test]
    fn exchanges_have_no_rs_edges(seed in any::<u64>()) {
        let m = Msc::of_word(&word_from(seed, 6));
        prop_assert!(m.is_exchange());
        prop_assert!(conflict_graph(&m).edges().iter().all(|e| e.1 != Dep::RS));
    }

    #[test]
    fn primality_matches_split_search(seed in any::<u64>()) {
        let m = Msc::of_word(&word_from(seed, 5));
        prop_assert_eq!(is_prime_msc(&m).unwrap(), split_prime(&m).unwrap());
    }

    #[test]
    fn k_sync_matches_chop_search(seed in any::<u64>(), k in 0usize..=4) {
        let m = random_msc(&mut rng(seed), &["p", "q", "r"], &["a"], 8);
        prop_assume!(m.messages().len() <= 4);
        prop_assert_eq!(is_k_synchronizable_msc(&m, k), chop_oracle(&m, k));
    }

    #[test]
    fn cd_step_is_monotone(seed in any::<u64>()) {
        let t = pqr();
        let u = word_from(seed, 4);
        let b0 = buffer_state(&Msc::of_word(&u), &t);
        let mut b = b0.clone();
        for s in word_from(seed ^ 0x9e37, 4).iter() {
            let next = cd_step(&b, s, &b0, &t);
            prop_assert!(b.is_subset(&next));
            prop_assert!(b.is_good() || !next.is_good());
            b = next;
        }
    }

    #[test]
    fn alpha_keeps_reachability(seed in any::<u64>()) {
        let g = random_pgraph(seed);
        let (a, map) = alpha_with_map(&g);
        for u in 0..g.len() {
            for v in 0..g.len() {
                if let (Some(x), Some(y)) = (map[u], map[v]) {
                    if x != y {
                        prop_assert_eq!(reaches(&g, u, v), a.edges.contains(&(x, y)), "{} {}", u, v);
                    }
                }
            }
        }
    }

    #[test]
    fn alpha_bounds_labels(seed in any::<u64>()) {
        let a = alpha(&random_pgraph(seed));
        for p in 0..3 {
            let s = a.ls.iter().filter(|&&m| m & 1 << p != 0).count();
            let r = a.lr.iter().filter(|&&m| m & 1 << p != 0).count();
            prop_assert!(s <= 1 && r <= 2);
        }
        prop_assert_eq!(alpha(&a), a);
    }
}

#[test]
fn asr_runs_sends_then_receives() {
    let sys = s1();
    let ga = global_product(&sys, 1000).unwrap();
    let sigma = sys.sigma();
    let l0 = GlobalState::initial(&sys);
    for fin in ga.states() {
        let mut union = Vec::new();
        for mid in ga.states() {
            let nfa = build_asr(&sys, &ga, &l0, mid, fin, Guards::default()).unwrap();
            union.extend(enumerate_language(&nfa, 4, 10_000).unwrap());
        }
        union.sort();
        union.dedup();
        let fin_id = ga.id_of(fin).unwrap();
        for w in all_words(&sigma, 4) {
            let sends: Vec<_> = w.iter().map(|s| s.send_action()).collect();
            let receives: Vec<_> = w.iter().filter_map(|s| s.receive_action()).collect();
            let reached = ga
                .run(0, &sends)
                .into_iter()
                .any(|mid| ga.run(mid, &receives).contains(&fin_id));
            assert_eq!(union.binary_search(&w).is_ok(), reached, "{w} to {}", fin.display(&sys));
        }
    }
}
