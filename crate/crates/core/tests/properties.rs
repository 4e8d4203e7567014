use cde_core::dv::{dv_solve, ExcessRule};
use cde_core::im::{solve, solve_with, AlphaStart, ClientRule, ExcessBlockRule, TieBreakConfig};
use cde_core::oracle::{
    brute_force_alpha, closure_crossing_violations, crossing_inequality, is_feasible,
    is_feasible_budget_form, partitions, queyranne_closure, ClosureTieBreak,
};
use cde_core::rlnc::{simulate, PrimeField};
use cde_core::sumrate::{local_recovery, lower_bound, two_partition_bound};
use cde_core::{random_instance, Coalition, EvalContext, Instance, RateVector, Rational};
use proptest::prelude::*;

fn instance(max_k: usize) -> impl Strategy<Value = Instance> {
    (3..=max_k, 4usize..=12, any::<u64>(), 0.3f64..0.7)
        .prop_map(|(k, l, seed, d)| random_instance(k, l, d, seed).unwrap())
}

fn configs() -> impl Strategy<Value = TieBreakConfig> {
    (
        prop_oneof![
            Just(ExcessBlockRule::HighestMinIndexWithSlack),
            Just(ExcessBlockRule::LowestIndex)
        ],
        prop_oneof![
            Just(ClientRule::LowestIndex),
            Just(ClientRule::LeastLoaded),
            Just(ClientRule::SeededRandom)
        ],
        any::<u64>(),
    )
        .prop_map(
            |(excess_block_rule, client_in_block_rule, seed)| TieBreakConfig {
                excess_block_rule,
                client_in_block_rule,
                seed,
                ..TieBreakConfig::lex()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn solver_matches_exhaustive_optimum(inst in instance(7), cfg in configs(), alpha0 in 0i64..4) {
        let mut ctx = EvalContext::new(0);
        let star = brute_force_alpha(&mut ctx, &inst).unwrap();
        let s = solve(&mut ctx, &inst, alpha0.min(star), &cfg).unwrap();
        prop_assert_eq!(s.alpha, star);
        prop_assert_eq!(s.rates.sum() as i64, star);
        let rep = is_feasible(&mut ctx, &inst, &s.rates).unwrap();
        prop_assert!(rep.feasible, "{:?}", rep.violated);
    }

    #[test]
    fn exact_start_still_reaches_optimum(inst in instance(6)) {
        let mut ctx = EvalContext::new(0);
        let star = brute_force_alpha(&mut ctx, &inst).unwrap();
        let s = solve_with(&mut ctx, &inst, 0, &TieBreakConfig::lex(), AlphaStart::Exact).unwrap();
        prop_assert_eq!(s.alpha, star);
        let mut expected = 0;
        for (from, to, _) in s.trace.raises() {
            prop_assert_eq!(from, expected.max(from));
            prop_assert_eq!(to, from + 1);
            prop_assert!(to <= star);
            expected = to;
        }
    }

    #[test]
    fn trace_is_consistent(inst in instance(7), cfg in configs()) {
        let mut ctx = EvalContext::new(0);
        let s = solve(&mut ctx, &inst, 0, &cfg).unwrap();
        prop_assert_eq!(s.trace.replay_rates(inst.num_clients()), s.rates.clone());
        prop_assert_eq!(s.trace.config, cfg);
        for (cand, alpha, _) in s.trace.merges() {
            prop_assert!(cand.x_value < 0);
            prop_assert!(alpha <= s.alpha);
        }
        let again = solve(&mut EvalContext::new(0), &inst, 0, &cfg).unwrap();
        prop_assert_eq!(again, s);
    }

    #[test]
    fn lower_bound_never_exceeds_optimum(inst in instance(7)) {
        let mut ctx = EvalContext::new(0);
        let star = brute_force_alpha(&mut ctx, &inst).unwrap();
        prop_assert!(lower_bound(&mut ctx, &inst) <= star);
        prop_assert!(two_partition_bound(&mut ctx, &inst).unwrap() <= star);
    }

    #[test]
    fn fractional_solver_agrees_with_enumeration(inst in instance(7)) {
        let mut ctx = EvalContext::new(0);
        let lr = local_recovery(&mut ctx, &inst, &inst.all_clients()).unwrap();
        for rule in [ExcessRule::LowestIndex, ExcessRule::SmallestBlock] {
            let r = dv_solve(&mut ctx, &inst, rule).unwrap();
            prop_assert_eq!(r.alpha_frac, lr.alpha_frac);
            prop_assert_eq!(r.rates.iter().sum::<Rational>(), r.alpha_frac);
            prop_assert_eq!(r.integral, r.rates.iter().all(|x| x.is_integer()));
            if r.integral {
                let ints = RateVector::from_vec(r.rates.iter().map(|x| x.to_integer() as u64).collect());
                prop_assert!(is_feasible(&mut ctx, &inst, &ints).unwrap().feasible);
            }
        }
    }

    #[test]
    fn cut_and_budget_forms_agree(inst in instance(7), raw in prop::collection::vec(0u64..5, 7)) {
        let rates = RateVector::from_vec(raw[..inst.num_clients()].to_vec());
        let mut ctx = EvalContext::new(0);
        let a = is_feasible(&mut ctx, &inst, &rates).unwrap();
        let b = is_feasible_budget_form(&mut ctx, &inst, &rates).unwrap();
        prop_assert_eq!(a.feasible, b.feasible);
        prop_assert_eq!(a.feasible, a.violated.is_none());
    }

    #[test]
    fn closure_costs_are_greedy_minima(inst in instance(7), start in 0usize..7) {
        let start = Coalition::singleton(start % inst.num_clients());
        let mut ctx = EvalContext::new(0);
        for tie in [ClosureTieBreak::LowestClient, ClosureTieBreak::HighestClient] {
            let steps = queyranne_closure(&mut ctx, &inst, &start, tie).unwrap();
            prop_assert_eq!(steps.len(), inst.num_clients() - 1);
            let mut m: Vec<usize> = start.members().to_vec();
            for step in steps {
                let hm = inst.union_set(&m);
                for u in (0..inst.num_clients()).filter(|u| !m.contains(u)) {
                    let cost = (hm.count() - hm.intersection_count(inst.has_set(u))) as i64;
                    prop_assert!(step.cost <= cost);
                }
                m.push(step.added);
            }
        }
    }

    /// Along a greedy closure, the crossing inequality holds when `S` is the
    /// whole previous prefix. That case follows from the greedy choice.
    #[test]
    fn crossing_inequality_holds_for_closure_prefixes(inst in instance(6), start in 0usize..6) {
        let start = Coalition::singleton(start % inst.num_clients());
        let mut ctx = EvalContext::new(0);
        let steps = queyranne_closure(&mut ctx, &inst, &start, ClosureTieBreak::LowestClient).unwrap();
        let mut prev: Vec<usize> = start.members().to_vec();
        for step in steps {
            let mut cur = prev.clone();
            cur.push(step.added);
            let m = Coalition::new(cur.iter().copied()).unwrap();
            let s = Coalition::new(prev.iter().copied()).unwrap();
            for j in (0..inst.num_clients()).filter(|j| !m.contains(*j)) {
                prop_assert!(crossing_inequality(&mut ctx, &inst, &m, j, &s).unwrap().is_none());
            }
            prev = cur;
        }
    }

    #[test]
    fn infeasible_cut_caps_rank(inst in instance(5), raw in prop::collection::vec(0u64..3, 5)) {
        let rates = RateVector::from_vec(raw[..inst.num_clients()].to_vec());
        let mut ctx = EvalContext::new(0);
        let rep = is_feasible(&mut ctx, &inst, &rates).unwrap();
        let sim = simulate(&inst, &rates, 65537, 4, 7).unwrap();
        if let Some(v) = rep.violated {
            prop_assert_eq!(sim.successes, 0);
            let outside: Vec<usize> = (0..inst.num_clients()).filter(|j| !v.coalition.contains(*j)).collect();
            let cap = inst.union_set(&outside).count() as i64 + v.actual;
            prop_assert!(cap < inst.num_packets() as i64);
            for trial in &sim.ranks {
                for &j in &outside {
                    prop_assert!(trial[j] as i64 <= cap);
                }
            }
        }
    }

    #[test]
    fn extra_transmissions_never_lower_rank(inst in instance(5), raw in prop::collection::vec(0u64..3, 5), who in 0usize..5) {
        let k = inst.num_clients();
        let base = RateVector::from_vec(raw[..k].to_vec());
        let mut more = base.clone();
        more.add(who % k, 1);
        let a = simulate(&inst, &base, 257, 5, 3).unwrap();
        let b = simulate(&inst, &more, 257, 5, 3).unwrap();
        prop_assert!(b.successes >= a.successes);
        for (ra, rb) in a.ranks.iter().zip(&b.ranks) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!(y >= x);
            }
        }
    }

    #[test]
    fn field_inverses(a in 1u64..65537) {
        let f = PrimeField::new(65537).unwrap();
        prop_assert_eq!(f.mul(a, f.inv(a)), 1);
    }

    #[test]
    fn partitions_cover_ground_once(n in 1usize..7, lo in 1usize..7, span in 0usize..7) {
        let lo = lo.min(n);
        let hi = (lo + span).min(n);
        let g = Coalition::range(n);
        let all: Vec<_> = partitions(&g, lo, hi).unwrap().collect();
        let mut seen = std::collections::HashSet::new();
        for p in &all {
            prop_assert!(p.len() >= lo && p.len() <= hi);
            prop_assert!(seen.insert(p.to_string()));
            let total: usize = p.blocks().iter().map(Coalition::len).sum();
            prop_assert_eq!(total, n);
        }
    }
}

/// The crossing inequality with `S = M` loses `|H_M ∩ H_j|` on the right, so
/// it fails whenever `M` and `j` share a packet. Along a greedy closure
/// started from two clients it also fails for some strict prefixes `S`.
#[test]
fn crossing_inequality_fails_beyond_closure_prefixes() {
    let mut found_general = false;
    let mut found_sequence = false;
    for seed in 0..300 {
        let inst =
            random_instance(3 + seed as usize % 4, 4 + seed as usize % 9, 0.5, seed).unwrap();
        let mut ctx = EvalContext::new(0);
        let m = Coalition::new([0, 1]).unwrap();
        if crossing_inequality(&mut ctx, &inst, &m, 2, &m)
            .unwrap()
            .is_some()
        {
            found_general = true;
        }
        let k = inst.num_clients();
        for (a, b) in (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))) {
            let start = Coalition::new([a, b]).unwrap();
            let viol = closure_crossing_violations(&mut ctx, &inst, &start).unwrap();
            if viol.iter().any(|v| v.s.len() + 1 < v.m.len()) {
                found_sequence = true;
            }
        }
        if found_general && found_sequence {
            break;
        }
    }
    assert!(found_general);
    assert!(found_sequence);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_instances_validate(k in 2usize..12, l in 1usize..80, d in 0.05f64..0.95, seed in any::<u64>()) {
        let inst = random_instance(k, l, d, seed).unwrap();
        prop_assert_eq!(cde_core::validate(&inst.to_raw()), Ok(()));
        let mut ctx = EvalContext::new(0);
        prop_assert_eq!(ctx.union_size(&inst, &inst.all_clients()).unwrap(), l);
    }

    #[test]
    fn union_size_is_monotone(inst in instance(8), a in any::<u16>(), b in any::<u16>()) {
        let k = inst.num_clients();
        let mask = |m: u16| (0..k).filter(move |i| m >> i & 1 == 1);
        let small: Vec<usize> = mask(a & b).collect();
        let big: Vec<usize> = mask(a).collect();
        prop_assume!(!small.is_empty());
        let mut ctx = EvalContext::new(0);
        let s = ctx.union_size_of(&inst, &small).unwrap();
        let t = ctx.union_size_of(&inst, &big).unwrap();
        prop_assert!(s <= t);
        prop_assert_eq!(ctx.gamma(), 2);
    }

    #[test]
    fn gamma_count_is_deterministic(inst in instance(6)) {
        let run = || {
            let mut ctx = EvalContext::new(7);
            let s = solve(&mut ctx, &inst, 0, &TieBreakConfig::lex()).unwrap();
            (s.rates, ctx.gamma())
        };
        prop_assert_eq!(run(), run());
    }
}
