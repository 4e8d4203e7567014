//! Randomized cross-checks of the merging solver against brute force, plus
//! diagnostics on the structure of its merge sequence.

use std::fmt;

use cde_core::dv::{dv_solve, ExcessRule};
use cde_core::im::{solve, TieBreakConfig};
use cde_core::oracle::{
    brute_force_alpha, closure_inequality_violations, is_feasible, partition_minimality_check,
    ClosureViolation,
};
use cde_core::sumrate::local_recovery;
use cde_core::{random_instance, Coalition, EvalContext, Instance, Partition, Rational};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    /// Half-open seed range.
    pub seeds: (u64, u64),
    pub clients: (usize, usize),
    pub packets: (usize, usize),
    pub density: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seeds: (0, 200),
            clients: (3, 7),
            packets: (4, 12),
            density: 0.5,
        }
    }
}

/// The instance for one seed: `K` and `L` drawn uniformly from the
/// configured inclusive ranges, then has-sets drawn at `density`.
pub fn suite_instance(cfg: &SuiteConfig, seed: u64) -> CliResult<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(cfg.clients.0..=cfg.clients.1);
    let l = rng.gen_range(cfg.packets.0..=cfg.packets.1);
    Ok(random_instance(k, l, cfg.density, seed)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnionMismatch {
    pub coalition: Coalition,
    pub from_update: i64,
    pub exhaustive: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NonMinimal {
    pub partition: Partition,
    pub witness: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReport {
    pub seed: u64,
    pub num_clients: usize,
    pub num_packets: usize,
    pub alpha: i64,
    pub alpha_brute_force: i64,
    pub rates_sum: u64,
    pub feasible: bool,
    #[serde(serialize_with = "ser_ratio")]
    pub alpha_frac_dv: Rational,
    #[serde(serialize_with = "ser_ratio")]
    pub alpha_frac_enumerated: Rational,
    pub union_mismatches: Vec<UnionMismatch>,
    pub non_minimal: Vec<NonMinimal>,
    pub closure_violations: Vec<ClosureViolation>,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl InstanceReport {
    /// Solver optimum, strategy feasibility and sum.
    pub fn optimal(&self) -> bool {
        self.alpha == self.alpha_brute_force && self.feasible && self.rates_sum as i64 == self.alpha
    }

    pub fn fractional_agrees(&self) -> bool {
        self.alpha_frac_dv == self.alpha_frac_enumerated
    }
}

pub fn check_instance(seed: u64, inst: &Instance) -> CliResult<InstanceReport> {
    let mut ctx = EvalContext::new(seed);
    let sol = solve(&mut ctx, inst, 0, &TieBreakConfig::lex())?;
    let alpha_brute_force = brute_force_alpha(&mut ctx, inst)?;
    let feasible = is_feasible(&mut ctx, inst, &sol.rates)?.feasible;
    let dv = dv_solve(&mut ctx, inst, ExcessRule::LowestIndex)?;
    let enumerated = local_recovery(&mut ctx, inst, &inst.all_clients())?;

    let mut union_mismatches = Vec::new();
    for (update, final_call) in sol.trace.rate_updates() {
        if final_call {
            continue;
        }
        let merged = Coalition::union_of(&update.blocks);
        let exhaustive = local_recovery(&mut ctx, inst, &merged)?.alpha_star;
        if exhaustive != update.alpha_union {
            union_mismatches.push(UnionMismatch {
                coalition: merged,
                from_update: update.alpha_union,
                exhaustive,
            });
        }
    }

    let mut non_minimal = Vec::new();
    let mut closure_violations = Vec::new();
    for w in sol.trace.final_round_partitions(inst.num_clients()) {
        let m = partition_minimality_check(&mut ctx, inst, &w, sol.alpha)?;
        if !m.minimal {
            non_minimal.push(NonMinimal {
                partition: w.clone(),
                witness: m.witness,
            });
        }
        closure_violations.extend(closure_inequality_violations(&mut ctx, inst, &w)?);
    }

    Ok(InstanceReport {
        seed,
        num_clients: inst.num_clients(),
        num_packets: inst.num_packets(),
        alpha: sol.alpha,
        alpha_brute_force,
        rates_sum: sol.rates.sum(),
        feasible,
        alpha_frac_dv: dv.alpha_frac,
        alpha_frac_enumerated: enumerated.alpha_frac,
        union_mismatches,
        non_minimal,
        closure_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub instances: Vec<InstanceReport>,
}

impl SuiteReport {
    fn seeds_where(&self, bad: impl Fn(&InstanceReport) -> bool) -> Vec<u64> {
        self.instances
            .iter()
            .filter(|r| bad(r))
            .map(|r| r.seed)
            .collect()
    }

    pub fn suboptimal_seeds(&self) -> Vec<u64> {
        self.seeds_where(|r| !r.optimal())
    }

    pub fn fractional_mismatch_seeds(&self) -> Vec<u64> {
        self.seeds_where(|r| !r.fractional_agrees())
    }

    pub fn union_mismatch_seeds(&self) -> Vec<u64> {
        self.seeds_where(|r| !r.union_mismatches.is_empty())
    }

    pub fn non_minimal_seeds(&self) -> Vec<u64> {
        self.seeds_where(|r| !r.non_minimal.is_empty())
    }

    pub fn closure_violation_seeds(&self) -> Vec<u64> {
        self.seeds_where(|r| !r.closure_violations.is_empty())
    }

    /// The checks that must hold: optimality, fractional agreement and the
    /// closure inequality. The other two are reported only.
    pub fn hard_checks_pass(&self) -> bool {
        self.suboptimal_seeds().is_empty()
            && self.fractional_mismatch_seeds().is_empty()
            && self.closure_violation_seeds().is_empty()
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> CliResult<SuiteReport> {
    let mut instances = Vec::new();
    for seed in cfg.seeds.0..cfg.seeds.1 {
        let inst = suite_instance(cfg, seed)?;
        instances.push(check_instance(seed, &inst)?);
    }
    Ok(SuiteReport { instances })
}

fn line(
    f: &mut fmt::Formatter<'_>,
    name: &str,
    kind: &str,
    n: usize,
    seeds: &[u64],
) -> fmt::Result {
    let status = if seeds.is_empty() { "ok" } else { "FAIL" };
    write!(
        f,
        "{name:<28} {kind:<10} {status:<4} {}/{n} clean",
        n - seeds.len()
    )?;
    if !seeds.is_empty() {
        let shown = seeds.iter().take(12).join(",");
        let more = if seeds.len() > 12 { ",..." } else { "" };
        write!(f, " seeds={shown}{more}")?;
    }
    writeln!(f)
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.instances.len();
        line(
            f,
            "optimum_and_feasibility",
            "hard",
            n,
            &self.suboptimal_seeds(),
        )?;
        line(
            f,
            "fractional_optimum",
            "hard",
            n,
            &self.fractional_mismatch_seeds(),
        )?;
        line(
            f,
            "union_estimate_exact",
            "diagnostic",
            n,
            &self.union_mismatch_seeds(),
        )?;
        line(
            f,
            "partition_minimality",
            "diagnostic",
            n,
            &self.non_minimal_seeds(),
        )?;
        line(
            f,
            "closure_inequality",
            "hard",
            n,
            &self.closure_violation_seeds(),
        )?;
        for r in self
            .instances
            .iter()
            .filter(|r| !r.closure_violations.is_empty())
            .take(3)
        {
            let v = &r.closure_violations[0];
            writeln!(
                f,
                "  seed {}: block {} subset {} inside min {} > outside min {}",
                r.seed, v.block, v.subset, v.inside_min, v.outside_min
            )?;
        }
        Ok(())
    }
}
