//! Brute-force ground truth.
//!
//! Nothing here calls the iterative merging solver. The optimum comes from
//! exhaustive partition enumeration in [`crate::sumrate`], and strategy
//! checks go straight to the `2^K - 2` cut conditions
//! `r_X >= L - |H_{C\X}|`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Coalition, EvalContext, Instance, Partition, RateVector};
use crate::partitions::RgsEnumerator;
use crate::sumrate;

pub use crate::partitions::{partitions, Partitions};

/// Client-count limits for the exhaustive checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    /// Partition enumeration (Bell-number growth).
    pub bell_max_clients: usize,
    /// Cut enumeration (`2^K` growth).
    pub cut_max_clients: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            bell_max_clients: 10,
            cut_max_clients: 20,
        }
    }
}

impl OracleLimits {
    fn check_bell(&self, inst: &Instance, what: &'static str) -> Result<()> {
        check_limit(inst.num_clients(), self.bell_max_clients, what)
    }

    fn check_cut(&self, inst: &Instance) -> Result<()> {
        check_limit(
            inst.num_clients(),
            self.cut_max_clients,
            "cut feasibility check (use the coding simulator for larger K)",
        )
    }
}

fn check_limit(k: usize, limit: usize, what: &'static str) -> Result<()> {
    if k > limit {
        return Err(Error::OverLimit {
            what,
            limit,
            num_clients: k,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutViolation {
    pub coalition: Coalition,
    pub required: i64,
    pub actual: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violated: Option<CutViolation>,
}

impl FeasibilityReport {
    fn ok() -> Self {
        FeasibilityReport {
            feasible: true,
            violated: None,
        }
    }

    fn fail(v: CutViolation) -> Self {
        FeasibilityReport {
            feasible: false,
            violated: Some(v),
        }
    }
}

fn members_of(mask: u64, k: usize) -> Vec<usize> {
    (0..k).filter(|&j| mask >> j & 1 == 1).collect()
}

pub fn is_feasible(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &RateVector,
) -> Result<FeasibilityReport> {
    is_feasible_with(ctx, inst, rates, &OracleLimits::default())
}

/// Checks `sum_{j in X} r_j >= L - |H_{C\X}|` for every nonempty proper
/// subset `X`, visiting subsets in increasing bitmask order. Reports the
/// first violation.
pub fn is_feasible_with(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &RateVector,
    limits: &OracleLimits,
) -> Result<FeasibilityReport> {
    rates.check_len(inst.num_clients())?;
    limits.check_cut(inst)?;
    let k = inst.num_clients();
    let l = inst.num_packets() as i64;
    let full = (1u64 << k) - 1;
    for mask in 1..full {
        let inside = members_of(mask, k);
        let outside = members_of(full & !mask, k);
        let actual: i64 = inside.iter().map(|&j| rates.get(j) as i64).sum();
        let required = l - ctx.union_size_of(inst, &outside)? as i64;
        if actual < required {
            return Ok(FeasibilityReport::fail(CutViolation {
                coalition: Coalition::new(inside)?,
                required,
                actual,
            }));
        }
    }
    Ok(FeasibilityReport::ok())
}

/// The same condition written as budgets: with `alpha = sum of rates`, every
/// nonempty proper `X` must satisfy `r_X <= alpha - (L - |H_X|)`. Reports a
/// violating `X` with `required` holding the budget cap.
pub fn is_feasible_budget_form(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &RateVector,
) -> Result<FeasibilityReport> {
    rates.check_len(inst.num_clients())?;
    OracleLimits::default().check_cut(inst)?;
    let k = inst.num_clients();
    let l = inst.num_packets() as i64;
    let alpha = rates.sum() as i64;
    let full = (1u64 << k) - 1;
    for mask in 1..full {
        let inside = members_of(mask, k);
        let actual: i64 = inside.iter().map(|&j| rates.get(j) as i64).sum();
        let cap = alpha - l + ctx.union_size_of(inst, &inside)? as i64;
        if actual > cap {
            return Ok(FeasibilityReport::fail(CutViolation {
                coalition: Coalition::new(inside)?,
                required: cap,
                actual,
            }));
        }
    }
    Ok(FeasibilityReport::ok())
}

/// Minimum integer sum-rate by exhaustive enumeration (`K <= 10`).
pub fn brute_force_alpha(ctx: &mut EvalContext, inst: &Instance) -> Result<i64> {
    OracleLimits::default().check_bell(inst, "partition enumeration")?;
    Ok(sumrate::local_recovery(ctx, inst, &inst.all_clients())?.alpha_star)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Optimality {
    pub optimal: bool,
    pub alpha_star: i64,
    pub feasibility: FeasibilityReport,
}

/// Optimal iff feasible and the sum equals the brute-force minimum.
pub fn verify_optimal(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &RateVector,
) -> Result<Optimality> {
    let alpha_star = brute_force_alpha(ctx, inst)?;
    let feasibility = is_feasible(ctx, inst, rates)?;
    Ok(Optimality {
        optimal: feasibility.feasible && rates.sum() as i64 == alpha_star,
        alpha_star,
        feasibility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClosureTieBreak {
    #[default]
    LowestClient,
    HighestClient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosureStep {
    pub added: usize,
    /// `|H_M| - |H_M ∩ H_u|` for the added client, before adding it.
    pub cost: i64,
}

/// `|H_M| - |H_M ∩ H_u|`, computed as `|H_{M ∪ u}| - |H_u|` so it goes
/// through the counter.
fn closure_cost(ctx: &mut EvalContext, inst: &Instance, m: &[usize], u: usize) -> Result<i64> {
    let mut with_u = m.to_vec();
    with_u.push(u);
    Ok(ctx.union_size_of(inst, &with_u)? as i64 - ctx.union_size_of(inst, &[u])? as i64)
}

/// Greedy growth from `start`: repeatedly add the outside client `u`
/// minimizing `v(M ∪ u) - v(u)` until every client is in.
pub fn queyranne_closure(
    ctx: &mut EvalContext,
    inst: &Instance,
    start: &Coalition,
    tie_break: ClosureTieBreak,
) -> Result<Vec<ClosureStep>> {
    start.check_clients(inst.num_clients())?;
    if start.len() >= inst.num_clients() {
        return Err(Error::InvalidParameter(format!(
            "closure start {start} must be a proper subset of the clients"
        )));
    }
    let mut m: Vec<usize> = start.members().to_vec();
    let mut steps = Vec::new();
    while m.len() < inst.num_clients() {
        let mut best: Option<(i64, usize)> = None;
        for u in (0..inst.num_clients()).filter(|u| !m.contains(u)) {
            let cost = closure_cost(ctx, inst, &m, u)?;
            let better = match (best, tie_break) {
                (None, _) => true,
                (Some((c, _)), ClosureTieBreak::LowestClient) => cost < c,
                (Some((c, _)), ClosureTieBreak::HighestClient) => cost <= c,
            };
            if better {
                best = Some((cost, u));
            }
        }
        let (cost, added) = best.expect("an outside client exists");
        m.push(added);
        steps.push(ClosureStep { added, cost });
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Minimality {
    pub minimal: bool,
    /// The best strictly cheaper partition with the same block count.
    pub witness: Option<Partition>,
}

/// Does `w` minimize `sum_{X in w} v(X)` among partitions of all clients with
/// the same number of blocks? At fixed block count the `alpha` terms cancel,
/// so `alpha` only enters through the reported values.
pub fn partition_minimality_check(
    ctx: &mut EvalContext,
    inst: &Instance,
    w: &Partition,
    alpha: i64,
) -> Result<Minimality> {
    OracleLimits::default().check_bell(inst, "partition minimality check")?;
    let all = inst.all_clients();
    if w.ground() != &all {
        return Err(Error::InvalidPartition(format!(
            "{w} does not cover all {} clients",
            inst.num_clients()
        )));
    }
    let l = inst.num_packets() as i64;
    let value = |ctx: &mut EvalContext, blocks: &[Coalition]| -> Result<i64> {
        let mut s = 0;
        for b in blocks {
            s += alpha - l + ctx.union_size(inst, b)? as i64;
        }
        Ok(s)
    };
    let own = value(ctx, w.blocks())?;
    let mut best: Option<(i64, Partition)> = None;
    for p in partitions(&all, w.len(), w.len())? {
        let v = value(ctx, p.blocks())?;
        if v < own && best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, p));
        }
    }
    Ok(Minimality {
        minimal: best.is_none(),
        witness: best.map(|(_, p)| p),
    })
}

/// A block `X`, a nonempty proper subset `S` of it, and the two sides of
/// `min_{u in X\S} cost_S(u) <= min_{u' outside X} cost_S(u')` that failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosureViolation {
    pub block: Coalition,
    pub subset: Coalition,
    pub inside_min: i64,
    pub outside_min: i64,
}

/// For every non-singleton block `X` of `w` and every `∅ ≠ S ⊂ X`, greedy
/// growth from `S` should prefer a client of `X` at least weakly:
/// `min_{u ∈ X\S} cost_S(u) <= min_{u' ∉ X} cost_S(u')`, where
/// `cost_S(u) = |H_S| - |H_S ∩ H_u|`. Returns every failure.
pub fn closure_inequality_violations(
    ctx: &mut EvalContext,
    inst: &Instance,
    w: &Partition,
) -> Result<Vec<ClosureViolation>> {
    const MAX_BLOCK: usize = 20;
    let k = inst.num_clients();
    let mut out = Vec::new();
    for block in w.blocks().iter().filter(|b| b.len() >= 2) {
        check_limit(block.len(), MAX_BLOCK, "closure inequality block size")?;
        block.check_clients(k)?;
        let outside: Vec<usize> = (0..k).filter(|u| !block.contains(*u)).collect();
        if outside.is_empty() {
            continue;
        }
        let members = block.members();
        let full = (1u64 << members.len()) - 1;
        for mask in 1..full {
            let s: Vec<usize> = members_of(mask, members.len())
                .into_iter()
                .map(|i| members[i])
                .collect();
            let rest: Vec<usize> = members.iter().copied().filter(|u| !s.contains(u)).collect();
            let mut inside_min = i64::MAX;
            for &u in &rest {
                inside_min = inside_min.min(closure_cost(ctx, inst, &s, u)?);
            }
            let mut outside_min = i64::MAX;
            for &u in &outside {
                outside_min = outside_min.min(closure_cost(ctx, inst, &s, u)?);
            }
            if inside_min > outside_min {
                out.push(ClosureViolation {
                    block: block.clone(),
                    subset: Coalition::new(s)?,
                    inside_min,
                    outside_min,
                });
            }
        }
    }
    Ok(out)
}

/// One failure of `v(M) + v(j) <= v(M\S) + v(S ∪ j)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossingViolation {
    pub m: Coalition,
    pub j: usize,
    pub s: Coalition,
    pub lhs: i64,
    pub rhs: i64,
}

/// Evaluates `v(M) + v(j) <= v(M\S) + v(S ∪ j)` for `∅ ≠ S ⊆ M`, `j ∉ M`.
/// The `alpha - L` offsets cancel (two terms per side), so only union sizes
/// matter; `M\S = ∅` contributes `|H_∅| = 0`.
pub fn crossing_inequality(
    ctx: &mut EvalContext,
    inst: &Instance,
    m: &Coalition,
    j: usize,
    s: &Coalition,
) -> Result<Option<CrossingViolation>> {
    if m.contains(j) || !s.is_subset(m) {
        return Err(Error::InvalidParameter(format!(
            "need S ⊆ M and j ∉ M (M={m}, S={s}, j={})",
            j + 1
        )));
    }
    let lhs = ctx.union_size(inst, m)? as i64 + ctx.union_size_of(inst, &[j])? as i64;
    let m_minus_s: Vec<usize> = m
        .members()
        .iter()
        .copied()
        .filter(|u| !s.contains(*u))
        .collect();
    let mut s_j = s.members().to_vec();
    s_j.push(j);
    let rhs = ctx.union_size_of(inst, &m_minus_s)? as i64 + ctx.union_size_of(inst, &s_j)? as i64;
    Ok((lhs > rhs).then(|| CrossingViolation {
        m: m.clone(),
        j,
        s: s.clone(),
        lhs,
        rhs,
    }))
}

/// Runs greedy closure from `start` and checks the crossing inequality at
/// every step `m >= 1` for `M = M^(m)`, every `j ∉ M^(m)` and every
/// `∅ ≠ S ⊆ M^(m-1)`.
pub fn closure_crossing_violations(
    ctx: &mut EvalContext,
    inst: &Instance,
    start: &Coalition,
) -> Result<Vec<CrossingViolation>> {
    check_limit(inst.num_clients(), 20, "crossing inequality sweep")?;
    let steps = queyranne_closure(ctx, inst, start, ClosureTieBreak::LowestClient)?;
    let mut prev: Vec<usize> = start.members().to_vec();
    let mut out = Vec::new();
    for step in steps {
        let mut cur = prev.clone();
        cur.push(step.added);
        let m = Coalition::new(cur.iter().copied())?;
        let full = (1u64 << prev.len()) - 1;
        for j in (0..inst.num_clients()).filter(|j| !m.contains(*j)) {
            for mask in 1..=full {
                let s = Coalition::new(members_of(mask, prev.len()).into_iter().map(|i| prev[i]))?;
                if let Some(v) = crossing_inequality(ctx, inst, &m, j, &s)? {
                    out.push(v);
                }
            }
        }
        prev = cur;
    }
    Ok(out)
}

/// All partitions of the clients with exactly `blocks` blocks, as label
/// strings. Used by tests that need raw enumeration without materializing.
pub fn count_partitions(num_clients: usize, blocks: usize) -> usize {
    let mut rgs = RgsEnumerator::new(num_clients);
    let mut n = 0;
    while rgs.advance().is_some() {
        if rgs.num_blocks() == blocks {
            n += 1;
        }
    }
    n
}
