//! Iterative merging solver.
//!
//! Starting from singleton coalitions, repeatedly merge the smallest group of
//! coalitions whose merged budget `v(Ỹ)` undercuts the sum of their own
//! budgets, assigning rates so each merged coalition can recover locally. If
//! the partition's total budget falls below the current estimate `alpha`,
//! raise `alpha` by one and start over.

use std::fmt;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Coalition, EvalContext, Instance, Partition, RateVector, Rational};
use crate::oracle;
use crate::sumrate::{ceil_rational, lower_bound, v_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateOrder {
    /// Among equal `x_value`, the lexicographically smallest block-index set.
    #[default]
    Lexicographic,
}

/// Which block absorbs the excess `delta_alpha` in a rate update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcessBlockRule {
    #[default]
    HighestMinIndexWithSlack,
    LowestIndex,
}

/// Which client of a block receives the block's rate increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClientRule {
    #[default]
    LowestIndex,
    /// Lowest current rate, ties to the lowest index.
    LeastLoaded,
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TieBreakConfig {
    pub candidate_order: CandidateOrder,
    pub excess_block_rule: ExcessBlockRule,
    pub client_in_block_rule: ClientRule,
    /// Largest subset size tried when looking for a merge. Benchmarking only.
    pub k_cap: Option<usize>,
    /// Seed for [`ClientRule::SeededRandom`].
    pub seed: u64,
}

impl Default for TieBreakConfig {
    fn default() -> Self {
        Self::lex()
    }
}

impl TieBreakConfig {
    pub fn lex() -> Self {
        TieBreakConfig {
            candidate_order: CandidateOrder::Lexicographic,
            excess_block_rule: ExcessBlockRule::HighestMinIndexWithSlack,
            client_in_block_rule: ClientRule::LowestIndex,
            k_cap: None,
            seed: 0,
        }
    }

    /// Spreads increments over the least-loaded client of each block, which
    /// reproduces the hand-worked strategies on the bundled fixtures.
    pub fn paper_trace() -> Self {
        TieBreakConfig {
            client_in_block_rule: ClientRule::LeastLoaded,
            ..Self::lex()
        }
    }
}

impl fmt::Display for TieBreakConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order = match self.candidate_order {
            CandidateOrder::Lexicographic => "lexicographic",
        };
        let excess = match self.excess_block_rule {
            ExcessBlockRule::HighestMinIndexWithSlack => "highest-min-index-with-slack",
            ExcessBlockRule::LowestIndex => "lowest-index",
        };
        let client = match self.client_in_block_rule {
            ClientRule::LowestIndex => "lowest-index",
            ClientRule::LeastLoaded => "least-loaded",
            ClientRule::SeededRandom => "seeded-random",
        };
        let cap = self.k_cap.map_or("none".to_string(), |k| k.to_string());
        write!(
            f,
            "candidate_order={order} excess_block={excess} client={client} k_cap={cap} seed={}",
            self.seed
        )
    }
}

/// How `solve` picks its starting estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaStart {
    /// `max(alpha0, lower_bound)`.
    #[default]
    RaiseToLowerBound,
    /// Exactly `alpha0`; the restart rule does all the raising.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergeCandidate {
    pub blocks: Vec<Coalition>,
    pub x_value: i64,
}

impl fmt::Display for MergeCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x={}", self.blocks.iter().join(","), self.x_value)
    }
}

fn one_based<S: Serializer>(client: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(*client as u64 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Increment {
    #[serde(serialize_with = "one_based")]
    pub client: usize,
    pub amount: u64,
}

impl fmt::Display for Increment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}+{}", self.client + 1, self.amount)
    }
}

/// Outcome of one rate update over a group of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RateUpdate {
    #[serde(skip)]
    pub rates: RateVector,
    pub blocks: Vec<Coalition>,
    /// `ceil(sum_X (|H_Ỹ| - |H_X|) / (|U| - 1))`.
    pub alpha_union: i64,
    pub delta_alpha: i64,
    /// Per-block target before the excess reduction.
    pub targets: Vec<i64>,
    /// Per-block rate sum before the update.
    pub accumulated: Vec<i64>,
    pub excess_block: Option<Coalition>,
    pub increments: Vec<Increment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    AlphaRaised {
        from: i64,
        to: i64,
        partition: Partition,
    },
    RatesUpdated {
        #[serde(flatten)]
        update: RateUpdate,
        final_call: bool,
    },
    Merged {
        candidate: MergeCandidate,
        alpha: i64,
        partition_after: Partition,
        gamma_spent: u64,
    },
    FinalReduction {
        reductions: Vec<Increment>,
    },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::AlphaRaised {
                from,
                to,
                partition,
            } => {
                write!(f, "alpha_raised {from}->{to} partition={partition}")
            }
            TraceEvent::RatesUpdated { update, final_call } => {
                let excess = update
                    .excess_block
                    .as_ref()
                    .map_or("none".to_string(), |b| b.to_string());
                write!(
                    f,
                    "rates_updated{} blocks={} alpha_union={} delta_alpha={} targets={:?} excess_block={} increments=[{}]",
                    if *final_call { "(final)" } else { "" },
                    update.blocks.iter().join(","),
                    update.alpha_union,
                    update.delta_alpha,
                    update.targets,
                    excess,
                    update.increments.iter().join(",")
                )
            }
            TraceEvent::Merged {
                candidate,
                alpha,
                partition_after,
                gamma_spent,
            } => write!(
                f,
                "merged {} x={} alpha={alpha} partition={partition_after} gamma={gamma_spent}",
                candidate.blocks.iter().join(","),
                candidate.x_value
            ),
            TraceEvent::FinalReduction { reductions } => {
                if reductions.is_empty() {
                    write!(f, "final_reduction none")
                } else {
                    let parts = reductions
                        .iter()
                        .map(|r| format!("r{}-{}", r.client + 1, r.amount));
                    write!(f, "final_reduction {}", parts.format(","))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveTrace {
    pub config: TieBreakConfig,
    pub lower_bound: i64,
    pub alpha0: i64,
    pub alpha_start: i64,
    pub events: Vec<TraceEvent>,
}

impl SolveTrace {
    /// Rebuilds the output rates from the recorded increments alone.
    pub fn replay_rates(&self, num_clients: usize) -> RateVector {
        let mut r = RateVector::zeros(num_clients);
        for e in &self.events {
            match e {
                TraceEvent::AlphaRaised { .. } => r = RateVector::zeros(num_clients),
                TraceEvent::RatesUpdated { update, .. } => {
                    for inc in &update.increments {
                        r.add(inc.client, inc.amount);
                    }
                }
                TraceEvent::FinalReduction { reductions } => {
                    for red in reductions {
                        r.subtract(red.client, red.amount);
                    }
                }
                TraceEvent::Merged { .. } => {}
            }
        }
        r
    }

    pub fn merges(&self) -> impl Iterator<Item = (&MergeCandidate, i64, &Partition)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Merged {
                candidate,
                alpha,
                partition_after,
                ..
            } => Some((candidate, *alpha, partition_after)),
            _ => None,
        })
    }

    pub fn raises(&self) -> impl Iterator<Item = (i64, i64, &Partition)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::AlphaRaised {
                from,
                to,
                partition,
            } => Some((*from, *to, partition)),
            _ => None,
        })
    }

    pub fn rate_updates(&self) -> impl Iterator<Item = (&RateUpdate, bool)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::RatesUpdated { update, final_call } => Some((update, *final_call)),
            _ => None,
        })
    }

    /// Partitions reached after each merge since the last restart, starting
    /// with the singletons.
    pub fn final_round_partitions(&self, num_clients: usize) -> Vec<Partition> {
        let start = self
            .events
            .iter()
            .rposition(|e| matches!(e, TraceEvent::AlphaRaised { .. }))
            .map_or(0, |i| i + 1);
        let mut out = vec![Partition::singletons(&Coalition::range(num_clients))];
        for e in &self.events[start..] {
            if let TraceEvent::Merged {
                partition_after, ..
            } = e
            {
                out.push(partition_after.clone());
            }
        }
        out
    }
}

impl fmt::Display for SolveTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "config {}", self.config)?;
        writeln!(
            f,
            "start alpha0={} lower_bound={} alpha={}",
            self.alpha0, self.lower_bound, self.alpha_start
        )?;
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Solution {
    pub alpha: i64,
    pub rates: RateVector,
    pub trace: SolveTrace,
    pub gamma: u64,
}

/// Smallest `k` in `2..|W|` for which some `k` blocks of `w` have a negative
/// `x_value` at `alpha`, and the most negative such group (ties to the
/// lexicographically smallest index set). `None` if no group qualifies.
pub fn find_merge_cand(
    ctx: &mut EvalContext,
    inst: &Instance,
    w: &Partition,
    alpha: i64,
) -> Result<Option<MergeCandidate>> {
    find_merge_cand_capped(ctx, inst, w, alpha, None)
}

fn find_merge_cand_capped(
    ctx: &mut EvalContext,
    inst: &Instance,
    w: &Partition,
    alpha: i64,
    k_cap: Option<usize>,
) -> Result<Option<MergeCandidate>> {
    let blocks = w.blocks();
    let n = blocks.len();
    if n <= 2 {
        return Ok(None);
    }
    let own: Vec<i64> = blocks
        .iter()
        .map(|b| v_value(ctx, inst, alpha, b))
        .collect::<Result<_>>()?;
    let k_max = k_cap.map_or(n - 1, |c| c.min(n - 1));
    let mut members = Vec::new();
    for k in 2..=k_max {
        let mut best: Option<(i64, Vec<usize>)> = None;
        for idx in (0..n).combinations(k) {
            members.clear();
            for &i in &idx {
                members.extend_from_slice(blocks[i].members());
            }
            let merged =
                alpha - inst.num_packets() as i64 + ctx.union_size_of(inst, &members)? as i64;
            let x = merged - idx.iter().map(|&i| own[i]).sum::<i64>();
            if x < 0 && best.as_ref().is_none_or(|(b, _)| x < *b) {
                best = Some((x, idx));
            }
        }
        if let Some((x_value, idx)) = best {
            return Ok(Some(MergeCandidate {
                blocks: idx.into_iter().map(|i| blocks[i].clone()).collect(),
                x_value,
            }));
        }
    }
    Ok(None)
}

fn pick_client(
    block: &Coalition,
    rates: &RateVector,
    rule: ClientRule,
    rng: &mut ChaCha8Rng,
) -> usize {
    let m = block.members();
    match rule {
        ClientRule::LowestIndex => m[0],
        ClientRule::LeastLoaded => *m.iter().min_by_key(|&&c| (rates.get(c), c)).unwrap(),
        ClientRule::SeededRandom => m[rng.gen_range(0..m.len())],
    }
}

/// Tops up each block of `blocks` so that the group can recover locally at
/// its own minimum sum-rate. Each block's target is
/// `alpha_union - |H_Ỹ| + |H_X|`; one block with enough slack absorbs the
/// excess `delta_alpha`. A block's shortfall goes to one of its clients.
pub fn update_rates(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &RateVector,
    blocks: &[Coalition],
    cfg: &TieBreakConfig,
) -> Result<RateUpdate> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    update_rates_with(ctx, inst, rates, blocks, cfg, &mut rng)
}

fn update_rates_with(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &RateVector,
    blocks: &[Coalition],
    cfg: &TieBreakConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RateUpdate> {
    rates.check_len(inst.num_clients())?;
    if blocks.len() < 2 {
        return Err(Error::InvalidPartition(format!(
            "rate update needs at least 2 blocks, got {}",
            blocks.len()
        )));
    }
    let merged = Coalition::union_of(blocks);
    if merged.len() != blocks.iter().map(Coalition::len).sum::<usize>() {
        return Err(Error::InvalidPartition(format!(
            "blocks {} overlap",
            blocks.iter().join(",")
        )));
    }
    let h_union = ctx.union_size(inst, &merged)? as i64;
    let sizes: Vec<i64> = blocks
        .iter()
        .map(|b| ctx.union_size(inst, b).map(|h| h as i64))
        .collect::<Result<_>>()?;
    let k = blocks.len() as i64;
    let alpha_union = ceil_rational(Rational::new(
        sizes.iter().map(|h| h_union - h).sum(),
        k - 1,
    ));
    let targets: Vec<i64> = sizes.iter().map(|h| alpha_union - h_union + h).collect();
    let delta_alpha = targets.iter().sum::<i64>() - alpha_union;
    let accumulated: Vec<i64> = blocks
        .iter()
        .map(|b| rates.coalition_sum(b) as i64)
        .collect();

    let excess = if delta_alpha > 0 {
        let eligible = (0..blocks.len()).filter(|&i| targets[i] - delta_alpha >= accumulated[i]);
        let chosen = match cfg.excess_block_rule {
            ExcessBlockRule::HighestMinIndexWithSlack => {
                eligible.max_by_key(|&i| blocks[i].min_client())
            }
            ExcessBlockRule::LowestIndex => eligible.min_by_key(|&i| blocks[i].min_client()),
        };
        match chosen {
            Some(i) => Some(i),
            None => {
                return Err(Error::NoExcessBlock {
                    blocks: blocks.iter().join(","),
                    delta_alpha,
                    targets,
                    accumulated,
                })
            }
        }
    } else {
        None
    };

    let mut out = rates.clone();
    let mut increments = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let target = targets[i] - if excess == Some(i) { delta_alpha } else { 0 };
        let dr = (target - accumulated[i]).max(0) as u64;
        if dr > 0 {
            let client = pick_client(block, &out, cfg.client_in_block_rule, rng);
            out.add(client, dr);
            increments.push(Increment { client, amount: dr });
        }
    }
    Ok(RateUpdate {
        rates: out,
        blocks: blocks.to_vec(),
        alpha_union,
        delta_alpha,
        targets,
        accumulated,
        excess_block: excess.map(|i| blocks[i].clone()),
        increments,
    })
}

/// Minimum sum-rate and a strategy achieving it, starting from
/// `max(alpha0, lower_bound)`.
pub fn solve(
    ctx: &mut EvalContext,
    inst: &Instance,
    alpha0: i64,
    cfg: &TieBreakConfig,
) -> Result<Solution> {
    solve_with(ctx, inst, alpha0, cfg, AlphaStart::RaiseToLowerBound)
}

pub fn solve_with(
    ctx: &mut EvalContext,
    inst: &Instance,
    alpha0: i64,
    cfg: &TieBreakConfig,
    start: AlphaStart,
) -> Result<Solution> {
    if alpha0 < 0 {
        return Err(Error::InvalidParameter(format!(
            "alpha0 must be >= 0, got {alpha0}"
        )));
    }
    let gamma_before = ctx.gamma();
    let k = inst.num_clients();
    let all = inst.all_clients();
    let lb = lower_bound(ctx, inst);
    let mut alpha = match start {
        AlphaStart::RaiseToLowerBound => alpha0.max(lb),
        AlphaStart::Exact => alpha0,
    };
    let mut trace = SolveTrace {
        config: *cfg,
        lower_bound: lb,
        alpha0,
        alpha_start: alpha,
        events: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (w, mut rates) = 'restart: loop {
        let mut w = Partition::singletons(&all);
        let mut rates = RateVector::zeros(k);
        loop {
            let step_gamma = ctx.gamma();
            let cand = find_merge_cand_capped(ctx, inst, &w, alpha, cfg.k_cap)?;
            if let Some(cand) = &cand {
                let update = update_rates_with(ctx, inst, &rates, &cand.blocks, cfg, &mut rng)?;
                rates = update.rates.clone();
                trace.events.push(TraceEvent::RatesUpdated {
                    update,
                    final_call: false,
                });
                w = w.merge(&cand.blocks)?;
                trace.events.push(TraceEvent::Merged {
                    candidate: cand.clone(),
                    alpha,
                    partition_after: w.clone(),
                    gamma_spent: ctx.gamma() - step_gamma,
                });
            }
            let mut budget = 0;
            for b in w.blocks() {
                budget += v_value(ctx, inst, alpha, b)?;
            }
            if alpha > budget {
                trace.events.push(TraceEvent::AlphaRaised {
                    from: alpha,
                    to: alpha + 1,
                    partition: w.clone(),
                });
                alpha += 1;
                continue 'restart;
            }
            if w.len() == 2 || cand.is_none() {
                break 'restart (w, rates);
            }
        }
    };

    let update = update_rates_with(ctx, inst, &rates, w.blocks(), cfg, &mut rng)?;
    rates = update.rates.clone();
    trace.events.push(TraceEvent::RatesUpdated {
        update,
        final_call: true,
    });

    let reductions = final_reduction(ctx, inst, &mut rates, alpha)?;
    trace.events.push(TraceEvent::FinalReduction { reductions });

    if trace.replay_rates(k) != rates {
        return Err(Error::InvariantBreach(
            "trace replay does not reproduce the rates".into(),
        ));
    }
    Ok(Solution {
        alpha,
        rates,
        trace,
        gamma: ctx.gamma() - gamma_before,
    })
}

/// Removes `max(r_C - alpha, 0)` transmissions. A client `j` can give up
/// `r_j - (L - |H_{C\j}|)` without breaking its own cut.
fn final_reduction(
    ctx: &mut EvalContext,
    inst: &Instance,
    rates: &mut RateVector,
    alpha: i64,
) -> Result<Vec<Increment>> {
    let excess = (rates.sum() as i64 - alpha).max(0) as u64;
    if excess == 0 {
        return Ok(Vec::new());
    }
    let k = inst.num_clients();
    let l = inst.num_packets() as i64;
    let mut slack = Vec::with_capacity(k);
    let mut others = Vec::with_capacity(k);
    for j in 0..k {
        others.clear();
        others.extend((0..k).filter(|&i| i != j));
        let need = l - ctx.union_size_of(inst, &others)? as i64;
        slack.push((rates.get(j) as i64 - need).max(0) as u64);
    }
    if let Some(j) = (0..k).find(|&j| slack[j] >= excess) {
        rates.subtract(j, excess);
        return Ok(vec![Increment {
            client: j,
            amount: excess,
        }]);
    }

    let mut left = excess;
    let mut reductions = Vec::new();
    for (j, &s) in slack.iter().enumerate() {
        let take = s.min(left);
        if take > 0 {
            rates.subtract(j, take);
            reductions.push(Increment {
                client: j,
                amount: take,
            });
            left -= take;
        }
    }
    if left > 0 {
        return Err(Error::FinalReductionFailed {
            excess,
            reason: format!("total client slack falls {left} short"),
        });
    }
    let report =
        oracle::is_feasible(ctx, inst, rates).map_err(|e| Error::FinalReductionFailed {
            excess,
            reason: format!("cannot verify split reduction: {e}"),
        })?;
    if let Some(v) = report.violated {
        return Err(Error::FinalReductionFailed {
            excess,
            reason: format!(
                "split reduction breaks the cut at {} ({} < {})",
                v.coalition, v.actual, v.required
            ),
        });
    }
    Ok(reductions)
}
