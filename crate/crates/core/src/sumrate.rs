//! Closed-form sum-rate quantities.
//!
//! Notation used in the docs below: `H_X` is the union of the has-sets of
//! the clients in `X`, `L` the number of packets, and for a sum-rate
//! estimate `alpha` the budget of a coalition is `v(X) = alpha - L + |H_X|`.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Coalition, EvalContext, Instance, Partition, Rational};
use crate::partitions::{blocks_from_labels, RgsEnumerator};

/// `v(X) = alpha - L + |H_X|`. One union evaluation.
pub fn v_value(
    ctx: &mut EvalContext,
    inst: &Instance,
    alpha: i64,
    coalition: &Coalition,
) -> Result<i64> {
    let h = ctx.union_size(inst, coalition)? as i64;
    Ok(alpha - inst.num_packets() as i64 + h)
}

/// `X(Y) = v(union of Y) - sum of v(X) over X in Y`; negative exactly when
/// merging the blocks of `Y` is beneficial at `alpha`.
pub fn x_value(
    ctx: &mut EvalContext,
    inst: &Instance,
    alpha: i64,
    blocks: &[Coalition],
) -> Result<i64> {
    if blocks.len() < 2 {
        return Err(Error::InvalidPartition(format!(
            "x_value needs at least 2 blocks, got {}",
            blocks.len()
        )));
    }
    for (i, a) in blocks.iter().enumerate() {
        for b in &blocks[i + 1..] {
            if !a.is_disjoint(b) {
                return Err(Error::InvalidPartition(format!(
                    "blocks {a} and {b} overlap"
                )));
            }
        }
    }
    let merged = Coalition::union_of(blocks);
    let mut x = v_value(ctx, inst, alpha, &merged)?;
    for b in blocks {
        x -= v_value(ctx, inst, alpha, b)?;
    }
    Ok(x)
}

/// Optimal local recovery inside a coalition `S`, found by enumerating every
/// partition of `S` into at least two blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalRecovery {
    /// Minimum integer sum-rate for local recovery in `S`.
    pub alpha_star: i64,
    /// Minimum fractional (packet-splitting) sum-rate.
    #[serde(serialize_with = "serialize_rational")]
    pub alpha_frac: Rational,
    /// Every partition attaining `alpha_frac`, in enumeration order.
    pub argmax_partitions: Vec<Partition>,
    /// Partition minimizing `sum over blocks of (alpha_star - |H_S| + |H_X|)`.
    pub minimizer_partition: Partition,
    /// That minimum minus `alpha_star`: the excess a rate allocation over
    /// the minimizer has to shed.
    pub delta_alpha: i64,
}

pub(crate) fn serialize_rational<S: serde::Serializer>(
    r: &Rational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

pub(crate) fn ceil_rational(r: Rational) -> i64 {
    r.ceil().to_integer()
}

/// Per-partition record kept during enumeration.
struct Scored {
    index: usize,
    num_blocks: i64,
    sum_sizes: i64,
}

/// Enumerates the partitions of `s` with at least two blocks and returns
/// `(|H_S|, scores)`. Every block union goes through the counter.
fn score_partitions(
    ctx: &mut EvalContext,
    inst: &Instance,
    s: &Coalition,
) -> Result<(i64, Vec<Scored>)> {
    if s.len() < 2 {
        return Err(Error::CoalitionTooSmall { size: s.len() });
    }
    s.check_clients(inst.num_clients())?;
    let hs = ctx.union_size(inst, s)? as i64;
    let mut rgs = RgsEnumerator::new(s.len());
    let mut scored = Vec::new();
    let mut block_members: Vec<Vec<usize>> = Vec::new();
    let mut index = 0;
    while let Some(labels) = rgs.advance() {
        let nb = labels.iter().max().unwrap() + 1;
        if nb >= 2 {
            block_members.iter_mut().for_each(Vec::clear);
            block_members.resize(nb, Vec::new());
            for (&m, &l) in s.members().iter().zip(labels) {
                block_members[l].push(m);
            }
            let mut sum = 0i64;
            for b in &block_members[..nb] {
                sum += ctx.union_size_of(inst, b)? as i64;
            }
            scored.push(Scored {
                index,
                num_blocks: nb as i64,
                sum_sizes: sum,
            });
        }
        index += 1;
    }
    Ok((hs, scored))
}

/// Re-enumerates the partitions of `s` and returns those at the given
/// (ascending) enumeration indices.
fn materialize(s: &Coalition, wanted: &[usize]) -> Vec<Partition> {
    let mut out = Vec::with_capacity(wanted.len());
    let mut rgs = RgsEnumerator::new(s.len());
    let mut index = 0;
    let mut next = wanted.iter().peekable();
    while let Some(&&w) = next.peek() {
        rgs.advance().expect("wanted index within enumeration");
        if index == w {
            let blocks = blocks_from_labels(s, rgs.labels(), rgs.num_blocks());
            out.push(Partition::from_sorted_blocks(s.clone(), blocks));
            next.next();
        }
        index += 1;
    }
    out
}

/// Fractional optimum and its first maximizing partition, by exhaustive
/// enumeration.
pub fn max_fractional(
    ctx: &mut EvalContext,
    inst: &Instance,
    s: &Coalition,
) -> Result<(Rational, Vec<Partition>)> {
    let (hs, scored) = score_partitions(ctx, inst, s)?;
    let (best, winners) = fractional_winners(hs, &scored);
    Ok((best, materialize(s, &winners)))
}

fn fractional_winners(hs: i64, scored: &[Scored]) -> (Rational, Vec<usize>) {
    let mut best: Option<Rational> = None;
    let mut winners = Vec::new();
    for sc in scored {
        let f = Rational::new(sc.num_blocks * hs - sc.sum_sizes, sc.num_blocks - 1);
        match best {
            Some(b) if f < b => {}
            Some(b) if f == b => winners.push(sc.index),
            _ => {
                best = Some(f);
                winners.clear();
                winners.push(sc.index);
            }
        }
    }
    (
        best.expect("at least one partition with two blocks"),
        winners,
    )
}

/// Minimum local-recovery sum-rate in `S` (integer and fractional), the
/// minimizing partition and its excess.
///
/// Ties for the minimizer go to the partition with the most blocks, then to
/// the first in enumeration order.
pub fn local_recovery(
    ctx: &mut EvalContext,
    inst: &Instance,
    s: &Coalition,
) -> Result<LocalRecovery> {
    let (hs, scored) = score_partitions(ctx, inst, s)?;
    let (alpha_frac, winners) = fractional_winners(hs, &scored);
    let alpha_star = ceil_rational(alpha_frac);

    let mut best: Option<(i64, i64, usize)> = None;
    for sc in &scored {
        let total = sc.num_blocks * (alpha_star - hs) + sc.sum_sizes;
        let better = match best {
            None => true,
            Some((t, nb, _)) => total < t || (total == t && sc.num_blocks > nb),
        };
        if better {
            best = Some((total, sc.num_blocks, sc.index));
        }
    }
    let (min_total, _, min_index) = best.expect("at least one partition");

    let argmax_partitions = materialize(s, &winners);
    let minimizer_partition = materialize(s, &[min_index]).pop().unwrap();
    Ok(LocalRecovery {
        alpha_star,
        alpha_frac,
        argmax_partitions,
        minimizer_partition,
        delta_alpha: min_total - alpha_star,
    })
}

/// Coalition-level rates for local recovery in `S`: each block `X` of the
/// minimizer gets `alpha_star - |H_S| + |H_X|`, and `excess_block` also
/// absorbs `delta_alpha`.
pub fn prop1_allocate(
    ctx: &mut EvalContext,
    inst: &Instance,
    s: &Coalition,
    result: &LocalRecovery,
    excess_block: &Coalition,
) -> Result<BTreeMap<Coalition, i64>> {
    if !result.minimizer_partition.blocks().contains(excess_block) {
        return Err(Error::InvalidParameter(format!(
            "{excess_block} is not a block of {}",
            result.minimizer_partition
        )));
    }
    let hs = ctx.union_size(inst, s)? as i64;
    let mut out = BTreeMap::new();
    for block in result.minimizer_partition.blocks() {
        let mut r = result.alpha_star - hs + ctx.union_size(inst, block)? as i64;
        if block == excess_block {
            r -= result.delta_alpha;
            if r < 0 {
                return Err(Error::NegativeAllocation {
                    block: block.to_string(),
                    value: r,
                });
            }
        }
        out.insert(block.clone(), r);
    }
    Ok(out)
}

/// Lower bound on the minimum sum-rate: the larger of the all-singletons
/// partition bound (rounded up) and the best singleton-vs-rest 2-partition
/// bound `2L - |H_j| - |H_{C\j}|`.
pub fn lower_bound(ctx: &mut EvalContext, inst: &Instance) -> i64 {
    let k = inst.num_clients();
    let l = inst.num_packets() as i64;
    let singles: Vec<i64> = (0..k)
        .map(|j| ctx.union_size_of(inst, &[j]).expect("valid client") as i64)
        .collect();
    let missing: i64 = singles.iter().map(|h| l - h).sum();
    let k_partition = ceil_rational(Rational::new(missing, k as i64 - 1));
    let mut best = k_partition;
    let mut rest = Vec::with_capacity(k - 1);
    for (j, hj) in singles.iter().enumerate() {
        rest.clear();
        rest.extend((0..k).filter(|&i| i != j));
        let h_rest = ctx.union_size_of(inst, &rest).expect("valid client") as i64;
        best = best.max(2 * l - hj - h_rest);
    }
    best
}

/// Maximum of `(L - |H_X|) + (L - |H_{C\X}|)` over every 2-partition of
/// the clients. Exhaustive, so limited to `K <= 20`.
pub fn two_partition_bound(ctx: &mut EvalContext, inst: &Instance) -> Result<i64> {
    const LIMIT: usize = 20;
    let k = inst.num_clients();
    if k > LIMIT {
        return Err(Error::OverLimit {
            what: "exhaustive 2-partition bound",
            limit: LIMIT,
            num_clients: k,
        });
    }
    let l = inst.num_packets() as i64;
    let mut best = i64::MIN;
    let (mut side, mut other) = (Vec::new(), Vec::new());
    // client 0 always on `side`; every other mask picks the rest of it
    for mask in 0u32..(1 << (k - 1)) - 1 {
        side.clear();
        other.clear();
        side.push(0);
        for j in 1..k {
            if mask >> (j - 1) & 1 == 1 {
                side.push(j);
            } else {
                other.push(j);
            }
        }
        let a = ctx.union_size_of(inst, &side)? as i64;
        let b = ctx.union_size_of(inst, &other)? as i64;
        best = best.max(2 * l - a - b);
    }
    Ok(best)
}

/// Float view of a rational, for reporting only.
pub fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
