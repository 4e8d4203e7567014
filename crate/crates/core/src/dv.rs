//! Divide-and-conquer solver for the fractional problem.
//!
//! Split the client set along a partition attaining the fractional optimum,
//! give each block the budget `alpha° - |H_S| + |H_X|`, and recurse into
//! every non-singleton block with that budget. Rates stay exact rationals,
//! so an integral result is something observed, never rounded into.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Coalition, EvalContext, Instance, Partition, Rational};
use crate::sumrate::{max_fractional, serialize_rational};

/// Which block receives the leftover `R_S - alpha°_S` at each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcessRule {
    /// The block with the smallest client index.
    #[default]
    LowestIndex,
    /// The block with the fewest clients, ties to the smallest client index.
    SmallestBlock,
}

/// One maximization call: the coalition, the budget it was handed, and how
/// it was split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MacCall {
    pub coalition: Coalition,
    #[serde(serialize_with = "serialize_rational")]
    pub budget: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub alpha_frac: Rational,
    pub partition: Partition,
    #[serde(serialize_with = "serialize_rational")]
    pub delta_r: Rational,
    pub absorbed_by: Option<Coalition>,
    pub children: Vec<MacCall>,
}

fn serialize_rationals<S: Serializer>(
    rs: &[Rational],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(|r| r.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DvResult {
    #[serde(serialize_with = "serialize_rationals")]
    pub rates: Vec<Rational>,
    #[serde(serialize_with = "serialize_rational")]
    pub alpha_frac: Rational,
    pub integral: bool,
    pub call_tree: MacCall,
}

/// Fractional optimum over partitions of `s` into at least two blocks and
/// the first partition attaining it.
pub fn mac(ctx: &mut EvalContext, inst: &Instance, s: &Coalition) -> Result<(Rational, Partition)> {
    let (best, mut winners) = max_fractional(ctx, inst, s)?;
    Ok((best, winners.swap_remove(0)))
}

pub fn dv_solve(ctx: &mut EvalContext, inst: &Instance, rule: ExcessRule) -> Result<DvResult> {
    let all = inst.all_clients();
    if all.len() < 2 {
        return Err(Error::CoalitionTooSmall { size: all.len() });
    }
    let mut rates = vec![Rational::from_integer(0); inst.num_clients()];
    let root_alpha = mac(ctx, inst, &all)?.0;
    let call_tree = descend(ctx, inst, &all, root_alpha, rule, &mut rates)?;
    let sum: Rational = rates.iter().sum();
    if sum != call_tree.alpha_frac {
        return Err(Error::InvariantBreach(format!(
            "rates sum to {sum}, root optimum is {}",
            call_tree.alpha_frac
        )));
    }
    Ok(DvResult {
        integral: rates.iter().all(|r| r.is_integer()),
        alpha_frac: call_tree.alpha_frac,
        rates,
        call_tree,
    })
}

fn descend(
    ctx: &mut EvalContext,
    inst: &Instance,
    s: &Coalition,
    budget: Rational,
    rule: ExcessRule,
    rates: &mut [Rational],
) -> Result<MacCall> {
    let (alpha, partition) = mac(ctx, inst, s)?;
    let delta_r = budget - alpha;
    if delta_r < Rational::from_integer(0) {
        return Err(Error::InvariantBreach(format!(
            "budget {budget} for {s} is below its fractional optimum {alpha}"
        )));
    }
    let hs = ctx.union_size(inst, s)? as i64;
    let blocks = partition.blocks();
    let absorber = if delta_r > Rational::from_integer(0) {
        Some(match rule {
            ExcessRule::LowestIndex => 0,
            ExcessRule::SmallestBlock => (0..blocks.len())
                .min_by_key(|&i| (blocks[i].len(), blocks[i].min_client()))
                .unwrap(),
        })
    } else {
        None
    };

    let mut children = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let mut r = alpha - Rational::from_integer(hs)
            + Rational::from_integer(ctx.union_size(inst, block)? as i64);
        if absorber == Some(i) {
            r += delta_r;
        }
        if block.len() == 1 {
            rates[block.min_client()] = r;
        } else {
            children.push(descend(ctx, inst, block, r, rule, rates)?);
        }
    }
    Ok(MacCall {
        coalition: s.clone(),
        budget,
        alpha_frac: alpha,
        absorbed_by: absorber.map(|i| blocks[i].clone()),
        partition,
        delta_r,
        children,
    })
}
