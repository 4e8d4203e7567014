//! Set-partition enumeration by restricted-growth strings.
//!
//! A partition of `n` ordered elements is encoded as labels `a[0..n]` with
//! `a[0] = 0` and `a[i] <= 1 + max(a[0..i])`. Strings are visited in
//! lexicographic order, so block `b` is always the block whose smallest
//! element comes `b`-th. That order is the canonical tie-break for every
//! "first partition attaining an extremum" rule in the crate.

use crate::error::{Error, Result};
use crate::model::{Coalition, Partition};

/// Lending enumerator over all restricted-growth strings of length `n`.
#[derive(Debug, Clone)]
pub struct RgsEnumerator {
    labels: Vec<usize>,
    prefix_max: Vec<usize>,
    started: bool,
}

impl RgsEnumerator {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "cannot enumerate partitions of an empty set");
        RgsEnumerator {
            labels: vec![0; n],
            prefix_max: vec![0; n],
            started: false,
        }
    }

    /// Advances to the next string. Returns `None` once exhausted.
    pub fn advance(&mut self) -> Option<&[usize]> {
        if !self.started {
            self.started = true;
            return Some(&self.labels);
        }
        let n = self.labels.len();
        for i in (1..n).rev() {
            if self.labels[i] <= self.prefix_max[i - 1] {
                self.labels[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.labels[i]);
                let m = self.prefix_max[i];
                for t in i + 1..n {
                    self.labels[t] = 0;
                    self.prefix_max[t] = m;
                }
                return Some(&self.labels);
            }
        }
        None
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_blocks(&self) -> usize {
        self.prefix_max[self.labels.len() - 1] + 1
    }
}

/// Materializes the blocks encoded by `labels` over the sorted members of
/// `ground`.
pub fn blocks_from_labels(
    ground: &Coalition,
    labels: &[usize],
    num_blocks: usize,
) -> Vec<Coalition> {
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); num_blocks];
    for (&member, &label) in ground.members().iter().zip(labels) {
        blocks[label].push(member);
    }
    blocks
        .into_iter()
        .map(|b| Coalition::new(b).expect("restricted-growth labels leave no block empty"))
        .collect()
}

/// Iterator over the partitions of `ground` with a block count in
/// `min_blocks..=max_blocks`, in restricted-growth lexicographic order.
#[derive(Debug, Clone)]
pub struct Partitions {
    ground: Coalition,
    rgs: RgsEnumerator,
    min_blocks: usize,
    max_blocks: usize,
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        loop {
            self.rgs.advance()?;
            let nb = self.rgs.num_blocks();
            if nb >= self.min_blocks && nb <= self.max_blocks {
                let blocks = blocks_from_labels(&self.ground, self.rgs.labels(), nb);
                return Some(Partition::from_sorted_blocks(self.ground.clone(), blocks));
            }
        }
    }
}

pub fn partitions(ground: &Coalition, min_blocks: usize, max_blocks: usize) -> Result<Partitions> {
    if min_blocks < 1 || min_blocks > max_blocks || max_blocks > ground.len() {
        return Err(Error::InvalidParameter(format!(
            "block bounds {min_blocks}..={max_blocks} invalid for a ground set of {}",
            ground.len()
        )));
    }
    Ok(Partitions {
        ground: ground.clone(),
        rgs: RgsEnumerator::new(ground.len()),
        min_blocks,
        max_blocks,
    })
}
