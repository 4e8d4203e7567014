//! Problem representation: instances, coalitions, partitions, rate vectors
//! and the counted evaluation context.
//!
//! Clients and packets are 0-based inside the crate. Everything that crosses
//! the user boundary (instance files, `Display`, serialized output) is
//! 1-based.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::error::{Error, Result};

/// Exact fraction used for packet-splitting quantities.
pub type Rational = num_rational::Ratio<i64>;

/// Fixed-width bit set over packet ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketSet {
    words: Vec<u64>,
    len: usize,
}

impl PacketSet {
    pub fn empty(len: usize) -> Self {
        PacketSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for p in 0..len {
            s.insert(p);
        }
        s
    }

    pub fn insert(&mut self, packet: usize) {
        assert!(packet < self.len, "packet {packet} out of range");
        self.words[packet / 64] |= 1 << (packet % 64);
    }

    pub fn contains(&self, packet: usize) -> bool {
        packet < self.len && self.words[packet / 64] >> (packet % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection_count(&self, other: &PacketSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn union_with(&mut self, other: &PacketSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Packet ids in ascending order, 0-based.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&p| self.contains(p))
    }
}

/// On-disk instance: `{"L": 7, "has_sets": [[1,3,4,6,7], ...]}` with 1-based
/// packet ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    #[serde(rename = "L")]
    pub num_packets: usize,
    pub has_sets: Vec<Vec<usize>>,
}

/// First broken instance invariant, with 1-based ids.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("at least 2 clients required, got {0}")]
    TooFewClients(usize),
    #[error("at least 1 packet required")]
    NoPackets,
    #[error("client {client} lists packet {packet}, outside 1..={num_packets}")]
    PacketOutOfRange {
        client: usize,
        packet: usize,
        num_packets: usize,
    },
    #[error("packet {packet} is not held by any client")]
    UncoveredPacket { packet: usize },
}

/// Checks every instance invariant in a fixed order and reports the first
/// one that fails.
pub fn validate(raw: &RawInstance) -> std::result::Result<(), Violation> {
    let k = raw.has_sets.len();
    if k < 2 {
        return Err(Violation::TooFewClients(k));
    }
    let l = raw.num_packets;
    if l == 0 {
        return Err(Violation::NoPackets);
    }
    let mut covered = vec![false; l];
    for (j, set) in raw.has_sets.iter().enumerate() {
        for &p in set {
            if p == 0 || p > l {
                return Err(Violation::PacketOutOfRange {
                    client: j + 1,
                    packet: p,
                    num_packets: l,
                });
            }
            covered[p - 1] = true;
        }
    }
    if let Some(p) = covered.iter().position(|c| !c) {
        return Err(Violation::UncoveredPacket { packet: p + 1 });
    }
    Ok(())
}

/// A validated data-exchange instance: `L` packets and one has-set per client.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    num_packets: usize,
    has_sets: Vec<PacketSet>,
}

impl Instance {
    /// Builds an instance from 1-based has-sets.
    pub fn new(num_packets: usize, has_sets: &[&[usize]]) -> Result<Self> {
        Self::from_raw(&RawInstance {
            num_packets,
            has_sets: has_sets.iter().map(|s| s.to_vec()).collect(),
        })
    }

    pub fn from_raw(raw: &RawInstance) -> Result<Self> {
        validate(raw)?;
        let has_sets = raw
            .has_sets
            .iter()
            .map(|set| {
                let mut ps = PacketSet::empty(raw.num_packets);
                for &p in set {
                    ps.insert(p - 1);
                }
                ps
            })
            .collect();
        Ok(Instance {
            num_packets: raw.num_packets,
            has_sets,
        })
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            num_packets: self.num_packets,
            has_sets: self
                .has_sets
                .iter()
                .map(|s| s.iter().map(|p| p + 1).collect())
                .collect(),
        }
    }

    pub fn num_packets(&self) -> usize {
        self.num_packets
    }

    pub fn num_clients(&self) -> usize {
        self.has_sets.len()
    }

    pub fn has_set(&self, client: usize) -> &PacketSet {
        &self.has_sets[client]
    }

    pub fn has_sets(&self) -> &[PacketSet] {
        &self.has_sets
    }

    /// The grand coalition `{0..K}`.
    pub fn all_clients(&self) -> Coalition {
        Coalition::range(self.num_clients())
    }

    /// Union of the given clients' has-sets, without touching any counter.
    /// Meant for simulation and display, not for solver logic.
    pub fn union_set(&self, clients: &[usize]) -> PacketSet {
        let mut acc = PacketSet::empty(self.num_packets);
        for &j in clients {
            acc.union_with(&self.has_sets[j]);
        }
        acc
    }
}

/// Nonempty set of client ids, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(Vec<usize>);

impl Coalition {
    /// From 0-based ids.
    pub fn new(members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = members.into_iter().collect();
        if v.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        v.sort_unstable();
        v.dedup();
        Ok(Coalition(v))
    }

    /// From 1-based ids; 0 is rejected.
    pub fn from_one_based(members: &[usize]) -> Result<Self> {
        if let Some(&bad) = members.iter().find(|&&m| m == 0) {
            return Err(Error::InvalidClient {
                client: bad,
                num_clients: 0,
            });
        }
        Self::new(members.iter().map(|m| m - 1))
    }

    pub fn singleton(client: usize) -> Self {
        Coalition(vec![client])
    }

    /// `{0, .., n-1}`. Panics on `n == 0`.
    pub fn range(n: usize) -> Self {
        assert!(n > 0, "empty range coalition");
        Coalition((0..n).collect())
    }

    /// Union of several coalitions. Panics if `parts` is empty.
    pub fn union_of<'a>(parts: impl IntoIterator<Item = &'a Coalition>) -> Self {
        let mut v: Vec<usize> = parts
            .into_iter()
            .flat_map(|c| c.0.iter().copied())
            .collect();
        assert!(!v.is_empty(), "union of no coalitions");
        v.sort_unstable();
        v.dedup();
        Coalition(v)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_client(&self) -> usize {
        self.0[0]
    }

    pub fn contains(&self, client: usize) -> bool {
        self.0.binary_search(&client).is_ok()
    }

    pub fn is_disjoint(&self, other: &Coalition) -> bool {
        self.0.iter().all(|c| !other.contains(*c))
    }

    pub fn is_subset(&self, other: &Coalition) -> bool {
        self.0.iter().all(|c| other.contains(*c))
    }

    /// Members of `self` not in `other`; `None` when that is empty.
    pub fn difference(&self, other: &Coalition) -> Option<Coalition> {
        let v: Vec<usize> = self
            .0
            .iter()
            .copied()
            .filter(|c| !other.contains(*c))
            .collect();
        (!v.is_empty()).then_some(Coalition(v))
    }

    pub fn check_clients(&self, num_clients: usize) -> Result<()> {
        match self.0.last() {
            Some(&c) if c >= num_clients => Err(Error::InvalidClient {
                client: c + 1,
                num_clients,
            }),
            _ => Ok(()),
        }
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Coalition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|c| c + 1))
    }
}

/// Disjoint coalitions covering a ground set, ordered by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    ground: Coalition,
    blocks: Vec<Coalition>,
}

impl Partition {
    pub fn new(ground: Coalition, mut blocks: Vec<Coalition>) -> Result<Self> {
        blocks.sort_unstable();
        let total: usize = blocks.iter().map(Coalition::len).sum();
        if total != ground.len() {
            return Err(Error::InvalidPartition(format!(
                "blocks hold {total} clients, ground set has {}",
                ground.len()
            )));
        }
        let mut seen = Vec::with_capacity(total);
        for b in &blocks {
            if !b.is_subset(&ground) {
                return Err(Error::InvalidPartition(format!(
                    "block {b} leaves the ground set {ground}"
                )));
            }
            seen.extend_from_slice(b.members());
        }
        seen.sort_unstable();
        if seen.as_slice() != ground.members() {
            return Err(Error::InvalidPartition("blocks overlap".into()));
        }
        Ok(Partition { ground, blocks })
    }

    /// Built by the enumerators, which already guarantee the invariants.
    pub(crate) fn from_sorted_blocks(ground: Coalition, blocks: Vec<Coalition>) -> Self {
        debug_assert!(blocks.windows(2).all(|w| w[0] < w[1]));
        Partition { ground, blocks }
    }

    pub fn singletons(ground: &Coalition) -> Self {
        Partition {
            ground: ground.clone(),
            blocks: ground
                .members()
                .iter()
                .map(|&c| Coalition::singleton(c))
                .collect(),
        }
    }

    /// From 1-based block lists; the ground set is their union.
    pub fn from_one_based(blocks: &[&[usize]]) -> Result<Self> {
        let blocks = blocks
            .iter()
            .map(|b| Coalition::from_one_based(b))
            .collect::<Result<Vec<_>>>()?;
        let ground = Coalition::union_of(&blocks);
        Self::new(ground, blocks)
    }

    pub fn ground(&self) -> &Coalition {
        &self.ground
    }

    pub fn blocks(&self) -> &[Coalition] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Replaces the given blocks by their union.
    pub fn merge(&self, parts: &[Coalition]) -> Result<Partition> {
        if parts.iter().any(|p| !self.blocks.contains(p)) {
            return Err(Error::InvalidPartition(
                "merge of a block not in the partition".into(),
            ));
        }
        let merged = Coalition::union_of(parts);
        let mut blocks: Vec<Coalition> = self
            .blocks
            .iter()
            .filter(|b| !parts.contains(b))
            .cloned()
            .collect();
        blocks.push(merged);
        blocks.sort_unstable();
        Ok(Partition {
            ground: self.ground.clone(),
            blocks,
        })
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(&self.blocks)
    }
}

/// Per-client transmission counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RateVector(Vec<u64>);

impl RateVector {
    pub fn zeros(num_clients: usize) -> Self {
        RateVector(vec![0; num_clients])
    }

    pub fn from_vec(rates: Vec<u64>) -> Self {
        RateVector(rates)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, client: usize) -> u64 {
        self.0[client]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn sum(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn coalition_sum(&self, coalition: &Coalition) -> u64 {
        coalition.members().iter().map(|&c| self.0[c]).sum()
    }

    pub fn add(&mut self, client: usize, amount: u64) {
        self.0[client] += amount;
    }

    /// Panics on underflow: callers check slack first.
    pub fn subtract(&mut self, client: usize, amount: u64) {
        self.0[client] = self.0[client]
            .checked_sub(amount)
            .expect("rate reduced below zero");
    }

    pub fn check_len(&self, num_clients: usize) -> Result<()> {
        if self.0.len() != num_clients {
            return Err(Error::RateLength {
                expected: num_clients,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for RateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for RateVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::InvalidParameter(format!("rate {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(RateVector)
    }
}

/// Single-owner evaluation scope. Counts has-set union evaluations (`gamma`)
/// and carries the seeded generator used by randomized tie-breaks.
#[derive(Debug, Clone)]
pub struct EvalContext {
    gamma: u64,
    seed: u64,
    rng: ChaCha8Rng,
    scratch: Vec<u64>,
    cache: Option<HashMap<Vec<usize>, usize>>,
}

impl EvalContext {
    pub fn new(seed: u64) -> Self {
        EvalContext {
            gamma: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scratch: Vec::new(),
            cache: None,
        }
    }

    /// Memoizes union sizes by member list. A miss counts once, a hit is free.
    pub fn with_cache(mut self) -> Self {
        self.cache = Some(HashMap::new());
        self
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// `|H_X|` for a coalition. Counts one evaluation.
    pub fn union_size(&mut self, inst: &Instance, coalition: &Coalition) -> Result<usize> {
        coalition.check_clients(inst.num_clients())?;
        self.union_size_of(inst, coalition.members())
    }

    /// `|H_X|` for a raw client list (any order, may be empty). Counts one
    /// evaluation.
    pub fn union_size_of(&mut self, inst: &Instance, clients: &[usize]) -> Result<usize> {
        if let Some(&bad) = clients.iter().find(|&&c| c >= inst.num_clients()) {
            return Err(Error::InvalidClient {
                client: bad + 1,
                num_clients: inst.num_clients(),
            });
        }
        if let Some(cache) = &self.cache {
            let mut key = clients.to_vec();
            key.sort_unstable();
            key.dedup();
            if let Some(&n) = cache.get(&key) {
                return Ok(n);
            }
            let n = self.count_union(inst, clients);
            self.cache.as_mut().unwrap().insert(key, n);
            return Ok(n);
        }
        Ok(self.count_union(inst, clients))
    }

    fn count_union(&mut self, inst: &Instance, clients: &[usize]) -> usize {
        self.gamma += 1;
        let words = inst.num_packets().div_ceil(64);
        self.scratch.clear();
        self.scratch.resize(words, 0);
        for &c in clients {
            for (acc, w) in self.scratch.iter_mut().zip(inst.has_set(c).words()) {
                *acc |= w;
            }
        }
        self.scratch.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Random instance: every packet joins every has-set independently with
/// probability `density`; packets nobody drew go to one uniformly chosen
/// client.
pub fn random_instance(
    num_clients: usize,
    num_packets: usize,
    density: f64,
    seed: u64,
) -> Result<Instance> {
    if num_clients < 2 {
        return Err(Error::InvalidParameter(format!(
            "K must be >= 2, got {num_clients}"
        )));
    }
    if num_packets < 1 {
        return Err(Error::InvalidParameter("L must be >= 1".into()));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density must be in (0, 1), got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut has_sets = vec![PacketSet::empty(num_packets); num_clients];
    for set in has_sets.iter_mut() {
        for p in 0..num_packets {
            if rng.gen_bool(density) {
                set.insert(p);
            }
        }
    }
    for p in 0..num_packets {
        if !has_sets.iter().any(|s| s.contains(p)) {
            let j = rng.gen_range(0..num_clients);
            has_sets[j].insert(p);
        }
    }
    Ok(Instance {
        num_packets,
        has_sets,
    })
}

/// Worked instances with known answers.
pub mod fixtures {
    use super::Instance;

    /// 4 clients, 7 packets. Minimum integer sum-rate 5; the fractional
    /// optimum 13/3 is attained only by the all-singletons partition.
    pub fn four_clients_seven_packets() -> Instance {
        Instance::new(
            7,
            &[&[1, 3, 4, 6, 7], &[1, 2, 3, 5], &[1, 5, 6], &[3, 5, 6]],
        )
        .unwrap()
    }

    /// 4 clients, 8 packets. Minimum sum-rate 6, reachable by divide and
    /// conquer with integral rates.
    pub fn four_clients_eight_packets() -> Instance {
        Instance::new(
            8,
            &[
                &[3, 4, 6, 7, 8],
                &[1, 4, 7, 8],
                &[3, 4, 5, 6, 7, 8],
                &[1, 2, 6],
            ],
        )
        .unwrap()
    }

    /// 5 clients, 10 packets, used to observe a multi-step merge sequence.
    pub fn five_clients_ten_packets() -> Instance {
        Instance::new(
            10,
            &[
                &[5, 7, 10],
                &[1, 2, 5, 6, 7, 8, 9],
                &[1, 3, 5, 6, 7, 8, 9, 10],
                &[1, 3, 4, 5, 6, 7, 8, 9],
                &[3, 6, 8, 9],
            ],
        )
        .unwrap()
    }
}
