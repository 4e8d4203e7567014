//! Random linear coding simulator.
//!
//! Each client broadcasts `r_j` uniformly random combinations of the packets
//! it started with. A trial succeeds when every client's received rows plus
//! its own unit rows span all `L` packets over `F_q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Instance, RateVector};

pub const DEFAULT_MODULUS: u64 = 65537;

/// Coefficients of one coded packet, one per source packet.
pub type CodedRow = Vec<u64>;

/// Arithmetic modulo a prime below `2^32`, so products fit in `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    q: u64,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self> {
        if q >= 1 << 32 || !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(PrimeField { q })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.q
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.q - b) % self.q
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.q
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut acc = 1 % self.q;
        a %= self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat. Panics on zero.
    pub fn inv(&self, a: u64) -> u64 {
        assert!(!a.is_multiple_of(self.q), "zero has no inverse");
        self.pow(a, self.q - 2)
    }
}

/// Row space kept in reduced echelon form, one pivot per stored row.
#[derive(Debug, Clone)]
pub struct RowSpace {
    field: PrimeField,
    rows: Vec<(usize, CodedRow)>,
}

impl RowSpace {
    pub fn new(field: PrimeField) -> Self {
        RowSpace {
            field,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Adds `row` to the span. Returns whether the rank grew.
    pub fn insert(&mut self, mut row: CodedRow) -> bool {
        let f = self.field;
        for v in row.iter_mut() {
            *v %= f.q;
        }
        for (pivot, basis) in &self.rows {
            let c = row[*pivot];
            if c != 0 {
                for (x, b) in row.iter_mut().zip(basis) {
                    *x = f.sub(*x, f.mul(c, *b));
                }
            }
        }
        let Some(pivot) = row.iter().position(|&x| x != 0) else {
            return false;
        };
        let scale = f.inv(row[pivot]);
        for x in row.iter_mut() {
            *x = f.mul(*x, scale);
        }
        for (_, basis) in self.rows.iter_mut() {
            let c = basis[pivot];
            if c != 0 {
                for (b, x) in basis.iter_mut().zip(&row) {
                    *b = f.sub(*b, f.mul(c, *x));
                }
            }
        }
        self.rows.push((pivot, row));
        true
    }
}

pub fn rank(rows: &[CodedRow], field: PrimeField) -> usize {
    let mut space = RowSpace::new(field);
    for r in rows {
        space.insert(r.clone());
    }
    space.rank()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub trials: usize,
    pub successes: usize,
    /// `ranks[t][j]`: final rank of client `j` in trial `t`.
    pub ranks: Vec<Vec<usize>>,
}

fn unit_row(len: usize, i: usize) -> CodedRow {
    let mut r = vec![0; len];
    r[i] = 1;
    r
}

/// Generator for client `j` in trial `t`. Separate streams keep each
/// client's rows fixed when other rates or the trial count change, and a
/// client's first rows fixed when its own rate grows.
fn client_stream(seed: u64, trial: usize, client: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_add((client as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    rng.set_stream(trial as u64);
    rng
}

/// Runs `trials` independent broadcasts.
pub fn simulate(
    inst: &Instance,
    rates: &RateVector,
    q: u64,
    trials: usize,
    seed: u64,
) -> Result<SimReport> {
    let field = PrimeField::new(q)?;
    rates.check_len(inst.num_clients())?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let l = inst.num_packets();
    let k = inst.num_clients();
    let own: Vec<Vec<usize>> = (0..k).map(|j| inst.has_set(j).iter().collect()).collect();
    let mut ranks = Vec::with_capacity(trials);
    let mut successes = 0;
    for t in 0..trials {
        let sent: Vec<Vec<CodedRow>> = (0..k)
            .map(|j| {
                let mut rng = client_stream(seed, t, j);
                (0..rates.get(j))
                    .map(|_| {
                        let mut row = vec![0; l];
                        for &p in &own[j] {
                            row[p] = rng.gen_range(0..q);
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let trial_ranks: Vec<usize> = (0..k)
            .map(|j| {
                let mut space = RowSpace::new(field);
                for &p in &own[j] {
                    space.insert(unit_row(l, p));
                }
                for (i, rows) in sent.iter().enumerate() {
                    if i != j {
                        for r in rows {
                            space.insert(r.clone());
                        }
                    }
                }
                space.rank()
            })
            .collect();
        if trial_ranks.iter().all(|&r| r == l) {
            successes += 1;
        }
        ranks.push(trial_ranks);
    }
    Ok(SimReport {
        trials,
        successes,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn f() -> PrimeField {
        PrimeField::new(DEFAULT_MODULUS).unwrap()
    }

    #[test]
    fn field_rejects_composites_and_large_moduli() {
        assert_eq!(PrimeField::new(65536), Err(Error::NotPrime(65536)));
        assert!(PrimeField::new(1).is_err());
        assert!(PrimeField::new(4_294_967_311).is_err());
        assert!(PrimeField::new(4_294_967_291).is_ok());
    }

    #[test]
    fn inverses_in_small_field() {
        let f = PrimeField::new(257).unwrap();
        for a in 1..257 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn rank_examples() {
        let units: Vec<CodedRow> = (0..5).map(|i| unit_row(5, i)).collect();
        assert_eq!(rank(&units, f()), 5);
        assert_eq!(rank(&[vec![1, 2, 3], vec![1, 2, 3]], f()), 1);
        assert_eq!(rank(&[vec![1, 0], vec![0, 1], vec![1, 1]], f()), 2);
        assert_eq!(rank(&[], f()), 0);
        let q = DEFAULT_MODULUS;
        assert_eq!(rank(&[vec![1, q - 1], vec![q - 1, 1]], f()), 1);
    }

    #[test]
    fn feasible_strategy_decodes() {
        let inst = fixtures::four_clients_seven_packets();
        let rep = simulate(&inst, &"3,2,0,0".parse().unwrap(), DEFAULT_MODULUS, 50, 1).unwrap();
        assert!(rep.successes >= 49);
    }

    #[test]
    fn infeasible_strategy_never_decodes() {
        let inst = fixtures::four_clients_seven_packets();
        let rep = simulate(&inst, &"1,2,1,1".parse().unwrap(), DEFAULT_MODULUS, 20, 1).unwrap();
        assert_eq!(rep.successes, 0);
        for trial in &rep.ranks {
            assert!(trial[1..].iter().all(|&r| r <= 6));
        }
    }

    #[test]
    fn everyone_already_complete() {
        let inst = Instance::new(3, &[&[1, 2, 3], &[1, 2, 3]]).unwrap();
        let rep = simulate(&inst, &RateVector::zeros(2), DEFAULT_MODULUS, 3, 0).unwrap();
        assert_eq!(rep.successes, 3);
        assert!(rep.ranks.iter().flatten().all(|&r| r == 3));
    }

    #[test]
    fn trials_are_prefix_stable() {
        let inst = fixtures::four_clients_eight_packets();
        let r: RateVector = "2,2,1,1".parse().unwrap();
        let a = simulate(&inst, &r, 17, 5, 9).unwrap();
        let b = simulate(&inst, &r, 17, 8, 9).unwrap();
        assert_eq!(a.ranks[..], b.ranks[..5]);
    }

    #[test]
    fn bad_arguments() {
        let inst = fixtures::four_clients_seven_packets();
        let r = RateVector::zeros(4);
        assert!(simulate(&inst, &r, 15, 1, 0).is_err());
        assert!(simulate(&inst, &r, 17, 0, 0).is_err());
        assert!(simulate(&inst, &RateVector::zeros(3), 17, 1, 0).is_err());
    }
}
