//! Operation-count benchmark: random instances over a range of client
//! counts, solved from the lower bound, with the union-evaluation count
//! recorded per run.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use cde_core::im::{solve, TieBreakConfig};
use cde_core::sumrate::lower_bound;
use cde_core::{random_instance, EvalContext};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io::CliResult;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRecord {
    #[serde(rename = "K")]
    pub num_clients: usize,
    #[serde(rename = "L")]
    pub num_packets: usize,
    pub rep: usize,
    pub seed: u64,
    pub alpha_star: i64,
    pub gamma_count: u64,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub num_packets: usize,
    pub clients: (usize, usize),
    pub reps: usize,
    pub density: f64,
    pub seed: u64,
    pub k_cap: Option<usize>,
    /// When false every `wall_ns` is written as 0, making output
    /// reproducible byte for byte.
    pub record_wall: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            num_packets: 50,
            clients: (5, 60),
            reps: 20,
            density: 0.5,
            seed: 0,
            k_cap: None,
            record_wall: true,
        }
    }
}

/// Seed for one (K, rep) cell. Depends only on the base seed and the cell,
/// so narrowing the client range leaves the other rows unchanged.
pub fn cell_seed(base: u64, num_clients: usize, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(num_clients as u64);
    rng.set_word_pos(2 * rep as u128);
    rng.next_u64()
}

/// Runs every cell in (K, rep) order, calling `progress` after each.
pub fn run(
    cfg: &BenchConfig,
    mut progress: impl FnMut(&BenchRecord),
) -> CliResult<Vec<BenchRecord>> {
    let mut records = Vec::new();
    let tie = TieBreakConfig {
        k_cap: cfg.k_cap,
        ..TieBreakConfig::lex()
    };
    for k in cfg.clients.0..=cfg.clients.1 {
        for rep in 0..cfg.reps {
            let seed = cell_seed(cfg.seed, k, rep);
            let inst = random_instance(k, cfg.num_packets, cfg.density, seed)?;
            let mut ctx = EvalContext::new(seed);
            let start = Instant::now();
            let lb = lower_bound(&mut ctx, &inst);
            let sol = solve(&mut ctx, &inst, lb, &tie)?;
            let wall_ns = if cfg.record_wall {
                start.elapsed().as_nanos() as u64
            } else {
                0
            };
            let rec = BenchRecord {
                num_clients: k,
                num_packets: cfg.num_packets,
                rep,
                seed,
                alpha_star: sol.alpha,
                gamma_count: ctx.gamma(),
                wall_ns,
            };
            progress(&rec);
            records.push(rec);
        }
    }
    Ok(records)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Mean gamma count per client count.
pub fn mean_gamma(records: &[BenchRecord]) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.num_clients).or_default();
        e.0 += r.gamma_count as f64;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// Least-squares slope of `ln(mean gamma)` against `ln K`.
pub fn loglog_slope(means: &BTreeMap<usize, f64>) -> Option<f64> {
    if means.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = means
        .iter()
        .map(|(&k, &g)| ((k as f64).ln(), g.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let cfg = BenchConfig {
            clients: (5, 5),
            reps: 1,
            ..BenchConfig::default()
        };
        let recs = run(&cfg, |_| {}).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].gamma_count > 0);
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("K,L,rep,seed,alpha_star,gamma_count,wall_ns\n5,50,0,"));
    }

    #[test]
    fn cell_seeds_are_independent_of_range() {
        assert_eq!(cell_seed(1, 7, 3), cell_seed(1, 7, 3));
        assert_ne!(cell_seed(1, 7, 3), cell_seed(1, 7, 4));
        assert_ne!(cell_seed(1, 7, 3), cell_seed(1, 8, 3));
    }

    #[test]
    fn slope_of_power_law() {
        let means: BTreeMap<usize, f64> = (2..10).map(|k| (k, 3.0 * (k as f64).powi(3))).collect();
        assert!((loglog_slope(&means).unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(loglog_slope(&BTreeMap::from([(3, 1.0)])), None);
    }
}
