use std::fmt::Write as _;
use std::path::Path;

use cde_core::dv::{dv_solve, ExcessRule, MacCall};
use cde_core::im::{solve_with, AlphaStart, TieBreakConfig};
use cde_core::oracle::{brute_force_alpha, is_feasible, verify_optimal, OracleLimits};
use cde_core::rlnc::simulate as rlnc_simulate;
use cde_core::sumrate::{local_recovery, lower_bound};
use cde_core::{random_instance, EvalContext, Instance, RateVector};
use itertools::Itertools;
use serde_json::json;

use crate::bench::{self, BenchConfig};
use crate::io::{instance_json, write_file, CliResult};
use crate::props::{self, SuiteConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 2;

/// What a command prints and the status it exits with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub code: u8,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output {
            stdout,
            code: EXIT_OK,
        }
    }

    fn checked(stdout: String, passed: bool) -> Self {
        Output {
            stdout,
            code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Lex,
    PaperTrace,
}

impl TieBreak {
    pub fn config(self) -> TieBreakConfig {
        match self {
            TieBreak::Lex => TieBreakConfig::lex(),
            TieBreak::PaperTrace => TieBreakConfig::paper_trace(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOpts {
    /// Start exactly here instead of at the lower bound.
    pub alpha: Option<i64>,
    pub trace: bool,
    pub verify: bool,
    pub tie_break: TieBreak,
    pub json: bool,
}

/// Number of coding trials used to verify when the instance is too large
/// for the cut check.
const SIM_VERIFY_TRIALS: usize = 5;

pub fn solve(inst: &Instance, opts: &SolveOpts) -> CliResult<Output> {
    let mut ctx = EvalContext::new(0);
    let cfg = opts.tie_break.config();
    let sol = match opts.alpha {
        Some(a) => solve_with(&mut ctx, inst, a, &cfg, AlphaStart::Exact)?,
        None => solve_with(&mut ctx, inst, 0, &cfg, AlphaStart::RaiseToLowerBound)?,
    };

    let mut verdict: Option<(bool, serde_json::Value, String)> = None;
    if opts.verify {
        let mut vctx = EvalContext::new(0);
        let limits = OracleLimits::default();
        let k = inst.num_clients();
        verdict = Some(if k <= limits.bell_max_clients {
            let o = verify_optimal(&mut vctx, inst, &sol.rates)?;
            let text = format!(
                "verify feasible={} optimal={} alpha_star={}",
                o.feasibility.feasible, o.optimal, o.alpha_star
            );
            (o.optimal, serde_json::to_value(&o).unwrap(), text)
        } else if k <= limits.cut_max_clients {
            let rep = is_feasible(&mut vctx, inst, &sol.rates)?;
            let text = format!("verify feasible={} optimal=unchecked", rep.feasible);
            (rep.feasible, serde_json::to_value(&rep).unwrap(), text)
        } else {
            let rep = rlnc_simulate(
                inst,
                &sol.rates,
                cde_core::rlnc::DEFAULT_MODULUS,
                SIM_VERIFY_TRIALS,
                0,
            )?;
            let ok = rep.successes == rep.trials;
            let text = format!(
                "verify coded_trials={}/{} optimal=unchecked",
                rep.successes, rep.trials
            );
            (
                ok,
                json!({"successes": rep.successes, "trials": rep.trials}),
                text,
            )
        });
    }
    let passed = verdict.as_ref().is_none_or(|v| v.0);

    if opts.json {
        let mut v = json!({"alpha": sol.alpha, "rates": sol.rates, "gamma": sol.gamma});
        if opts.trace {
            v["trace"] = serde_json::to_value(&sol.trace).unwrap();
        }
        if let Some((_, report, _)) = &verdict {
            v["verify"] = report.clone();
        }
        return Ok(Output::checked(pretty(&v), passed));
    }
    let mut out = format!("alpha={} rates={}\n", sol.alpha, sol.rates);
    if opts.trace {
        out.push_str(&sol.trace.to_string());
    }
    if let Some((_, _, text)) = &verdict {
        writeln!(out, "{text}").unwrap();
    }
    Ok(Output::checked(out, passed))
}

pub fn verify(
    inst: &Instance,
    rates: &RateVector,
    optimal: bool,
    json_out: bool,
) -> CliResult<Output> {
    let mut ctx = EvalContext::new(0);
    let rep = is_feasible(&mut ctx, inst, rates)?;
    let mut passed = rep.feasible;
    let mut alpha_star = None;
    if optimal {
        let a = brute_force_alpha(&mut ctx, inst)?;
        passed &= rates.sum() as i64 == a;
        alpha_star = Some(a);
    }
    if json_out {
        let mut v = serde_json::to_value(&rep).unwrap();
        v["sum"] = json!(rates.sum());
        if let Some(a) = alpha_star {
            v["alpha_star"] = json!(a);
            v["optimal"] = json!(passed);
        }
        return Ok(Output::checked(pretty(&v), passed));
    }
    let mut out = match &rep.violated {
        None => format!("feasible=true sum={}", rates.sum()),
        Some(v) => format!(
            "feasible=false violated X={} required {} actual {}",
            v.coalition, v.required, v.actual
        ),
    };
    if let Some(a) = alpha_star {
        write!(out, " alpha_star={a} optimal={passed}").unwrap();
    }
    out.push('\n');
    Ok(Output::checked(out, passed))
}

pub fn oracle_alpha(inst: &Instance, json_out: bool) -> CliResult<Output> {
    let limit = OracleLimits::default().bell_max_clients;
    if inst.num_clients() > limit {
        return Err(cde_core::Error::OverLimit {
            what: "exhaustive optimum",
            limit,
            num_clients: inst.num_clients(),
        }
        .into());
    }
    let mut ctx = EvalContext::new(0);
    let lr = local_recovery(&mut ctx, inst, &inst.all_clients())?;
    let lb = lower_bound(&mut ctx, inst);
    if json_out {
        let mut v = serde_json::to_value(&lr).unwrap();
        v["lower_bound"] = json!(lb);
        return Ok(Output::ok(pretty(&v)));
    }
    Ok(Output::ok(format!(
        "alpha_star={} alpha_frac={} lower_bound={lb} minimizer={}\n",
        lr.alpha_star, lr.alpha_frac, lr.minimizer_partition
    )))
}

pub fn oracle_props(cfg: &SuiteConfig, json_out: bool) -> CliResult<Output> {
    let report = props::run_suite(cfg)?;
    let passed = report.hard_checks_pass();
    if json_out {
        return Ok(Output::checked(
            pretty(&serde_json::to_value(&report).unwrap()),
            passed,
        ));
    }
    Ok(Output::checked(report.to_string(), passed))
}

fn write_call_tree(out: &mut String, call: &MacCall, depth: usize) {
    let absorbed = call
        .absorbed_by
        .as_ref()
        .map_or("none".to_string(), |b| b.to_string());
    writeln!(
        out,
        "{:indent$}mac S={} budget={} alpha_frac={} partition={} delta_r={} absorbed_by={}",
        "",
        call.coalition,
        call.budget,
        call.alpha_frac,
        call.partition,
        call.delta_r,
        absorbed,
        indent = 2 * depth
    )
    .unwrap();
    for c in &call.children {
        write_call_tree(out, c, depth + 1);
    }
}

pub fn dv(inst: &Instance, rule: ExcessRule, trace: bool, json_out: bool) -> CliResult<Output> {
    let mut ctx = EvalContext::new(0);
    let r = dv_solve(&mut ctx, inst, rule)?;
    if json_out {
        let mut v = serde_json::to_value(&r).unwrap();
        if !trace {
            v.as_object_mut().unwrap().remove("call_tree");
        }
        return Ok(Output::ok(pretty(&v)));
    }
    let mut out = format!(
        "rates={} integral={} alpha_frac={}\n",
        r.rates.iter().join(","),
        r.integral,
        r.alpha_frac
    );
    if trace {
        write_call_tree(&mut out, &r.call_tree, 0);
    }
    Ok(Output::ok(out))
}

pub fn simulate(
    inst: &Instance,
    rates: &RateVector,
    q: u64,
    trials: usize,
    seed: u64,
    json_out: bool,
) -> CliResult<Output> {
    let rep = rlnc_simulate(inst, rates, q, trials, seed)?;
    let passed = rep.successes == rep.trials;
    if json_out {
        return Ok(Output::checked(
            pretty(&serde_json::to_value(&rep).unwrap()),
            passed,
        ));
    }
    let min_ranks = (0..inst.num_clients()).map(|j| rep.ranks.iter().map(|t| t[j]).min().unwrap());
    Ok(Output::checked(
        format!(
            "successes={}/{} q={q} min_rank={} L={}\n",
            rep.successes,
            rep.trials,
            min_ranks.format(","),
            inst.num_packets()
        ),
        passed,
    ))
}

pub fn gen(num_clients: usize, num_packets: usize, density: f64, seed: u64) -> CliResult<Output> {
    let inst = random_instance(num_clients, num_packets, density, seed)?;
    Ok(Output::ok(instance_json(&inst) + "\n"))
}

pub fn bench(cfg: &BenchConfig, out: Option<&Path>, json_out: bool) -> CliResult<Output> {
    let records = bench::run(cfg, |_| {})?;
    let mut csv_bytes = Vec::new();
    bench::write_csv(&records, &mut csv_bytes)?;
    if let Some(p) = out {
        write_file(p, &csv_bytes)?;
    }
    let means = bench::mean_gamma(&records);
    let slope = bench::loglog_slope(&means);
    if json_out {
        let v = json!({
            "rows": records.len(),
            "mean_gamma": means.iter().map(|(k, g)| json!({"K": k, "mean_gamma": g})).collect::<Vec<_>>(),
            "loglog_slope": slope,
        });
        return Ok(Output::ok(pretty(&v)));
    }
    let mut text = String::new();
    if out.is_none() {
        text.push_str(&String::from_utf8(csv_bytes).expect("csv is utf-8"));
    }
    for (k, g) in &means {
        writeln!(text, "# K={k} mean_gamma={g:.1}").unwrap();
    }
    match slope {
        Some(s) => writeln!(text, "# loglog_slope={s:.3}").unwrap(),
        None => writeln!(text, "# loglog_slope=undefined (one client count)").unwrap(),
    }
    Ok(Output::ok(text))
}
