//! Greedy-versus-exhaustive harness over generated selection instances.
//!
//! A reporting tool: mismatches are recorded (and saved for replay), not
//! treated as command failures, so exploratory sweeps always exit 0.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use lectsum::select::instance::{
    euclidean_instance, planted_clusters_instance, random_instance, Instance,
};
use lectsum::select::{self, EXHAUSTIVE_COMBINATION_LIMIT};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::summarize::write_json;
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    /// Distances i.i.d. uniform: adversarial non-metric instances on which
    /// the local removal cost misjudges cascaded removals most often.
    Random,
    /// Well-separated clusters; greedy provably matches the optimum.
    Planted,
    /// Random points in the plane: metric instances shaped like real
    /// image-distance matrices.
    Euclidean,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Instances to generate.
    #[arg(long, default_value_t = 200, value_name = "N")]
    pub instances: usize,

    /// Inclusive image-count range per instance, as "lo..hi".
    #[arg(long, default_value = "6..12", value_parser = parse_range, value_name = "LO..HI")]
    pub n_range: (usize, usize),

    /// Summary size.
    #[arg(long, default_value_t = 4, value_name = "K")]
    pub m: usize,

    /// Generator seed; identical seeds reproduce the full report.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    pub mode: ModeArg,

    /// Directory for report.json and failing instances.
    #[arg(long, short = 'o', default_value = "oracle-out", value_name = "DIR")]
    pub out: PathBuf,

    /// Re-run one saved instance instead of generating; other generation
    /// flags are ignored.
    #[arg(long, value_name = "FILE")]
    pub replay: Option<PathBuf>,
}

fn parse_range(text: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| format!("expected lo..hi, got {text}"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad lower bound {lo}"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad upper bound {hi}"))?;
    if lo < 1 || hi < lo {
        return Err(format!("need 1 <= lo <= hi, got {lo}..{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Serialize)]
struct FailureRecord {
    index: usize,
    n: usize,
    greedy_objective: f64,
    exhaustive_objective: f64,
    ratio: f64,
    file: String,
}

#[derive(Serialize)]
struct OracleReport {
    mode: ModeArg,
    instances: usize,
    n_range: [usize; 2],
    m: usize,
    seed: u64,
    matches: usize,
    match_rate: f64,
    mean_ratio: f64,
    max_ratio: f64,
    failures: Vec<FailureRecord>,
}

/// Objectives within this absolute slack count as a match; both sides come
/// from the same objective function over values in [0, 1].
const MATCH_TOLERANCE: f64 = 1e-12;

pub fn run(args: OracleArgs) -> Result<(), Failure> {
    if let Some(path) = &args.replay {
        let instance =
            Instance::load(path).with_context(|| format!("replay {}", path.display()))?;
        let (greedy_obj, exhaustive_obj) = solve_both(&instance)?;
        let matched = greedy_obj - exhaustive_obj <= MATCH_TOLERANCE;
        println!(
            "replay {}: n={} m={} greedy {:.6} exhaustive {:.6} ratio {:.6} -> {}",
            path.display(),
            instance.n,
            instance.m,
            greedy_obj,
            exhaustive_obj,
            ratio_of(greedy_obj, exhaustive_obj),
            if matched { "match" } else { "MISMATCH" }
        );
        return Ok(());
    }

    let (lo, hi) = args.n_range;
    if args.m == 0 {
        return Err(Failure::config(anyhow!("--m must be at least 1")));
    }
    if args.instances == 0 {
        return Err(Failure::config(anyhow!("--instances must be at least 1")));
    }
    if args.mode == ModeArg::Planted && lo < 2 * args.m {
        return Err(Failure::config(anyhow!(
            "planted mode needs n >= 2*m for two members per cluster; raise --n-range above {}",
            2 * args.m - 1
        )));
    }
    if combinations(hi, args.m.min(hi)) > EXHAUSTIVE_COMBINATION_LIMIT {
        return Err(Failure::config(anyhow!(
            "C({hi}, {}) exceeds the exhaustive search guard of {EXHAUSTIVE_COMBINATION_LIMIT}",
            args.m.min(hi)
        )));
    }

    std::fs::create_dir_all(&args.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut matches = 0usize;
    let mut ratio_sum = 0.0;
    let mut ratio_max = 1.0f64;
    let mut failures = Vec::new();

    for index in 0..args.instances {
        let n = rng.random_range(lo..=hi);
        let instance = match args.mode {
            ModeArg::Random => random_instance(n, args.m, &mut rng),
            ModeArg::Planted => planted_clusters_instance(n, args.m, &mut rng),
            ModeArg::Euclidean => euclidean_instance(n, args.m, &mut rng),
        };
        let (greedy_obj, exhaustive_obj) = solve_both(&instance)?;
        let ratio = ratio_of(greedy_obj, exhaustive_obj);
        ratio_sum += ratio;
        ratio_max = ratio_max.max(ratio);
        if greedy_obj - exhaustive_obj <= MATCH_TOLERANCE {
            matches += 1;
        } else {
            let file = format!("failing_{index:04}.json");
            instance
                .save(&args.out.join(&file))
                .with_context(|| format!("saving failing instance {file}"))?;
            failures.push(FailureRecord {
                index,
                n,
                greedy_objective: greedy_obj,
                exhaustive_objective: exhaustive_obj,
                ratio,
                file,
            });
        }
    }

    let report = OracleReport {
        mode: args.mode,
        instances: args.instances,
        n_range: [lo, hi],
        m: args.m,
        seed: args.seed,
        matches,
        match_rate: matches as f64 / args.instances as f64,
        mean_ratio: ratio_sum / args.instances as f64,
        max_ratio: ratio_max,
        failures,
    };
    write_json(&args.out.join("report.json"), &report)?;

    println!(
        "{:?} mode, {} instances (n in {}..{}, m={}): match rate {:.4}, mean ratio {:.6}, max ratio {:.6}",
        args.mode, args.instances, lo, hi, args.m, report.match_rate, report.mean_ratio, report.max_ratio
    );
    if !report.failures.is_empty() {
        println!(
            "{} mismatching instances written to {} for replay",
            report.failures.len(),
            args.out.display()
        );
    }
    Ok(())
}

fn solve_both(instance: &Instance) -> anyhow::Result<(f64, f64)> {
    let problem = instance.to_problem()?;
    let greedy = select::greedy(&problem, "oracle");
    let exhaustive = select::exhaustive(&problem, "oracle")?;
    Ok((greedy.objective, exhaustive.objective))
}

/// Greedy over optimal; 1 when both are 0 (greedy can never beat the
/// optimum, so a zero optimum with zero greedy is a perfect match).
fn ratio_of(greedy_obj: f64, exhaustive_obj: f64) -> f64 {
    if exhaustive_obj > 0.0 {
        greedy_obj / exhaustive_obj
    } else if greedy_obj <= MATCH_TOLERANCE {
        1.0
    } else {
        f64::INFINITY
    }
}

fn combinations(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut count: u128 = 1;
    for i in 0..k {
        count = count.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if count > EXHAUSTIVE_COMBINATION_LIMIT {
            return count;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parses_inclusive_bounds() {
        assert_eq!(parse_range("6..12").unwrap(), (6, 12));
        assert_eq!(parse_range(" 3 .. 3 ").unwrap(), (3, 3));
    }

    #[test]
    fn degenerate_ranges_are_rejected() {
        assert!(parse_range("12..6").is_err());
        assert!(parse_range("0..4").is_err());
        assert!(parse_range("6").is_err());
        assert!(parse_range("a..b").is_err());
    }

    #[test]
    fn ratio_handles_zero_optimum() {
        assert_eq!(ratio_of(0.0, 0.0), 1.0);
        assert!(ratio_of(0.5, 0.0).is_infinite());
        assert!((ratio_of(0.3, 0.2) - 1.5).abs() < 1e-12);
    }
}
