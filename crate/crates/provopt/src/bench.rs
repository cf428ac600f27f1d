//! Stacked-aggregation benchmark comparing the aggregation methods with and
//! without rewrites.

use std::time::Instant;

use provopt_core::algebra::Schema;
use provopt_core::cbo::{FirstChoice, SimulatedClock, StopRule, Strategy};
use provopt_core::executor::{evaluate, CostParams, Statistics};
use provopt_core::instrument::{reenact_relation, AggMethod, AggPolicy};
use provopt_core::pat::{apply_pats, merge_projections_unguarded, PatConfig, Rule};
use provopt_core::pipeline::{Pipeline, PipelineError};
use provopt_core::workload::{stacked_aggregation, stacked_data, update_chain};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub aggs: usize,
    pub rows: usize,
    pub groups: i64,
    pub fan_in: i64,
    pub seed: u64,
    pub reenact_depth: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    /// `join`, `window` or `cbo`.
    pub method: &'static str,
    pub heuristics: bool,
    pub est_cost: f64,
    pub runtime_ms: f64,
    /// Plans the optimizer enumerated.
    pub plans: usize,
    pub path: Vec<usize>,
}

/// Total expression sizes of a reenacted update chain.
#[derive(Debug, Clone)]
pub struct ReenactSizes {
    pub depth: usize,
    pub single_update: usize,
    /// After attribute factoring and the guarded projection merge.
    pub guarded: usize,
    /// After merging every projection pair unconditionally.
    pub unguarded: usize,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub reenact: Option<ReenactSizes>,
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, PipelineError> {
    let query = stacked_aggregation(config.aggs, config.fan_in);
    let db = stacked_data(config.rows, config.groups, config.seed);
    let stats = Statistics::from_database(&db);
    let methods = [
        ("join", AggPolicy::Fixed(AggMethod::Join)),
        ("window", AggPolicy::Fixed(AggMethod::Window)),
        ("cbo", AggPolicy::Choose),
    ];
    let mut rows = Vec::new();
    for (method, policy) in methods {
        for heuristics in [true, false] {
            let pipeline = Pipeline {
                instrument: Some(policy),
                pats: heuristics.then(PatConfig::default),
                ..Pipeline::default()
            };
            let report = pipeline.optimize(
                &query,
                &stats,
                CostParams::default(),
                Strategy::Sequential,
                StopRule::None,
                &mut SimulatedClock { per_iteration: 0.0 },
            )?;
            let Some(best) = report.best.as_ref() else { continue };
            let start = Instant::now();
            evaluate(&best.plan.graph, &db)?;
            rows.push(BenchRow {
                method,
                heuristics,
                est_cost: best.cost,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                plans: report.iterations(),
                path: best.path.clone(),
            });
        }
    }
    let reenact = config.reenact_depth.map(reenact_sizes).transpose()?;
    Ok(BenchReport { rows, reenact })
}

pub fn reenact_sizes(depth: usize) -> Result<ReenactSizes, PipelineError> {
    let schema = Schema::from_names(["a", "b"]).expect("distinct names");
    let single = reenact_relation("R", schema.clone(), &update_chain("R", 1))?;
    let chain = reenact_relation("R", schema, &update_chain("R", depth))?;
    let config = PatConfig::only(&[Rule::FactorAttributes, Rule::MergeProjections]);
    let guarded = apply_pats(&chain, &config, &Default::default(), &mut FirstChoice, None)?;
    Ok(ReenactSizes {
        depth,
        single_update: single.total_expr_size(),
        guarded: guarded.total_expr_size(),
        unguarded: merge_projections_unguarded(&chain).total_expr_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_aggregation_enumerates_both_methods() {
        let config = BenchConfig { aggs: 1, rows: 40, groups: 8, fan_in: 2, seed: 1, reenact_depth: None };
        let report = run_bench(&config).unwrap();
        assert_eq!(report.rows.len(), 6);
        let cbo: Vec<_> = report.rows.iter().filter(|r| r.method == "cbo").collect();
        assert!(cbo.iter().all(|r| r.plans == 2));
        for r in &report.rows {
            assert!(r.method == "cbo" || r.plans == 1);
        }
    }
}
