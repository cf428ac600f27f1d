//! The end-to-end plan generator: instrumentation, rewrites, optional join
//! order choices and SQL, with choice points exposed to the optimizer.

use alloc::string::String;

use crate::algebra::QueryGraph;
use crate::cbo::{optimize, CboError, ChoiceHook, Clock, Report, StopRule, Strategy};
use crate::executor::{plan_cost, CostParams, ExecError, Statistics};
use crate::instrument::{instrument_query, AggPolicy, InstrumentError};
use crate::pat::{apply_pats, reorder_joins, PatConfig, PatError};
use crate::properties::BaseKeys;
use crate::sqlgen::{to_sql, SqlError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Pat(#[from] PatError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Choice(#[from] CboError),
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    /// Instrument the query for provenance; `None` passes it through.
    pub instrument: Option<AggPolicy>,
    /// Rewrites to run; `None` skips the rewrite stage.
    pub pats: Option<PatConfig>,
    pub base_keys: BaseKeys,
    /// Expose the input order of every join as a choice point.
    pub reorder_joins: bool,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            instrument: Some(AggPolicy::Choose),
            pats: Some(PatConfig::default()),
            base_keys: BaseKeys::new(),
            reorder_joins: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: QueryGraph,
    pub sql: String,
}

impl Pipeline {
    pub fn generate(
        &self,
        query: &QueryGraph,
        hook: &mut dyn ChoiceHook,
    ) -> Result<Generated, PipelineError> {
        let mut g = match self.instrument {
            Some(policy) => instrument_query(query, policy, hook)?,
            None => query.clone(),
        };
        if let Some(config) = &self.pats {
            g = apply_pats(&g, config, &self.base_keys, hook, None)?;
        }
        if self.reorder_joins {
            g = reorder_joins(&g, hook)?;
        }
        let sql = to_sql(&g)?.text();
        Ok(Generated { graph: g, sql })
    }

    /// Search the plans this pipeline can produce for `query`, costed with
    /// the estimator over `stats`.
    pub fn optimize(
        &self,
        query: &QueryGraph,
        stats: &Statistics,
        params: CostParams,
        strategy: Strategy,
        stop: StopRule,
        clock: &mut dyn Clock,
    ) -> Result<Report<Generated>, PipelineError> {
        optimize(
            |hook| self.generate(query, hook),
            |p: &Generated| Ok(plan_cost(&p.graph, stats, params)?),
            strategy,
            stop,
            clock,
        )
    }
}
