//! Offline retrieval evaluation, online-metric calculators and the
//! linear-regression reorderer.

mod offline;
mod online;
mod reorder;

pub use offline::{
    build_eval_tasks, precision_at_k, recall_at_k, run_offline_eval, run_offline_eval_with_threads, task_category,
    CategoryRow, EvalMode, EvalReport, EvalTask, DEFAULT_K,
};
pub use online::{
    compute_online_metrics, read_interaction_logs, relative_score, simulate_interactions, write_interaction_logs,
    InteractionLog, OnlineMetrics, SimulationConfig,
};
pub use reorder::{reorder_products, Features, ReorderOutcome};
