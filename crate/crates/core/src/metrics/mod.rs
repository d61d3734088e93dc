//! Systemic-risk indices and statistics over scenario batches.

pub mod amplification;
pub mod channels;
pub mod fsri;
pub mod stats;

pub use amplification::{
    amplification_fits, amplification_records, ib_amplification, AmplificationFits, AmplificationRecord,
    AmplificationStats, ScenarioSpread,
};
pub use channels::{channel_decomposition, run_batch, summarize, Channel, ChannelDecomposition, ChannelSummary, Regime};
pub use fsri::{firm_risk, fsri, fsri_plus, fsri_profile, FirmRiskRecord, FsriProfile};
pub use stats::{box_stats, ccdf, ols_fit, quantile, risk_measures, welch_test, BoxStats, FitResult, RiskSummary, WelchTest};
