//! Attacks on privatized gaze: wavelet denoising, learned inverse
//! regression, and privatizing the reference set.

mod regressor;
mod threat;
mod wavelet;

pub use regressor::{
    apply_inverse, regressor_grad_check, regressor_gradient, train_inverse_regressor,
    ChannelNorm, InverseRegressor, RegressorHyper, HIDDEN_CHANNELS, KERNEL, MIN_PAIRS,
};
pub use threat::{
    exemplar_pairs, run_threat_scenario, run_threat_scenario_with, split_trials, Scenario,
    ThreatOptions, ThreatReport, ThreatRow,
};
pub use wavelet::{
    denoise_channel, dwt_step, estimate_sigma, idwt_step, wavedec, wavelet_denoise, waverec,
    Threshold, WaveletConfig,
};
