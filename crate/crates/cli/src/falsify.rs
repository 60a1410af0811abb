use impulse_iss_core::estimate::{run_trial, BetaGamma, FalsifyRanges, ISSCheckReport};
use impulse_iss_core::system::ImpulsiveSystem;
use rayon::prelude::*;

/// Runs the trials on the rayon pool. Results are aggregated by trial id, and
/// when several trials fail the lowest trial's error is returned, so the
/// outcome does not depend on scheduling.
pub fn check_iss_bound_parallel(
    sys: &ImpulsiveSystem,
    bg: &BetaGamma,
    ranges: &FalsifyRanges,
    seed: u64,
) -> impulse_iss_core::Result<ISSCheckReport> {
    let results: Vec<_> = (0..ranges.trials)
        .into_par_iter()
        .map(|i| run_trial(sys, bg, ranges, seed, i))
        .collect();
    let trials = results.into_iter().collect::<impulse_iss_core::Result<Vec<_>>>()?;
    Ok(ISSCheckReport::from_trials(seed, trials))
}
