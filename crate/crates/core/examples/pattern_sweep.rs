//! Write-current signature of every technology: mean page current for
//! 1..=8 toggled bits from all-zeros and all-ones starting states.

use nvm_bench::characterization::{sweep_profile, InitialState, SweepConfig};
use nvm_bench::profile::TechnologyProfile;

fn main() -> nvm_bench::Result<()> {
    let cfg = SweepConfig {
        cycles: 200,
        ..SweepConfig::default()
    };
    for profile in TechnologyProfile::defaults() {
        let sweep = sweep_profile(&profile, 1, &cfg)?;
        println!("{}", profile.technology.display_name());
        for state in [InitialState::AllZeros, InitialState::AllOnes] {
            let means: Vec<String> = sweep
                .cells_for(state)
                .map(|c| format!("{:.4}", c.mean_page_current))
                .collect();
            let fit = sweep.fit(state).expect("eight groups");
            println!(
                "  {state:?}: [{}]  slope {:+.3e}/bit p={:.3}",
                means.join(", "),
                fit.slope,
                fit.p_value
            );
        }
    }
    Ok(())
}
