//! Brightness arithmetic and the filtered-arm efficiency budget.

use narrowband_pairs::correlator::{brightness_report, efficiency_budget, filtered_arm_budget};

fn main() -> narrowband_pairs::Result<()> {
    let report = brightness_report(4.8, 70.0, 0.45, 22.4e6)?;
    print!("{}", report.report());
    let budget = filtered_arm_budget(0.88, 0.42, 0.45);
    for (name, value) in &budget {
        println!("  {name}: {value}");
    }
    println!("filtered arm detection probability: {:.4}", efficiency_budget(&budget)?);
    Ok(())
}
