//! Run a small simulation study and print the summary table.
//!
//! `cargo run --release -p bpsm --example study -- [n] [J] [K] [seed] [misspecified] [caliper]`

use bpsm::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let caliper = arg(5, "false").parse::<bool>()?;
    let cfg = SimConfig {
        n: arg(0, "500").parse()?,
        replications: arg(1, "200").parse()?,
        draws: arg(2, "500").parse()?,
        seed: arg(3, "1").parse()?,
        misspecified: arg(4, "false").parse()?,
        with_replacement: !caliper,
        caliper_sd: caliper.then_some(0.5),
        ..SimConfig::default()
    };
    let start = std::time::Instant::now();
    let out = bpsm::run_study(&cfg)?;
    println!(
        "{:<6}{:>10}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}",
        "", "matched%", "ATT", "2.5%", "97.5%", "bias", "MAB", "RMSE", "truth"
    );
    for r in &out.report.rows {
        println!(
            "{:<6}{:>10.1}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}",
            r.method,
            r.pct_matched_at_least_once,
            r.att_mean,
            r.ci_lo,
            r.ci_hi,
            r.bias,
            r.mab,
            r.rmse,
            r.true_att_mean
        );
    }
    println!(
        "failed: {}  elapsed: {:.1?}",
        out.report.failed,
        start.elapsed()
    );
    Ok(())
}
