//! Prints envelope coverage of weather-driven and weather-ignorant scenarios.

use windflex::harness::{compare_coverage, CoverageSetup};

fn main() -> anyhow::Result<()> {
    let setup = CoverageSetup::default();
    let start = std::time::Instant::now();
    let r = compare_coverage(&setup)?;
    println!("periods {}  ci {}", r.periods, setup.ci);
    println!(
        "weather-driven coverage {:.4}  mean width {:.2} MW",
        r.weather_driven.rate, r.weather_driven.mean_width
    );
    println!(
        "benchmark      coverage {:.4}  mean width {:.2} MW",
        r.benchmark.rate, r.benchmark.mean_width
    );
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
