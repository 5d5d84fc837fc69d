//! Writes the synthetic weather files of the bundled toy study.
//!
//! `cargo run -p windflex --example toy_assets -- assets/toy`

use std::fs::File;
use std::path::PathBuf;

use chrono::NaiveDate;
use windflex_core::synthetic::{generate, SyntheticConfig};
use windflex_core::weather::write_feature_table;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "assets/toy".into()));
    std::fs::create_dir_all(&dir)?;
    let at = |m, d| NaiveDate::from_ymd_opt(2013, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let history = generate(&SyntheticConfig {
        start: at(1, 1),
        hours: 90 * 24,
        seed: 2013,
        ..Default::default()
    })?;
    let day = generate(&SyntheticConfig {
        start: at(4, 2),
        hours: 24,
        seed: 402,
        mean_speed: 10.0,
        ..Default::default()
    })?;
    for (name, table) in [
        ("history_forecast.csv", &history.forecast),
        ("history_actual.csv", &history.actual),
        ("forecast_day.csv", &day.forecast),
        ("realized_day.csv", &day.actual),
    ] {
        write_feature_table(table, File::create(dir.join(name))?)?;
    }
    println!("wrote weather files to {}", dir.display());
    Ok(())
}
