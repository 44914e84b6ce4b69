//! Writes the generated demonstration tables as CSV files.
//!
//! ```text
//! cargo run -p metricscope-core --example export_datasets -- data
//! ```

use metricscope_core::synthetic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    std::fs::create_dir_all(&dir)?;
    for (name, ds) in [("cars_synthetic.csv", synthetic::cars()), ("agro_synthetic.csv", synthetic::agro())] {
        let path = std::path::Path::new(&dir).join(name);
        ds.write_csv(std::fs::File::create(&path)?)?;
        println!("{} rows -> {}", ds.len(), path.display());
    }
    Ok(())
}
