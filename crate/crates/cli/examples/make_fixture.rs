//! Regenerates `fixtures/demo_station.csv`.

fn main() {
    let csv = flowcast_cli::run::demo_csv(flowcast_cli::run::DEMO_SEED).expect("generate fixture");
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/demo_station.csv");
    std::fs::write(path, csv).expect("write fixture");
}
