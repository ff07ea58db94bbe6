//! One detector fed by two chains: sweep the length of the second chain over
//! one wavelength and compare the engine's intensity with `2 + 2 cos(2π δ/λ)`.
//!
//! cargo run --example two_path_interference

use std::f64::consts::TAU;

use talksim::lattice::build_two_path;
use talksim::{Protocol, ProtocolConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wavelength = 1.0;
    println!("{:>6} {:>12} {:>12}", "delta", "engine I", "closed form");
    for step in 0..=8 {
        let delta = step as f64 / 8.0;
        let lattice = build_two_path(2.0, 2.0 + delta, 2, wavelength)?;
        let protocol = Protocol::prepare(&lattice, ProtocolConfig::default())?;
        let record = &protocol.records()[0];
        let expected = 2.0 + 2.0 * (TAU * delta / wavelength).cos();
        println!("{delta:>6.3} {:>12.9} {expected:>12.9}", record.intensity);
    }
    Ok(())
}
