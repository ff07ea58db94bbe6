//! Coordinate time of a moving clock for a few speeds.
//!
//! cargo run --example dilation -- [tau]

use talksim::chronometry::dilation_time;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tau: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1.0);
    println!("{:>6} {:>10}", "v", "t");
    for v in [0.0, 0.3, 0.6, 0.8, 0.9, 0.99, 0.999] {
        println!("{v:>6} {:>10.6}", dilation_time(tau, v)?);
    }
    Ok(())
}
