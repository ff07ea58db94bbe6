//! Single-atom clock: laser pulses queue at the atom until the source's scout
//! arrives. Prints the queue for one setup and a count table.
//!
//! cargo run --example queue_clock

use talksim::chronometry::{queue_clock_count, simulate_queue_clock, ClockScenario, QueueEntry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = simulate_queue_clock(&ClockScenario::new(7, 2, 2)?)?;
    println!("queue at the atom for d_S = 7, d_L = 2, m = 2:");
    for (tick, entry) in &run.queue {
        match entry {
            QueueEntry::Laser { pulse } => println!("  tick {tick:>2}  laser pulse {pulse}"),
            QueueEntry::Source => println!("  tick {tick:>2}  source scout"),
        }
    }
    println!("reading: {}\n", run.reading.laser_count);

    println!("{:>4} {:>4} {:>4} {:>6}", "d_S", "d_L", "m", "count");
    for m in [1, 2, 3] {
        for d in [5, 10, 20] {
            let s = ClockScenario::new(d, 1, m)?;
            let simulated = simulate_queue_clock(&s)?.reading;
            assert_eq!(simulated, queue_clock_count(&s));
            println!("{d:>4} {:>4} {m:>4} {:>6}", 1, simulated.laser_count);
        }
    }
    Ok(())
}
