//! Physical time from hidden time.
//!
//! A single clock atom (a detector) receives scouts from two emitters: the
//! source at `source_distance` hops and a laser at `laser_distance` hops that
//! fires every `cadence` ticks, starting with the source's departure. The
//! clock reading is the number of laser scouts that queue up at the atom up to
//! and including the tick at which the source's scout arrives.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{propagate_scouts_from, EngineError};
use crate::lattice::{build_clock_chain, Admissibility, LatticeError, NodeKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChronometryError {
    #[error("{name} must be at least 1")]
    ZeroParameter { name: &'static str },
    #[error("speed {0} is outside [0, 1)")]
    InvalidSpeed(f64),
    #[error("proper time {0} must be positive and finite")]
    InvalidProperTime(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Distances in hops, cadence in hidden ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClockScenario {
    pub source_distance: u64,
    pub laser_distance: u64,
    pub cadence: u64,
}

impl ClockScenario {
    pub fn new(
        source_distance: u64,
        laser_distance: u64,
        cadence: u64,
    ) -> Result<Self, ChronometryError> {
        for (name, v) in [
            ("source distance", source_distance),
            ("laser distance", laser_distance),
            ("cadence", cadence),
        ] {
            if v == 0 {
                return Err(ChronometryError::ZeroParameter { name });
            }
        }
        Ok(ClockScenario {
            source_distance,
            laser_distance,
            cadence,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClockReading {
    pub laser_count: u64,
}

/// Laser arrivals in ticks `(0, d_S]`: pulse `k` leaves at `k·m` and lands at
/// `k·m + d_L`.
pub fn queue_clock_count(s: &ClockScenario) -> ClockReading {
    let laser_count = if s.source_distance >= s.laser_distance {
        (s.source_distance - s.laser_distance) / s.cadence + 1
    } else {
        0
    };
    ClockReading { laser_count }
}

/// Who put a scout into the atom's queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueueEntry {
    Laser { pulse: u64 },
    Source,
}

/// The atom's arrival queue, in tick order, ending with the source's scout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClockRun {
    pub scenario: ClockScenario,
    pub queue: Vec<(u64, QueueEntry)>,
    pub reading: ClockReading,
}

/// Runs both emitters over a chain lattice and counts laser scouts in the
/// atom's queue until the source's scout arrives. Scouts are labelled by
/// their emitter, so the atom never confuses the two streams.
pub fn simulate_queue_clock(s: &ClockScenario) -> Result<ClockRun, ChronometryError> {
    let hops = |v: u64| usize::try_from(v).expect("hop counts fit in usize");
    let lattice = build_clock_chain(hops(s.source_distance), hops(s.laser_distance))?;
    let laser = lattice
        .nodes_of_kind(NodeKind::LaserEmitter)
        .next()
        .expect("clock chain has a laser");
    let first_tick = |origin| -> Result<u64, ChronometryError> {
        let trace = propagate_scouts_from(&lattice, origin, Admissibility::ForwardDag, 1, false)?;
        let arrival = trace
            .arrivals
            .first()
            .ok_or_else(|| EngineError::Invariant("clock atom unreachable".into()))?;
        Ok(arrival.tick)
    };
    let source_tick = first_tick(lattice.source())?;
    let laser_tick = first_tick(laser)?;

    let mut queue = Vec::new();
    let mut pulse = 0;
    loop {
        let tick = pulse * s.cadence + laser_tick;
        if tick > source_tick {
            break;
        }
        queue.push((tick, QueueEntry::Laser { pulse }));
        pulse += 1;
    }
    queue.push((source_tick, QueueEntry::Source));
    Ok(ClockRun {
        scenario: *s,
        queue,
        reading: ClockReading { laser_count: pulse },
    })
}

/// Coordinate time of a clock moving at `v` (units of c) whose own time is
/// `tau`: solving `t² = v²t² + τ²` gives `t = τ / √(1 − v²)`.
pub fn dilation_time(tau: f64, v: f64) -> Result<f64, ChronometryError> {
    if !(v.is_finite() && (0.0..1.0).contains(&v)) {
        return Err(ChronometryError::InvalidSpeed(v));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(ChronometryError::InvalidProperTime(tau));
    }
    Ok(tau / (1.0 - v * v).sqrt())
}
