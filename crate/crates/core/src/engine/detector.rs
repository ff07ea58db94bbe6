use num_complex::Complex64;

use super::phase::Phase;
use super::EngineError;
use crate::lattice::NodeId;

/// Running amplitude sum held by a detector while scouts come in.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRecord {
    pub detector: NodeId,
    pub amplitude: Complex64,
    pub intensity: f64,
    pub arrivals: u64,
    pub closed: bool,
}

impl DetectorRecord {
    pub fn new(detector: NodeId) -> Self {
        DetectorRecord {
            detector,
            amplitude: Complex64::new(0.0, 0.0),
            intensity: 0.0,
            arrivals: 0,
            closed: false,
        }
    }

    /// Adds one unit phasor.
    pub fn accept(&mut self, phase: Phase) -> Result<(), EngineError> {
        if self.closed {
            return Err(EngineError::ProtocolOrder(format!(
                "arrival at closed detector {}",
                self.detector
            )));
        }
        self.amplitude += phase.phasor();
        self.arrivals += 1;
        Ok(())
    }
}

/// Stops summation and fixes `I = |Φ|²`.
pub fn close_detector(mut record: DetectorRecord) -> Result<DetectorRecord, EngineError> {
    if record.closed {
        return Err(EngineError::ProtocolOrder(format!(
            "detector {} closed twice",
            record.detector
        )));
    }
    record.intensity = record.amplitude.norm_sqr();
    record.closed = true;
    Ok(record)
}
