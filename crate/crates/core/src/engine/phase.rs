use std::f64::consts::TAU;

/// Phase variable carried by scout signals, held as a fraction of a turn in
/// `[0, 1)` so that whole-wavelength ribs reduce exactly.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Phase {
    turns: f64,
}

fn wrap_turns(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl Phase {
    pub const ZERO: Phase = Phase { turns: 0.0 };

    pub fn from_radians(radians: f64) -> Self {
        Phase {
            turns: wrap_turns(radians / TAU),
        }
    }

    pub fn from_turns(turns: f64) -> Self {
        Phase {
            turns: wrap_turns(turns),
        }
    }

    /// Radians in `[0, 2π)`.
    pub fn radians(self) -> f64 {
        self.turns * TAU
    }

    pub fn turns(self) -> f64 {
        self.turns
    }

    /// Unit phasor `(cos φ, sin φ)`.
    pub fn phasor(self) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, self.radians())
    }

    /// Shortest angular separation, in radians within `[0, π]`.
    pub fn circular_distance(self, other: Phase) -> f64 {
        let d = (self.turns - other.turns).abs();
        d.min(1.0 - d) * TAU
    }
}

/// Rotates `phase` by one rib: `φ + 2π·l/λ`, reduced mod 2π.
pub fn next_phase(phase: Phase, length: f64, wavelength: f64) -> Phase {
    Phase::from_turns(phase.turns + wrap_turns(length / wavelength))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalClass {
    SameSource,
    NewSource,
}

/// Phase-jump test a detector can use to tell scouts of one emitter from
/// those of another: arrivals within `eps_same` radians (inclusive, measured
/// around the circle) belong to the same source.
pub fn classify_arrival(prev: Phase, new: Phase, eps_same: f64) -> ArrivalClass {
    if prev.circular_distance(new) <= eps_same {
        ArrivalClass::SameSource
    } else {
        ArrivalClass::NewSource
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rotation_examples() {
        assert_eq!(next_phase(Phase::ZERO, 1.0, 1.0).radians(), 0.0);
        assert_eq!(next_phase(Phase::ZERO, 0.5, 1.0).radians(), PI);
        let start = Phase::from_radians(3.0 * PI / 2.0);
        assert_eq!(next_phase(start, 0.75, 1.0).radians(), PI);
    }

    #[test]
    fn classification_examples() {
        let p = Phase::from_radians;
        assert_eq!(
            classify_arrival(p(0.30), p(0.31), 0.1),
            ArrivalClass::SameSource
        );
        assert_eq!(
            classify_arrival(p(0.0), p(2.0), 0.1),
            ArrivalClass::NewSource
        );
        assert_eq!(
            classify_arrival(p(0.05), p(TAU - 0.03), 0.1),
            ArrivalClass::SameSource
        );
    }

    proptest! {
        #[test]
        fn stays_reduced(start in 0.0..TAU, l in 1e-6..50.0f64, lambda in 1e-3..10.0f64) {
            let next = next_phase(Phase::from_radians(start), l, lambda);
            prop_assert!((0.0..TAU).contains(&next.radians()));
            let direct = Phase::from_radians(start + TAU * l / lambda);
            prop_assert!(next.circular_distance(direct) < 1e-9);
        }
    }
}
