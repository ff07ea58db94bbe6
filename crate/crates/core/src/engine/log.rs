use std::fmt;

use crate::lattice::{NodeId, RibId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Scout,
    Query,
    Void,
    Lottery,
    DegenerateLottery,
    Refusal,
    Confirm,
    Detect,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::Scout => "scout",
            SignalKind::Query => "query",
            SignalKind::Void => "void",
            SignalKind::Lottery => "lottery",
            SignalKind::DegenerateLottery => "lottery-degenerate",
            SignalKind::Refusal => "refusal",
            SignalKind::Confirm => "confirm",
            SignalKind::Detect => "detect",
        }
    }
}

/// One line of the trial log.
///
/// `value` is the phase in radians for scouts, the weight for queries and
/// lotteries, and absent otherwise. Lotteries have no rib; `to` is then the
/// winning detector.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: SignalKind,
    pub rib: Option<RibId>,
    pub from: NodeId,
    pub to: NodeId,
    pub value: Option<f64>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.tick, self.kind.as_str())?;
        match self.rib {
            Some(r) => write!(f, "{r} ")?,
            None => write!(f, "- ")?,
        }
        write!(f, "{}->{} ", self.from, self.to)?;
        match self.value {
            Some(v) => write!(f, "{v:.12}"),
            None => write!(f, "-"),
        }
    }
}
