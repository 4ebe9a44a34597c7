//! Set Allocation Counters: two bits per LLC set encoding how many ways
//! of that set are reserved for tracking entries. States only escalate
//! within a tracking window and reset in bulk at the window boundary.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SacState {
    S0,
    S1,
    S2,
    S3,
}

impl SacState {
    pub fn reserved_ways(self) -> u64 {
        match self {
            SacState::S0 => 0,
            SacState::S1 => 1,
            SacState::S2 => 2,
            SacState::S3 => 8,
        }
    }

    pub fn next(self) -> Option<SacState> {
        match self {
            SacState::S0 => Some(SacState::S1),
            SacState::S1 => Some(SacState::S2),
            SacState::S2 => Some(SacState::S3),
            SacState::S3 => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            SacState::S0 => 0,
            SacState::S1 => 1,
            SacState::S2 => 2,
            SacState::S3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SacError {
    /// The set is already at the absolute maximum state.
    #[error("set {set} already at S3")]
    AlreadyMax { set: u64 },
    /// The set reached the configured cap (below S3).
    #[error("set {set} at configured cap {cap:?}")]
    AtCap { set: u64, cap: SacState },
}

/// One escalation step: the new state plus the way indices that became
/// reserved by this step. Reservation order is fixed: way 0, then way 1,
/// then ways 2 through 7.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Escalation {
    pub state: SacState,
    pub ways_added: std::ops::Range<u64>,
}

#[derive(Debug, Clone)]
pub struct SacTable {
    states: Vec<SacState>,
    max_state: SacState,
}

impl SacTable {
    pub fn new(llc_sets: u64, max_state: SacState) -> Self {
        SacTable {
            states: vec![SacState::S0; llc_sets as usize],
            max_state,
        }
    }

    pub fn get(&self, set: u64) -> SacState {
        self.states[set as usize]
    }

    /// SRAM cost of the table: two bits per set.
    pub fn storage_bytes(llc_sets: u64) -> u64 {
        (llc_sets * 2).div_ceil(8)
    }

    pub fn max_state(&self) -> SacState {
        self.max_state
    }

    pub fn escalate(&mut self, set: u64) -> Result<Escalation, SacError> {
        let cur = self.states[set as usize];
        let next = cur.next().ok_or(SacError::AlreadyMax { set })?;
        if cur >= self.max_state {
            return Err(SacError::AtCap {
                set,
                cap: self.max_state,
            });
        }
        self.states[set as usize] = next;
        Ok(Escalation {
            state: next,
            ways_added: cur.reserved_ways()..next.reserved_ways(),
        })
    }

    pub fn reset_all(&mut self) {
        self.states.fill(SacState::S0);
    }

    /// Force every set to a state; used by the permanently-reserved variant.
    pub fn fill(&mut self, state: SacState) {
        self.states.fill(state);
    }

    /// Counts of sets per state, S0 through S3.
    pub fn histogram(&self) -> [u64; 4] {
        let mut h = [0u64; 4];
        for s in &self.states {
            h[s.index()] += 1;
        }
        h
    }

    pub fn reserved_ways_total(&self) -> u64 {
        self.states.iter().map(|s| s.reserved_ways()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn escalation_ladder_and_way_ranges() {
        let mut sac = SacTable::new(4, SacState::S3);
        assert_eq!(sac.get(2), SacState::S0);

        let e = sac.escalate(2).unwrap();
        assert_eq!((e.state, e.ways_added), (SacState::S1, 0..1));
        let e = sac.escalate(2).unwrap();
        assert_eq!((e.state, e.ways_added), (SacState::S2, 1..2));
        let e = sac.escalate(2).unwrap();
        assert_eq!((e.state, e.ways_added), (SacState::S3, 2..8));
        assert_eq!(sac.escalate(2), Err(SacError::AlreadyMax { set: 2 }));
        // untouched sets stay at S0
        assert_eq!(sac.get(0), SacState::S0);

        sac.reset_all();
        assert_eq!(sac.get(2), SacState::S0);
    }

    #[test]
    fn capped_table_stops_below_max() {
        let mut sac = SacTable::new(2, SacState::S1);
        sac.escalate(0).unwrap();
        assert_eq!(
            sac.escalate(0),
            Err(SacError::AtCap {
                set: 0,
                cap: SacState::S1
            })
        );
    }

    #[test]
    fn storage_arithmetic() {
        // 2 bits per set: 16K sets pack into 4 KiB.
        assert_eq!(16_384 * 2 / 8, 4096);
    }

    proptest! {
        /// States are monotone within a window no matter the escalation
        /// request order, and reserved-way counts match the state.
        #[test]
        fn monotone_and_consistent(ops in proptest::collection::vec(0u64..8, 0..64)) {
            let mut sac = SacTable::new(8, SacState::S3);
            let mut prev: Vec<SacState> = (0..8).map(|s| sac.get(s)).collect();
            for set in ops {
                let _ = sac.escalate(set);
                for s in 0..8u64 {
                    let cur = sac.get(s);
                    prop_assert!(cur >= prev[s as usize]);
                    prev[s as usize] = cur;
                }
            }
            let hist = sac.histogram();
            prop_assert_eq!(hist.iter().sum::<u64>(), 8);
            let ways: u64 = hist[1] + 2 * hist[2] + 8 * hist[3];
            prop_assert_eq!(ways, sac.reserved_ways_total());
        }
    }
}
