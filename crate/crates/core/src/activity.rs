use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine recognised activity classes. Discriminants are the one-hot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityClass {
    BendDown0 = 0,
    SitDown0 = 1,
    StandUp0 = 2,
    WalkBack0 = 3,
    WalkBackM30 = 4,
    WalkBackP30 = 5,
    WalkForward0 = 6,
    WalkForwardP30 = 7,
    WalkForwardM30 = 8,
}

/// The underlying body motion, independent of where it happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motion {
    BendDown,
    SitDown,
    StandUp,
    WalkBack,
    WalkForward,
}

impl Motion {
    pub fn is_walking(self) -> bool {
        matches!(self, Motion::WalkBack | Motion::WalkForward)
    }
}

impl ActivityClass {
    pub const COUNT: usize = 9;

    pub const ALL: [ActivityClass; 9] = [
        ActivityClass::BendDown0,
        ActivityClass::SitDown0,
        ActivityClass::StandUp0,
        ActivityClass::WalkBack0,
        ActivityClass::WalkBackM30,
        ActivityClass::WalkBackP30,
        ActivityClass::WalkForward0,
        ActivityClass::WalkForwardP30,
        ActivityClass::WalkForwardM30,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class index {index} out of range 0..9")))
    }

    pub fn motion(self) -> Motion {
        use ActivityClass::*;
        match self {
            BendDown0 => Motion::BendDown,
            SitDown0 => Motion::SitDown,
            StandUp0 => Motion::StandUp,
            WalkBack0 | WalkBackM30 | WalkBackP30 => Motion::WalkBack,
            WalkForward0 | WalkForwardP30 | WalkForwardM30 => Motion::WalkForward,
        }
    }

    /// Broadside offset (degrees) at which the class is recorded.
    pub fn broadside_offset(self) -> f64 {
        use ActivityClass::*;
        match self {
            WalkBackM30 | WalkForwardM30 => -30.0,
            WalkBackP30 | WalkForwardP30 => 30.0,
            _ => 0.0,
        }
    }

    /// Classes performed in two-person scenes.
    pub fn is_two_person(self) -> bool {
        self.broadside_offset() != 0.0
    }

    pub fn from_motion(motion: Motion, offset_deg: f64) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.motion() == motion && c.broadside_offset() == offset_deg)
            .ok_or_else(|| {
                Error::invalid(format!("no class for {motion:?} at {offset_deg} degrees"))
            })
    }

    pub fn one_hot(self) -> [f64; 9] {
        let mut v = [0.0; 9];
        v[self.index()] = 1.0;
        v
    }

    /// Trial counts of the recorded dataset, used as default class proportions.
    pub fn reference_trial_count(self) -> usize {
        use ActivityClass::*;
        match self {
            WalkForward0 => 771,
            WalkBack0 => 498,
            BendDown0 => 120,
            StandUp0 => 71,
            SitDown0 => 131,
            WalkForwardP30 => 13,
            WalkForwardM30 => 41,
            WalkBackP30 => 31,
            WalkBackM30 => 40,
        }
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        use ActivityClass::*;
        match self {
            BendDown0 => "Bend Down (0)",
            SitDown0 => "Sit Down (0)",
            StandUp0 => "Stand Up (0)",
            WalkBack0 => "Walk Back (0)",
            WalkBackM30 => "Walk Back (-30)",
            WalkBackP30 => "Walk Back (+30)",
            WalkForward0 => "Walk Forward (0)",
            WalkForwardP30 => "Walk Forward (+30)",
            WalkForwardM30 => "Walk Forward (-30)",
        }
    }
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ActivityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| format!("{c:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown activity class '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_bijective() {
        for (i, c) in ActivityClass::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(ActivityClass::from_index(i).unwrap(), *c);
            let hot = c.one_hot();
            assert_eq!(hot.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(hot[i], 1.0);
        }
        assert!(ActivityClass::from_index(9).is_err());
    }

    #[test]
    fn motion_and_angle_roundtrip() {
        for c in ActivityClass::ALL {
            assert_eq!(ActivityClass::from_motion(c.motion(), c.broadside_offset()).unwrap(), c);
            assert_eq!(c.to_string().parse::<ActivityClass>().unwrap(), c);
        }
        assert!(ActivityClass::from_motion(Motion::SitDown, 30.0).is_err());
    }
}
