use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Transportation mode label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bus,
    Train,
    Car,
    Ferry,
    LightRail,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Bus, Mode::Train, Mode::Car, Mode::Ferry, Mode::LightRail];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bus => "bus",
            Mode::Train => "train",
            Mode::Car => "car",
            Mode::Ferry => "ferry",
            Mode::LightRail => "light_rail",
        }
    }

    pub fn index(self) -> usize {
        Mode::ALL.iter().position(|m| *m == self).unwrap()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "bus" => Ok(Mode::Bus),
            "train" => Ok(Mode::Train),
            "car" => Ok(Mode::Car),
            "ferry" => Ok(Mode::Ferry),
            "light_rail" | "lightrail" => Ok(Mode::LightRail),
            other => Err(Error::input("signal", format!("unknown mode '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("Light Rail".parse::<Mode>().unwrap(), Mode::LightRail);
        assert!("boat".parse::<Mode>().is_err());
    }
}
