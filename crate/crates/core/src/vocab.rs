//! Closed vocabularies for markets and GICS sectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Country {
    Aus,
    Bra,
    Chn,
    Esp,
    Fra,
    Gbr,
    Hkg,
    Ind,
    Jpn,
    Kor,
    Nld,
    Sgp,
    Usa,
    Can,
    Ger,
}

impl Country {
    pub const ALL: [Country; 15] = [
        Country::Aus,
        Country::Bra,
        Country::Chn,
        Country::Esp,
        Country::Fra,
        Country::Gbr,
        Country::Hkg,
        Country::Ind,
        Country::Jpn,
        Country::Kor,
        Country::Nld,
        Country::Sgp,
        Country::Usa,
        Country::Can,
        Country::Ger,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Country::Aus => "AUS",
            Country::Bra => "BRA",
            Country::Chn => "CHN",
            Country::Esp => "ESP",
            Country::Fra => "FRA",
            Country::Gbr => "GBR",
            Country::Hkg => "HKG",
            Country::Ind => "IND",
            Country::Jpn => "JPN",
            Country::Kor => "KOR",
            Country::Nld => "NLD",
            Country::Sgp => "SGP",
            Country::Usa => "USA",
            Country::Can => "CAN",
            Country::Ger => "GER",
        }
    }

    /// Position in [`Country::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Country {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Country::ALL
            .iter()
            .copied()
            .find(|c| c.code() == up)
            .ok_or_else(|| Error::Config(format!("unknown country code '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Energy,
    Materials,
    Industrials,
    ConsumerDiscretionary,
    ConsumerStaples,
    HealthCare,
    Financials,
    InformationTechnology,
    Telecommunication,
    Utilities,
}

impl Sector {
    pub const ALL: [Sector; 10] = [
        Sector::Energy,
        Sector::Materials,
        Sector::Industrials,
        Sector::ConsumerDiscretionary,
        Sector::ConsumerStaples,
        Sector::HealthCare,
        Sector::Financials,
        Sector::InformationTechnology,
        Sector::Telecommunication,
        Sector::Utilities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::Energy => "Energy",
            Sector::Materials => "Materials",
            Sector::Industrials => "Industrials",
            Sector::ConsumerDiscretionary => "Consumer Discretionary",
            Sector::ConsumerStaples => "Consumer Staples",
            Sector::HealthCare => "Health Care",
            Sector::Financials => "Financials",
            Sector::InformationTechnology => "Information Technology",
            Sector::Telecommunication => "Telecommunication Services",
            Sector::Utilities => "Utilities",
        }
    }

    /// Short label used in node ids and table headers.
    pub fn short(self) -> &'static str {
        match self {
            Sector::Energy => "ENERGY",
            Sector::Materials => "MATER",
            Sector::Industrials => "INDUS",
            Sector::ConsumerDiscretionary => "CONSD",
            Sector::ConsumerStaples => "CONSS",
            Sector::HealthCare => "HEALTH",
            Sector::Financials => "FINAN",
            Sector::InformationTechnology => "IT",
            Sector::Telecommunication => "TELEC",
            Sector::Utilities => "UTIL",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Sector::Energy => &["energy"],
            Sector::Materials => &["materials", "material", "material.", "mater"],
            Sector::Industrials => &["industrials", "indus", "indus."],
            Sector::ConsumerDiscretionary => &["consumer discretionary", "cons.d.", "cons. d.", "consd"],
            Sector::ConsumerStaples => &["consumer staples", "cons.s.", "cons. s.", "conss"],
            Sector::HealthCare => &["health care", "health", "healthcare"],
            Sector::Financials => &["financials", "finan", "finan.", "financial"],
            Sector::InformationTechnology => &["information technology", "it"],
            Sector::Telecommunication => &["telecommunication services", "telecommunication", "telec", "telec."],
            Sector::Utilities => &["utilities", "util", "util."],
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let low = s.trim().to_ascii_lowercase();
        Sector::ALL
            .iter()
            .copied()
            .find(|sec| sec.aliases().contains(&low.as_str()) || sec.short().eq_ignore_ascii_case(&low))
            .ok_or_else(|| Error::Config(format!("unknown sector '{s}'")))
    }
}

macro_rules! string_serde {
    ($ty:ty, $to:ident) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.$to())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Country, code);
string_serde!(Sector, name);
