//! Static registries for domain and territory codes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Purpose group an application belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainCode {
    Research,
    Social,
    Financial,
}

impl DomainCode {
    pub const ALL: [DomainCode; 3] = [DomainCode::Research, DomainCode::Social, DomainCode::Financial];

    pub fn code(self) -> u32 {
        match self {
            DomainCode::Research => 1,
            DomainCode::Social => 2,
            DomainCode::Financial => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainCode::Research => "research",
            DomainCode::Social => "social",
            DomainCode::Financial => "financial",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for DomainCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// ISO-3166 numeric country code, as reported by a device's location provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountryCode(pub u16);

impl CountryCode {
    pub const IRELAND: CountryCode = CountryCode(372);
    pub const UNITED_STATES: CountryCode = CountryCode(840);

    pub fn is_known(self) -> bool {
        COUNTRIES.iter().any(|(c, _)| *c == self.0)
    }

    pub fn name(self) -> Option<&'static str> {
        COUNTRIES.iter().find(|(c, _)| *c == self.0).map(|(_, n)| *n)
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}", self.0)
    }
}

/// Territory code carried by a geographical rule.
///
/// Region codes follow UN M49 (e.g. 150 for Europe). Any known ISO-3166
/// country code is also accepted and denotes the single-country territory;
/// the two numbering schemes do not overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionCode(pub u16);

impl RegionCode {
    pub const EUROPE: RegionCode = RegionCode(150);
    pub const NORTHERN_AMERICA: RegionCode = RegionCode(21);

    pub fn is_known(self) -> bool {
        self.members().is_some()
    }

    pub fn members(self) -> Option<&'static [u16]> {
        if let Some((_, _, members)) = REGIONS.iter().find(|(c, _, _)| *c == self.0) {
            return Some(members);
        }
        COUNTRIES.iter().find(|(c, _)| *c == self.0).map(|(c, _)| std::slice::from_ref(c))
    }

    pub fn contains(self, country: CountryCode) -> bool {
        self.members().is_some_and(|m| m.contains(&country.0))
    }

    pub fn name(self) -> Option<&'static str> {
        REGIONS.iter().find(|(c, _, _)| *c == self.0).map(|(_, n, _)| *n).or_else(|| CountryCode(self.0).name())
    }
}

// EU-27, the EEA members, Switzerland and the United Kingdom.
const EUROPE: &[u16] = &[
    40, 56, 100, 191, 196, 203, 208, 233, 246, 250, 276, 300, 348, 372, 380, 428, 440, 442, 470, 528, 616, 620, 642, 703, 705, 724, 752,
    352, 438, 578, 756, 826,
];

const NORTHERN_AMERICA: &[u16] = &[124, 840];

const REGIONS: &[(u16, &str, &[u16])] = &[(150, "Europe", EUROPE), (21, "Northern America", NORTHERN_AMERICA)];

const COUNTRIES: &[(u16, &str)] = &[
    (40, "Austria"),
    (56, "Belgium"),
    (100, "Bulgaria"),
    (191, "Croatia"),
    (196, "Cyprus"),
    (203, "Czechia"),
    (208, "Denmark"),
    (233, "Estonia"),
    (246, "Finland"),
    (250, "France"),
    (276, "Germany"),
    (300, "Greece"),
    (348, "Hungary"),
    (372, "Ireland"),
    (380, "Italy"),
    (428, "Latvia"),
    (440, "Lithuania"),
    (442, "Luxembourg"),
    (470, "Malta"),
    (528, "Netherlands"),
    (616, "Poland"),
    (620, "Portugal"),
    (642, "Romania"),
    (703, "Slovakia"),
    (705, "Slovenia"),
    (724, "Spain"),
    (752, "Sweden"),
    (352, "Iceland"),
    (438, "Liechtenstein"),
    (578, "Norway"),
    (756, "Switzerland"),
    (826, "United Kingdom"),
    (124, "Canada"),
    (840, "United States"),
    (36, "Australia"),
    (76, "Brazil"),
    (356, "India"),
    (392, "Japan"),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn europe_contains_ireland_and_eu_members() {
        assert!(RegionCode::EUROPE.contains(CountryCode::IRELAND));
        for c in [276, 250, 380, 724, 752] {
            assert!(RegionCode::EUROPE.contains(CountryCode(c)));
        }
        assert!(!RegionCode::EUROPE.contains(CountryCode::UNITED_STATES));
    }

    #[test]
    fn country_codes_are_singleton_regions() {
        assert_eq!(RegionCode(372).members(), Some(&[372u16][..]));
        assert!(!RegionCode(999).is_known());
        // Region and country numbering must never collide.
        for (code, _, _) in REGIONS {
            assert!(!CountryCode(*code).is_known());
        }
    }

    #[test]
    fn domain_codes_round_trip() {
        for d in DomainCode::ALL {
            assert_eq!(DomainCode::from_code(d.code()), Some(d));
            assert_eq!(DomainCode::from_name(d.name()), Some(d));
        }
        assert_eq!(DomainCode::from_code(0), None);
    }
}
