use serde::{Deserialize, Serialize};

/// A closed set of categories with stable text codes.
pub trait Category: Sized + Copy + 'static {
    /// Every category, in declaration order.
    const ALL: &'static [Self];

    fn code(self) -> &'static str;

    /// Human-readable label for report tables.
    fn label(self) -> &'static str;

    fn from_code(code: &str) -> Option<Self> {
        let code = code.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.code().eq_ignore_ascii_case(code))
    }
}

macro_rules! category_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => ($code:literal, $label:literal)),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $code)]
                $variant,
            )+
        }

        impl Category for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];

            fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code,)+
                }
            }

            fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label,)+
                }
            }
        }
    };
}

category_enum!(
    BodyType {
        Sedan => ("sedan", "Sedan"),
        Suv => ("suv", "SUV"),
        Pickup => ("pickup", "Pickup"),
        Coupe => ("coupe", "Coupe"),
        Convertible => ("convertible", "Convertible"),
        Hatchback => ("hatchback", "Hatchback"),
        Wagon => ("wagon", "Wagon"),
        Minivan => ("minivan", "Minivan"),
        Van => ("van", "Van"),
        Other => ("other", "Other"),
    }
);

category_enum!(
    Transmission {
        Automatic => ("auto", "Automatic"),
        Manual => ("manual", "Manual"),
        Both => ("both", "Both"),
    }
);

category_enum!(
    Powertrain {
        FrontWheel => ("fwd", "Front-wheel"),
        RearWheel => ("rwd", "Rear-wheel"),
        FourWheel => ("4wd", "Four-wheel"),
    }
);

category_enum!(
    /// Ten-year driver age bands. The lowest band holds licensed drivers, so
    /// in practice it spans 16-19.
    AgeBand {
        A10_19 => ("10-19", "10-19"),
        A20_29 => ("20-29", "20-29"),
        A30_39 => ("30-39", "30-39"),
        A40_49 => ("40-49", "40-49"),
        A50_59 => ("50-59", "50-59"),
        A60_69 => ("60-69", "60-69"),
        A70_79 => ("70-79", "70-79"),
        A80_89 => ("80-89", "80-89"),
    }
);

impl AgeBand {
    /// Band containing `years`, or `None` outside 10-89.
    pub fn from_age(years: i64) -> Option<AgeBand> {
        if !(10..=89).contains(&years) {
            return None;
        }
        Some(AgeBand::ALL[(years / 10 - 1) as usize])
    }

    /// Lowest age inside the band.
    pub fn lower_age(self) -> u32 {
        10 * (self as u32 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_banding() {
        assert_eq!(AgeBand::from_age(55), Some(AgeBand::A50_59));
        assert_eq!(AgeBand::from_age(16), Some(AgeBand::A10_19));
        assert_eq!(AgeBand::from_age(89), Some(AgeBand::A80_89));
        assert_eq!(AgeBand::from_age(90), None);
        assert_eq!(AgeBand::from_age(9), None);
        for band in AgeBand::ALL {
            assert_eq!(AgeBand::from_age(band.lower_age() as i64), Some(*band));
        }
    }

    #[test]
    fn codes_are_case_insensitive() {
        assert_eq!(BodyType::from_code("Pickup"), Some(BodyType::Pickup));
        assert_eq!(Powertrain::from_code(" 4WD "), Some(Powertrain::FourWheel));
        assert_eq!(Transmission::from_code("cvt"), None);
    }
}
