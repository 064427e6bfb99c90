use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Malware,
    SecurityRisk,
}

/// A labeled score band. `rank` grows with severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Band {
    pub rank: u8,
    pub label: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("score {0} is outside [0, 1]")]
pub struct BandError(pub f64);

const MALWARE: [&str; 5] = [
    "No malicious intent",
    "Low possibility of malicious intent",
    "Possibly malicious behavior",
    "Likely malicious behavior",
    "High probability of malicious behavior; do not use",
];

const SECURITY_RISK: [&str; 4] = [
    "No significant threat; we can safely ignore",
    "Security warning, no immediate danger",
    "Security alert should be reviewed",
    "Extremely dangerous, package should not be used",
];

/// Maps a score to its band. Boundary values belong to the upper band;
/// on the malware scale exactly 0 has a band of its own.
pub fn band_of(score: f64, scale: Scale) -> Result<Band, BandError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(BandError(score));
    }
    let quarter = if score >= 0.75 {
        3
    } else if score >= 0.5 {
        2
    } else if score >= 0.25 {
        1
    } else {
        0
    };
    Ok(match scale {
        Scale::Malware => {
            let rank = if score == 0.0 { 0 } else { quarter + 1 };
            Band {
                rank,
                label: MALWARE[rank as usize],
            }
        }
        Scale::SecurityRisk => Band {
            rank: quarter,
            label: SECURITY_RISK[quarter as usize],
        },
    })
}

impl Band {
    pub fn labels(scale: Scale) -> &'static [&'static str] {
        match scale {
            Scale::Malware => &MALWARE,
            Scale::SecurityRisk => &SECURITY_RISK,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_bands() {
        assert_eq!(band_of(0.6, Scale::Malware).unwrap().label, "Likely malicious behavior");
        assert_eq!(band_of(0.0, Scale::Malware).unwrap().label, "No malicious intent");
        assert_eq!(
            band_of(0.8, Scale::SecurityRisk).unwrap().label,
            "Extremely dangerous, package should not be used"
        );
    }

    #[test]
    fn boundaries_go_up() {
        assert_eq!(band_of(0.5, Scale::Malware).unwrap().label, "Likely malicious behavior");
        assert_eq!(band_of(0.25, Scale::Malware).unwrap().label, "Possibly malicious behavior");
        assert_eq!(
            band_of(0.75, Scale::Malware).unwrap().label,
            "High probability of malicious behavior; do not use"
        );
        assert_eq!(
            band_of(0.01, Scale::Malware).unwrap().label,
            "Low possibility of malicious intent"
        );
        assert_eq!(
            band_of(0.0, Scale::SecurityRisk).unwrap().label,
            "No significant threat; we can safely ignore"
        );
        assert_eq!(
            band_of(0.5, Scale::SecurityRisk).unwrap().label,
            "Security alert should be reviewed"
        );
        assert_eq!(band_of(1.0, Scale::SecurityRisk).unwrap().rank, 3);
    }

    #[test]
    fn out_of_range() {
        assert!(band_of(-0.01, Scale::Malware).is_err());
        assert!(band_of(1.01, Scale::SecurityRisk).is_err());
        assert!(band_of(f64::NAN, Scale::Malware).is_err());
    }
}
