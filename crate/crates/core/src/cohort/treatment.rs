use serde::{Deserialize, Serialize};

use super::ingest::RawCohort;
use super::Exclusion;

pub const REASON_COMBINATION: &str = "combination of treatments";
pub const REASON_NO_CATEGORY: &str = "no treatment category";
pub const REASON_UNRECOGNIZED: &str = "unrecognized treatment";

/// Result of mapping one treatment description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreatmentOutcome {
    /// Treatment category 1..4 and the hormone-therapy flag.
    Mapped { treatment: u8, hormone: u8 },
    Excluded { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Primary {
    Rp,
    Ebrt,
    Bt,
    Nat,
}

/// Maps a treatment description to one of the four categories.
///
/// Accepts a category code ("1".."4") or `+`-joined tokens: RP, EBRT, BT,
/// AS, WW, NAT plus the modifiers LND (lymph node dissection) and HT
/// (hormone therapy). RP takes LND and/or HT; EBRT takes LND and/or HT; BT
/// takes HT only; NAT takes no modifier. Anything else is excluded.
pub fn map_treatment_text(text: &str) -> TreatmentOutcome {
    let text = text.trim();
    if let Ok(code) = text.parse::<u8>() {
        return if (1..=4).contains(&code) {
            TreatmentOutcome::Mapped { treatment: code, hormone: 0 }
        } else {
            excluded(REASON_UNRECOGNIZED)
        };
    }

    let mut primaries = Vec::new();
    let (mut lnd, mut ht) = (false, false);
    for token in text.split('+').map(|t| t.trim().to_ascii_uppercase()) {
        match token.as_str() {
            "RP" => primaries.push(Primary::Rp),
            "EBRT" => primaries.push(Primary::Ebrt),
            "BT" => primaries.push(Primary::Bt),
            "AS" | "WW" | "NAT" => primaries.push(Primary::Nat),
            "LND" => lnd = true,
            "HT" => ht = true,
            _ => return excluded(REASON_UNRECOGNIZED),
        }
    }
    primaries.dedup();
    primaries.sort_by_key(|p| *p as u8);
    primaries.dedup();

    let primary = match primaries.as_slice() {
        [] => return excluded(REASON_NO_CATEGORY),
        [p] => *p,
        _ => return excluded(REASON_COMBINATION),
    };
    let allowed = match primary {
        Primary::Rp | Primary::Ebrt => true,
        Primary::Bt => !lnd,
        Primary::Nat => !lnd && !ht,
    };
    if !allowed {
        return excluded(REASON_COMBINATION);
    }
    let treatment = match primary {
        Primary::Rp => 1,
        Primary::Ebrt => 2,
        Primary::Bt => 3,
        Primary::Nat => 4,
    };
    TreatmentOutcome::Mapped { treatment, hormone: u8::from(ht) }
}

fn excluded(reason: &str) -> TreatmentOutcome {
    TreatmentOutcome::Excluded { reason: reason.to_string() }
}

/// Per-row treatment mapping for a raw cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentMapping {
    /// Aligned with `raw.rows`; `None` for excluded rows.
    pub assignments: Vec<Option<(u8, u8)>>,
    pub exclusions: Vec<Exclusion>,
}

/// Maps every row's `treatment_group` text. The hormone flag is the OR of an
/// HT token and the row's own `hormone_therapy` column.
pub fn map_treatments(raw: &RawCohort) -> TreatmentMapping {
    let mut assignments = Vec::with_capacity(raw.rows.len());
    let mut exclusions = Vec::new();
    for row in &raw.rows {
        let text = raw.field(row, "treatment_group").unwrap_or("");
        let column_ht = raw.field(row, "hormone_therapy").unwrap_or("").trim() == "1";
        match map_treatment_text(text) {
            TreatmentOutcome::Mapped { treatment, hormone } => {
                assignments.push(Some((treatment, hormone.max(u8::from(column_ht)))));
            }
            TreatmentOutcome::Excluded { reason } => {
                assignments.push(None);
                exclusions.push(Exclusion {
                    patient_id: raw.field(row, "patient_id").unwrap_or("").to_string(),
                    reason,
                });
            }
        }
    }
    TreatmentMapping { assignments, exclusions }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapped(t: u8, h: u8) -> TreatmentOutcome {
        TreatmentOutcome::Mapped { treatment: t, hormone: h }
    }

    #[test]
    fn category_rules() {
        assert_eq!(map_treatment_text("BT+HT"), mapped(3, 1));
        assert_eq!(map_treatment_text("WW"), mapped(4, 0));
        assert_eq!(map_treatment_text("as"), mapped(4, 0));
        assert_eq!(map_treatment_text("RP+LND+HT"), mapped(1, 1));
        assert_eq!(map_treatment_text("RP+HT"), mapped(1, 1));
        assert_eq!(map_treatment_text("EBRT+LND"), mapped(2, 0));
        assert_eq!(map_treatment_text("EBRT + HT"), mapped(2, 1));
        assert_eq!(map_treatment_text("2"), mapped(2, 0));
    }

    #[test]
    fn exclusions() {
        assert_eq!(map_treatment_text("RP+EBRT"), excluded(REASON_COMBINATION));
        assert_eq!(map_treatment_text("BT+LND"), excluded(REASON_COMBINATION));
        assert_eq!(map_treatment_text("AS+HT"), excluded(REASON_COMBINATION));
        assert_eq!(map_treatment_text("HT"), excluded(REASON_NO_CATEGORY));
        assert_eq!(map_treatment_text(""), excluded(REASON_UNRECOGNIZED));
        assert_eq!(map_treatment_text("HIFU"), excluded(REASON_UNRECOGNIZED));
        assert_eq!(map_treatment_text("7"), excluded(REASON_UNRECOGNIZED));
    }

    #[test]
    fn surveillance_and_watchful_waiting_are_one_category() {
        assert_eq!(map_treatment_text("AS+WW"), mapped(4, 0));
    }
}
