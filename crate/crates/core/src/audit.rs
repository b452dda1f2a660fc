//! Weight audit of a shredded-note souvenir.
//!
//! Scale readouts have one decimal place, so weights are held as whole
//! tenths of a gram ([`Decigrams`]). Sums and differences stay exact, and
//! floating point only enters for the ratios.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A weight in tenths of a gram. May be negative when it is a residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decigrams(pub i64);

impl Decigrams {
    pub fn from_tenths(tenths: i64) -> Self {
        Self(tenths)
    }

    pub fn tenths(self) -> i64 {
        self.0
    }

    pub fn grams<F: Scalar>(self) -> F {
        F::of(self.0 as f64) / F::of(10.0)
    }

    /// Converts a reading such as `39.4`; more than one decimal place of
    /// precision is rejected.
    pub fn from_grams(grams: f64) -> Result<Self> {
        let tenths = grams * 10.0;
        let rounded = tenths.round();
        if !grams.is_finite() || (tenths - rounded).abs() > 1e-6 || rounded.abs() > 9e15 {
            return Err(Error::InvalidWeight {
                input: grams.to_string(),
                reason: "expected a finite reading with at most one decimal place".into(),
            });
        }
        Ok(Self(rounded as i64))
    }
}

impl std::ops::Add for Decigrams {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Decigrams {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl fmt::Display for Decigrams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{}", self.0.abs() / 10, self.0.abs() % 10)
    }
}

impl FromStr for Decigrams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::InvalidWeight {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let t = s.trim();
        let (neg, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(err("empty"));
        }
        if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err("not a decimal number"));
        }
        if frac.len() > 1 {
            return Err(err("at most one decimal place"));
        }
        let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| err("out of range"))? };
        let tenth: i64 = frac.parse().unwrap_or(0);
        let v = whole.checked_mul(10).and_then(|w| w.checked_add(tenth)).ok_or_else(|| err("out of range"))?;
        Ok(Self(if neg { -v } else { v }))
    }
}

impl Serialize for Decigrams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.grams::<f64>())
    }
}

impl<'de> Deserialize<'de> for Decigrams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse(),
            Raw::Number(n) => Decigrams::from_grams(n),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Scale readings for one opened souvenir, plus the label's claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditLedger {
    /// Unopened souvenir.
    pub gross_paperweight_g: Decigrams,
    /// Emptied container with its lid.
    pub empty_container_g: Decigrams,
    /// Any non-paper filler found inside.
    pub stones_g: Decigrams,
    /// Bag holding the shreds.
    pub bag_gross_g: Decigrams,
    /// The same bag, empty.
    pub bag_tare_g: Decigrams,
    /// One intact note.
    pub per_note_g: Decigrams,
    /// Notes the label claims were shredded into the souvenir.
    pub claimed_notes: u32,
}

impl AuditLedger {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("gross_paperweight_g", self.gross_paperweight_g),
            ("empty_container_g", self.empty_container_g),
            ("stones_g", self.stones_g),
            ("bag_gross_g", self.bag_gross_g),
            ("bag_tare_g", self.bag_tare_g),
        ];
        for (name, w) in weights {
            if w.0 < 0 {
                return Err(Error::InvalidWeight {
                    input: format!("{name} = {w}"),
                    reason: "weights cannot be negative".into(),
                });
            }
        }
        if self.per_note_g.0 <= 0 {
            return Err(Error::InvalidWeight {
                input: format!("per_note_g = {}", self.per_note_g),
                reason: "must be positive".into(),
            });
        }
        if self.claimed_notes == 0 {
            return Err(Error::InvalidConfig("claimed_notes must be positive".into()));
        }
        Ok(())
    }
}

/// Weight of the shreds alone: bag with shreds minus the empty bag.
pub fn net_shreds(bag_gross: Decigrams, bag_tare: Decigrams) -> Result<Decigrams> {
    if bag_gross < bag_tare {
        return Err(Error::InvalidWeight {
            input: format!("{bag_gross} - {bag_tare}"),
            reason: "gross weight is below the tare".into(),
        });
    }
    Ok(bag_gross - bag_tare)
}

/// How many intact notes `net` grams of shreds amount to.
pub fn equivalent_notes<F: Scalar>(net: Decigrams, per_note: Decigrams) -> Result<F> {
    if per_note.0 <= 0 {
        return Err(Error::InvalidWeight {
            input: per_note.to_string(),
            reason: "per-note weight must be positive".into(),
        });
    }
    Ok(F::of(net.0 as f64) / F::of(per_note.0 as f64))
}

/// Share of the claimed notes actually present.
pub fn claim_fraction<F: Scalar>(equivalent: F, claimed: F) -> Result<F> {
    if !(claimed > F::zero()) {
        return Err(Error::InvalidConfig(format!("claimed count {claimed} must be positive")));
    }
    Ok(equivalent / claimed)
}

/// Container + stones + shreds minus the unopened weight. Zero means the
/// parts account for the whole exactly.
pub fn mass_balance(ledger: &AuditLedger) -> Result<Decigrams> {
    let shreds = net_shreds(ledger.bag_gross_g, ledger.bag_tare_g)?;
    Ok(ledger.empty_container_g + ledger.stones_g + shreds - ledger.gross_paperweight_g)
}

/// Everything derived from a ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub net_shreds_g: Decigrams,
    /// Notes equivalent to the shreds alone.
    pub equivalent_notes: f64,
    pub claim_fraction: f64,
    /// Everything inside the container (unopened minus empty container),
    /// i.e. counting any filler as if it were shreds.
    pub contents_g: Decigrams,
    pub contents_equivalent_notes: f64,
    pub contents_claim_fraction: f64,
    pub mass_balance_residual_g: Decigrams,
}

pub fn audit(ledger: &AuditLedger) -> Result<AuditReport> {
    ledger.validate()?;
    let net = net_shreds(ledger.bag_gross_g, ledger.bag_tare_g)?;
    let claimed = f64::from(ledger.claimed_notes);
    let equivalent: f64 = equivalent_notes(net, ledger.per_note_g)?;
    let contents = net_shreds(ledger.gross_paperweight_g, ledger.empty_container_g)?;
    let contents_equivalent: f64 = equivalent_notes(contents, ledger.per_note_g)?;
    Ok(AuditReport {
        net_shreds_g: net,
        equivalent_notes: equivalent,
        claim_fraction: claim_fraction(equivalent, claimed)?,
        contents_g: contents,
        contents_equivalent_notes: contents_equivalent,
        contents_claim_fraction: claim_fraction(contents_equivalent, claimed)?,
        mass_balance_residual_g: mass_balance(ledger)?,
    })
}

/// Human-readable derivation of a report.
pub fn render_table(ledger: &AuditLedger, report: &AuditReport) -> String {
    let l = ledger;
    let r = report;
    let per = l.per_note_g;
    let parts = l.empty_container_g + l.stones_g + r.net_shreds_g;
    let mut out = String::new();
    let mut line = |label: &str, value: String| out.push_str(&format!("{label:<34}{value}\n"));
    line("Shreds (bag - empty bag)", format!("{} g - {} g = {} g", l.bag_gross_g, l.bag_tare_g, r.net_shreds_g));
    line("Equivalent notes", format!("{} / {per} = {:.2}", r.net_shreds_g, r.equivalent_notes));
    line("Share of claim", format!("{:.2} / {} = {:.1}%", r.equivalent_notes, l.claimed_notes, 100.0 * r.claim_fraction));
    line(
        "Contents (unopened - container)",
        format!("{} g - {} g = {} g", l.gross_paperweight_g, l.empty_container_g, r.contents_g),
    );
    line("Equivalent notes, all contents", format!("{} / {per} = {:.2}", r.contents_g, r.contents_equivalent_notes));
    line(
        "Share of claim, all contents",
        format!("{:.2} / {} = {:.1}%", r.contents_equivalent_notes, l.claimed_notes, 100.0 * r.contents_claim_fraction),
    );
    line(
        "Container + stones + shreds",
        format!("{} + {} + {} = {} g", l.empty_container_g, l.stones_g, r.net_shreds_g, parts),
    );
    line(
        "Mass-balance residual",
        format!("{parts} - {} = {} g", l.gross_paperweight_g, r.mass_balance_residual_g),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dg(s: &str) -> Decigrams {
        s.parse().unwrap()
    }

    fn souvenir() -> AuditLedger {
        AuditLedger {
            gross_paperweight_g: dg("175.6"),
            empty_container_g: dg("60.0"),
            stones_g: dg("87.7"),
            bag_gross_g: dg("39.4"),
            bag_tare_g: dg("11.1"),
            per_note_g: dg("1.4"),
            claimed_notes: 138,
        }
    }

    #[test]
    fn parsing() {
        assert_eq!(dg("39.4"), Decigrams(394));
        assert_eq!(dg("60"), Decigrams(600));
        assert_eq!(dg(".5"), Decigrams(5));
        assert_eq!(dg("-0.4"), Decigrams(-4));
        assert_eq!(Decigrams(-4).to_string(), "-0.4");
        assert_eq!(Decigrams(1756).to_string(), "175.6");
        for bad in ["", ".", "1.25", "abc", "1e3", "--1"] {
            assert!(bad.parse::<Decigrams>().is_err(), "{bad:?}");
        }
        assert_eq!(Decigrams::from_grams(28.3).unwrap(), Decigrams(283));
        assert!(Decigrams::from_grams(0.05).is_err());
    }

    #[test]
    fn net_shreds_examples() {
        assert_eq!(net_shreds(dg("39.4"), dg("11.1")).unwrap(), dg("28.3"));
        assert_eq!(net_shreds(dg("12.3"), dg("12.3")).unwrap(), Decigrams(0));
        assert_eq!(net_shreds(dg("100.0"), dg("40.0")).unwrap(), dg("60.0"));
        assert!(net_shreds(dg("1.0"), dg("1.1")).is_err());
    }

    #[test]
    fn equivalent_notes_examples() {
        assert_abs_diff_eq!(equivalent_notes::<f64>(dg("28.3"), dg("1.4")).unwrap(), 20.21, epsilon = 0.01);
        assert_abs_diff_eq!(equivalent_notes::<f64>(dg("115.6"), dg("1.4")).unwrap(), 82.57, epsilon = 0.01);
        assert_eq!(equivalent_notes::<f64>(dg("0"), dg("1.4")).unwrap(), 0.0);
        assert!(equivalent_notes::<f64>(dg("1"), dg("0")).is_err());
        assert_abs_diff_eq!(equivalent_notes::<f32>(dg("28.3"), dg("1.4")).unwrap(), 20.214_285, epsilon = 1e-4);
    }

    #[test]
    fn claim_fraction_examples() {
        assert_abs_diff_eq!(claim_fraction(82.57, 138.0).unwrap(), 0.5983, epsilon = 1e-4);
        assert_abs_diff_eq!(claim_fraction(20.0, 138.0).unwrap(), 0.1449, epsilon = 1e-4);
        assert_eq!(claim_fraction(138.0, 138.0).unwrap(), 1.0);
        assert!(claim_fraction(1.0, 0.0).is_err());
    }

    #[test]
    fn mass_balance_examples() {
        assert_eq!(mass_balance(&souvenir()).unwrap(), dg("0.4"));
        let zero = AuditLedger {
            gross_paperweight_g: Decigrams(0),
            empty_container_g: Decigrams(0),
            stones_g: Decigrams(0),
            bag_gross_g: Decigrams(0),
            bag_tare_g: Decigrams(0),
            ..souvenir()
        };
        assert_eq!(mass_balance(&zero).unwrap(), Decigrams(0));
        let balanced = AuditLedger {
            stones_g: Decigrams(0),
            bag_gross_g: dg("175.6") - dg("60.0") + dg("11.1"),
            ..souvenir()
        };
        assert_eq!(mass_balance(&balanced).unwrap(), Decigrams(0));
    }

    #[test]
    fn full_report() {
        let r = audit(&souvenir()).unwrap();
        assert_eq!(r.net_shreds_g, dg("28.3"));
        assert_eq!(r.contents_g, dg("115.6"));
        assert_abs_diff_eq!(r.contents_claim_fraction, 0.5983, epsilon = 1e-4);
        assert_eq!(r.mass_balance_residual_g, dg("0.4"));
        let table = render_table(&souvenir(), &r);
        assert!(table.contains("39.4 g - 11.1 g = 28.3 g"), "{table}");
        assert!(table.contains("115.6 / 1.4 = 82.57"), "{table}");
        assert!(table.contains("60.0 + 87.7 + 28.3 = 176.0 g"), "{table}");
    }

    #[test]
    fn ledger_json_accepts_strings_and_numbers() {
        let json = r#"{"gross_paperweight_g": "175.6", "empty_container_g": 60, "stones_g": 87.7,
            "bag_gross_g": "39.4", "bag_tare_g": 11.1, "per_note_g": "1.4", "claimed_notes": 138}"#;
        let ledger: AuditLedger = serde_json::from_str(json).unwrap();
        assert_eq!(ledger, souvenir());
        let bad = json.replace("\"39.4\"", "\"39.45\"");
        assert!(serde_json::from_str::<AuditLedger>(&bad).is_err());
        let out = serde_json::to_value(audit(&ledger).unwrap()).unwrap();
        assert_eq!(out["net_shreds_g"], serde_json::json!(28.3));
    }

    #[test]
    fn invalid_ledgers_are_rejected() {
        assert!(audit(&AuditLedger { per_note_g: Decigrams(0), ..souvenir() }).is_err());
        assert!(audit(&AuditLedger { claimed_notes: 0, ..souvenir() }).is_err());
        assert!(audit(&AuditLedger { stones_g: Decigrams(-1), ..souvenir() }).is_err());
    }

    proptest! {
        #[test]
        fn residual_scales_linearly(c in 1i64..50, w in prop::array::uniform5(0i64..5000)) {
            let ledger = |k: i64| AuditLedger {
                gross_paperweight_g: Decigrams(w[0] * k),
                empty_container_g: Decigrams(w[1] * k),
                stones_g: Decigrams(w[2] * k),
                bag_gross_g: Decigrams((w[3] + w[4]) * k),
                bag_tare_g: Decigrams(w[4] * k),
                per_note_g: Decigrams(14),
                claimed_notes: 1,
            };
            prop_assert_eq!(mass_balance(&ledger(c)).unwrap().0, c * mass_balance(&ledger(1)).unwrap().0);
        }

        #[test]
        fn display_parses_back(t in -1_000_000i64..1_000_000) {
            prop_assert_eq!(Decigrams(t).to_string().parse::<Decigrams>().unwrap(), Decigrams(t));
        }
    }
}
