//! Number-plus-unit parsing and exact unit conversion.

use std::str::FromStr;

use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::schema::ValueUnit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: Decimal,
    pub unit: String,
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum QuantityOutcome {
    Quantity { quantity: Quantity },
    Unmapped { raw: String },
}

/// Regex matching a decimal number (`.` or `,` separator) followed by one
/// of `units`. Group 1 is the number, group 2 the unit.
pub(crate) fn quantity_regex<'a>(units: impl IntoIterator<Item = &'a str>) -> Option<Regex> {
    let mut units: Vec<&str> = units.into_iter().filter(|u| !u.is_empty()).collect();
    if units.is_empty() {
        return None;
    }
    units.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    units.dedup();
    let alts: Vec<String> = units
        .iter()
        .map(|u| {
            let tail = if u.chars().last().is_some_and(char::is_alphanumeric) { r"\b" } else { "" };
            format!("{}{tail}", regex::escape(u))
        })
        .collect();
    let pattern = format!(r"(\d+(?:[.,]\d+)?)[ \t\u{{00A0}}]*({})", alts.join("|"));
    Some(Regex::new(&pattern).expect("escaped unit alternation compiles"))
}

/// The first number followed by an accepted unit, converted into the
/// target unit with exact decimal arithmetic.
pub fn standardize_quantity(text: &str, vu: &ValueUnit) -> QuantityOutcome {
    let unmapped = || QuantityOutcome::Unmapped { raw: text.to_string() };
    let Some(re) = quantity_regex(vu.accepted_units.keys().map(String::as_str)) else { return unmapped() };
    let Some(caps) = re.captures(text) else { return unmapped() };
    let number = caps[1].replace(',', ".");
    let Ok(value) = Decimal::from_str(&number) else { return unmapped() };
    let factor = vu.accepted_units[&caps[2]];
    match value.checked_mul(factor) {
        Some(v) => QuantityOutcome::Quantity { quantity: Quantity { value: v.normalize(), unit: vu.target_unit.clone() } },
        None => unmapped(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    pub(crate) fn mm() -> ValueUnit {
        ValueUnit {
            target_unit: "mm".into(),
            accepted_units: BTreeMap::from([("cm".into(), Decimal::from(10)), ("mm".into(), Decimal::ONE)]),
        }
    }

    fn q(o: QuantityOutcome) -> Quantity {
        match o {
            QuantityOutcome::Quantity { quantity } => quantity,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comma_decimal_cm_is_exactly_fifteen_mm() {
        let got = q(standardize_quantity("1,5 cm", &mm()));
        assert_eq!(got, Quantity { value: Decimal::from(15), unit: "mm".into() });
        assert_eq!(got.value.to_string(), "15");
    }

    #[test]
    fn identity_and_unmapped() {
        assert_eq!(q(standardize_quantity("15 mm", &mm())).value, Decimal::from(15));
        assert_eq!(q(standardize_quantity("Größe ca. 2.25cm", &mm())).value.to_string(), "22.5");
        assert_eq!(standardize_quantity("groß", &mm()), QuantityOutcome::Unmapped { raw: "groß".into() });
        assert!(matches!(standardize_quantity("3 cmH2O", &mm()), QuantityOutcome::Unmapped { .. }));
        assert_eq!(q(standardize_quantity("BI-RADS 4, 12 mm", &mm())).value, Decimal::from(12));
    }

    #[test]
    fn exact_where_binary_floats_drift() {
        let got = q(standardize_quantity("0,1 cm", &mm()));
        assert_eq!(got.value.to_string(), "1");
        let got = q(standardize_quantity("1,15 cm", &mm()));
        assert_eq!(got.value.to_string(), "11.5");
    }

    proptest! {
        #[test]
        fn target_unit_round_trip(int in 0u32..100000, frac in 0u32..1000) {
            let text = format!("{int}.{frac:03} mm");
            let expected = Decimal::from_str(&format!("{int}.{frac:03}")).unwrap().normalize();
            let once = q(standardize_quantity(&text, &mm()));
            prop_assert_eq!(&once.value, &expected);
            let twice = q(standardize_quantity(&once.to_string(), &mm()));
            prop_assert_eq!(twice, once);
        }
    }
}
