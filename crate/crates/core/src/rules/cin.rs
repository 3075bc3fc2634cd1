use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// Settings for Citizen Identification Number checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CinConfig {
    pub province_codes: BTreeSet<String>,
    /// Ages are computed against this date, never the wall clock.
    pub reference_date: NaiveDate,
    /// Inclusive `[min, max]` age in years.
    pub age_range: (u32, u32),
}

impl CinConfig {
    pub fn new(
        province_codes: impl IntoIterator<Item = impl Into<String>>,
        reference_date: NaiveDate,
        age_range: (u32, u32),
    ) -> Result<Self> {
        let province_codes: BTreeSet<String> = province_codes.into_iter().map(Into::into).collect();
        if let Some(bad) = province_codes
            .iter()
            .find(|c| c.len() != 3 || !c.bytes().all(|b| b.is_ascii_digit()))
        {
            return Err(Error::Config(format!("province code {bad:?} is not 3 digits")));
        }
        if age_range.0 >= age_range.1 {
            return Err(Error::Config(format!(
                "age range [{}, {}] must have min < max",
                age_range.0, age_range.1
            )));
        }
        Ok(Self {
            province_codes,
            reference_date,
            age_range,
        })
    }
}

/// Parses a province list: one 3-digit code per line, `#` comments allowed.
pub fn parse_province_codes(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let code = line.split('#').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        if code.len() != 3 || !code.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedLine {
                line: i + 1,
                content: line.to_string(),
            });
        }
        out.push(code.to_string());
    }
    Ok(out)
}

pub fn load_province_codes(path: impl AsRef<Path>) -> Result<Vec<String>> {
    parse_province_codes(&std::fs::read_to_string(path)?)
}

/// Birth year encoded by the century digit (index 3) and the two year digits
/// (indices 4..6): 0/1 → 1900s, 2/3 → 2000s.
fn birth_year(century: u8, yy: u32) -> Option<i32> {
    match century {
        0 | 1 => Some(1900 + yy as i32),
        2 | 3 => Some(2000 + yy as i32),
        _ => None,
    }
}

/// True iff `digits` is a 12-digit CIN passing the province, century-digit,
/// birth-year and age checks.
pub fn validate_cin(digits: &str, cfg: &CinConfig) -> bool {
    let b = digits.as_bytes();
    if b.len() != 12 || !b.iter().all(u8::is_ascii_digit) {
        return false;
    }
    if !cfg.province_codes.contains(&digits[0..3]) {
        return false;
    }
    let century = b[3] - b'0';
    if century > 3 {
        return false;
    }
    let yy: u32 = digits[4..6].parse().expect("two ascii digits");
    if century >= 2 && yy >= 20 {
        return false;
    }
    let Some(year) = birth_year(century, yy) else {
        return false;
    };
    let age = cfg.reference_date.year() - year;
    age >= cfg.age_range.0 as i32 && age <= cfg.age_range.1 as i32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CinConfig {
        CinConfig::new(["001"], NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(), (0, 120)).unwrap()
    }

    #[test]
    fn examples() {
        let c = cfg();
        assert!(validate_cin("001085123456", &c));
        assert!(!validate_cin("001485123456", &c));
        assert!(!validate_cin("001285123456", &c));
        assert!(!validate_cin("00108512345", &c));
    }

    #[test]
    fn other_rejections() {
        let c = cfg();
        assert!(!validate_cin("002085123456", &c), "province");
        assert!(!validate_cin("00108512345a", &c), "non-digit");
        assert!(validate_cin("001215123456", &c), "born 2015");
        // born 2019 but reference year 2025 with min age 10
        let strict = CinConfig::new(["001"], c.reference_date, (10, 120)).unwrap();
        assert!(!validate_cin("001219123456", &strict));
        // born 1900 → age 125
        assert!(!validate_cin("001000123456", &c));
    }

    #[test]
    fn config_validation() {
        let d = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
        assert!(CinConfig::new(["01"], d, (0, 120)).is_err());
        assert!(CinConfig::new(["001"], d, (50, 50)).is_err());
    }

    #[test]
    fn province_file() {
        let codes = parse_province_codes("# north\n001\n002  # Ha Giang\n\n").unwrap();
        assert_eq!(codes, ["001", "002"]);
        assert!(matches!(
            parse_province_codes("001\n1x2\n"),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }
}
