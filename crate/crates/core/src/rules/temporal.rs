//! A small closed grammar for Vietnamese temporal expressions.
//!
//! | kind     | forms                                                         |
//! |----------|---------------------------------------------------------------|
//! | date     | `dd/mm/yyyy`, `dd-mm-yyyy`, `ngày D tháng M [năm Y]`           |
//! | time     | `hh:mm`, `H giờ [M phút]`                                     |
//! | duration | `N {ngày, giờ, phút, tuần, tháng, năm}`                        |
//! | range    | `từ X đến Y` with X and Y of the same kind; labeled as that kind |
//!
//! At each position the longest form wins; equal lengths prefer range, then
//! date, time, duration. So a bare `3 giờ` reads as a clock time.

use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, Source, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Date,
    Time,
    Duration,
}

/// Labels emitted for each temporal kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalLabels {
    #[serde(default = "TemporalLabels::default_date")]
    pub date: String,
    #[serde(default = "TemporalLabels::default_time")]
    pub time: String,
    #[serde(default = "TemporalLabels::default_duration")]
    pub duration: String,
}

impl TemporalLabels {
    fn default_date() -> String {
        "DATE".into()
    }
    fn default_time() -> String {
        "TIME".into()
    }
    fn default_duration() -> String {
        "DURATION".into()
    }

    fn label(&self, k: Kind) -> &str {
        match k {
            Kind::Date => &self.date,
            Kind::Time => &self.time,
            Kind::Duration => &self.duration,
        }
    }

    pub fn all(&self) -> [&str; 3] {
        [&self.date, &self.time, &self.duration]
    }
}

impl Default for TemporalLabels {
    fn default() -> Self {
        Self {
            date: Self::default_date(),
            time: Self::default_time(),
            duration: Self::default_duration(),
        }
    }
}

static NUMERIC_DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})([/-])(\d{1,2})([/-])(\d{4}|\d{2})$").unwrap());
static CLOCK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2}):(\d{2})$").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+(?:[.,]\d+)?$").unwrap());

const DURATION_UNITS: [&str; 6] = ["ngày", "giờ", "phút", "tuần", "tháng", "năm"];

fn int(tok: &str) -> Option<u32> {
    if tok.is_empty() || tok.len() > 4 || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tok.parse().ok()
}

fn valid_date(day: u32, month: u32, year: Option<i32>) -> bool {
    // without a year, accept 29/2 by checking against a leap year
    NaiveDate::from_ymd_opt(year.unwrap_or(2000), month, day).is_some()
}

fn numeric_date(tok: &str) -> bool {
    let Some(c) = NUMERIC_DATE.captures(tok) else {
        return false;
    };
    if c[2] != c[4] {
        return false;
    }
    let (d, m) = (int(&c[1]).unwrap(), int(&c[3]).unwrap());
    let y = c[5].parse::<i32>().unwrap();
    let y = if c[5].len() == 2 { 2000 + y } else { y };
    valid_date(d, m, Some(y))
}

fn clock(tok: &str) -> bool {
    CLOCK.captures(tok).is_some_and(|c| {
        int(&c[1]).is_some_and(|h| h <= 23) && int(&c[2]).is_some_and(|m| m <= 59)
    })
}

/// Longest non-range form starting at `i`: `(token count, kind)`.
fn simple_at(w: &[String], i: usize) -> Option<(usize, Kind)> {
    let at = |k: usize| w.get(i + k).map(String::as_str);
    let mut cands: Vec<(usize, Kind)> = Vec::new();

    if at(0).is_some_and(numeric_date) {
        cands.push((1, Kind::Date));
    }
    if at(0) == Some("ngày") && at(2) == Some("tháng") {
        if let (Some(d), Some(m)) = (at(1).and_then(int), at(3).and_then(int)) {
            let year = (at(4) == Some("năm"))
                .then(|| at(5).filter(|y| y.len() == 4).and_then(int))
                .flatten();
            if year.is_some_and(|y| valid_date(d, m, Some(y as i32))) {
                cands.push((6, Kind::Date));
            } else if valid_date(d, m, None) {
                cands.push((4, Kind::Date));
            }
        }
    }

    if at(0).is_some_and(clock) {
        cands.push((1, Kind::Time));
    }
    if let Some(h) = at(0).and_then(int) {
        if h <= 24 && at(1) == Some("giờ") {
            match (at(2).and_then(int), at(3)) {
                (Some(m), Some("phút")) if m <= 59 => cands.push((4, Kind::Time)),
                _ => cands.push((2, Kind::Time)),
            }
        }
    }

    if at(0).is_some_and(|t| NUMBER.is_match(t)) && at(1).is_some_and(|u| DURATION_UNITS.contains(&u)) {
        cands.push((2, Kind::Duration));
    }

    // first maximal candidate in push order: date, time, duration
    cands
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, Kind)>, c| match best {
            Some(b) if b.0 >= c.0 => Some(b),
            _ => Some(c),
        })
}

fn longest_at(w: &[String], i: usize) -> Option<(usize, Kind)> {
    let simple = simple_at(w, i);
    if w[i] == "từ" {
        if let Some((n1, k1)) = simple_at(w, i + 1) {
            let mid = i + 1 + n1;
            if w.get(mid).map(String::as_str) == Some("đến") {
                if let Some((n2, k2)) = (mid + 1 < w.len()).then(|| simple_at(w, mid + 1)).flatten() {
                    if k1 == k2 {
                        return Some((1 + n1 + 1 + n2, k1));
                    }
                }
            }
        }
    }
    simple
}

/// Finds temporal expressions with the given labels.
pub fn find_temporal_with(tokens: &TokenSequence, labels: &TemporalLabels) -> Vec<EntitySpan> {
    let words: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        match longest_at(&words, i) {
            Some((n, kind)) => {
                out.push(EntitySpan::new(i, i + n, labels.label(kind)).with_source(Source::Rule));
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

/// Finds dates, times and durations labeled `DATE`, `TIME`, `DURATION`.
pub fn find_temporal(tokens: &TokenSequence) -> Vec<EntitySpan> {
    find_temporal_with(tokens, &TemporalLabels::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(words: &[&str]) -> Vec<(usize, usize, String)> {
        let (_, toks) = TokenSequence::from_words(words);
        find_temporal(&toks)
            .into_iter()
            .map(|s| (s.start, s.end, s.label))
            .collect()
    }

    fn one(s: usize, e: usize, l: &str) -> Vec<(usize, usize, String)> {
        vec![(s, e, l.to_string())]
    }

    #[test]
    fn examples() {
        assert_eq!(find(&["12/05/2024"]), one(0, 1, "DATE"));
        assert_eq!(find(&["ngày", "5", "tháng", "3", "năm", "2024"]), one(0, 6, "DATE"));
        assert!(find(&["xin", "chào"]).is_empty());
        assert_eq!(find(&["3", "ngày"]), one(0, 2, "DURATION"));
    }

    #[test]
    fn dates() {
        assert_eq!(find(&["12-05-2024"]), one(0, 1, "DATE"));
        assert!(find(&["12/05-2024"]).is_empty(), "mixed separators");
        assert!(find(&["31/02/2024"]).is_empty(), "no such day");
        assert_eq!(find(&["Ngày", "29", "tháng", "2"]), one(0, 4, "DATE"));
        assert_eq!(
            find(&["ngày", "29", "tháng", "2", "năm", "2023"]),
            one(0, 4, "DATE"),
            "29/2/2023 does not exist so the year is not absorbed"
        );
    }

    #[test]
    fn times() {
        assert_eq!(find(&["lúc", "14:30"]), one(1, 2, "TIME"));
        assert!(find(&["25:00"]).is_empty());
        assert_eq!(find(&["8", "giờ", "15", "phút"]), one(0, 4, "TIME"));
        assert_eq!(find(&["3", "giờ"]), one(0, 2, "TIME"));
        assert_eq!(find(&["48", "giờ"]), one(0, 2, "DURATION"));
    }

    #[test]
    fn durations() {
        assert_eq!(find(&["trong", "2", "tuần"]), one(1, 3, "DURATION"));
        assert_eq!(find(&["1,5", "năm"]), one(0, 2, "DURATION"));
    }

    #[test]
    fn ranges() {
        assert_eq!(find(&["từ", "8:00", "đến", "17:00"]), one(0, 4, "TIME"));
        assert_eq!(
            find(&["từ", "12/05/2024", "đến", "15/05/2024", "nhé"]),
            one(0, 4, "DATE")
        );
        // mismatched kinds: no range, the parts stand alone
        assert_eq!(
            find(&["từ", "8:00", "đến", "12/05/2024"]),
            vec![(1, 2, "TIME".to_string()), (3, 4, "DATE".to_string())]
        );
    }

    #[test]
    fn spans_are_rule_sourced_and_disjoint() {
        let (_, toks) = TokenSequence::from_words(&[
            "ngày", "5", "tháng", "3", "lúc", "9", "giờ", "trong", "2", "ngày",
        ]);
        let spans = find_temporal(&toks);
        assert_eq!(spans.len(), 3);
        assert!(spans.iter().all(|s| s.source == Source::Rule && s.confidence == 1.0));
        assert!(spans.windows(2).all(|w| w[0].end <= w[1].start));
    }
}
