//! Seeded synthetic corpora used by the examples, the benchmarks and the
//! test suites.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EntitySpan, Record};
use crate::rules::RuleSet;
use crate::schema::LabelSchema;

const FILLER: &[&str] = &[
    "hôm", "nay", "đã", "gặp", "tại", "với", "cùng", "rằng", "sẽ", "được", "cho", "biết", "vừa", "trong", "những", "các",
    "một", "người", "thì", "là", "có", "không", "rất", "nhiều", "khi", "sau", "trước", "đây", "theo", "về",
];

struct TypeVocab {
    label: &'static str,
    heads: &'static [&'static str],
    tails: &'static [&'static str],
}

const SEPARABLE: &[TypeVocab] = &[
    TypeVocab {
        label: "PERSON",
        heads: &["Nguyễn", "Trần", "Lê", "Phạm", "Hoàng", "Huỳnh", "Võ", "Đặng"],
        tails: &["Văn", "Thị", "Minh", "Hùng", "Lan", "Tuấn", "Hoa", "Chinh", "Dũng"],
    },
    TypeVocab {
        label: "ORGANIZATION",
        heads: &["Công_ty", "Tập_đoàn", "Hiệp_hội", "Viện"],
        tails: &["Vinamilk", "Hòa_Phát", "Masan", "FPT", "Viettel", "Sabeco"],
    },
    TypeVocab {
        label: "LOCATION",
        heads: &["Hà_Nội", "Huế", "Đà_Nẵng", "Cần_Thơ", "Hải_Phòng", "Nha_Trang"],
        tails: &["Quận_1", "Phường_3", "Ba_Đình", "Sơn_Trà"],
    },
    TypeVocab {
        label: "PRODUCT",
        heads: &["iPhone", "Galaxy", "Vios", "Wave", "Vision"],
        tails: &["Pro", "Max", "Ultra", "Plus", "Lite"],
    },
    TypeVocab {
        label: "EVENT",
        heads: &["Hội_chợ", "Lễ_hội", "Giải_chạy", "Tuần_lễ"],
        tails: &["Xuân", "Thu", "Ánh_sáng", "Mùa_hè", "Biển"],
    },
];

/// Schema for [`separable_corpus`]: five plain entity types.
pub fn separable_schema() -> LabelSchema {
    let labels: Vec<String> = SEPARABLE.iter().map(|t| format!("{:?}", t.label)).collect();
    LabelSchema::from_toml_str(&format!("version = \"separable-1\"\nlabels = [{}]\n", labels.join(", ")))
        .expect("built-in schema is valid")
}

fn fillers(rng: &mut ChaCha8Rng, words: &mut Vec<String>, lo: usize, hi: usize) {
    for _ in 0..rng.gen_range(lo..=hi) {
        words.push(FILLER.choose(rng).expect("non-empty").to_string());
    }
}

/// Five entity types whose words never occur outside their type, separated
/// by filler words. Entities are one head word plus 0–2 tail words.
pub fn separable_corpus(n: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut words = Vec::new();
            let mut spans = Vec::new();
            fillers(&mut rng, &mut words, 1, 3);
            for _ in 0..rng.gen_range(1..=3) {
                let ty = SEPARABLE.choose(&mut rng).expect("non-empty");
                let start = words.len();
                words.push(ty.heads.choose(&mut rng).expect("non-empty").to_string());
                for _ in 0..rng.gen_range(0..=2) {
                    words.push(ty.tails.choose(&mut rng).expect("non-empty").to_string());
                }
                spans.push(EntitySpan::new(start, words.len(), ty.label));
                fillers(&mut rng, &mut words, 1, 3);
            }
            Record::from_words(format!("sep-{i}"), &words, Some(spans))
        })
        .collect()
}

pub const MEASUREMENT_SCHEMA: &str = r#"
version = "garment-1"
labels = ["PERSON", "CHEST", "WAIST", "HIP"]

[[groups]]
id = "MEASUREMENT"
members = ["CHEST", "WAIST", "HIP"]
default = "CHEST"
window = 2
cues = { CHEST = ["ngực"], WAIST = ["eo"], HIP = ["mông", "hông"] }
"#;

pub fn measurement_schema() -> LabelSchema {
    LabelSchema::from_toml_str(MEASUREMENT_SCHEMA).expect("built-in schema is valid")
}

/// Garment orders listing two or three body measurements (`<n> cm`), each
/// preceded by its cue word. With `cues = false` the cue word is replaced by
/// a neutral one, while gold labels stay fine-grained.
pub fn measurement_corpus(n: usize, seed: u64, cues: bool) -> Vec<Record> {
    let members = [("CHEST", "ngực"), ("WAIST", "eo"), ("HIP", "mông")];
    let persons = SEPARABLE[0].heads;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut words: Vec<String> = vec!["khách".into()];
            let p = words.len();
            words.push(persons.choose(&mut rng).expect("non-empty").to_string());
            words.push(SEPARABLE[0].tails.choose(&mut rng).expect("non-empty").to_string());
            let mut spans = vec![EntitySpan::new(p, p + 2, "PERSON")];
            words.extend(["đặt", "áo", ":"].map(String::from));
            let mut order = members.to_vec();
            order.shuffle(&mut rng);
            for (k, (label, cue)) in order.iter().take(rng.gen_range(2..=3)).enumerate() {
                if k > 0 {
                    words.push(",".into());
                }
                words.push("vòng".into());
                words.push(if cues { cue.to_string() } else { "đo".into() });
                let s = words.len();
                words.push(rng.gen_range(55..=125).to_string());
                words.push("cm".into());
                spans.push(EntitySpan::new(s, s + 2, *label));
            }
            Record::from_words(format!("meas-{i}"), &words, Some(spans))
        })
        .collect()
}

pub const RULE_FAVORABLE_SCHEMA: &str = r#"
version = "orders-1"
labels = ["PERSON", "BANK", "CIN", "ORDER_CODE", "DATE", "TIME", "DURATION"]

[rule_bound]
CIN = "cin"
ORDER_CODE = "order"
DATE = "temporal"
TIME = "temporal"
DURATION = "temporal"
"#;

pub const RULE_FAVORABLE_RULES: &str = r#"
[[rules]]
id = "cin"
kind = "cin"
label = "CIN"
province_codes = ["001", "079", "048"]
reference_date = "2025-01-01"
age_range = [16, 100]

[[rules]]
id = "order"
kind = "order_code"
label = "ORDER_CODE"
shop = { alphabet = "A-Z", min = 3, max = 3 }
routing = { alphabet = "0-9", min = 2, max = 2 }
delimiter = ""

[[rules]]
id = "temporal"
kind = "temporal"
"#;

pub fn rule_favorable_schema() -> LabelSchema {
    LabelSchema::from_toml_str(RULE_FAVORABLE_SCHEMA).expect("built-in schema is valid")
}

pub fn rule_favorable_rules() -> RuleSet {
    RuleSet::from_toml_str(RULE_FAVORABLE_RULES, Path::new(".")).expect("built-in rules are valid")
}

const BANKS: &[&str] = &["Vietcombank", "VietinBank", "BIDV", "Agribank", "Techcombank", "ACB"];
const PROVINCES: &[&str] = &["001", "079", "048"];
const SHOPS: &[&str] = &["SHP", "LZD", "TIK", "SEN"];

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

/// A 12-digit number sharing its first three digits with valid CINs; valid
/// or not decides whether it is an entity.
fn cin_like(rng: &mut ChaCha8Rng, valid: bool) -> String {
    let p = PROVINCES.choose(rng).expect("non-empty");
    let (century, yy) = if valid {
        match rng.gen_range(0..2) {
            0 => (rng.gen_range(0..2u8), rng.gen_range(30..99u32)),
            _ => (rng.gen_range(2..4u8), rng.gen_range(0..9u32)),
        }
    } else {
        (rng.gen_range(4..10u8), rng.gen_range(0..100u32))
    };
    format!("{p}{century}{yy:02}{}", digits(rng, 6))
}

fn order_like(rng: &mut ChaCha8Rng, valid: bool) -> String {
    let shop = SHOPS.choose(rng).expect("non-empty");
    let routing = digits(rng, 2);
    let tail = match (valid, rng.gen_bool(0.5)) {
        (true, true) => format!("{}{}", rng.gen_range(1..10), digits(rng, 8)),
        (true, false) => format!("{}{}", rng.gen_range(0..2), digits(rng, 9)),
        (false, true) => format!("0{}", digits(rng, 8)),
        (false, false) => format!("{}{}", rng.gen_range(2..10), digits(rng, 9)),
    };
    format!("{shop}{routing}{tail}")
}

/// Orders mentioning a customer, a bank, an ID number, an order code and a
/// date. Half the ID numbers and order codes fail their checksum-style
/// validation and are not entities, though they look the same to a
/// token-level model.
pub fn rule_favorable_corpus(n: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut words: Vec<String> = Vec::new();
            let mut spans = Vec::new();
            let push = |words: &mut Vec<String>, w: &str| words.push(w.to_string());
            push(&mut words, "khách");
            let p = words.len();
            push(&mut words, SEPARABLE[0].heads.choose(&mut rng).expect("non-empty"));
            push(&mut words, SEPARABLE[0].tails.choose(&mut rng).expect("non-empty"));
            spans.push(EntitySpan::new(p, p + 2, "PERSON"));
            for w in ["số", "giấy", "tờ"] {
                push(&mut words, w);
            }
            let valid = rng.gen_bool(0.5);
            if valid {
                spans.push(EntitySpan::new(words.len(), words.len() + 1, "CIN"));
            }
            let c = cin_like(&mut rng, valid);
            push(&mut words, &c);
            for w in ["chuyển", "khoản", "qua"] {
                push(&mut words, w);
            }
            spans.push(EntitySpan::new(words.len(), words.len() + 1, "BANK"));
            push(&mut words, BANKS.choose(&mut rng).expect("non-empty"));
            for w in ["cho", "đơn"] {
                push(&mut words, w);
            }
            let valid = rng.gen_bool(0.5);
            if valid {
                spans.push(EntitySpan::new(words.len(), words.len() + 1, "ORDER_CODE"));
            }
            let o = order_like(&mut rng, valid);
            push(&mut words, &o);
            push(&mut words, "ngày");
            spans.push(EntitySpan::new(words.len(), words.len() + 1, "DATE"));
            let d = format!("{:02}/{:02}/{}", rng.gen_range(1..=28), rng.gen_range(1..=12), rng.gen_range(2019..=2025));
            push(&mut words, &d);
            Record::from_words(format!("rf-{i}"), &words, Some(spans))
        })
        .collect()
}

/// Twenty single-error records plus five clean ones: twelve truncated or
/// overextended spans, five wrong-boundary-and-type spans and three missed
/// entities.
pub fn error_review_corpus() -> Vec<Record> {
    let words = ["khách", "hàng", "Nguyễn", "Văn", "An", "gửi", "tiền", "tại", "Ngân_hàng", "Á_Châu"];
    let gold = vec![EntitySpan::new(2, 5, "PERSON"), EntitySpan::new(8, 10, "BANK")];
    let mut out = Vec::new();
    let mut add = |pred: Vec<EntitySpan>| {
        let mut r = Record::from_words(format!("err-{}", out.len()), &words, Some(gold.clone()));
        r.predicted = Some(pred);
        out.push(r);
    };
    let bank = EntitySpan::new(8, 10, "BANK");
    for k in 0..12 {
        let person = match k % 4 {
            0 => EntitySpan::new(2, 4, "PERSON"),
            1 => EntitySpan::new(3, 5, "PERSON"),
            2 => EntitySpan::new(2, 3, "PERSON"),
            _ => EntitySpan::new(1, 5, "PERSON"),
        };
        add(vec![person, bank.clone()]);
    }
    for _ in 0..5 {
        add(vec![EntitySpan::new(2, 5, "PERSON"), EntitySpan::new(9, 10, "ORGANIZATION")]);
    }
    for _ in 0..3 {
        add(vec![EntitySpan::new(2, 5, "PERSON")]);
    }
    for _ in 0..5 {
        add(gold.clone());
    }
    out
}

/// Short and long texts for load generation.
pub fn sample_texts() -> Vec<String> {
    let short = separable_corpus(40, 7).into_iter().map(|r| r.raw);
    let long = rule_favorable_corpus(20, 7).into_iter().map(|r| {
        let mut t = r.raw.clone();
        for _ in 0..3 {
            t.push_str(" . ");
            t.push_str(&r.raw);
        }
        t
    });
    short.chain(long).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{classify_errors, Taxonomy};

    #[test]
    fn corpora_are_valid_and_seeded() {
        let a = separable_corpus(50, 1);
        assert_eq!(a, separable_corpus(50, 1));
        for r in a.iter().chain(&measurement_corpus(20, 2, true)).chain(&rule_favorable_corpus(20, 3)) {
            r.validate().unwrap();
        }
    }

    #[test]
    fn rule_favorable_gold_agrees_with_rules() {
        let rules = rule_favorable_rules();
        rules.check_against(&rule_favorable_schema()).unwrap();
        for r in rule_favorable_corpus(200, 4) {
            let mut expect: Vec<EntitySpan> =
                r.gold.clone().unwrap().into_iter().filter(|s| s.label != "PERSON" && s.label != "BANK").collect();
            let got: Vec<(usize, usize, String)> = crate::rules::apply_rules(&r.tokens, &rules)
                .into_iter()
                .map(|s| (s.start, s.end, s.label))
                .collect();
            expect.sort_by_key(|s| s.start);
            let expect: Vec<(usize, usize, String)> = expect.into_iter().map(|s| (s.start, s.end, s.label)).collect();
            assert_eq!(got, expect, "{}", r.raw);
        }
    }

    #[test]
    fn error_review_is_seventeen_three() {
        let mut t = Taxonomy::default();
        for r in error_review_corpus() {
            t.add(&classify_errors(r.gold.as_ref().unwrap(), r.predicted.as_ref().unwrap()));
        }
        assert_eq!((t.boundary_error, t.boundary_and_type, t.missing, t.errors()), (12, 5, 3, 20));
    }
}
