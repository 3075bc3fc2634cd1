//! Runs the fixture rules over a sentence and checks a few ID numbers and
//! order codes directly.

use std::path::Path;

use chrono::NaiveDate;

use hybrid_ner::corpus::Record;
use hybrid_ner::rules::{apply_rules, load_rules, validate_cin, validate_order_code, CinConfig, OrderCodeConfig, SegmentPattern};

fn main() -> hybrid_ner::Result<()> {
    let rules = load_rules(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/rules.toml"))?;
    let r = Record::from_text(
        "demo",
        "khách số 001085123456 đặt đơn ABC01912345678 lúc 9 giờ 30 phút ngày 5 tháng 3 năm 2024 , giao trong 3 ngày",
    );
    for s in apply_rules(&r.tokens, &rules) {
        println!("{:>10}  {}", s.label, r.tokens.surface(s.start, s.end));
    }

    let cin = CinConfig::new(["001", "079"], NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(), (16, 100))?;
    for s in ["001085123456", "002085123456", "001215123456", "00108512345"] {
        println!("ID {s}: {}", validate_cin(s, &cin));
    }
    let order = OrderCodeConfig {
        shop: SegmentPattern::new("A-Z", 3, 3)?,
        routing: SegmentPattern::new("0-9", 2, 2)?,
        delimiter: String::new(),
    };
    for s in ["ABC01912345678", "ABC01012345678", "ABC010123456789", "AB101912345678"] {
        println!("order {s}: {}", validate_order_code(s, &order));
    }
    Ok(())
}
