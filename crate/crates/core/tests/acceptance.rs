//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use hybrid_ner::corpus::{bio_to_spans, spans_to_bio, Record, Source};
use hybrid_ner::eval::{classify_errors, compute_prf, count_matches, evaluate_corpus, Counts};
use hybrid_ner::pipeline::{run_training, Pipeline};
use hybrid_ner::postprocess::{postprocess_all, restore_fine_labels, Gazetteer, PostConfig};
use hybrid_ner::rules::{validate_cin, validate_order_code, CinConfig, OrderCodeConfig, RuleSet, SegmentPattern};
use hybrid_ner::serve::{bimodal_workload, idle_wait_violations, serve, simulate, BatchPolicy, ServerConfig, ServiceModel, Strategy};
use hybrid_ner::synth::*;
use hybrid_ner::tagger::{softmax, train, Tagger, TrainConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient() -> Outcome {
    let t = Instant::now();
    let worst = gradient_check(200, 1, 1e-5);
    let secs = t.elapsed().as_secs_f64();
    check(worst < 1e-4 && secs < 10.0, format!("200 coordinates, max relative error {worst:.2e}, {secs:.2} s"))
}

fn softmax_props() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.gen_range(1..40);
        let scale = if i % 10 == 0 { 1000.0 } else { 30.0 };
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let p = softmax(&v);
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(format!("non-finite or negative output on vector {i}"));
        }
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        let c = rng.gen_range(-500.0..500.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-9, format!("1000 vectors, max deviation {worst:.1e}"))
}

fn separable() -> Outcome {
    let schema = separable_schema();
    let cfg = TrainConfig { epochs: 20, seed: 42, ..TrainConfig::default() };
    let t = Instant::now();
    let (model, stats) = train(&separable_corpus(2000, 42), &schema, &cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let reached = stats.epochs.iter().find(|e| e.dev_f1.is_some_and(|f| f >= 0.95)).map(|e| e.epoch);
    let mut test = separable_corpus(500, 4242);
    for r in &mut test {
        r.predicted = Some(model.tag_spans(&r.tokens).map_err(|e| e.to_string())?);
    }
    let f1 = evaluate_corpus(&test).map_err(|e| e.to_string())?.micro.f1;
    check(
        reached.is_some() && f1 >= 0.95 && secs < 60.0,
        format!("dev F1 ≥ 0.95 at epoch {reached:?}, held-out F1 {f1:.4}, {secs:.1} s"),
    )
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let labels = ["BANK", "PERSON", "ORG"];
    for i in 0..1000 {
        let n = rng.gen_range(1..40);
        let gold = random_spans(&mut rng, n, 8, &labels);
        let pred = random_spans(&mut rng, n, 8, &labels);
        let c = count_matches(&gold, &pred).map_err(|e| e.to_string())?;
        for (label, (tp, fp, fn_)) in brute_force_counts(&gold, &pred) {
            let got = c.per_label.get(&label).copied().unwrap_or_default();
            if (got.tp, got.fp, got.fn_) != (tp, fp, fn_) {
                return Err(format!("instance {i}, label {label}: {got:?} vs ({tp}, {fp}, {fn_})"));
            }
        }
        let (tp, fp, fn_) = (rng.gen_range(0..100), rng.gen_range(0..100), rng.gen_range(0..100));
        let m = compute_prf(Counts { tp, fp, fn_ });
        let (p, r, f) = prf_closed_form(tp, fp, fn_);
        if (m.precision - p).abs() > 1e-12 || (m.recall - r).abs() > 1e-12 || (m.f1 - f).abs() > 1e-12 {
            return Err(format!("prf mismatch at ({tp}, {fp}, {fn_})"));
        }
    }
    Ok("1000 instances agree with brute force and closed forms".into())
}

fn bio() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let n = rng.gen_range(1..50);
        let spans = random_spans(&mut rng, n, 12, &["BANK", "PERSON", "CHEST"]);
        let tags = spans_to_bio(&spans, n).map_err(|e| e.to_string())?;
        if !tags.is_valid_bio() || keys(&bio_to_spans(&tags)) != keys(&spans) {
            return Err(format!("span set {i} did not round trip"));
        }
    }
    Ok("1000 span sets round trip".into())
}

fn validators() -> Outcome {
    let reference = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
    let cfg = CinConfig::new(["001"], reference, (16, 100)).map_err(|e| e.to_string())?;
    let mut cin_cases = 0;
    for province in ["001", "002"] {
        for d4 in 0..10 {
            for yy in ["00", "05", "19", "20", "21", "85", "99"] {
                let base = format!("{province}{d4}{yy}123456");
                for len in 10..=13 {
                    let s = if len <= 12 { base[..len].to_string() } else { format!("{base}7") };
                    if validate_cin(&s, &cfg) != cin_oracle(&s, &["001"], reference, (16, 100)) {
                        return Err(format!("CIN {s}"));
                    }
                    cin_cases += 1;
                }
            }
        }
    }
    let order = OrderCodeConfig {
        shop: SegmentPattern::new("A-Z", 3, 3).map_err(|e| e.to_string())?,
        routing: SegmentPattern::new("0-9", 2, 2).map_err(|e| e.to_string())?,
        delimiter: String::new(),
    };
    let mut order_cases = 0;
    for len in 8..=11 {
        for lead in 0..10 {
            let tail = format!("{lead}{}", &"987654321098"[..len - 1]);
            if validate_order_code(&format!("SHP42{tail}"), &order) != order_tail_oracle(&tail) {
                return Err(format!("order code tail {tail}"));
            }
            order_cases += 1;
        }
    }
    Ok(format!("{cin_cases} ID numbers, {order_cases} order codes agree with the oracles"))
}

fn merge_restore() -> Outcome {
    let schema = measurement_schema();
    // restoration alone, on gold boundaries
    let restore_rate = |cues: bool| {
        let (mut right, mut default, mut total) = (0, 0, 0);
        for r in measurement_corpus(300, 7, cues) {
            let gold: Vec<_> = r.gold.clone().unwrap_or_default().into_iter().filter(|s| s.label != "PERSON").collect();
            let merged: Vec<_> = gold.iter().map(|s| { let mut s = s.clone(); s.label = "MEASUREMENT".into(); s }).collect();
            for (g, s) in gold.iter().zip(restore_fine_labels(&merged, &r.tokens, &schema)) {
                total += 1;
                right += usize::from(s.label == g.label);
                default += usize::from(s.label == "CHEST");
            }
        }
        (right, default, total)
    };
    let (r1, _, t1) = restore_rate(true);
    let (_, d2, t2) = restore_rate(false);

    let cfg = TrainConfig { epochs: 5, seed: 3, ..TrainConfig::default() };
    let (m, _) = run_training(&measurement_corpus(500, 3, true), &schema, &cfg, None).map_err(|e| e.to_string())?;
    let p = Pipeline::new(schema, RuleSet::empty(), Arc::new(m), Gazetteer::default(), PostConfig::default())
        .map_err(|e| e.to_string())?;
    let mut found = 0;
    let mut total = 0;
    for r in measurement_corpus(200, 4, true) {
        let out = p.infer(&r).map_err(|e| e.to_string())?;
        for g in r.gold.iter().flatten() {
            total += 1;
            found += usize::from(out.spans.iter().any(|s| s.key() == g.key()));
        }
    }
    check(
        r1 == t1 && d2 == t2 && found == total,
        format!("with cues {r1}/{t1} restored, without cues {d2}/{t2} default, end to end {found}/{total}"),
    )
}

fn hybrid_margin() -> Outcome {
    let train = rule_favorable_corpus(1000, 1);
    let test = rule_favorable_corpus(300, 2);
    let cfg = TrainConfig { epochs: 8, seed: 1, ..TrainConfig::default() };
    let score = |p: &Pipeline| -> Result<f64, String> {
        let a = test.iter().map(|r| p.annotate(r)).collect::<hybrid_ner::Result<Vec<_>>>().map_err(|e| e.to_string())?;
        Ok(evaluate_corpus(&a).map_err(|e| e.to_string())?.micro.f1)
    };
    let schema = rule_favorable_schema();
    let (m, _) = run_training(&train, &schema, &cfg, None).map_err(|e| e.to_string())?;
    let hybrid = Pipeline::new(schema.clone(), rule_favorable_rules(), Arc::new(m), Gazetteer::default(), PostConfig::default())
        .map_err(|e| e.to_string())?;
    let plain = schema.without_rule_bindings();
    let (m, _) = run_training(&train, &plain, &cfg, None).map_err(|e| e.to_string())?;
    let model_only =
        Pipeline::new(plain, RuleSet::empty(), Arc::new(m), Gazetteer::default(), PostConfig::default()).map_err(|e| e.to_string())?;
    let (h, b) = (score(&hybrid)?, score(&model_only)?);
    check(h >= b + 0.02, format!("hybrid F1 {h:.4}, model-only F1 {b:.4}, margin {:+.4}", h - b))
}

fn error_cases() -> Outcome {
    let schema = hybrid_ner::schema::load_schema(fixtures_dir().join("schema.toml")).map_err(|e| e.to_string())?;
    let gaz = Gazetteer::load(fixtures_dir().join("gazetteer.tsv"), false).map_err(|e| e.to_string())?;
    let cfg = PostConfig::default();
    let surfaces = |r: &Record, spans: &[hybrid_ner::corpus::EntitySpan], label: &str| -> Vec<String> {
        spans.iter().filter(|s| s.label == label).map(|s| r.tokens.surface(s.start, s.end)).collect()
    };

    let r = Record::from_text("banks", "3 nhà băng quốc doanh khác là Agribank, VietinBank, BIDV và SJC");
    let at = |w: &str| r.tokens.iter().position(|t| t.text == w).unwrap();
    let list = span(at("Agribank"), at("BIDV") + 1, "BANK").with_source(Source::Model);
    let banks = surfaces(&r, &postprocess_all(&[list], &r.tokens, &schema, &Gazetteer::default(), &cfg), "BANK");

    let p = Record::from_text("person", "Thủ tướng Pham Minh Chinh phát biểu");
    let person = surfaces(&p, &postprocess_all(&[span(2, 3, "PERSON").with_source(Source::Model)], &p.tokens, &schema, &gaz, &cfg), "PERSON");

    let o = Record::from_text("ratio", "The 1/4 overtime hours were approved but I see the overtime allowance amount added");
    let t = classify_errors(&[span(1, 2, "ratio"), span(10, 12, "allowance")], &[span(10, 12, "allowance")]);

    let ok = banks == ["Agribank", "VietinBank", "BIDV"]
        && person == ["Pham Minh Chinh"]
        && o.tokens.surface(1, 2) == "1/4"
        && (t.exact, t.missing, t.errors()) == (1, 1, 1);
    check(ok, format!("banks {banks:?}, person {person:?}, ratio missing {}", t.missing))
}

fn error_mix() -> Outcome {
    let t = evaluate_corpus(&error_review_corpus()).map_err(|e| e.to_string())?.taxonomy;
    check(
        t.partial_share() == 0.85 && t.missing_share() == 0.15,
        format!("{} errors: partial {:.2}, missing {:.2}", t.errors(), t.partial_share(), t.missing_share()),
    )
}

fn batching() -> Outcome {
    let workload = bimodal_workload(2000, 2000.0, 11);
    let run = |strategy| {
        let p = BatchPolicy { strategy, ..BatchPolicy::default() };
        let rep = simulate(&workload, &p, 2, ServiceModel::default());
        let violations = idle_wait_violations(&rep, &p, 2).len();
        (rep.mean_padding_ratio, violations)
    };
    let (fifo, v1) = run(Strategy::Fifo);
    let (bucketed, v2) = run(Strategy::LengthBucketed);

    let h = serve(small_pipeline(), &ServerConfig::default(), "127.0.0.1:0").map_err(|e| e.to_string())?;
    let offline = small_pipeline();
    let stream = std::net::TcpStream::connect(h.local_addr()).map_err(|e| e.to_string())?;
    stream.set_read_timeout(Some(Duration::from_secs(20))).map_err(|e| e.to_string())?;
    let mut w = stream.try_clone().map_err(|e| e.to_string())?;
    let texts = sample_texts();
    for (i, t) in texts.iter().enumerate() {
        use std::io::Write;
        writeln!(w, "{}", serde_json::json!({"id": i, "text": t})).map_err(|e| e.to_string())?;
    }
    let mut mismatched = 0;
    let mut lines = std::io::BufRead::lines(std::io::BufReader::new(stream));
    for _ in 0..texts.len() {
        let line = lines.next().ok_or("connection closed")?.map_err(|e| e.to_string())?;
        let resp: serde_json::Value = serde_json::from_str(&line).map_err(|e| e.to_string())?;
        let i = resp["id"].as_u64().ok_or("bad id")? as usize;
        let want = serde_json::to_value(offline_views(&offline, &texts[i])).map_err(|e| e.to_string())?;
        let same = resp["spans"] == want;
        mismatched += usize::from(!same);
    }
    h.shutdown();
    check(
        bucketed < fifo && v1 == 0 && v2 == 0 && mismatched == 0,
        format!(
            "padding FIFO {fifo:.3} vs bucketed {bucketed:.3}, idle-wait violations {v1}/{v2}, {mismatched}/{} online mismatches",
            texts.len()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = fixture_copy();
    let hner = |args: &[&str]| -> Result<(), String> {
        let o = std::process::Command::new(env!("CARGO_BIN_EXE_hner")).current_dir(dir.path()).args(args).output().map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&o.stderr).into_owned())
        }
    };
    let mut runs = Vec::new();
    for i in 0..2 {
        hner(&["train", "synthetic.conll", "--schema", "schema.toml", "--rules", "rules.toml", "--out", "model.bin", "--epochs", "3", "--seed", "12"])?;
        let out = format!("tagged{i}.jsonl");
        hner(&["tag", "synthetic.conll", "--config", "pipeline.toml", "--out", &out])?;
        let read = |f: &str| std::fs::read(dir.path().join(f)).map_err(|e| e.to_string());
        runs.push((read("model.bin")?, read(&out)?));
    }
    check(
        runs[0] == runs[1],
        format!("two train+tag runs: {} model bytes, {} output bytes, identical: {}", runs[0].0.len(), runs[0].1.len(), runs[0] == runs[1]),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("gradient matches finite differences", gradient),
        ("softmax normalization and shift invariance", softmax_props),
        ("separable corpus learned", separable),
        ("entity counts and precision/recall/F1", metrics),
        ("BIO round trip", bio),
        ("ID number and order code validators", validators),
        ("label merging and restoration", merge_restore),
        ("hybrid beats model-only", hybrid_margin),
        ("reviewed error cases", error_cases),
        ("error taxonomy mix", error_mix),
        ("dynamic batching", batching),
        ("deterministic train and tag", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{:.1?}]", i + 1, t.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
