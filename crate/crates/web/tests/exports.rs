use mlqa_web::{average_precision, explore_merge, explore_similarity};

#[test]
fn similarity_reports_vector_and_cosine() {
    let out = explore_similarity("dog perro:0.75 can:0.25\nbark ladrar:1.0", "el perro puede ladrar");
    assert!(out.contains("perro\t0.3750"), "{out}");
    assert!(out.contains("ladrar\t0.5000"), "{out}");
    assert!(out.contains("cosine\t"), "{out}");
}

#[test]
fn similarity_rejects_malformed_table() {
    assert!(explore_similarity("dog perro", "x").starts_with("error:"));
    assert!(explore_similarity("dog perro:1.5", "x").starts_with("error:"));
}

#[test]
fn weighted_merge_promotes_english() {
    let input = "en e1 0.9\nen e2 0.6\nen e3 0.1\nar a1 0.8\nar a2 0.7\nar a3 0.1";
    let plain = explore_merge(input, "uniform", 0.0, 4);
    let weighted = explore_merge(input, "weighted", 10.0, 4);
    let first_two = |s: &str| s.lines().take(2).map(|l| l.split('\t').nth(2).unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(first_two(&weighted), ["en", "en"]);
    assert_ne!(first_two(&plain), ["en", "en"]);
    assert!(weighted.contains("ratio en/ch/ar\t50.0\t0.0\t50.0"), "{weighted}");
}

#[test]
fn alternate_merge_interleaves() {
    let out = explore_merge("en e1 0.9\nen e2 0.8\nar a1 0.1\nar a2 0.05", "alternate", 0.0, 4);
    let langs: Vec<&str> = out.lines().take(4).map(|l| l.split('\t').nth(2).unwrap()).collect();
    assert_eq!(langs, ["en", "ar", "en", "ar"]);
}

#[test]
fn merge_reports_bad_input() {
    assert!(explore_merge("xx e1 0.5", "uniform", 0.0, 3).starts_with("error:"));
    assert!(explore_merge("en e1 0.5", "sideways", 0.0, 3).starts_with("error:"));
    assert!(explore_merge("en e1 0.5", "weighted", 0.0, 3).starts_with("error:"));
}

#[test]
fn ap_from_marks() {
    // Relevant at 1, 3, 4 out of R = 4: (1 + 2/3 + 3/4) / 4.
    let ap = average_precision("1 0 1 1 0", 20, 4);
    assert!((ap - (1.0 + 2.0 / 3.0 + 0.75) / 4.0).abs() < 1e-12);
    assert_eq!(average_precision("+,-,+", 1, 2), 1.0);
    assert_eq!(average_precision("000", 20, 0), 0.0);
}
