use codhy_core::agents::{EvidenceLevel, EvidenceStatus, Hypothesis, RationaleType, ValidationResult, Verdict};
use codhy_core::ranking::{
    composite, g_raw, normalize_and_compose, rank, Normalization, ScoreBreakdown, ScoreWeights, ScoredHypothesis,
    SynergyTable, E_CAP,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn validation(verdict: Verdict, safety: u8) -> ValidationResult {
    ValidationResult {
        verdict,
        safety_score: safety,
        toxicity_risk: "t".into(),
        novelty_exact: Some(true),
        novelty_in_context: Some(true),
        evidence_status: EvidenceStatus::Inferred,
        evidence_level: EvidenceLevel::None,
        literature_hits: vec![],
        exact_hits: vec![],
        context_hits: vec![],
        rationale: String::new(),
        failure: None,
    }
}

fn breakdown(e: usize, s: f64, c: u8, safety: u8) -> ScoreBreakdown {
    let w = ScoreWeights::default();
    ScoreBreakdown {
        edge_support: e,
        similarity_strength: s,
        evidence_indicator: c,
        weights: w,
        g_raw: g_raw(e, s, c, &w),
        g_norm: 0.0,
        safety,
        composite: 0.0,
    }
}

fn scored(a: &str, b: &str, verdict: Verdict, g: f64, composite: f64) -> ScoredHypothesis {
    let mut bd = breakdown(0, 0.0, 0, 0);
    bd.g_raw = g;
    bd.composite = composite;
    ScoredHypothesis {
        hypothesis: Hypothesis::new(a, b, "m", RationaleType::InferredSimilarity).unwrap(),
        validation: validation(verdict, 0),
        breakdown: bd,
    }
}

/// Straight transcription of the score definition, kept apart from the library.
fn oracle_g(e: usize, s: f64, c: u8) -> f64 {
    let cap = 5.0_f64;
    ((e as f64).min(cap) / cap + s + f64::from(c)) / 3.0
}

#[test]
fn hand_evaluated_graph_score() {
    let w = ScoreWeights::default();
    assert_eq!(g_raw(0, 0.0, 0, &w), 0.0);
    let g = g_raw(2, 0.5, 1, &w);
    assert!((g - (0.4 + 0.5 + 1.0) / 3.0).abs() < 1e-12);
    assert_eq!(format!("{g:.4}"), "0.6333");
    assert!((g_raw(E_CAP + 3, 1.0, 1, &w) - 1.0).abs() < 1e-12);
}

#[test]
fn full_graph_score_and_safety_eight_compose_to_nine() {
    assert_eq!(composite(1.0, 8), 9.0);
    assert_eq!(composite(0.0, 0), 0.0);
    let mut one = vec![breakdown(2, 0.5, 1, 8)];
    normalize_and_compose(&mut one, Normalization::RunLocal);
    assert_eq!(one[0].g_norm, 1.0);
    assert_eq!(one[0].composite, 9.0);
}

#[test]
fn fixed_normalization_keeps_raw_scale() {
    let mut b = vec![breakdown(2, 0.5, 1, 8), breakdown(0, 0.0, 1, 8)];
    normalize_and_compose(&mut b, Normalization::Fixed);
    assert!((b[0].g_norm - oracle_g(2, 0.5, 1)).abs() < 1e-12);
}

#[test]
fn ties_break_on_verdict_then_score_then_pair() {
    let items = vec![
        scored("A", "B", Verdict::Proceed, 0.5, 9.0),
        scored("C", "D", Verdict::Reject, 0.5, 4.8),
        scored("E", "F", Verdict::Caution, 0.5, 9.0),
    ];
    let got: Vec<(usize, String)> = rank(items)
        .into_iter()
        .map(|r| (r.rank, r.scored.hypothesis.drug_a.clone()))
        .collect();
    assert_eq!(got, [(1, "A".into()), (2, "E".into()), (3, "C".into())]);

    let items = vec![
        scored("Z", "Y", Verdict::Proceed, 0.5, 9.0),
        scored("B", "C", Verdict::Proceed, 0.5, 9.0),
        scored("A", "Q", Verdict::Proceed, 0.5, 9.0),
        scored("A", "C", Verdict::Proceed, 0.5, 9.0),
    ];
    let order: Vec<(String, String)> = rank(items)
        .into_iter()
        .map(|r| (r.scored.hypothesis.drug_a.clone(), r.scored.hypothesis.drug_b.clone()))
        .collect();
    let pairs = |v: &[(&str, &str)]| v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>();
    assert_eq!(order, pairs(&[("A", "C"), ("A", "Q"), ("B", "C"), ("Y", "Z")]));
}

#[test]
fn composite_is_monotone_in_every_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // the saturated entry pins the run maximum at 1
    let anchor = breakdown(E_CAP, 1.0, 1, 10);
    let score = |b: ScoreBreakdown| {
        let mut run = vec![anchor.clone(), b];
        normalize_and_compose(&mut run, Normalization::RunLocal);
        run[1].composite
    };
    for _ in 0..10_000 {
        let e = rng.gen_range(0..8);
        let s = rng.gen_range(0.0..=1.0);
        let c = rng.gen_range(0..=1);
        let safety = rng.gen_range(0..=10);
        let base = score(breakdown(e, s, c, safety));
        let bumps = [
            breakdown(e + 1, s, c, safety),
            breakdown(e, (s + rng.gen_range(0.0..=1.0_f64)).min(1.0), c, safety),
            breakdown(e, s, 1, safety),
            breakdown(e, s, c, (safety + 1).min(10)),
        ];
        for b in bumps {
            let after = score(b);
            assert!(after >= base - 1e-12, "{after} < {base}");
            assert!((0.0..=10.0).contains(&after));
        }
    }
}

#[test]
fn ranking_survives_uniform_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let n = rng.gen_range(1..8);
        let raw: Vec<(f64, u8)> = (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0..=10))).collect();
        let k = rng.gen_range(0.01..100.0);
        let order = |scale: f64| {
            let mut bds: Vec<ScoreBreakdown> = raw
                .iter()
                .map(|(g, s)| {
                    let mut b = breakdown(0, 0.0, 0, *s);
                    b.g_raw = g * scale;
                    b
                })
                .collect();
            normalize_and_compose(&mut bds, Normalization::RunLocal);
            let items = bds
                .into_iter()
                .enumerate()
                .map(|(i, b)| ScoredHypothesis {
                    hypothesis: Hypothesis::new(&format!("d{i}"), "z", "m", RationaleType::InferredSimilarity)
                        .unwrap(),
                    validation: validation(Verdict::Caution, b.safety),
                    breakdown: b,
                })
                .collect();
            rank(items)
                .into_iter()
                .map(|r| r.scored.hypothesis.drug_a.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(order(1.0), order(k));
    }
}

#[test]
fn synergy_rows_fold_into_min_and_max() {
    let t = SynergyTable::parse("A,B,12.1\nB,A,-3.4\n").unwrap();
    let r = t.lookup("A", "B").unwrap();
    assert_eq!((r.max_synergy, r.min_synergy, r.n_observations), (12.1, -3.4, 2));
    assert_eq!(t.lookup("B", "A"), t.lookup("A", "B"));
    assert!(t.lookup("A", "C").is_none());
}

#[test]
fn bundled_synergy_fixture_loads() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synergy.csv");
    let t = SynergyTable::load(&path).unwrap();
    let r = t.lookup("palbociclib", "afatinib").unwrap();
    assert_eq!((r.max_synergy, r.min_synergy, r.n_observations), (15.0, 8.1, 3));
}

proptest! {
    #[test]
    fn normalized_scores_stay_in_range(
        rows in prop::collection::vec((0usize..12, 0.0f64..=1.0, 0u8..=1, 0u8..=10), 1..10)
    ) {
        let mut b: Vec<ScoreBreakdown> = rows.iter().map(|(e, s, c, k)| breakdown(*e, *s, *c, *k)).collect();
        for bd in &b {
            prop_assert!((bd.g_raw - oracle_g(bd.edge_support, bd.similarity_strength, bd.evidence_indicator)).abs() < 1e-12);
        }
        normalize_and_compose(&mut b, Normalization::RunLocal);
        for bd in &b {
            prop_assert!((0.0..=1.0).contains(&bd.g_norm));
            prop_assert!((0.0..=10.0).contains(&bd.composite));
        }
    }
}
