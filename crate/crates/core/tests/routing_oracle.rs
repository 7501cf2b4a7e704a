mod common;

use std::sync::Arc;

use common::{random_triple, OracleMode, Triple, DECLARED_MIMES, PART_MIMES};
use mma2a::a2a::{MimeType, Part};
use mma2a::mar::{decide_outcome, is_transcoded, BlobStore, ModalityRouter, Outcome, TaskPriority, Telemetry, TranscoderKind};
use mma2a::registry::{CapabilitySet, CardRegistry, ManualClock, RegistryConfig, StaticCardFetcher};
use proptest::prelude::*;
use rand::SeedableRng;

fn verdict_matches(t: &Triple, outcome: Outcome, tr: Option<TranscoderKind>) -> bool {
    let v = t.oracle();
    let tr = tr.map(|k| match k {
        TranscoderKind::SpeechToText => "stt",
        TranscoderKind::ImageCaption => "caption",
    });
    v.native == (outcome == Outcome::Native) && v.transcoder == tr
}

fn triple_strategy() -> impl Strategy<Value = Triple> {
    let mode = prop_oneof![
        Just(OracleMode::Native),
        Just(OracleMode::TextBottleneck),
        Just(OracleMode::Adaptive(None)),
        (0u64..=12).prop_map(|t| OracleMode::Adaptive(Some(t))),
    ];
    (
        prop::sample::select(&["text", "data", "file", "file", "file"][..]),
        prop::sample::select(PART_MIMES),
        prop::collection::vec(prop::sample::select(DECLARED_MIMES).prop_map(String::from), 0..6),
        mode,
        0u32..=10,
    )
        .prop_map(|(kind, mime, declared, mode, priority)| Triple { kind, mime, declared, mode, priority })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decide_outcome_agrees_with_oracle(t in triple_strategy()) {
        let part = t.part(vec![1, 2, 3]);
        let caps = CapabilitySet::from_modes(t.declared.iter().map(|m| MimeType::parse(m).unwrap()));
        let (outcome, tr) = decide_outcome(part.modality(), &part.representative_mime(), &caps, t.mode.to_mode(), TaskPriority(t.priority));
        prop_assert!(verdict_matches(&t, outcome, tr), "{t:?} -> {outcome:?} {tr:?}, oracle {:?}", t.oracle());
    }
}

#[test]
fn modes_are_nested() {
    // Whatever text-bottleneck forwards natively, adaptive forwards too,
    // and whatever adaptive forwards, native forwards.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5_000 {
        let mut t = random_triple(&mut rng);
        let mut native_under = |m: OracleMode| {
            t.mode = m;
            t.oracle().native
        };
        let tbn = native_under(OracleMode::TextBottleneck);
        let ada = native_under(OracleMode::Adaptive(Some(5)));
        let nat = native_under(OracleMode::Native);
        assert!(!tbn || ada);
        assert!(!ada || nat);
    }
}

#[tokio::test]
async fn route_agrees_with_oracle_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fetcher = Arc::new(StaticCardFetcher::new());
    let registry = Arc::new(CardRegistry::new(fetcher.clone(), Arc::new(ManualClock::new()), RegistryConfig::default()));
    let blobs = Arc::new(BlobStore::open(dir.path(), "http://127.0.0.1:9").unwrap());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for i in 0..2_000 {
        let t = random_triple(&mut rng);
        let url = format!("http://agent-{i}.test");
        fetcher.insert(t.card(&url));
        let router = ModalityRouter::new(t.mode.to_mode(), registry.clone(), Arc::new(Telemetry::new()), blobs.clone());
        let part = t.part(vec![0x52, 0x49, 0x46, 0x46]);
        let (routed, decision) = router.route("task", part.clone(), &url, TaskPriority(t.priority)).await.unwrap();
        assert!(verdict_matches(&t, decision.outcome, decision.transcoder_used), "{t:?} -> {decision:?}");
        match decision.transcoder_used {
            Some(_) => assert!(matches!(&routed, Part::Text { content } if is_transcoded(content))),
            None => assert_eq!(routed, part),
        }
        assert_eq!(router.telemetry().snapshot().len(), 1);
    }
}
