mod common;

use std::sync::Arc;
use std::time::Duration;

use mma2a::a2a::MimeType;
use mma2a::registry::{CardRegistry, ManualClock, RegistryConfig, StaticCardFetcher};

fn triple() -> common::Triple {
    common::Triple {
        kind: "file",
        mime: "image/png",
        declared: vec!["image/png".into(), "text/plain".into()],
        mode: common::OracleMode::Native,
        priority: 0,
    }
}

const URL: &str = "http://vision.test";

fn setup(delay: Option<Duration>) -> (Arc<StaticCardFetcher>, Arc<ManualClock>, CardRegistry) {
    let fetcher = Arc::new(delay.map_or_else(StaticCardFetcher::new, StaticCardFetcher::with_delay));
    fetcher.insert(triple().card(URL));
    let clock = Arc::new(ManualClock::new());
    let reg = CardRegistry::new(fetcher.clone(), clock.clone(), RegistryConfig::default());
    (fetcher, clock, reg)
}

#[tokio::test]
async fn one_fetch_per_sixty_second_window() {
    let (fetcher, clock, reg) = setup(None);
    // Ten minutes of lookups every 250 ms.
    for window in 0..10u64 {
        for _ in 0..240 {
            let caps = reg.get_capabilities(URL).await.unwrap();
            assert!(caps.covers(&MimeType::parse("image/png").unwrap()));
            clock.advance(Duration::from_millis(250));
        }
        assert_eq!(fetcher.fetch_count(), window + 1);
    }
}

#[tokio::test]
async fn concurrent_misses_share_one_fetch() {
    let (fetcher, clock, reg) = setup(Some(Duration::from_millis(20)));
    let reg = Arc::new(reg);
    for round in 1..=3u64 {
        let lookups: Vec<_> = (0..64)
            .map(|_| {
                let reg = reg.clone();
                tokio::spawn(async move { reg.get_capabilities(URL).await.unwrap() })
            })
            .collect();
        for l in lookups {
            l.await.unwrap();
        }
        assert_eq!(fetcher.fetch_count(), round);
        clock.advance(Duration::from_secs(60));
    }
}

#[tokio::test]
async fn stale_card_served_within_grace_then_error() {
    let (fetcher, clock, reg) = setup(None);
    reg.get_capabilities(URL).await.unwrap();
    fetcher.set_failing(URL, true);
    clock.advance(Duration::from_secs(61));
    assert!(reg.get_capabilities(URL).await.is_ok());
    assert_eq!(reg.stale_served(), 1);
    clock.advance(reg.config().stale_grace);
    assert!(reg.get_capabilities(URL).await.is_err());
    fetcher.set_failing(URL, false);
    assert!(reg.get_capabilities(URL).await.is_ok());
}

#[tokio::test]
async fn unknown_agent_is_an_error() {
    let (_f, _c, reg) = setup(None);
    assert!(reg.get_capabilities("http://nobody.test").await.is_err());
}

#[tokio::test]
async fn warm_lookup_p99_under_five_ms() {
    let (_f, _c, reg) = setup(None);
    reg.get_capabilities(URL).await.unwrap();
    let mut samples: Vec<Duration> = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        samples.push(reg.lookup_latency_probe(URL).await);
    }
    samples.sort();
    let p99 = samples[samples.len() * 99 / 100];
    assert!(p99 < Duration::from_millis(5), "p99 {p99:?}");
}
