//! Agent Card discovery with a TTL cache.
//!
//! Cards are fetched from `<agent_url>/.well-known/agent-card.json` and kept
//! for `ttl`. Concurrent misses for the same agent share one upstream fetch.
//! When a refetch fails, a stale entry younger than `ttl + stale_grace` is
//! served with a warning instead of failing the dispatch.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use async_trait::async_trait;

use crate::a2a::{AgentCard, MimeType, WELL_KNOWN_CARD_PATH};

pub const DEFAULT_TTL: Duration = Duration::from_secs(60);
pub const DEFAULT_STALE_GRACE: Duration = Duration::from_secs(300);

pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }
}

/// Test clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock {
    base: Instant,
    offset: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self { base: Instant::now(), offset: Mutex::new(Duration::ZERO) }
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap() += by;
    }
}

impl Default for ManualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.base + *self.offset.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("agent {url} unreachable: {reason}")]
    NetworkUnreachable { url: String, reason: String },
    #[error("agent {url} answered card request with HTTP {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("agent {url} published an invalid card: {reason}")]
    CardParse { url: String, reason: String },
}

#[async_trait]
pub trait CardFetcher: Send + Sync {
    async fn fetch(&self, agent_url: &str) -> Result<AgentCard, RegistryError>;
}

/// Parses and validates a card body.
pub fn parse_card(agent_url: &str, body: &[u8]) -> Result<AgentCard, RegistryError> {
    let parse_err = |reason: String| RegistryError::CardParse { url: agent_url.to_string(), reason };
    let card: AgentCard = serde_json::from_slice(body).map_err(|e| parse_err(e.to_string()))?;
    card.validate().map_err(|e| parse_err(e.to_string()))?;
    Ok(card)
}

#[derive(Debug, Clone, Default)]
pub struct HttpCardFetcher {
    client: reqwest::Client,
}

impl HttpCardFetcher {
    pub fn new(client: reqwest::Client) -> Self {
        Self { client }
    }
}

#[async_trait]
impl CardFetcher for HttpCardFetcher {
    async fn fetch(&self, agent_url: &str) -> Result<AgentCard, RegistryError> {
        let url = format!("{}{}", agent_url.trim_end_matches('/'), WELL_KNOWN_CARD_PATH);
        let unreachable =
            |e: reqwest::Error| RegistryError::NetworkUnreachable { url: agent_url.to_string(), reason: e.to_string() };
        let resp = self.client.get(&url).send().await.map_err(unreachable)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(RegistryError::HttpStatus { url: agent_url.to_string(), status: status.as_u16() });
        }
        let body = resp.bytes().await.map_err(unreachable)?;
        parse_card(agent_url, &body)
    }
}

/// Input modes an agent accepts: the union of its skills' `inputModes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilitySet(Arc<BTreeSet<MimeType>>);

impl CapabilitySet {
    pub fn from_card(card: &AgentCard) -> Self {
        Self(Arc::new(card.input_modes()))
    }

    pub fn from_modes<I: IntoIterator<Item = MimeType>>(modes: I) -> Self {
        Self(Arc::new(modes.into_iter().collect()))
    }

    /// Exact (case-insensitive) membership, with `type/*` wildcards.
    pub fn covers(&self, mime: &MimeType) -> bool {
        self.0.iter().any(|declared| declared.matches(mime))
    }

    pub fn modes(&self) -> &BTreeSet<MimeType> {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct CachedCard {
    pub card: AgentCard,
    pub capabilities: CapabilitySet,
    pub fetched_at: Instant,
    pub ttl: Duration,
}

impl CachedCard {
    pub fn is_fresh(&self, now: Instant) -> bool {
        now.saturating_duration_since(self.fetched_at) < self.ttl
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegistryConfig {
    pub ttl: Duration,
    pub stale_grace: Duration,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self { ttl: DEFAULT_TTL, stale_grace: DEFAULT_STALE_GRACE }
    }
}

pub struct CardRegistry {
    fetcher: Arc<dyn CardFetcher>,
    clock: Arc<dyn Clock>,
    config: RegistryConfig,
    entries: RwLock<HashMap<String, Arc<CachedCard>>>,
    refresh_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    stale_served: AtomicU64,
}

impl CardRegistry {
    pub fn new(fetcher: Arc<dyn CardFetcher>, clock: Arc<dyn Clock>, config: RegistryConfig) -> Self {
        Self {
            fetcher,
            clock,
            config,
            entries: RwLock::new(HashMap::new()),
            refresh_locks: Mutex::new(HashMap::new()),
            stale_served: AtomicU64::new(0),
        }
    }

    pub fn http(client: reqwest::Client, config: RegistryConfig) -> Self {
        Self::new(Arc::new(HttpCardFetcher::new(client)), Arc::new(SystemClock), config)
    }

    pub fn config(&self) -> RegistryConfig {
        self.config
    }

    /// Number of times a stale card was served because a refetch failed.
    pub fn stale_served(&self) -> u64 {
        self.stale_served.load(Ordering::Relaxed)
    }

    fn key(agent_url: &str) -> String {
        agent_url.trim_end_matches('/').to_string()
    }

    fn cached(&self, key: &str) -> Option<Arc<CachedCard>> {
        self.entries.read().unwrap().get(key).cloned()
    }

    fn store(&self, key: &str, card: AgentCard) -> Arc<CachedCard> {
        let entry = Arc::new(CachedCard {
            capabilities: CapabilitySet::from_card(&card),
            card,
            fetched_at: self.clock.now(),
            ttl: self.config.ttl,
        });
        self.entries.write().unwrap().insert(key.to_string(), entry.clone());
        entry
    }

    /// Fetches the card unconditionally and refreshes the cache.
    pub async fn fetch_card(&self, agent_url: &str) -> Result<AgentCard, RegistryError> {
        let key = Self::key(agent_url);
        let card = self.fetcher.fetch(&key).await?;
        Ok(self.store(&key, card).card.clone())
    }

    pub async fn get_card(&self, agent_url: &str) -> Result<Arc<CachedCard>, RegistryError> {
        let key = Self::key(agent_url);
        if let Some(entry) = self.cached(&key).filter(|e| e.is_fresh(self.clock.now())) {
            return Ok(entry);
        }

        let lock = self.refresh_locks.lock().unwrap().entry(key.clone()).or_default().clone();
        let _guard = lock.lock().await;
        // Another caller may have refreshed while we waited.
        let previous = self.cached(&key);
        if let Some(entry) = previous.clone().filter(|e| e.is_fresh(self.clock.now())) {
            return Ok(entry);
        }

        match self.fetcher.fetch(&key).await {
            Ok(card) => Ok(self.store(&key, card)),
            Err(err) => {
                let now = self.clock.now();
                match previous {
                    Some(stale) if now.saturating_duration_since(stale.fetched_at) < stale.ttl + self.config.stale_grace => {
                        tracing::warn!(agent = %key, error = %err, "card refetch failed; serving stale card");
                        self.stale_served.fetch_add(1, Ordering::Relaxed);
                        Ok(stale)
                    }
                    _ => Err(err),
                }
            }
        }
    }

    pub async fn get_capabilities(&self, agent_url: &str) -> Result<CapabilitySet, RegistryError> {
        Ok(self.get_card(agent_url).await?.capabilities.clone())
    }

    /// Wall-clock cost of one capability lookup. Meant for warm caches; a
    /// cold lookup includes the network fetch.
    pub async fn lookup_latency_probe(&self, agent_url: &str) -> Duration {
        let start = Instant::now();
        let _ = self.get_capabilities(agent_url).await;
        start.elapsed()
    }
}

/// In-memory card source keyed by agent URL, counting upstream fetches.
#[derive(Default)]
pub struct StaticCardFetcher {
    cards: RwLock<HashMap<String, AgentCard>>,
    fetches: AtomicU64,
    failing: RwLock<BTreeSet<String>>,
    delay: Option<Duration>,
}

impl StaticCardFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_delay(delay: Duration) -> Self {
        Self { delay: Some(delay), ..Self::default() }
    }

    pub fn insert(&self, card: AgentCard) {
        let key = CardRegistry::key(&card.url);
        self.cards.write().unwrap().insert(key, card);
    }

    pub fn set_failing(&self, agent_url: &str, failing: bool) {
        let key = CardRegistry::key(agent_url);
        let mut set = self.failing.write().unwrap();
        if failing {
            set.insert(key);
        } else {
            set.remove(&key);
        }
    }

    pub fn fetch_count(&self) -> u64 {
        self.fetches.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl CardFetcher for StaticCardFetcher {
    async fn fetch(&self, agent_url: &str) -> Result<AgentCard, RegistryError> {
        self.fetches.fetch_add(1, Ordering::SeqCst);
        if let Some(d) = self.delay {
            tokio::time::sleep(d).await;
        }
        if self.failing.read().unwrap().contains(agent_url) {
            return Err(RegistryError::NetworkUnreachable { url: agent_url.into(), reason: "injected failure".into() });
        }
        self.cards.read().unwrap().get(agent_url).cloned().ok_or_else(|| RegistryError::HttpStatus {
            url: agent_url.into(),
            status: 404,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::{AgentCapabilities, Skill, PROTOCOL_VERSION};

    fn mime(s: &str) -> MimeType {
        MimeType::parse(s).unwrap()
    }

    fn card(url: &str, modes: &[&str]) -> AgentCard {
        AgentCard {
            name: "agent".into(),
            description: String::new(),
            url: url.into(),
            protocol_version: PROTOCOL_VERSION.into(),
            capabilities: AgentCapabilities::default(),
            skills: vec![Skill {
                id: "s".into(),
                name: String::new(),
                description: String::new(),
                input_modes: modes.iter().map(|m| mime(m)).collect(),
                output_modes: vec![mime("text/plain")],
            }],
        }
    }

    fn setup() -> (Arc<StaticCardFetcher>, Arc<ManualClock>, CardRegistry) {
        let fetcher = Arc::new(StaticCardFetcher::new());
        fetcher.insert(card("http://voice:1", &["audio/wav", "audio/webm"]));
        fetcher.insert(card("http://text:3", &["text/plain"]));
        let clock = Arc::new(ManualClock::new());
        let reg = CardRegistry::new(fetcher.clone(), clock.clone(), RegistryConfig::default());
        (fetcher, clock, reg)
    }

    #[tokio::test]
    async fn thirty_seconds_apart_is_one_fetch() {
        let (fetcher, clock, reg) = setup();
        reg.get_capabilities("http://voice:1").await.unwrap();
        clock.advance(Duration::from_secs(30));
        reg.get_capabilities("http://voice:1").await.unwrap();
        assert_eq!(fetcher.fetch_count(), 1);
    }

    #[tokio::test]
    async fn sixty_one_seconds_apart_is_two_fetches() {
        let (fetcher, clock, reg) = setup();
        reg.get_capabilities("http://voice:1").await.unwrap();
        clock.advance(Duration::from_secs(61));
        reg.get_capabilities("http://voice:1").await.unwrap();
        assert_eq!(fetcher.fetch_count(), 2);
    }

    #[tokio::test]
    async fn entry_expires_exactly_at_ttl() {
        let (fetcher, clock, reg) = setup();
        reg.get_capabilities("http://voice:1").await.unwrap();
        clock.advance(Duration::from_secs(59));
        reg.get_capabilities("http://voice:1/").await.unwrap();
        assert_eq!(fetcher.fetch_count(), 1);
        clock.advance(Duration::from_secs(1));
        reg.get_capabilities("http://voice:1").await.unwrap();
        assert_eq!(fetcher.fetch_count(), 2);
    }

    #[tokio::test]
    async fn text_agent_capabilities() {
        let (_, _, reg) = setup();
        let caps = reg.get_capabilities("http://text:3").await.unwrap();
        assert_eq!(caps.modes().iter().map(|m| m.as_str()).collect::<Vec<_>>(), vec!["text/plain"]);
    }

    #[tokio::test]
    async fn stale_card_served_when_refetch_fails() {
        let (fetcher, clock, reg) = setup();
        reg.get_capabilities("http://voice:1").await.unwrap();
        fetcher.set_failing("http://voice:1", true);
        clock.advance(Duration::from_secs(90));
        let caps = reg.get_capabilities("http://voice:1").await.unwrap();
        assert!(caps.covers(&mime("audio/wav")));
        assert_eq!(reg.stale_served(), 1);
        // Beyond the grace window the failure propagates.
        clock.advance(DEFAULT_STALE_GRACE);
        assert!(reg.get_capabilities("http://voice:1").await.is_err());
    }

    #[tokio::test]
    async fn miss_without_entry_propagates() {
        let (_, _, reg) = setup();
        assert!(matches!(
            reg.get_capabilities("http://nowhere:9").await,
            Err(RegistryError::HttpStatus { status: 404, .. })
        ));
    }

    #[tokio::test]
    async fn concurrent_misses_coalesce() {
        let fetcher = Arc::new(StaticCardFetcher::with_delay(Duration::from_millis(50)));
        fetcher.insert(card("http://vision:2", &["image/png"]));
        let reg = Arc::new(CardRegistry::new(fetcher.clone(), Arc::new(SystemClock), RegistryConfig::default()));
        let lookups = (0..16).map(|_| {
            let reg = reg.clone();
            tokio::spawn(async move { reg.get_capabilities("http://vision:2").await })
        });
        for r in futures::future::join_all(lookups).await {
            assert!(r.unwrap().unwrap().covers(&mime("image/png")));
        }
        assert_eq!(fetcher.fetch_count(), 1);
    }

    #[test]
    fn capability_set_is_skill_union() {
        let mut c = card("http://a:1", &["audio/wav"]);
        c.skills.push(Skill {
            id: "t".into(),
            name: String::new(),
            description: String::new(),
            input_modes: vec![mime("text/plain"), mime("audio/wav")],
            output_modes: vec![mime("text/plain")],
        });
        let caps = CapabilitySet::from_card(&c);
        assert_eq!(caps.modes().len(), 2);
        assert!(caps.covers(&mime("text/plain")));
    }
}
