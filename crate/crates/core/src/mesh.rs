//! Brings up the local agent mesh: three agents and one router per routing
//! mode, all on loopback.

use std::path::Path;
use std::sync::Arc;

use crate::agents::{agent_card, AgentKind, AgentService, AgentSpec, ReasoningBackend};
use crate::mar::{proxy, BlobStore, ModalityRouter, RoutingMode, Telemetry};
use crate::net::{self, BindError, ServerHandle};
use crate::orchestrator::AgentUrls;
use crate::registry::CardRegistry;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Backends {
    /// Used by the voice and vision agents.
    pub analysis: Arc<dyn ReasoningBackend>,
    /// Used by the text agent's decision step.
    pub decision: Arc<dyn ReasoningBackend>,
}

pub struct AgentMesh {
    pub urls: AgentUrls,
    servers: Vec<ServerHandle>,
}

impl AgentMesh {
    pub async fn shutdown(self) {
        for s in self.servers {
            s.shutdown().await;
        }
    }
}

/// `ports` are voice, vision, text; 0 picks a free port.
pub async fn start_agents(host: &str, ports: [u16; 3], backends: &Backends) -> Result<AgentMesh, MeshError> {
    let mut servers = Vec::new();
    let mut urls = Vec::new();
    for (kind, port) in AgentKind::ALL.into_iter().zip(ports) {
        let listener = net::bind(&format!("{host}:{port}")).await?;
        let url = format!("http://{}", listener.local_addr()?);
        let backend = if kind == AgentKind::Text { backends.decision.clone() } else { backends.analysis.clone() };
        let svc = AgentService::new(AgentSpec { kind, card: agent_card(kind, &url), backend });
        servers.push(net::spawn(listener, svc.app())?);
        urls.push(url);
    }
    let [voice, vision, text] = <[String; 3]>::try_from(urls).expect("three agents");
    Ok(AgentMesh { urls: AgentUrls { voice, vision, text }, servers })
}

pub struct RouterInstance {
    pub url: String,
    pub router: Arc<ModalityRouter>,
    server: ServerHandle,
}

impl RouterInstance {
    pub fn telemetry(&self) -> Arc<Telemetry> {
        self.router.telemetry().clone()
    }

    pub fn blobs(&self) -> Arc<BlobStore> {
        self.router.blobs().clone()
    }

    pub async fn shutdown(self) {
        self.server.shutdown().await;
    }
}

/// Starts a router in `mode`. Its blob store lives under `blob_dir` and is
/// served by the router itself.
pub async fn start_router(addr: &str, mode: RoutingMode, registry: Arc<CardRegistry>, blob_dir: &Path) -> Result<RouterInstance, MeshError> {
    let listener = net::bind(addr).await?;
    let url = format!("http://{}", listener.local_addr()?);
    let blobs = Arc::new(BlobStore::open(blob_dir, &url)?);
    let router = Arc::new(ModalityRouter::new(mode, registry, Arc::new(Telemetry::new()), blobs));
    let server = net::spawn(listener, proxy::app(router.clone()))?;
    Ok(RouterInstance { url, router, server })
}
