use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use framesearch_core::services::{http, ServiceConfig, ServiceState};

#[derive(Args)]
pub struct ServeArgs {
    /// Service configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start a single service; only `kn_lookup` is supported.
    #[arg(long)]
    only: Option<String>,
    /// Overrides the configured port (0 picks a free one).
    #[arg(long)]
    port: Option<u16>,
}

pub fn run(args: ServeArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig { host: "127.0.0.1".into(), ..Default::default() },
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(p) = args.port {
        cfg.port = Some(p);
    }
    let state = match args.only.as_deref() {
        None => {
            if args.config.is_none() {
                bail!("--config is required unless --only kn_lookup is given");
            }
            ServiceState::load(&cfg)?
        }
        Some("kn_lookup") => {
            if cfg.knowledge_files.is_empty() {
                bail!("kn_lookup needs knowledge files (config `knowledge_files` or KN_FILES)");
            }
            ServiceState::knowledge_only(&cfg)?
        }
        Some(other) => bail!("unsupported --only `{other}` (expected kn_lookup)"),
    };
    let ip: IpAddr = cfg.host.parse().with_context(|| format!("bad host `{}`", cfg.host))?;
    let handle = http::spawn(Arc::new(state), SocketAddr::new(ip, cfg.port()))?;
    println!("listening on {}", handle.base_url());
    log::info!("serving on {}", handle.base_url());
    loop {
        std::thread::park();
    }
}
