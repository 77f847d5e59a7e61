use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "dialsim-service", about = "Session service for the dialogue simulator")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Directory with schema.json, movie_kb.json, goals.json and
    /// templates.json. Generated in memory when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Minutes a session may sit idle before it is dropped.
    #[arg(long, default_value_t = 30)]
    idle_minutes: u64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let registry = dialsim_service::load_registry(args.data.as_deref())?
        .with_idle_timeout(Duration::from_secs(args.idle_minutes * 60));
    let registry = Arc::new(registry);

    let sweeper = registry.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.purge_expired();
        }
    });

    let listener = tokio::net::TcpListener::bind(&args.addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, dialsim_service::router(registry)).await?;
    Ok(())
}
