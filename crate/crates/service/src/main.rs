use clap::Parser;
use qpdesign_service::{serve, ServeConfig};

#[derive(Parser)]
#[command(name = "qpdesign-service", version, about = "JSON API for delayed-feedback root assignment")]
struct Cli {
    #[command(flatten)]
    config: ServeConfig,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    serve(Cli::parse().config).await
}
