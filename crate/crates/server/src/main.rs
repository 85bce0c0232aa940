use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::Parser;
use pathmatrix_server::{serve, ServerConfig};

/// Serve pathmatrix models and explanations over HTTP.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Persist models under this directory and reload them on start.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Allow cross-origin requests (for a UI served from another port).
    #[arg(long)]
    cors: bool,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    serve(ServerConfig {
        addr: SocketAddr::new(args.host, args.port),
        data_dir: args.data_dir,
        cors: args.cors,
    })
    .await
}
