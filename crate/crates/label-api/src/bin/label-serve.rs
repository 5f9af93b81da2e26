use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Serve a labeling session on localhost.
#[derive(Debug, Parser)]
#[command(name = "label-serve", version)]
struct Args {
    /// Session directory (tasks.json, images/, labels.csv).
    #[arg(long)]
    session: PathBuf,
    #[arg(long, default_value_t = 8077)]
    port: u16,
    /// Directory of static front-end files served at `/`.
    #[arg(long)]
    assets: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    match epigraph_label_api::serve(&args.session, args.port, args.assets).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
