use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = monobo_campaign::cli::Cli::parse();
    match monobo_campaign::cli::run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
