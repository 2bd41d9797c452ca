use std::process::ExitCode;

fn main() -> ExitCode {
    prefixchain::cli::run()
}
