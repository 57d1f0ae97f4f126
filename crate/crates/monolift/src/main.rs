use std::process::ExitCode;

fn main() -> ExitCode {
    monolift::cli::run_from_args()
}
