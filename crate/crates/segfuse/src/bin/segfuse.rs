use std::process::ExitCode;

fn main() -> ExitCode {
    segfuse::cli::main_with(std::env::args_os().collect())
}
