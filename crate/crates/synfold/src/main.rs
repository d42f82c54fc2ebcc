use std::process::ExitCode;

fn main() -> ExitCode {
    synfold::cli::main()
}
