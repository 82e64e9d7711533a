fn main() -> std::process::ExitCode {
    momentlab::cli::main_with_env()
}
