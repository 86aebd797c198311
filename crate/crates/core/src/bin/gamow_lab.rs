fn main() -> std::process::ExitCode {
    gamow_core::cli::main()
}
