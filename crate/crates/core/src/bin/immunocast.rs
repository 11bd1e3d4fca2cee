fn main() -> std::process::ExitCode {
    immunocast::cli::main()
}
