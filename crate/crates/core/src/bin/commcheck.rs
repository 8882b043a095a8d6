fn main() -> std::process::ExitCode {
    commcheck::cli::main()
}
