fn main() -> std::process::ExitCode {
    pomloc::cli::main()
}
