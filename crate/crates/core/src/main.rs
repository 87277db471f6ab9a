fn main() -> std::process::ExitCode {
    mixlaw::cli::main_entry()
}
