fn main() -> std::process::ExitCode {
    vocabdrift::cli::main()
}
