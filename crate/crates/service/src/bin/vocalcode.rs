fn main() -> std::process::ExitCode {
    vocalcode_service::cli::run(std::env::args_os())
}
