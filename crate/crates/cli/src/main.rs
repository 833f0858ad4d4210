fn main() {
    std::process::exit(drivevol_cli::run(std::env::args_os()));
}
