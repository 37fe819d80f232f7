fn main() {
    std::process::exit(hartree3d::cli::run_cli(std::env::args_os()));
}
