fn main() {
    std::process::exit(mrcm_core::cli::run_command(std::env::args_os()));
}
