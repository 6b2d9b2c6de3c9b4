fn main() {
    std::process::exit(sicfet_core::cli::run(std::env::args_os()));
}
