fn main() {
    std::process::exit(ring_orbit::cli::main_with(std::env::args_os()));
}
