fn main() {
    std::process::exit(ccd_sim::app::main_from(std::env::args_os()));
}
