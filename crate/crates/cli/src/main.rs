fn main() {
    std::process::exit(sympinf_cli::run(std::env::args_os()));
}
