fn main() {
    std::process::exit(mwdp_cli::run(std::env::args_os()));
}
