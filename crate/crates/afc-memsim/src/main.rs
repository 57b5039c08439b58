fn main() {
    std::process::exit(afc_memsim::cli::cli_main(std::env::args()));
}
