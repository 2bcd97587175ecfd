fn main() {
    std::process::exit(pcamg::cli::main());
}
