fn main() {
    std::process::exit(alpha_csf::cli::main());
}
