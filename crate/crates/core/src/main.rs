fn main() {
    std::process::exit(desens_ckf::cli::main());
}
