fn main() {
    std::process::exit(tsvd::cli::main());
}
