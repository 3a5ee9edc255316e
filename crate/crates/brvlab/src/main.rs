fn main() {
    std::process::exit(brvlab::cli::main());
}
