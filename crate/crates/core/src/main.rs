fn main() {
    std::process::exit(subsetter::cli::main());
}
