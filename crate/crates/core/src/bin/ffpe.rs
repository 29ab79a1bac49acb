fn main() {
    std::process::exit(ffpe::cli::main());
}
