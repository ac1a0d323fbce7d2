fn main() {
    std::process::exit(flowlab::cli::main());
}
