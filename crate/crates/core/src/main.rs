fn main() {
    std::process::exit(markovcat::cli::main());
}
