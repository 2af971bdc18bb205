fn main() {
    std::process::exit(vog::cli::main())
}
