fn main() {
    std::process::exit(censadd::cli::main_entry());
}
